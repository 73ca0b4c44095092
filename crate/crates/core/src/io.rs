//! Plain CSV formats for matrices, snapshots, spectra, eigenmeasures and
//! sweep tables. Lines starting with `#` are comments (used for the
//! provenance header) and are skipped by the readers. Floats are written in
//! Rust's shortest round-trip form, so reading back is bit-exact.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::data::SnapshotPair;
use crate::edmd::{Diagnostics, KoopmanMatrix};
use crate::error::{KoopmanError, Result};
use crate::spectral::{Eigenmeasure, SpectralDecomp};

fn comment_lines<W: Write>(w: &mut W, header: &[String]) -> Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn data_lines<R: BufRead>(r: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.to_string());
    }
    Ok(out)
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| KoopmanError::Parse(format!("`{s}` is not a number")))
}

fn keyed<'a>(line: Option<&'a String>, key: &str) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(','))
        .ok_or_else(|| KoopmanError::Parse(format!("expected `{key},…` line")))
}

/// Writes `N`, `provenance`, `dictionary` and `conditioning` lines, then one
/// row of interleaved `re,im` pairs per matrix row.
pub fn write_matrix<W: Write>(w: &mut W, k: &KoopmanMatrix, header: &[String]) -> Result<()> {
    comment_lines(w, header)?;
    let d = &k.diagnostics;
    writeln!(w, "N,{}", k.size())?;
    writeln!(w, "provenance,{}", k.provenance)?;
    writeln!(w, "dictionary,{}", k.dictionary)?;
    writeln!(
        w,
        "conditioning,{},{},{},{},{}",
        d.sigma_max, d.sigma_min, d.rank, d.rank_deficient as u8, d.saturated as u8
    )?;
    for row in k.a.row_iter() {
        let cells: Vec<String> = row.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<KoopmanMatrix> {
    let lines = data_lines(r)?;
    let mut it = lines.iter();
    let n: usize = keyed(it.next(), "N")?
        .parse()
        .map_err(|_| KoopmanError::Parse("bad matrix size".into()))?;
    let provenance = keyed(it.next(), "provenance")?.parse()?;
    let dictionary = keyed(it.next(), "dictionary")?.to_string();
    let cond: Vec<&str> = keyed(it.next(), "conditioning")?.split(',').collect();
    if cond.len() != 5 {
        return Err(KoopmanError::Parse("conditioning line needs five fields".into()));
    }
    let flag = |s: &str| s.trim() == "1";
    let diagnostics = Diagnostics {
        sigma_max: parse_num(cond[0])?,
        sigma_min: parse_num(cond[1])?,
        rank: cond[2].trim().parse().map_err(|_| KoopmanError::Parse("bad rank".into()))?,
        rank_deficient: flag(cond[3]),
        saturated: flag(cond[4]),
    };
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let line = it
            .next()
            .ok_or_else(|| KoopmanError::Parse(format!("matrix has fewer than {n} rows")))?;
        let vals = line.split(',').map(parse_num).collect::<Result<Vec<f64>>>()?;
        if vals.len() != 2 * n {
            return Err(KoopmanError::Parse(format!("row {i} has {} fields, expected {}", vals.len(), 2 * n)));
        }
        for j in 0..n {
            a[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(KoopmanMatrix {
        a,
        dictionary,
        provenance,
        diagnostics,
    })
}

/// `d,M,provenance` header and its values, then one `x_1..x_d,y_1..y_d` row
/// per snapshot.
pub fn write_snapshots<W: Write>(w: &mut W, s: &SnapshotPair, header: &[String]) -> Result<()> {
    comment_lines(w, header)?;
    let d = s.dim();
    writeln!(w, "d,M,provenance")?;
    writeln!(w, "{},{},{}", d, s.len(), s.provenance)?;
    let names: Vec<String> = (1..=d)
        .map(|i| format!("x_{i}"))
        .chain((1..=d).map(|i| format!("y_{i}")))
        .collect();
    writeln!(w, "{}", names.join(","))?;
    for j in 0..s.len() {
        let cells: Vec<String> = s
            .x
            .column(j)
            .iter()
            .chain(s.y.column(j).iter())
            .map(|v| v.to_string())
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_snapshots<R: BufRead>(r: R) -> Result<SnapshotPair> {
    let lines = data_lines(r)?;
    if lines.first().map(String::as_str) != Some("d,M,provenance") {
        return Err(KoopmanError::Parse("missing `d,M,provenance` header".into()));
    }
    let meta: Vec<&str> = lines
        .get(1)
        .ok_or_else(|| KoopmanError::Parse("missing snapshot metadata".into()))?
        .splitn(3, ',')
        .collect();
    if meta.len() != 3 {
        return Err(KoopmanError::Parse("bad snapshot metadata".into()));
    }
    let bad = || KoopmanError::Parse("bad snapshot metadata".into());
    let d: usize = meta[0].parse().map_err(|_| bad())?;
    let m: usize = meta[1].parse().map_err(|_| bad())?;
    let provenance = meta[2].parse()?;
    let rows = &lines[3.min(lines.len())..];
    if rows.len() != m {
        return Err(KoopmanError::Parse(format!("expected {m} snapshot rows, found {}", rows.len())));
    }
    let mut x = DMatrix::zeros(d, m);
    let mut y = DMatrix::zeros(d, m);
    for (j, row) in rows.iter().enumerate() {
        let vals = row.split(',').map(parse_num).collect::<Result<Vec<f64>>>()?;
        if vals.len() != 2 * d {
            return Err(KoopmanError::Parse(format!("snapshot row {j} has {} fields", vals.len())));
        }
        for i in 0..d {
            x[(i, j)] = vals[i];
            y[(i, j)] = vals[d + i];
        }
    }
    Ok(SnapshotPair {
        x,
        y,
        provenance,
        domain_escapes: 0,
    })
}

/// `re,im,residual` per eigenvalue.
pub fn write_spectrum<W: Write>(w: &mut W, decomp: &SpectralDecomp, header: &[String]) -> Result<()> {
    comment_lines(w, header)?;
    writeln!(w, "re,im,residual")?;
    for (l, r) in decomp.eigenvalues.iter().zip(&decomp.residuals) {
        writeln!(w, "{},{},{}", l.re + 0.0, l.im + 0.0, r)?;
    }
    Ok(())
}

/// Eigenvalues from a spectrum file.
pub fn read_spectrum<R: BufRead>(r: R) -> Result<Vec<Complex64>> {
    let lines = data_lines(r)?;
    lines
        .iter()
        .skip(1)
        .map(|l| {
            let v = l.split(',').map(parse_num).collect::<Result<Vec<f64>>>()?;
            if v.len() != 3 {
                return Err(KoopmanError::Parse(format!("bad spectrum row `{l}`")));
            }
            Ok(Complex64::new(v[0], v[1]))
        })
        .collect()
}

/// `x_1..x_d,re_weight,im_weight` per atom.
pub fn write_eigenmeasure<W: Write>(w: &mut W, nu: &Eigenmeasure, header: &[String]) -> Result<()> {
    comment_lines(w, header)?;
    let d = nu.atoms.first().map(|(x, _)| x.dim()).unwrap_or(0);
    let mut names: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    names.push("re_weight".into());
    names.push("im_weight".into());
    writeln!(w, "{}", names.join(","))?;
    for (x, c) in &nu.atoms {
        let mut cells: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        cells.push(c.re.to_string());
        cells.push(c.im.to_string());
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    /// `analytic` or the sample count.
    pub m_or_analytic: String,
    pub seed: Option<u64>,
    pub step: usize,
    pub l2_error: f64,
    pub frob_gap: Option<f64>,
    pub spectrum_file: Option<String>,
}

pub const SWEEP_COLUMNS: &str = "N,M_or_analytic,seed,step,l2_error,frob_gap,spectrum_file";

pub fn write_sweep<W: Write>(w: &mut W, rows: &[SweepRow], header: &[String]) -> Result<()> {
    comment_lines(w, header)?;
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.n,
            r.m_or_analytic,
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.step,
            r.l2_error,
            r.frob_gap.map(|g| g.to_string()).unwrap_or_default(),
            r.spectrum_file.as_deref().unwrap_or("")
        )?;
    }
    Ok(())
}

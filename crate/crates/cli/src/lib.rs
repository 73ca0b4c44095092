//! Command-line harness for Koopman approximation experiments: fitting,
//! spectra, prediction, eigenmeasures and the convergence studies. Every
//! output file starts with a `#` header echoing the configuration.

pub mod params;
pub mod studies;
pub mod validate;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use koopman_core::io::{write_eigenmeasure, write_matrix, write_snapshots, write_spectrum, write_sweep, SweepRow};
use koopman_core::predict::{DictFamily, SampleSize, SweepCell};
use koopman_core::spectral::{oscillation_seminorm, TestFunction};
use koopman_core::svg::{spectrum_scatter, Series};
use koopman_core::{
    eig, fit_analytic, fit_edmd_with, gauss_rule, generate_iid, generate_trajectory,
    fit_trajectory, pf_check, EdmdOptions, KoopmanError, KoopmanMatrix, Provenance, SpectralDecomp,
};
use num_complex::Complex64;

pub use params::Params;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] KoopmanError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "koopman", version, about = "Koopman operator approximation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit K_{N,M} from sampled snapshots
    Edmd,
    /// Build the sampling-free K_N by quadrature
    Analytic,
    /// Eigenvalues, residuals and an SVG scatter of one operator
    Spectrum,
    /// Predict f(x) = x along one trajectory
    Predict,
    /// Eigenmeasure of K_{N,N} on a trajectory, with identity checks
    Eigenmeasure,
    /// Multi-run studies
    #[command(subcommand)]
    Study(Study),
    /// Report configuration problems without running anything
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Study {
    /// Hausdorff distance between sampled and analytic spectra per (M, seed)
    Spectra,
    /// Trajectory prediction with the analytic and sampled operators
    Prediction,
    /// Frobenius gap ‖A_{N,M} − A_N‖ against M
    McRate,
    /// L2 prediction error of K_N against N
    StrongConvergence,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Edmd => "edmd",
            Command::Analytic => "analytic",
            Command::Spectrum => "spectrum",
            Command::Predict => "predict",
            Command::Eigenmeasure => "eigenmeasure",
            Command::Study(Study::Spectra) => "study spectra",
            Command::Study(Study::Prediction) => "study prediction",
            Command::Study(Study::McRate) => "study mc-rate",
            Command::Study(Study::StrongConvergence) => "study strong-convergence",
            Command::Validate => "validate",
        }
    }
}

/// Writes files under the output directory, each prefixed with the header.
struct Output {
    dir: PathBuf,
    header: Vec<String>,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(command: Command, p: &Params) -> Result<Self, CliError> {
        let dir = p.out_dir();
        fs::create_dir_all(&dir)?;
        let mut line = format!("koopman {VERSION} {} {}", command.name(), p.echo());
        if !p.reproducible {
            let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            line.push_str(&format!(" generated={ts}"));
        }
        Ok(Output { dir, header: vec![line], written: Vec::new() })
    }

    fn file<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>, &[String]) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w, &self.header)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, svg: String) -> Result<(), CliError> {
        self.file(name, |w, header| {
            for line in header {
                writeln!(w, "<!-- {} -->", line.replace("--", "- -"))?;
            }
            w.write_all(svg.as_bytes())?;
            Ok(())
        })
    }
}

/// Runs one command. Returns the lines to print on standard output.
pub fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let p = cli.params.resolve()?;
    let cmd = cli.command;
    if cmd == Command::Validate {
        return Ok(validate::validate(&p).iter().map(ToString::to_string).collect());
    }
    let mut out = Output::new(cmd, &p)?;
    let mut log = match cmd {
        Command::Edmd => run_edmd(&p, &mut out)?,
        Command::Analytic => run_analytic(&p, &mut out)?,
        Command::Spectrum => run_spectrum(&p, &mut out)?,
        Command::Predict => run_predict(&p, &mut out)?,
        Command::Eigenmeasure => run_eigenmeasure(&p, &mut out)?,
        Command::Study(Study::Spectra) => study_spectra(&p, &mut out)?,
        Command::Study(Study::Prediction) => study_prediction(&p, &mut out)?,
        Command::Study(Study::McRate) => study_mc_rate(&p, &mut out)?,
        Command::Study(Study::StrongConvergence) => study_strong_convergence(&p, &mut out)?,
        Command::Validate => unreachable!(),
    };
    log.extend(out.written.iter().map(|f| format!("wrote {}", f.display())));
    Ok(log)
}

fn first(list: Vec<usize>, key: &str) -> Result<usize, CliError> {
    match list.as_slice() {
        [m] => Ok(*m),
        _ => Err(CliError::Config(format!("`--{key}` takes a single value for this command"))),
    }
}

fn size_of(p: &Params) -> Result<SampleSize, CliError> {
    if p.analytic {
        Ok(SampleSize::Analytic)
    } else {
        Ok(SampleSize::Samples(first(p.m_list()?, "M")?))
    }
}

fn conditioning(k: &KoopmanMatrix) -> String {
    let d = &k.diagnostics;
    format!(
        "N={} rank={} condition={:.3e}{}{}",
        k.size(),
        d.rank,
        d.condition(),
        if d.rank_deficient { " RANK-DEFICIENT" } else { "" },
        if d.saturated { " QUADRATURE-SATURATED" } else { "" }
    )
}

fn run_edmd(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let m = first(p.m_list()?, "M")?;
    let snaps = if p.trajectory {
        generate_trajectory(&system, &p.x0(&measure)?, m)?
    } else {
        generate_iid(&system, &measure, m, p.seed_list()[0])?
    };
    let options = EdmdOptions { rtol: None, tikhonov: p.tikhonov.unwrap_or(0.0) };
    let k = fit_edmd_with(&snaps, &dict, options)?;
    out.file("edmd_snapshots.csv", |w, h| Ok(write_snapshots(w, &snaps, h)?))?;
    out.file("edmd_matrix.csv", |w, h| Ok(write_matrix(w, &k, h)?))?;
    let mut log = vec![conditioning(&k)];
    if snaps.domain_escapes > 0 {
        log.push(format!("warning: {} snapshot images left the domain", snaps.domain_escapes));
    }
    Ok(log)
}

fn run_analytic(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let k = fit_analytic(&system, &dict, &measure, p.quad_order)?;
    out.file("analytic_matrix.csv", |w, h| Ok(write_matrix(w, &k, h)?))?;
    Ok(vec![format!("{} {}", conditioning(&k), k.provenance)])
}

fn run_spectrum(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let (k, system) = match &p.matrix {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
            let k = koopman_core::io::read_matrix(std::io::BufReader::new(file))?;
            (k, p.system.as_ref().map(|_| p.system()).transpose()?)
        }
        None => {
            let system = p.system()?;
            let measure = p.measure(&system)?;
            let dict = p.dictionary(&measure)?;
            let k = studies::fit(&system, &dict, &measure, size_of(p)?, p.seed_list()[0], p.quad_order)?;
            (k, Some(system))
        }
    };
    let decomp = eig(&k)?;
    out.file("spectrum.csv", |w, h| Ok(write_spectrum(w, &decomp, h)?))?;
    let label = k.provenance.to_string();
    let series = match k.provenance {
        Provenance::Analytic { .. } => Series::analytic(label, decomp.eigenvalues.clone()),
        Provenance::Sampled { .. } => Series::sampled(label, decomp.eigenvalues.clone()),
    };
    out.svg("spectrum.svg", spectrum_scatter(&format!("spectrum of {}", k.dictionary), &[series]))?;

    // Oscillation diagnostic, when the measure is known.
    let measure = match (&system, &p.measure) {
        (Some(s), _) => p.measure(s).ok(),
        (None, Some(spec)) => koopman_core::Measure::parse(spec).ok(),
        (None, None) => None,
    };
    if let Some(measure) = measure {
        let dict = koopman_core::Dictionary::parse(&k.dictionary, Some(&measure))?;
        let rule = gauss_rule(&measure, p.quad_order.unwrap_or(4 * dict.len()).max(64))?;
        let rows = (0..decomp.len())
            .map(|j| Ok((j, oscillation_seminorm(&decomp, j, &dict, &rule)?)))
            .collect::<Result<Vec<_>, KoopmanError>>()?;
        out.file("spectrum_oscillation.csv", |w, h| {
            for line in h {
                writeln!(w, "# {line}")?;
            }
            writeln!(w, "index,re,im,seminorm")?;
            for (j, s) in rows {
                let l = decomp.eigenvalues[j];
                writeln!(w, "{j},{},{},{s}", l.re + 0.0, l.im + 0.0)?;
            }
            Ok(())
        })?;
    }
    Ok(vec![conditioning(&k)])
}

fn run_predict(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let x0 = p.x0(&measure)?;
    let runs = studies::prediction(
        &system,
        &dict,
        &measure,
        &x0,
        p.horizon(10),
        &[size_of(p)?],
        p.seed_list()[0],
        p.quad_order,
    )?;
    let run = &runs[0];
    out.file("prediction.csv", |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "step,predicted_re,predicted_im,truth_re,truth_im,error")?;
        let r = &run.result;
        for i in 0..r.horizon {
            let (a, b) = (r.predicted[(i, 0)], r.truth[(i, 0)]);
            writeln!(w, "{},{},{},{},{},{}", i + 1, a.re, a.im, b.re, b.im, r.errors[i])?;
        }
        Ok(())
    })?;
    Ok(vec![format!("x0={:?} rmse={:.6e}", x0, run.rmse)])
}

fn run_eigenmeasure(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let x0 = p.x0(&measure)?;
    let n = dict.len();
    let snaps = generate_trajectory(&system, &x0, n)?;
    let op = fit_trajectory(&snaps, &dict)?;
    let decomp = op.eig()?;
    let j = p.index.unwrap_or(0);
    let nu = op.eigenmeasure(&decomp, j)?;
    let defect = op.interpolation_defect(&dict)?;
    let one = |_: &[f64]| Complex64::new(1.0, 0.0);
    let x = |x: &[f64]| Complex64::new(x[0], 0.0);
    let x2 = |x: &[f64]| Complex64::new(x[0] * x[0], 0.0);
    let tests: [TestFunction<'_>; 3] = [&one, &x, &x2];
    let report = pf_check(&nu, &system, &tests)?;
    out.file("eigenmeasure.csv", |w, h| Ok(write_eigenmeasure(w, &nu, h)?))?;
    out.file("eigenmeasure_check.csv", |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "h,r1,r2")?;
        for (name, r) in ["1", "x", "x^2"].iter().zip(&report.residuals) {
            let r2 = r.r2.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{name},{},{r2}", r.r1)?;
        }
        Ok(())
    })?;
    let mut log = vec![
        format!("N={n} interpolation defect={defect:.3e} rank={}", op.diagnostics.rank),
        format!("eigenvalue {} = {}", j, nu.eigenvalue),
    ];
    if report.zero_eigenvalue {
        log.push("eigenvalue is zero; Perron-Frobenius check skipped".into());
    }
    Ok(log)
}

fn spectrum_file(out: &mut Output, name: &str, decomp: &SpectralDecomp) -> Result<(), CliError> {
    out.file(name, |w, h| Ok(write_spectrum(w, decomp, h)?))
}

fn study_spectra(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let ms = p.m_list()?;
    let study = studies::spectra(&system, &dict, &measure, &ms, &p.seed_list(), p.quad_order)?;
    out.file("spectra.csv", |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "M,seed,hausdorff")?;
        for c in &study.cells {
            writeln!(w, "{},{},{}", c.m, c.seed, c.hausdorff)?;
        }
        Ok(())
    })?;
    spectrum_file(out, "spectrum_analytic.csv", &study.analytic)?;
    for c in &study.cells {
        spectrum_file(out, &format!("spectrum_M{}_seed{}.csv", c.m, c.seed), &c.spectrum)?;
    }
    let n = dict.len();
    for &m in &ms {
        let sampled: Vec<Complex64> = study
            .cells
            .iter()
            .filter(|c| c.m == m)
            .flat_map(|c| c.spectrum.eigenvalues.iter().copied())
            .collect();
        let svg = spectrum_scatter(
            &format!("N={n}, M={m}"),
            &[
                Series::analytic(format!("K_{n} (analytic)"), study.analytic.eigenvalues.clone()),
                Series::sampled(format!("K_{n},{m} (sampled)"), sampled),
            ],
        );
        out.svg(&format!("spectra_M{m}.svg"), svg)?;
    }
    Ok(study
        .medians()
        .iter()
        .map(|(m, h)| format!("M={m} median hausdorff={h:.6e}"))
        .collect())
}

fn size_label(s: SampleSize) -> String {
    match s {
        SampleSize::Analytic => "analytic".into(),
        SampleSize::Samples(m) => m.to_string(),
    }
}

fn study_prediction(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let x0 = p.x0(&measure)?;
    let mut sizes = p.sizes()?;
    if !sizes.contains(&SampleSize::Analytic) {
        sizes.insert(0, SampleSize::Analytic);
    }
    let runs = studies::prediction(
        &system,
        &dict,
        &measure,
        &x0,
        p.horizon(10),
        &sizes,
        p.seed_list()[0],
        p.quad_order,
    )?;
    out.file("prediction_study.csv", |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "M_or_analytic,seed,step,predicted_re,predicted_im,truth_re,truth_im,error")?;
        for run in &runs {
            let r = &run.result;
            let seed = run.seed.map(|s| s.to_string()).unwrap_or_default();
            for i in 0..r.horizon {
                let (a, b) = (r.predicted[(i, 0)], r.truth[(i, 0)]);
                writeln!(
                    w,
                    "{},{seed},{},{},{},{},{},{}",
                    size_label(run.size),
                    i + 1,
                    a.re,
                    a.im,
                    b.re,
                    b.im,
                    r.errors[i]
                )?;
            }
        }
        Ok(())
    })?;
    out.file("prediction_summary.csv", |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "M_or_analytic,seed,rmse")?;
        for run in &runs {
            let seed = run.seed.map(|s| s.to_string()).unwrap_or_default();
            writeln!(w, "{},{seed},{}", size_label(run.size), run.rmse)?;
        }
        Ok(())
    })?;
    let mut log = vec![format!("x0={x0:?}")];
    log.extend(runs.iter().map(|r| format!("{} rmse={:.6e}", size_label(r.size), r.rmse)));
    Ok(log)
}

/// Sweep rows, one per (cell, step), plus the spectrum file of every cell.
fn sweep_output(out: &mut Output, prefix: &str, cells: &[SweepCell]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for c in cells {
        let file = match c.seed {
            Some(s) => format!("{prefix}_spectra/N{}_M{}_seed{s}.csv", c.n, size_label(c.size)),
            None => format!("{prefix}_spectra/N{}_{}.csv", c.n, size_label(c.size)),
        };
        spectrum_file(out, &file, &c.spectrum)?;
        for (i, e) in c.l2_errors.iter().enumerate() {
            rows.push(SweepRow {
                n: c.n,
                m_or_analytic: size_label(c.size),
                seed: c.seed,
                step: i + 1,
                l2_error: *e,
                frob_gap: Some(c.frob_gap),
                spectrum_file: Some(file.clone()),
            });
        }
    }
    out.file(&format!("{prefix}.csv"), |w, h| Ok(write_sweep(w, &rows, h)?))
}

fn study_mc_rate(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let dict = p.dictionary(&measure)?;
    let study = studies::mc_rate(
        &system,
        &dict,
        &measure,
        &p.m_list()?,
        &p.seed_list(),
        p.horizon(1),
        p.eval()?,
        p.quad_order,
    )?;
    sweep_output(out, "mc_rate", &study.cells)?;
    out.file("mc_rate_summary.csv", |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "M,median_frob_gap")?;
        for (m, g) in &study.medians {
            writeln!(w, "{m},{g}")?;
        }
        Ok(())
    })?;
    let mut log: Vec<String> = study
        .medians
        .iter()
        .map(|(m, g)| format!("M={m} median frobenius gap={g:.6e}"))
        .collect();
    log.push(format!("log-log slope={:.4}", study.slope));
    Ok(log)
}

fn study_strong_convergence(p: &Params, out: &mut Output) -> Result<Vec<String>, CliError> {
    let system = p.system()?;
    let measure = p.measure(&system)?;
    let family = DictFamily::parse(p.dict.as_deref().unwrap_or("legendre"))?;
    let cells = studies::strong_convergence(
        &system,
        family,
        &measure,
        &p.n_list()?,
        p.horizon(10),
        p.eval()?,
        p.quad_order,
    )?;
    sweep_output(out, "strong_convergence", &cells)?;
    Ok(cells
        .iter()
        .map(|c| {
            let steps: Vec<String> = c.l2_errors.iter().map(|e| format!("{e:.3e}")).collect();
            format!("N={} l2 errors by step: {}", c.n, steps.join(" "))
        })
        .collect())
}

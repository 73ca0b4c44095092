//! The four experiment studies as plain computations; writing their
//! results to disk is left to the command layer.

use num_complex::Complex64;
use rayon::prelude::*;

use koopman_core::predict::{
    convergence_sweep, observable_coefficients, DictFamily, EvalSpec, PredictionResult, SampleSize, SweepCell,
    SweepSpec,
};
use koopman_core::{
    eig, fit_analytic, fit_edmd, generate_iid, hausdorff, predict, Dictionary, DynamicalSystem, KoopmanMatrix,
    Measure, Result, SpectralDecomp,
};

/// The observable used by every prediction study, `f(x) = x₁`.
pub fn first_coordinate(x: &[f64]) -> Complex64 {
    Complex64::new(x[0], 0.0)
}

/// Quadrature order for projecting `f` onto an N-element dictionary.
fn projection_order(n: usize) -> usize {
    (2 * n).max(64)
}

#[derive(Debug, Clone)]
pub struct SpectraCell {
    pub m: usize,
    pub seed: u64,
    pub spectrum: SpectralDecomp,
    pub hausdorff: f64,
}

#[derive(Debug, Clone)]
pub struct SpectraStudy {
    pub analytic: SpectralDecomp,
    /// Ordered by M, then seed, as given.
    pub cells: Vec<SpectraCell>,
}

impl SpectraStudy {
    /// `(M, median Hausdorff distance over seeds)` per M.
    pub fn medians(&self) -> Vec<(usize, f64)> {
        group_medians(self.cells.iter().map(|c| (c.m, c.hausdorff)))
    }
}

/// Spectra of `K_{N,M}` against the analytic `K_N` for every (M, seed).
pub fn spectra(
    system: &DynamicalSystem,
    dict: &Dictionary,
    measure: &Measure,
    ms: &[usize],
    seeds: &[u64],
    quad_order: Option<usize>,
) -> Result<SpectraStudy> {
    let analytic = eig(&fit_analytic(system, dict, measure, quad_order)?)?;
    let jobs: Vec<(usize, u64)> = ms.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(m, seed)| {
            let snaps = generate_iid(system, measure, m, seed)?;
            let spectrum = eig(&fit_edmd(&snaps, dict)?)?;
            let hausdorff = hausdorff(&spectrum.eigenvalues, &analytic.eigenvalues)?;
            Ok(SpectraCell { m, seed, spectrum, hausdorff })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectraStudy { analytic, cells })
}

#[derive(Debug, Clone)]
pub struct PredictionRun {
    pub size: SampleSize,
    pub seed: Option<u64>,
    pub result: PredictionResult,
    /// Root mean square of the per-step errors.
    pub rmse: f64,
}

/// Trajectory prediction of `f(x) = x₁` from `x0` with the analytic
/// operator and with `K_{N,M}` for each sampled size.
#[allow(clippy::too_many_arguments)]
pub fn prediction(
    system: &DynamicalSystem,
    dict: &Dictionary,
    measure: &Measure,
    x0: &[f64],
    horizon: usize,
    sizes: &[SampleSize],
    seed: u64,
    quad_order: Option<usize>,
) -> Result<Vec<PredictionRun>> {
    let c = observable_coefficients(dict, measure, projection_order(dict.len()), first_coordinate)?;
    sizes
        .par_iter()
        .map(|&size| {
            let (k, seed) = match size {
                SampleSize::Analytic => (fit_analytic(system, dict, measure, quad_order)?, None),
                SampleSize::Samples(m) => (fit_edmd(&generate_iid(system, measure, m, seed)?, dict)?, Some(seed)),
            };
            let result = predict(&k, &c, x0, horizon, dict, system)?;
            let rmse = rms(&result.errors);
            Ok(PredictionRun { size, seed, result, rmse })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct McRateStudy {
    pub cells: Vec<SweepCell>,
    /// `(M, median ‖A_{N,M} − A_N‖_F)` per M.
    pub medians: Vec<(usize, f64)>,
    /// Least-squares slope of log median gap against log M.
    pub slope: f64,
}

/// Monte Carlo convergence of `A_{N,M}` to `A_N` in the Frobenius norm.
#[allow(clippy::too_many_arguments)]
pub fn mc_rate(
    system: &DynamicalSystem,
    dict: &Dictionary,
    measure: &Measure,
    ms: &[usize],
    seeds: &[u64],
    horizon: usize,
    eval: EvalSpec,
    quad_order: Option<usize>,
) -> Result<McRateStudy> {
    let family = DictFamily::parse(&dict.to_string())?;
    let spec = SweepSpec {
        system,
        measure,
        family,
        n_list: vec![dict.len()],
        sizes: ms.iter().map(|&m| SampleSize::Samples(m)).collect(),
        horizon,
        seeds: seeds.to_vec(),
        eval,
        analytic_order: quad_order,
    };
    let cells = convergence_sweep(&spec, first_coordinate)?;
    let medians = group_medians(cells.iter().map(|c| match c.size {
        SampleSize::Samples(m) => (m, c.frob_gap),
        SampleSize::Analytic => (0, c.frob_gap),
    }));
    let pts: Vec<(f64, f64)> = medians.iter().map(|&(m, g)| ((m as f64).ln(), g.ln())).collect();
    Ok(McRateStudy {
        cells,
        slope: ls_slope(&pts),
        medians,
    })
}

/// Per-step L2 error of the analytic `K_N` for each N of a dictionary family.
pub fn strong_convergence(
    system: &DynamicalSystem,
    family: DictFamily,
    measure: &Measure,
    n_list: &[usize],
    horizon: usize,
    eval: EvalSpec,
    quad_order: Option<usize>,
) -> Result<Vec<SweepCell>> {
    let spec = SweepSpec {
        system,
        measure,
        family,
        n_list: n_list.to_vec(),
        sizes: vec![SampleSize::Analytic],
        horizon,
        seeds: Vec::new(),
        eval,
        analytic_order: quad_order,
    };
    convergence_sweep(&spec, first_coordinate)
}

/// The Koopman matrix a single-shot command works with.
pub fn fit(
    system: &DynamicalSystem,
    dict: &Dictionary,
    measure: &Measure,
    size: SampleSize,
    seed: u64,
    quad_order: Option<usize>,
) -> Result<KoopmanMatrix> {
    match size {
        SampleSize::Analytic => fit_analytic(system, dict, measure, quad_order),
        SampleSize::Samples(m) => fit_edmd(&generate_iid(system, measure, m, seed)?, dict),
    }
}

pub fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Medians of values grouped by key, keys in first-seen order.
fn group_medians(items: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
    for (k, v) in items {
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => g.1.push(v),
            None => groups.push((k, vec![v])),
        }
    }
    groups.into_iter().map(|(k, mut v)| (k, median(&mut v))).collect()
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

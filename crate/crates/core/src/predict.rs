//! Finite-horizon prediction `f(Tⁱx₀) ≈ C Aⁱ ψ(x₀)` and its `L2(μ)` error.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::fit_analytic;
use crate::data::{generate_iid, weighted_project};
use crate::dictionary::Dictionary;
use crate::edmd::{fit_edmd, KoopmanMatrix};
use crate::error::{KoopmanError, Result};
use crate::quadrature::gauss_rule;
use crate::spectral::{eig, SpectralDecomp};
use crate::systems::{DynamicalSystem, Measure, State};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub horizon: usize,
    /// Row `i` holds the prediction for step `i + 1`.
    pub predicted: DMatrix<Complex64>,
    /// Row `i` holds `f(T^{i+1} x₀)` from direct iteration.
    pub truth: DMatrix<Complex64>,
    /// Euclidean norm of the row difference.
    pub errors: Vec<f64>,
}

fn check_observable(k: &KoopmanMatrix, c: &DMatrix<Complex64>, dict: &Dictionary) -> Result<()> {
    if c.ncols() != k.size() {
        return Err(KoopmanError::DimensionMismatch {
            expected: k.size(),
            found: c.ncols(),
        });
    }
    if dict.len() != k.size() {
        return Err(KoopmanError::DimensionMismatch {
            expected: k.size(),
            found: dict.len(),
        });
    }
    Ok(())
}

/// Predicts the vector observable `f = Cψ` along the orbit of `x0` for
/// steps `1..=horizon`. Powers of `A` are applied one step at a time.
pub fn predict(
    k: &KoopmanMatrix,
    c: &DMatrix<Complex64>,
    x0: &[f64],
    horizon: usize,
    dict: &Dictionary,
    system: &DynamicalSystem,
) -> Result<PredictionResult> {
    check_observable(k, c, dict)?;
    let n_obs = c.nrows();
    let mut predicted = DMatrix::zeros(horizon, n_obs);
    let mut truth = DMatrix::zeros(horizon, n_obs);
    let mut z = dict.evaluate(x0)?;
    let mut x = State(x0.to_vec());
    for step in 0..horizon {
        z = &k.a * z;
        x = system.apply(&x)?;
        predicted.set_row(step, &(c * &z).transpose());
        truth.set_row(step, &(c * dict.evaluate(&x)?).transpose());
    }
    let errors = (0..horizon)
        .map(|i| (predicted.row(i) - truth.row(i)).norm())
        .collect();
    Ok(PredictionResult {
        horizon,
        predicted,
        truth,
        errors,
    })
}

/// How the `μ`-integral of the squared prediction error is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSpec {
    Quadrature { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

/// Per-step `(∫ ‖C Aⁱ ψ − f∘Tⁱ‖² dμ)^{1/2}` for `i = 1..=horizon`.
///
/// The truth `f∘Tⁱ` is obtained by iterating `T` and evaluating `f = Cψ` on
/// the true state; an orbit leaving the domain is an error.
#[allow(clippy::too_many_arguments)]
pub fn l2_error(
    k: &KoopmanMatrix,
    c: &DMatrix<Complex64>,
    dict: &Dictionary,
    system: &DynamicalSystem,
    measure: &Measure,
    horizon: usize,
    eval: EvalSpec,
) -> Result<Vec<f64>> {
    check_observable(k, c, dict)?;
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let (mut points, weights) = match eval {
        EvalSpec::Quadrature { order } => {
            let r = gauss_rule(measure, order)?;
            (r.nodes, r.weights)
        }
        EvalSpec::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(KoopmanError::InvalidArgument("need at least one Monte Carlo sample".into()));
            }
            let pts = measure.sample(samples, seed);
            let w = vec![1.0 / samples as f64; samples];
            (pts, w)
        }
    };
    let mut z = dict.evaluate_batch(&points)?;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        z = &k.a * z;
        for p in points.iter_mut() {
            let next = system.apply(p)?;
            if system.escapes(&next) {
                return Err(KoopmanError::DomainEscape {
                    state: next.0,
                    context: format!("of `{}` during truth iteration", system.name()),
                });
            }
            *p = next;
        }
        let truth = c * dict.evaluate_batch(&points)?;
        let pred = c * &z;
        let sq: f64 = (0..points.len())
            .map(|j| weights[j] * (pred.column(j) - truth.column(j)).norm_squared())
            .sum();
        out.push(sq.sqrt());
    }
    Ok(out)
}

/// Coefficient row vector `C` (1×N) of a scalar observable, by weighted
/// least squares on the quadrature nodes of `measure`. Exact when `f` lies
/// in the dictionary span.
pub fn observable_coefficients<F>(dict: &Dictionary, measure: &Measure, order: usize, f: F) -> Result<DMatrix<Complex64>>
where
    F: Fn(&[f64]) -> Complex64,
{
    let rule = gauss_rule(measure, order)?;
    let values: Vec<Complex64> = rule.nodes.iter().map(|x| f(x)).collect();
    let coef = weighted_project(dict, &rule.nodes, Some(&rule.weights), &values)?;
    Ok(DMatrix::from_iterator(1, coef.len(), coef.iter().map(|z| z.conj())))
}

/// Dictionary family indexed by its size N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictFamily {
    Legendre,
    Monomial,
    Fourier,
}

impl DictFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.split(':').next().unwrap_or("").trim() {
            "legendre" => Ok(DictFamily::Legendre),
            "monomial" => Ok(DictFamily::Monomial),
            "fourier" => Ok(DictFamily::Fourier),
            _ => Err(KoopmanError::Parse(format!("unknown dictionary family `{s}`"))),
        }
    }

    /// The dictionary with exactly `n` observables.
    pub fn build(self, n: usize, measure: &Measure) -> Result<Dictionary> {
        if n == 0 {
            return Err(KoopmanError::InvalidArgument("dictionary size must be positive".into()));
        }
        let spec = match self {
            DictFamily::Legendre => format!("legendre:{}", n - 1),
            DictFamily::Monomial => format!("monomial:{}", n - 1),
            DictFamily::Fourier if n % 2 == 1 => format!("fourier:{}", (n - 1) / 2),
            DictFamily::Fourier => {
                return Err(KoopmanError::InvalidArgument(format!(
                    "fourier dictionaries have odd size, got {n}"
                )))
            }
        };
        Dictionary::parse(&spec, Some(measure))
    }
}

/// Whether a sweep cell uses `M` samples or the analytic construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleSize {
    Analytic,
    Samples(usize),
}

#[derive(Debug, Clone)]
pub struct SweepSpec<'a> {
    pub system: &'a DynamicalSystem,
    pub measure: &'a Measure,
    pub family: DictFamily,
    pub n_list: Vec<usize>,
    /// Sample sizes; [`SampleSize::Analytic`] cells ignore seeds.
    pub sizes: Vec<SampleSize>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub eval: EvalSpec,
    /// Quadrature order for the analytic fit; `None` picks the default.
    pub analytic_order: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub n: usize,
    pub size: SampleSize,
    pub seed: Option<u64>,
    /// Per-step L2 errors, steps `1..=horizon`.
    pub l2_errors: Vec<f64>,
    /// `‖A_{N,M} − A_N‖_F`; zero for analytic cells.
    pub frob_gap: f64,
    pub spectrum: SpectralDecomp,
}

/// Prediction-error sweep over dictionary sizes and sample sizes for the
/// observable `f`. Cells run in parallel and are returned in the order
/// (N, size, seed) of the inputs.
pub fn convergence_sweep<F>(spec: &SweepSpec<'_>, f: F) -> Result<Vec<SweepCell>>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if spec.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KoopmanError::InvalidArgument("N list must be strictly ascending".into()));
    }
    let mut jobs = Vec::new();
    for &n in &spec.n_list {
        for &size in &spec.sizes {
            match size {
                SampleSize::Analytic => jobs.push((n, size, None)),
                SampleSize::Samples(_) => {
                    jobs.extend(spec.seeds.iter().map(|s| (n, size, Some(*s))));
                }
            }
        }
    }
    let per_n: Vec<(usize, Dictionary, KoopmanMatrix, DMatrix<Complex64>)> = spec
        .n_list
        .par_iter()
        .map(|&n| {
            let dict = spec.family.build(n, spec.measure)?;
            let analytic = fit_analytic(spec.system, &dict, spec.measure, spec.analytic_order)?;
            let order = (2 * n).max(64);
            let c = observable_coefficients(&dict, spec.measure, order, &f)?;
            Ok((n, dict, analytic, c))
        })
        .collect::<Result<_>>()?;
    jobs.par_iter()
        .map(|&(n, size, seed)| {
            let (_, dict, analytic, c) = per_n.iter().find(|p| p.0 == n).expect("built above");
            let k = match (size, seed) {
                (SampleSize::Samples(m), Some(seed)) => {
                    let snaps = generate_iid(spec.system, spec.measure, m, seed)?;
                    fit_edmd(&snaps, dict)?
                }
                _ => analytic.clone(),
            };
            let l2_errors = l2_error(&k, c, dict, spec.system, spec.measure, spec.horizon, spec.eval)?;
            let frob_gap = k.frobenius_gap(analytic)?;
            let spectrum = eig(&k)?;
            Ok(SweepCell {
                n,
                size,
                seed,
                l2_errors,
                frob_gap,
                spectrum,
            })
        })
        .collect()
}

/// Scalar observable coefficients as a column vector `c` with `f = cᴴψ`.
pub fn coefficient_vector(c_row: &DMatrix<Complex64>) -> DVector<Complex64> {
    c_row.row(0).adjoint()
}

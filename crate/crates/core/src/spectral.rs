//! Spectra and eigenfunctions of Koopman matrices, spectrum comparison,
//! oscillation diagnostics, and eigenmeasures of square trajectory fits.
//!
//! Eigenfunctions are `φ_j = w_jᴴ ψ` with `w_j` a *left* eigenvector,
//! `w_jᴴ A = λ_j w_jᴴ`. Then `K φ_j = w_jᴴ A ψ = λ_j φ_j`. The reported
//! spectrum is `σ(A)`; the coefficient map `c ↦ Aᴴc` has spectrum
//! `conj(σ(A))`, which coincides with `σ(A)` for real `A`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::data::{SnapshotPair, SnapshotProvenance};
use crate::dictionary::Dictionary;
use crate::edmd::{Diagnostics, KoopmanMatrix, Provenance};
use crate::error::{KoopmanError, Result};
use crate::linalg::{eig_right, pseudo_inverse};
use crate::quadrature::QuadratureRule;
use crate::systems::{DynamicalSystem, State};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<Complex64>,
    /// Column j is the unit-norm left eigenvector `w_j`.
    pub eigen_coeffs: DMatrix<Complex64>,
    /// `‖Aᴴ w_j − conj(λ_j) w_j‖₂`.
    pub residuals: Vec<f64>,
}

impl SpectralDecomp {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn coeffs(&self, j: usize) -> Result<DVector<Complex64>> {
        if j >= self.len() {
            return Err(KoopmanError::IndexOutOfRange { index: j, len: self.len() });
        }
        Ok(self.eigen_coeffs.column(j).into_owned())
    }
}

/// Magnitudes are bucketed at this resolution before ordering so that
/// conjugate pairs tie exactly and then sort by argument.
const MAGNITUDE_QUANTUM: f64 = 1e-9;

/// Full eigendecomposition of `A` in the left-eigenvector convention.
///
/// Each `w_j` has unit 2-norm and its largest-magnitude entry is real and
/// positive. Eigenvalues are ordered by descending magnitude, then by
/// ascending argument in `(−π, π]`.
pub fn eig(k: &KoopmanMatrix) -> Result<SpectralDecomp> {
    let a = &k.a;
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(KoopmanError::InvalidArgument("matrix has non-finite entries".into()));
    }
    let ah = a.adjoint();
    let (mu, w) = eig_right(&ah).ok_or_else(|| KoopmanError::EigenFailure {
        condition: pseudo_inverse(a, None, 0.0).condition(),
    })?;
    let n = a.nrows();
    let mut pairs: Vec<(Complex64, DVector<Complex64>)> = (0..n)
        .map(|j| {
            let mut v = w.column(j).into_owned();
            fix_phase(&mut v);
            (mu[j].conj(), v)
        })
        .collect();
    pairs.sort_by(|(l1, _), (l2, _)| {
        let key = |l: &Complex64| (l.norm() / MAGNITUDE_QUANTUM).round() as i64;
        key(l2).cmp(&key(l1)).then(arg(l1).total_cmp(&arg(l2)))
    });
    let mut coeffs = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (j, (lambda, v)) in pairs.into_iter().enumerate() {
        residuals.push((&ah * &v - &v * lambda.conj()).norm());
        coeffs.set_column(j, &v);
        eigenvalues.push(lambda);
    }
    Ok(SpectralDecomp {
        eigenvalues,
        eigen_coeffs: coeffs,
        residuals,
    })
}

fn arg(z: &Complex64) -> f64 {
    // Map −π to π so the range is (−π, π] and −0 imaginary parts tie with +0.
    let a = Complex64::new(z.re, z.im + 0.0).arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

fn fix_phase(v: &mut DVector<Complex64>) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, x) in v.iter().enumerate() {
        // Strict comparison keeps the first index among equal magnitudes.
        if x.norm() > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = x.norm();
        }
    }
    if best_norm > 0.0 {
        let phase = v[best] / best_norm;
        let rot = phase.conj();
        v.iter_mut().for_each(|x| *x *= rot);
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
}

/// Hausdorff distance between two finite subsets of ℂ.
pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(KoopmanError::EmptyInput("spectrum"));
    }
    let directed = |p: &[Complex64], q: &[Complex64]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// `φ_j(x) = w_jᴴ ψ(x)`.
pub fn evaluate_eigenfunction(
    decomp: &SpectralDecomp,
    j: usize,
    dict: &Dictionary,
    x: &[f64],
) -> Result<Complex64> {
    let w = decomp.coeffs(j)?;
    check_size(decomp, dict)?;
    let psi = dict.evaluate(x)?;
    Ok(w.dotc(&psi))
}

fn check_size(decomp: &SpectralDecomp, dict: &Dictionary) -> Result<()> {
    if decomp.len() != dict.len() {
        return Err(KoopmanError::DimensionMismatch {
            expected: decomp.len(),
            found: dict.len(),
        });
    }
    Ok(())
}

/// `∫ ‖∇φ_j‖² dμ` for the eigenfunction normalized to unit `L2(μ)` norm,
/// with `μ` realized by `rule`. Large values flag highly oscillatory
/// eigenfunctions whose eigenvalues may be spurious.
pub fn oscillation_seminorm(
    decomp: &SpectralDecomp,
    j: usize,
    dict: &Dictionary,
    rule: &QuadratureRule,
) -> Result<f64> {
    let w = decomp.coeffs(j)?;
    check_size(decomp, dict)?;
    let mut mass = 0.0;
    let mut grad = 0.0;
    for (x, weight) in rule.nodes.iter().zip(&rule.weights) {
        let phi = w.dotc(&dict.evaluate(x)?);
        let jac = dict.derivative(x)?;
        let g: f64 = (0..jac.ncols())
            .map(|k| w.dotc(&jac.column(k).into_owned()).norm_sqr())
            .sum();
        mass += weight * phi.norm_sqr();
        grad += weight * g;
    }
    if mass.is_nan() || mass <= 0.0 {
        return Err(KoopmanError::InvalidArgument(
            "eigenfunction vanishes on the quadrature nodes".into(),
        ));
    }
    Ok(grad / mass)
}

/// Atomic complex measure `ν_N = φ_N dμ̂_N` on a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenmeasure {
    /// `(x_i, φ(x_i)/N)`, in trajectory order.
    pub atoms: Vec<(State, Complex64)>,
    pub eigenvalue: Complex64,
    /// `(x_{N+1}, φ(x_{N+1}))` with `x_{N+1} = T(x_N)`, same normalization.
    pub successor: (State, Complex64),
}

impl Eigenmeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `∫ h dν`.
    pub fn integrate<H: Fn(&[f64]) -> Complex64>(&self, h: H) -> Complex64 {
        self.atoms.iter().map(|(x, c)| h(x) * c).sum()
    }

    /// Eigenfunction values `φ(x_i)` at the atoms.
    pub fn values(&self) -> Vec<Complex64> {
        let n = self.atoms.len() as f64;
        self.atoms.iter().map(|(_, c)| c * n).collect()
    }
}

/// Eigenmeasure of the j-th eigenpair of a square (M = N) trajectory fit.
///
/// `φ_j` is scaled so that `max_i |φ_j(x_i)| = 1` over the atoms, with the
/// maximizing value real and positive.
pub fn eigenmeasure_extract(
    k_nn: &KoopmanMatrix,
    decomp: &SpectralDecomp,
    j: usize,
    snapshots: &SnapshotPair,
    dict: &Dictionary,
) -> Result<Eigenmeasure> {
    if snapshots.provenance != SnapshotProvenance::Trajectory {
        return Err(KoopmanError::InvalidArgument(
            "eigenmeasures need trajectory snapshots".into(),
        ));
    }
    let n = dict.len();
    if snapshots.len() != n || k_nn.size() != n {
        return Err(KoopmanError::DimensionMismatch {
            expected: n,
            found: snapshots.len(),
        });
    }
    check_size(decomp, dict)?;
    let xs = snapshots.x_states();
    let psi_x = dict.evaluate_batch(&xs)?;
    let p = pseudo_inverse(&psi_x, None, 0.0);
    if !p.full_rank() {
        return Err(KoopmanError::RankDeficient {
            condition: p.condition(),
            rank: p.rank,
            size: n,
        });
    }
    let w = decomp.coeffs(j)?;
    let mut values: Vec<Complex64> = psi_x.column_iter().map(|c| w.dotc(&c.into_owned())).collect();
    let last = State(snapshots.y.column(n - 1).iter().copied().collect());
    let mut succ = w.dotc(&dict.evaluate(&last)?);

    sup_normalize(&mut values, &mut succ)?;

    let nf = n as f64;
    Ok(Eigenmeasure {
        atoms: xs.into_iter().zip(values).map(|(x, v)| (x, v / nf)).collect(),
        eigenvalue: decomp.eigenvalues[j],
        successor: (last, succ),
    })
}

/// Scales atom values to unit sup norm, with the earliest near-maximal
/// value real and positive; the successor value gets the same factor.
fn sup_normalize(values: &mut [Complex64], succ: &mut Complex64) -> Result<()> {
    let vmax = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return Err(KoopmanError::InvalidArgument("eigenfunction vanishes on every atom".into()));
    }
    // Near-ties resolve to the earliest atom, so equal-modulus eigenfunctions
    // (rotations) take their phase from x_1 regardless of rounding.
    let iref = values
        .iter()
        .position(|v| v.norm() >= vmax * (1.0 - 1e-9))
        .unwrap_or(0);
    let r = values[iref];
    let scale = r.conj() / (r.norm() * vmax);
    values.iter_mut().for_each(|v| *v *= scale);
    values[iref] = Complex64::new(values[iref].re, 0.0);
    *succ *= scale;
    Ok(())
}

/// `K_{N,N}` of a trajectory `x_1, …, x_{N+1}` in atom coordinates.
///
/// The data matrices satisfy `ψ(Y) = ψ(X) B` with `B` the companion matrix
/// whose first `N − 1` columns shift and whose last column `c` solves
/// `ψ(X) c = ψ(x_{N+1})`. Hence
/// `A = ψ(X) B ψ(X)⁻¹`: `A` and `B` share their spectrum, and the atom
/// values `u = wᴴψ(X)` of an eigenfunction are left eigenvectors of `B`.
/// Working with `B` never forms `ψ(X)⁻¹`, whose condition number exceeds
/// `1/ε` for polynomial dictionaries on chaotic orbits long before `N = 100`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOperator {
    pub companion: DMatrix<Complex64>,
    /// Last column of the companion matrix.
    pub coeffs: DVector<Complex64>,
    /// `x_1, …, x_{N+1}`.
    pub states: Vec<State>,
    /// Conditioning of `ψ(X)`.
    pub diagnostics: Diagnostics,
    pub dictionary: String,
}

/// Builds the atom-coordinate form of `K_{N,N}` from `N` trajectory
/// snapshots and an `N`-element dictionary.
pub fn fit_trajectory(snapshots: &SnapshotPair, dict: &Dictionary) -> Result<TrajectoryOperator> {
    check_square_trajectory(snapshots, dict)?;
    let n = dict.len();
    let mut states = snapshots.x_states();
    states.push(State(snapshots.y.column(n - 1).iter().copied().collect()));
    let psi_x = dict.evaluate_batch(&states[..n])?;
    let psi_next = dict.evaluate(&states[n])?;
    let p = pseudo_inverse(&psi_x, None, 0.0);
    let residual = |c: &DVector<Complex64>| (&psi_x * c - &psi_next).iter().map(|z| z.norm()).fold(0.0, f64::max);
    // Pivoted LU keeps the residual at rounding level even when ψ(X) is
    // numerically singular; the truncated pseudoinverse does not.
    let mut coeffs = &p.pinv * &psi_next;
    if let Some(c) = psi_x.clone().full_piv_lu().solve(&psi_next) {
        if c.iter().all(|z| z.is_finite()) && residual(&c) < residual(&coeffs) {
            coeffs = c;
        }
    }
    let mut companion = DMatrix::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    companion.set_column(n - 1, &coeffs);
    Ok(TrajectoryOperator {
        companion,
        coeffs,
        states,
        diagnostics: Diagnostics {
            sigma_max: p.sigma_max(),
            sigma_min: p.sigma_min(),
            rank: p.rank,
            rank_deficient: p.rank < n,
            saturated: false,
        },
        dictionary: dict.to_string(),
    })
}

impl TrajectoryOperator {
    pub fn size(&self) -> usize {
        self.coeffs.len()
    }

    /// `max |ψ(Y) − ψ(X) B|`, the interpolation defect of `K_{N,N}`
    /// evaluated without inverting `ψ(X)`.
    pub fn interpolation_defect(&self, dict: &Dictionary) -> Result<f64> {
        let n = self.size();
        if dict.len() != n {
            return Err(KoopmanError::DimensionMismatch { expected: n, found: dict.len() });
        }
        let psi_x = dict.evaluate_batch(&self.states[..n])?;
        let psi_y = dict.evaluate_batch(&self.states[1..])?;
        Ok(max_entry(&(psi_y - psi_x * &self.companion)))
    }

    /// Spectrum of `B`, which equals that of `K_{N,N}`. Column `j` of
    /// `eigen_coeffs` is `conj(u_j)` for the atom values `u_j`.
    pub fn eig(&self) -> Result<SpectralDecomp> {
        let n = self.size();
        eig(&KoopmanMatrix {
            a: self.companion.clone(),
            dictionary: format!("atoms:{}", self.dictionary),
            provenance: Provenance::Sampled {
                m: n,
                source: SnapshotProvenance::Trajectory,
            },
            diagnostics: self.diagnostics,
        })
    }

    /// Eigenmeasure of eigenpair `j` of [`TrajectoryOperator::eig`].
    pub fn eigenmeasure(&self, decomp: &SpectralDecomp, j: usize) -> Result<Eigenmeasure> {
        let n = self.size();
        if decomp.len() != n {
            return Err(KoopmanError::DimensionMismatch { expected: n, found: decomp.len() });
        }
        let mut values: Vec<Complex64> = decomp.coeffs(j)?.iter().map(|v| v.conj()).collect();
        let mut succ: Complex64 = values.iter().zip(self.coeffs.iter()).map(|(u, c)| u * c).sum();
        sup_normalize(&mut values, &mut succ)?;
        let nf = n as f64;
        Ok(Eigenmeasure {
            atoms: self.states[..n]
                .iter()
                .cloned()
                .zip(values.into_iter().map(|v| v / nf))
                .collect(),
            eigenvalue: decomp.eigenvalues[j],
            successor: (self.states[n].clone(), succ),
        })
    }
}

fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn check_square_trajectory(snapshots: &SnapshotPair, dict: &Dictionary) -> Result<()> {
    if snapshots.provenance != SnapshotProvenance::Trajectory {
        return Err(KoopmanError::InvalidArgument(
            "eigenmeasures need trajectory snapshots".into(),
        ));
    }
    if snapshots.len() != dict.len() {
        return Err(KoopmanError::DimensionMismatch {
            expected: dict.len(),
            found: snapshots.len(),
        });
    }
    Ok(())
}

/// Residuals of the finite-sample eigen-identities for one test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfResidual {
    /// `|(1/N) Σ h(x_i) φ(x_{i+1}) − λ (1/N) Σ h(x_i) φ(x_i)|`.
    pub r1: f64,
    /// `|∫ h∘T dν − λ⁻¹ ∫ h dν|`; `None` when `λ = 0`.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfReport {
    pub eigenvalue: Complex64,
    pub residuals: Vec<PfResidual>,
    /// Set when λ = 0 and the Perron–Frobenius check was skipped.
    pub zero_eigenvalue: bool,
}

pub type TestFunction<'a> = &'a dyn Fn(&[f64]) -> Complex64;

/// Checks the sampled Koopman eigen-identity and the Perron–Frobenius
/// eigenmeasure relation of `nu` against each test function.
pub fn pf_check(nu: &Eigenmeasure, system: &DynamicalSystem, test_fns: &[TestFunction<'_>]) -> Result<PfReport> {
    if nu.is_empty() {
        return Err(KoopmanError::EmptyInput("eigenmeasure atoms"));
    }
    let n = nu.len();
    let values = nu.values();
    let images = nu
        .atoms
        .iter()
        .map(|(x, _)| system.apply(x))
        .collect::<Result<Vec<_>>>()?;
    let lambda = nu.eigenvalue;
    let zero = lambda.norm() == 0.0;
    let nf = n as f64;
    let residuals = test_fns
        .iter()
        .map(|h| {
            let hx: Vec<Complex64> = nu.atoms.iter().map(|(x, _)| h(x)).collect();
            let shifted: Complex64 = (0..n)
                .map(|i| {
                    let next = if i + 1 < n { values[i + 1] } else { nu.successor.1 };
                    hx[i] * next
                })
                .sum::<Complex64>()
                / nf;
            let plain: Complex64 = hx.iter().zip(&values).map(|(a, b)| a * b).sum::<Complex64>() / nf;
            let r1 = (shifted - lambda * plain).norm();
            let r2 = (!zero).then(|| {
                let pushed: Complex64 = images
                    .iter()
                    .zip(&nu.atoms)
                    .map(|(y, (_, c))| h(y) * c)
                    .sum();
                (pushed - plain / lambda).norm()
            });
            PfResidual { r1, r2 }
        })
        .collect();
    Ok(PfReport {
        eigenvalue: lambda,
        residuals,
        zero_eigenvalue: zero,
    })
}

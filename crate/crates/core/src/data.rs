//! Snapshot data `X = [x₁ … x_M]`, `Y = [y₁ … y_M]` with `y_i = T(x_i)`,
//! empirical measures, and L2 projection onto the dictionary span.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dictionary::Dictionary;
use crate::error::{KoopmanError, Result};
use crate::linalg::{pseudo_inverse, to_complex};
use crate::systems::{DynamicalSystem, Measure, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotProvenance {
    Iid { seed: u64 },
    Trajectory,
}

impl fmt::Display for SnapshotProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotProvenance::Iid { seed } => write!(f, "iid:seed={seed}"),
            SnapshotProvenance::Trajectory => write!(f, "trajectory"),
        }
    }
}

impl std::str::FromStr for SnapshotProvenance {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "trajectory" {
            return Ok(SnapshotProvenance::Trajectory);
        }
        s.strip_prefix("iid:seed=")
            .and_then(|v| v.parse().ok())
            .map(|seed| SnapshotProvenance::Iid { seed })
            .ok_or_else(|| KoopmanError::Parse(format!("unknown snapshot provenance `{s}`")))
    }
}

/// Snapshot matrices stored column-wise, d×M each.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub provenance: SnapshotProvenance,
    /// Number of columns of `y` (and, for trajectories, of `x`) outside the
    /// system's domain.
    pub domain_escapes: usize,
}

impl SnapshotPair {
    pub fn from_states(
        xs: &[State],
        ys: &[State],
        provenance: SnapshotProvenance,
    ) -> Result<Self> {
        if xs.is_empty() {
            return Err(KoopmanError::EmptyInput("snapshot set"));
        }
        if xs.len() != ys.len() {
            return Err(KoopmanError::DimensionMismatch {
                expected: xs.len(),
                found: ys.len(),
            });
        }
        let d = xs[0].dim();
        if let Some(bad) = xs.iter().chain(ys).find(|s| s.dim() != d) {
            return Err(KoopmanError::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let x = DMatrix::from_fn(d, xs.len(), |i, j| xs[j][i]);
        let y = DMatrix::from_fn(d, ys.len(), |i, j| ys[j][i]);
        Ok(SnapshotPair {
            x,
            y,
            provenance,
            domain_escapes: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn x_states(&self) -> Vec<State> {
        columns(&self.x)
    }

    pub fn y_states(&self) -> Vec<State> {
        columns(&self.y)
    }

    /// The empirical measure `μ̂_M = (1/M) Σ δ_{x_i}` of the `X` columns.
    pub fn empirical_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure {
            atoms: self.x_states(),
        }
    }
}

fn columns(m: &DMatrix<f64>) -> Vec<State> {
    m.column_iter().map(|c| State(c.iter().copied().collect())).collect()
}

/// Uniform atomic probability measure on a finite point set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<State>,
}

impl EmpiricalMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn integrate<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> Complex64 {
        let w = self.weight();
        self.atoms.iter().map(|x| f(x) * w).sum()
    }
}

/// iid snapshots `x_i ~ μ`, `y_i = T(x_i)`.
pub fn generate_iid(
    system: &DynamicalSystem,
    measure: &Measure,
    m: usize,
    seed: u64,
) -> Result<SnapshotPair> {
    if m == 0 {
        return Err(KoopmanError::InvalidArgument("M must be at least 1".into()));
    }
    if measure.dim() != system.dim() {
        return Err(KoopmanError::DimensionMismatch {
            expected: system.dim(),
            found: measure.dim(),
        });
    }
    let xs = measure.sample(m, seed);
    let ys = xs
        .iter()
        .map(|x| system.apply(x))
        .collect::<Result<Vec<_>>>()?;
    let escapes = ys.iter().filter(|y| system.escapes(y)).count();
    let mut pair = SnapshotPair::from_states(&xs, &ys, SnapshotProvenance::Iid { seed })?;
    pair.domain_escapes = escapes;
    Ok(pair)
}

/// Snapshots along one orbit: `X = (x₀, T x₀, …, T^{M−1} x₀)`, `Y` the
/// same orbit shifted by one step.
pub fn generate_trajectory(system: &DynamicalSystem, x0: &[f64], m: usize) -> Result<SnapshotPair> {
    if m == 0 {
        return Err(KoopmanError::InvalidArgument("M must be at least 1".into()));
    }
    let (orbit, escapes) = system.orbit(x0, m + 1)?;
    let mut pair =
        SnapshotPair::from_states(&orbit[..m], &orbit[1..], SnapshotProvenance::Trajectory)?;
    pair.domain_escapes = escapes;
    Ok(pair)
}

/// Coefficients `c` minimizing `Σ_i |cᴴψ(x_i) − f(x_i)|²`.
///
/// Fails with [`KoopmanError::RankDeficient`] when the empirical Gram
/// matrix is numerically singular.
pub fn empirical_project<P: AsRef<[f64]>>(
    dict: &Dictionary,
    points: &[P],
    f_values: &[Complex64],
) -> Result<DVector<Complex64>> {
    weighted_project(dict, points, None, f_values)
}

/// Weighted variant of [`empirical_project`]: minimizes
/// `Σ_i w_i |cᴴψ(x_i) − f(x_i)|²`, e.g. with quadrature weights.
pub fn weighted_project<P: AsRef<[f64]>>(
    dict: &Dictionary,
    points: &[P],
    weights: Option<&[f64]>,
    f_values: &[Complex64],
) -> Result<DVector<Complex64>> {
    if points.is_empty() {
        return Err(KoopmanError::EmptyInput("projection points"));
    }
    if f_values.len() != points.len() {
        return Err(KoopmanError::DimensionMismatch {
            expected: points.len(),
            found: f_values.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(KoopmanError::DimensionMismatch {
                expected: points.len(),
                found: w.len(),
            });
        }
    }
    let mut psi = dict.evaluate_batch(points)?;
    let mut f = DVector::from_column_slice(f_values);
    if let Some(w) = weights {
        for (j, wj) in w.iter().enumerate() {
            let s = wj.sqrt();
            psi.column_mut(j).scale_mut(s);
            f[j] *= s;
        }
    }
    let pinv = pseudo_inverse(&psi, None, 0.0);
    if pinv.rank < dict.len() {
        return Err(KoopmanError::RankDeficient {
            condition: pinv.condition().powi(2),
            rank: pinv.rank,
            size: dict.len(),
        });
    }
    // cᴴ = fᵀ ψ(X)⁺  ⇔  c = (ψ(X)⁺)ᴴ conj(f)
    Ok(pinv.pinv.adjoint() * f.conjugate())
}

/// Real-arithmetic `ψ(X)` when the dictionary allows it, complex otherwise.
pub(crate) enum DataMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl DataMatrix {
    pub fn evaluate(dict: &Dictionary, points: &[State]) -> Result<Self> {
        Ok(match dict.evaluate_batch_real(points)? {
            Some(m) => DataMatrix::Real(m),
            None => DataMatrix::Complex(dict.evaluate_batch(points)?),
        })
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            DataMatrix::Real(m) => to_complex(m),
            DataMatrix::Complex(m) => m.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_snapshots() {
        let mu = Measure::uniform(-1.0, 1.0).unwrap();
        let s = generate_iid(&DynamicalSystem::identity(), &mu, 20, 4).unwrap();
        assert_eq!(s.x, s.y);
    }

    #[test]
    fn logistic_snapshots() {
        let mu = Measure::uniform(-1.0, 1.0).unwrap();
        let s = generate_iid(&DynamicalSystem::logistic(), &mu, 3, 11).unwrap();
        for j in 0..3 {
            assert_eq!(s.y[(0, j)], 2.0 * s.x[(0, j)] * s.x[(0, j)] - 1.0);
        }
        assert_eq!(s, generate_iid(&DynamicalSystem::logistic(), &mu, 3, 11).unwrap());
        assert_eq!(s.domain_escapes, 0);
    }

    #[test]
    fn trajectory_layout() {
        let s = generate_trajectory(&DynamicalSystem::logistic(), &[0.3], 3).unwrap();
        assert_eq!(s.x[(0, 0)], 0.3);
        assert!((s.x[(0, 1)] + 0.82).abs() < 1e-15);
        assert!((s.x[(0, 2)] - 0.3448).abs() < 1e-15);
        for j in 0..2 {
            assert_eq!(s.y[(0, j)], s.x[(0, j + 1)]);
        }
        let id = generate_trajectory(&DynamicalSystem::identity(), &[0.7], 5).unwrap();
        assert!(id.x.iter().all(|v| *v == 0.7));
    }

    #[test]
    fn rotation_orbit_is_equispaced() {
        let m = 7;
        let omega = std::f64::consts::TAU / m as f64;
        let s = generate_trajectory(&DynamicalSystem::rotation(omega), &[0.0], m).unwrap();
        let mut xs: Vec<f64> = s.x.iter().copied().collect();
        xs.sort_by(f64::total_cmp);
        for (k, x) in xs.iter().enumerate() {
            assert!((x - k as f64 * omega).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_basis_element() {
        let d = Dictionary::legendre(3, -1.0, 1.0).unwrap();
        let pts = Measure::uniform(-1.0, 1.0).unwrap().sample(50, 1);
        let f: Vec<Complex64> = pts.iter().map(|x| d.evaluate(x).unwrap()[1]).collect();
        let coef = empirical_project(&d, &pts, &f).unwrap();
        for (i, v) in coef.iter().enumerate() {
            let want = if i == 1 { 1.0 } else { 0.0 };
            assert!((v - c(want)).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_onto_constants_is_mean() {
        let d = Dictionary::monomial(0);
        let pts = [[-1.0], [0.0], [1.0]];
        let f: Vec<Complex64> = pts.iter().map(|x| c(x[0] * x[0])).collect();
        let coef = empirical_project(&d, &pts, &f).unwrap();
        assert!((coef[0] - c(2.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_gram_is_reported() {
        let d = Dictionary::monomial(3);
        let pts = [[0.5], [0.5], [0.5], [0.5]];
        let f = vec![c(1.0); 4];
        match empirical_project(&d, &pts, &f) {
            Err(KoopmanError::RankDeficient { condition, rank, size }) => {
                assert!(condition > 1e8);
                assert!(rank < size);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn complex_coefficients_use_conjugate_convention() {
        let d = Dictionary::fourier(1);
        let pts = Measure::uniform_circle().sample(40, 2);
        // f = 2i·e^{ix} = cᴴψ with c = (0, −2i, 0)
        let f: Vec<Complex64> = pts
            .iter()
            .map(|x| Complex64::new(0.0, 2.0) * Complex64::from_polar(1.0, x[0]))
            .collect();
        let coef = empirical_project(&d, &pts, &f).unwrap();
        assert!((coef[1] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
        assert!(coef[0].norm() < 1e-12 && coef[2].norm() < 1e-12);
    }

    #[test]
    fn provenance_round_trip() {
        for p in [SnapshotProvenance::Iid { seed: 42 }, SnapshotProvenance::Trajectory] {
            assert_eq!(p.to_string().parse::<SnapshotProvenance>().unwrap(), p);
        }
    }
}

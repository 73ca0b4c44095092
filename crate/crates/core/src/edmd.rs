//! Sampled EDMD: `A_{N,M} = ψ(Y) ψ(X)⁺`.
//!
//! # Coefficient convention
//!
//! An observable in the dictionary span is written `φ = cᴴψ`. The EDMD
//! operator acts as `K φ = cᴴ A ψ`, so in coefficient space it is the map
//! `c ↦ Aᴴ c`, **not** `c ↦ A c`. Every routine in this crate that moves
//! coefficients through the operator uses [`apply_operator`]; eigenfunctions
//! come from *left* eigenvectors of `A` (see [`crate::spectral`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::data::{DataMatrix, SnapshotPair, SnapshotProvenance};
use crate::dictionary::Dictionary;
use crate::error::{KoopmanError, Result};
use crate::linalg::{max_abs, pseudo_inverse, to_complex};

/// How a Koopman matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Sampled { m: usize, source: SnapshotProvenance },
    Analytic { order: usize },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Sampled { m, source } => write!(f, "sampled:M={m};{source}"),
            Provenance::Analytic { order } => write!(f, "analytic:{order}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || KoopmanError::Parse(format!("unknown matrix provenance `{s}`"));
        if let Some(order) = s.strip_prefix("analytic:") {
            return Ok(Provenance::Analytic {
                order: order.parse().map_err(|_| bad())?,
            });
        }
        let rest = s.strip_prefix("sampled:M=").ok_or_else(bad)?;
        let (m, source) = rest.split_once(';').ok_or_else(bad)?;
        Ok(Provenance::Sampled {
            m: m.parse().map_err(|_| bad())?,
            source: source.parse()?,
        })
    }
}

/// Conditioning of the matrix that was inverted: `ψ(X)` for sampled fits,
/// `M_μ` for analytic ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub rank: usize,
    /// Rank below N: the least-squares minimizer is not unique and the
    /// Moore–Penrose solution was returned.
    pub rank_deficient: bool,
    /// Quadrature order escalation hit its cap before converging.
    pub saturated: bool,
}

impl Diagnostics {
    pub fn condition(&self) -> f64 {
        if self.sigma_min > 0.0 {
            self.sigma_max / self.sigma_min
        } else {
            f64::INFINITY
        }
    }
}

/// Finite-dimensional Koopman approximation on a dictionary span.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanMatrix {
    pub a: DMatrix<Complex64>,
    pub dictionary: String,
    pub provenance: Provenance,
    pub diagnostics: Diagnostics,
}

impl KoopmanMatrix {
    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    /// `Aⁱ` by repeated multiplication.
    pub fn power(&self, i: usize) -> DMatrix<Complex64> {
        let n = self.size();
        let mut p = DMatrix::identity(n, n);
        for _ in 0..i {
            p = &self.a * p;
        }
        p
    }

    /// Frobenius distance between two matrices of equal size.
    pub fn frobenius_gap(&self, other: &KoopmanMatrix) -> Result<f64> {
        if self.size() != other.size() {
            return Err(KoopmanError::DimensionMismatch {
                expected: self.size(),
                found: other.size(),
            });
        }
        Ok((&self.a - &other.a).norm())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EdmdOptions {
    /// Relative singular-value cutoff; `None` means `max(N, M)·ε`.
    pub rtol: Option<f64>,
    /// Tikhonov parameter γ ≥ 0; zero gives the Moore–Penrose solution.
    pub tikhonov: f64,
}

/// `A_{N,M} = ψ(Y) ψ(X)⁺` with default options.
pub fn fit_edmd(snapshots: &SnapshotPair, dict: &Dictionary) -> Result<KoopmanMatrix> {
    fit_edmd_with(snapshots, dict, EdmdOptions::default())
}

pub fn fit_edmd_with(
    snapshots: &SnapshotPair,
    dict: &Dictionary,
    options: EdmdOptions,
) -> Result<KoopmanMatrix> {
    if snapshots.is_empty() {
        return Err(KoopmanError::EmptyInput("snapshot set"));
    }
    if options.tikhonov < 0.0 {
        return Err(KoopmanError::InvalidArgument("tikhonov parameter must be nonnegative".into()));
    }
    let xs = snapshots.x_states();
    let ys = snapshots.y_states();
    let n = dict.len();
    let (a, diag) = match (DataMatrix::evaluate(dict, &xs)?, DataMatrix::evaluate(dict, &ys)?) {
        (DataMatrix::Real(px), DataMatrix::Real(py)) => {
            let p = pseudo_inverse(&px, options.rtol, options.tikhonov);
            let a = to_complex(&(py * &p.pinv));
            (a, (p.sigma_max(), p.sigma_min(), p.rank))
        }
        (px, py) => {
            let px = px.to_complex();
            let p = pseudo_inverse(&px, options.rtol, options.tikhonov);
            (py.to_complex() * &p.pinv, (p.sigma_max(), p.sigma_min(), p.rank))
        }
    };
    let (sigma_max, sigma_min, rank) = diag;
    Ok(KoopmanMatrix {
        a,
        dictionary: dict.to_string(),
        provenance: Provenance::Sampled {
            m: snapshots.len(),
            source: snapshots.provenance,
        },
        diagnostics: Diagnostics {
            sigma_max,
            sigma_min,
            rank,
            rank_deficient: rank < n,
            saturated: false,
        },
    })
}

/// Coefficients of `K φ` for `φ = c_φᴴ ψ`: returns `Aᴴ c_φ`.
pub fn apply_operator(k: &KoopmanMatrix, c_phi: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if c_phi.len() != k.size() {
        return Err(KoopmanError::DimensionMismatch {
            expected: k.size(),
            found: c_phi.len(),
        });
    }
    Ok(k.a.adjoint() * c_phi)
}

/// Empirical orthogonality defect of `K_{N,M} ψ_i` against `K ψ_i`:
/// `max_{i,j} |(1/M) Σ_k (ψ_i(y_k) − (Aψ(x_k))_i) conj(ψ_j(x_k))|`.
///
/// The defect vanishes exactly when `K_{N,M}` is the `L2(μ̂_M)` projection
/// of the Koopman operator; a singular empirical Gram matrix (where the
/// minimizer is not unique) is reported as an error.
pub fn orthogonality_residual(k: &KoopmanMatrix, snapshots: &SnapshotPair, dict: &Dictionary) -> Result<f64> {
    let (px, py) = data_matrices(snapshots, dict, k.size())?;
    let p = pseudo_inverse(&px, None, 0.0);
    if p.rank < dict.len() {
        return Err(KoopmanError::RankDeficient {
            condition: p.condition().powi(2),
            rank: p.rank,
            size: dict.len(),
        });
    }
    let m = snapshots.len() as f64;
    let defect = (py - &k.a * &px) * px.adjoint() / Complex64::new(m, 0.0);
    Ok(max_abs(&defect))
}

/// Largest entry of `|ψ(X)|` times largest entry of `|ψ(Y)|`; the natural
/// magnitude of the products entering [`orthogonality_residual`].
pub fn data_scale(snapshots: &SnapshotPair, dict: &Dictionary) -> Result<f64> {
    let (px, py) = data_matrices(snapshots, dict, dict.len())?;
    Ok(max_abs(&px).max(1.0) * max_abs(&py).max(1.0))
}

/// Largest interpolation error `max_{i,f} |ψ_f(y_i) − (Aψ(x_i))_f|`.
pub fn interpolation_defect(k: &KoopmanMatrix, snapshots: &SnapshotPair, dict: &Dictionary) -> Result<f64> {
    let (px, py) = data_matrices(snapshots, dict, k.size())?;
    Ok(max_abs(&(py - &k.a * px)))
}

fn data_matrices(
    snapshots: &SnapshotPair,
    dict: &Dictionary,
    n: usize,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if dict.len() != n {
        return Err(KoopmanError::DimensionMismatch {
            expected: n,
            found: dict.len(),
        });
    }
    Ok((
        dict.evaluate_batch(&snapshots.x_states())?,
        dict.evaluate_batch(&snapshots.y_states())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_iid, generate_trajectory};
    use crate::systems::{Domain, DynamicalSystem, Measure, State};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_gives_identity_matrix() {
        let mu = Measure::uniform(-1.0, 1.0).unwrap();
        let d = Dictionary::legendre(5, -1.0, 1.0).unwrap();
        let s = generate_iid(&DynamicalSystem::identity(), &mu, 200, 3).unwrap();
        let k = fit_edmd(&s, &d).unwrap();
        assert!((&k.a - DMatrix::identity(6, 6)).norm() < 1e-10);
        assert!(!k.diagnostics.rank_deficient);
    }

    #[test]
    fn doubling_map_on_two_points() {
        let t = DynamicalSystem::new("double", Domain::real_line(), |x| vec![2.0 * x[0]]);
        let xs = [State::from(1.0), State::from(-1.0)];
        let ys: Vec<State> = xs.iter().map(|x| t.apply(x).unwrap()).collect();
        let s = SnapshotPair::from_states(&xs, &ys, SnapshotProvenance::Trajectory).unwrap();
        let k = fit_edmd(&s, &Dictionary::monomial(1)).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(2.0)]);
        assert!((&k.a - want).norm() < 1e-14);
    }

    #[test]
    fn rotation_is_diagonal() {
        let omega = 0.9;
        let d = Dictionary::fourier(3);
        let s = generate_iid(&DynamicalSystem::rotation(omega), &Measure::uniform_circle(), 100, 8).unwrap();
        let k = fit_edmd(&s, &d).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let want = if i != j {
                    c(0.0)
                } else {
                    let mode = if i == 0 { 0.0 } else if i % 2 == 1 { (i / 2 + 1) as f64 } else { -((i / 2) as f64) };
                    Complex64::from_polar(1.0, mode * omega)
                };
                assert!((k.a[(i, j)] - want).norm() < 1e-10, "({i},{j})");
            }
        }
        assert!(orthogonality_residual(&k, &s, &d).unwrap() < 1e-12);
    }

    #[test]
    fn apply_operator_uses_adjoint() {
        let d = Dictionary::fourier(1);
        let k = KoopmanMatrix {
            a: DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)])),
            dictionary: d.to_string(),
            provenance: Provenance::Analytic { order: 1 },
            diagnostics: Diagnostics { sigma_max: 1.0, sigma_min: 1.0, rank: 3, rank_deficient: false, saturated: false },
        };
        let e1 = DVector::from_vec(vec![c(0.0), c(1.0), c(0.0)]);
        let out = apply_operator(&k, &e1).unwrap();
        assert!((out[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(apply_operator(&k, &DVector::from_vec(vec![c(1.0)])).is_err());
    }

    #[test]
    fn underdetermined_fit_is_flagged() {
        let mu = Measure::uniform(-1.0, 1.0).unwrap();
        let d = Dictionary::legendre(8, -1.0, 1.0).unwrap();
        let s = generate_iid(&DynamicalSystem::logistic(), &mu, 5, 1).unwrap();
        let k = fit_edmd(&s, &d).unwrap();
        assert!(k.diagnostics.rank_deficient);
        assert_eq!(k.diagnostics.rank, 5);
        // Still a least-squares minimizer: the residual is zero.
        assert!(interpolation_defect(&k, &s, &d).unwrap() < 1e-10);
        assert!(matches!(
            orthogonality_residual(&k, &s, &d),
            Err(KoopmanError::RankDeficient { .. })
        ));
    }

    #[test]
    fn square_trajectory_interpolates() {
        let omega = std::f64::consts::TAU * 2.0 / 7.0;
        let d = Dictionary::fourier(3);
        let s = generate_trajectory(&DynamicalSystem::rotation(omega), &[0.3], 7).unwrap();
        let k = fit_edmd(&s, &d).unwrap();
        assert!(interpolation_defect(&k, &s, &d).unwrap() < 1e-12);
        assert!(orthogonality_residual(&k, &s, &d).unwrap() < 1e-10);
    }

    #[test]
    fn tikhonov_shrinks_toward_zero() {
        let mu = Measure::uniform(-1.0, 1.0).unwrap();
        let d = Dictionary::legendre(4, -1.0, 1.0).unwrap();
        let s = generate_iid(&DynamicalSystem::logistic(), &mu, 100, 2).unwrap();
        let plain = fit_edmd(&s, &d).unwrap();
        let reg = fit_edmd_with(&s, &d, EdmdOptions { rtol: None, tikhonov: 1e3 }).unwrap();
        assert!(reg.a.norm() < plain.a.norm());
        assert!(fit_edmd_with(&s, &d, EdmdOptions { rtol: None, tikhonov: -1.0 }).is_err());
    }

    #[test]
    fn provenance_strings() {
        for p in [
            Provenance::Analytic { order: 64 },
            Provenance::Sampled { m: 1000, source: SnapshotProvenance::Iid { seed: 3 } },
            Provenance::Sampled { m: 9, source: SnapshotProvenance::Trajectory },
        ] {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        assert!("sampled:M=x;trajectory".parse::<Provenance>().is_err());
    }
}

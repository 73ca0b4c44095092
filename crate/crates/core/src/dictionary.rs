//! Finite dictionaries `ψ = [ψ₁, …, ψ_N]ᵀ` of scalar observables on a
//! one-dimensional state space.

use std::f64::consts::{SQRT_2, TAU};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{KoopmanError, Result};
use crate::quadrature::QuadratureRule;
use crate::systems::{Domain, Measure};

pub type ObservableVector = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `√(2k+1) P_k` composed with the affine map of the interval onto
    /// `[−1, 1]`, k = 0..=max_degree. Orthonormal for the uniform measure.
    NormalizedLegendre { max_degree: usize },
    /// `x^k`, k = 0..=max_degree.
    Monomial { max_degree: usize },
    /// `1, e^{ix}, e^{−ix}, e^{2ix}, e^{−2ix}, …` up to `|k| = max_mode`.
    Fourier { max_mode: usize },
    /// The single observable `√2 sin(2π·mode·x)` on `[0, 1]`.
    SineProbe { mode: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    family: Family,
    lower: f64,
    upper: f64,
    orthonormal_wrt: Option<Measure>,
}

impl Dictionary {
    pub fn legendre(max_degree: usize, lower: f64, upper: f64) -> Result<Self> {
        let domain = Domain::interval(lower, upper)?;
        Ok(Dictionary {
            family: Family::NormalizedLegendre { max_degree },
            lower,
            upper,
            orthonormal_wrt: Some(Measure::Uniform(domain)),
        })
    }

    pub fn monomial(max_degree: usize) -> Self {
        Dictionary {
            family: Family::Monomial { max_degree },
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            orthonormal_wrt: None,
        }
    }

    pub fn fourier(max_mode: usize) -> Self {
        Dictionary {
            family: Family::Fourier { max_mode },
            lower: 0.0,
            upper: TAU,
            orthonormal_wrt: Some(Measure::uniform_circle()),
        }
    }

    pub fn sine_probe(mode: usize) -> Result<Self> {
        if mode == 0 {
            return Err(KoopmanError::InvalidArgument(
                "sine probe mode must be positive".into(),
            ));
        }
        Ok(Dictionary {
            family: Family::SineProbe { mode },
            lower: 0.0,
            upper: 1.0,
            orthonormal_wrt: Some(Measure::uniform(0.0, 1.0)?),
        })
    }

    /// Parses `legendre:<deg>`, `monomial:<deg>`, `fourier:<modes>` or
    /// `sine:<mode>`. Legendre dictionaries are placed on the support of
    /// `measure` when it is a bounded interval and on `[−1, 1]` otherwise.
    pub fn parse(spec: &str, measure: Option<&Measure>) -> Result<Self> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| KoopmanError::Parse(format!("`{spec}`: expected <family>:<size>")))?;
        let n: usize = arg
            .trim()
            .parse()
            .map_err(|_| KoopmanError::Parse(format!("`{spec}`: `{arg}` is not a nonnegative integer")))?;
        match kind.trim() {
            "legendre" => {
                let (lo, hi) = match measure.map(Measure::domain) {
                    Some(Domain::Box { lower, upper })
                        if lower.len() == 1 && lower[0].is_finite() && upper[0].is_finite() =>
                    {
                        (lower[0], upper[0])
                    }
                    _ => (-1.0, 1.0),
                };
                Dictionary::legendre(n, lo, hi)
            }
            "monomial" => Ok(Dictionary::monomial(n)),
            "fourier" => Ok(Dictionary::fourier(n)),
            "sine" => Dictionary::sine_probe(n),
            _ => Err(KoopmanError::Parse(format!("unknown dictionary `{spec}`"))),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Number of observables N.
    pub fn len(&self) -> usize {
        match self.family {
            Family::NormalizedLegendre { max_degree } | Family::Monomial { max_degree } => {
                max_degree + 1
            }
            Family::Fourier { max_mode } => 2 * max_mode + 1,
            Family::SineProbe { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        1
    }

    pub fn orthonormal_wrt(&self) -> Option<&Measure> {
        self.orthonormal_wrt.as_ref()
    }

    /// All observables are real-valued.
    pub fn is_real(&self) -> bool {
        !matches!(self.family, Family::Fourier { .. })
    }

    /// Largest polynomial degree, for polynomial families.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self.family {
            Family::NormalizedLegendre { max_degree } | Family::Monomial { max_degree } => {
                Some(max_degree)
            }
            _ => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != 1 {
            return Err(KoopmanError::DimensionMismatch {
                expected: 1,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn to_reference(&self, x: f64) -> f64 {
        (2.0 * x - self.lower - self.upper) / (self.upper - self.lower)
    }

    /// Real values of a real dictionary, written into `out` (length N).
    fn fill_real(&self, x: f64, out: &mut [f64]) {
        match self.family {
            Family::NormalizedLegendre { max_degree } => {
                let t = self.to_reference(x);
                let mut p0 = 1.0;
                out[0] = 1.0;
                if max_degree >= 1 {
                    let mut p1 = t;
                    out[1] = 3f64.sqrt() * t;
                    for k in 1..max_degree {
                        let kf = k as f64;
                        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                        p0 = p1;
                        p1 = p2;
                        out[k + 1] = (2.0 * kf + 3.0).sqrt() * p2;
                    }
                }
            }
            Family::Monomial { .. } => {
                let mut v = 1.0;
                for o in out.iter_mut() {
                    *o = v;
                    v *= x;
                }
            }
            Family::SineProbe { mode } => out[0] = SQRT_2 * (TAU * mode as f64 * x).sin(),
            Family::Fourier { .. } => unreachable!("fourier dictionaries are complex"),
        }
    }

    fn fill_complex(&self, x: f64, out: &mut [Complex64]) {
        match self.family {
            Family::Fourier { max_mode } => {
                out[0] = Complex64::new(1.0, 0.0);
                for k in 1..=max_mode {
                    let e = Complex64::from_polar(1.0, k as f64 * x);
                    out[2 * k - 1] = e;
                    out[2 * k] = e.conj();
                }
            }
            _ => {
                let mut buf = vec![0.0; self.len()];
                self.fill_real(x, &mut buf);
                for (o, v) in out.iter_mut().zip(buf) {
                    *o = Complex64::new(v, 0.0);
                }
            }
        }
    }

    /// `ψ(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<ObservableVector> {
        self.check_dim(x)?;
        let mut v = DVector::zeros(self.len());
        self.fill_complex(x[0], v.as_mut_slice());
        Ok(v)
    }

    /// `ψ(X) = [ψ(x₁), …, ψ(x_M)]`, an N×M matrix.
    pub fn evaluate_batch<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<DMatrix<Complex64>> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, points.len());
        for (j, p) in points.iter().enumerate() {
            let p = p.as_ref();
            self.check_dim(p)?;
            let mut col = m.column_mut(j);
            self.fill_complex(p[0], col.as_mut_slice());
        }
        Ok(m)
    }

    /// Real-valued `ψ(X)`, or `None` for complex dictionaries.
    pub fn evaluate_batch_real<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<Option<DMatrix<f64>>> {
        if !self.is_real() {
            return Ok(None);
        }
        let n = self.len();
        let mut m = DMatrix::zeros(n, points.len());
        for (j, p) in points.iter().enumerate() {
            let p = p.as_ref();
            self.check_dim(p)?;
            let mut col = m.column_mut(j);
            self.fill_real(p[0], col.as_mut_slice());
        }
        Ok(Some(m))
    }

    /// Jacobian `∂ψ_i/∂x_k`, an N×d matrix.
    pub fn derivative(&self, x: &[f64]) -> Result<DMatrix<Complex64>> {
        self.check_dim(x)?;
        let x = x[0];
        let n = self.len();
        let mut d = DMatrix::zeros(n, 1);
        match self.family {
            Family::NormalizedLegendre { max_degree } => {
                let t = self.to_reference(x);
                let scale = 2.0 / (self.upper - self.lower);
                // P'_{k+1} = P'_{k-1} + (2k+1) P_k
                let mut p = vec![0.0; max_degree + 1];
                let mut dp = vec![0.0; max_degree + 1];
                p[0] = 1.0;
                if max_degree >= 1 {
                    p[1] = t;
                    dp[1] = 1.0;
                }
                for k in 1..max_degree {
                    let kf = k as f64;
                    p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
                    dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
                }
                for k in 0..=max_degree {
                    d[(k, 0)] = Complex64::new((2.0 * k as f64 + 1.0).sqrt() * scale * dp[k], 0.0);
                }
            }
            Family::Monomial { max_degree } => {
                for k in 1..=max_degree {
                    d[(k, 0)] = Complex64::new(k as f64 * x.powi(k as i32 - 1), 0.0);
                }
            }
            Family::Fourier { max_mode } => {
                for k in 1..=max_mode {
                    let kf = k as f64;
                    let e = Complex64::from_polar(1.0, kf * x);
                    d[(2 * k - 1, 0)] = Complex64::i() * kf * e;
                    d[(2 * k, 0)] = -Complex64::i() * kf * e.conj();
                }
            }
            Family::SineProbe { mode } => {
                let w = TAU * mode as f64;
                d[(0, 0)] = Complex64::new(SQRT_2 * w * (w * x).cos(), 0.0);
            }
        }
        Ok(d)
    }

    /// `M_μ = Σ_k w_k ψ(x_k) ψ(x_k)ᴴ` under the rule.
    pub fn gram(&self, rule: &QuadratureRule) -> Result<DMatrix<Complex64>> {
        let psi = self.evaluate_batch(&rule.nodes)?;
        Ok(weighted_outer(&psi, &psi, &rule.weights))
    }
}

/// `Σ_k w_k a_k b_kᴴ` over matching columns.
pub(crate) fn weighted_outer(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    weights: &[f64],
) -> DMatrix<Complex64> {
    let mut bw = b.clone();
    for (j, w) in weights.iter().enumerate() {
        bw.column_mut(j).scale_mut(*w);
    }
    a * bw.adjoint()
}

impl fmt::Display for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::NormalizedLegendre { max_degree } => write!(f, "legendre:{max_degree}"),
            Family::Monomial { max_degree } => write!(f, "monomial:{max_degree}"),
            Family::Fourier { max_mode } => write!(f, "fourier:{max_mode}"),
            Family::SineProbe { mode } => write!(f, "sine:{mode}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_rule;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn legendre_values() {
        let d = Dictionary::legendre(4, -1.0, 1.0).unwrap();
        let v = d.evaluate(&[1.0]).unwrap();
        assert_eq!(v[0], c(1.0));
        assert!((v[1].re - 3f64.sqrt()).abs() < 1e-15);
        for (k, vk) in v.iter().enumerate() {
            assert!((vk.re - (2.0 * k as f64 + 1.0).sqrt()).abs() < 1e-13);
        }
        // constant observable on any point
        assert_eq!(d.evaluate(&[0.37]).unwrap()[0], c(1.0));
    }

    #[test]
    fn fourier_at_zero() {
        let d = Dictionary::fourier(1);
        let v = d.evaluate(&[0.0]).unwrap();
        assert_eq!(v.as_slice(), &[c(1.0), c(1.0), c(1.0)]);
    }

    #[test]
    fn batch_shapes() {
        let d = Dictionary::monomial(1);
        let empty: Vec<Vec<f64>> = Vec::new();
        let m = d.evaluate_batch(&empty).unwrap();
        assert_eq!(m.shape(), (2, 0));
        let m = d.evaluate_batch(&[[1.0], [-1.0]]).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(-1.0)]));
        assert!(d.evaluate_batch(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn monomial_derivative() {
        let d = Dictionary::monomial(2);
        let j = d.derivative(&[3.0]).unwrap();
        assert_eq!(j[(0, 0)], c(0.0));
        assert_eq!(j[(2, 0)], c(6.0));
    }

    #[test]
    fn gram_of_monomials() {
        let d = Dictionary::monomial(1);
        let g = d.gram(&gauss_rule(&Measure::uniform(-1.0, 1.0).unwrap(), 4).unwrap()).unwrap();
        assert!((g[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(g[(0, 1)].norm() < 1e-15);
        assert!((g[(1, 1)].re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_gram_is_identity() {
        let d = Dictionary::legendre(8, -1.0, 1.0).unwrap();
        let g = d.gram(&gauss_rule(&Measure::uniform(-1.0, 1.0).unwrap(), 64).unwrap()).unwrap();
        let dev = (g - DMatrix::identity(9, 9)).norm();
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn legendre_on_shifted_interval() {
        let mu = Measure::uniform(2.0, 5.0).unwrap();
        let d = Dictionary::parse("legendre:6", Some(&mu)).unwrap();
        let g = d.gram(&gauss_rule(&mu, 16).unwrap()).unwrap();
        assert!((g - DMatrix::identity(7, 7)).norm() < 1e-12);
        assert_eq!(d.orthonormal_wrt(), Some(&mu));
    }

    #[test]
    fn fourier_gram_is_identity() {
        let d = Dictionary::fourier(2);
        let g = d.gram(&gauss_rule(&Measure::uniform_circle(), 16).unwrap()).unwrap();
        assert!((g - DMatrix::identity(5, 5)).norm() < 1e-14);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["legendre:8", "monomial:3", "fourier:2", "sine:10"] {
            assert_eq!(Dictionary::parse(s, None).unwrap().to_string(), s);
        }
        assert!(Dictionary::parse("rbf:3", None).is_err());
        assert!(Dictionary::parse("legendre", None).is_err());
        assert!(Dictionary::parse("sine:0", None).is_err());
    }
}

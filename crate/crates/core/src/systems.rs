//! Discrete-time dynamical systems `x⁺ = T(x)`, their state-space domains,
//! and the reference probability measures used for sampling and projection.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{KoopmanError, Result};

/// A point in state space.
#[derive(Debug, Clone, PartialEq)]
pub struct State(pub Vec<f64>);

impl State {
    pub fn new(coords: Vec<f64>) -> Self {
        State(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for State {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for State {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<f64> for State {
    fn from(x: f64) -> Self {
        State(vec![x])
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        State(v)
    }
}

/// State-space domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Axis-aligned box. Bounds may be infinite, which models all of ℝᵈ.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// The d-torus with angle coordinates taken modulo 2π.
    Circle { dim: usize },
}

impl Domain {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new_box(vec![lower], vec![upper])
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(KoopmanError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(KoopmanError::InvalidArgument("zero-dimensional box".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l >= u) {
            return Err(KoopmanError::InvalidArgument(format!(
                "box bounds must satisfy lower < upper, got {lower:?} / {upper:?}"
            )));
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn real_line() -> Self {
        Domain::Box {
            lower: vec![f64::NEG_INFINITY],
            upper: vec![f64::INFINITY],
        }
    }

    pub fn circle() -> Self {
        Domain::Circle { dim: 1 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Circle { dim } => *dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u),
            Domain::Circle { .. } => true,
        }
    }

    /// Bounds of a box with finite extent on every axis.
    pub fn finite_bounds(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Domain::Box { lower, upper }
                if lower.iter().chain(upper.iter()).all(|v| v.is_finite()) =>
            {
                Some((lower, upper))
            }
            _ => None,
        }
    }
}

/// Reference probability measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// Normalized Lebesgue measure on a bounded box or on the torus.
    Uniform(Domain),
    /// Product Gaussian on ℝᵈ with diagonal covariance.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl Measure {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Ok(Measure::Uniform(Domain::interval(lower, upper)?))
    }

    pub fn uniform_box(domain: Domain) -> Result<Self> {
        if let Domain::Box { .. } = domain {
            if domain.finite_bounds().is_none() {
                return Err(KoopmanError::InvalidArgument(
                    "uniform measure needs finite box bounds".into(),
                ));
            }
        }
        Ok(Measure::Uniform(domain))
    }

    pub fn uniform_circle() -> Self {
        Measure::Uniform(Domain::circle())
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if var.is_nan() || var <= 0.0 || !mean.is_finite() || !var.is_finite() {
            return Err(KoopmanError::InvalidArgument(format!(
                "gaussian needs finite mean and positive variance, got {mean}, {var}"
            )));
        }
        Ok(Measure::Gaussian {
            mean: vec![mean],
            var: vec![var],
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Uniform(d) => d.dim(),
            Measure::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Support of the measure.
    pub fn domain(&self) -> Domain {
        match self {
            Measure::Uniform(d) => d.clone(),
            Measure::Gaussian { mean, .. } => Domain::Box {
                lower: vec![f64::NEG_INFINITY; mean.len()],
                upper: vec![f64::INFINITY; mean.len()],
            },
        }
    }

    /// Parses `uniform:<lo>,<hi>`, `uniform:circle` or `gaussian:<mean>,<var>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
        match kind.trim() {
            "uniform" if args.trim() == "circle" => Ok(Measure::uniform_circle()),
            "uniform" => {
                let [lo, hi] = parse_pair(args, spec)?;
                Measure::uniform(lo, hi)
            }
            "gaussian" => {
                let [mean, var] = parse_pair(args, spec)?;
                Measure::gaussian(mean, var)
            }
            _ => Err(KoopmanError::Parse(format!("unknown measure `{spec}`"))),
        }
    }

    /// Draws `count` iid samples. The stream is ChaCha8 seeded through
    /// `seed_from_u64(seed)`; uniform coordinates use `lo + (hi - lo) * u`
    /// with `u` the generator's standard `[0, 1)` double, Gaussian coordinates
    /// use the ziggurat `StandardNormal` sampler. Coordinates are drawn
    /// sample-major, axis-minor.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<State> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| match self {
                Measure::Uniform(Domain::Box { lower, upper }) => State(
                    lower
                        .iter()
                        .zip(upper)
                        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                        .collect(),
                ),
                Measure::Uniform(Domain::Circle { dim }) => {
                    State((0..*dim).map(|_| TAU * rng.random::<f64>()).collect())
                }
                Measure::Gaussian { mean, var } => State(
                    mean.iter()
                        .zip(var)
                        .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                ),
            })
            .collect()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Uniform(Domain::Circle { .. }) => write!(f, "uniform:circle"),
            Measure::Uniform(Domain::Box { lower, upper }) => {
                write!(f, "uniform:{},{}", lower[0], upper[0])
            }
            Measure::Gaussian { mean, var } => write!(f, "gaussian:{},{}", mean[0], var[0]),
        }
    }
}

fn parse_pair(args: &str, spec: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(KoopmanError::Parse(format!(
            "`{spec}`: expected two comma-separated numbers"
        )));
    }
    let a = parse_f64(parts[0], spec)?;
    let b = parse_f64(parts[1], spec)?;
    Ok([a, b])
}

fn parse_f64(s: &str, spec: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| KoopmanError::Parse(format!("`{spec}`: `{s}` is not a number")))
}

type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A map `T: M → M` together with its domain and, optionally, its inverse.
#[derive(Clone)]
pub struct DynamicalSystem {
    name: String,
    domain: Domain,
    forward: MapFn,
    inverse: Option<MapFn>,
    polynomial_degree: Option<u32>,
}

impl fmt::Debug for DynamicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicalSystem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("invertible", &self.inverse.is_some())
            .field("polynomial_degree", &self.polynomial_degree)
            .finish()
    }
}

impl DynamicalSystem {
    /// Builds a system from an arbitrary map. `polynomial_degree` enables
    /// exact-quadrature order selection in the analytic construction.
    pub fn new<F>(name: impl Into<String>, domain: Domain, forward: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        DynamicalSystem {
            name: name.into(),
            domain,
            forward: Arc::new(forward),
            inverse: None,
            polynomial_degree: None,
        }
    }

    pub fn with_inverse<F>(mut self, inverse: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    pub fn with_polynomial_degree(mut self, degree: u32) -> Self {
        self.polynomial_degree = Some(degree);
        self
    }

    /// `T(x) = 2x² − 1` on `[−1, 1]`.
    pub fn logistic() -> Self {
        DynamicalSystem::new(
            "logistic",
            Domain::Box {
                lower: vec![-1.0],
                upper: vec![1.0],
            },
            |x| vec![2.0 * x[0] * x[0] - 1.0],
        )
        .with_polynomial_degree(2)
    }

    /// Circle rotation `θ ↦ θ + ω mod 2π`.
    pub fn rotation(omega: f64) -> Self {
        DynamicalSystem::new(format!("rotation:omega={omega}"), Domain::circle(), move |x| {
            vec![(x[0] + omega).rem_euclid(TAU)]
        })
        .with_inverse(move |x| vec![(x[0] - omega).rem_euclid(TAU)])
    }

    pub fn identity() -> Self {
        DynamicalSystem::new("identity", Domain::real_line(), |x| x.to_vec())
            .with_inverse(|x| x.to_vec())
            .with_polynomial_degree(1)
    }

    /// `T(x) = a·x + b` on ℝ.
    pub fn affine(a: f64, b: f64) -> Self {
        let sys = DynamicalSystem::new(format!("affine:a={a},b={b}"), Domain::real_line(), move |x| {
            vec![a * x[0] + b]
        })
        .with_polynomial_degree(1);
        if a != 0.0 {
            sys.with_inverse(move |x| vec![(x[0] - b) / a])
        } else {
            sys
        }
    }

    /// Parses `logistic`, `identity`, `rotation:omega=<f>` or
    /// `affine:a=<f>,b=<f>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
        let params = parse_params(args, spec)?;
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| KoopmanError::Parse(format!("`{spec}`: missing parameter `{key}`")))
        };
        let expect_keys = |keys: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(KoopmanError::Parse(format!(
                    "`{spec}`: unknown parameter `{k}`"
                ))),
                None => Ok(()),
            }
        };
        match kind.trim() {
            "logistic" => {
                expect_keys(&[])?;
                Ok(Self::logistic())
            }
            "identity" => {
                expect_keys(&[])?;
                Ok(Self::identity())
            }
            "rotation" => {
                expect_keys(&["omega"])?;
                Ok(Self::rotation(get("omega")?))
            }
            "affine" => {
                expect_keys(&["a", "b"])?;
                Ok(Self::affine(get("a")?, get("b")?))
            }
            _ => Err(KoopmanError::Parse(format!("unknown system `{spec}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn polynomial_degree(&self) -> Option<u32> {
        self.polynomial_degree
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse.is_some()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(KoopmanError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// One step of the map. Leaving the domain is not an error here; use
    /// [`DynamicalSystem::escapes`] or [`DynamicalSystem::orbit`] to detect it.
    pub fn apply(&self, x: &[f64]) -> Result<State> {
        self.check_dim(x)?;
        Ok(State((self.forward)(x)))
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Result<State> {
        self.check_dim(x)?;
        let inv = self
            .inverse
            .as_ref()
            .ok_or_else(|| KoopmanError::Unsupported(format!("`{}` has no inverse", self.name)))?;
        Ok(State(inv(x)))
    }

    pub fn escapes(&self, x: &[f64]) -> bool {
        !self.domain.contains(x)
    }

    /// `Tⁱ(x)`; `iterate(x, 0)` returns `x`.
    pub fn iterate(&self, x: &[f64], steps: usize) -> Result<State> {
        self.check_dim(x)?;
        let mut s = x.to_vec();
        for _ in 0..steps {
            s = (self.forward)(&s);
        }
        Ok(State(s))
    }

    /// The states `x, T x, …, T^{len−1} x` and the number of them that lie
    /// outside the domain.
    pub fn orbit(&self, x: &[f64], len: usize) -> Result<(Vec<State>, usize)> {
        self.check_dim(x)?;
        let mut states = Vec::with_capacity(len);
        let mut escapes = 0;
        let mut s = x.to_vec();
        for i in 0..len {
            if i > 0 {
                s = (self.forward)(&s);
            }
            if self.escapes(&s) {
                escapes += 1;
            }
            states.push(State(s.clone()));
        }
        Ok((states, escapes))
    }
}

fn parse_params(args: &str, spec: &str) -> Result<Vec<(String, f64)>> {
    if args.trim().is_empty() {
        return Ok(Vec::new());
    }
    args.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| KoopmanError::Parse(format!("`{spec}`: expected key=value, got `{kv}`")))?;
            Ok((k.trim().to_string(), parse_f64(v.trim(), spec)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_values() {
        let t = DynamicalSystem::logistic();
        assert_eq!(t.apply(&[0.0]).unwrap().0, vec![-1.0]);
        assert_eq!(t.apply(&[1.0]).unwrap().0, vec![1.0]);
        assert!((t.iterate(&[0.3], 1).unwrap()[0] + 0.82).abs() < 1e-15);
        assert!((t.iterate(&[0.3], 2).unwrap()[0] - 0.3448).abs() < 1e-15);
        assert_eq!(t.iterate(&[0.3], 0).unwrap().0, vec![0.3]);
    }

    #[test]
    fn rotation_wraps() {
        let omega = 6.0;
        let t = DynamicalSystem::rotation(omega);
        let y = t.apply(&[0.5]).unwrap();
        assert!((y[0] - (0.5 + omega).rem_euclid(TAU)).abs() < 1e-15);
        assert!(y[0] < TAU);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let t = DynamicalSystem::logistic();
        assert!(matches!(
            t.apply(&[0.1, 0.2]),
            Err(KoopmanError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn escape_is_flagged_not_fatal() {
        let t = DynamicalSystem::affine(3.0, 0.0);
        let t = DynamicalSystem::new("expanding", Domain::interval(-1.0, 1.0).unwrap(), move |x| {
            t.apply(x).unwrap().0
        });
        let (orbit, escapes) = t.orbit(&[0.5], 3).unwrap();
        assert_eq!(orbit.len(), 3);
        assert_eq!(escapes, 2);
    }

    #[test]
    fn inverse_round_trip() {
        let systems = [
            DynamicalSystem::rotation(1.3),
            DynamicalSystem::identity(),
            DynamicalSystem::affine(-0.7, 0.2),
        ];
        let pts = Measure::uniform(0.0, TAU).unwrap().sample(100, 9);
        for s in &systems {
            let worst = pts
                .iter()
                .map(|x| (s.apply_inverse(&s.apply(x).unwrap()).unwrap()[0] - x[0]).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-12, "{}: {worst}", s.name());
        }
        assert!(DynamicalSystem::logistic().apply_inverse(&[0.2]).is_err());
    }

    #[test]
    fn parse_specs() {
        assert_eq!(DynamicalSystem::parse("logistic").unwrap().name(), "logistic");
        let r = DynamicalSystem::parse("rotation:omega=0.5").unwrap();
        assert!((r.apply(&[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        let a = DynamicalSystem::parse("affine:a=2,b=1").unwrap();
        assert_eq!(a.apply(&[3.0]).unwrap()[0], 7.0);
        assert!(DynamicalSystem::parse("henon").is_err());
        assert!(DynamicalSystem::parse("rotation:w=1").is_err());
        assert!(DynamicalSystem::parse("rotation").is_err());

        assert_eq!(Measure::parse("uniform:-1,1").unwrap(), Measure::uniform(-1.0, 1.0).unwrap());
        assert_eq!(Measure::parse("gaussian:0,2").unwrap(), Measure::gaussian(0.0, 2.0).unwrap());
        assert_eq!(Measure::parse("uniform:circle").unwrap(), Measure::uniform_circle());
        assert!(Measure::parse("uniform:1,-1").is_err());
        assert!(Measure::parse("gaussian:0,-1").is_err());
        assert!(Measure::parse("beta:1,2").is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_supported() {
        let mu = Measure::uniform(-1.0, 1.0).unwrap();
        let a = mu.sample(4, 17);
        assert_eq!(a, mu.sample(4, 17));
        assert!(a.iter().all(|x| (-1.0..=1.0).contains(&x[0])));
        assert_ne!(a, mu.sample(4, 18));
    }

    #[test]
    fn uniform_moments() {
        let pts = Measure::uniform(-1.0, 1.0).unwrap().sample(100_000, 3);
        let m = pts.len() as f64;
        let mean = pts.iter().map(|x| x[0]).sum::<f64>() / m;
        let second = pts.iter().map(|x| x[0] * x[0]).sum::<f64>() / m;
        assert!(mean.abs() < 0.02);
        assert!((second - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn gaussian_moments() {
        let pts = Measure::gaussian(1.0, 4.0).unwrap().sample(100_000, 5);
        let m = pts.len() as f64;
        let mean = pts.iter().map(|x| x[0]).sum::<f64>() / m;
        let var = pts.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / m;
        assert!((mean - 1.0).abs() < 0.03);
        assert!((var - 4.0).abs() < 0.1);
    }
}

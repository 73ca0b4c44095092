//! Normalized quadrature rules for the reference measures.
//!
//! Uniform measures on boxes use tensorized Gauss–Legendre rules, Gaussians
//! use Gauss–Hermite, and the uniform measure on the circle uses the
//! equispaced trapezoidal rule, which with `n` nodes integrates every
//! trigonometric polynomial of degree below `n` exactly.

use std::f64::consts::{PI, TAU};

use crate::error::{KoopmanError, Result};
use crate::systems::{Domain, Measure, State};

/// Largest state dimension supported by tensorized rules.
pub const MAX_TENSOR_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<State>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    fn tensor(axes: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        let mut nodes = vec![Vec::new()];
        let mut weights = vec![1.0];
        for (ax_nodes, ax_weights) in axes {
            let mut next_nodes = Vec::with_capacity(nodes.len() * ax_nodes.len());
            let mut next_weights = Vec::with_capacity(nodes.len() * ax_nodes.len());
            for (prefix, w) in nodes.iter().zip(&weights) {
                for (x, v) in ax_nodes.iter().zip(&ax_weights) {
                    let mut p: Vec<f64> = prefix.clone();
                    p.push(*x);
                    next_nodes.push(p);
                    next_weights.push(w * v);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        QuadratureRule {
            nodes: nodes.into_iter().map(State).collect(),
            weights,
        }
    }
}

/// Quadrature rule for `measure` with `order` nodes per axis.
pub fn gauss_rule(measure: &Measure, order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(KoopmanError::InvalidArgument("quadrature order must be positive".into()));
    }
    let dim = measure.dim();
    if dim > MAX_TENSOR_DIM {
        return Err(KoopmanError::Unsupported(format!(
            "tensor quadrature in {dim} dimensions (max {MAX_TENSOR_DIM})"
        )));
    }
    let axes = match measure {
        Measure::Uniform(Domain::Box { lower, upper }) => {
            if measure.domain().finite_bounds().is_none() {
                return Err(KoopmanError::Unsupported(
                    "uniform measure on an unbounded box".into(),
                ));
            }
            let (x, w) = gauss_legendre(order);
            lower
                .iter()
                .zip(upper)
                .map(|(a, b)| {
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    (
                        x.iter().map(|t| mid + half * t).collect(),
                        w.iter().map(|v| 0.5 * v).collect(),
                    )
                })
                .collect()
        }
        Measure::Uniform(Domain::Circle { dim }) => {
            let step = TAU / order as f64;
            let x: Vec<f64> = (0..order).map(|k| k as f64 * step).collect();
            let w = vec![1.0 / order as f64; order];
            vec![(x, w); *dim]
        }
        Measure::Gaussian { mean, var } => {
            let (t, w) = gauss_hermite(order);
            let norm = PI.sqrt();
            mean.iter()
                .zip(var)
                .map(|(m, v)| {
                    let s = (2.0 * v).sqrt();
                    (
                        t.iter().map(|ti| m + s * ti).collect(),
                        w.iter().map(|wi| wi / norm).collect(),
                    )
                })
                .collect()
        }
    };
    Ok(QuadratureRule::tensor(axes))
}

/// Gauss–Legendre nodes (ascending) and weights on `[−1, 1]` for the
/// unnormalized weight function 1. Newton iteration on the three-term
/// recurrence from the Tricomi initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Hermite nodes (ascending) and weights for the weight `e^{−t²}`,
/// Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    (x, w)
}

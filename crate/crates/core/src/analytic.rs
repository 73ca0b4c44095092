//! Sampling-free Galerkin construction `A_N = M_{T,μ} M_μ⁻¹` with
//! `M_μ = ∫ ψψᴴ dμ` and `M_{T,μ} = ∫ (ψ∘T) ψᴴ dμ`, both integrated by
//! quadrature. For polynomial maps and polynomial dictionaries the default
//! quadrature order integrates every entry exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dictionary::{weighted_outer, Dictionary};
use crate::edmd::{Diagnostics, KoopmanMatrix, Provenance};
use crate::error::{KoopmanError, Result};
use crate::linalg::pseudo_inverse;
use crate::quadrature::{gauss_rule, QuadratureRule};
use crate::systems::{DynamicalSystem, Measure, State};

/// Order at which escalation starts, and the floor of the default order.
pub const BASE_ORDER: usize = 64;
/// Largest rule tried during escalation.
pub const MAX_NODES: usize = 1 << 14;
/// Frobenius tolerance between successive orders during escalation.
pub const SATURATION_TOL: f64 = 1e-12;

/// `M_{T,μ}`: entry `(i, j) = Σ_k w_k ψ_i(T x_k) conj(ψ_j(x_k))`.
pub fn transfer_matrix(
    system: &DynamicalSystem,
    dict: &Dictionary,
    rule: &QuadratureRule,
) -> Result<DMatrix<Complex64>> {
    let images = rule
        .nodes
        .iter()
        .map(|x| {
            let y = system.apply(x)?;
            if system.escapes(&y) {
                return Err(KoopmanError::DomainEscape {
                    state: y.0,
                    context: format!("of `{}` at quadrature node {:?}", system.name(), x.0),
                });
            }
            Ok(y)
        })
        .collect::<Result<Vec<State>>>()?;
    let psi_x = dict.evaluate_batch(&rule.nodes)?;
    let psi_tx = dict.evaluate_batch(&images)?;
    Ok(weighted_outer(&psi_tx, &psi_x, &rule.weights))
}

/// Quadrature order that makes every integrand exact for polynomial
/// systems and dictionaries, `max(64, N · deg T)`.
pub fn default_order(system: &DynamicalSystem, dict: &Dictionary) -> Option<usize> {
    match (system.polynomial_degree(), dict.polynomial_degree()) {
        (Some(p), Some(_)) => Some(BASE_ORDER.max(dict.len() * p as usize)),
        _ => None,
    }
}

/// `A_N = M_{T,μ} M_μ⁻¹`.
///
/// With `quad_order = None` the order comes from [`default_order`], or, for
/// non-polynomial cases, from doubling the order from [`BASE_ORDER`] until
/// two successive matrices agree to [`SATURATION_TOL`]; reaching
/// [`MAX_NODES`] first sets `diagnostics.saturated`.
pub fn fit_analytic(
    system: &DynamicalSystem,
    dict: &Dictionary,
    measure: &Measure,
    quad_order: Option<usize>,
) -> Result<KoopmanMatrix> {
    if measure.dim() != system.dim() {
        return Err(KoopmanError::DimensionMismatch {
            expected: system.dim(),
            found: measure.dim(),
        });
    }
    if let Some(order) = quad_order.or_else(|| default_order(system, dict)) {
        return fit_at_order(system, dict, measure, order);
    }
    let mut order = BASE_ORDER;
    let mut current = fit_at_order(system, dict, measure, order)?;
    loop {
        let next_order = order * 2;
        if next_order.pow(measure.dim() as u32) > MAX_NODES {
            current.diagnostics.saturated = true;
            return Ok(current);
        }
        let next = fit_at_order(system, dict, measure, next_order)?;
        let converged = (&next.a - &current.a).norm() <= SATURATION_TOL;
        order = next_order;
        current = next;
        if converged {
            return Ok(current);
        }
    }
}

fn fit_at_order(
    system: &DynamicalSystem,
    dict: &Dictionary,
    measure: &Measure,
    order: usize,
) -> Result<KoopmanMatrix> {
    let rule = gauss_rule(measure, order)?;
    let m_t = transfer_matrix(system, dict, &rule)?;
    let n = dict.len();
    let (a, diagnostics) = if dict.orthonormal_wrt() == Some(measure) {
        let diag = Diagnostics {
            sigma_max: 1.0,
            sigma_min: 1.0,
            rank: n,
            rank_deficient: false,
            saturated: false,
        };
        (m_t, diag)
    } else {
        let gram = dict.gram(&rule)?;
        let p = pseudo_inverse(&gram, None, 0.0);
        if !p.full_rank() {
            return Err(KoopmanError::RankDeficient {
                condition: p.condition(),
                rank: p.rank,
                size: n,
            });
        }
        let diag = Diagnostics {
            sigma_max: p.sigma_max(),
            sigma_min: p.sigma_min(),
            rank: p.rank,
            rank_deficient: false,
            saturated: false,
        };
        (m_t * p.pinv, diag)
    };
    Ok(KoopmanMatrix {
        a,
        dictionary: dict.to_string(),
        provenance: Provenance::Analytic { order },
        diagnostics,
    })
}

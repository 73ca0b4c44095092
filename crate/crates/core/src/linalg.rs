//! Dense linear-algebra helpers on top of nalgebra: SVD-based
//! pseudoinverses and a complex eigensolver returning eigenvectors.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// Spectral data of a pseudoinverse computation.
#[derive(Debug, Clone)]
pub(crate) struct PseudoInverse<T: ComplexField<RealField = f64>> {
    /// `A⁺`, shape transposed relative to the input.
    pub pinv: DMatrix<T>,
    /// Singular values of the input, descending.
    pub singular_values: Vec<f64>,
    /// Number of singular values above the cutoff.
    pub rank: usize,
}

impl<T: ComplexField<RealField = f64>> PseudoInverse<T> {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn condition(&self) -> f64 {
        let lo = self.sigma_min();
        if lo > 0.0 {
            self.sigma_max() / lo
        } else {
            f64::INFINITY
        }
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.singular_values.len()
    }
}

/// Moore–Penrose pseudoinverse of the N×M matrix `a`.
///
/// Singular values below `rtol · σ_max` are treated as zero; `rtol`
/// defaults to `max(N, M) · ε`. With `tikhonov > 0` every singular value is
/// filtered as `σ / (σ² + tikhonov)` instead.
pub(crate) fn pseudo_inverse<T>(a: &DMatrix<T>, rtol: Option<f64>, tikhonov: f64) -> PseudoInverse<T>
where
    T: ComplexField<RealField = f64>,
{
    let (n, m) = a.shape();
    let rtol = rtol.unwrap_or(n.max(m) as f64 * f64::EPSILON);
    if n == 0 || m == 0 {
        return PseudoInverse {
            pinv: DMatrix::zeros(m, n),
            singular_values: Vec::new(),
            rank: 0,
        };
    }
    // For wide inputs reduce with a thin QR of aᴴ first: a = Rᴴ Qᴴ, so
    // a⁺ = Q (Rᴴ)⁺ and only an N×N SVD is needed.
    let (q, core) = if m > n {
        let qr = a.adjoint().qr();
        (Some(qr.q()), qr.r().adjoint())
    } else {
        (None, a.clone())
    };
    let (core_rows, core_cols) = core.shape();
    let svd = core.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = rtol * smax;
    let rank = sigma.iter().filter(|s| **s > cutoff && **s > 0.0).count();

    // core⁺ = V diag(f(σ)) Uᴴ
    let k = sigma.len();
    let mut v_scaled = DMatrix::<T>::zeros(core_cols, k);
    let mut u_sel = DMatrix::<T>::zeros(core_rows, k);
    for (col, &i) in order.iter().enumerate() {
        let s = svd.singular_values[i];
        let f = if tikhonov > 0.0 {
            s / (s * s + tikhonov)
        } else if s > cutoff && s > 0.0 {
            1.0 / s
        } else {
            0.0
        };
        let vi = v_t.row(i).adjoint() * T::from_real(f);
        v_scaled.set_column(col, &vi);
        u_sel.set_column(col, &u.column(i));
    }
    let core_pinv = v_scaled * u_sel.adjoint();
    let pinv = match q {
        Some(q) => q * core_pinv,
        None => core_pinv,
    };
    PseudoInverse {
        pinv,
        singular_values: sigma,
        rank,
    }
}

pub(crate) fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Eigenvalues and unit-norm right eigenvectors (as columns) of a general
/// complex matrix, via the complex Schur form followed by back-substitution
/// on the triangular factor. Returns `None` when the QR iteration fails to
/// converge even with the deflation tolerance relaxed to `1e-12`.
pub(crate) fn eig_right(a: &DMatrix<Complex64>) -> Option<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if n == 0 {
        return Some((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let schur = [f64::EPSILON, 1e-15, 1e-14, 1e-13, 1e-12]
        .iter()
        .find_map(|&eps| a.clone().try_schur(eps, 100 * n.max(10)))?;
    let (q, t) = schur.unpack();
    let lambdas: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE * 1e3);
    let mut vectors = DMatrix::zeros(n, n);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let lk = lambdas[k];
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        x[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lk;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            x[i] = -s / d;
            // Rescale to avoid overflow in strongly non-normal cases.
            let big = x[i].norm();
            if big > 1e100 {
                for v in x.iter_mut().take(k + 1) {
                    *v /= big;
                }
            }
        }
        let mut col = DMatrix::zeros(n, 1);
        for i in 0..=k {
            let qi = q.column(i);
            col += qi * x[i];
        }
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= Complex64::new(nrm, 0.0);
        }
        vectors.set_column(k, &col.column(0));
    }
    Some((lambdas, vectors))
}

/// Largest absolute entry.
pub(crate) fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

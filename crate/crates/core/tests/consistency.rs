use koopman_core::edmd::apply_operator;
use koopman_core::predict::{coefficient_vector, convergence_sweep, observable_coefficients, DictFamily, SampleSize, SweepSpec};
use koopman_core::spectral::pf_check;
use koopman_core::{
    eig, fit_analytic, fit_trajectory, generate_trajectory, l2_error, predict, Dictionary, DynamicalSystem, EvalSpec,
    Measure, State,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn logistic_setup(degree: usize) -> (DynamicalSystem, Dictionary, Measure) {
    let mu = Measure::uniform(-1.0, 1.0).unwrap();
    let dict = Dictionary::legendre(degree, -1.0, 1.0).unwrap();
    (DynamicalSystem::logistic(), dict, mu)
}

#[test]
fn empty_batch_has_no_columns() {
    let dict = Dictionary::legendre(4, -1.0, 1.0).unwrap();
    let m = dict.evaluate_batch::<State>(&[]).unwrap();
    assert_eq!(m.shape(), (5, 0));
}

#[test]
fn batch_columns_are_bit_equal_to_single_evaluations() {
    let pts = Measure::uniform(-1.0, 1.0).unwrap().sample(50, 3);
    for dict in [Dictionary::legendre(8, -1.0, 1.0).unwrap(), Dictionary::fourier(3), Dictionary::monomial(5)] {
        let batch = dict.evaluate_batch(&pts).unwrap();
        for (j, x) in pts.iter().enumerate() {
            assert_eq!(batch.column(j).clone_owned(), dict.evaluate(x).unwrap());
        }
    }
}

#[test]
fn single_sweep_cell_reproduces_l2_error() {
    let (t, dict, mu) = logistic_setup(8);
    let eval = EvalSpec::Quadrature { order: 256 };
    let spec = SweepSpec {
        system: &t,
        measure: &mu,
        family: DictFamily::Legendre,
        n_list: vec![9],
        sizes: vec![SampleSize::Analytic],
        horizon: 5,
        seeds: vec![0],
        eval,
        analytic_order: None,
    };
    let f = |x: &[f64]| c(x[0]);
    let cells = convergence_sweep(&spec, f).unwrap();
    assert_eq!(cells.len(), 1);
    let k = fit_analytic(&t, &dict, &mu, None).unwrap();
    let coef = observable_coefficients(&dict, &mu, 64, f).unwrap();
    let direct = l2_error(&k, &coef, &dict, &t, &mu, 5, eval).unwrap();
    assert_eq!(cells[0].l2_errors, direct);
    assert_eq!(cells[0].frob_gap, 0.0);
}

#[test]
fn first_prediction_step_is_one_operator_application() {
    let (t, dict, mu) = logistic_setup(8);
    let k = fit_analytic(&t, &dict, &mu, None).unwrap();
    let coef = observable_coefficients(&dict, &mu, 64, |x| c(x[0])).unwrap();
    let stepped = apply_operator(&k, &coefficient_vector(&coef)).unwrap();
    let psi = dict.evaluate(&[0.3]).unwrap();
    let via_operator: Complex64 = stepped.iter().zip(psi.iter()).map(|(a, p)| a.conj() * p).sum();
    let p = predict(&k, &coef, &[0.3], 1, &dict, &t).unwrap();
    assert!((p.predicted[(0, 0)] - via_operator).norm() < 1e-12);
}

#[test]
fn eigensystem_reconstructs_the_matrix() {
    let (t, dict, mu) = logistic_setup(8);
    let k = fit_analytic(&t, &dict, &mu, None).unwrap();
    let d = eig(&k).unwrap();
    // Aᴴ W = W conj(Λ), so A = (W conj(Λ) W⁻¹)ᴴ.
    let w = d.eigen_coeffs.clone();
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d.len(), d.eigenvalues.iter().map(|l| l.conj())));
    let winv = w.clone().try_inverse().expect("diagonalizable");
    let rebuilt = (&w * lam * winv).adjoint();
    let rel = (&rebuilt - &k.a).norm() / k.a.norm();
    assert!(rel < 1e-6, "relative reconstruction error {rel}");
}

#[test]
fn identity_eigenmeasure_satisfies_the_transfer_relation_exactly() {
    let t = DynamicalSystem::affine(1.0, 0.0);
    let dict = Dictionary::legendre(3, -1.0, 1.0).unwrap();
    let x0 = State(vec![0.25]);
    // A constant orbit makes ψ(X) singular; the atom route still applies.
    let snaps = generate_trajectory(&t, &x0, 4).unwrap();
    let op = fit_trajectory(&snaps, &dict).unwrap();
    let d = op.eig().unwrap();
    let nu = op.eigenmeasure(&d, 0).unwrap();
    let one = |_: &[f64]| c(1.0);
    let x = |p: &[f64]| c(p[0]);
    let report = pf_check(&nu, &t, &[&one, &x]).unwrap();
    for r in report.residuals {
        assert!(r.r2.unwrap() < 1e-12, "r2 {:?}", r.r2);
    }
}

//! Finite-dimensional approximations of the Koopman operator: extended
//! dynamic mode decomposition from snapshot data, its sampling-free
//! Galerkin limit, spectra, eigenmeasures and prediction error studies.
//!
//! ```
//! use koopman_core::{fit_analytic, DynamicalSystem, Dictionary, Measure};
//!
//! let mu = Measure::uniform(-1.0, 1.0).unwrap();
//! let dict = Dictionary::legendre(8, -1.0, 1.0).unwrap();
//! let k = fit_analytic(&DynamicalSystem::logistic(), &dict, &mu, None).unwrap();
//! assert_eq!(k.size(), 9);
//! ```

pub mod analytic;
pub mod data;
pub mod dictionary;
pub mod edmd;
pub mod error;
pub mod io;
mod linalg;
pub mod predict;
pub mod quadrature;
pub mod spectral;
pub mod svg;
pub mod systems;

pub use analytic::{fit_analytic, transfer_matrix};
pub use data::{generate_iid, generate_trajectory, SnapshotPair, SnapshotProvenance};
pub use dictionary::Dictionary;
pub use edmd::{fit_edmd, fit_edmd_with, EdmdOptions, KoopmanMatrix, Provenance};
pub use error::{KoopmanError, Result};
pub use predict::{l2_error, predict, EvalSpec, PredictionResult};
pub use quadrature::{gauss_rule, QuadratureRule};
pub use spectral::{
    eig, eigenmeasure_extract, fit_trajectory, hausdorff, pf_check, Eigenmeasure, SpectralDecomp, TrajectoryOperator,
};
pub use systems::{Domain, DynamicalSystem, Measure, State};

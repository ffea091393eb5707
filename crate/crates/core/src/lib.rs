//! Streaming sparse Gaussian-process regression with LegS interdomain
//! inducing variables.
//!
//! ```text
//! kernel / spectral / linalg / quadrature   numerical building blocks
//! hippo                                     LegS operators and recurrences
//! covariance                                K_fu, RFF features, K_uu evolution
//! streaming                                 first fit, online update, predict
//! hyper                                     exact-GP hyperparameter search
//! baselines                                 inducing-point providers
//! harness                                   data, tasks, metrics, experiments
//! ```

pub mod baselines;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod hippo;
pub mod hyper;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod spectral;
pub mod streaming;

pub use error::{Error, Result};
pub use kernel::{KernelSpec, Point};

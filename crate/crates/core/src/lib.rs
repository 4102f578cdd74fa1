//! Transfer operators of noisy dynamical systems on finite partitions.
//!
//! A [`NoisySystem`] (base map plus noise law) is discretized by Ulam's
//! method into a row-stochastic [`TransitionKernel`]. The kernel acts on
//! cell-valued [`Observable`]s as the transfer operator `L` and on
//! probability [`Measure`]s as its dual `L*`. On top of that the crate
//! solves for stationary, periodic and ergodic measures, and the
//! [`theorems`] module turns the maximal and pointwise ergodic theorems
//! into checks that report both sides of each inequality.
//!
//! Everything is generic over the floating-point [`Scalar`] (`f32` or
//! `f64`); the unsuffixed aliases below fix `f64`.
//!
//! ```
//! use noisy_ergodic::{kernel_from_rows, stationary_measures, Observable};
//! use noisy_ergodic::theorems::check_maximal_inequality;
//!
//! let p = kernel_from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
//! let mu = &stationary_measures(&p, 1e-13, 100_000).unwrap()[0];
//! let phi = Observable::new(vec![1.0, -3.0]).unwrap();
//! let report = check_maximal_inequality(&p, mu, &phi, 64, 1e-10).unwrap();
//! assert!(report.passed);
//! ```

pub mod error;
pub mod kernel;
pub mod mc;
pub mod measure;
pub mod operator;
pub mod scalar;
pub mod space;
pub mod theorems;

pub use error::{Error, Result};
pub use kernel::{
    kernel_from_rows, kernel_power, ulam_discretize, BaseMap, Boundary, Noise, NoisySystem,
    TransitionKernel, DEFAULT_QUADRATURE_POINTS,
};
pub use measure::{
    closed_classes, ergodic_decomposition, invariant_sets, is_ergodic, periodic_measures,
    stationary_measures, support, ErgodicDecomposition, InvariantSetReport, PeriodicMeasure,
};
pub use operator::{apply_l, apply_l_star, duality_gap, negative_part, positive_part};
pub use scalar::Scalar;
pub use space::{discretize_observable, integrate, make_uniform_partition, DomainKind, Measure, Observable, Partition};
pub use theorems::CheckReport;

pub type Kernel = TransitionKernel<f64>;
pub type Kernel32 = TransitionKernel<f32>;
pub type Obs = Observable<f64>;
pub type Obs32 = Observable<f32>;
pub type Prob = Measure<f64>;
pub type Prob32 = Measure<f32>;
pub type Grid = Partition<f64>;
pub type Grid32 = Partition<f32>;

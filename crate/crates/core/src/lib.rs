//! Numerical laboratory for first- and second-order scoring rules.
//!
//! The library evaluates expected scores `S1(p̂, p)` and `S2(Q̂, Q)` for
//! first-order losses and for second-order losses used in evidential
//! uncertainty quantification (Bayesian Dirichlet losses, deep evidential
//! regression), and audits them: propriety searches, order-sensitivity and
//! concavity probes, and constructive counterexamples.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line front end uses.

pub mod audit;
pub mod cli;
pub mod error;
pub mod first_order;
pub mod losses;
pub mod quadrature;
pub mod scalar;
pub mod scoring;
pub mod second_order;
pub mod special;
pub mod text;

pub use error::{Error, Result};
pub use first_order::{FirstOrderLoss, Outcome, Task};
pub use losses::{LossDomain, SecondOrderLoss};
pub use scalar::Real;
pub use scoring::{EvalMethod, Method};

pub type Categorical = first_order::Categorical<f64>;
pub type Gaussian = first_order::Gaussian<f64>;
pub type StudentT = first_order::StudentT<f64>;
pub type TruncatedGaussian = first_order::TruncatedGaussian<f64>;
pub type FiniteMixture = first_order::FiniteMixture<f64>;
pub type FirstOrderDist = first_order::FirstOrderDist<f64>;

pub type Dirichlet = second_order::Dirichlet<f64>;
pub type Nig = second_order::Nig<f64>;
pub type DiracMix = second_order::DiracMix<f64>;
pub type SecondOrderDist = second_order::SecondOrderDist<f64>;

pub type LossSpec = losses::LossSpec<f64>;
pub type Quadratic = losses::Quadratic<f64>;
pub type ScoreValue = scoring::ScoreValue<f64>;
pub type ScoreGap = scoring::ScoreGap<f64>;

pub type AuditVerdict = audit::AuditVerdict<f64>;
pub type ProbeConfig = audit::ProbeConfig<f64>;

//! Risk-sensitive control of finite Markov decision processes through the
//! principal-eigenvalue picture.
//!
//! The optimal asymptotic growth rate of `E[exp(Σ rewards)]` is `log ρ`,
//! where `ρ` is the principal eigenvalue of the max-over-actions operator
//! `Tf(i) = max_u Σ_j p(j|i,u) e^{r(i,u,j)} f(j)`. The crate provides
//!
//! * [`spectral`]: Perron roots, Collatz–Wielandt brackets, stationary laws;
//! * [`control`]: the eigenpair of `T` and certificates for irreducible models;
//! * [`reducible`]: per-state growth rates, the multiplicative dynamic
//!   programming equations and a brute-force policy oracle;
//! * [`variational`]: relative entropy, Gibbs and Donsker–Varadhan formulas,
//!   ergodic occupation measures and dual certificates;
//! * [`evaluate`]: exact and Monte Carlo finite-horizon evaluation.

pub mod control;
mod engine;
pub mod evaluate;
pub mod fixtures;
pub mod generate;
pub mod model;
pub mod numeric;
pub mod reducible;
pub mod spectral;
pub mod variational;

pub use control::{solve_irreducible, ControlError, ControlledEigenSolution, SolveOptions};
pub use model::{
    classify, instance_support_union, policy_matrix, Classification, MdpInstance, ModelError,
    NonnegMatrix, Policy,
};
pub use reducible::{oracle_growth, solve_reducible, DpSolution, GrowthReport};
pub use spectral::{power_iteration, spectral_radius, CwBounds, EigenPair, SpectralError};

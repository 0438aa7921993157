//! Local detection of entanglement in two-mode pure Gaussian states.
//!
//! A pair of free particles is prepared in a Gaussian state parametrized by a
//! packet width `a` and an entanglement length `b` (`b = ∞` is the product
//! state). The crate provides:
//!
//! * [`gaussian`]: closed-form dispersions, marginals and the initial amplitude;
//! * [`covariance`]: the 4×4 correlation matrix, the Simon separability
//!   invariant, the symplectic standard form and the entanglement of formation;
//! * [`protocols`]: simulated single-party measurement campaigns and the two
//!   local classification procedures;
//! * [`oracle`]: a brute-force grid wavefunction with an exact spectral free
//!   propagator, used to validate every closed form by quadrature;
//! * [`cli`]: the batch command-line front end.

pub mod cli;
pub mod covariance;
pub mod error;
pub mod gaussian;
pub mod oracle;
pub mod protocols;

pub use error::{Error, Result};
pub use gaussian::{CorrelationLength, GaussianDensity, PairParams, PhysicalConstants};

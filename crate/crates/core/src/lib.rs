//! Lower bounds on the Bayes risk for multiparameter quantum-state
//! estimation over discretized priors.
//!
//! The crate is organized bottom-up:
//!
//! - [`matcore`]: dense complex linear algebra (Hermitian spectra, PSD
//!   square roots, Lyapunov solves, trace norms, extended-space operators).
//! - [`model`]: grid priors, parametric states, weight matrices and the
//!   prior-averaged moments every bound consumes.
//! - [`closedform`]: Bayesian SLD/RLD Cramér–Rao bounds and the quantum van
//!   Trees bound.
//! - [`conic`]: a small dense semidefinite-programming layer with a
//!   homogeneous self-dual interior-point solver.
//! - [`sdpbounds`]: the Bayesian Nagaoka–Hayashi, Holevo-type and Nagaoka
//!   bounds, plus the trace-minimization family used to cross-check them.
//! - [`verify`]: explicit measurements and estimators whose risk certifies
//!   the lower bounds from above.

pub mod closedform;
pub mod conic;
pub mod error;
pub mod matcore;
pub mod model;
pub mod sdpbounds;
pub mod verify;

pub use conic::{ConicStatus, SolveSummary, SolverOptions};
pub use error::{Error, Result};
pub use matcore::{CMat, DensityMatrix, ExtendedOperator, Hermitian, RMat};
pub use model::{BayesMoments, ExtendedMoments, ModelFile, StatisticalModel, WeightSpec};

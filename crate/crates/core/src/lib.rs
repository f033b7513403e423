//! Hyperspectral super-resolution by coupled fully-connected tensor network
//! (FCTN) decomposition with a band-graph regularizer.
//!
//! The low-resolution hyperspectral image and the high-resolution
//! multispectral image are tensorized into multiscale high-order tensors
//! ([`tensorize`]), explained jointly by one FCTN whose spatial and spectral
//! factors they share ([`fctn`]), and fitted by alternating block
//! minimization ([`solver`]).

pub mod cg;
pub mod error;
pub mod experiment;
pub mod fctn;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod npy;
pub mod oracle;
pub mod solver;
pub mod synthetic;
pub mod tensor;
pub mod tensorize;

pub use error::{Error, Result};
pub use fctn::{random_init, FctnFactorSet, RankMatrix};
pub use graph::SpectralGraph;
pub use metrics::MetricReport;
pub use solver::{fuse, FusionConfig, FusionOutput, FusionProblem, FusionState, Weighting};
pub use tensor::{DenseTensor, Matrix};
pub use tensorize::{detensorize, tensorize, DegradationModel, TensorizationPlan};

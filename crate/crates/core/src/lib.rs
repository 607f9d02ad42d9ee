#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod mc;
pub mod model;
pub mod ode;
pub mod quad;
pub mod rng;
pub mod root;
pub mod scale;
pub mod specialfn;
pub mod valuation;

pub use eigen::{Backend, EigenPair, OdeConfig};
pub use error::{Error, Result};
pub use mc::{McEstimate, PathResult, SimConfig};
pub use model::{make_diffusion, DiffusionSpec, Family, ValidationReport};
pub use scale::{DerivMode, ExitFunctionals, ScaleKernel, WOrder};
pub use valuation::{BarrierProblem, BarrierSearchConfig, OptimalBarrier};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

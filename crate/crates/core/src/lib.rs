//! Sparse Tucker decomposition via simulated distributed HOOI, with the
//! Lite, coarse-grained and medium-grained distribution schemes and their
//! communication metrics.

pub mod dense;
pub mod engine;
pub mod error;
pub mod layout;
pub mod linalg;
pub mod metrics;
pub mod model;
mod rng;
pub mod schemes;
pub mod tensor;
pub mod tns;

pub use error::{Error, Result};
pub use model::{CoreTensor, TuckerModel};
pub use schemes::{DistributionScheme, Policy, SchemeKind};
pub use tensor::{Element, SparseTensor};

//! Kriging surrogates over mixed and hierarchical design spaces, with
//! efficient global optimization on top.

pub mod design_space;
pub mod ego;
pub mod error;
pub mod kernels;
pub mod kriging;
pub mod problems;
pub mod sampling;

pub use design_space::{DesignPoint, DesignSpace, ImputationPolicy, Role, Variable, VariableKind};
pub use error::{Error, Result};
pub use kernels::{CategoricalKernel, ContinuousKernel, HierarchicalKernel, KernelConfig};
pub use kriging::{KrigingConfig, KrigingModel};

//! Kernels on continuous, categorical and mixed inputs.

pub mod categorical;
pub mod continuous;
pub mod expr;
pub mod params;
pub mod schema;
pub mod warping;

pub use categorical::{ordinal_kernel, CategoricalForm, CategoricalKernel};
pub use continuous::{eval_continuous, ContinuousKernel1D};
pub use expr::{combine, cross_gram, gram, CombineOp, Kernel, KernelExpr};
pub use params::{pack, pack_with_specs, param_count, param_specs, unpack, ParamKind, ParamSpec};
pub use schema::{CategoricalInput, InputSchema, MixedPoint};
pub use warping::{warp_positions, Warping};

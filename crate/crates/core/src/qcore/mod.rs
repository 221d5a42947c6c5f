//! Complex Hermitian linear algebra, entropies and tensor bookkeeping.

pub mod eig;
pub mod entropy;
pub mod matrix;
pub mod random;
pub mod state;
pub mod structure;
pub mod tensor_ops;

pub use eig::{eigh, Eigen};
pub use entropy::{relative_entropy, von_neumann_entropy};
pub use matrix::{CMat, MatrixLiteral};
pub use state::{
    dephase, partial_trace, partial_transpose, tensor, trace_norm_distance, DensityOperator,
    HermitianOperator,
};
pub use structure::{Party, TensorStructure};

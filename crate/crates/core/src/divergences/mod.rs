//! Resource divergences against free-state sets.

pub mod dmax;
pub mod frank_wolfe;
pub mod hypothesis;
pub mod regularized;
pub mod rel_entropy;
pub mod result;

pub use dmax::dmax;
pub use frank_wolfe::FwOptions;
pub use hypothesis::{hypothesis_testing, hypothesis_testing_restricted, Restriction};
pub use regularized::{regularized_rel_entropy, Additivity, RegularizedResult};
pub use rel_entropy::{rel_entropy_engine, rel_entropy_of_resource};
pub use result::{DivergenceResult, Method};

//! Free-state sets, free-operation classes and their oracles.

pub mod lmo;
pub mod membership;
pub mod ops;
pub mod samplers;
pub mod sdp;
pub mod sets;

pub use lmo::{ChannelImage, LinearMinimizer};
pub use ops::{op_in_class, CheckMode, FreeOpClass, OpReport};
pub use sets::{closest_free_state, contains, random_free_state, Capabilities, FreeStateSet, SetDescriptor, SetKind};

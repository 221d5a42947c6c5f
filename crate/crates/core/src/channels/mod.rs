//! Quantum channels as Kraus families, and round-based local protocols.

pub mod kraus;
pub mod lfocc;
pub mod povm;

pub use kraus::{
    apply, compose, effective_povm, is_unital, marginal_channel, marginal_channel_mixed, KrausChannel,
};
pub use lfocc::{compile_lfocc, LfoccProtocol, Round};
pub use povm::Povm;

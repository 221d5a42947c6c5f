//! Composite quantum resource theories at desk scale.
//!
//! Local theories are described by [`theories::FreeStateSet`] and
//! [`theories::FreeOpClass`]; [`composite`] builds the minimal and maximal
//! composite sets; [`divergences`] computes certified resource divergences;
//! [`laws`] evaluates the transformation bounds; [`certify`] covers remote
//! certification.

// Links the system BLAS/LAPACK used by the SDP backend.
extern crate openblas_src;

pub mod catalog;
pub mod certify;
pub mod channels;
pub mod composite;
pub mod divergences;
pub mod error;
pub mod exec;
pub mod laws;
pub mod qcore;
pub mod serde_ext;
pub mod theories;

pub use error::{Error, Result};

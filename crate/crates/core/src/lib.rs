//! Toeplitz elements over residually finite groups with prescribed sofic
//! entropy, checked by exact finite-scale computation.

pub mod entropy;
pub mod error;
pub mod group;
pub mod perm;
pub mod shift;
pub mod sofic;
pub mod toeplitz;

pub use error::{Error, Result};

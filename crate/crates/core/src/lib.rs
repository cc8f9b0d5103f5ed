//! Desk-scale laboratory for quantum fingerprint hashes under classical
//! side-channel leakage.

pub mod attack;
pub mod decomposition;
pub mod discrimination;
pub mod error;
pub mod extractor;
pub mod fingerprint;
pub mod numerics;
pub mod sample;
pub mod state;
pub mod swap;

pub use error::{Error, Result};

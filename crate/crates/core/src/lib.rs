//! Identity-based encryption with equality test and flexible authorization
//! over integer lattices.
//!
//! The crate is organised bottom-up:
//!
//! - [`zq`]: exact matrix arithmetic over `Z_q` and small integers
//! - [`sampler`]: discrete Gaussians, LWE noise and uniform matrices
//! - [`trapdoor`]: trapdoor generation and Gaussian preimage / basis sampling
//! - [`hash`]: the message hash `H`, the ciphertext tag hash `H'` and the
//!   canonical ciphertext encoding
//! - [`params`]: parameter sets, the constraint validator and presets
//! - [`scheme`]: setup, key extraction, encryption and decryption
//! - [`authz`]: the three authorization types and their equality tests
//! - [`format`]: the binary file format used by the `ibeetfa` tool
//!
//! None of the presets provide cryptographic security; they exist to exercise
//! the algebra at desk scale.

pub mod authz;
pub mod cli;
pub mod error;
pub mod format;
pub mod hash;
pub mod params;
pub mod sampler;
pub mod scheme;
pub mod trapdoor;
pub mod zq;

pub use error::{Error, LoadError, Result};

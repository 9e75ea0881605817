//! αβ-log-det divergences on SPD matrices and joint learning of an SPD
//! dictionary, per-atom divergence parameters and a ridge classifier.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod dataio;
pub mod divergence;
pub mod error;
pub mod iddl;
pub mod manifold;
pub mod spd;

pub use divergence::{abld, abld_airm, burg, jbld, jeffreys_kl, AbldParams, Variant};
pub use error::{Error, Result};
pub use spd::SpdMatrix;

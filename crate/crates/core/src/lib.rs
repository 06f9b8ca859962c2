//! Rashomon sets for sparse binned logistic GAMs.
//!
//! The set of near-optimal coefficient vectors for a fixed support is
//! approximated by an inscribed ellipsoid ([`rset_fit`]); ellipsoids for
//! coarser supports follow analytically by slicing ([`rset_block`]); and
//! the queries in [`apps`] (importance ranges, monotone repair, edit
//! projection, jump prevalence) are answered against the ellipsoid.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod box_oracle;
pub mod ellipsoid;
pub mod error;
pub mod eval;
pub mod gam;
pub mod io;
pub mod numeric;
pub mod rset_block;
pub mod rset_fit;
mod par;

pub use error::{Error, Result};

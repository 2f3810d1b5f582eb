//! Row contractions, their minimal isometric dilations on truncated Fock
//! spaces, characteristic functions of liftings, completely positive maps and
//! curvature-type invariants, all at finite matrix scale.
//!
//! Every infinite-dimensional object is replaced by an explicit truncation.
//! Operations that are only exact below the truncation record the levels on
//! which their output can be trusted.

pub mod catalog;
pub mod charfn;
pub mod config;
pub mod cpmaps;
pub mod dilation;
pub mod error;
pub mod fock;
pub mod invariants;
pub mod io;
pub mod liftings;
pub mod numkit;
pub mod random;
pub mod sparse;
pub mod symbols;
pub mod tuples;

pub use config::Tolerances;
pub use error::{FockError, Result};
pub use numkit::{CMat, CVec, SubspaceBasis, C64};

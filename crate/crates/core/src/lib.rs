//! Numerical laboratory for holomorphic newform families: Kloosterman sums,
//! the Petersson trace formula, explicit q-expansions, L-values and zeros,
//! and the statistics built on top of them.

pub mod arith;
pub mod bessel;
pub mod cli;
pub mod error;
pub mod forms;
pub mod kloosterman;
pub mod lfun;
pub mod special;
pub mod stats;
pub mod sum;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

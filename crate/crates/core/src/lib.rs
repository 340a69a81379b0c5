//! Sudler sine products `P_N(α) = ∏ 2|sin πrα|` for purely periodic quadratic
//! irrationals α, their perturbed subsequence limits, and bound certification.

pub mod bounds;
pub mod cfrac;
pub mod cli;
pub mod error;
pub mod limitfn;
pub mod orbit;
pub mod quadfield;
pub mod real;
pub mod sudler_direct;
pub mod verify;

pub use error::{Error, Result};

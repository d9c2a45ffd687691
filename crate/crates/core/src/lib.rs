//! Estimation of quantum states and processes from informationally
//! incomplete data: iterative maximum likelihood (ML), maximum-likelihood
//! maximum-entropy (MLME), imperfect detectors, POM analysis and process
//! tomography in Choi form.
#![no_std]
// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod estimate;
pub mod linalg;
pub mod pom;
pub mod process;
pub mod random;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use linalg::{Matrix, C64};

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod kkt;
pub mod krylov;
pub mod linalg;
pub mod multigrid;
pub mod problems;
pub mod smoothers;
pub mod sqp;
pub mod timedisc;

pub use error::{Error, Result};

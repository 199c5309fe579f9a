#![allow(clippy::needless_range_loop)]

//! Prequantum special phase functions, Hermitian vector fields and Pauli operators
//! on a curved Galileian spacetime.

pub mod background;
pub mod error;
pub mod expr;
pub mod hermitian;
pub mod jet;
pub mod pauli;
pub mod quantum;
pub mod sampling;
pub mod scenario;
pub mod special;
pub mod units;
pub mod verify;

pub use error::{CqmError, Result};

//! Strictly consistent scoring functions and identification functions for
//! elicitable functionals, plus a numerical verification lab and a realized
//! score backtest harness.

pub mod backtest;
pub mod dist;
pub mod error;
pub mod functionals;
pub mod ident;
pub mod lab;
pub mod parse;
pub mod quad;
pub mod scores;
pub mod shapes;

pub use error::{Error, Result};

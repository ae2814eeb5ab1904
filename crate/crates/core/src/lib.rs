//! Trajectory synthesis for Fisher information maximization.

pub mod cli;
pub mod csvio;
pub mod error;
pub mod estimation;
pub mod information;
pub mod model;
pub mod numkit;
pub mod sensitivity;
pub mod trajopt;

pub use error::{Error, Result};

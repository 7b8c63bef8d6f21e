//! Classical shadows from monitored quantum circuits.

pub mod circuit;
pub mod cli;
pub mod dense;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod haar;
pub mod infopower;
pub mod pauli;
pub mod records;
pub mod seed;
pub mod settings;
pub mod shadow;
pub mod stab;
pub mod stats;
pub mod subset;
pub mod u1;
pub mod xeb;

pub use error::{Error, ErrorClass, Result};

pub mod anderson;
pub mod cli;
pub mod compression;
pub mod config;
pub mod error;
pub mod loqd;
pub mod metrics;
pub mod quadrature;
pub mod record;
pub mod spectral;
pub mod study;
pub mod timestepper;
pub mod transport;
pub mod tridiag;

pub use error::{Error, Result};

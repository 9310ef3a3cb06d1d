//! File formats, corpus loading, on-disk experiment runs and the `vqart`
//! command line, on top of the pure computations in `vqart_core`.

pub mod cmd;
pub mod error;
pub mod fixture;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};

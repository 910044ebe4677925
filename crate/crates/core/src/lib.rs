//! Optimal transport between signed measures whose parts are smooth
//! densities, atoms and fractal samples, with numerical checks of the
//! resulting structure equations.

pub mod cloud;
pub mod config;
pub mod error;
pub mod fractalgeo;
pub mod io;
pub mod measures;
pub mod partition;
pub mod pipeline;
pub mod presets;
pub mod regularize;
pub mod transport;
pub mod verify;

pub use error::{Result, SotxError};

//! Numerical toolkit for the circular Riesz gas.

pub mod analysis;
mod bits;
pub mod circle;
pub mod energy;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod meanfield;
pub mod sampler;
pub mod scalar;
pub mod spectral;
pub mod verify;

pub use circle::{circ_distance, config_of, gaps_of, Configuration, GapVector, Params};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use fit::{fit_power_law, DecayFit, FitMode};
pub use spectral::CirculantOperator;

pub type Circulant = CirculantOperator<f64>;
pub type Circulant32 = CirculantOperator<f32>;

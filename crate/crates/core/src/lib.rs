pub mod auxiliary;
pub mod error;
pub mod estimators;
pub mod hierarchy;
pub mod quad;
pub mod spectral;
pub mod stepper;
pub mod timefn;
pub mod wave;
pub mod weights;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod analysis;
pub mod codec;
pub mod error;
pub mod harness;
pub mod recon;
pub mod signal;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
pub use signal::{Frame, SnrDb};

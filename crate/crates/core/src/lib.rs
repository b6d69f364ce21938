pub mod complex;
pub mod error;

pub use complex::{Complex, Face, LevelIndex};
pub use error::{Error, Result};
pub mod walks;
pub mod spectra;
pub mod caps;
pub mod stav;
pub mod grassmann;
pub mod agreement;
pub mod decoder;
pub mod io;

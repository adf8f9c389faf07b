pub mod blocks;
pub mod cli;
pub mod error;
pub mod format;
pub mod machines;
pub mod mixed;
pub mod oracle;
pub mod sdp;
pub mod su2;
pub mod verify;

pub use error::{Error, Result};

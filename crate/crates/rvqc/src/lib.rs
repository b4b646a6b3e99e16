pub mod audio;
pub mod error;
pub mod signal;

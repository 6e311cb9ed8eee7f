pub mod analysis;
pub mod bpe;
pub mod cli;
pub mod codec;
pub mod error;
pub mod kv;
pub mod preprocess;
pub mod quantizer;
pub mod sampler;
pub mod sequence;
pub mod signal_io;
pub mod synth;

pub use error::{Error, Result};

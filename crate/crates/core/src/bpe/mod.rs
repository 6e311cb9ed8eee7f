//! Byte-pair merge learning over symbol corpora.

pub mod stats;
pub mod tokenizer;
pub mod train;

pub use stats::{get_stats, merge, Pair, PairCounts};
pub use tokenizer::{Merge, Tokenizer, FORMAT_HEADER, FORMAT_VERSION};
pub use train::{train, train_with, TrainOutput, TrainStrategy};

/// Ids are stored as 32-bit unsigned integers.
pub type TokenId = u32;

/// Ids below this are raw bytes.
pub const BASE_VOCAB: TokenId = 256;

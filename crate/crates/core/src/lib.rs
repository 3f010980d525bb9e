//! Subword segmentation for machine-translation preprocessing.
//!
//! Two families of splitters live here:
//!
//! - language-agnostic: byte-pair encoding with optional zero-suffix `_`
//!   marking ([`bpe`]) and a wordpiece encoder with escaped alphabet and
//!   threshold-searched vocabulary ([`ste`]);
//! - linguistically motivated: a derivational-network segmenter that stems
//!   words by longest common substring and propagates morph boundaries
//!   ([`derivnet`]), plus an adapter for externally produced segmentations
//!   ([`compose`]).
//!
//! [`eval`] scores segmentations against a gold lexicon and [`corpus`] holds
//! the I/O, counting and marker conventions everything else shares.
//!
//! ```
//! use subseg::corpus::{count_tokens, SentenceStream};
//! use subseg::bpe::{bpe_train, UnderscoreMode};
//!
//! let stream = SentenceStream::parse("aaab aaab aab\n").unwrap();
//! let counts = count_tokens(&stream);
//! let table = bpe_train(&counts, 2, UnderscoreMode::None).unwrap();
//! assert_eq!(table.encode_word("aaab", false), vec!["aa", "ab"]);
//! ```

pub mod bpe;
pub mod cli;
pub mod compose;
pub mod corpus;
pub mod derivnet;
pub mod error;
pub mod eval;
pub mod exec;
pub mod lexicon;
pub mod ste;

pub use error::{Error, Result};
pub use exec::Exec;

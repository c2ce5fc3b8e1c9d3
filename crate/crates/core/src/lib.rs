//! Multi-category embeddings for bibliographic records.
//!
//! Every element of a paper (an author, a cited paper, the publication year,
//! the paper's own id, a word or phrase of its title and abstract) gets a
//! target vector. Elements of the non-textual categories additionally get a
//! context vector and a bias, and the model learns to predict the
//! non-textual elements of a paper from each of its other elements. The text
//! of a paper acts as a single target: the average of its tokens' target
//! vectors.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`corpus`] reads JSON-lines records, normalizes text, mines phrases,
//!   builds per-category vocabularies and splits train/test data.
//! * [`model`] holds the parameters and trains them with noise-contrastive
//!   estimation.
//! * [`search`] ranks elements by one of three similarity measures.
//! * [`eval`] builds the multiple-choice author prediction task, a logistic
//!   regression baseline and a synthetic topic corpus.
//! * [`persist`] reads and writes the binary model file.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod persist;
pub mod search;

pub use corpus::vocab::{CategoryVocab, EncodedPaper, UnknownPolicy, Vocabulary};
pub use corpus::{CategoryKind, CategorySpec, PaperRecord};
pub use error::{Error, Result};
pub use model::{ElementRef, EmbeddingModel, TargetRef, TrainConfig, TrainingPair};
pub use search::{RankedResult, SimilarityMeasure};

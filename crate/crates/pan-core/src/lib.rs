//! Path-based attention over sentence bags for fine-grained entity typing.
//!
//! An entity's sentences form a bag; a bi-LSTM encodes each sentence; every
//! labeled type attends over the bag with a query composed from the type's
//! ancestor path in the hierarchy; independent logistic classifiers score all
//! types. The crate carries the complete computational core — dense tensors
//! with reverse-mode gradients, the hierarchy, encoder, attention, classifier,
//! training and evaluation, and a synthetic noisy-supervision corpus
//! generator. It is `no_std` (alloc only); file formats and the command line
//! live in the companion `pan-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attention;
pub mod classifier;
pub mod data;
pub mod encoder;
pub mod hierarchy;
mod mathx;
pub mod model;
pub mod numerics;
pub mod pipeline;

pub use attention::{AttentionMatrix, Mode};
pub use data::{RawRecord, SentenceBag, SynthConfig};
pub use encoder::{EncoderKind, Vocab};
pub use hierarchy::{TypeHierarchy, TypeId};
pub use model::ModelParams;
pub use numerics::{Graph, NodeId, NumericsError, Tensor};
pub use pipeline::{EvalReport, TrainConfig};

//! Core of the `nestag` toolkit: a multi-task sequence tagger for nested
//! and overlapping entity spans.
//!
//! A shared recurrent sequence encoder feeds one tagging head per entity
//! word-length. Each head emits per-token begin/other tags for spans of
//! exactly its length, so nested and overlapping spans of different
//! lengths never compete for a tag slot. Training treats every head as a
//! separate task with its own class-weighted cross-entropy loss and its
//! own optimizer state.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature when building without `std`. All file formats, corpus parsing
//! and the command line live in the companion `nestag` crate.
//!
//! Module map:
//! - [`numerics`]: dense f64 tensors plus a reverse-mode gradient tape
//!   and a finite-difference gradient checker.
//! - [`rng`]: seeded deterministic generator used for every stochastic
//!   choice (init, dropout, shuffling), so runs are bit-reproducible.
//! - [`layers`]: embeddings, LSTM, dense, dropout, layer norm.
//! - [`model`]: the partly-layered network (shared encoder + per-length
//!   tagging heads) and its architecture variants.
//! - [`spancodec`]: BO tag encoding/decoding, nested-level assignment,
//!   and the concept-candidate filter.
//! - [`corpus`]: sentence/annotation containers shared by training and
//!   evaluation.
//! - [`training`]: class-weight tables, AdamW, per-task train steps and
//!   the epoch loop with best-checkpoint selection.
//! - [`evaluation`]: exact-match span scoring (overall, per length, per
//!   class, per nested level), confusion matrix, average length.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature");

pub(crate) mod fmath;

pub mod corpus;
pub mod evaluation;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod spancodec;
pub mod training;

pub use model::{ModelSpec, PartlyLayeredNet, Variant};
pub use numerics::{GradientTape, ParamId, ParamStore, Tensor, Value};
pub use rng::Rng;
pub use spancodec::{Span, Tag, TagSequence};

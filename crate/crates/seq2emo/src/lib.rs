//! Multi-label sequence classification with a latent-variable-chain decoder.
//!
//! The crate contains a small reverse-mode autodiff engine ([`tensor`]),
//! an LSTM encoder with Luong-style global attention, a bidirectional
//! latent-chain decoder plus binary-relevance and sequence-generation
//! baselines, multi-label metrics, a hashtag-based distant-supervision
//! corpus builder, and the training/evaluation machinery behind the
//! `seq2emo` command-line tool.

pub mod attention;
pub mod baselines;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod labels;
pub mod lvc;
pub mod model;
pub mod metrics;
pub mod optim;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use tensor::{Tape, Tensor};

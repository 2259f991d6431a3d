//! Audit language models fine-tuned on online communities for
//! representational bias.
//!
//! The pipeline pairs posts with comments into training files ([`corpus`]),
//! renders a demographic prompt suite ([`promptkit`]), collects generations
//! from a model service ([`genclient`]), scores them for sentiment
//! ([`sentiment`]) and toxicity ([`toxclient`]), aggregates per-demographic
//! means and gaps ([`metrics`]) and renders tables ([`report`]).
//! [`pipeline`] runs these as resumable stages over one [`config::RunConfig`].

pub mod config;
pub mod corpus;
pub mod error;
pub mod genclient;
pub mod http;
pub mod metrics;
pub mod pipeline;
pub mod promptkit;
pub mod report;
pub mod sentiment;
pub mod text;
pub mod toxclient;
pub mod util;

pub use error::{Error, Result};

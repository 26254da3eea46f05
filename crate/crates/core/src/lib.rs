//! Detection of ESG reputational-risk events in firm-tagged social-media
//! message streams, and measurement of the shareholder response with a
//! market-model event study.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ingest`] reads messages, prices, the market index and event calendars.
//! 2. [`lexicon`] and [`sentiment`] classify and score every message.
//! 3. [`aggregate`] places messages on the trading calendar (4 p.m. close to
//!    close) and builds per-(firm, taxonomy node) daily series.
//! 4. [`detect`] flags abnormal-volume spikes and filters confounded ones.
//! 5. [`study`] estimates standardized abnormal returns around each event
//!    and aggregates them per taxonomy node.
//! 6. [`report`] formats the results.
//!
//! [`synth`] generates corpora with planted ground truth and [`pipeline`]
//! wires the stages to files.

pub mod aggregate;
pub mod detect;
pub mod error;
pub mod ingest;
pub mod lexicon;
pub mod pipeline;
pub mod report;
pub mod sentiment;
pub mod study;
pub mod synth;

pub use error::{Error, ErrorClass, Result};

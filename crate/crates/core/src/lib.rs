//! Non-neural toolkit for scoring, generating, selecting and analysing
//! planner trajectory candidates against rule-based driving metrics.

pub mod analytics;
pub mod cli;
pub mod commands;
pub mod config;
pub mod demo;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod pseudo_expert;
pub mod refinement;
pub mod scene;
pub mod selection;
pub mod util;

pub use error::{Error, Result};

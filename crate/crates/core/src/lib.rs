//! Relative difficulty estimation for question pairs in community question
//! answering archives.
//!
//! The pipeline turns a Q&A dump into a temporal *difficulty network*
//! ([`graph`]), computes twelve pairwise features over it ([`features`]),
//! and trains a pairwise edge-direction classifier ([`model`]) that answers
//! "which of these two questions is harder?". Around that core sit scalar
//! baselines ([`baselines`]), a cold-start path for questions without
//! history ([`coldstart`]), global easy/medium/hard levels
//! ([`global_rank`]), robustness experiments ([`experiments`]) and an HTTP
//! service with a guarded feedback loop ([`service`]).

pub mod baselines;
pub mod coldstart;
pub mod error;
pub mod experiments;
pub mod features;
pub mod global_rank;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod service;
pub mod synth;
pub mod text;
mod types;

pub use error::{Error, Result};
pub use features::{NodeScoreCache, NodeScores, PairFeatureVector};
pub use graph::{DifficultyEdge, DifficultyNetwork, EdgeType, TypeSet};
pub use ingest::{AnswerRecord, Dataset, QuestionRecord, UserRecord};
pub use model::{PairClassifier, PairJudge, Verdict};
pub use types::{later_posted, AnswerId, QuestionId, Timestamp, UserId};

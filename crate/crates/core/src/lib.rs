//! Online selection of spacecraft memory-dump offsets.
//!
//! A Follow-The-Leader learner picks, for every pass of a relative orbit, the
//! pair of offsets that starts the dump after acquisition of signal and stops it
//! before loss of signal. The crate provides the learner, a synthetic Bernoulli
//! environment and a replay environment over recorded passes, the dump
//! scheduler, file formats with a seeded dataset generator, and regret /
//! saved-pass evaluation.

pub mod environment;
pub mod eval;
pub mod io;
pub mod learner;
pub mod model;
pub mod scheduler;

pub use environment::{success_predicate, BernoulliEnvironment, ReplayEnvironment};
pub use learner::{ftl_select, safe_margin_pick, LearnerState, TieBreaker, TieBreakerKind};
pub use model::{
    grid_linspace, Duration, FeedbackMatrix, GroundWindow, OffsetGrid, OffsetPair, PassEvents, PassKey, PassRecord,
    Timestamp,
};
pub use scheduler::{build_schedule, dump_window, DumpCommand, Schedule};

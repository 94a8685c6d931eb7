//! Follow-The-Leader over the offset grid.
//!
//! The learner keeps, for every action, the number of past steps on which that
//! action would have succeeded, and plays an action with the largest count.
//! How ties are resolved is pluggable ([`TieBreaker`]): the choice matters a
//! lot in practice, because operators will not move away from offsets that are
//! currently working.

use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::environment::success_predicate;
use crate::model::{Duration, FeedbackMatrix, GroundWindow, OffsetGrid, OffsetPair, PassEvents};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnerError {
    #[error("feedback is {got_aos}x{got_los}, learner grid is {n_aos}x{n_los}")]
    DimensionMismatch { got_aos: usize, got_los: usize, n_aos: usize, n_los: usize },
    #[error("action {0} is not on the learner grid")]
    OffGrid(OffsetPair),
    #[error("count table has {got} entries, grid has {expected}")]
    CountLength { got: usize, expected: usize },
    #[error("count {count} exceeds step - 1 = {limit}")]
    CountTooLarge { count: u64, limit: u64 },
    #[error("step must be >= 1")]
    ZeroStep,
    #[error("unknown tie-breaker {0:?} (expected uniform, stay or safe-margin)")]
    UnknownTieBreaker(String),
}

/// Cumulative reward per action, plus the step counter and the last action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnerState {
    grid: OffsetGrid,
    counts: Vec<u64>,
    step: u64,
    previous_action: Option<OffsetPair>,
}

impl LearnerState {
    /// Fresh learner at step 1 with all counts zero.
    pub fn new(grid: OffsetGrid) -> Self {
        let counts = vec![0; grid.len()];
        LearnerState { grid, counts, step: 1, previous_action: None }
    }

    /// Rebuilds a state from a snapshot, checking its invariants.
    pub fn from_parts(
        grid: OffsetGrid,
        counts: Vec<u64>,
        step: u64,
        previous_action: Option<OffsetPair>,
    ) -> Result<Self, LearnerError> {
        if step == 0 {
            return Err(LearnerError::ZeroStep);
        }
        if counts.len() != grid.len() {
            return Err(LearnerError::CountLength { got: counts.len(), expected: grid.len() });
        }
        if let Some(&count) = counts.iter().find(|&&c| c > step - 1) {
            return Err(LearnerError::CountTooLarge { count, limit: step - 1 });
        }
        if let Some(p) = previous_action.filter(|p| !grid.contains(p)) {
            return Err(LearnerError::OffGrid(p));
        }
        Ok(LearnerState { grid, counts, step, previous_action })
    }

    pub fn grid(&self) -> &OffsetGrid {
        &self.grid
    }

    /// Row-major cumulative rewards.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, pair: &OffsetPair) -> Option<u64> {
        self.grid.flat_index_of(pair).map(|k| self.counts[k])
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn previous_action(&self) -> Option<OffsetPair> {
        self.previous_action
    }

    fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Actions with the largest cumulative reward, in lexicographic order.
    pub fn leaders(&self) -> Vec<OffsetPair> {
        let best = self.max_count();
        self.counts.iter().enumerate().filter(|&(_, &c)| c == best).map(|(k, _)| self.grid.pair_at_flat(k)).collect()
    }

    pub fn is_leader(&self, pair: &OffsetPair) -> bool {
        self.count(pair) == Some(self.max_count())
    }

    /// Absorbs one step of full-information feedback.
    pub fn update(&mut self, feedback: &FeedbackMatrix, chosen: OffsetPair) -> Result<(), LearnerError> {
        if !feedback.matches(&self.grid) {
            let (got_aos, got_los) = feedback.dims();
            return Err(LearnerError::DimensionMismatch {
                got_aos,
                got_los,
                n_aos: self.grid.n_aos(),
                n_los: self.grid.n_los(),
            });
        }
        if !self.grid.contains(&chosen) {
            return Err(LearnerError::OffGrid(chosen));
        }
        for (c, &b) in self.counts.iter_mut().zip(feedback.bits()) {
            *c += u64::from(b);
        }
        self.step += 1;
        self.previous_action = Some(chosen);
        Ok(())
    }
}

/// Name-only view of a tie-breaking rule, used in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TieBreakerKind {
    UniformRandom,
    Stay,
    SafeMargin,
}

impl TieBreakerKind {
    pub fn name(self) -> &'static str {
        match self {
            TieBreakerKind::UniformRandom => "uniform",
            TieBreakerKind::Stay => "stay",
            TieBreakerKind::SafeMargin => "safe-margin",
        }
    }
}

impl fmt::Display for TieBreakerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TieBreakerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(TieBreakerKind::UniformRandom),
            "stay" => Ok(TieBreakerKind::Stay),
            "safe-margin" => Ok(TieBreakerKind::SafeMargin),
            other => Err(LearnerError::UnknownTieBreaker(other.to_string())),
        }
    }
}

/// Tie-breaking rule with whatever state it needs.
#[derive(Debug, Clone)]
pub enum TieBreaker {
    /// Uniform over the leader set, from a seeded stream.
    UniformRandom(Box<ChaCha8Rng>),
    /// Keep the previous action while it is a leader; otherwise the
    /// lexicographically smallest leader.
    Stay,
    /// Prefer leaders that would have worked on every recorded pass, as far
    /// from the tightest observed offsets as possible.
    SafeMargin(SafeMarginContext),
}

/// Recorded passes seen so far, for [`TieBreaker::SafeMargin`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SafeMarginContext {
    pub history: Vec<(PassEvents, GroundWindow)>,
    pub dump_duration: Duration,
}

impl TieBreaker {
    pub fn uniform(seed: u64) -> Self {
        TieBreaker::UniformRandom(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    pub fn safe_margin(dump_duration: Duration) -> Self {
        TieBreaker::SafeMargin(SafeMarginContext { history: Vec::new(), dump_duration })
    }

    pub fn from_kind(kind: TieBreakerKind, seed: u64, dump_duration: Duration) -> Self {
        match kind {
            TieBreakerKind::UniformRandom => TieBreaker::uniform(seed),
            TieBreakerKind::Stay => TieBreaker::Stay,
            TieBreakerKind::SafeMargin => TieBreaker::safe_margin(dump_duration),
        }
    }

    pub fn kind(&self) -> TieBreakerKind {
        match self {
            TieBreaker::UniformRandom(_) => TieBreakerKind::UniformRandom,
            TieBreaker::Stay => TieBreakerKind::Stay,
            TieBreaker::SafeMargin(_) => TieBreakerKind::SafeMargin,
        }
    }

    /// Records a pass with a known lock window. Only `SafeMargin` keeps it.
    pub fn observe_pass(&mut self, events: &PassEvents, ground: &GroundWindow) {
        if let TieBreaker::SafeMargin(ctx) = self {
            ctx.history.push((*events, *ground));
        }
    }
}

/// Plays a leader of `state`, resolving ties with `tau`.
pub fn ftl_select(state: &LearnerState, tau: &mut TieBreaker) -> OffsetPair {
    let leaders = state.leaders();
    if leaders.len() == 1 {
        return leaders[0];
    }
    match tau {
        TieBreaker::UniformRandom(rng) => leaders[rng.random_range(0..leaders.len())],
        TieBreaker::Stay => match state.previous_action() {
            Some(prev) if leaders.contains(&prev) => prev,
            _ => leaders[0],
        },
        TieBreaker::SafeMargin(ctx) => safe_margin_pick(&leaders, &ctx.history, ctx.dump_duration),
    }
}

/// Smallest offsets that would have worked on every recorded pass, ignoring
/// the duration requirement: `(max lock delay, max early loss)`, floored at 0.
pub fn minimal_offsets(history: &[(PassEvents, GroundWindow)]) -> (Duration, Duration) {
    history.iter().fold((Duration::ZERO, Duration::ZERO), |(a, l), (ev, gw)| {
        (a.max(gw.lock_start() - ev.usable_start()), l.max(ev.usable_end() - gw.lock_end()))
    })
}

/// Safety-margin tie-break.
///
/// Leaders that would have succeeded on every recorded pass are preferred (all
/// leaders are kept if none would). Among them the pick maximises the smaller
/// of its two margins over [`minimal_offsets`], then minimises `a + l` so the
/// dump uses as much of the visibility as possible, then takes the
/// lexicographically smallest pair.
///
/// Panics if `leaders` is empty.
pub fn safe_margin_pick(
    leaders: &[OffsetPair],
    history: &[(PassEvents, GroundWindow)],
    dump_duration: Duration,
) -> OffsetPair {
    assert!(!leaders.is_empty(), "leader set must be non-empty");
    if leaders.len() == 1 {
        return leaders[0];
    }
    let (a_min, l_min) = minimal_offsets(history);
    let feasible: Vec<OffsetPair> = leaders
        .iter()
        .copied()
        .filter(|p| history.iter().all(|(ev, gw)| success_predicate(ev, gw, p.aos_offset, p.los_offset, dump_duration)))
        .collect();
    let pool = if feasible.is_empty() { leaders } else { &feasible };
    *pool
        .iter()
        .max_by_key(|p| {
            let margin = (p.aos_offset - a_min).min(p.los_offset - l_min);
            (margin, Reverse(p.aos_offset + p.los_offset), Reverse(**p))
        })
        .expect("pool is non-empty")
}

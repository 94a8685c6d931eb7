//! Regret accounting, saved-pass statistics and experiment drivers.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{BernoulliEnvironment, ReplayEnvironment};
use crate::io::MissionDataset;
use crate::learner::{ftl_select, LearnerState, TieBreaker, TieBreakerKind};
use crate::model::{Duration, FeedbackMatrix, OffsetGrid, OffsetPair, PassKey, PassRecord};
use crate::scheduler::{build_schedule, dump_window, Schedule, ScheduleError};

/// Largest `|grid| * T` accepted by [`expected_regret`].
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("exact enumeration needs |grid| * T <= {MAX_ENUMERATION}, got {cells} * {horizon}")]
    TooLarge { cells: usize, horizon: u64 },
    #[error("initial action {0} is not on the grid")]
    InitialOffGrid(OffsetPair),
    #[error("relative orbit {0}: passes out of cycle order")]
    Unsorted(u32),
    #[error("could not start {0} worker threads")]
    ThreadPool(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// No telemetry for the pass: nothing observed, nothing learned.
    Skipped,
    Played {
        reward: bool,
        feedback: FeedbackMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStep {
    pub cycle: u32,
    /// Offsets commanded on this step.
    pub action: OffsetPair,
    /// Offsets the learner holds after this step, i.e. the next command.
    pub next_action: OffsetPair,
    pub outcome: StepOutcome,
}

impl RunStep {
    pub fn reward(&self) -> Option<bool> {
        match self.outcome {
            StepOutcome::Skipped => None,
            StepOutcome::Played { reward, .. } => Some(reward),
        }
    }
}

/// Transcript of one learner, steps in cycle order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub relative_orbit: u32,
    pub steps: Vec<RunStep>,
}

impl RunRecord {
    pub fn played(&self) -> impl Iterator<Item = &RunStep> {
        self.steps.iter().filter(|s| s.reward().is_some())
    }

    /// Played steps with reward 0.
    pub fn mistakes(&self) -> usize {
        self.played().filter(|s| s.reward() == Some(false)).count()
    }

    /// Mistakes after the first played step.
    pub fn mistakes_after_first(&self) -> usize {
        self.played().skip(1).filter(|s| s.reward() == Some(false)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretReport {
    pub horizon: u64,
    pub best_fixed_action: OffsetPair,
    pub best_fixed_reward: u64,
    pub learner_reward: u64,
    /// May be negative on a single path.
    pub empirical_regret: i64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ratio_text")]
    pub expected_regret: Option<BigRational>,
}

/// Best fixed action in hindsight against the learner's rewards. Skipped
/// steps are ignored; ties go to the lexicographically smallest action.
pub fn empirical_regret(run: &RunRecord, grid: &OffsetGrid) -> RegretReport {
    let mut totals = vec![0u64; grid.len()];
    let mut learner_reward = 0u64;
    let mut horizon = 0u64;
    for step in &run.steps {
        if let StepOutcome::Played { reward, feedback } = &step.outcome {
            horizon += 1;
            learner_reward += u64::from(*reward);
            for (t, &b) in totals.iter_mut().zip(feedback.bits()) {
                *t += u64::from(b);
            }
        }
    }
    let (best, best_reward) =
        totals.iter().enumerate().fold((0, 0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    RegretReport {
        horizon,
        best_fixed_action: grid.pair_at_flat(best),
        best_fixed_reward: best_reward,
        learner_reward,
        empirical_regret: best_reward as i64 - learner_reward as i64,
        expected_regret: None,
    }
}

/// Plays FTL against `env` for `horizon` steps.
pub fn run_synthetic(env: &BernoulliEnvironment, tau: &mut TieBreaker, horizon: u64) -> RunRecord {
    let grid = env.grid();
    let mut state = LearnerState::new(grid.clone());
    let mut action = ftl_select(&state, tau);
    let mut steps = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let feedback = env.step(t);
        let (i, j) = grid.index_of(&action).expect("learner plays on its grid");
        let reward = feedback.get(i, j);
        state.update(&feedback, action).expect("feedback matches grid");
        let next = ftl_select(&state, tau);
        steps.push(RunStep {
            cycle: t as u32,
            action,
            next_action: next,
            outcome: StepOutcome::Played { reward, feedback },
        });
        action = next;
    }
    RunRecord { relative_orbit: 0, steps }
}

/// Exact `T max p - E[sum of rewards]` for FTL with uniform tie-breaking.
///
/// Feedback is full information, so the count table evolves independently of
/// the learner's choices; the expectation is a recursion over count tables
/// where each step contributes the mean success probability of the leaders.
pub fn expected_regret(env: &BernoulliEnvironment, horizon: u64) -> Result<BigRational, EvalError> {
    let cells = env.grid().len();
    if cells as u64 * horizon > MAX_ENUMERATION as u64 {
        return Err(EvalError::TooLarge { cells, horizon });
    }
    let probs: Vec<BigRational> =
        env.probs().iter().map(|&p| BigRational::from_float(p).expect("probabilities are finite")).collect();
    // Only cells with 0 < p < 1 branch; the others are deterministic.
    let random: Vec<usize> = (0..cells).filter(|&k| !probs[k].is_zero() && !probs[k].is_one()).collect();
    let mut outcomes = Vec::with_capacity(1 << random.len());
    for mask in 0u32..1 << random.len() {
        let mut weight = BigRational::one();
        let mut bits: Vec<u64> = probs.iter().map(|p| u64::from(p.is_one())).collect();
        for (b, &k) in random.iter().enumerate() {
            if mask >> b & 1 == 1 {
                bits[k] = 1;
                weight *= &probs[k];
            } else {
                weight *= BigRational::one() - &probs[k];
            }
        }
        outcomes.push((bits, weight));
    }
    let mut memo = HashMap::new();
    let reward = expected_reward(&probs, &outcomes, vec![0; cells], horizon, &mut memo);
    let best = probs.iter().max().cloned().unwrap_or_else(BigRational::zero);
    Ok(best * BigInt::from(horizon) - reward)
}

fn expected_reward(
    probs: &[BigRational],
    outcomes: &[(Vec<u64>, BigRational)],
    counts: Vec<u64>,
    remaining: u64,
    memo: &mut HashMap<(Vec<u64>, u64), BigRational>,
) -> BigRational {
    if remaining == 0 {
        return BigRational::zero();
    }
    // Leaders depend only on count differences.
    let floor = counts.iter().copied().min().unwrap_or(0);
    let counts: Vec<u64> = counts.iter().map(|c| c - floor).collect();
    if let Some(v) = memo.get(&(counts.clone(), remaining)) {
        return v.clone();
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    let leaders: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] == best).collect();
    let mut value = leaders.iter().map(|&k| probs[k].clone()).sum::<BigRational>() / BigInt::from(leaders.len());
    for (bits, weight) in outcomes {
        let next = counts.iter().zip(bits).map(|(c, b)| c + b).collect();
        value += weight * expected_reward(probs, outcomes, next, remaining - 1, memo);
    }
    memo.insert((counts, remaining), value.clone());
    value
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn within(&self, value: f64, std_errors: f64) -> bool {
        (self.mean - value).abs() <= std_errors * self.std_error
    }
}

/// Independent 64-bit seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Regret `T max p - sum of rewards` averaged over `runs` seeded runs of
/// FTL with uniform ties.
pub fn monte_carlo_regret(env: &BernoulliEnvironment, horizon: u64, runs: u64, seed: u64) -> Estimate {
    let best = env.max_prob() * horizon as f64;
    // Integer reward sums keep the reduction order-independent.
    let (sum, sum_sq) = (0..runs)
        .into_par_iter()
        .map(|r| {
            let run_env = env.with_seed(derive_seed(seed, 2 * r));
            let mut tau = TieBreaker::uniform(derive_seed(seed, 2 * r + 1));
            let record = run_synthetic(&run_env, &mut tau, horizon);
            let reward = record.played().filter(|s| s.reward() == Some(true)).count() as u128;
            (reward, reward * reward)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = runs as f64;
    let mean_reward = sum as f64 / n;
    let var = if runs > 1 { (sum_sq as f64 - n * mean_reward * mean_reward) / (n - 1.0) } else { 0.0 };
    Estimate { mean: best - mean_reward, std_error: (var.max(0.0) / n).sqrt() }
}

/// Synthetic benchmark instance: a grid with one certain action.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub grid: OffsetGrid,
    /// Indexed `[aos][los]`.
    pub probs: Vec<Vec<f64>>,
}

impl BenchInstance {
    /// Grid up to `max_side x max_side` with exactly one `p = 1` action; every
    /// other action has `p = 0` (30%) or `p` uniform in `[0.05, 0.95]`.
    pub fn random(rng: &mut impl Rng, max_side: usize) -> Self {
        let n_aos = rng.random_range(1..=max_side);
        let n_los = rng.random_range(1..=max_side);
        let aos: Vec<i64> = (0..n_aos as i64).map(|k| 10 * k).collect();
        let los: Vec<i64> = (0..n_los as i64).map(|k| 5 * k).collect();
        let grid = OffsetGrid::from_secs(&aos, &los).expect("valid bench grid");
        let certain = rng.random_range(0..n_aos * n_los);
        let probs = (0..n_aos)
            .map(|i| {
                (0..n_los)
                    .map(|j| {
                        if i * n_los + j == certain {
                            1.0
                        } else if rng.random_bool(0.3) {
                            0.0
                        } else {
                            rng.random_range(0.05..=0.95)
                        }
                    })
                    .collect()
            })
            .collect();
        BenchInstance { grid, probs }
    }

    /// `count` instances from one seeded stream.
    pub fn generate(seed: u64, count: usize, max_side: usize) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| BenchInstance::random(&mut rng, max_side)).collect()
    }

    pub fn environment(&self, seed: u64) -> BernoulliEnvironment {
        BernoulliEnvironment::new(self.grid.clone(), &self.probs, seed).expect("bench probabilities are valid")
    }

    /// `1 + |{p in (0, 1)}|`, or `None` without a certain action.
    pub fn mistake_bound(&self) -> Option<usize> {
        mistake_bound(&self.probs)
    }
}

/// Aggregate over seeded runs of FTL with uniform ties on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub runs: u64,
    pub horizon: u64,
    pub mistake_bound: Option<usize>,
    pub max_mistakes: usize,
    /// Runs whose mistakes exceed `mistake_bound`.
    pub violations: u64,
    pub mean_empirical_regret: f64,
}

pub fn bench_instance(inst: &BenchInstance, horizon: u64, runs: u64, seed: u64) -> BenchResult {
    let bound = inst.mistake_bound();
    let (max_mistakes, violations, regret_sum) = (0..runs)
        .into_par_iter()
        .map(|r| {
            let env = inst.environment(derive_seed(seed, 2 * r));
            let record = run_synthetic(&env, &mut TieBreaker::uniform(derive_seed(seed, 2 * r + 1)), horizon);
            let m = record.mistakes();
            let regret = empirical_regret(&record, &inst.grid).empirical_regret;
            (m, u64::from(bound.is_some_and(|b| m > b)), regret)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0.max(b.0), a.1 + b.1, a.2 + b.2));
    BenchResult {
        runs,
        horizon,
        mistake_bound: bound,
        max_mistakes,
        violations,
        mean_empirical_regret: if runs == 0 { 0.0 } else { regret_sum as f64 / runs as f64 },
    }
}

/// Pathwise bound on zero-reward rounds when some action has `p = 1`.
pub fn mistake_bound(probs: &[Vec<f64>]) -> Option<usize> {
    let flat = || probs.iter().flatten().copied();
    flat().any(|p| p == 1.0).then(|| 1 + flat().filter(|&p| p > 0.0 && p < 1.0).count())
}

/// Replay outcome aggregated over all orbits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedPassReport {
    pub total_passes: u64,
    pub recorded_passes: u64,
    pub baseline_failures: u64,
    pub learner_failures: u64,
    /// Failures excluding each orbit's first, forced, step.
    pub learner_failures_after_init: u64,
    pub saved: i64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ratio_text")]
    pub saved_fraction: Option<Ratio<i64>>,
}

impl SavedPassReport {
    pub fn new(
        total_passes: u64,
        recorded_passes: u64,
        baseline_failures: u64,
        learner_failures: u64,
        learner_failures_after_init: u64,
    ) -> Self {
        let saved = baseline_failures as i64 - learner_failures as i64;
        let saved_fraction = (baseline_failures > 0).then(|| Ratio::new(saved, baseline_failures as i64));
        SavedPassReport {
            total_passes,
            recorded_passes,
            baseline_failures,
            learner_failures,
            learner_failures_after_init,
            saved,
            saved_fraction,
        }
    }

    pub fn saved_fraction_f64(&self) -> Option<f64> {
        self.saved_fraction.map(|r| *r.numer() as f64 / *r.denom() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissionRunConfig {
    pub grid: OffsetGrid,
    pub tie_breaker: TieBreakerKind,
    pub dump_duration: Duration,
    pub initial_action: OffsetPair,
    /// Only used by uniform tie-breaking; each orbit gets its own sub-stream.
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl MissionRunConfig {
    /// Default grid, safe-margin ties, 30 s / 10 s start and a 14 minute dump.
    pub fn mission_default() -> Self {
        MissionRunConfig {
            grid: OffsetGrid::default_mission(),
            tie_breaker: TieBreakerKind::SafeMargin,
            dump_duration: Duration::from_secs(840),
            initial_action: OffsetPair::secs(30, 10),
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissionRun {
    /// One record per relative orbit, ascending.
    pub runs: Vec<RunRecord>,
    pub schedule: Schedule,
    /// Commands whose window would be empty; they are left out of `schedule`.
    pub schedule_errors: Vec<ScheduleError>,
    pub report: SavedPassReport,
}

/// Replays the dataset with one independent learner per relative orbit.
///
/// Every learner's first command is `initial_action`. Unrecorded passes are
/// commanded with the current selection but teach nothing and do not advance
/// the step counter. A recorded pass earns the feedback bit of the commanded
/// offsets, 0 if its dump window is empty.
pub fn run_mission(dataset: &MissionDataset, config: &MissionRunConfig) -> Result<MissionRun, EvalError> {
    if !config.grid.contains(&config.initial_action) {
        return Err(EvalError::InitialOffGrid(config.initial_action));
    }
    let orbits: Vec<(u32, Vec<PassRecord>)> = dataset.by_orbit().into_iter().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|_| EvalError::ThreadPool(config.jobs))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        orbits.into_par_iter().map(|(ron, passes)| run_orbit(ron, passes, config)).collect::<Result<_, _>>()
    })?;

    let mut selections = BTreeMap::new();
    let (mut learner_failures, mut after_init) = (0, 0);
    for run in &runs {
        for step in &run.steps {
            selections.insert(PassKey { cycle: step.cycle, relative_orbit: run.relative_orbit }, step.action);
        }
        learner_failures += run.mistakes() as u64;
        after_init += run.mistakes_after_first() as u64;
    }
    let built = build_schedule(dataset.mission_id(), dataset.records(), &selections);
    let report = SavedPassReport::new(
        dataset.len() as u64,
        dataset.recorded() as u64,
        dataset.baseline_failures() as u64,
        learner_failures,
        after_init,
    );
    Ok(MissionRun { runs, schedule: built.schedule, schedule_errors: built.errors, report })
}

fn run_orbit(ron: u32, passes: Vec<PassRecord>, config: &MissionRunConfig) -> Result<RunRecord, EvalError> {
    let env = ReplayEnvironment::new(config.grid.clone(), passes, config.dump_duration)
        .map_err(|_| EvalError::Unsorted(ron))?;
    let mut state = LearnerState::new(config.grid.clone());
    let mut tau =
        TieBreaker::from_kind(config.tie_breaker, derive_seed(config.seed, u64::from(ron)), config.dump_duration);
    let mut pending = config.initial_action;
    let mut steps = Vec::with_capacity(env.passes().len());
    for (k, record) in env.passes().iter().enumerate() {
        let action = pending;
        let outcome = match (env.feedback(k), record.ground) {
            (Some(feedback), Some(ground)) => {
                let (i, j) = config.grid.index_of(&action).expect("selections stay on the grid");
                let reward = dump_window(&record.events, action).is_ok() && feedback.get(i, j);
                state.update(&feedback, action).expect("feedback matches grid");
                tau.observe_pass(&record.events, &ground);
                pending = ftl_select(&state, &mut tau);
                StepOutcome::Played { reward, feedback }
            }
            _ => StepOutcome::Skipped,
        };
        steps.push(RunStep { cycle: record.events.cycle, action, next_action: pending, outcome });
    }
    Ok(RunRecord { relative_orbit: ron, steps })
}

/// `Option<Ratio<T>>` as `"n/d"` text.
mod ratio_text {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<T, S>(value: &Option<Ratio<T>>, s: S) -> Result<S::Ok, S::Error>
    where
        T: Clone + Integer + Display,
        S: Serializer,
    {
        match value {
            Some(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<Ratio<T>>, D::Error>
    where
        T: Clone + Integer + FromStr,
        D: Deserializer<'de>,
    {
        let text = String::deserialize(d)?;
        let (n, den) = text.split_once('/').ok_or_else(|| D::Error::custom("expected n/d"))?;
        let parse = |v: &str| v.trim().parse::<T>().map_err(|_| D::Error::custom(format!("bad integer {v:?}")));
        let den = parse(den)?;
        if den.is_zero() {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Some(Ratio::new(parse(n)?, den)))
    }
}

//! Two-stage trial mechanisms and mechanism-level incentive verification.
//!
//! A mechanism runs a warm-up stage (deterministic round-robin over
//! (arm, public type) pairs, or caller-injected data standing in for paid
//! volunteers), freezes a state estimate at the first main-stage round, and
//! then plays a stationary, non-data-adaptive sampling rule for the rest of
//! the horizon:
//!
//! - homogeneous variant: epsilon-greedy around the best arm of the
//!   empirical warm-up state, with `eps = (n/2) / bench`;
//! - heterogeneous variant: an even mix of a certified
//!   benchmark-optimizing policy and a margin-certified exploit policy,
//!   both read at the maximum-likelihood state and the round's observed
//!   type.
//!
//! Agents are assumed to report truthfully; incentives are verified as
//! margins under the agents' beliefs, not by simulating deviations.

use std::ops::Range;

use crate::adversaries::{Adversary, AdversaryRow};
use crate::error::Error;
use crate::harness::{parallel_map_reduce, RunningStats};
use crate::incentives::{check_incentives, degeneracy_gap, Policy};
use crate::learning::{empirical_state, mle_state, WarmupData};
use crate::model::{outside_option, AgentType, Instance, ScoringFunction, TypeDistribution};
use crate::rng::CounterRng;

const TYPE_STREAM: u64 = 0;
const OUTCOME_STREAM: u64 = 1;
const MECHANISM_STREAM: u64 = 2;
const WARMUP_DATA_STREAM: u64 = 3;

/// How the warm-up samples are obtained.
#[derive(Clone, Debug)]
pub enum WarmupSchedule {
    /// The first `t0` rounds assign arms by round-robin over
    /// (arm, public type) pairs, arms cycling fastest.
    RoundRobin,
    /// Exogenous data (paid volunteers); requires `t0 = 0` so the horizon
    /// contains only the main stage.
    Injected(WarmupData),
}

#[derive(Clone, Debug)]
pub enum MechanismVariant {
    /// Stationary epsilon-greedy around the empirical warm-up state.
    Homogeneous { eps: f64 },
    /// Even mix of a benchmark policy and an exploit policy at the MLE
    /// state.
    Heterogeneous { bench_policy: Policy, exploit_policy: Policy },
}

/// Fully specified two-stage mechanism.
#[derive(Clone, Debug)]
pub struct MechanismConfig {
    pub variant: MechanismVariant,
    pub t0: usize,
    pub horizon: usize,
    pub warmup_schedule: WarmupSchedule,
}

impl MechanismConfig {
    fn check_stage_lengths(t0: usize, horizon: usize) -> Result<(), Error> {
        if t0 > horizon / 2 {
            return Err(Error::pre(format!(
                "warm-up length {t0} exceeds half the horizon {horizon}"
            )));
        }
        Ok(())
    }

    /// Replaces the round-robin warm-up with exogenous data; the horizon
    /// then covers the main stage only.
    pub fn with_injected_warmup(mut self, data: WarmupData) -> Result<Self, Error> {
        if self.t0 != 0 {
            return Err(Error::pre("injected warm-up data requires t0 = 0"));
        }
        self.warmup_schedule = WarmupSchedule::Injected(data);
        Ok(self)
    }
}

/// Homogeneous two-stage mechanism: requires a single agent type and a
/// finite benchmark; explores at rate `(n/2) / bench`.
pub fn homogeneous_mechanism(
    instance: &Instance,
    t0: usize,
    horizon: usize,
) -> Result<MechanismConfig, Error> {
    MechanismConfig::check_stage_lengths(t0, horizon)?;
    let bench = crate::benchmarks::bench_homogeneous(instance)?;
    if !bench.result.is_finite() {
        return Err(Error::InfiniteBenchmark);
    }
    let eps = (instance.n_arms() as f64 / 2.0) / bench.result.value;
    Ok(MechanismConfig {
        variant: MechanismVariant::Homogeneous { eps },
        t0,
        horizon,
        warmup_schedule: WarmupSchedule::RoundRobin,
    })
}

/// Heterogeneous two-stage mechanism. `bench_policy` must be BIR and BIC at
/// margin 0; `exploit_policy` must be BIR and BIC at margin `eta` in
/// `(0, eta*]`.
pub fn heterogeneous_mechanism(
    instance: &Instance,
    bench_policy: Policy,
    exploit_policy: Policy,
    eta: f64,
    t0: usize,
    horizon: usize,
) -> Result<MechanismConfig, Error> {
    MechanismConfig::check_stage_lengths(t0, horizon)?;
    let eta_star = degeneracy_gap(instance);
    if eta <= 0.0 || eta > eta_star + crate::model::CHECK_TOL {
        return Err(Error::pre(format!("eta must lie in (0, {eta_star}]; got {eta}")));
    }
    if !check_incentives(instance, &bench_policy, 0.0).satisfied {
        return Err(Error::pre("bench policy is not BIR and BIC at margin 0"));
    }
    if !check_incentives(instance, &exploit_policy, eta).satisfied {
        return Err(Error::pre(format!("exploit policy is not BIR and BIC at margin {eta}")));
    }
    Ok(MechanismConfig {
        variant: MechanismVariant::Heterogeneous { bench_policy, exploit_policy },
        t0,
        horizon,
        warmup_schedule: WarmupSchedule::RoundRobin,
    })
}

/// Heterogeneous mechanism with the best-arm policy as the exploit branch,
/// certified at the full degeneracy gap.
pub fn heterogeneous_mechanism_default(
    instance: &Instance,
    bench_policy: Policy,
    t0: usize,
    horizon: usize,
) -> Result<MechanismConfig, Error> {
    let eta_star = degeneracy_gap(instance);
    heterogeneous_mechanism(
        instance,
        bench_policy,
        crate::incentives::best_arm_policy(instance),
        eta_star,
        t0,
        horizon,
    )
}

/// State estimate frozen at the first main-stage round.
#[derive(Clone, Debug)]
pub enum EstimatedState {
    /// Empirical per-(arm, public type) outcome frequencies.
    Empirical(Vec<Vec<Vec<f64>>>),
    /// Index of the maximum-likelihood state in the prior support.
    Support(usize),
}

/// The stationary main-stage sampling rule: one arm distribution per
/// observed type.
#[derive(Clone, Debug)]
pub struct FrozenPolicy {
    pub estimated_state: EstimatedState,
    /// Indexed `[type_index][arm]`.
    pub dists: Vec<Vec<f64>>,
}

impl FrozenPolicy {
    pub fn dist(&self, type_idx: usize) -> &[f64] {
        &self.dists[type_idx]
    }
}

/// Freezes the main-stage policy from warm-up data.
pub fn freeze_policy(
    instance: &Instance,
    config: &MechanismConfig,
    data: &WarmupData,
) -> Result<FrozenPolicy, Error> {
    match &config.variant {
        MechanismVariant::Homogeneous { eps } => {
            let table = empirical_state(data)?;
            let n = instance.n_arms();
            let mut dists = Vec::with_capacity(instance.n_types());
            for ty in instance.types() {
                // best arm under the empirical table, lowest index on ties
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for arm in 0..n {
                    let v: f64 = (0..instance.outcome_space().len())
                        .map(|o| table[arm][ty.public][o] * instance.utilities().get(o, ty.private))
                        .sum();
                    if v > best_v {
                        best_v = v;
                        best = arm;
                    }
                }
                let mut dist = vec![eps / n as f64; n];
                dist[best] += 1.0 - eps;
                dists.push(dist);
            }
            Ok(FrozenPolicy { estimated_state: EstimatedState::Empirical(table), dists })
        }
        MechanismVariant::Heterogeneous { bench_policy, exploit_policy } => {
            let state = mle_state(data, instance.prior());
            let n = instance.n_arms();
            let dists = (0..instance.n_types())
                .map(|t| {
                    (0..n)
                        .map(|a| {
                            0.5 * bench_policy.prob(state, t, a)
                                + 0.5 * exploit_policy.prob(state, t, a)
                        })
                        .collect()
                })
                .collect();
            Ok(FrozenPolicy { estimated_state: EstimatedState::Support(state), dists })
        }
    }
}

/// Round-robin warm-up schedule: the arm assigned in round `t`, together
/// with the targeted public type (arms cycle fastest).
pub fn warmup_assignment(instance: &Instance, round: usize) -> (usize, usize) {
    let n = instance.n_arms();
    let pair = round % (n * instance.n_public());
    (pair % n, pair / n)
}

/// Complete record of one trial run.
#[derive(Clone, Debug)]
pub struct TrialHistory {
    pub t0: usize,
    pub horizon: usize,
    pub types: Vec<AgentType>,
    /// Per-round sampling distributions, recorded before each arm draw;
    /// flattened `[round][arm]`.
    pub dists: Vec<f64>,
    pub arms: Vec<usize>,
    pub outcomes: Vec<usize>,
    pub estimated_state: EstimatedState,
    /// Per scoring function: per-arm IPS estimates over the main stage.
    pub estimates: Vec<(String, Vec<f64>)>,
    pub(crate) n_arms: usize,
}

impl TrialHistory {
    pub fn dist(&self, round: usize) -> &[f64] {
        &self.dists[round * self.n_arms..(round + 1) * self.n_arms]
    }

    pub fn main_window(&self) -> Range<usize> {
        self.t0..self.horizon
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }
}

/// Executes the warm-up stage against an adversary, returning the counts
/// and the realized rows. When the scheduled public type differs from the
/// arriving agent's, the scheduled arm is still assigned and the sample is
/// counted for the realized pair.
pub fn run_warmup(
    instance: &Instance,
    t0: usize,
    adversary: &Adversary,
    rng: &CounterRng,
) -> Result<(WarmupData, Vec<AdversaryRow>), Error> {
    let type_stream = rng.derive(TYPE_STREAM);
    let outcome_stream = rng.derive(OUTCOME_STREAM);
    let mut data = WarmupData::for_instance(instance);
    let mut rows = Vec::with_capacity(t0);
    for t in 0..t0 {
        let row = adversary.row(t, &type_stream, &outcome_stream)?;
        let (arm, _target_public) = warmup_assignment(instance, t);
        data.record(arm, row.agent_type.public, row.outcomes[arm]);
        rows.push(row);
    }
    Ok((data, rows))
}

/// Runs warm-up plus main stage and computes IPS estimates for each scoring
/// function over the main-stage window. Also returns the adversary's full
/// outcome rows (the mechanism itself never sees unchosen arms' outcomes).
pub fn run_trial_full(
    instance: &Instance,
    config: &MechanismConfig,
    adversary: &Adversary,
    scoring_functions: &[ScoringFunction],
    rng: &CounterRng,
) -> Result<(TrialHistory, Vec<AdversaryRow>), Error> {
    if config.horizon <= config.t0 {
        return Err(Error::EmptyEstimationWindow);
    }
    let n = instance.n_arms();
    let horizon = config.horizon;

    let mut types = Vec::with_capacity(horizon);
    let mut dists = Vec::with_capacity(horizon * n);
    let mut arms = Vec::with_capacity(horizon);
    let mut outcomes = Vec::with_capacity(horizon);
    let mut table = Vec::with_capacity(horizon);

    // Warm-up stage.
    let warmup_data = match &config.warmup_schedule {
        WarmupSchedule::RoundRobin => {
            let (data, rows) = run_warmup(instance, config.t0, adversary, rng)?;
            for (t, row) in rows.into_iter().enumerate() {
                let (arm, _) = warmup_assignment(instance, t);
                types.push(row.agent_type);
                let mut dist = vec![0.0; n];
                dist[arm] = 1.0;
                dists.extend_from_slice(&dist);
                arms.push(arm);
                outcomes.push(row.outcomes[arm]);
                table.push(row);
            }
            data
        }
        WarmupSchedule::Injected(data) => data.clone(),
    };

    let frozen = freeze_policy(instance, config, &warmup_data)?;

    // Main stage: stationary, non-data-adaptive.
    let type_stream = rng.derive(TYPE_STREAM);
    let outcome_stream = rng.derive(OUTCOME_STREAM);
    let mech_stream = rng.derive(MECHANISM_STREAM);
    for t in config.t0..horizon {
        let row = adversary.row(t, &type_stream, &outcome_stream)?;
        let dist = frozen.dist(instance.type_index(row.agent_type));
        let arm = mech_stream.derive(t as u64).sample_index(dist);
        types.push(row.agent_type);
        dists.extend_from_slice(dist);
        arms.push(arm);
        outcomes.push(row.outcomes[arm]);
        table.push(row);
    }

    let mut history = TrialHistory {
        t0: config.t0,
        horizon,
        types,
        dists,
        arms,
        outcomes,
        estimated_state: frozen.estimated_state.clone(),
        estimates: Vec::new(),
        n_arms: n,
    };
    for scoring in scoring_functions {
        let values = crate::estimation::ips_estimate(&history, scoring, history.main_window())?;
        history.estimates.push((scoring.name().to_string(), values));
    }
    Ok((history, table))
}

/// [`run_trial_full`] without the adversary table.
pub fn run_trial(
    instance: &Instance,
    config: &MechanismConfig,
    adversary: &Adversary,
    scoring_functions: &[ScoringFunction],
    rng: &CounterRng,
) -> Result<TrialHistory, Error> {
    run_trial_full(instance, config, adversary, scoring_functions, rng).map(|(h, _)| h)
}

/// Monte Carlo margin with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug)]
pub struct MarginCi {
    pub mean: f64,
    pub half_width: f64,
}

impl MarginCi {
    pub fn low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.mean + self.half_width
    }

    fn from_stats(stats: &RunningStats) -> Self {
        Self { mean: stats.mean(), half_width: stats.ci95_half_width() }
    }
}

/// Mechanism-level incentive report: margins of the frozen main-stage
/// policy, averaged over the agents' beliefs about the warm-up.
#[derive(Clone, Debug)]
pub struct IcVerification {
    pub bir: Vec<(AgentType, MarginCi)>,
    pub bic: Vec<(AgentType, usize, MarginCi)>,
    /// Additive slack allowed by the estimation failure probability,
    /// `eta* / 8`.
    pub init_prob_allowance: f64,
    pub reps: u64,
}

impl IcVerification {
    /// Whether every margin interval stays above `-(allowance + half width)`.
    pub fn holds(&self) -> bool {
        self.bir
            .iter()
            .map(|(_, ci)| ci)
            .chain(self.bic.iter().map(|(_, _, ci)| ci))
            .all(|ci| ci.low() >= -(self.init_prob_allowance + ci.half_width))
    }
}

/// Verifies mechanism-level BIR and BIC by Monte Carlo under the agents'
/// beliefs: draw a state from the prior, simulate the warm-up stage under
/// the stochastic adversary from that state (types uniform over the
/// declared set), freeze the main-stage policy, and evaluate its exact
/// value per type and per misreport against the drawn state.
pub fn verify_mechanism_ic(
    instance: &Instance,
    config: &MechanismConfig,
    reps: u64,
    seed: u64,
) -> Result<IcVerification, Error> {
    let prior = instance.prior();
    let n_types = instance.n_types();
    let n_private = instance.n_private();
    let outs: Vec<f64> = instance.types().map(|ty| outside_option(instance, ty)).collect();

    // Per-pair sample counts for belief-consistent warm-up resampling when
    // the config carries injected data.
    let injected_totals: Option<Vec<Vec<u64>>> = match &config.warmup_schedule {
        WarmupSchedule::Injected(data) => Some(
            (0..instance.n_arms())
                .map(|a| (0..instance.n_public()).map(|x| data.total(a, x)).collect())
                .collect(),
        ),
        WarmupSchedule::RoundRobin => None,
    };

    let root = CounterRng::new(seed);
    let make = || {
        (
            vec![RunningStats::default(); n_types],
            vec![RunningStats::default(); n_types * n_private],
        )
    };
    let (bir_stats, bic_stats) = parallel_map_reduce(
        reps,
        make,
        |(bir, bic), rep| {
            let rng = root.derive(rep);
            let mut state_rng = rng.derive(WARMUP_DATA_STREAM);
            let state_idx = state_rng.sample_index(prior.weights());
            let state = prior.state(state_idx);

            let data = match &injected_totals {
                Some(totals) => {
                    let mut data = WarmupData::for_instance(instance);
                    for arm in 0..instance.n_arms() {
                        for x in 0..instance.n_public() {
                            let dist = state.dist(arm, x);
                            for _ in 0..totals[arm][x] {
                                data.record(arm, x, state_rng.sample_index(dist));
                            }
                        }
                    }
                    data
                }
                None => {
                    let adversary = Adversary::stochastic(
                        state.clone(),
                        TypeDistribution::uniform(n_types),
                    );
                    let (data, _) = run_warmup(instance, config.t0, &adversary, &rng)
                        .expect("stochastic warm-up cannot exhaust");
                    data
                }
            };
            let frozen = freeze_policy(instance, config, &data)
                .expect("warm-up covers every (arm, public type) pair");

            for (t_idx, ty) in instance.types().enumerate() {
                let value = |observed: usize| -> f64 {
                    frozen
                        .dist(observed)
                        .iter()
                        .enumerate()
                        .map(|(arm, p)| p * instance.expected_utility(state, arm, ty))
                        .sum()
                };
                let truthful = value(t_idx);
                bir[t_idx].push(truthful - outs[t_idx]);
                for r in 0..n_private {
                    if r != ty.private {
                        let observed = instance.type_index(AgentType::new(ty.public, r));
                        bic[t_idx * n_private + r].push(truthful - value(observed));
                    }
                }
            }
        },
        |(bir, bic), (pb, pc)| {
            for (a, b) in bir.iter_mut().zip(pb) {
                a.merge(b);
            }
            for (a, b) in bic.iter_mut().zip(pc) {
                a.merge(b);
            }
        },
    );

    let bir = instance
        .types()
        .enumerate()
        .map(|(t_idx, ty)| (ty, MarginCi::from_stats(&bir_stats[t_idx])))
        .collect();
    let mut bic = Vec::new();
    for (t_idx, ty) in instance.types().enumerate() {
        for r in 0..n_private {
            if r != ty.private {
                bic.push((ty, r, MarginCi::from_stats(&bic_stats[t_idx * n_private + r])));
            }
        }
    }
    Ok(IcVerification {
        bir,
        bic,
        init_prob_allowance: degeneracy_gap(instance).max(0.0) / 8.0,
        reps,
    })
}

//! State estimation from warm-up data and sample-complexity formulas.
//!
//! The warm-up stage produces per-(arm, public type, outcome) counts. Two
//! estimators consume them: the empirical per-pair frequency table (used by
//! the epsilon-greedy exploitation branch; the result need not lie in the
//! prior support) and the maximum-likelihood state restricted to the prior
//! support. The KL/log-likelihood-ratio quantities below control how many
//! warm-up samples make the MLE reliable.

use crate::error::Error;
use crate::harness::{parallel_sum, wilson_interval};
use crate::model::{Instance, Prior, State};
use crate::rng::CounterRng;

/// Outcome counts per (arm, public type, outcome).
#[derive(Clone, Debug, Default)]
pub struct WarmupData {
    n_arms: usize,
    n_public: usize,
    n_outcomes: usize,
    counts: Vec<u64>,
}

impl WarmupData {
    pub fn new(n_arms: usize, n_public: usize, n_outcomes: usize) -> Self {
        Self { n_arms, n_public, n_outcomes, counts: vec![0; n_arms * n_public * n_outcomes] }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        Self::new(instance.n_arms(), instance.n_public(), instance.outcome_space().len())
    }

    #[inline]
    pub fn record(&mut self, arm: usize, public: usize, outcome: usize) {
        self.counts[(arm * self.n_public + public) * self.n_outcomes + outcome] += 1;
    }

    #[inline]
    pub fn count(&self, arm: usize, public: usize, outcome: usize) -> u64 {
        self.counts[(arm * self.n_public + public) * self.n_outcomes + outcome]
    }

    /// Total samples for one (arm, public type) pair.
    pub fn total(&self, arm: usize, public: usize) -> u64 {
        let base = (arm * self.n_public + public) * self.n_outcomes;
        self.counts[base..base + self.n_outcomes].iter().sum()
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_public(&self) -> usize {
        self.n_public
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    /// Draws `samples_per_pair` outcomes from `state` for every
    /// (arm, public type) pair.
    pub fn sampled_from(state: &State, samples_per_pair: usize, rng: &mut CounterRng) -> Self {
        let mut data = Self::new(state.n_arms(), state.n_public(), state.n_outcomes());
        for arm in 0..state.n_arms() {
            for x in 0..state.n_public() {
                let dist = state.dist(arm, x);
                for _ in 0..samples_per_pair {
                    data.record(arm, x, rng.sample_index(dist));
                }
            }
        }
        data
    }
}

/// Per-pair empirical outcome frequencies. Errors if some (arm, public
/// type) pair has no samples; the mechanism contract guarantees warm-up
/// coverage before this is called.
pub fn empirical_state(data: &WarmupData) -> Result<Vec<Vec<Vec<f64>>>, Error> {
    let mut table =
        vec![vec![vec![0.0; data.n_outcomes()]; data.n_public()]; data.n_arms()];
    for arm in 0..data.n_arms() {
        for x in 0..data.n_public() {
            let total = data.total(arm, x);
            if total == 0 {
                return Err(Error::MissingWarmupSamples { arm, public: x });
            }
            for outcome in 0..data.n_outcomes() {
                table[arm][x][outcome] = data.count(arm, x, outcome) as f64 / total as f64;
            }
        }
    }
    Ok(table)
}

/// Log-likelihood of the counts under one state.
pub fn log_likelihood(data: &WarmupData, state: &State) -> f64 {
    let mut ll = 0.0;
    for arm in 0..data.n_arms() {
        for x in 0..data.n_public() {
            for outcome in 0..data.n_outcomes() {
                let c = data.count(arm, x, outcome);
                if c > 0 {
                    ll += c as f64 * state.prob(arm, x, outcome).ln();
                }
            }
        }
    }
    ll
}

/// Maximum-likelihood state within the prior support; returns the support
/// index. Ties (including zero data) break to the lowest index. Full
/// support keeps every log-likelihood finite.
pub fn mle_state(data: &WarmupData, prior: &Prior) -> usize {
    let mut best = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for (idx, state) in prior.states().iter().enumerate() {
        let ll = log_likelihood(data, state);
        if ll > best_ll {
            best_ll = ll;
            best = idx;
        }
    }
    best
}

/// KL divergences and log-likelihood-ratio ranges for every ordered pair of
/// distinct support states.
#[derive(Clone, Debug)]
pub struct KlReport {
    /// `kl[(i, j)][arm][public]` = KL(state_i(arm, x) || state_j(arm, x)).
    pub kl: Vec<((usize, usize), Vec<Vec<f64>>)>,
    /// Largest |LLR - KL| over (arm, type, outcome), per ordered pair.
    pub ll_max: Vec<((usize, usize), f64)>,
    /// Smallest strictly positive KL entry, per ordered pair.
    pub kl_min: Vec<((usize, usize), f64)>,
    /// min over ordered pairs of (kl_min / ll_max)^2.
    pub lr_min: f64,
}

impl KlReport {
    pub fn kl_for(&self, pair: (usize, usize)) -> Option<&Vec<Vec<f64>>> {
        self.kl.iter().find(|(p, _)| *p == pair).map(|(_, v)| v)
    }

    pub fn ll_max_for(&self, pair: (usize, usize)) -> Option<f64> {
        self.ll_max.iter().find(|(p, _)| *p == pair).map(|(_, v)| *v)
    }

    pub fn kl_min_for(&self, pair: (usize, usize)) -> Option<f64> {
        self.kl_min.iter().find(|(p, _)| *p == pair).map(|(_, v)| *v)
    }
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| if *a > 0.0 { a * (a / b).ln() } else { 0.0 })
        .sum()
}

/// Computes the KL table, LLR ranges, and the learning-difficulty constant
/// for the instance's prior. Requires at least two support states.
pub fn kl_quantities(instance: &Instance) -> Result<KlReport, Error> {
    let prior = instance.prior();
    if prior.len() < 2 {
        return Err(Error::pre("lr_min is undefined for a single-state prior"));
    }
    let n_arms = instance.n_arms();
    let n_public = instance.n_public();
    let n_outcomes = instance.outcome_space().len();

    let mut kl = Vec::new();
    let mut ll_max = Vec::new();
    let mut kl_min = Vec::new();
    let mut lr_min = f64::INFINITY;

    for i in 0..prior.len() {
        for j in 0..prior.len() {
            if i == j {
                continue;
            }
            let si = prior.state(i);
            let sj = prior.state(j);
            let mut kl_table = vec![vec![0.0; n_public]; n_arms];
            let mut pair_ll_max = 0.0f64;
            let mut pair_kl_min = f64::INFINITY;
            for arm in 0..n_arms {
                for x in 0..n_public {
                    let p = si.dist(arm, x);
                    let q = sj.dist(arm, x);
                    let d = kl_divergence(p, q);
                    kl_table[arm][x] = d;
                    if d > 0.0 {
                        pair_kl_min = pair_kl_min.min(d);
                    }
                    for outcome in 0..n_outcomes {
                        let llr = (p[outcome] / q[outcome]).ln();
                        pair_ll_max = pair_ll_max.max((llr - d).abs());
                    }
                }
            }
            if !pair_kl_min.is_finite() {
                return Err(Error::pre(format!(
                    "support states {i} and {j} are identical on every (arm, public type) pair"
                )));
            }
            let ratio = pair_kl_min / pair_ll_max;
            lr_min = lr_min.min(ratio * ratio);
            kl.push(((i, j), kl_table));
            ll_max.push(((i, j), pair_ll_max));
            kl_min.push(((i, j), pair_kl_min));
        }
    }

    Ok(KlReport { kl, ll_max, kl_min, lr_min })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSizeVariant {
    Homogeneous,
    Heterogeneous,
}

/// Number of warm-up samples per (arm, public type) pair required by the
/// mechanism guarantees.
///
/// Homogeneous: `ceil(32 a^-2 log(8n/a))` with `a = n gap / bench`; `eta`
/// is ignored. Heterogeneous: `ceil(1 + log(4 |supp| / (eta lr_min)) /
/// (2 lr_min))` for a margin `eta` in `(0, eta*]`.
pub fn warmup_sample_size(
    instance: &Instance,
    variant: SampleSizeVariant,
    eta: f64,
) -> Result<u64, Error> {
    match variant {
        SampleSizeVariant::Homogeneous => {
            let bench = crate::benchmarks::bench_homogeneous(instance)?;
            if !bench.result.is_finite() {
                return Err(Error::InfiniteBenchmark);
            }
            let ty = crate::model::AgentType::new(0, 0);
            let gap = crate::incentives::prior_gap(instance, ty);
            let n = instance.n_arms() as f64;
            let alpha = n * gap / bench.result.value;
            if alpha <= 0.0 {
                return Err(Error::pre("prior gap must be positive"));
            }
            Ok((32.0 / (alpha * alpha) * (8.0 * n / alpha).ln()).ceil() as u64)
        }
        SampleSizeVariant::Heterogeneous => {
            let eta_star = crate::incentives::degeneracy_gap(instance);
            if eta <= 0.0 || eta > eta_star + crate::model::CHECK_TOL {
                return Err(Error::pre(format!("eta must lie in (0, {eta_star}]; got {eta}")));
            }
            let report = kl_quantities(instance)?;
            let lr = report.lr_min;
            let support = instance.prior().len() as f64;
            Ok((1.0 + (4.0 * support / (eta * lr)).ln() / (2.0 * lr)).ceil() as u64)
        }
    }
}

/// Monte Carlo estimate of the MLE error probability under the agents'
/// beliefs, with a Wilson 95% interval.
#[derive(Clone, Copy, Debug)]
pub struct ErrorProbability {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: u64,
}

/// Draws a state from the prior, samples `samples_per_pair` outcomes for
/// every (arm, public type), runs the MLE, and records whether it missed.
pub fn mle_error_probability(
    instance: &Instance,
    samples_per_pair: usize,
    reps: u64,
    seed: u64,
) -> ErrorProbability {
    let root = CounterRng::new(seed);
    let prior = instance.prior();
    let errors = parallel_sum(reps, |rep| {
        let mut rng = root.derive(rep);
        let true_state = rng.sample_index(prior.weights());
        let data = WarmupData::sampled_from(prior.state(true_state), samples_per_pair, &mut rng);
        if mle_state(&data, prior) != true_state {
            1.0
        } else {
            0.0
        }
    });
    let (estimate, ci_low, ci_high) = wilson_interval(errors as u64, reps);
    ErrorProbability { estimate, ci_low, ci_high, reps }
}

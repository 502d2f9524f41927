//! Inverse-propensity scoring, its analytic error bound, and Monte Carlo
//! mean-squared-error measurement.
//!
//! IPS values are deliberately not clamped to `[0,1]`: clamping would break
//! exact unbiasedness. A metadata flag records when any per-round term
//! exceeds one. The worst case over scoring functions is evaluated over the
//! family of all outcome indicators plus any caller-supplied functions; the
//! analytic bound is scoring-independent, and the family maximum is a lower
//! bound on the true supremum.

use std::ops::Range;

use crate::adversaries::{Adversary, AdversaryRow};
use crate::error::Error;
use crate::harness::{parallel_map_reduce, RunningStats};
use crate::mechanisms::{run_trial_full, MechanismConfig, TrialHistory};
use crate::model::{Instance, OutcomeSpace, ScoringFunction};
use crate::rng::CounterRng;

/// Per-arm IPS estimates over a window of rounds:
/// `(1/|W|) sum_t 1[a_t = a] f(w_t) / p_t(a)`.
pub fn ips_estimate(
    history: &TrialHistory,
    scoring: &ScoringFunction,
    window: Range<usize>,
) -> Result<Vec<f64>, Error> {
    Ok(ips_with_overflow(history, scoring, window)?.0)
}

fn ips_with_overflow(
    history: &TrialHistory,
    scoring: &ScoringFunction,
    window: Range<usize>,
) -> Result<(Vec<f64>, Vec<bool>), Error> {
    if window.is_empty() {
        return Err(Error::EmptyEstimationWindow);
    }
    let n = history.n_arms();
    let mut sums = vec![0.0; n];
    let mut overflow = vec![false; n];
    for t in window.clone() {
        let arm = history.arms[t];
        let p = history.dist(t)[arm];
        if p <= 0.0 {
            return Err(Error::ZeroPropensity { arm, round: t });
        }
        let term = scoring.score(history.outcomes[t]) / p;
        if term > 1.0 {
            overflow[arm] = true;
        }
        sums[arm] += term;
    }
    let len = window.len() as f64;
    Ok((sums.into_iter().map(|s| s / len).collect(), overflow))
}

/// Scoring-independent error bound for IPS under a fixed sampling schedule:
/// `(1/|W|^2) max_a sum_t 1/p_t(a)`, over the rows provided.
pub fn ips_error_bound(sampling_probs: &[&[f64]]) -> Result<f64, Error> {
    if sampling_probs.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = sampling_probs[0].len();
    let len = sampling_probs.len() as f64;
    let mut worst = 0.0f64;
    for arm in 0..n {
        let mut sum = 0.0;
        for row in sampling_probs {
            if row[arm] <= 0.0 {
                return Err(Error::ZeroPropensity { arm, round: 0 });
            }
            sum += 1.0 / row[arm];
        }
        worst = worst.max(sum);
    }
    Ok(worst / (len * len))
}

/// The tighter per-arm variance form for a fixed outcome table:
/// `(1/|W|^2) sum_t (1/p_t(a) - 1) f(w_{a,t})^2`.
pub fn ips_variance_exact(
    sampling_probs: &[&[f64]],
    table: &[AdversaryRow],
    scoring: &ScoringFunction,
    arm: usize,
    window: Range<usize>,
) -> f64 {
    let len = window.len() as f64;
    let mut sum = 0.0;
    for (i, t) in window.enumerate() {
        let p = sampling_probs[i][arm];
        let f = scoring.score(table[t].outcomes[arm]);
        sum += (1.0 / p - 1.0) * f * f;
    }
    sum / (len * len)
}

/// One (arm, scoring function) cell of an estimate report.
#[derive(Clone, Debug)]
pub struct EstimateEntry {
    pub arm: usize,
    pub scoring: String,
    pub ips_value: f64,
    /// The adversary table's realized average score, when the table is known.
    pub true_average: Option<f64>,
    pub squared_error: Option<f64>,
    /// Whether some per-round term exceeded 1 for this arm.
    pub term_overflow: bool,
}

#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub entries: Vec<EstimateEntry>,
}

/// IPS estimates per (arm, scoring function), with squared errors against
/// the adversary table when it is available.
pub fn estimate_report(
    history: &TrialHistory,
    scorings: &[ScoringFunction],
    table: Option<&[AdversaryRow]>,
    window: Range<usize>,
) -> Result<EstimateReport, Error> {
    let mut entries = Vec::new();
    for scoring in scorings {
        let (values, overflow) = ips_with_overflow(history, scoring, window.clone())?;
        for (arm, ips_value) in values.into_iter().enumerate() {
            let true_average = table.map(|rows| {
                window
                    .clone()
                    .map(|t| scoring.score(rows[t].outcomes[arm]))
                    .sum::<f64>()
                    / window.len() as f64
            });
            entries.push(EstimateEntry {
                arm,
                scoring: scoring.name().to_string(),
                ips_value,
                true_average,
                squared_error: true_average.map(|adv| (ips_value - adv) * (ips_value - adv)),
                term_overflow: overflow[arm],
            });
        }
    }
    Ok(EstimateReport { entries })
}

/// All outcome indicators; the default scoring family for worst-case
/// estimation error.
pub fn indicator_family(outcome_space: &OutcomeSpace) -> Vec<ScoringFunction> {
    (0..outcome_space.len())
        .map(|o| ScoringFunction::indicator(outcome_space, o))
        .collect()
}

/// Mean squared error per (arm, scoring function) over replications.
#[derive(Clone, Debug)]
pub struct MseEntry {
    pub arm: usize,
    pub scoring: String,
    pub mse: f64,
    pub ci_half_width: f64,
}

#[derive(Clone, Debug)]
pub struct MseReport {
    pub entries: Vec<MseEntry>,
    /// Largest MSE over the scoring family and arms.
    pub family_max: f64,
    /// 95% upper confidence bound of the maximizing entry.
    pub family_max_ucb: f64,
    pub reps: u64,
}

/// Monte Carlo MSE of the mechanism's IPS estimates against the realized
/// average scores, over mechanism randomness and (if stochastic) adversary
/// randomness.
pub fn mse(
    instance: &Instance,
    config: &MechanismConfig,
    adversary: &Adversary,
    scoring_family: &[ScoringFunction],
    reps: u64,
    seed: u64,
) -> Result<MseReport, Error> {
    if scoring_family.is_empty() {
        return Err(Error::pre("scoring family is empty"));
    }
    let n = instance.n_arms();
    let cells = scoring_family.len() * n;
    let root = CounterRng::new(seed);

    let stats = parallel_map_reduce(
        reps,
        || vec![RunningStats::default(); cells],
        |acc, rep| {
            let rng = root.derive(rep);
            let (history, table) =
                run_trial_full(instance, config, adversary, scoring_family, &rng)
                    .expect("trial configuration was validated by the caller");
            let window = history.main_window();
            let len = window.len() as f64;
            for (fi, scoring) in scoring_family.iter().enumerate() {
                let ips = &history.estimates[fi].1;
                for arm in 0..n {
                    let adv_avg = window
                        .clone()
                        .map(|t| scoring.score(table[t].outcomes[arm]))
                        .sum::<f64>()
                        / len;
                    let err = ips[arm] - adv_avg;
                    acc[fi * n + arm].push(err * err);
                }
            }
        },
        |acc, part| {
            for (a, b) in acc.iter_mut().zip(part) {
                a.merge(b);
            }
        },
    );

    let mut entries = Vec::with_capacity(cells);
    let mut family_max = f64::NEG_INFINITY;
    let mut family_max_ucb = 0.0;
    for (fi, scoring) in scoring_family.iter().enumerate() {
        for arm in 0..n {
            let s = &stats[fi * n + arm];
            let entry = MseEntry {
                arm,
                scoring: scoring.name().to_string(),
                mse: s.mean(),
                ci_half_width: s.ci95_half_width(),
            };
            if entry.mse > family_max {
                family_max = entry.mse;
                family_max_ucb = entry.mse + entry.ci_half_width;
            }
            entries.push(entry);
        }
    }
    Ok(MseReport { entries, family_max, family_max_ucb, reps })
}

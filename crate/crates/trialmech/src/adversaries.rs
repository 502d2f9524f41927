//! Adversaries: generators of the (type, outcome-row) table a trial faces.
//!
//! An adversary fixes, round by round, the arriving agent's type and the
//! outcome each arm would produce. Stochastic adversaries draw i.i.d. rows
//! from a fixed state and type distribution; table adversaries replay a
//! fixed table; the lower-bound constructions perturb a fair coin on one
//! target arm by a schedule calibrated so the two resulting adversaries are
//! statistically hard to tell apart.
//!
//! Row generation is a pure function of `(round, stream)`: type draws and
//! outcome draws come from separate streams so replays can vary one while
//! holding the other fixed.

use std::ops::Range;

use crate::error::Error;
use crate::model::{AgentType, State, TypeDistribution};
use crate::rng::CounterRng;

/// One round of adversary output: the arriving type and the outcome index
/// each arm would yield.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdversaryRow {
    pub agent_type: AgentType,
    pub outcomes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryKind {
    Stochastic,
    Table,
    LowerBound,
}

/// Case tag for the lower-bound construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbRegime {
    /// Rarely-sampled regime: the perturbation schedule is informative.
    Case1,
    /// All probabilities sampled well ("unobserved-variance regime"); the
    /// plain fair-coin adversary already forces the variance floor.
    Case2,
}

#[derive(Clone, Debug)]
enum Gen {
    Stochastic {
        state: State,
        types: TypeDistribution,
    },
    Table {
        rows: Vec<AdversaryRow>,
    },
    /// Binary-outcome generator for the lower-bound pair: every arm yields
    /// outcome 0 with probability 1/2, except the target arm inside the
    /// window, which yields it with probability 1/2 + delta[t - start].
    LowerBound {
        n_arms: usize,
        target_arm: usize,
        window: Range<usize>,
        delta: Vec<f64>,
        agent_type: AgentType,
    },
    /// A generator whose emitted types are overridden by a fixed per-round
    /// sequence starting at `window_start`.
    TypedLowerBound {
        inner: Box<Gen>,
        window_start: usize,
        types: Vec<AgentType>,
    },
    /// One generator for rounds below `split`, another above.
    Composite {
        split: usize,
        warmup: Box<Gen>,
        main: Box<Gen>,
    },
}

/// Generator of the full type-and-outcome table, fixed before the trial.
#[derive(Clone, Debug)]
pub struct Adversary {
    gen: Gen,
}

impl Adversary {
    /// I.i.d. rows: the type from `types`, then one outcome per arm from
    /// `state(arm, public type)`.
    pub fn stochastic(state: State, types: TypeDistribution) -> Self {
        Self { gen: Gen::Stochastic { state, types } }
    }

    /// Replays a fixed table; identical across replications.
    pub fn table(rows: Vec<AdversaryRow>) -> Self {
        Self { gen: Gen::Table { rows } }
    }

    /// Splices a warm-up generator (rounds `0..split`) with a main-stage
    /// generator (rounds `split..`).
    pub fn composite(warmup: Adversary, main: Adversary, split: usize) -> Self {
        Self { gen: Gen::Composite { split, warmup: Box::new(warmup.gen), main: Box::new(main.gen) } }
    }

    pub fn kind(&self) -> AdversaryKind {
        fn kind(gen: &Gen) -> AdversaryKind {
            match gen {
                Gen::Stochastic { .. } => AdversaryKind::Stochastic,
                Gen::Table { .. } => AdversaryKind::Table,
                Gen::LowerBound { .. } => AdversaryKind::LowerBound,
                Gen::TypedLowerBound { inner, .. } => kind(inner),
                Gen::Composite { main, .. } => kind(main),
            }
        }
        kind(&self.gen)
    }

    /// The row for one round. Type and outcome draws derive per-round
    /// streams from the two provided stream roots.
    pub fn row(
        &self,
        round: usize,
        type_stream: &CounterRng,
        outcome_stream: &CounterRng,
    ) -> Result<AdversaryRow, Error> {
        Self::gen_row(&self.gen, round, type_stream, outcome_stream)
    }

    fn gen_row(
        gen: &Gen,
        round: usize,
        type_stream: &CounterRng,
        outcome_stream: &CounterRng,
    ) -> Result<AdversaryRow, Error> {
        match gen {
            Gen::Stochastic { state, types } => {
                let mut tr = type_stream.derive(round as u64);
                let type_idx = tr.sample_index(types.probs());
                let n_private = types.len() / state.n_public();
                let agent_type = AgentType::new(type_idx / n_private, type_idx % n_private);
                let mut or = outcome_stream.derive(round as u64);
                let outcomes = (0..state.n_arms())
                    .map(|arm| or.sample_index(state.dist(arm, agent_type.public)))
                    .collect();
                Ok(AdversaryRow { agent_type, outcomes })
            }
            Gen::Table { rows } => {
                rows.get(round).cloned().ok_or(Error::AdversaryExhausted(round))
            }
            Gen::LowerBound { n_arms, target_arm, window, delta, agent_type } => {
                let mut or = outcome_stream.derive(round as u64);
                let outcomes = (0..*n_arms)
                    .map(|arm| {
                        let mut p0 = 0.5;
                        if arm == *target_arm && window.contains(&round) {
                            p0 += delta[round - window.start];
                        }
                        usize::from(or.next_f64() >= p0)
                    })
                    .collect();
                Ok(AdversaryRow { agent_type: *agent_type, outcomes })
            }
            Gen::TypedLowerBound { inner, window_start, types } => {
                let mut row = Self::gen_row(inner, round, type_stream, outcome_stream)?;
                let idx = round
                    .checked_sub(*window_start)
                    .filter(|i| *i < types.len())
                    .ok_or(Error::AdversaryExhausted(round))?;
                row.agent_type = types[idx];
                Ok(row)
            }
            Gen::Composite { split, warmup, main } => {
                if round < *split {
                    Self::gen_row(warmup, round, type_stream, outcome_stream)
                } else {
                    Self::gen_row(main, round, type_stream, outcome_stream)
                }
            }
        }
    }

    /// Materializes rounds `0..rounds` as a fixed table.
    pub fn materialize(
        &self,
        rounds: usize,
        type_stream: &CounterRng,
        outcome_stream: &CounterRng,
    ) -> Result<Vec<AdversaryRow>, Error> {
        (0..rounds).map(|t| self.row(t, type_stream, outcome_stream)).collect()
    }
}

/// Shorthand for [`Adversary::stochastic`].
pub fn stochastic_adversary(state: State, types: TypeDistribution) -> Adversary {
    Adversary::stochastic(state, types)
}

/// The indistinguishable adversary pair for the lower bounds, plus its
/// perturbation schedule.
#[derive(Clone, Debug)]
pub struct LowerBoundPair {
    /// Fair coin on every arm and round.
    pub base: Adversary,
    /// Fair coin except the target arm inside the window, shifted by
    /// `delta[t]`.
    pub shifted: Adversary,
    pub delta: Vec<f64>,
    pub regime: LbRegime,
    /// Exact mean-score shift on the target arm: `sum(delta) / |window|`.
    pub mean_shift: f64,
}

/// Case-1 trigger: the summed inverse expected sampling probabilities must
/// exceed this multiple of the window length for the schedule to carry
/// enough signal.
pub const CASE1_TRIGGER: f64 = 710.0;

/// Builds the binary-outcome adversary pair whose target-arm score differs
/// by `delta[t] = 1 / (q_t * sqrt(8 * sum_s 1/q_s))`, where `q_t` are the
/// mechanism's expected sampling probabilities for the target arm over the
/// window. The schedule makes the pair's total-variation proxy
/// `sqrt(2 sum q_t delta_t^2)` equal exactly 1/2.
///
/// Both adversaries are returned in either regime; the tag records whether
/// the Case-1 trigger held. Outside the window every arm is a fair coin.
/// Requires a binary outcome space, scored as the indicator of outcome 0.
pub fn lb_adversary_homogeneous(
    expected_probs: &[f64],
    window: Range<usize>,
    n_arms: usize,
    target_arm: usize,
    agent_type: AgentType,
) -> Result<LowerBoundPair, Error> {
    if expected_probs.len() != window.len() {
        return Err(Error::pre("one expected probability per window round is required"));
    }
    if expected_probs.iter().any(|q| *q <= 0.0 || *q > 1.0) {
        return Err(Error::pre("expected sampling probabilities must lie in (0, 1]"));
    }
    let inv_sum: f64 = expected_probs.iter().map(|q| 1.0 / q).sum();
    let scale = (8.0 * inv_sum).sqrt();
    let delta: Vec<f64> = expected_probs.iter().map(|q| 1.0 / (q * scale)).collect();
    if delta.iter().any(|d| *d > 0.5) {
        return Err(Error::pre(
            "schedule infeasible: some delta exceeds 1/2 (window too short for these probabilities)",
        ));
    }
    let regime = if inv_sum >= CASE1_TRIGGER * window.len() as f64 {
        LbRegime::Case1
    } else {
        LbRegime::Case2
    };
    let mean_shift = delta.iter().sum::<f64>() / window.len() as f64;

    let base = Adversary {
        gen: Gen::LowerBound {
            n_arms,
            target_arm,
            window: window.clone(),
            delta: vec![0.0; window.len()],
            agent_type,
        },
    };
    let shifted = Adversary {
        gen: Gen::LowerBound { n_arms, target_arm, window, delta: delta.clone(), agent_type },
    };
    Ok(LowerBoundPair { base, shifted, delta, regime, mean_shift })
}

/// Heterogeneous lower-bound adversary: warm-up rounds draw types uniformly
/// and outcomes from `state0`; main-stage rounds emit a fixed type sequence
/// realizing `freq` exactly (contiguous blocks in type order), or a constant
/// type stream when `freq` is absent, with the target arm's outcomes
/// following the perturbation schedule.
///
/// `freq` values must be integer multiples of `1/|window|`.
pub fn lb_adversary_heterogeneous(
    instance: &crate::model::Instance,
    freq: Option<&TypeDistribution>,
    state0: &State,
    expected_probs: &[f64],
    window: Range<usize>,
    target_arm: usize,
) -> Result<(Adversary, Adversary, Vec<f64>), Error> {
    if instance.outcome_space().len() != 2 {
        return Err(Error::pre("lower-bound constructions require a binary outcome space"));
    }
    let n_types = instance.n_types();
    let len = window.len();

    let type_sequence: Vec<AgentType> = match freq {
        None => vec![instance.type_at(0); len],
        Some(freq) => {
            let mut seq = Vec::with_capacity(len);
            for t in 0..n_types {
                let exact = freq.prob(t) * len as f64;
                if (exact - exact.round()).abs() > 1e-9 {
                    return Err(Error::pre(format!(
                        "freq not realizable: {} rounds for type {} is not an integer",
                        exact,
                        instance.type_label(instance.type_at(t))
                    )));
                }
                seq.extend(std::iter::repeat_n(instance.type_at(t), exact.round() as usize));
            }
            if seq.len() != len {
                return Err(Error::pre("freq rows do not fill the window"));
            }
            seq
        }
    };

    let pair = lb_adversary_homogeneous(
        expected_probs,
        window.clone(),
        instance.n_arms(),
        target_arm,
        instance.type_at(0),
    )?;

    // Replace the constant type with the block sequence by materializing the
    // main stage into per-round type assignments while keeping outcome draws
    // stream-derived: wrap the lower-bound generator with typed rounds.
    let typed = |adv: Adversary| -> Adversary {
        Adversary {
            gen: Gen::Composite {
                split: window.start,
                warmup: Box::new(Gen::Stochastic {
                    state: state0.clone(),
                    types: TypeDistribution::uniform(n_types),
                }),
                main: Box::new(Gen::TypedLowerBound {
                    inner: Box::new(adv.gen),
                    window_start: window.start,
                    types: type_sequence.clone(),
                }),
            },
        }
    };

    Ok((typed(pair.base), typed(pair.shifted), pair.delta))
}

/// Uniform bound on event-probability differences between two outcome
/// distributions: `sqrt(KL(p || q) / 2)`.
pub fn pinsker_gap(p: &[f64], q: &[f64]) -> Result<f64, Error> {
    if p.len() != q.len() {
        return Err(Error::pre("distributions have different supports"));
    }
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 && *b <= 0.0 {
            return Err(Error::pre("support violation: q vanishes where p does not"));
        }
    }
    Ok((crate::learning::kl_divergence(p, q) / 2.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn streams(seed: u64) -> (CounterRng, CounterRng) {
        let root = CounterRng::new(seed);
        (root.derive(0), root.derive(1))
    }

    #[test]
    fn stochastic_rows_match_state_frequencies() {
        let h = fixtures::homogeneous();
        let adv = stochastic_adversary(h.prior().state(0).clone(), TypeDistribution::uniform(1));
        let (ts, os) = streams(3);
        let rows = adv.materialize(10_000, &ts, &os).unwrap();
        let hi_freq = rows.iter().filter(|r| r.outcomes[0] == 1).count() as f64 / 10_000.0;
        assert!((hi_freq - 0.8).abs() < 0.02, "hi frequency {hi_freq}");
    }

    #[test]
    fn point_mass_type_stream_is_constant() {
        let t = fixtures::heterogeneous();
        let adv = stochastic_adversary(
            t.prior().state(0).clone(),
            TypeDistribution::point_mass(2, 1),
        );
        let (ts, os) = streams(4);
        let rows = adv.materialize(100, &ts, &os).unwrap();
        assert!(rows.iter().all(|r| r.agent_type == AgentType::new(0, 1)));
    }

    #[test]
    fn table_adversary_replays_and_exhausts() {
        let rows = vec![
            AdversaryRow { agent_type: AgentType::new(0, 0), outcomes: vec![1, 0] },
            AdversaryRow { agent_type: AgentType::new(0, 0), outcomes: vec![0, 1] },
        ];
        let adv = Adversary::table(rows.clone());
        let (ts, os) = streams(1);
        assert_eq!(adv.row(1, &ts, &os).unwrap(), rows[1]);
        assert_eq!(adv.row(1, &ts, &os).unwrap(), rows[1]);
        assert!(matches!(adv.row(2, &ts, &os), Err(Error::AdversaryExhausted(2))));
    }

    #[test]
    fn delta_schedule_examples() {
        let pair = lb_adversary_homogeneous(
            &[0.5; 100],
            0..100,
            2,
            0,
            AgentType::new(0, 0),
        )
        .unwrap();
        for d in &pair.delta {
            assert!((d - 0.05).abs() < 1e-12);
        }
        assert_eq!(pair.regime, LbRegime::Case2);

        let pair =
            lb_adversary_homogeneous(&[1.0; 8], 0..8, 2, 0, AgentType::new(0, 0)).unwrap();
        for d in &pair.delta {
            assert!((d - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_feasibility_bound() {
        // q_t >= 1/sqrt(|S|) keeps every delta at or below 1/(2 sqrt 2)
        let len = 64;
        let q = vec![1.0 / (len as f64).sqrt(); len];
        let pair =
            lb_adversary_homogeneous(&q, 0..len, 2, 0, AgentType::new(0, 0)).unwrap();
        let cap = 1.0 / (2.0 * 2.0f64.sqrt());
        assert!(pair.delta.iter().all(|d| *d <= cap + 1e-12));
    }

    #[test]
    fn tv_proxy_identity_is_exact() {
        let q: Vec<f64> = [0.125, 0.5, 0.33, 0.97]
            .iter()
            .cycle()
            .take(100)
            .copied()
            .collect();
        let pair =
            lb_adversary_homogeneous(&q, 0..100, 2, 1, AgentType::new(0, 0)).unwrap();
        let proxy: f64 =
            (2.0 * q.iter().zip(&pair.delta).map(|(q, d)| q * d * d).sum::<f64>()).sqrt();
        assert!((proxy - 0.5).abs() < 1e-12, "proxy {proxy}");

        let mean_shift = pair.delta.iter().sum::<f64>() / 100.0;
        assert!((pair.mean_shift - mean_shift).abs() < 1e-15);
    }

    #[test]
    fn case1_trigger_fires_for_tiny_probabilities() {
        // constant q = 1/800 over 1000 rounds: sum 1/q = 8e5 >= 710 * 1000
        let q = vec![1.0 / 800.0; 1000];
        let pair = lb_adversary_homogeneous(&q, 0..1000, 2, 0, AgentType::new(0, 0)).unwrap();
        assert_eq!(pair.regime, LbRegime::Case1);
        assert!(pair.delta.iter().all(|d| *d <= 0.5));

        // infeasibly short window for the same probabilities
        let err = lb_adversary_homogeneous(&[1.0 / 800.0; 4], 0..4, 2, 0, AgentType::new(0, 0))
            .unwrap_err();
        assert!(err.to_string().contains("infeasible"));
    }

    #[test]
    fn shifted_adversary_moves_target_mean() {
        let len = 2000;
        let q = vec![0.25; len];
        let pair =
            lb_adversary_homogeneous(&q, 0..len, 2, 0, AgentType::new(0, 0)).unwrap();
        let (ts, os) = streams(8);
        let base_rows = pair.base.materialize(len, &ts, &os).unwrap();
        let shift_rows = pair.shifted.materialize(len, &ts, &os).unwrap();
        let freq0 = |rows: &[AdversaryRow]| {
            rows.iter().filter(|r| r.outcomes[0] == 0).count() as f64 / len as f64
        };
        let observed_shift = freq0(&shift_rows) - freq0(&base_rows);
        assert!(
            (observed_shift - pair.mean_shift).abs() < 0.04,
            "observed {observed_shift} expected {}",
            pair.mean_shift
        );
        // non-target arm untouched
        let f1_base = base_rows.iter().filter(|r| r.outcomes[1] == 0).count();
        assert!((f1_base as f64 / len as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn heterogeneous_lb_realizes_frequencies_in_blocks() {
        let t = fixtures::heterogeneous();
        let state0 = t.prior().state(0).clone();
        let freq = TypeDistribution::uniform(2);
        let (base, _, _) = lb_adversary_heterogeneous(
            &t,
            Some(&freq),
            &state0,
            &[0.5; 100],
            10..110,
            0,
        )
        .unwrap();
        let (ts, os) = streams(2);
        let rows = base.materialize(110, &ts, &os).unwrap();
        let main = &rows[10..];
        assert!(main[..50].iter().all(|r| r.agent_type == AgentType::new(0, 0)));
        assert!(main[50..].iter().all(|r| r.agent_type == AgentType::new(0, 1)));
    }

    #[test]
    fn heterogeneous_lb_rejects_unrealizable_freq() {
        let t = fixtures::heterogeneous();
        let state0 = t.prior().state(0).clone();
        let freq = TypeDistribution::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let err = lb_adversary_heterogeneous(&t, Some(&freq), &state0, &[0.5; 100], 0..100, 0)
            .unwrap_err();
        assert!(err.to_string().contains("not realizable") || err.to_string().contains("integer"));
    }

    #[test]
    fn heterogeneous_lb_constant_type_without_freq() {
        let t = fixtures::heterogeneous();
        let state0 = t.prior().state(0).clone();
        let (base, _, _) =
            lb_adversary_heterogeneous(&t, None, &state0, &[0.5; 20], 5..25, 0).unwrap();
        let (ts, os) = streams(6);
        let rows = base.materialize(25, &ts, &os).unwrap();
        assert!(rows[5..].iter().all(|r| r.agent_type == AgentType::new(0, 0)));
    }

    #[test]
    fn pinsker_gap_examples() {
        let p = [0.8, 0.2];
        assert_eq!(pinsker_gap(&p, &p).unwrap(), 0.0);

        let q = [0.4, 0.6];
        let g = pinsker_gap(&p, &q).unwrap();
        assert!((g - 0.4091).abs() < 1e-4, "gap {g}");
    }

    #[test]
    fn pinsker_bound_dominates_event_differences() {
        // exhaustive over all events of a 3-outcome pair
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.5, 0.3];
        let bound = pinsker_gap(&p, &q).unwrap();
        for mask in 0u32..8 {
            let (mut pa, mut qa) = (0.0, 0.0);
            for i in 0..3 {
                if mask & (1 << i) != 0 {
                    pa += p[i];
                    qa += q[i];
                }
            }
            assert!((pa - qa).abs() <= bound + 1e-12, "event {mask}");
        }
    }
}

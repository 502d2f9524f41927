//! State-aware recommendation policies and exact BIR/BIC verification.
//!
//! A policy maps every (state in the prior support, agent type) pair to a
//! distribution over arms. BIR compares the policy's Bayesian-expected
//! utility to the outside option; BIC compares truthful reporting with every
//! misreport of the private part (the public part is observed, so misreports
//! only range over private types sharing the true public type). All checks
//! are exact finite sums over the prior support — no Monte Carlo — with
//! tolerance [`CHECK_TOL`] on comparisons.

use crate::error::Error;
use crate::model::{outside_option, AgentType, Instance, CHECK_TOL};

/// Randomized map (state, type) -> distribution over arms.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_types: usize,
    n_arms: usize,
    /// Flattened `[state][type][arm]`.
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(
        n_states: usize,
        n_types: usize,
        n_arms: usize,
        probs: Vec<f64>,
    ) -> Result<Self, Error> {
        if probs.len() != n_states * n_types * n_arms {
            return Err(Error::pre(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                n_states * n_types * n_arms
            )));
        }
        let policy = Self { n_states, n_types, n_arms, probs };
        for state in 0..n_states {
            for ty in 0..n_types {
                let d = policy.dist(state, ty);
                if d.iter().any(|p| *p < -CHECK_TOL) {
                    return Err(Error::pre("policy probability is negative"));
                }
                let sum: f64 = d.iter().sum();
                if (sum - 1.0).abs() > CHECK_TOL {
                    return Err(Error::pre(format!(
                        "policy distribution for (state {state}, type {ty}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(policy)
    }

    /// Builds a policy entry-by-entry from `(state_idx, type, arm) -> prob`.
    pub fn from_fn(
        instance: &Instance,
        f: impl Fn(usize, AgentType, usize) -> f64,
    ) -> Result<Self, Error> {
        let n_states = instance.prior().len();
        let n_types = instance.n_types();
        let n_arms = instance.n_arms();
        let mut probs = Vec::with_capacity(n_states * n_types * n_arms);
        for state in 0..n_states {
            for ty_idx in 0..n_types {
                let ty = instance.type_at(ty_idx);
                for arm in 0..n_arms {
                    probs.push(f(state, ty, arm));
                }
            }
        }
        Self::new(n_states, n_types, n_arms, probs)
    }

    pub fn uniform(instance: &Instance) -> Self {
        let n = instance.n_arms() as f64;
        Self::from_fn(instance, |_, _, _| 1.0 / n).expect("uniform policy is valid")
    }

    #[inline]
    pub fn prob(&self, state: usize, type_idx: usize, arm: usize) -> f64 {
        self.probs[(state * self.n_types + type_idx) * self.n_arms + arm]
    }

    /// Arm distribution for one (state, type) pair.
    #[inline]
    pub fn dist(&self, state: usize, type_idx: usize) -> &[f64] {
        let base = (state * self.n_types + type_idx) * self.n_arms;
        &self.probs[base..base + self.n_arms]
    }

    /// Smallest sampling probability over all (state, type, arm) triples.
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest sampling probability when restricted to a type subset.
    pub fn min_prob_over_types(&self, type_indices: &[usize]) -> f64 {
        let mut min = f64::INFINITY;
        for state in 0..self.n_states {
            for ty in type_indices {
                for p in self.dist(state, *ty) {
                    min = min.min(*p);
                }
            }
        }
        min
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }
}

/// BIR/BIC margins of a policy at a required margin `eta`.
///
/// `satisfied` holds exactly when every listed margin is at least
/// `eta - CHECK_TOL`.
#[derive(Clone, Debug)]
pub struct IncentiveReport {
    pub required_margin: f64,
    /// Per type: policy value minus outside option.
    pub bir_margin: Vec<(AgentType, f64)>,
    /// Per (type, misreported private part): truthful minus misreport value.
    pub bic_margin: Vec<(AgentType, usize, f64)>,
    pub satisfied: bool,
}

impl IncentiveReport {
    fn evaluate(
        required_margin: f64,
        bir_margin: Vec<(AgentType, f64)>,
        bic_margin: Vec<(AgentType, usize, f64)>,
    ) -> Self {
        let satisfied = bir_margin
            .iter()
            .map(|(_, m)| *m)
            .chain(bic_margin.iter().map(|(_, _, m)| *m))
            .all(|m| m >= required_margin - CHECK_TOL);
        Self { required_margin, bir_margin, bic_margin, satisfied }
    }

    pub fn min_bir_margin(&self) -> f64 {
        self.bir_margin.iter().map(|(_, m)| *m).fold(f64::INFINITY, f64::min)
    }

    /// Minimum BIC margin; infinite when there are no misreports.
    pub fn min_bic_margin(&self) -> f64 {
        self.bic_margin.iter().map(|(_, _, m)| *m).fold(f64::INFINITY, f64::min)
    }
}

/// Bayesian-expected utility of following the policy truthfully, for one
/// type: `sum_psi prior(psi) sum_a pi_a(psi, type) V_psi(a, type)`.
pub fn policy_value(instance: &Instance, policy: &Policy, ty: AgentType) -> f64 {
    policy_value_as_reported(instance, policy, ty, ty.private)
}

/// Value to a type whose report is `reported` (the policy is read at the
/// observed type, the utility at the true type).
pub fn policy_value_as_reported(
    instance: &Instance,
    policy: &Policy,
    ty: AgentType,
    reported: usize,
) -> f64 {
    let observed = instance.type_index(AgentType::new(ty.public, reported));
    let prior = instance.prior();
    let mut value = 0.0;
    for (state_idx, state) in prior.states().iter().enumerate() {
        let w = prior.weight(state_idx);
        let dist = policy.dist(state_idx, observed);
        for (arm, p) in dist.iter().enumerate() {
            if *p != 0.0 {
                value += w * p * instance.expected_utility(state, arm, ty);
            }
        }
    }
    value
}

/// BIR margins of a policy: value minus outside option, per type.
pub fn check_bir(instance: &Instance, policy: &Policy, margin: f64) -> IncentiveReport {
    let bir = instance
        .types()
        .map(|ty| (ty, policy_value(instance, policy, ty) - outside_option(instance, ty)))
        .collect();
    IncentiveReport::evaluate(margin, bir, Vec::new())
}

/// BIC margins of a policy: truthful minus misreported value, for every
/// ordered pair of distinct private types sharing a public type.
pub fn check_bic(instance: &Instance, policy: &Policy, margin: f64) -> IncentiveReport {
    let mut bic = Vec::new();
    for ty in instance.types() {
        let truthful = policy_value(instance, policy, ty);
        for r in 0..instance.n_private() {
            if r == ty.private {
                continue;
            }
            let deviated = policy_value_as_reported(instance, policy, ty, r);
            bic.push((ty, r, truthful - deviated));
        }
    }
    IncentiveReport::evaluate(margin, Vec::new(), bic)
}

/// Combined BIR and BIC report at one required margin.
pub fn check_incentives(instance: &Instance, policy: &Policy, margin: f64) -> IncentiveReport {
    let bir = check_bir(instance, policy, margin);
    let bic = check_bic(instance, policy, margin);
    IncentiveReport::evaluate(margin, bir.bir_margin, bic.bic_margin)
}

/// Best arm for one (state, type), lowest index on ties.
pub fn best_arm(instance: &Instance, state_idx: usize, ty: AgentType) -> usize {
    let state = instance.prior().state(state_idx);
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for arm in 0..instance.n_arms() {
        let v = instance.expected_utility(state, arm, ty);
        if v > best_value {
            best_value = v;
            best = arm;
        }
    }
    best
}

/// Deterministic policy putting probability 1 on the utility-maximizing arm
/// of each (state, type).
pub fn best_arm_policy(instance: &Instance) -> Policy {
    Policy::from_fn(instance, |state, ty, arm| {
        if best_arm(instance, state, ty) == arm {
            1.0
        } else {
            0.0
        }
    })
    .expect("best-arm policy is valid")
}

/// Prior-mean value of the best arm for a type whose report is `reported`:
/// the best arm is computed for the observed type, the utility for the true
/// one.
pub fn best_value_as_reported(instance: &Instance, ty: AgentType, reported: usize) -> f64 {
    let observed = AgentType::new(ty.public, reported);
    let prior = instance.prior();
    (0..prior.len())
        .map(|s| {
            let arm = best_arm(instance, s, observed);
            prior.weight(s) * instance.expected_utility(prior.state(s), arm, ty)
        })
        .sum()
}

/// Prior-mean value of the best arm under truthful reporting.
pub fn best_value(instance: &Instance, ty: AgentType) -> f64 {
    best_value_as_reported(instance, ty, ty.private)
}

/// Outside option of every type, in type-index order.
pub fn outside_options(instance: &Instance) -> Vec<f64> {
    instance.types().map(|ty| outside_option(instance, ty)).collect()
}

/// Mixes an exploit policy with uniform exploration at rate `eps`.
pub fn epsilon_greedy(instance: &Instance, eps: f64, exploit: &Policy) -> Result<Policy, Error> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::pre(format!("exploration rate {eps} outside [0,1]")));
    }
    let n = instance.n_arms() as f64;
    Policy::from_fn(instance, |state, ty, arm| {
        let ty_idx = instance.type_index(ty);
        (1.0 - eps) * exploit.prob(state, ty_idx, arm) + eps / n
    })
}

/// Prior-mean utility difference between the best arm and the
/// uniformly-average arm, for one type.
pub fn prior_gap(instance: &Instance, ty: AgentType) -> f64 {
    let prior = instance.prior();
    let n = instance.n_arms() as f64;
    (0..prior.len())
        .map(|s| {
            let state = prior.state(s);
            let best = instance.expected_utility(state, best_arm(instance, s, ty), ty);
            let avg: f64 = (0..instance.n_arms())
                .map(|a| instance.expected_utility(state, a, ty))
                .sum::<f64>()
                / n;
            prior.weight(s) * (best - avg)
        })
        .sum()
}

/// Slack in the non-degeneracy condition: the minimum over types of the
/// best-arm policy's BIR margin, and over (type, misreport) pairs of its BIC
/// margin. Positive return certifies non-degeneracy.
pub fn degeneracy_gap(instance: &Instance) -> f64 {
    let mut gap = f64::INFINITY;
    for ty in instance.types() {
        gap = gap.min(best_value(instance, ty) - outside_option(instance, ty));
        for r in 0..instance.n_private() {
            if r != ty.private {
                gap = gap.min(best_value(instance, ty) - best_value_as_reported(instance, ty, r));
            }
        }
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn ty0() -> AgentType {
        AgentType::new(0, 0)
    }

    #[test]
    fn policy_value_examples() {
        let h = fixtures::homogeneous();
        let uniform = Policy::uniform(&h);
        assert!((policy_value(&h, &uniform, ty0()) - 0.5).abs() < 1e-15);

        let best = best_arm_policy(&h);
        assert!((policy_value(&h, &best, ty0()) - 0.7).abs() < 1e-15);

        let greedy = epsilon_greedy(&h, 0.5, &best).unwrap();
        assert!((policy_value(&h, &greedy, ty0()) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn best_arm_policy_examples() {
        let h = fixtures::homogeneous();
        let best = best_arm_policy(&h);
        assert_eq!(best.dist(0, 0), &[1.0, 0.0]);
        assert_eq!(best.dist(1, 0), &[0.0, 1.0]);

        let t = fixtures::heterogeneous();
        let best = best_arm_policy(&t);
        let minus = t.type_index(AgentType::new(0, 1));
        assert_eq!(best.dist(0, minus), &[0.0, 1.0]);
        assert_eq!(best.dist(1, minus), &[1.0, 0.0]);
    }

    #[test]
    fn ties_break_to_lowest_arm() {
        // both arms identical in every state
        let outcomes =
            crate::model::OutcomeSpace::new(vec!["lo".into(), "hi".into()]).unwrap();
        let scores = crate::model::ScoringFunction::new("unit", vec![0.0, 1.0]).unwrap();
        let utilities = crate::model::UtilityStructure::new(vec![vec![0.0, 1.0]]).unwrap();
        let s1 = crate::model::State::new(2, 1, 2, vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        let prior = crate::model::Prior::new(vec!["a".into()], vec![s1], vec![1.0]).unwrap();
        let inst = crate::model::Instance::new(
            2,
            outcomes,
            scores,
            vec!["x1".into()],
            vec!["s1".into()],
            prior,
            utilities,
            None,
        )
        .unwrap();
        let best = best_arm_policy(&inst);
        assert_eq!(best.dist(0, 0), &[1.0, 0.0]);
    }

    #[test]
    fn bir_margins() {
        let h = fixtures::homogeneous();
        let best = best_arm_policy(&h);

        let tight = epsilon_greedy(&h, 0.5, &best).unwrap();
        let report = check_bir(&h, &tight, 0.0);
        assert!(report.satisfied);
        assert!(report.min_bir_margin().abs() < 1e-12);

        let violated = epsilon_greedy(&h, 0.6, &best).unwrap();
        let report = check_bir(&h, &violated, 0.0);
        assert!(!report.satisfied);
        assert!((report.min_bir_margin() + 0.02).abs() < 1e-12);

        let report = check_bir(&h, &best, 0.1);
        assert!(report.satisfied);
        assert!((report.min_bir_margin() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bic_margins() {
        let h = fixtures::homogeneous();
        let report = check_bic(&h, &Policy::uniform(&h), 0.0);
        assert!(report.satisfied);
        assert!(report.bic_margin.is_empty());

        let t = fixtures::heterogeneous();
        let best = best_arm_policy(&t);
        let report = check_bic(&t, &best, 0.0);
        let plus = AgentType::new(0, 0);
        let entry = report
            .bic_margin
            .iter()
            .find(|(ty, r, _)| *ty == plus && *r == 1)
            .unwrap();
        assert!((entry.2 - 0.4).abs() < 1e-12);

        let uniform = Policy::uniform(&t);
        let report = check_bic(&t, &uniform, 0.0);
        assert!(report.bic_margin.iter().all(|(_, _, m)| m.abs() < 1e-15));
    }

    #[test]
    fn epsilon_greedy_edge_cases() {
        let h = fixtures::homogeneous();
        let best = best_arm_policy(&h);
        let uniform = epsilon_greedy(&h, 1.0, &best).unwrap();
        assert_eq!(uniform.dist(0, 0), &[0.5, 0.5]);
        let same = epsilon_greedy(&h, 0.0, &best).unwrap();
        assert_eq!(same, best);
        let mixed = epsilon_greedy(&h, 0.5, &best).unwrap();
        assert_eq!(mixed.dist(0, 0), &[0.75, 0.25]);
        assert!(epsilon_greedy(&h, 1.5, &best).is_err());
    }

    #[test]
    fn epsilon_greedy_floor_is_exact() {
        let t = fixtures::heterogeneous();
        let best = best_arm_policy(&t);
        for eps in [0.1, 0.25, 0.5, 1.0] {
            let p = epsilon_greedy(&t, eps, &best).unwrap();
            assert_eq!(p.min_prob(), eps / 2.0);
        }
    }

    #[test]
    fn value_is_affine_in_eps() {
        let h = fixtures::homogeneous();
        let best = best_arm_policy(&h);
        let v0 = policy_value(&h, &best, ty0());
        let gap = prior_gap(&h, ty0());
        for eps in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let p = epsilon_greedy(&h, eps, &best).unwrap();
            let v = policy_value(&h, &p, ty0());
            assert!((v - (v0 - eps * gap)).abs() < 1e-12, "eps={eps}");
        }
    }

    #[test]
    fn prior_gap_examples() {
        let h = fixtures::homogeneous();
        assert!((prior_gap(&h, ty0()) - 0.2).abs() < 1e-15);

        let t = fixtures::heterogeneous();
        assert!((prior_gap(&t, AgentType::new(0, 1)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn degeneracy_gap_examples() {
        let t = fixtures::heterogeneous();
        assert!((degeneracy_gap(&t) - 0.1).abs() < 1e-12);

        let h = fixtures::homogeneous();
        assert!((degeneracy_gap(&h) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn best_arm_margins_dominate_degeneracy_gap() {
        let t = fixtures::heterogeneous();
        let best = best_arm_policy(&t);
        let gap = degeneracy_gap(&t);
        let report = check_incentives(&t, &best, 0.0);
        let min_margin = report.min_bir_margin().min(report.min_bic_margin());
        assert!((min_margin - gap).abs() < 1e-12);
    }
}

//! Belief model: outcomes, scores, types, states, prior, utilities.
//!
//! All types are immutable after validation and safe to share across
//! threads. Probabilities are `f64`; simplex sums are checked to
//! [`SIMPLEX_TOL`] at construction, while downstream comparisons use the
//! looser [`CHECK_TOL`] to absorb arithmetic drift. Ties everywhere break
//! toward the lowest declared index.

use crate::error::Error;

/// Simplex tolerance enforced when constructing distributions.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Tolerance for downstream numeric comparisons (margins, policy simplexes).
pub const CHECK_TOL: f64 = 1e-9;

/// Finite ordered set of outcome labels. The ordering is fixed and used for
/// tie-breaking and serialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self, Error> {
        if labels.is_empty() {
            return Err(Error::invalid("outcome space is empty"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate outcome label {a:?}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Score assignment `f: outcomes -> [0,1]`, aligned with the outcome order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoringFunction {
    name: String,
    score: Vec<f64>,
}

impl ScoringFunction {
    pub fn new(name: impl Into<String>, score: Vec<f64>) -> Result<Self, Error> {
        if score.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid("score outside [0,1]"));
        }
        Ok(Self { name: name.into(), score })
    }

    /// Indicator of a single outcome index.
    pub fn indicator(outcome_space: &OutcomeSpace, outcome: usize) -> Self {
        let mut score = vec![0.0; outcome_space.len()];
        score[outcome] = 1.0;
        Self { name: format!("indicator:{}", outcome_space.labels()[outcome]), score }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn score(&self, outcome: usize) -> f64 {
        self.score[outcome]
    }

    pub fn scores(&self) -> &[f64] {
        &self.score
    }
}

/// Agent type: observable public part and reported private part, stored as
/// indices into the instance's declared label lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentType {
    pub public: usize,
    pub private: usize,
}

impl AgentType {
    pub fn new(public: usize, private: usize) -> Self {
        Self { public, private }
    }
}

/// Utility `u(outcome, private type) in [0,1]`, total on its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityStructure {
    /// Indexed `[private][outcome]`.
    values: Vec<Vec<f64>>,
}

impl UtilityStructure {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self, Error> {
        for row in &values {
            if row.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return Err(Error::invalid("utility outside [0,1]"));
            }
        }
        Ok(Self { values })
    }

    #[inline]
    pub fn get(&self, outcome: usize, private: usize) -> f64 {
        self.values[private][outcome]
    }

    pub fn n_private(&self) -> usize {
        self.values.len()
    }
}

/// Map from (arm, public type) to a full-support outcome distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    n_arms: usize,
    n_public: usize,
    n_outcomes: usize,
    /// Flattened `[arm][public][outcome]`.
    probs: Vec<f64>,
}

impl State {
    pub fn new(
        n_arms: usize,
        n_public: usize,
        n_outcomes: usize,
        probs: Vec<f64>,
    ) -> Result<Self, Error> {
        if probs.len() != n_arms * n_public * n_outcomes {
            return Err(Error::invalid(format!(
                "state table has {} entries, expected {}",
                probs.len(),
                n_arms * n_public * n_outcomes
            )));
        }
        let state = Self { n_arms, n_public, n_outcomes, probs };
        for arm in 0..n_arms {
            for x in 0..n_public {
                let d = state.dist(arm, x);
                let sum: f64 = d.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    return Err(Error::invalid(format!(
                        "distribution for (arm {}, public type {x}) sums to {sum}",
                        arm + 1
                    )));
                }
                if d.iter().any(|p| *p <= 0.0) {
                    return Err(Error::invalid(format!(
                        "full-support violated at (arm {}, public type {x})",
                        arm + 1
                    )));
                }
            }
        }
        Ok(state)
    }

    #[inline]
    pub fn prob(&self, arm: usize, public: usize, outcome: usize) -> f64 {
        self.probs[(arm * self.n_public + public) * self.n_outcomes + outcome]
    }

    /// Outcome distribution for one (arm, public type) pair.
    #[inline]
    pub fn dist(&self, arm: usize, public: usize) -> &[f64] {
        let base = (arm * self.n_public + public) * self.n_outcomes;
        &self.probs[base..base + self.n_outcomes]
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
}

/// Finite-support distribution over states.
#[derive(Clone, Debug)]
pub struct Prior {
    names: Vec<String>,
    states: Vec<State>,
    weights: Vec<f64>,
}

impl Prior {
    pub fn new(names: Vec<String>, states: Vec<State>, weights: Vec<f64>) -> Result<Self, Error> {
        if states.is_empty() {
            return Err(Error::invalid("prior support is empty"));
        }
        if states.len() != weights.len() || states.len() != names.len() {
            return Err(Error::invalid("prior support/weight/name lengths differ"));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::invalid("negative prior weight"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("prior weights sum to {sum}")));
        }
        for (i, a) in states.iter().enumerate() {
            for b in &states[..i] {
                if a == b {
                    return Err(Error::invalid("prior support states are not pairwise distinct"));
                }
            }
        }
        Ok(Self { names, states, weights })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &State {
        &self.states[idx]
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Distribution over agent types, indexed like [`Instance::type_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct TypeDistribution {
    freq: Vec<f64>,
}

impl TypeDistribution {
    pub fn new(freq: Vec<f64>) -> Result<Self, Error> {
        if freq.iter().any(|f| *f < 0.0) {
            return Err(Error::invalid("negative type frequency"));
        }
        let sum: f64 = freq.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("type frequencies sum to {sum}")));
        }
        Ok(Self { freq })
    }

    pub fn uniform(n_types: usize) -> Self {
        Self { freq: vec![1.0 / n_types as f64; n_types] }
    }

    pub fn point_mass(n_types: usize, type_idx: usize) -> Self {
        let mut freq = vec![0.0; n_types];
        freq[type_idx] = 1.0;
        Self { freq }
    }

    #[inline]
    pub fn prob(&self, type_idx: usize) -> f64 {
        self.freq[type_idx]
    }

    pub fn probs(&self) -> &[f64] {
        &self.freq
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// L1 distance to another distribution over the same type set.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.freq.iter().zip(&other.freq).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// The complete belief model consumed by every other module.
#[derive(Clone, Debug)]
pub struct Instance {
    n_arms: usize,
    outcome_space: OutcomeSpace,
    scores: ScoringFunction,
    public_types: Vec<String>,
    private_types: Vec<String>,
    prior: Prior,
    utilities: UtilityStructure,
    /// Arms the agents may pick outside the trial (sorted, nonempty).
    outside_arms: Vec<usize>,
}

impl Instance {
    /// Validates every invariant and returns the instance or the full list
    /// of violations.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_arms: usize,
        outcome_space: OutcomeSpace,
        scores: ScoringFunction,
        public_types: Vec<String>,
        private_types: Vec<String>,
        prior: Prior,
        utilities: UtilityStructure,
        outside_arms: Option<Vec<usize>>,
    ) -> Result<Self, Error> {
        let mut violations = Vec::new();
        if n_arms == 0 {
            violations.push("instance has zero arms".to_string());
        }
        if scores.scores().len() != outcome_space.len() {
            violations.push(format!(
                "scoring function covers {} outcomes, expected {}",
                scores.scores().len(),
                outcome_space.len()
            ));
        }
        if public_types.is_empty() {
            violations.push("no public types declared".to_string());
        }
        if private_types.is_empty() {
            violations.push("no private types declared".to_string());
        }
        if utilities.n_private() != private_types.len() {
            violations.push(format!(
                "utility structure covers {} private types, expected {}",
                utilities.n_private(),
                private_types.len()
            ));
        }
        for (i, state) in prior.states().iter().enumerate() {
            if state.n_arms() != n_arms
                || state.n_public() != public_types.len()
                || state.n_outcomes() != outcome_space.len()
            {
                violations.push(format!(
                    "state {:?} does not cover all (arm, public type) pairs",
                    prior.names()[i]
                ));
            }
        }
        let outside_arms = match outside_arms {
            Some(mut arms) => {
                arms.sort_unstable();
                arms.dedup();
                if arms.is_empty() {
                    violations.push("outside_arms is empty".to_string());
                }
                if arms.iter().any(|a| *a >= n_arms) {
                    violations.push("outside_arms contains an unknown arm".to_string());
                }
                arms
            }
            None => (0..n_arms).collect(),
        };
        if !violations.is_empty() {
            return Err(Error::InvalidInstance(violations));
        }
        Ok(Self {
            n_arms,
            outcome_space,
            scores,
            public_types,
            private_types,
            prior,
            utilities,
            outside_arms,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn outcome_space(&self) -> &OutcomeSpace {
        &self.outcome_space
    }

    /// The instance's exogenous scoring function.
    pub fn scores(&self) -> &ScoringFunction {
        &self.scores
    }

    pub fn public_types(&self) -> &[String] {
        &self.public_types
    }

    pub fn private_types(&self) -> &[String] {
        &self.private_types
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn utilities(&self) -> &UtilityStructure {
        &self.utilities
    }

    pub fn outside_arms(&self) -> &[usize] {
        &self.outside_arms
    }

    pub fn n_public(&self) -> usize {
        self.public_types.len()
    }

    pub fn n_private(&self) -> usize {
        self.private_types.len()
    }

    pub fn n_types(&self) -> usize {
        self.public_types.len() * self.private_types.len()
    }

    /// Dense index of a type: public-major, private-minor.
    #[inline]
    pub fn type_index(&self, ty: AgentType) -> usize {
        ty.public * self.private_types.len() + ty.private
    }

    pub fn type_at(&self, idx: usize) -> AgentType {
        AgentType::new(idx / self.private_types.len(), idx % self.private_types.len())
    }

    /// All types in the fixed declared order.
    pub fn types(&self) -> impl Iterator<Item = AgentType> + '_ {
        let np = self.private_types.len();
        (0..self.n_types()).map(move |i| AgentType::new(i / np, i % np))
    }

    pub fn type_label(&self, ty: AgentType) -> String {
        format!("{}/{}", self.public_types[ty.public], self.private_types[ty.private])
    }

    pub fn parse_type_label(&self, label: &str) -> Option<AgentType> {
        let (x, s) = label.split_once('/')?;
        let public = self.public_types.iter().position(|l| l == x)?;
        let private = self.private_types.iter().position(|l| l == s)?;
        Some(AgentType::new(public, private))
    }

    /// Expected utility of an arm under a state, for a given type.
    pub fn expected_utility(&self, state: &State, arm: usize, ty: AgentType) -> f64 {
        expected_utility(state, &self.utilities, arm, ty)
    }

    /// Prior-mean expected utility of an arm for a given type.
    pub fn prior_mean_utility(&self, arm: usize, ty: AgentType) -> f64 {
        self.prior
            .states()
            .iter()
            .zip(self.prior.weights())
            .map(|(state, w)| w * self.expected_utility(state, arm, ty))
            .sum()
    }
}

/// Expected utility `sum_w state(arm, x)(w) * u(w, s)`.
pub fn expected_utility(
    state: &State,
    utilities: &UtilityStructure,
    arm: usize,
    ty: AgentType,
) -> f64 {
    state
        .dist(arm, ty.public)
        .iter()
        .enumerate()
        .map(|(outcome, p)| p * utilities.get(outcome, ty.private))
        .sum()
}

/// Best prior-mean utility achievable by picking an allowed arm without the
/// mechanism.
pub fn outside_option(instance: &Instance, ty: AgentType) -> f64 {
    instance
        .outside_arms()
        .iter()
        .map(|a| instance.prior_mean_utility(*a, ty))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Average score of `arm` over the rounds in `window`, given the full
/// outcome table (`rows[t][arm]` is an outcome index).
pub fn average_score(
    rows: &[Vec<usize>],
    arm: usize,
    scoring: &ScoringFunction,
    window: &[usize],
) -> Result<f64, Error> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let sum: f64 = window.iter().map(|t| scoring.score(rows[*t][arm])).sum();
    Ok(sum / window.len() as f64)
}

/// Canonical demo instances used across tests, examples, and docs.
pub mod fixtures {
    use super::*;

    /// Two arms, binary outcomes, a single agent type, and two equally
    /// likely states that disagree on which arm is better.
    pub fn homogeneous() -> Instance {
        let outcomes = OutcomeSpace::new(vec!["lo".into(), "hi".into()]).unwrap();
        let scores = ScoringFunction::new("default", vec![0.0, 1.0]).unwrap();
        let utilities = UtilityStructure::new(vec![vec![0.0, 1.0]]).unwrap();
        let s1 = State::new(2, 1, 2, vec![0.2, 0.8, 0.8, 0.2]).unwrap();
        let s2 = State::new(2, 1, 2, vec![0.6, 0.4, 0.4, 0.6]).unwrap();
        let prior =
            Prior::new(vec!["psi1".into(), "psi2".into()], vec![s1, s2], vec![0.5, 0.5]).unwrap();
        Instance::new(
            2,
            outcomes,
            scores,
            vec!["x1".into()],
            vec!["s1".into()],
            prior,
            utilities,
            None,
        )
        .unwrap()
    }

    /// Same arms, outcomes, and states as [`homogeneous`], with two private
    /// types holding opposite preferences over the outcomes.
    pub fn heterogeneous() -> Instance {
        let outcomes = OutcomeSpace::new(vec!["lo".into(), "hi".into()]).unwrap();
        let scores = ScoringFunction::new("default", vec![0.0, 1.0]).unwrap();
        let utilities =
            UtilityStructure::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s1 = State::new(2, 1, 2, vec![0.2, 0.8, 0.8, 0.2]).unwrap();
        let s2 = State::new(2, 1, 2, vec![0.6, 0.4, 0.4, 0.6]).unwrap();
        let prior =
            Prior::new(vec!["psi1".into(), "psi2".into()], vec![s1, s2], vec![0.5, 0.5]).unwrap();
        Instance::new(
            2,
            outcomes,
            scores,
            vec!["x1".into()],
            vec!["s+".into(), "s-".into()],
            prior,
            utilities,
            None,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_instances_validate() {
        fixtures::homogeneous();
        fixtures::heterogeneous();
    }

    #[test]
    fn simplex_violation_is_rejected() {
        // arm1 distribution sums to 1.1
        let err = State::new(2, 1, 2, vec![0.3, 0.8, 0.8, 0.2]).unwrap_err();
        assert!(err.to_string().contains("sums to 1.1"), "{err}");
    }

    #[test]
    fn full_support_violation_is_rejected() {
        let err = State::new(2, 1, 2, vec![0.2, 0.8, 1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("full-support"), "{err}");
    }

    #[test]
    fn duplicate_states_rejected() {
        let s = State::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        let err = Prior::new(
            vec!["a".into(), "b".into()],
            vec![s.clone(), s],
            vec![0.5, 0.5],
        )
        .unwrap_err();
        assert!(err.to_string().contains("distinct"));
    }

    #[test]
    fn expected_utility_examples() {
        let h = fixtures::homogeneous();
        let ty = AgentType::new(0, 0);
        assert!((h.expected_utility(h.prior().state(0), 0, ty) - 0.8).abs() < 1e-15);

        let t = fixtures::heterogeneous();
        let minus = AgentType::new(0, 1);
        assert!((t.expected_utility(t.prior().state(0), 0, minus) - 0.2).abs() < 1e-15);

        // constant utility 0.5 gives 0.5 for any state and arm
        let u = UtilityStructure::new(vec![vec![0.5, 0.5]]).unwrap();
        let v = expected_utility(h.prior().state(1), &u, 1, ty);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn outside_option_examples() {
        let h = fixtures::homogeneous();
        let ty = AgentType::new(0, 0);
        assert!((outside_option(&h, ty) - 0.6).abs() < 1e-15);

        let t = fixtures::heterogeneous();
        assert!((outside_option(&t, AgentType::new(0, 1)) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn outside_option_respects_restricted_arms() {
        let h = fixtures::homogeneous();
        let restricted = Instance::new(
            2,
            h.outcome_space().clone(),
            h.scores().clone(),
            h.public_types().to_vec(),
            h.private_types().to_vec(),
            h.prior().clone(),
            h.utilities().clone(),
            Some(vec![1]),
        )
        .unwrap();
        let ty = AgentType::new(0, 0);
        // arm2 alone has prior-mean utility 0.4
        assert!((outside_option(&restricted, ty) - 0.4).abs() < 1e-15);
        assert!(outside_option(&restricted, ty) <= outside_option(&h, ty));
    }

    #[test]
    fn single_arm_outside_option_is_that_arm() {
        let outcomes = OutcomeSpace::new(vec!["lo".into(), "hi".into()]).unwrap();
        let scores = ScoringFunction::new("default", vec![0.0, 1.0]).unwrap();
        let utilities = UtilityStructure::new(vec![vec![0.0, 1.0]]).unwrap();
        let s1 = State::new(1, 1, 2, vec![0.3, 0.7]).unwrap();
        let s2 = State::new(1, 1, 2, vec![0.9, 0.1]).unwrap();
        let prior =
            Prior::new(vec!["a".into(), "b".into()], vec![s1, s2], vec![0.25, 0.75]).unwrap();
        let inst = Instance::new(
            1,
            outcomes,
            scores,
            vec!["x1".into()],
            vec!["s1".into()],
            prior,
            utilities,
            None,
        )
        .unwrap();
        let expect = 0.25 * 0.7 + 0.75 * 0.1;
        assert!((outside_option(&inst, AgentType::new(0, 0)) - expect).abs() < 1e-15);
    }

    #[test]
    fn average_score_examples() {
        let scoring = ScoringFunction::new("id", vec![0.0, 1.0]).unwrap();
        // per-round outcomes for one arm: hi, lo, hi, lo
        let rows = vec![vec![1], vec![0], vec![1], vec![0]];
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(average_score(&rows, 0, &scoring, &all).unwrap(), 0.5);
        assert_eq!(average_score(&rows, 0, &scoring, &[2, 3]).unwrap(), 0.5);

        let constant = vec![vec![1]; 6];
        assert_eq!(average_score(&constant, 0, &scoring, &all).unwrap(), 1.0);

        assert!(matches!(
            average_score(&rows, 0, &scoring, &[]),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn utility_scaling_is_linear() {
        let h = fixtures::homogeneous();
        let ty = AgentType::new(0, 0);
        let base = UtilityStructure::new(vec![vec![0.2, 0.9]]).unwrap();
        let scaled = UtilityStructure::new(vec![vec![0.1, 0.45]]).unwrap();
        for state in h.prior().states() {
            for arm in 0..2 {
                let v = expected_utility(state, &base, arm, ty);
                let w = expected_utility(state, &scaled, arm, ty);
                assert!((w - 0.5 * v).abs() < 1e-15);
            }
        }
    }
}

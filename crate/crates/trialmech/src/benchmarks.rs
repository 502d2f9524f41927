//! The three sampling-floor benchmarks and the bad-type mixture analysis.
//!
//! Each benchmark asks how large a uniform sampling floor a state-aware
//! policy can guarantee while staying individually rational (and incentive
//! compatible across private types), and reports the reciprocal:
//!
//! - [`bench_homogeneous`] — single agent type, closed form through the
//!   epsilon-greedy family;
//! - [`bench_worst`] — worst case over types, solved as a linear program;
//! - [`bench_typefreq`] — expectation over a type-frequency distribution,
//!   a convex program solved by epigraph cutting planes on each `1/x` term.
//!
//! The closed form and the LP agree on every single-type instance, which is
//! the primary cross-validation of the LP core.

use crate::error::Error;
use crate::incentives::{
    best_arm_policy, check_incentives, degeneracy_gap, epsilon_greedy, outside_options,
    IncentiveReport, Policy,
};
use crate::model::{outside_option, AgentType, Instance, TypeDistribution};
use crate::simplex::{maximize, Row};

/// A floor below this maps the benchmark value to infinity.
pub const FLOOR_EPSILON: f64 = 1e-9;

/// Relative objective gap at which the cutting-plane solve stops.
pub const CONVEX_REL_GAP: f64 = 1e-9;

/// Iteration cap for the cutting-plane solve.
pub const CONVEX_MAX_ITERS: usize = 10_000;

/// Benchmark value with the policy attaining it and its incentive
/// certificate. `value` is infinite exactly when no feasible policy keeps
/// every sampling probability positive; then `policy` is absent.
#[derive(Clone, Debug)]
pub struct BenchmarkResult {
    pub value: f64,
    pub policy: Option<Policy>,
    /// Actual sampling floor of the returned policy (0 when infinite).
    /// Equals `1/value` for the max-form benchmarks; for the
    /// type-frequency benchmark it is the reciprocal of the normalization
    /// factor instead.
    pub min_prob: f64,
    pub certificate: Option<IncentiveReport>,
}

impl BenchmarkResult {
    fn infinite() -> Self {
        Self { value: f64::INFINITY, policy: None, min_prob: 0.0, certificate: None }
    }

    fn finite(instance: &Instance, value: f64, policy: Policy) -> Self {
        let certificate = check_incentives(instance, &policy, 0.0);
        let min_prob = policy.min_prob();
        Self { value, policy: Some(policy), min_prob, certificate: Some(certificate) }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Closed-form single-type benchmark plus the optimal exploration rate.
#[derive(Clone, Debug)]
pub struct HomogeneousBenchmark {
    pub result: BenchmarkResult,
    pub eps_star: f64,
}

/// Single-type benchmark via the epsilon-greedy characterization: the
/// optimum is attained by exploring at the largest rate that keeps the
/// policy individually rational.
pub fn bench_homogeneous(instance: &Instance) -> Result<HomogeneousBenchmark, Error> {
    if instance.n_types() != 1 {
        return Err(Error::pre(
            "homogeneous benchmark requires exactly one agent type; use bench_worst",
        ));
    }
    let ty = AgentType::new(0, 0);
    let n = instance.n_arms() as f64;
    let gap = crate::incentives::prior_gap(instance, ty);
    let slack = crate::incentives::best_value(instance, ty) - outside_option(instance, ty);

    let eps_star = if gap <= FLOOR_EPSILON { 1.0 } else { (slack / gap).min(1.0) };
    if eps_star / n <= FLOOR_EPSILON {
        return Ok(HomogeneousBenchmark { result: BenchmarkResult::infinite(), eps_star: 0.0 });
    }
    let policy = epsilon_greedy(instance, eps_star, &best_arm_policy(instance))?;
    Ok(HomogeneousBenchmark {
        result: BenchmarkResult::finite(instance, n / eps_star, policy),
        eps_star,
    })
}

/// Index of the LP/convex variable for one policy entry.
#[inline]
fn var(instance: &Instance, state: usize, ty: usize, arm: usize) -> usize {
    (state * instance.n_types() + ty) * instance.n_arms() + arm
}

fn n_policy_vars(instance: &Instance) -> usize {
    instance.prior().len() * instance.n_types() * instance.n_arms()
}

/// Prior-weighted utility coefficient table, `[state][type][arm]` flattened
/// like the policy variables but premultiplied by the prior weight.
fn weighted_value_coeffs(instance: &Instance) -> Vec<f64> {
    let prior = instance.prior();
    let mut coeffs = vec![0.0; n_policy_vars(instance)];
    for (s, state) in prior.states().iter().enumerate() {
        let w = prior.weight(s);
        for (t_idx, ty) in instance.types().enumerate() {
            for arm in 0..instance.n_arms() {
                coeffs[var(instance, s, t_idx, arm)] =
                    w * instance.expected_utility(state, arm, ty);
            }
        }
    }
    coeffs
}

/// Simplex, BIR, and BIC rows shared by the LP and convex benchmarks.
/// Coefficient vectors are padded to `width` columns.
fn feasibility_rows(instance: &Instance, width: usize) -> Vec<Row> {
    let coeffs = weighted_value_coeffs(instance);
    let outs = outside_options(instance);
    let n_states = instance.prior().len();
    let n_types = instance.n_types();
    let n_arms = instance.n_arms();
    let mut rows = Vec::new();

    for s in 0..n_states {
        for t in 0..n_types {
            let mut row = vec![0.0; width];
            for arm in 0..n_arms {
                row[var(instance, s, t, arm)] = 1.0;
            }
            rows.push(Row::eq(row, 1.0));
        }
    }

    for (t_idx, ty) in instance.types().enumerate() {
        let mut row = vec![0.0; width];
        for s in 0..n_states {
            for arm in 0..n_arms {
                let v = var(instance, s, t_idx, arm);
                row[v] = coeffs[v];
            }
        }
        rows.push(Row::ge(row, outs[instance.type_index(ty)]));
    }

    for (t_idx, ty) in instance.types().enumerate() {
        for r in 0..instance.n_private() {
            if r == ty.private {
                continue;
            }
            let observed = instance.type_index(AgentType::new(ty.public, r));
            let mut row = vec![0.0; width];
            for s in 0..n_states {
                for arm in 0..n_arms {
                    let c = coeffs[var(instance, s, t_idx, arm)];
                    row[var(instance, s, t_idx, arm)] += c;
                    row[var(instance, s, observed, arm)] -= c;
                }
            }
            rows.push(Row::ge(row, 0.0));
        }
    }

    rows
}

fn policy_from_solution(instance: &Instance, x: &[f64]) -> Result<Policy, Error> {
    let n_states = instance.prior().len();
    let n_types = instance.n_types();
    let n_arms = instance.n_arms();
    let mut probs = Vec::with_capacity(n_policy_vars(instance));
    for s in 0..n_states {
        for t in 0..n_types {
            let base = var(instance, s, t, 0);
            let sum: f64 = x[base..base + n_arms].iter().sum();
            for arm in 0..n_arms {
                probs.push((x[base + arm] / sum).max(0.0));
            }
        }
    }
    Policy::new(n_states, n_types, n_arms, probs)
}

/// Worst-case-over-types benchmark: maximize the uniform floor `p` subject
/// to per-(state, type) simplexes, `pi >= p`, and the BIR/BIC constraints;
/// the value is `1/p*`.
pub fn bench_worst(instance: &Instance) -> Result<BenchmarkResult, Error> {
    let n_vars = n_policy_vars(instance);
    let p_var = n_vars;
    let width = n_vars + 1;

    let mut rows = feasibility_rows(instance, width);
    for s in 0..instance.prior().len() {
        for t in 0..instance.n_types() {
            for arm in 0..instance.n_arms() {
                let mut row = vec![0.0; width];
                row[var(instance, s, t, arm)] = 1.0;
                row[p_var] = -1.0;
                rows.push(Row::ge(row, 0.0));
            }
        }
    }

    let mut objective = vec![0.0; width];
    objective[p_var] = 1.0;
    let sol = maximize(&objective, &rows)?;
    let p_star = sol.objective;
    if p_star <= FLOOR_EPSILON {
        return Ok(BenchmarkResult::infinite());
    }
    let policy = policy_from_solution(instance, &sol.x)?;
    Ok(BenchmarkResult::finite(instance, 1.0 / p_star, policy))
}

/// Objective of the type-frequency benchmark at one policy:
/// `max over (state, arm) of sum_type freq(type) / pi_arm(state, type)`.
fn typefreq_objective(instance: &Instance, freq: &TypeDistribution, policy: &Policy) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..instance.prior().len() {
        for arm in 0..instance.n_arms() {
            let mut sum = 0.0;
            for t in 0..instance.n_types() {
                let f = freq.prob(t);
                if f > 0.0 {
                    let p = policy.prob(s, t, arm);
                    if p <= 0.0 {
                        return f64::INFINITY;
                    }
                    sum += f / p;
                }
            }
            worst = worst.max(sum);
        }
    }
    worst
}

struct Cut {
    row: Row,
    age: usize,
    slack_streak: usize,
}

/// Linearization point floor; tangents at the clamped point remain valid
/// global underestimators of `1/x` on `x > 0`. Entries of an optimal policy
/// are at least `freq(type)/value`, so the floor only weakens cuts in
/// regions no optimum occupies (for the problem sizes here).
const CUT_POINT_MIN: f64 = 1e-4;
const CUT_DROP_SLACK: f64 = 1e-6;
const CUT_DROP_STREAK: usize = 4;
const CUT_MIN_AGE: usize = 8;

/// Appends one cut per (state, arm): the tangent of
/// `sum_type freq/pi` at the given policy iterate. Rows are normalized by
/// their largest coefficient to keep the tableau well conditioned.
fn add_cuts(
    instance: &Instance,
    freq: &TypeDistribution,
    policy: &Policy,
    z_var: usize,
    width: usize,
    cuts: &mut Vec<Cut>,
) {
    for s in 0..instance.prior().len() {
        for arm in 0..instance.n_arms() {
            let mut row = vec![0.0; width];
            let mut rhs = 0.0;
            row[z_var] = 1.0;
            for t in 0..instance.n_types() {
                let f = freq.prob(t);
                if f > 0.0 {
                    let x0 = policy.prob(s, t, arm).max(CUT_POINT_MIN);
                    row[var(instance, s, t, arm)] = f / (x0 * x0);
                    rhs += 2.0 * f / x0;
                }
            }
            let scale = row
                .iter()
                .map(|c| c.abs())
                .fold(rhs.abs(), f64::max)
                .max(1.0);
            for c in row.iter_mut() {
                *c /= scale;
            }
            cuts.push(Cut { row: Row::ge(row, rhs / scale), age: 0, slack_streak: 0 });
        }
    }
}

/// Type-frequency benchmark: minimizes the expected inverse sampling
/// probability, worst case over (state, arm), over the BIR/BIC polytope.
///
/// Types with zero frequency stay in the constraints but contribute nothing
/// to the objective. Returns infinity without solving when the degeneracy
/// gap is nonpositive.
pub fn bench_typefreq(
    instance: &Instance,
    freq: &TypeDistribution,
) -> Result<BenchmarkResult, Error> {
    if freq.len() != instance.n_types() {
        return Err(Error::pre("type distribution does not match the instance's type set"));
    }
    if degeneracy_gap(instance) <= 0.0 {
        return Ok(BenchmarkResult::infinite());
    }
    let start = bench_worst(instance)?;
    let Some(start_policy) = start.policy else {
        return Ok(BenchmarkResult::infinite());
    };

    let n_vars = n_policy_vars(instance);
    let z_var = n_vars;
    let width = n_vars + 1;
    let base_rows = feasibility_rows(instance, width);

    let mut objective = vec![0.0; width];
    objective[z_var] = -1.0; // maximize -z == minimize z

    let mut cuts: Vec<Cut> = Vec::new();
    add_cuts(instance, freq, &start_policy, z_var, width, &mut cuts);
    // A second seed point keeps the first LP bounded away from the floor.
    let uniform = Policy::uniform(instance);
    add_cuts(instance, freq, &uniform, z_var, width, &mut cuts);

    let mut best_policy = start_policy.clone();
    let mut upper = typefreq_objective(instance, freq, &start_policy);
    let mut lower = 0.0f64;

    for iter in 0..CONVEX_MAX_ITERS {
        let mut rows = base_rows.clone();
        rows.extend(cuts.iter().map(|c| c.row.clone()));
        let sol = maximize(&objective, &rows)?;
        // Each LP is a relaxation, so its optimum lower-bounds the true
        // value; keep the tightest bound seen across iterations because cut
        // dropping can loosen later relaxations.
        lower = lower.max(-sol.objective);

        let iterate = policy_from_solution(instance, &sol.x)?;
        let value = typefreq_objective(instance, freq, &iterate);
        if value < upper {
            upper = value;
            best_policy = iterate.clone();
        }

        if upper - lower <= CONVEX_REL_GAP * upper.abs().max(1.0) {
            return Ok(BenchmarkResult::finite(instance, upper, best_policy));
        }

        // Cut management: age the pool, drop cuts that stayed slack at the
        // last several iterates, and add fresh tangents at the new point.
        for cut in cuts.iter_mut() {
            cut.age += 1;
            let activity: f64 = cut
                .row
                .coeffs
                .iter()
                .zip(sol.x.iter())
                .map(|(c, v)| c * v)
                .sum();
            if activity - cut.row.rhs > CUT_DROP_SLACK {
                cut.slack_streak += 1;
            } else {
                cut.slack_streak = 0;
            }
        }
        cuts.retain(|c| c.age < CUT_MIN_AGE || c.slack_streak < CUT_DROP_STREAK);
        add_cuts(instance, freq, &iterate, z_var, width, &mut cuts);
        let _ = iter;
    }

    Err(Error::NoConvergence { iterations: CONVEX_MAX_ITERS, lower, upper })
}

/// Reciprocal of the benchmark-optimizing policy's sampling floor for one
/// frequency distribution.
pub fn normalization_factor(instance: &Instance, freq: &TypeDistribution) -> Result<f64, Error> {
    let result = bench_typefreq(instance, freq)?;
    normalization_factor_of(&result)
}

/// Reciprocal floor of an already-computed benchmark result.
pub fn normalization_factor_of(result: &BenchmarkResult) -> Result<f64, Error> {
    if !result.is_finite() {
        return Err(Error::InfiniteBenchmark);
    }
    Ok(1.0 / result.min_prob)
}

/// Sum of the per-distribution normalization factors, as used by the
/// estimated-frequency error bound.
pub fn paired_normalization_factor(
    instance: &Instance,
    freq: &TypeDistribution,
    freq_est: &TypeDistribution,
) -> Result<f64, Error> {
    Ok(normalization_factor(instance, freq)? + normalization_factor(instance, freq_est)?)
}

/// Largest margin `eta` such that some state-aware policy restricted to the
/// given types is BIC (within the subset) and `eta`-BIR. Solved as an LP.
pub fn max_restricted_margin(instance: &Instance, type_indices: &[usize]) -> Result<f64, Error> {
    if type_indices.is_empty() {
        return Err(Error::pre("empty type subset"));
    }
    let n_states = instance.prior().len();
    let n_arms = instance.n_arms();
    let coeffs = weighted_value_coeffs(instance);
    let outs = outside_options(instance);

    // Local variable layout over the restricted types only, plus eta.
    let pos = |k: usize, s: usize, arm: usize| (s * type_indices.len() + k) * n_arms + arm;
    let n_vars = n_states * type_indices.len() * n_arms;
    let eta_var = n_vars;
    let width = n_vars + 1;

    let mut rows = Vec::new();
    for s in 0..n_states {
        for k in 0..type_indices.len() {
            let mut row = vec![0.0; width];
            for arm in 0..n_arms {
                row[pos(k, s, arm)] = 1.0;
            }
            rows.push(Row::eq(row, 1.0));
        }
    }
    for (k, t_idx) in type_indices.iter().enumerate() {
        let mut row = vec![0.0; width];
        for s in 0..n_states {
            for arm in 0..n_arms {
                row[pos(k, s, arm)] = coeffs[var(instance, s, *t_idx, arm)];
            }
        }
        row[eta_var] = -1.0;
        rows.push(Row::ge(row, outs[*t_idx]));
    }
    for (k, t_idx) in type_indices.iter().enumerate() {
        let ty = instance.type_at(*t_idx);
        for (k2, r_idx) in type_indices.iter().enumerate() {
            let rep = instance.type_at(*r_idx);
            if rep.public != ty.public || rep.private == ty.private {
                continue;
            }
            let mut row = vec![0.0; width];
            for s in 0..n_states {
                for arm in 0..n_arms {
                    let c = coeffs[var(instance, s, *t_idx, arm)];
                    row[pos(k, s, arm)] += c;
                    row[pos(k2, s, arm)] -= c;
                }
            }
            rows.push(Row::ge(row, 0.0));
        }
    }

    let mut objective = vec![0.0; width];
    objective[eta_var] = 1.0;
    let sol = maximize(&objective, &rows)?;
    Ok(sol.objective)
}

/// One evaluated point of the mixture curve.
#[derive(Clone, Debug)]
pub struct MixturePoint {
    pub eps: f64,
    pub value: f64,
    /// Linear interpolation of the component benchmarks, a lower envelope.
    pub lower_env: f64,
    /// Two-option menu upper envelope; absent at eps in {0, 1} where its
    /// terms divide by sqrt(eps) or 1 - sqrt(eps).
    pub upper_env: Option<f64>,
}

/// Mixes a rare, hard type distribution into a benign one and evaluates the
/// type-frequency benchmark along the mixture, together with analytic lower
/// and upper envelopes certifying that the hard types' influence vanishes
/// as the mixing weight goes to zero.
///
/// `eta` must be a margin at which a BIC, `eta`-BIR policy exists restricted
/// to the support of `f_good`; this is verified with a feasibility LP.
pub fn mixture_benchmark_curve(
    instance: &Instance,
    f_good: &TypeDistribution,
    f_bad: &TypeDistribution,
    eps_list: &[f64],
    eta: f64,
) -> Result<Vec<MixturePoint>, Error> {
    if eta <= 0.0 {
        return Err(Error::pre("eta must be positive"));
    }
    let good = bench_typefreq(instance, f_good)?;
    let bad = bench_typefreq(instance, f_bad)?;
    if !good.is_finite() || !bad.is_finite() {
        return Err(Error::InfiniteBenchmark);
    }

    let good_support: Vec<usize> =
        (0..instance.n_types()).filter(|t| f_good.prob(*t) > 0.0).collect();
    let eta_max = max_restricted_margin(instance, &good_support)?;
    if eta > eta_max + 1e-9 {
        return Err(Error::pre(format!(
            "no BIC, eta-BIR policy restricted to the good support at eta={eta} \
             (max feasible margin {eta_max:.6})"
        )));
    }
    let p_min = good
        .policy
        .as_ref()
        .expect("finite benchmark carries a policy")
        .min_prob_over_types(&good_support);

    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::pre(format!("mixture weight {eps} outside [0,1]")));
        }
        let mixed: Vec<f64> = (0..instance.n_types())
            .map(|t| (1.0 - eps) * f_good.prob(t) + eps * f_bad.prob(t))
            .collect();
        let value = bench_typefreq(instance, &TypeDistribution::new(mixed)?)?.value;
        let lower_env = (1.0 - eps) * good.value + eps * bad.value;
        let upper_env = if eps > 0.0 && eps < 1.0 {
            let root = eps.sqrt();
            Some(
                (1.0 - eps) / (1.0 - root) * good.value
                    + eps * (1.0 / ((1.0 - root) * p_min) + bad.value / (eta * root)),
            )
        } else {
            None
        };
        points.push(MixturePoint { eps, value, lower_env, upper_env });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn homogeneous_closed_form() {
        let h = fixtures::homogeneous();
        let bench = bench_homogeneous(&h).unwrap();
        assert!((bench.eps_star - 0.5).abs() < 1e-12);
        assert!((bench.result.value - 4.0).abs() < 1e-12);
        assert!((bench.result.min_prob - 0.25).abs() < 1e-12);
        let cert = bench.result.certificate.as_ref().unwrap();
        assert!(cert.satisfied);
    }

    #[test]
    fn homogeneous_degenerate_and_infinite_cases() {
        // identical arms: gap = 0, uniform policy is BIR, value = n
        let outcomes = crate::model::OutcomeSpace::new(vec!["lo".into(), "hi".into()]).unwrap();
        let scores = crate::model::ScoringFunction::new("f", vec![0.0, 1.0]).unwrap();
        let utilities = crate::model::UtilityStructure::new(vec![vec![0.0, 1.0]]).unwrap();
        let s1 = crate::model::State::new(2, 1, 2, vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        let s2 = crate::model::State::new(2, 1, 2, vec![0.6, 0.4, 0.6, 0.4]).unwrap();
        let prior = crate::model::Prior::new(
            vec!["a".into(), "b".into()],
            vec![s1, s2],
            vec![0.5, 0.5],
        )
        .unwrap();
        let inst = crate::model::Instance::new(
            2,
            outcomes.clone(),
            scores.clone(),
            vec!["x1".into()],
            vec!["s1".into()],
            prior,
            utilities.clone(),
            None,
        )
        .unwrap();
        let bench = bench_homogeneous(&inst).unwrap();
        assert!((bench.eps_star - 1.0).abs() < 1e-12);
        assert!((bench.result.value - 2.0).abs() < 1e-12);

        // single-state prior with distinct arms: best arm is known, so the
        // outside option already attains it and no exploration is rational
        let s = crate::model::State::new(2, 1, 2, vec![0.2, 0.8, 0.7, 0.3]).unwrap();
        let prior = crate::model::Prior::new(vec!["a".into()], vec![s], vec![1.0]).unwrap();
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
        let bench = bench_homogeneous(&inst).unwrap();
        assert!(bench.result.value.is_infinite());
        assert!(bench.result.policy.is_none());
    }

    #[test]
    fn homogeneous_rejects_multi_type() {
        let t = fixtures::heterogeneous();
        assert!(bench_homogeneous(&t).is_err());
    }

    #[test]
    fn worst_case_lp_on_heterogeneous_fixture() {
        let t = fixtures::heterogeneous();
        let bench = bench_worst(&t).unwrap();
        assert!((bench.value - 4.0).abs() < 1e-6 * 4.0, "value {}", bench.value);
        assert!((bench.min_prob - 0.25).abs() < 1e-6);
        let cert = bench.certificate.as_ref().unwrap();
        assert!(cert.satisfied);
    }

    #[test]
    fn worst_case_lp_matches_closed_form_on_single_type() {
        let h = fixtures::homogeneous();
        let lp = bench_worst(&h).unwrap();
        let closed = bench_homogeneous(&h).unwrap();
        let rel = (lp.value - closed.result.value).abs() / closed.result.value;
        assert!(rel < 1e-6, "lp {} vs closed {}", lp.value, closed.result.value);
        assert!((lp.min_prob - 1.0 / lp.value).abs() < 1e-6 / lp.value);
    }

    #[test]
    fn worst_case_lp_degenerate_instance_gives_uniform() {
        let outcomes = crate::model::OutcomeSpace::new(vec!["lo".into(), "hi".into()]).unwrap();
        let scores = crate::model::ScoringFunction::new("f", vec![0.0, 1.0]).unwrap();
        let utilities = crate::model::UtilityStructure::new(vec![vec![0.0, 1.0]]).unwrap();
        let s1 = crate::model::State::new(2, 1, 2, vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        let s2 = crate::model::State::new(2, 1, 2, vec![0.6, 0.4, 0.6, 0.4]).unwrap();
        let prior = crate::model::Prior::new(
            vec!["a".into(), "b".into()],
            vec![s1, s2],
            vec![0.5, 0.5],
        )
        .unwrap();
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
        let bench = bench_worst(&inst).unwrap();
        assert!((bench.value - 2.0).abs() < 1e-6);
        assert_eq!(bench.policy.unwrap().dist(0, 0), &[0.5, 0.5]);
    }

    #[test]
    fn typefreq_point_mass_matches_homogeneous_value() {
        let t = fixtures::heterogeneous();
        let freq = TypeDistribution::point_mass(2, 0);
        let bench = bench_typefreq(&t, &freq).unwrap();
        assert!((bench.value - 4.0).abs() < 1e-6 * 4.0, "value {}", bench.value);
    }

    #[test]
    fn typefreq_uniform_on_heterogeneous_fixture() {
        // Fine-grid oracle over symmetric epsilon-greedy policies: the
        // instance is symmetric under swapping private types with arms, the
        // BIR constraint binds at floor 1/4, and the expected inverse
        // probability there is (1/0.75 + 1/0.25)/2 = 8/3.
        let t = fixtures::heterogeneous();
        let freq = TypeDistribution::uniform(2);
        let bench = bench_typefreq(&t, &freq).unwrap();
        let oracle = 8.0 / 3.0;
        assert!(
            (bench.value - oracle).abs() < 1e-6 * oracle,
            "value {} vs oracle {oracle}",
            bench.value
        );
        assert!((bench.min_prob - 0.25).abs() < 1e-5, "floor {}", bench.min_prob);
        assert!(bench.certificate.as_ref().unwrap().satisfied);
    }

    #[test]
    fn typefreq_never_exceeds_worst_case() {
        let t = fixtures::heterogeneous();
        let worst = bench_worst(&t).unwrap();
        for freq in [
            TypeDistribution::uniform(2),
            TypeDistribution::new(vec![0.3, 0.7]).unwrap(),
            TypeDistribution::point_mass(2, 1),
        ] {
            let bench = bench_typefreq(&t, &freq).unwrap();
            assert!(bench.value <= worst.value + 1e-6);
        }
    }

    #[test]
    fn normalization_factor_examples() {
        let h = fixtures::homogeneous();
        let c = normalization_factor(&h, &TypeDistribution::point_mass(1, 0)).unwrap();
        assert!((c - 4.0).abs() < 1e-4, "C {}", c);

        let t = fixtures::heterogeneous();
        let freq = TypeDistribution::uniform(2);
        let c = normalization_factor(&t, &freq).unwrap();
        assert!((c - 4.0).abs() < 1e-3, "C {}", c);

        let paired = paired_normalization_factor(&t, &freq, &freq).unwrap();
        assert!((paired - 8.0).abs() < 2e-3, "paired {}", paired);
    }

    #[test]
    fn restricted_margin_matches_degeneracy_gap_shape() {
        let t = fixtures::heterogeneous();
        // Full type set: the best-arm policy attains margin >= the
        // degeneracy gap, and the LP can only do better.
        let eta = max_restricted_margin(&t, &[0, 1]).unwrap();
        assert!(eta >= degeneracy_gap(&t) - 1e-9, "eta {eta}");
        // Single type: only its own BIR constraint binds.
        let eta = max_restricted_margin(&t, &[0]).unwrap();
        assert!((eta - 0.1).abs() < 1e-8, "eta {eta}");
    }

    #[test]
    fn mixture_endpoints_degenerate_to_components() {
        let t = fixtures::heterogeneous();
        let good = TypeDistribution::point_mass(2, 0);
        let bad = TypeDistribution::point_mass(2, 1);
        let pts = mixture_benchmark_curve(&t, &good, &bad, &[0.0, 1.0], 0.05).unwrap();
        let g = bench_typefreq(&t, &good).unwrap().value;
        let b = bench_typefreq(&t, &bad).unwrap().value;
        assert!((pts[0].value - g).abs() < 1e-6 * g);
        assert!((pts[1].value - b).abs() < 1e-6 * b);
        assert!(pts[0].upper_env.is_none());
        assert!(pts[1].upper_env.is_none());
    }
}

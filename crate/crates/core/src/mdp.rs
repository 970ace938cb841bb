//! Finite MDPs, policies and their exact solutions.
//!
//! A [`TabularMdp`] stores the full model: `P(s'|s,a)` indexed
//! `[s][a][s']`, an action-dependent reward table `r(s,a)`, a per-state
//! discount `gamma(s)` (applied on entering `s`) and a feature matrix with
//! one row per state.
//!
//! Episodic problems are modelled as continuing chains. A terminal
//! transition carries `discount_next = 0`, which resets emphatic traces and
//! truncates bootstrapping; see [`Transition`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Iteration cap for power iteration.
pub const STATIONARY_MAX_ITERS: usize = 1_000_000;
/// Convergence tolerance (sup-norm between successive iterates).
pub const STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    discount: Vec<f64>,
    features: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    discount: Vec<f64>,
    features: Vec<Vec<f64>>,
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = Error;

    fn try_from(raw: RawMdp) -> Result<Self> {
        let mdp = TabularMdp::new(raw.transition, raw.reward, raw.discount, raw.features)?;
        if mdp.num_states != raw.num_states || mdp.num_actions != raw.num_actions {
            return Err(Error::InvalidModel(format!(
                "declared shape {}x{} does not match tables {}x{}",
                raw.num_states, raw.num_actions, mdp.num_states, mdp.num_actions
            )));
        }
        Ok(mdp)
    }
}

impl From<TabularMdp> for RawMdp {
    fn from(m: TabularMdp) -> Self {
        RawMdp {
            num_states: m.num_states,
            num_actions: m.num_actions,
            transition: m.transition,
            reward: m.reward,
            discount: m.discount,
            features: m.features,
        }
    }
}

fn check_distribution(row: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidModel(format!(
            "{} has a negative or non-finite entry",
            what()
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidModel(format!(
            "{} sums to {sum}, not 1",
            what()
        )));
    }
    Ok(())
}

impl TabularMdp {
    /// Builds and validates a model. Shapes are inferred from `transition`.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        discount: Vec<f64>,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let num_states = transition.len();
        if num_states == 0 {
            return Err(Error::InvalidModel("no states".into()));
        }
        let num_actions = transition[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidModel("no actions".into()));
        }
        for (s, rows) in transition.iter().enumerate() {
            if rows.len() != num_actions {
                return Err(Error::InvalidModel(format!(
                    "state {s} has {} actions",
                    rows.len()
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::InvalidModel(format!(
                        "P(.|{s},{a}) has length {}",
                        row.len()
                    )));
                }
                check_distribution(row, || format!("P(.|{s},{a})"))?;
            }
        }
        if reward.len() != num_states || reward.iter().any(|r| r.len() != num_actions) {
            return Err(Error::InvalidModel("reward table shape mismatch".into()));
        }
        if reward.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::InvalidModel("non-finite reward".into()));
        }
        if discount.len() != num_states {
            return Err(Error::InvalidModel(
                "discount vector length mismatch".into(),
            ));
        }
        if discount.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidModel("discount outside [0, 1]".into()));
        }
        if features.len() != num_states {
            return Err(Error::InvalidModel(format!(
                "feature matrix has {} rows, expected {num_states}",
                features.len()
            )));
        }
        let dim = features[0].len();
        if dim == 0 || features.iter().any(|f| f.len() != dim) {
            return Err(Error::InvalidModel(
                "feature rows must share a positive length".into(),
            ));
        }
        if features.iter().flatten().any(|f| !f.is_finite()) {
            return Err(Error::InvalidModel("non-finite feature".into()));
        }
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            discount,
            features,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s][a]
    }

    pub fn discount(&self, s: usize) -> f64 {
        self.discount[s]
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discount
    }

    pub fn phi(&self, s: usize) -> &[f64] {
        &self.features[s]
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Returns a copy with the feature matrix replaced.
    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.transition.clone(),
            self.reward.clone(),
            self.discount.clone(),
            features,
        )
    }

    /// Returns a copy with every state's discount set to `gamma`.
    pub fn with_uniform_discount(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.transition.clone(),
            self.reward.clone(),
            vec![gamma; self.num_states],
            self.features.clone(),
        )
    }

    /// Feature matrix `Phi` (states x features).
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.num_states, self.feature_dim(), |s, i| {
            self.features[s][i]
        })
    }

    /// `Gamma = diag(gamma(s))`.
    pub fn discount_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.discount))
    }

    /// Action-marginalized transition matrix, `P(s,s') = sum_a w(s,a) P(s'|s,a)`.
    ///
    /// With `w = policy` this is the state chain of the policy; other weight
    /// tables give the substochastic matrices used by clipped targets.
    pub fn weighted_transition_matrix(&self, weight: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
        let n = self.num_states;
        let mut p = DMatrix::zeros(n, n);
        for s in 0..n {
            for a in 0..self.num_actions {
                let w = weight(s, a);
                if w == 0.0 {
                    continue;
                }
                for (sp, &prob) in self.transition[s][a].iter().enumerate() {
                    p[(s, sp)] += w * prob;
                }
            }
        }
        p
    }

    pub fn state_transition_matrix(&self, policy: &Policy) -> DMatrix<f64> {
        self.weighted_transition_matrix(|s, a| policy.prob(s, a))
    }

    /// `r_pi(s) = sum_a pi(a|s) r(s,a)`.
    pub fn expected_reward(&self, policy: &Policy) -> DVector<f64> {
        DVector::from_fn(self.num_states, |s, _| {
            (0..self.num_actions)
                .map(|a| policy.prob(s, a) * self.reward[s][a])
                .sum()
        })
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.num_states() != self.num_states || policy.num_actions() != self.num_actions {
            return Err(Error::InvalidModel(format!(
                "policy shape {}x{} does not match MDP {}x{}",
                policy.num_states(),
                policy.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }
}

/// Action distribution per state, `probs[s][a] = pi(a|s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Policy {
    probs: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for Policy {
    type Error = Error;
    fn try_from(probs: Vec<Vec<f64>>) -> Result<Self> {
        Policy::new(probs)
    }
}

impl From<Policy> for Vec<Vec<f64>> {
    fn from(p: Policy) -> Self {
        p.probs
    }
}

impl Policy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::InvalidModel("empty policy".into()));
        }
        let na = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != na {
                return Err(Error::InvalidModel(format!(
                    "policy row {s} has wrong length"
                )));
            }
            check_distribution(row, || format!("policy row {s}"))?;
        }
        Ok(Self { probs })
    }

    /// Same distribution `row` in every state.
    pub fn uniform_rows(num_states: usize, row: &[f64]) -> Result<Self> {
        Self::new(vec![row.to_vec(); num_states])
    }

    /// Deterministic policy taking `action` everywhere.
    pub fn deterministic(num_states: usize, num_actions: usize, action: usize) -> Result<Self> {
        if action >= num_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                size: num_actions,
            });
        }
        let mut row = vec![0.0; num_actions];
        row[action] = 1.0;
        Self::uniform_rows(num_states, &row)
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    /// Convex mixture `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &Policy, w: f64) -> Result<Policy> {
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| w * x + (1.0 - w) * y)
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        // renormalize away rounding so the row-sum invariant holds exactly
        let probs = probs
            .into_iter()
            .map(|row| {
                let z: f64 = row.iter().sum();
                row.into_iter().map(|p| p / z).collect()
            })
            .collect();
        Policy::new(probs)
    }
}

/// One step of experience. `discount_next` is the discount of the next
/// state, forced to zero when the step ends an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub discount_next: f64,
}

/// Ordered transitions; consecutive steps chain unless the earlier one has
/// `discount_next == 0` (an episode restart).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Result<Self> {
        let t = Self { transitions };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, w) in self.transitions.windows(2).enumerate() {
            if w[0].discount_next != 0.0 && w[0].next_state != w[1].state {
                return Err(Error::ContractViolation(format!(
                    "trajectory breaks at step {k}: next_state {} but following state {}",
                    w[0].next_state, w[1].state
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Samples an index from a probability row by inversion.
#[inline]
pub(crate) fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Draws one step: `A ~ policy(.|state)`, `S' ~ P(.|state, A)`.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    state: usize,
    rng: &mut R,
) -> Result<Transition> {
    if state >= mdp.num_states {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: state,
            size: mdp.num_states,
        });
    }
    mdp.check_policy(policy)?;
    let action = sample_index(policy.row(state), rng);
    let next_state = sample_index(mdp.transition_row(state, action), rng);
    Ok(Transition {
        state,
        action,
        reward: mdp.reward(state, action),
        next_state,
        discount_next: mdp.discount(next_state),
    })
}

/// Importance sampling ratio `pi(a|s) / mu(a|s)`.
pub fn is_ratio(pi: &Policy, mu: &Policy, s: usize, a: usize) -> Result<f64> {
    if s >= mu.num_states() || a >= mu.num_actions() {
        return Err(Error::IndexOutOfRange {
            what: "state/action",
            index: s.max(a),
            size: mu.num_states().max(mu.num_actions()),
        });
    }
    let m = mu.prob(s, a);
    if m <= 0.0 {
        return Err(Error::CoverageViolation {
            state: s,
            action: a,
        });
    }
    Ok(pi.prob(s, a) / m)
}

/// Stationary distribution of the state chain induced by `policy`, by power
/// iteration from the uniform vector.
pub fn stationary_distribution(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    stationary_distribution_named(mdp, policy, "unnamed")
}

pub fn stationary_distribution_named(
    mdp: &TabularMdp,
    policy: &Policy,
    name: &str,
) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    let p = mdp.state_transition_matrix(policy);
    let n = mdp.num_states;
    let mut d = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..STATIONARY_MAX_ITERS {
        let mut next = p.tr_mul(&d);
        let z = next.sum();
        next /= z;
        let diff = (&next - &d).amax();
        d = next;
        if diff < STATIONARY_TOL {
            return Ok(d.iter().copied().collect());
        }
    }
    Err(Error::ReducibleChain {
        policy: name.to_string(),
        iterations: STATIONARY_MAX_ITERS,
    })
}

/// Direct solve of `d^T (P - I) = 0, 1^T d = 1` (cross-check for power
/// iteration; requires a unique stationary distribution).
pub fn stationary_distribution_direct(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    let n = mdp.num_states;
    let p = mdp.state_transition_matrix(policy);
    // (P^T - I) d = 0 with the last equation replaced by normalization
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let d = a.lu().solve(&b).ok_or_else(|| Error::ReducibleChain {
        policy: "direct".into(),
        iterations: 0,
    })?;
    Ok(d.iter().copied().collect())
}

/// Average state-visit distribution of fixed-length episodes started from
/// `start` and run for `horizon` steps under `policy`:
/// `(1/H) sum_{k<H} start^T P^k`.
///
/// This is the stationary state marginal of the chain that restarts from
/// `start` every `horizon` steps.
pub fn episodic_visit_distribution(
    mdp: &TabularMdp,
    policy: &Policy,
    start: &[f64],
    horizon: usize,
) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    if start.len() != mdp.num_states {
        return Err(Error::InvalidModel(
            "start distribution length mismatch".into(),
        ));
    }
    check_distribution(start, || "start distribution".into())?;
    if horizon == 0 {
        return Err(Error::InvalidModel(
            "episode horizon must be positive".into(),
        ));
    }
    let p = mdp.state_transition_matrix(policy);
    let mut cur = DVector::from_column_slice(start);
    let mut acc = DVector::zeros(mdp.num_states);
    for _ in 0..horizon {
        acc += &cur;
        cur = p.tr_mul(&cur);
    }
    acc /= horizon as f64;
    Ok(acc.iter().copied().collect())
}

/// Exact values `v = (I - P_pi Gamma)^{-1} r_pi`.
pub fn true_values(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    let n = mdp.num_states;
    let pg = mdp.state_transition_matrix(policy) * mdp.discount_matrix();
    let r = mdp.expected_reward(policy);
    let a = DMatrix::identity(n, n) - &pg;
    let v = a.lu().solve(&r).ok_or_else(|| {
        Error::NonContractive("I - P_pi Gamma is singular (a closed class with discount 1)".into())
    })?;
    let residual = (&v - &r - &pg * &v).amax();
    if !residual.is_finite() || residual > 1e-10 * (1.0 + v.amax()) {
        return Err(Error::NonContractive(format!(
            "Bellman residual {residual:e} after solve"
        )));
    }
    Ok(v.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> (TabularMdp, Policy, Policy) {
        // left = 0, right = 1
        let t = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ];
        let mdp = TabularMdp::new(
            t,
            vec![vec![0.0; 2]; 2],
            vec![0.9; 2],
            vec![vec![1.0], vec![2.0]],
        )
        .unwrap();
        let pi = Policy::deterministic(2, 2, 1).unwrap();
        let mu = Policy::uniform_rows(2, &[0.5, 0.5]).unwrap();
        (mdp, pi, mu)
    }

    #[test]
    fn rejects_bad_rows() {
        let t = vec![vec![vec![0.5, 0.6]], vec![vec![1.0, 0.0]]];
        let err =
            TabularMdp::new(t, vec![vec![0.0]; 2], vec![0.9; 2], vec![vec![1.0]; 2]).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
        assert!(Policy::new(vec![vec![-0.1, 1.1]]).is_err());
        let t = vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]];
        assert!(
            TabularMdp::new(t, vec![vec![0.0]; 2], vec![1.5, 0.9], vec![vec![1.0]; 2]).is_err()
        );
    }

    #[test]
    fn json_round_trip_validates() {
        let (mdp, _, _) = two_state();
        let s = serde_json::to_string(&mdp).unwrap();
        let back: TabularMdp = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mdp);
        let broken = s.replace("\"num_states\":2", "\"num_states\":3");
        assert!(serde_json::from_str::<TabularMdp>(&broken).is_err());
    }

    #[test]
    fn two_state_uniform_behavior_is_half_half() {
        let (mdp, _, mu) = two_state();
        let d = stationary_distribution(&mdp, &mu).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
        let direct = stationary_distribution_direct(&mdp, &mu).unwrap();
        assert!((direct[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absorbing_state_gets_all_mass() {
        let (mdp, pi, _) = two_state();
        let d = stationary_distribution(&mdp, &pi).unwrap();
        assert!(d[0].abs() < 1e-12);
        assert!((d[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_chain_is_reported() {
        // bipartite: 0 -> {1, 2}, {1, 2} -> 0; uniform start oscillates forever
        let t = vec![
            vec![vec![0.0, 0.5, 0.5]],
            vec![vec![1.0, 0.0, 0.0]],
            vec![vec![1.0, 0.0, 0.0]],
        ];
        let mdp = TabularMdp::new(t, vec![vec![0.0]; 3], vec![0.9; 3], vec![vec![1.0]; 3]).unwrap();
        let pol = Policy::deterministic(3, 1, 0).unwrap();
        let err = stationary_distribution_named(&mdp, &pol, "flip").unwrap_err();
        assert!(matches!(err, Error::ReducibleChain { ref policy, .. } if policy == "flip"));
        // the direct solve still finds the unique invariant vector
        let d = stationary_distribution_direct(&mdp, &pol).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn is_ratio_cases() {
        let (_, pi, mu) = two_state();
        assert_eq!(is_ratio(&pi, &mu, 0, 1).unwrap(), 2.0);
        assert_eq!(is_ratio(&pi, &mu, 1, 0).unwrap(), 0.0);
        assert_eq!(is_ratio(&mu, &mu, 1, 0).unwrap(), 1.0);
        let greedy = Policy::deterministic(2, 2, 1).unwrap();
        assert_eq!(
            is_ratio(&mu, &greedy, 0, 0).unwrap_err(),
            Error::CoverageViolation {
                state: 0,
                action: 0
            }
        );
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let (mdp, _, mu) = two_state();
        let a = sample_step(&mdp, &mu, 0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_step(&mdp, &mu, 0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let right = (0..n)
            .filter(|_| sample_step(&mdp, &mu, 0, &mut rng).unwrap().action == 1)
            .count();
        assert!((right as f64 / n as f64 - 0.5).abs() < 0.002);

        let pi = Policy::deterministic(2, 2, 1).unwrap();
        let t = sample_step(&mdp, &pi, 0, &mut rng).unwrap();
        assert_eq!((t.action, t.next_state, t.discount_next), (1, 1, 0.9));
        assert!(sample_step(&mdp, &pi, 5, &mut rng).is_err());
    }

    #[test]
    fn zero_reward_values_vanish() {
        let (mdp, pi, _) = two_state();
        assert_eq!(true_values(&mdp, &pi).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn undiscounted_closed_class_is_singular() {
        let (mdp, pi, _) = two_state();
        let m = mdp.with_uniform_discount(1.0).unwrap();
        assert!(matches!(
            true_values(&m, &pi),
            Err(Error::NonContractive(_))
        ));
    }

    #[test]
    fn trajectory_chaining() {
        let tr = |s, sp, g| Transition {
            state: s,
            action: 0,
            reward: 0.0,
            next_state: sp,
            discount_next: g,
        };
        assert!(Trajectory::new(vec![tr(0, 1, 0.9), tr(1, 0, 0.9)]).is_ok());
        assert!(Trajectory::new(vec![tr(0, 1, 0.9), tr(0, 0, 0.9)]).is_err());
        assert!(Trajectory::new(vec![tr(0, 1, 0.0), tr(0, 0, 0.9)]).is_ok());
    }
}

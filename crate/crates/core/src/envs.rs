//! Diagnostic environments and a seeded random-MDP generator.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    episodic_visit_distribution, sample_index, stationary_distribution_named, true_values, Policy,
    TabularMdp, Transition,
};

/// Names accepted by [`build_env`].
pub const ENV_NAMES: [&str; 4] = ["two-state", "collision", "baird", "random"];

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const FORWARD: usize = 0;
pub const RETREAT: usize = 1;
pub const UP: usize = 0;
pub const DOWN: usize = 1;

pub const COLLISION_STATES: usize = 9;
pub const COLLISION_HORIZON: usize = 100;
/// Seed for the default Collision feature matrix.
pub const COLLISION_FEATURE_SEED: u64 = 7;
pub const COLLISION_FEATURE_DIM: usize = 6;
pub const COLLISION_ACTIVE_FEATURES: usize = 3;

pub type EnvTriple = (TabularMdp, Policy, Policy);

/// Two states, `left`/`right` actions, zero rewards, features `(1, 2)`.
pub fn make_two_state() -> EnvTriple {
    make_two_state_with_gamma(0.9).expect("0.9 is a valid discount")
}

pub fn make_two_state_with_gamma(gamma: f64) -> Result<EnvTriple> {
    // [s][a][s']: left goes to state 0, right goes to state 1
    let transition = vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    ];
    let mdp = TabularMdp::new(
        transition,
        vec![vec![0.0; 2]; 2],
        vec![gamma; 2],
        vec![vec![1.0], vec![2.0]],
    )?;
    let target = Policy::deterministic(2, 2, RIGHT)?;
    let behavior = Policy::uniform_rows(2, &[0.5, 0.5])?;
    Ok((mdp, target, behavior))
}

/// Default Collision features: each state switches on 3 of 6 binary
/// features, with distinct patterns drawn from [`COLLISION_FEATURE_SEED`].
pub fn collision_default_features() -> Vec<Vec<f64>> {
    collision_random_features(COLLISION_FEATURE_SEED)
}

/// Collision features drawn from `seed` (distinct 3-of-6 patterns per state).
pub fn collision_random_features(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(COLLISION_STATES);
    while rows.len() < COLLISION_STATES {
        let mut row = vec![0.0; COLLISION_FEATURE_DIM];
        for i in sample(&mut rng, COLLISION_FEATURE_DIM, COLLISION_ACTIVE_FEATURES) {
            row[i] = 1.0;
        }
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    rows
}

/// Start distribution of Collision episodes (uniform over S1..S4).
pub fn collision_start() -> Vec<f64> {
    let mut start = vec![0.0; COLLISION_STATES];
    start[..4].fill(0.25);
    start
}

/// The Collision hallway. `reward` is paid on the forward step from S8 into
/// S9; S9 traps under both actions.
pub fn make_collision(
    reward: f64,
    gamma: f64,
    features: Option<Vec<Vec<f64>>>,
) -> Result<EnvTriple> {
    let features = features.unwrap_or_else(collision_default_features);
    if features.len() != COLLISION_STATES {
        return Err(Error::InvalidModel(format!(
            "Collision needs {COLLISION_STATES} feature rows, got {}",
            features.len()
        )));
    }
    let ns = COLLISION_STATES;
    let start = collision_start();
    let mut transition = vec![vec![vec![0.0; ns]; 2]; ns];
    let mut rewards = vec![vec![0.0; 2]; ns];
    for s in 0..ns {
        if s + 1 < ns {
            transition[s][FORWARD][s + 1] = 1.0;
            transition[s][RETREAT] = start.clone();
        } else {
            transition[s][FORWARD][s] = 1.0;
            transition[s][RETREAT][s] = 1.0;
        }
    }
    rewards[ns - 2][FORWARD] = reward;
    let mdp = TabularMdp::new(transition, rewards, vec![gamma; ns], features)?;
    let target = Policy::deterministic(ns, 2, FORWARD)?;
    let behavior = Policy::new(
        (0..ns)
            .map(|s| {
                if (4..8).contains(&s) {
                    vec![0.5, 0.5]
                } else {
                    vec![1.0, 0.0]
                }
            })
            .collect(),
    )?;
    Ok((mdp, target, behavior))
}

/// Baird's seven-state star with the classical 8-parameter features.
pub fn make_baird() -> EnvTriple {
    make_baird_with_gamma(0.9).expect("0.9 is a valid discount")
}

pub fn make_baird_with_gamma(gamma: f64) -> Result<EnvTriple> {
    let ns = 7;
    let bottom = 6;
    let mut top = vec![1.0 / 6.0; ns];
    top[bottom] = 0.0;
    let mut down = vec![0.0; ns];
    down[bottom] = 1.0;
    let transition = (0..ns).map(|_| vec![top.clone(), down.clone()]).collect();
    let features = (0..ns)
        .map(|s| {
            let mut row = vec![0.0; 8];
            if s == bottom {
                row[6] = 1.0;
                row[7] = 2.0;
            } else {
                row[s] = 2.0;
                row[7] = 1.0;
            }
            row
        })
        .collect();
    let mdp = TabularMdp::new(
        transition,
        vec![vec![0.0; 2]; ns],
        vec![gamma; ns],
        features,
    )?;
    let target = Policy::deterministic(ns, 2, DOWN)?;
    let behavior = Policy::uniform_rows(ns, &[6.0 / 7.0, 1.0 / 7.0])?;
    Ok((mdp, target, behavior))
}

/// Classical adversarial initialization for Baird.
pub fn baird_theta0() -> Vec<f64> {
    vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 10.0, 1.0]
}

fn dirichlet_row<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    // Exp(1) draws normalized => Dirichlet(1, ..., 1)
    let mut row: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-12)
        .collect();
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= z);
    renormalize(&mut row);
    row
}

/// Pushes the rounding residue into the largest entry so the row sums to 1
/// to machine precision.
fn renormalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    let (imax, _) =
        row.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
        );
    row[imax] += 1.0 - sum;
}

/// Coverage floor on generated behavior policies.
pub const RANDOM_MU_FLOOR: f64 = 0.01;

/// Random MDP with Dirichlet transition rows, a behavior policy bounded
/// below by [`RANDOM_MU_FLOOR`], a random target policy, rewards and
/// features uniform on `[-1, 1]`.
pub fn make_random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    feature_dim: usize,
    gamma: f64,
) -> Result<EnvTriple> {
    if num_states < 2 || num_actions == 0 || feature_dim == 0 {
        return Err(Error::InvalidModel(format!(
            "random MDP needs >= 2 states, >= 1 action and >= 1 feature (got {num_states}, {num_actions}, {feature_dim})"
        )));
    }
    if RANDOM_MU_FLOOR * num_actions as f64 >= 1.0 {
        return Err(Error::InvalidModel(format!(
            "too many actions ({num_actions}) for the coverage floor"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| dirichlet_row(&mut rng, num_states))
                .collect()
        })
        .collect();
    let reward = (0..num_states)
        .map(|_| (0..num_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let features = (0..num_states)
        .map(|_| (0..feature_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mdp = TabularMdp::new(transition, reward, vec![gamma; num_states], features)?;
    let slack = 1.0 - RANDOM_MU_FLOOR * num_actions as f64;
    let behavior = Policy::new(
        (0..num_states)
            .map(|_| {
                let mut row: Vec<f64> = dirichlet_row(&mut rng, num_actions)
                    .into_iter()
                    .map(|p| RANDOM_MU_FLOOR + slack * p)
                    .collect();
                renormalize(&mut row);
                row
            })
            .collect(),
    )?;
    let target = Policy::new(
        (0..num_states)
            .map(|_| dirichlet_row(&mut rng, num_actions))
            .collect(),
    )?;
    Ok((mdp, target, behavior))
}

/// Environment selection plus optional overrides, as accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Collision reward on entering the final state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    /// Replacement feature matrix (one row per state).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    /// Seed and shape for the `random` environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_actions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_features: Option<usize>,
}

impl EnvConfig {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            gamma: None,
            reward: None,
            features: None,
            random_seed: None,
            random_states: None,
            random_actions: None,
            random_features: None,
        }
    }
}

/// A fully specified evaluation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub name: String,
    pub mdp: TabularMdp,
    pub target: Policy,
    pub behavior: Policy,
    /// Distribution of the first state (and of restarts).
    pub start: Vec<f64>,
    /// Forced restart after this many steps, if episodic.
    pub horizon: Option<usize>,
    pub theta0: Vec<f64>,
    pub default_steps: usize,
    pub default_record_every: usize,
}

impl Environment {
    pub fn new(name: &str, (mdp, target, behavior): EnvTriple) -> Self {
        let ns = mdp.num_states();
        let fd = mdp.feature_dim();
        Self {
            name: name.to_string(),
            mdp,
            target,
            behavior,
            start: vec![1.0 / ns as f64; ns],
            horizon: None,
            theta0: vec![0.0; fd],
            default_steps: 10_000,
            default_record_every: 100,
        }
    }

    /// State weighting under the behavior policy: the stationary
    /// distribution, or the per-episode visit distribution for episodic
    /// problems.
    pub fn behavior_distribution(&self) -> Result<Vec<f64>> {
        match self.horizon {
            Some(h) => episodic_visit_distribution(&self.mdp, &self.behavior, &self.start, h),
            None => stationary_distribution_named(&self.mdp, &self.behavior, "behavior"),
        }
    }

    pub fn true_values(&self) -> Result<Vec<f64>> {
        true_values(&self.mdp, &self.target)
    }
}

/// The behavior data stream of an environment: actions from the behavior
/// policy, with a forced restart (zero discount, next state drawn from the
/// start distribution) every `horizon` steps in episodic problems.
#[derive(Debug, Clone)]
pub struct BehaviorStream<'a, R> {
    env: &'a Environment,
    rng: R,
    state: usize,
    episode_step: usize,
}

impl<'a, R: Rng> BehaviorStream<'a, R> {
    pub fn new(env: &'a Environment, mut rng: R) -> Self {
        let state = sample_index(&env.start, &mut rng);
        Self {
            env,
            rng,
            state,
            episode_step: 0,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn next_transition(&mut self) -> Transition {
        let mdp = &self.env.mdp;
        let s = self.state;
        let action = sample_index(self.env.behavior.row(s), &mut self.rng);
        let mut tr = Transition {
            state: s,
            action,
            reward: mdp.reward(s, action),
            next_state: sample_index(mdp.transition_row(s, action), &mut self.rng),
            discount_next: 0.0,
        };
        self.episode_step += 1;
        match self.env.horizon {
            Some(h) if self.episode_step >= h => {
                tr.next_state = sample_index(&self.env.start, &mut self.rng);
                self.episode_step = 0;
            }
            _ => tr.discount_next = mdp.discount(tr.next_state),
        }
        self.state = tr.next_state;
        tr
    }
}

impl<R: Rng> Iterator for BehaviorStream<'_, R> {
    type Item = Transition;

    fn next(&mut self) -> Option<Transition> {
        Some(self.next_transition())
    }
}

/// Builds a named environment with its harness defaults.
pub fn build_env(cfg: &EnvConfig) -> Result<Environment> {
    let mut env = match cfg.name.as_str() {
        "two-state" => {
            let mut env = Environment::new(
                "two-state",
                make_two_state_with_gamma(cfg.gamma.unwrap_or(0.9))?,
            );
            env.theta0 = vec![1.0];
            env.default_steps = 20_000;
            env
        }
        "collision" => {
            let triple = make_collision(
                cfg.reward.unwrap_or(1.0),
                cfg.gamma.unwrap_or(0.9),
                cfg.features.clone(),
            )?;
            let mut env = Environment::new("collision", triple);
            env.start = collision_start();
            env.horizon = Some(COLLISION_HORIZON);
            env.default_steps = 100 * COLLISION_HORIZON;
            env
        }
        "baird" => {
            let mut env =
                Environment::new("baird", make_baird_with_gamma(cfg.gamma.unwrap_or(0.9))?);
            env.theta0 = baird_theta0();
            env.default_steps = 100_000;
            env.default_record_every = 500;
            env
        }
        "random" => Environment::new(
            "random",
            make_random_mdp(
                cfg.random_seed.unwrap_or(0),
                cfg.random_states.unwrap_or(5),
                cfg.random_actions.unwrap_or(2),
                cfg.random_features.unwrap_or(3),
                cfg.gamma.unwrap_or(0.9),
            )?,
        ),
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown environment `{other}` (expected one of: {})",
                ENV_NAMES.join(", ")
            )))
        }
    };
    if let Some(features) = &cfg.features {
        if env.name != "collision" {
            env.mdp = env.mdp.with_features(features.clone())?;
            if env.theta0.len() != env.mdp.feature_dim() {
                env.theta0 = vec![0.0; env.mdp.feature_dim()];
            }
        }
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{is_ratio, sample_step, stationary_distribution};

    #[test]
    fn two_state_layout() {
        let (mdp, pi, mu) = make_two_state();
        assert_eq!(mdp.phi(0), &[1.0]);
        assert_eq!(mdp.phi(1), &[2.0]);
        assert_eq!(true_values(&mdp, &pi).unwrap(), vec![0.0, 0.0]);
        let d = stationary_distribution(&mdp, &mu).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
        assert_eq!(is_ratio(&pi, &mu, 0, RIGHT).unwrap(), 2.0);
        assert_eq!(mdp.transition_row(0, RIGHT), &[0.0, 1.0]);
        assert_eq!(mdp.transition_row(1, RIGHT), &[0.0, 1.0]);
        assert_eq!(mdp.transition_row(0, LEFT), &[1.0, 0.0]);
        assert_eq!(mdp.transition_row(1, LEFT), &[1.0, 0.0]);
    }

    #[test]
    fn collision_layout() {
        let (mdp, pi, mu) = make_collision(1.0, 0.9, None).unwrap();
        assert_eq!(mu.prob(5, FORWARD), 0.5);
        assert_eq!(mu.prob(1, FORWARD), 1.0);
        assert_eq!(mu.prob(8, FORWARD), 1.0);
        // target reaches S9 in 8 forward steps from S1
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = 0;
        for _ in 0..8 {
            s = sample_step(&mdp, &pi, s, &mut rng).unwrap().next_state;
        }
        assert_eq!(s, 8);
        let v = true_values(&mdp, &pi).unwrap();
        for i in 0..8 {
            assert!((v[i] - 0.9_f64.powi(7 - i as i32)).abs() < 1e-12);
        }
        assert_eq!(v[8], 0.0);
        assert_eq!(mdp.transition_row(6, RETREAT), collision_start().as_slice());
    }

    #[test]
    fn collision_features_are_distinct_three_hot() {
        let f = collision_default_features();
        assert_eq!(f.len(), 9);
        for (i, row) in f.iter().enumerate() {
            assert_eq!(row.iter().sum::<f64>(), 3.0);
            assert!(f[..i].iter().all(|r| r != row));
        }
        assert!(make_collision(1.0, 0.9, Some(vec![vec![1.0]; 8])).is_err());
    }

    #[test]
    fn baird_layout() {
        let (mdp, pi, mu) = make_baird();
        assert_eq!(mdp.phi(2), &[0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(mdp.phi(6), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!((is_ratio(&pi, &mu, 3, DOWN).unwrap() - 7.0).abs() < 1e-12);
        assert!(true_values(&mdp, &pi).unwrap().iter().all(|&v| v == 0.0));
        let d = stationary_distribution(&mdp, &mu).unwrap();
        assert!((d[6] - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn random_mdp_contracts() {
        let a = make_random_mdp(11, 5, 3, 4, 0.9).unwrap();
        let b = make_random_mdp(11, 5, 3, 4, 0.9).unwrap();
        assert_eq!(a, b);
        let (mdp, _, mu) = a;
        for s in 0..5 {
            for act in 0..3 {
                assert!(mu.prob(s, act) >= RANDOM_MU_FLOOR);
                let sum: f64 = mdp.transition_row(s, act).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        assert_ne!(make_random_mdp(12, 5, 3, 4, 0.9).unwrap().0, mdp);
        assert!(make_random_mdp(0, 1, 2, 2, 0.9).is_err());
    }

    #[test]
    fn build_env_names() {
        for name in ENV_NAMES {
            let env = build_env(&EnvConfig::named(name)).unwrap();
            assert_eq!(env.theta0.len(), env.mdp.feature_dim());
            let d = env.behavior_distribution().unwrap();
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let err = build_env(&EnvConfig::named("cartpole")).unwrap_err();
        assert!(err
            .to_string()
            .contains("two-state, collision, baird, random"));
    }
}

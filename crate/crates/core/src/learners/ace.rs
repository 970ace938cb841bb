use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp, Transition};
use crate::traces::{lambda_schedule, wetd_emphasis, EmphasisState, RhoTransform};

use super::{dot, is_diverged, AlgorithmSpec, Scheme, TargetClips};

/// Linear softmax policy, `pi_w(a|s) ∝ exp(phi(s)^T w[:, a])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxPolicy {
    /// Row-major `feature_dim x num_actions`.
    pub w: Vec<f64>,
    pub feature_dim: usize,
    pub num_actions: usize,
}

impl SoftmaxPolicy {
    pub fn zeros(feature_dim: usize, num_actions: usize) -> Self {
        Self {
            w: vec![0.0; feature_dim * num_actions],
            feature_dim,
            num_actions,
        }
    }

    pub fn from_weights(w: Vec<f64>, feature_dim: usize, num_actions: usize) -> Result<Self> {
        if w.len() != feature_dim * num_actions {
            return Err(Error::InvalidModel(format!(
                "softmax weights need {} entries, got {}",
                feature_dim * num_actions,
                w.len()
            )));
        }
        Ok(Self {
            w,
            feature_dim,
            num_actions,
        })
    }

    fn logits(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.num_actions)
            .map(|a| {
                phi.iter()
                    .enumerate()
                    .map(|(i, p)| p * self.w[i * self.num_actions + a])
                    .sum()
            })
            .collect()
    }

    pub fn probs(&self, phi: &[f64]) -> Vec<f64> {
        let logits = self.logits(phi);
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        p
    }

    pub fn log_prob(&self, phi: &[f64], a: usize) -> f64 {
        let logits = self.logits(phi);
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        logits[a] - lse
    }

    /// `d log pi(a|s) / d w[i, b] = phi_i (1[a = b] - pi(b|s))`.
    pub fn grad_log_prob(&self, phi: &[f64], a: usize) -> Vec<f64> {
        let p = self.probs(phi);
        let mut g = vec![0.0; self.w.len()];
        for (i, &x) in phi.iter().enumerate() {
            for b in 0..self.num_actions {
                let ind = if a == b { 1.0 } else { 0.0 };
                g[i * self.num_actions + b] = x * (ind - p[b]);
            }
        }
        g
    }

    /// Gradient of the entropy `-sum_a pi log pi`.
    pub fn grad_entropy(&self, phi: &[f64]) -> Vec<f64> {
        let p = self.probs(phi);
        let logp: Vec<f64> = p.iter().map(|x| x.max(1e-300).ln()).collect();
        let mean: f64 = p.iter().zip(&logp).map(|(a, b)| a * b).sum();
        let mut g = vec![0.0; self.w.len()];
        for (i, &x) in phi.iter().enumerate() {
            for b in 0..self.num_actions {
                g[i * self.num_actions + b] = -x * p[b] * (logp[b] - mean);
            }
        }
        g
    }

    /// Tabulates the policy over the states of `mdp`.
    pub fn to_policy(&self, mdp: &TabularMdp) -> Result<Policy> {
        Policy::new(
            (0..mdp.num_states())
                .map(|s| self.probs(mdp.phi(s)))
                .collect(),
        )
    }
}

/// Step sizes of the actor-critic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AceConfig {
    pub alpha_v: f64,
    pub alpha_pi: f64,
    /// Entropy bonus coefficient (off by default).
    #[serde(default)]
    pub entropy: f64,
}

/// Off-policy actor-critic evaluating and improving a softmax policy from a
/// fixed behavior policy. The critic follows the configured algorithm's update rule with
/// `pi_w` as target; the actor follows the clipped policy gradient, weighted
/// by the emphasis when `spec.ace` is set.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    spec: AlgorithmSpec,
    cfg: AceConfig,
    mu: Policy,
    phi: Vec<f64>,
    dim: usize,
    theta: Vec<f64>,
    actor: SoftmaxPolicy,
    trace: Option<EmphasisState>,
    buffer: VecDeque<Transition>,
    time: usize,
    diverged: bool,
}

struct StepWeights {
    c: f64,
    r: f64,
    trace: f64,
}

impl ActorCritic {
    pub fn new(
        spec: &AlgorithmSpec,
        mdp: &TabularMdp,
        mu: &Policy,
        theta0: Vec<f64>,
        actor: SoftmaxPolicy,
        cfg: AceConfig,
    ) -> Result<Self> {
        spec.validate()?;
        if theta0.len() != mdp.feature_dim() || actor.feature_dim != mdp.feature_dim() {
            return Err(Error::InvalidModel(
                "critic/actor dimensions do not match the features".into(),
            ));
        }
        if actor.num_actions != mdp.num_actions() || mu.num_actions() != mdp.num_actions() {
            return Err(Error::InvalidModel("action count mismatch".into()));
        }
        let trace = match spec.name.trace_kind() {
            Some(kind) => {
                Some(EmphasisState::new(kind, spec.n)?.with_max_trace(spec.trace_weights.max_trace))
            }
            None => None,
        };
        Ok(Self {
            spec: spec.clone(),
            cfg,
            mu: mu.clone(),
            phi: mdp.features().iter().flatten().copied().collect(),
            dim: mdp.feature_dim(),
            theta: theta0,
            actor,
            trace,
            buffer: VecDeque::new(),
            time: 0,
            diverged: false,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn actor(&self) -> &SoftmaxPolicy {
        &self.actor
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    fn phi(&self, s: usize) -> &[f64] {
        &self.phi[s * self.dim..(s + 1) * self.dim]
    }

    fn weights(&self, tr: &Transition) -> Result<StepWeights> {
        let m = self.mu.prob(tr.state, tr.action);
        if m <= 0.0 {
            return Err(Error::CoverageViolation {
                state: tr.state,
                action: tr.action,
            });
        }
        let probs = self.actor.probs(self.phi(tr.state));
        let rho = probs[tr.action] / m;
        let clips = self.spec.target_clips.unwrap_or(TargetClips {
            rho_bar: f64::INFINITY,
            c_bar: f64::INFINITY,
        });
        let trace = match self.spec.trace_weights.rho_transform {
            RhoTransform::Raw => rho,
            RhoTransform::Clipped { rho_bar } => rho.min(rho_bar),
            RhoTransform::VtracePolicy => {
                let nu: f64 = probs
                    .iter()
                    .zip(self.mu.row(tr.state))
                    .map(|(&p, &mu)| (clips.rho_bar * mu).min(p))
                    .sum();
                if nu <= 0.0 {
                    return Err(Error::DegeneratePolicy { state: tr.state });
                }
                rho.min(clips.rho_bar) / nu
            }
        };
        Ok(StepWeights {
            c: rho.min(clips.c_bar),
            r: rho.min(clips.rho_bar),
            trace,
        })
    }

    /// `sum_i (prod_{j<i} c_j gamma_{j+1}) r_i delta_i` over `steps`.
    fn weighted_td(&self, steps: &[(Transition, StepWeights)]) -> f64 {
        let mut prod = 1.0;
        let mut total = 0.0;
        for (t, w) in steps {
            let delta = t.reward + t.discount_next * dot(&self.theta, self.phi(t.next_state))
                - dot(&self.theta, self.phi(t.state));
            total += prod * w.r * delta;
            prod *= w.c * t.discount_next;
        }
        total
    }

    /// Feeds the next behavior transition, updating critic and actor once
    /// a window is complete.
    pub fn push(&mut self, tr: Transition) -> Result<()> {
        self.buffer.push_back(tr);
        if self.diverged || self.buffer.len() < self.spec.n {
            if self.diverged {
                self.buffer.clear();
            }
            return Ok(());
        }
        match self.spec.scheme {
            Scheme::Fixed => {
                self.update_at(0, 0.0)?;
                self.buffer.pop_front();
                self.time += 1;
            }
            Scheme::Mixed => {
                for k in 0..self.spec.n {
                    self.update_at(k, lambda_schedule(self.time + k, self.spec.n))?;
                    if self.diverged {
                        break;
                    }
                }
                self.buffer.clear();
                self.time += self.spec.n;
            }
        }
        Ok(())
    }

    fn update_at(&mut self, k: usize, lambda: f64) -> Result<()> {
        let steps: Vec<(Transition, StepWeights)> = self
            .buffer
            .iter()
            .skip(k)
            .take(self.spec.n - k)
            .map(|t| self.weights(t).map(|w| (*t, w)))
            .collect::<Result<_>>()?;
        let (first, w0) = (&steps[0].0, &steps[0].1);
        let emphasis = match &self.trace {
            Some(trace) => wetd_emphasis(trace.value(), lambda, self.spec.trace_weights.eta),
            None => 1.0,
        };
        let anchor_phi = self.phi(first.state).to_vec();
        let v_s = dot(&self.theta, &anchor_phi);
        let critic_td = self.weighted_td(&steps);
        // G_{t+1}: the target from the next state to the window end
        let g_next = if steps.len() > 1 {
            dot(&self.theta, self.phi(steps[1].0.state)) + self.weighted_td(&steps[1..])
        } else {
            dot(&self.theta, self.phi(first.next_state))
        };
        let advantage = first.reward + first.discount_next * g_next - v_s;
        let actor_emphasis = if self.spec.ace { emphasis } else { 1.0 };
        let mut grad = self.actor.grad_log_prob(&anchor_phi, first.action);
        let pg_scale = self.cfg.alpha_pi * actor_emphasis * w0.r * advantage;
        grad.iter_mut().for_each(|g| *g *= pg_scale);
        if self.cfg.entropy != 0.0 {
            let h = self.actor.grad_entropy(&anchor_phi);
            for (g, e) in grad.iter_mut().zip(h) {
                *g += self.cfg.alpha_pi * self.cfg.entropy * e;
            }
        }
        let critic_scale = self.cfg.alpha_v * emphasis * critic_td;
        for (t, p) in self.theta.iter_mut().zip(&anchor_phi) {
            *t += critic_scale * p;
        }
        for (w, g) in self.actor.w.iter_mut().zip(grad) {
            *w += g;
        }
        if let Some(trace) = self.trace.as_mut() {
            let g = self.spec.trace_weights.trace_discount(first.discount_next) * w0.trace;
            trace.advance(g)?;
        }
        if is_diverged(&self.theta) || is_diverged(&self.actor.w) {
            self.diverged = true;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_collision, make_two_state};
    use crate::learners::{AlgorithmName, StreamingLearner};
    use crate::mdp::sample_step;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grad_log_prob_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fd = 4;
        let na = 3;
        let pol = SoftmaxPolicy::from_weights(
            (0..fd * na).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            fd,
            na,
        )
        .unwrap();
        let phi: Vec<f64> = (0..fd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for a in 0..na {
            let g = pol.grad_log_prob(&phi, a);
            for j in 0..pol.w.len() {
                let h = 1e-5;
                let mut plus = pol.clone();
                plus.w[j] += h;
                let mut minus = pol.clone();
                minus.w[j] -= h;
                let fdiff = (plus.log_prob(&phi, a) - minus.log_prob(&phi, a)) / (2.0 * h);
                assert!((fdiff - g[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn critic_matches_streaming_learner_for_fixed_actor() {
        // with alpha_pi = 0 the critic is the plain learner with pi_w as target
        let (mdp, _, mu) = make_two_state();
        let actor = SoftmaxPolicy::from_weights(vec![-0.3, 0.4], 1, 2).unwrap();
        let pi = actor.to_policy(&mdp).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmName::Nevtrace, 2).unwrap();
        let cfg = AceConfig {
            alpha_v: 0.01,
            alpha_pi: 0.0,
            entropy: 0.0,
        };
        let mut ac = ActorCritic::new(
            &spec.clone().with_ace(true),
            &mdp,
            &mu,
            vec![1.0],
            actor,
            cfg,
        )
        .unwrap();
        let mut l = StreamingLearner::new(&spec, &mdp, &pi, &mu, vec![1.0], 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = 0;
        for _ in 0..500 {
            let tr = sample_step(&mdp, &mu, s, &mut rng).unwrap();
            s = tr.next_state;
            ac.push(tr).unwrap();
            l.push(tr).unwrap();
            assert!((ac.theta()[0] - l.theta()[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn actor_learns_forward_in_collision() {
        let (mdp, _, mu) = make_collision(
            1.0,
            0.9,
            Some(
                (0..9)
                    .map(|s| (0..9).map(|i| (i == s) as u8 as f64).collect())
                    .collect(),
            ),
        )
        .unwrap();
        let spec = AlgorithmSpec::new(AlgorithmName::Wevtrace, 2)
            .unwrap()
            .with_ace(true);
        let cfg = AceConfig {
            alpha_v: 0.05,
            alpha_pi: 0.05,
            entropy: 0.0,
        };
        let mut ac = ActorCritic::new(
            &spec,
            &mdp,
            &mu,
            vec![0.0; 9],
            SoftmaxPolicy::zeros(9, 2),
            cfg,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = 0;
        for step in 0..20_000 {
            let mut tr = sample_step(&mdp, &mu, s, &mut rng).unwrap();
            if step % 100 == 99 {
                tr.discount_next = 0.0;
                tr.next_state = rng.gen_range(0..4);
            }
            s = tr.next_state;
            ac.push(tr).unwrap();
        }
        let p = ac.actor().to_policy(&mdp).unwrap();
        for s in 4..8 {
            assert!(p.prob(s, 0) > 0.5, "state {s}: {:?}", p.row(s));
            assert!((p.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(!ac.diverged());
    }
}

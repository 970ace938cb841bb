use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp, Transition};
use crate::traces::{lambda_schedule, wetd_emphasis, EmphasisState};

use super::{dot, is_diverged, AlgorithmSpec, LinearValueFn, ResolvedWeights, Scheme};

/// One transition of an update window with its target coefficient
/// `(prod_{j<i} c_j gamma_{j+1}) r_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedStep {
    pub coef: f64,
    pub transition: Transition,
}

/// Everything that defines one parameter update except `theta` and `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct UpdateTerm<'a> {
    pub anchor: usize,
    pub emphasis: f64,
    pub steps: &'a [WeightedStep],
}

/// Streaming learner for one run: feed behavior transitions in order and
/// the learner applies each update as soon as its window is complete.
///
/// Fixed scheme: the update anchored at `S_t` fires once `S_t .. S_{t+n}`
/// are buffered. Mixed scheme: a window of `n` transitions yields `n` inner
/// updates, the `k`-th using an `(n-k)`-step target.
#[derive(Debug, Clone)]
pub struct StreamingLearner {
    spec: AlgorithmSpec,
    weights: ResolvedWeights,
    phi: Vec<f64>,
    dim: usize,
    theta: Vec<f64>,
    frozen: Vec<f64>,
    alpha: f64,
    trace: Option<EmphasisState>,
    buffer: VecDeque<Transition>,
    steps: Vec<WeightedStep>,
    /// Time index of the oldest buffered transition.
    time: usize,
    updates: usize,
    diverged: bool,
    num_states: usize,
    num_actions: usize,
}

impl StreamingLearner {
    pub fn new(
        spec: &AlgorithmSpec,
        mdp: &TabularMdp,
        pi: &Policy,
        mu: &Policy,
        theta0: Vec<f64>,
        alpha: f64,
    ) -> Result<Self> {
        let weights = spec.resolve(pi, mu)?;
        if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
            return Err(Error::InvalidModel(
                "policies do not match the model shape".into(),
            ));
        }
        let dim = mdp.feature_dim();
        if theta0.len() != dim {
            return Err(Error::InvalidModel(format!(
                "theta0 has length {}, feature dimension is {dim}",
                theta0.len()
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "step size must be finite and >= 0, got {alpha}"
            )));
        }
        let trace = match spec.name.trace_kind() {
            Some(kind) => {
                Some(EmphasisState::new(kind, spec.n)?.with_max_trace(spec.trace_weights.max_trace))
            }
            None => None,
        };
        let phi = mdp.features().iter().flatten().copied().collect();
        let diverged = is_diverged(&theta0);
        Ok(Self {
            spec: spec.clone(),
            weights,
            phi,
            dim,
            frozen: theta0.clone(),
            theta: theta0,
            alpha,
            trace,
            buffer: VecDeque::with_capacity(spec.n + 1),
            steps: Vec::with_capacity(spec.n),
            time: 0,
            updates: 0,
            diverged,
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
        })
    }

    pub fn spec(&self) -> &AlgorithmSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn value_fn(&self) -> LinearValueFn {
        LinearValueFn::new(self.theta.clone())
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Number of parameter updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Current trace value (`1` for baselines).
    pub fn trace_value(&self) -> f64 {
        self.trace.as_ref().map_or(1.0, EmphasisState::value)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    #[inline]
    fn phi(&self, s: usize) -> &[f64] {
        &self.phi[s * self.dim..(s + 1) * self.dim]
    }

    /// Feeds the next behavior transition.
    pub fn push(&mut self, tr: Transition) -> Result<()> {
        self.push_with(tr, |_, _| {})
    }

    /// Like [`push`](Self::push), calling `hook(term, theta)` just before
    /// each update is applied.
    pub fn push_with(
        &mut self,
        tr: Transition,
        mut hook: impl FnMut(&UpdateTerm<'_>, &[f64]),
    ) -> Result<()> {
        if tr.state >= self.num_states
            || tr.next_state >= self.num_states
            || tr.action >= self.num_actions
        {
            return Err(Error::IndexOutOfRange {
                what: "transition",
                index: tr.state.max(tr.next_state).max(tr.action),
                size: self.num_states,
            });
        }
        if let Some(last) = self.buffer.back() {
            if last.discount_next != 0.0 && last.next_state != tr.state {
                return Err(Error::ContractViolation(format!(
                    "transition from {} does not continue the stream (expected {})",
                    tr.state, last.next_state
                )));
            }
        }
        self.buffer.push_back(tr);
        if self.diverged {
            // divergence halts learning; keep only the chaining context
            while self.buffer.len() > 1 {
                self.buffer.pop_front();
            }
            return Ok(());
        }
        if self.buffer.len() < self.spec.n {
            return Ok(());
        }
        match self.spec.scheme {
            Scheme::Fixed => self.fixed_update(&mut hook),
            Scheme::Mixed => self.mixed_window(&mut hook),
        }
        Ok(())
    }

    /// Fills `self.steps` with the window `buffer[from..n]`.
    fn build_steps(&mut self, from: usize) {
        self.steps.clear();
        let mut prod = 1.0;
        for tr in self.buffer.iter().skip(from).take(self.spec.n - from) {
            let k = self.weights.index(tr.state, tr.action);
            self.steps.push(WeightedStep {
                coef: prod * self.weights.r[k],
                transition: *tr,
            });
            prod *= self.weights.c[k] * tr.discount_next;
        }
    }

    fn weighted_td(&self, theta: &[f64]) -> f64 {
        self.steps
            .iter()
            .map(|w| {
                let t = &w.transition;
                w.coef
                    * (t.reward + t.discount_next * dot(theta, self.phi(t.next_state))
                        - dot(theta, self.phi(t.state)))
            })
            .sum()
    }

    fn advance_trace(&mut self, tr: Transition) {
        if let Some(trace) = self.trace.as_mut() {
            let k = self.weights.index(tr.state, tr.action);
            let g =
                self.spec.trace_weights.trace_discount(tr.discount_next) * self.weights.trace[k];
            trace.advance(g).expect("trace factors are non-negative");
        }
    }

    fn apply(&mut self, anchor: usize, emphasis: f64, td: f64) {
        let scale = self.alpha * emphasis * td;
        if scale != 0.0 {
            let (theta, phi) = (
                &mut self.theta,
                &self.phi[anchor * self.dim..(anchor + 1) * self.dim],
            );
            for (t, p) in theta.iter_mut().zip(phi) {
                *t += scale * p;
            }
        }
        self.updates += 1;
        if is_diverged(&self.theta) {
            self.diverged = true;
        }
    }

    fn fixed_update(&mut self, hook: &mut impl FnMut(&UpdateTerm<'_>, &[f64])) {
        let anchor = self.buffer[0].state;
        let emphasis = match &self.trace {
            Some(trace) => wetd_emphasis(trace.value(), 0.0, self.spec.trace_weights.eta),
            None => 1.0,
        };
        self.build_steps(0);
        hook(
            &UpdateTerm {
                anchor,
                emphasis,
                steps: &self.steps,
            },
            &self.theta,
        );
        let td = self.weighted_td(&self.theta);
        self.apply(anchor, emphasis, td);
        let front = self.buffer.pop_front().expect("buffer holds n transitions");
        self.advance_trace(front);
        self.time += 1;
    }

    fn mixed_window(&mut self, hook: &mut impl FnMut(&UpdateTerm<'_>, &[f64])) {
        let n = self.spec.n;
        if self.spec.frozen_window {
            self.frozen.copy_from_slice(&self.theta);
        }
        for k in 0..n {
            let tr = self.buffer[k];
            let emphasis = match &self.trace {
                Some(trace) => wetd_emphasis(
                    trace.value(),
                    lambda_schedule(self.time + k, n),
                    self.spec.trace_weights.eta,
                ),
                None => 1.0,
            };
            self.build_steps(k);
            let base = if self.spec.frozen_window {
                &self.frozen
            } else {
                &self.theta
            };
            hook(
                &UpdateTerm {
                    anchor: tr.state,
                    emphasis,
                    steps: &self.steps,
                },
                base,
            );
            let td = self.weighted_td(base);
            self.apply(tr.state, emphasis, td);
            self.advance_trace(tr);
            if self.diverged {
                break;
            }
        }
        self.buffer.drain(..n.min(self.buffer.len()));
        self.time += n;
    }
}

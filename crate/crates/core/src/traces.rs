//! Emphatic trace recursions and the window schedules behind mixed targets.
//!
//! Two recursion shapes cover every trace in the algorithm family:
//!
//! * follow-on: `F_t = g_{t-1} F_{t-1} + 1`
//! * n-step (NETD): `F_t = (g_{t-n} ... g_{t-1}) F_{t-n} + 1`, with
//!   `F_0 = ... = F_{n-1} = 1`
//!
//! where the step factor `g_j = gamma_{j+1} w_j` pairs the discount on
//! entering `S_{j+1}` with the transformed IS weight of step `j`. Which
//! weight is used (raw, clipped, or the V-trace policy ratio) is decided by
//! [`TraceWeights`] when an algorithm is resolved, so this module only sees
//! the final factors.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Followon,
    Netd,
}

/// Mutable trace memory for one experience stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EmphasisState {
    kind: TraceKind,
    /// Current `F_t`.
    scalar: f64,
    /// NETD: `F_{t-n+1} ..= F_t`, oldest first.
    delay_line: VecDeque<f64>,
    /// NETD: the last (up to) `n` step factors, oldest first.
    factors: VecDeque<f64>,
    n: usize,
    /// Time index of `scalar`.
    t: usize,
    max_trace: Option<f64>,
}

impl EmphasisState {
    pub fn followon() -> Self {
        Self {
            kind: TraceKind::Followon,
            scalar: 1.0,
            delay_line: VecDeque::new(),
            factors: VecDeque::new(),
            n: 1,
            t: 0,
            max_trace: None,
        }
    }

    pub fn netd(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ContractViolation(
                "NETD window n must be >= 1".into(),
            ));
        }
        Ok(Self {
            kind: TraceKind::Netd,
            scalar: 1.0,
            delay_line: std::iter::repeat_n(1.0, n).collect(),
            factors: VecDeque::with_capacity(n),
            n,
            t: 0,
            max_trace: None,
        })
    }

    pub fn new(kind: TraceKind, n: usize) -> Result<Self> {
        match kind {
            TraceKind::Followon => Ok(Self::followon()),
            TraceKind::Netd => Self::netd(n),
        }
    }

    /// Hard ceiling on stored trace values.
    pub fn with_max_trace(mut self, cap: Option<f64>) -> Self {
        self.max_trace = cap;
        self
    }

    pub fn kind(&self) -> TraceKind {
        self.kind
    }

    /// The trace value at the current time index.
    #[inline]
    pub fn value(&self) -> f64 {
        self.scalar
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn window(&self) -> usize {
        self.n
    }

    pub fn delay_line(&self) -> impl Iterator<Item = f64> + '_ {
        self.delay_line.iter().copied()
    }

    #[inline]
    fn cap(&self, f: f64) -> f64 {
        match self.max_trace {
            Some(c) if f > c => c,
            _ => f,
        }
    }

    /// `F_t = gamma_t * rho_prev * F_{t-1} + 1`. Both inputs must already be
    /// transformed (clipped weight, or `beta` in place of the discount).
    pub fn followon_step(&mut self, gamma_t: f64, rho_prev: f64) -> Result<f64> {
        if self.kind != TraceKind::Followon {
            return Err(Error::ContractViolation(
                "followon_step on an NETD trace".into(),
            ));
        }
        if !(0.0..=1.0).contains(&gamma_t) || rho_prev < 0.0 || rho_prev.is_nan() {
            return Err(Error::ContractViolation(format!(
                "followon_step needs gamma in [0,1] and rho >= 0, got ({gamma_t}, {rho_prev})"
            )));
        }
        self.scalar = self.cap(gamma_t * rho_prev * self.scalar + 1.0);
        self.t += 1;
        Ok(self.scalar)
    }

    /// `F_t = block_weight * F_{t-n} + 1` where `block_weight` is the product
    /// of the last `n` step factors. Only defined once `t >= n`; earlier
    /// values are fixed at 1.
    pub fn netd_step(&mut self, block_weight: f64) -> Result<f64> {
        if self.kind != TraceKind::Netd {
            return Err(Error::ContractViolation(
                "netd_step on a follow-on trace".into(),
            ));
        }
        if self.t + 1 < self.n {
            return Err(Error::ContractViolation(format!(
                "netd_step at t = {} before n = {} weights were accumulated",
                self.t + 1,
                self.n
            )));
        }
        if block_weight < 0.0 || block_weight.is_nan() {
            return Err(Error::ContractViolation(format!(
                "negative block weight {block_weight}"
            )));
        }
        let oldest = self
            .delay_line
            .pop_front()
            .expect("delay line holds n values");
        let f = self.cap(block_weight * oldest + 1.0);
        self.delay_line.push_back(f);
        self.scalar = f;
        self.t += 1;
        Ok(f)
    }

    /// Feeds the step factor `g_t = gamma_{t+1} w_t` of the transition
    /// leaving `S_t` and moves to `F_{t+1}`, which is returned.
    pub fn advance(&mut self, factor: f64) -> Result<f64> {
        match self.kind {
            TraceKind::Followon => {
                if factor < 0.0 || factor.is_nan() {
                    return Err(Error::ContractViolation(format!(
                        "negative trace factor {factor}"
                    )));
                }
                self.scalar = self.cap(factor * self.scalar + 1.0);
                self.t += 1;
                Ok(self.scalar)
            }
            TraceKind::Netd => {
                if self.factors.len() == self.n {
                    self.factors.pop_front();
                }
                self.factors.push_back(factor);
                if self.t + 1 < self.n {
                    // warm-up: F_1 .. F_{n-1} are initialized to 1
                    self.delay_line.pop_front();
                    self.delay_line.push_back(1.0);
                    self.scalar = 1.0;
                    self.t += 1;
                    Ok(1.0)
                } else {
                    let block: f64 = self.factors.iter().product();
                    self.netd_step(block)
                }
            }
        }
    }
}

/// How IS ratios are transformed before entering a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RhoTransform {
    /// `rho`
    Raw,
    /// `min(rho_bar, rho)`
    Clipped { rho_bar: f64 },
    /// `pi_rho_bar(a|s) / mu(a|s)`; the threshold comes from the target clips.
    VtracePolicy,
}

/// Trace-side configuration of an emphatic algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceWeights {
    pub rho_transform: RhoTransform,
    /// Replaces the discount inside the recursion (terminal zeros are kept).
    #[serde(default)]
    pub beta_override: Option<f64>,
    /// Interpolation between 1 and `F_t` in the windowed emphasis.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Optional hard ceiling on the trace value.
    #[serde(default)]
    pub max_trace: Option<f64>,
}

fn default_eta() -> f64 {
    1.0
}

impl Default for TraceWeights {
    fn default() -> Self {
        Self {
            rho_transform: RhoTransform::Raw,
            beta_override: None,
            eta: 1.0,
            max_trace: None,
        }
    }
}

impl TraceWeights {
    pub fn validate(&self) -> Result<()> {
        if let RhoTransform::Clipped { rho_bar } = self.rho_transform {
            if !(rho_bar > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "trace clip rho_bar must be > 0, got {rho_bar}"
                )));
            }
        }
        if let Some(beta) = self.beta_override {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidSpec(format!(
                    "beta must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if let Some(c) = self.max_trace {
            if !(c >= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "max_trace must be >= 1, got {c}"
                )));
            }
        }
        Ok(())
    }

    /// The discount actually used inside the recursion.
    #[inline]
    pub fn trace_discount(&self, gamma_next: f64) -> f64 {
        match self.beta_override {
            Some(beta) if gamma_next > 0.0 => beta,
            _ => gamma_next,
        }
    }
}

/// Windowed emphasis `M = 1 - eta (1 - lambda) + eta (1 - lambda) F`.
///
/// With `eta = 1` this is `lambda + (1 - lambda) F`.
#[inline]
pub fn wetd_emphasis(followon: f64, lambda_t: f64, eta: f64) -> f64 {
    let w = eta * (1.0 - lambda_t);
    1.0 - w + w * followon
}

/// `0` on window boundaries (`t mod n == 0`), `1` elsewhere.
#[inline]
pub fn lambda_schedule(t: usize, n: usize) -> f64 {
    debug_assert!(n >= 1);
    if t.is_multiple_of(n) {
        0.0
    } else {
        1.0
    }
}

/// `0` on window boundaries, `min(rho_bar, rho_t) / rho_t` elsewhere.
pub fn lambda_v_schedule(t: usize, n: usize, rho_t: f64, rho_bar: f64) -> Result<f64> {
    if t.is_multiple_of(n) {
        return Ok(0.0);
    }
    if !(rho_t > 0.0) {
        return Err(Error::ContractViolation(format!(
            "lambda_v needs rho_t > 0 off window boundaries (t = {t}, rho = {rho_t})"
        )));
    }
    Ok(rho_t.min(rho_bar) / rho_t)
}

/// `nu(s) = sum_a min(rho_bar mu(a|s), pi(a|s))`, the normalizer of the
/// clipped V-trace policy.
pub fn vtrace_normalizer(pi: &Policy, mu: &Policy, rho_bar: f64, s: usize) -> f64 {
    pi.row(s)
        .iter()
        .zip(mu.row(s))
        .map(|(&p, &m)| (rho_bar * m).min(p))
        .sum()
}

/// `rho^v = min(rho_bar, pi/mu) / nu(s)`, the ratio between the V-trace
/// fixed-point policy and the behavior policy.
pub fn rho_v(pi: &Policy, mu: &Policy, rho_bar: f64, s: usize, a: usize) -> Result<f64> {
    if !(rho_bar > 0.0) {
        return Err(Error::ContractViolation(format!(
            "rho_bar must be > 0, got {rho_bar}"
        )));
    }
    let rho = crate::mdp::is_ratio(pi, mu, s, a)?;
    let nu = vtrace_normalizer(pi, mu, rho_bar, s);
    if nu <= 0.0 {
        return Err(Error::DegeneratePolicy { state: s });
    }
    Ok(rho.min(rho_bar) / nu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn followon_fixed_point_on_policy() {
        let mut f = EmphasisState::followon();
        for _ in 0..3000 {
            f.followon_step(0.99, 1.0).unwrap();
        }
        assert!((f.value() - 100.0).abs() < 1e-6, "{}", f.value());
    }

    #[test]
    fn followon_resets_on_zero_discount() {
        let mut f = EmphasisState::followon();
        for _ in 0..10 {
            f.followon_step(0.9, 2.0).unwrap();
        }
        assert!(f.value() > 1.0);
        assert_eq!(f.followon_step(0.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn followon_alternating_weights() {
        // rho = 2, 0, 2, 0, ...; F_t = 0.9 rho_{t-1} F_{t-1} + 1
        let mut f = EmphasisState::followon();
        let mut oracle = 1.0_f64;
        for t in 1..=20 {
            let rho_prev = if (t - 1) % 2 == 0 { 2.0 } else { 0.0 };
            oracle = 0.9 * rho_prev * oracle + 1.0;
            let v = f.followon_step(0.9, rho_prev).unwrap();
            assert_eq!(v, oracle);
            // after a zero weight the trace is 1, after a 2 it is 2.8
            let expect = if t % 2 == 0 { 1.0 } else { 2.8 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn followon_rejects_bad_inputs() {
        let mut f = EmphasisState::followon();
        assert!(f.followon_step(1.2, 1.0).is_err());
        assert!(f.followon_step(0.9, -1.0).is_err());
        assert!(f.netd_step(1.0).is_err());
    }

    #[test]
    fn netd_fixed_points() {
        for (n, expect) in [(10, 10.46), (30, 3.84), (100, 1.58)] {
            let mut f = EmphasisState::netd(n).unwrap();
            for _ in 0..200_000 {
                f.advance(0.99).unwrap();
            }
            let exact = 1.0 / (1.0 - 0.99_f64.powi(n as i32));
            assert!((f.value() - exact).abs() < 1e-6);
            assert!((f.value() - expect).abs() < 5e-3);
        }
    }

    #[test]
    fn netd_warmup_guard() {
        let mut f = EmphasisState::netd(3).unwrap();
        assert!(matches!(f.netd_step(0.5), Err(Error::ContractViolation(_))));
        assert_eq!(f.advance(0.9).unwrap(), 1.0);
        assert_eq!(f.advance(0.9).unwrap(), 1.0);
        // F_3 = 0.9^3 F_0 + 1
        assert!((f.advance(0.9).unwrap() - (0.729 + 1.0)).abs() < 1e-15);
        // direct block step once warmed up; zero block resets
        assert_eq!(f.netd_step(0.0).unwrap(), 1.0);
    }

    #[test]
    fn netd_n1_matches_followon() {
        let factors = [1.8, 0.0, 1.8, 1.8, 0.45, 0.9, 0.0, 2.0];
        let mut a = EmphasisState::followon();
        let mut b = EmphasisState::netd(1).unwrap();
        for &g in &factors {
            assert_eq!(a.advance(g).unwrap(), b.advance(g).unwrap());
        }
    }

    #[test]
    fn max_trace_caps_values() {
        let mut f = EmphasisState::followon().with_max_trace(Some(5.0));
        for _ in 0..100 {
            f.advance(2.0).unwrap();
        }
        assert_eq!(f.value(), 5.0);
    }

    #[test]
    fn wetd_emphasis_cases() {
        assert_eq!(wetd_emphasis(123.0, 1.0, 0.3), 1.0);
        assert_eq!(wetd_emphasis(7.3, 0.0, 1.0), 7.3);
        assert!((wetd_emphasis(7.3, 0.0, 0.5) - 4.15).abs() < 1e-15);
    }

    #[test]
    fn lambda_schedules() {
        let l: Vec<f64> = (0..9).map(|t| lambda_schedule(t, 4)).collect();
        assert_eq!(l, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert!((0..10).all(|t| lambda_schedule(t, 1) == 0.0));
        let n = 7;
        let mean = (0..7000).map(|t| lambda_schedule(t, n)).sum::<f64>() / 7000.0;
        assert!((mean - (1.0 - 1.0 / n as f64)).abs() < 1e-12);

        assert_eq!(lambda_v_schedule(3, 4, 2.0, 1.0).unwrap(), 0.5);
        assert_eq!(lambda_v_schedule(3, 4, 0.7, 1.0).unwrap(), 1.0);
        assert_eq!(lambda_v_schedule(8, 4, 5.0, 1.0).unwrap(), 0.0);
        assert_eq!(lambda_v_schedule(8, 4, 0.0, 1.0).unwrap(), 0.0);
        assert!(lambda_v_schedule(3, 4, 0.0, 1.0).is_err());
    }

    #[test]
    fn rho_v_examples() {
        let mu = Policy::uniform_rows(1, &[0.5, 0.5]).unwrap();
        let pi = Policy::uniform_rows(1, &[1.0, 0.0]).unwrap();
        assert!((vtrace_normalizer(&pi, &mu, 1.0, 0) - 0.5).abs() < 1e-15);
        assert!((rho_v(&pi, &mu, 1.0, 0, 0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(rho_v(&pi, &mu, 1.0, 0, 1).unwrap(), 0.0);
        assert!((rho_v(&mu, &mu, 1.0, 0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((rho_v(&mu, &mu, 3.0, 0, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rho_v_degenerate() {
        let mu = Policy::uniform_rows(1, &[1.0, 0.0]).unwrap();
        let pi = Policy::uniform_rows(1, &[0.0, 1.0]).unwrap();
        assert_eq!(
            rho_v(&pi, &mu, 1.0, 0, 0).unwrap_err(),
            Error::DegeneratePolicy { state: 0 }
        );
    }

    #[test]
    fn trace_weights_validation() {
        let mut w = TraceWeights::default();
        assert!(w.validate().is_ok());
        w.beta_override = Some(1.0);
        assert!(w.validate().is_err());
        w.beta_override = Some(0.5);
        w.eta = 0.0;
        assert!(w.validate().is_err());
        w.eta = 0.5;
        w.rho_transform = RhoTransform::Clipped { rho_bar: 0.0 };
        assert!(w.validate().is_err());
        w.rho_transform = RhoTransform::Clipped { rho_bar: 1.0 };
        assert!(w.validate().is_ok());
        assert_eq!(w.trace_discount(0.9), 0.5);
        assert_eq!(w.trace_discount(0.0), 0.0);
    }
}

//! Learning targets, algorithm specifications and update rules.
//!
//! Every algorithm is an n-step update anchored at `S_t`,
//!
//! ```text
//! theta += alpha * M_t * sum_{i=t}^{t+n-1} (prod_{j=t}^{i-1} c_j gamma_{j+1}) r_i delta_i * phi(S_t)
//! ```
//!
//! and differs only in the emphasis `M_t`, the target weights `c_j`, `r_i`
//! and the weights fed to the trace. [`AlgorithmSpec::resolve`] turns a spec
//! into per-(state, action) tables of those weights.

mod ace;
mod stream;

pub use ace::{AceConfig, ActorCritic, SoftmaxPolicy};
pub use stream::{StreamingLearner, UpdateTerm, WeightedStep};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{is_ratio, Policy, TabularMdp, Transition};
use crate::traces::{rho_v, vtrace_normalizer, RhoTransform, TraceKind, TraceWeights};

/// Divergence threshold on `max |theta_i|`.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Linear value function `V(s) = theta^T phi(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearValueFn {
    pub theta: Vec<f64>,
}

impl LinearValueFn {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            theta: vec![0.0; dim],
        }
    }

    #[inline]
    pub fn value(&self, phi: &[f64]) -> f64 {
        dot(&self.theta, phi)
    }

    pub fn values(&self, mdp: &TabularMdp) -> Vec<f64> {
        (0..mdp.num_states())
            .map(|s| self.value(mdp.phi(s)))
            .collect()
    }

    /// True once any entry is non-finite or exceeds [`DIVERGENCE_THRESHOLD`].
    pub fn is_diverged(&self) -> bool {
        is_diverged(&self.theta)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn is_diverged(theta: &[f64]) -> bool {
    theta
        .iter()
        .any(|x| !x.is_finite() || x.abs() > DIVERGENCE_THRESHOLD)
}

/// `delta = r + gamma' V(s') - V(s)`.
pub fn td_error(v: &LinearValueFn, tr: &Transition, mdp: &TabularMdp) -> f64 {
    tr.reward + tr.discount_next * v.value(mdp.phi(tr.next_state)) - v.value(mdp.phi(tr.state))
}

/// Weighted TD-error sum of an n-step update,
/// `sum_i (prod_{j<i} c_j gamma_{j+1}) r_i delta_i`, for a window starting
/// at the anchor.
pub fn weighted_td_sum(
    v: &LinearValueFn,
    window: &[Transition],
    c: &[f64],
    r: &[f64],
    mdp: &TabularMdp,
) -> f64 {
    let mut trace = 1.0;
    let mut total = 0.0;
    for (i, tr) in window.iter().enumerate() {
        total += trace * r[i] * td_error(v, tr, mdp);
        trace *= c[i] * tr.discount_next;
    }
    total
}

fn check_window(window: &[Transition], n: usize, weights: &[&[f64]]) -> Result<()> {
    if window.len() > n {
        return Err(Error::ContractViolation(format!(
            "window of {} transitions exceeds n = {n}",
            window.len()
        )));
    }
    if weights.iter().any(|w| w.len() != window.len()) {
        return Err(Error::ContractViolation(
            "one weight per transition is required".into(),
        ));
    }
    for pair in window.windows(2) {
        if pair[0].discount_next != 0.0 && pair[0].next_state != pair[1].state {
            return Err(Error::ContractViolation(
                "window transitions do not chain".into(),
            ));
        }
    }
    Ok(())
}

/// n-step update direction (before `alpha` and emphasis) with the same
/// weight for the trace product and the TD error.
pub fn nstep_update_direction(
    v: &LinearValueFn,
    window: &[Transition],
    weights: &[f64],
    n: usize,
    mdp: &TabularMdp,
) -> Result<Vec<f64>> {
    nstep_update_direction_clipped(v, window, weights, weights, n, mdp)
}

/// n-step update direction with separate product weights `c` and TD-error
/// weights `r` (V-trace's `c_bar` and `rho_bar` clips).
pub fn nstep_update_direction_clipped(
    v: &LinearValueFn,
    window: &[Transition],
    c: &[f64],
    r: &[f64],
    n: usize,
    mdp: &TabularMdp,
) -> Result<Vec<f64>> {
    check_window(window, n, &[c, r])?;
    let Some(first) = window.first() else {
        return Ok(vec![0.0; v.theta.len()]);
    };
    let scale = weighted_td_sum(v, window, c, r, mdp);
    Ok(mdp.phi(first.state).iter().map(|p| scale * p).collect())
}

/// n-step target `V(S_t) + sum_i (prod_{j<i} c_j gamma_{j+1}) r_i delta_i`.
pub fn nstep_target(
    v: &LinearValueFn,
    window: &[Transition],
    c: &[f64],
    r: &[f64],
    mdp: &TabularMdp,
) -> Result<f64> {
    check_window(window, window.len(), &[c, r])?;
    let Some(first) = window.first() else {
        return Err(Error::ContractViolation("empty window".into()));
    };
    Ok(v.value(mdp.phi(first.state)) + weighted_td_sum(v, window, c, r, mdp))
}

/// V-trace target over a window of at most `n` transitions.
#[allow(clippy::too_many_arguments)]
pub fn vtrace_target(
    v: &LinearValueFn,
    window: &[Transition],
    pi: &Policy,
    mu: &Policy,
    rho_bar: f64,
    c_bar: f64,
    n: usize,
    mdp: &TabularMdp,
) -> Result<f64> {
    if window.len() > n {
        return Err(Error::ContractViolation(format!(
            "window of {} transitions exceeds n = {n}",
            window.len()
        )));
    }
    let mut c = Vec::with_capacity(window.len());
    let mut r = Vec::with_capacity(window.len());
    for tr in window {
        let rho = is_ratio(pi, mu, tr.state, tr.action)?;
        c.push(rho.min(c_bar));
        r.push(rho.min(rho_bar));
    }
    nstep_target(v, window, &c, &r, mdp)
}

/// The V-trace fixed-point policy `min(rho_bar mu, pi) / nu`.
pub fn vtrace_fixed_point_policy(pi: &Policy, mu: &Policy, rho_bar: f64) -> Result<Policy> {
    if pi.num_states() != mu.num_states() || pi.num_actions() != mu.num_actions() {
        return Err(Error::InvalidModel("policy shapes differ".into()));
    }
    let mut rows = Vec::with_capacity(pi.num_states());
    for s in 0..pi.num_states() {
        let nu = vtrace_normalizer(pi, mu, rho_bar, s);
        if nu <= 0.0 {
            return Err(Error::DegeneratePolicy { state: s });
        }
        let mut row: Vec<f64> = pi
            .row(s)
            .iter()
            .zip(mu.row(s))
            .map(|(&p, &m)| (rho_bar * m).min(p) / nu)
            .collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
        rows.push(row);
    }
    Policy::new(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmName {
    #[serde(rename = "nstep-td")]
    NstepTd,
    #[serde(rename = "netd")]
    Netd,
    #[serde(rename = "wetd")]
    Wetd,
    #[serde(rename = "clip-netd")]
    ClipNetd,
    #[serde(rename = "clip-wetd")]
    ClipWetd,
    #[serde(rename = "vtrace")]
    Vtrace,
    #[serde(rename = "nevtrace")]
    Nevtrace,
    #[serde(rename = "wevtrace")]
    Wevtrace,
}

impl AlgorithmName {
    pub const ALL: [AlgorithmName; 8] = [
        AlgorithmName::NstepTd,
        AlgorithmName::Netd,
        AlgorithmName::Wetd,
        AlgorithmName::ClipNetd,
        AlgorithmName::ClipWetd,
        AlgorithmName::Vtrace,
        AlgorithmName::Nevtrace,
        AlgorithmName::Wevtrace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmName::NstepTd => "nstep-td",
            AlgorithmName::Netd => "netd",
            AlgorithmName::Wetd => "wetd",
            AlgorithmName::ClipNetd => "clip-netd",
            AlgorithmName::ClipWetd => "clip-wetd",
            AlgorithmName::Vtrace => "vtrace",
            AlgorithmName::Nevtrace => "nevtrace",
            AlgorithmName::Wevtrace => "wevtrace",
        }
    }

    /// Trace family, or `None` for the two baselines.
    pub fn trace_kind(self) -> Option<TraceKind> {
        match self {
            AlgorithmName::NstepTd | AlgorithmName::Vtrace => None,
            AlgorithmName::Netd | AlgorithmName::ClipNetd | AlgorithmName::Nevtrace => {
                Some(TraceKind::Netd)
            }
            AlgorithmName::Wetd | AlgorithmName::ClipWetd | AlgorithmName::Wevtrace => {
                Some(TraceKind::Followon)
            }
        }
    }

    pub fn is_emphatic(self) -> bool {
        self.trace_kind().is_some()
    }

    /// Uses the clipped V-trace target.
    pub fn uses_vtrace_target(self) -> bool {
        matches!(
            self,
            AlgorithmName::Vtrace | AlgorithmName::Nevtrace | AlgorithmName::Wevtrace
        )
    }

    /// The only update scheme the algorithm runs with, if constrained.
    pub fn required_scheme(self) -> Option<Scheme> {
        match self.trace_kind() {
            Some(TraceKind::Netd) => Some(Scheme::Fixed),
            Some(TraceKind::Followon) => Some(Scheme::Mixed),
            None => None,
        }
    }

    pub fn default_scheme(self) -> Scheme {
        self.required_scheme().unwrap_or(Scheme::Fixed)
    }

    fn default_transform(self) -> RhoTransform {
        match self {
            AlgorithmName::ClipNetd | AlgorithmName::ClipWetd => {
                RhoTransform::Clipped { rho_bar: 1.0 }
            }
            AlgorithmName::Nevtrace | AlgorithmName::Wevtrace => RhoTransform::VtracePolicy,
            _ => RhoTransform::Raw,
        }
    }
}

impl fmt::Display for AlgorithmName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmName::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = AlgorithmName::ALL.iter().map(|a| a.as_str()).collect();
                Error::InvalidSpec(format!(
                    "unknown algorithm `{s}` (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

/// Fixed: every state gets a full n-step target. Mixed: windows of `n`
/// states all bootstrap on the window's last state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fixed,
    Mixed,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Fixed => "fixed",
            Scheme::Mixed => "mixed",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Scheme::Fixed),
            "mixed" => Ok(Scheme::Mixed),
            other => Err(Error::InvalidSpec(format!(
                "unknown scheme `{other}` (expected fixed or mixed)"
            ))),
        }
    }
}

/// Clipping thresholds of the V-trace target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetClips {
    pub rho_bar: f64,
    pub c_bar: f64,
}

impl Default for TargetClips {
    fn default() -> Self {
        Self {
            rho_bar: 1.0,
            c_bar: 1.0,
        }
    }
}

/// One algorithm from the emphatic family, fully parameterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    pub scheme: Scheme,
    pub n: usize,
    #[serde(default)]
    pub trace_weights: TraceWeights,
    #[serde(default)]
    pub target_clips: Option<TargetClips>,
    /// Weight the policy-gradient step by the same emphasis (actor-critic).
    #[serde(default)]
    pub ace: bool,
    /// Mixed scheme only: compute all inner updates of a window from the
    /// window's starting parameters.
    #[serde(default)]
    pub frozen_window: bool,
}

impl AlgorithmSpec {
    /// The algorithm with its default scheme, unit clipping thresholds and
    /// `eta = 1`.
    pub fn new(name: AlgorithmName, n: usize) -> Result<Self> {
        let spec = Self {
            name,
            scheme: name.default_scheme(),
            n,
            trace_weights: TraceWeights {
                rho_transform: name.default_transform(),
                ..TraceWeights::default()
            },
            target_clips: name.uses_vtrace_target().then(TargetClips::default),
            ace: false,
            frozen_window: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(name: &str, n: usize) -> Result<Self> {
        Self::new(name.parse()?, n)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Result<Self> {
        self.scheme = scheme;
        self.validate()?;
        Ok(self)
    }

    /// Sets the trace clip of Clip-NETD/Clip-WETD.
    pub fn with_trace_clip(mut self, rho_bar: f64) -> Result<Self> {
        match self.trace_weights.rho_transform {
            RhoTransform::Clipped { .. } => {
                self.trace_weights.rho_transform = RhoTransform::Clipped { rho_bar };
                self.validate()?;
                Ok(self)
            }
            _ => Err(Error::InvalidSpec(format!(
                "`{}` has no trace clip",
                self.name
            ))),
        }
    }

    pub fn with_target_clips(mut self, rho_bar: f64, c_bar: f64) -> Result<Self> {
        if !self.name.uses_vtrace_target() {
            return Err(Error::InvalidSpec(format!(
                "`{}` does not use the V-trace target",
                self.name
            )));
        }
        self.target_clips = Some(TargetClips { rho_bar, c_bar });
        self.validate()?;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.trace_weights.eta = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: Option<f64>) -> Result<Self> {
        self.trace_weights.beta_override = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_trace(mut self, cap: Option<f64>) -> Result<Self> {
        self.trace_weights.max_trace = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn with_frozen_window(mut self, frozen: bool) -> Self {
        self.frozen_window = frozen;
        self
    }

    pub fn with_ace(mut self, ace: bool) -> Self {
        self.ace = ace;
        self
    }

    /// Short identifier such as `clip-netd` or `wevtrace-ace`.
    pub fn id(&self) -> String {
        if self.ace {
            format!("{}-ace", self.name)
        } else {
            self.name.to_string()
        }
    }

    /// Rejects combinations outside the algorithm family.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be >= 1".into()));
        }
        if let Some(required) = self.name.required_scheme() {
            if required != self.scheme {
                return Err(Error::InvalidSpec(format!(
                    "invalid pair `{}` + `{}`: `{}` is defined only for the {} update scheme",
                    self.name, self.scheme, self.name, required
                )));
            }
        }
        let expected = self.name.default_transform();
        let matches = matches!(
            (expected, self.trace_weights.rho_transform),
            (RhoTransform::Raw, RhoTransform::Raw)
                | (RhoTransform::Clipped { .. }, RhoTransform::Clipped { .. })
                | (RhoTransform::VtracePolicy, RhoTransform::VtracePolicy)
        );
        if !matches {
            return Err(Error::InvalidSpec(format!(
                "invalid pair `{}` + trace transform {:?}",
                self.name, self.trace_weights.rho_transform
            )));
        }
        self.trace_weights.validate()?;
        match (self.name.uses_vtrace_target(), self.target_clips) {
            (true, None) => {
                return Err(Error::InvalidSpec(format!(
                    "`{}` needs target clips (rho_bar, c_bar)",
                    self.name
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidSpec(format!(
                    "`{}` uses the unclipped n-step target; target clips are not allowed",
                    self.name
                )))
            }
            (true, Some(c)) => {
                if !(c.rho_bar > 0.0 && c.c_bar > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "target clips must be positive, got ({}, {})",
                        c.rho_bar, c.c_bar
                    )));
                }
            }
            (false, None) => {}
        }
        if self.frozen_window && self.scheme != Scheme::Mixed {
            return Err(Error::InvalidSpec(
                "frozen_window applies to the mixed scheme only".into(),
            ));
        }
        Ok(())
    }

    /// Per-(state, action) weights for a given target/behavior pair.
    pub fn resolve(&self, pi: &Policy, mu: &Policy) -> Result<ResolvedWeights> {
        self.validate()?;
        ResolvedWeights::new(self, pi, mu)
    }
}

/// Per-(state, action) weight tables of a resolved spec. Pairs with
/// `mu(a|s) = 0` never occur in the data and carry zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedWeights {
    num_actions: usize,
    /// Raw IS ratio.
    pub rho: Vec<f64>,
    /// Weight entering the trace recursion.
    pub trace: Vec<f64>,
    /// Product weight of the target.
    pub c: Vec<f64>,
    /// TD-error weight of the target.
    pub r: Vec<f64>,
}

impl ResolvedWeights {
    fn new(spec: &AlgorithmSpec, pi: &Policy, mu: &Policy) -> Result<Self> {
        if pi.num_states() != mu.num_states() || pi.num_actions() != mu.num_actions() {
            return Err(Error::InvalidModel(
                "target and behavior policies differ in shape".into(),
            ));
        }
        let (ns, na) = (mu.num_states(), mu.num_actions());
        let mut out = Self {
            num_actions: na,
            rho: vec![0.0; ns * na],
            trace: vec![0.0; ns * na],
            c: vec![0.0; ns * na],
            r: vec![0.0; ns * na],
        };
        let clips = spec.target_clips.unwrap_or(TargetClips {
            rho_bar: f64::INFINITY,
            c_bar: f64::INFINITY,
        });
        for s in 0..ns {
            for a in 0..na {
                if mu.prob(s, a) == 0.0 {
                    if pi.prob(s, a) > 0.0 {
                        return Err(Error::CoverageViolation {
                            state: s,
                            action: a,
                        });
                    }
                    continue;
                }
                let rho = is_ratio(pi, mu, s, a)?;
                let k = s * na + a;
                out.rho[k] = rho;
                out.c[k] = rho.min(clips.c_bar);
                out.r[k] = rho.min(clips.rho_bar);
                out.trace[k] = match spec.trace_weights.rho_transform {
                    RhoTransform::Raw => rho,
                    RhoTransform::Clipped { rho_bar } => rho.min(rho_bar),
                    RhoTransform::VtracePolicy => rho_v(pi, mu, clips.rho_bar, s, a)?,
                };
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn index(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_two_state, RIGHT};

    fn tr(state: usize, action: usize, next_state: usize, discount_next: f64) -> Transition {
        Transition {
            state,
            action,
            reward: 0.0,
            next_state,
            discount_next,
        }
    }

    #[test]
    fn td_error_two_state() {
        let (mdp, _, _) = make_two_state();
        let v = LinearValueFn::new(vec![1.0]);
        let t = tr(0, RIGHT, 1, 0.9);
        assert!((td_error(&v, &t, &mdp) - 0.8).abs() < 1e-15);
        assert_eq!(td_error(&LinearValueFn::zeros(1), &t, &mdp), 0.0);
    }

    #[test]
    fn one_step_direction_two_state() {
        let (mdp, _, _) = make_two_state();
        let v = LinearValueFn::new(vec![1.0]);
        let d = nstep_update_direction(&v, &[tr(0, RIGHT, 1, 0.9)], &[2.0], 1, &mdp).unwrap();
        assert!((d[0] - 1.6).abs() < 1e-15);
        assert!(
            nstep_update_direction(&v, &[tr(0, RIGHT, 1, 0.9); 2], &[2.0; 2], 1, &mdp).is_err()
        );
    }

    #[test]
    fn fixed_point_policy_examples() {
        let mu = Policy::uniform_rows(1, &[0.5, 0.5]).unwrap();
        let pi = Policy::uniform_rows(1, &[1.0, 0.0]).unwrap();
        assert_eq!(
            vtrace_fixed_point_policy(&pi, &mu, 1.0).unwrap().row(0),
            &[1.0, 0.0]
        );
        assert_eq!(vtrace_fixed_point_policy(&mu, &mu, 1.0).unwrap(), mu);
        let pi = Policy::uniform_rows(1, &[0.9, 0.1]).unwrap();
        let p = vtrace_fixed_point_policy(&pi, &mu, 1e12).unwrap();
        assert!((p.prob(0, 0) - 0.9).abs() < 1e-15);
        // clipped: min(0.5, 0.9) = 0.5, min(0.5, 0.1) = 0.1
        let p = vtrace_fixed_point_policy(&pi, &mu, 1.0).unwrap();
        assert!((p.prob(0, 0) - 0.5 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn names_round_trip() {
        for name in AlgorithmName::ALL {
            assert_eq!(name.as_str().parse::<AlgorithmName>().unwrap(), name);
            let json = serde_json::to_string(&name).unwrap();
            assert_eq!(json, format!("\"{}\"", name.as_str()));
        }
        assert!("td0".parse::<AlgorithmName>().is_err());
    }

    #[test]
    fn scheme_constraints() {
        let err = AlgorithmSpec::parse("netd", 2)
            .unwrap()
            .with_scheme(Scheme::Mixed)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("netd") && msg.contains("mixed"), "{msg}");
        assert!(AlgorithmSpec::parse("wetd", 2)
            .unwrap()
            .with_scheme(Scheme::Fixed)
            .is_err());
        assert!(AlgorithmSpec::parse("nstep-td", 2)
            .unwrap()
            .with_scheme(Scheme::Mixed)
            .is_ok());
        assert!(AlgorithmSpec::parse("vtrace", 2)
            .unwrap()
            .with_scheme(Scheme::Mixed)
            .is_ok());
        assert!(AlgorithmSpec::parse("netd", 0).is_err());
        assert!(AlgorithmSpec::parse("netd", 1)
            .unwrap()
            .with_target_clips(1.0, 1.0)
            .is_err());
        assert!(AlgorithmSpec::parse("netd", 1)
            .unwrap()
            .with_trace_clip(1.0)
            .is_err());
        assert!(AlgorithmSpec::parse("clip-netd", 1)
            .unwrap()
            .with_trace_clip(0.5)
            .is_ok());
    }

    #[test]
    fn resolved_two_state_tables() {
        let (_, pi, mu) = make_two_state();
        let spec = AlgorithmSpec::parse("nevtrace", 1).unwrap();
        let w = spec.resolve(&pi, &mu).unwrap();
        let k = w.index(0, RIGHT);
        assert_eq!((w.rho[k], w.c[k], w.r[k], w.trace[k]), (2.0, 1.0, 1.0, 2.0));
        let spec = AlgorithmSpec::parse("clip-wetd", 1).unwrap();
        let w = spec.resolve(&pi, &mu).unwrap();
        assert_eq!((w.rho[k], w.c[k], w.r[k], w.trace[k]), (2.0, 2.0, 2.0, 1.0));
    }
}

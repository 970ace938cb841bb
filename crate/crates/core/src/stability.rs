//! Expected-update ("key") matrices and positive-definiteness checks.
//!
//! For a linear update `theta += alpha (b_t - A_t theta)` the expected
//! matrix is `A = Phi^T K Phi` with a state-space key matrix `K`. The
//! expected update is stable when the symmetric part of `A` is positive
//! definite.
//!
//! [`key_matrix`] gives the closed forms for the five named variants;
//! [`expected_key_matrix`] gives the exact `K` of any [`AlgorithmSpec`],
//! and [`monte_carlo_key_matrix`] estimates `A` from a behavior stream.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{BehaviorStream, Environment};
use crate::error::{Error, Result};
use crate::learners::{
    vtrace_fixed_point_policy, AlgorithmName, AlgorithmSpec, Scheme, StreamingLearner,
};
use crate::mdp::{stationary_distribution_named, Policy, TabularMdp};
use crate::traces::{vtrace_normalizer, TraceKind};

/// Eigenvalue threshold for positive definiteness.
pub const PD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Nstep,
    NetdEmphatic,
    Vtrace,
    WevtraceEmphatic,
    NevtraceEmphatic,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Nstep,
        Variant::NetdEmphatic,
        Variant::Vtrace,
        Variant::WevtraceEmphatic,
        Variant::NevtraceEmphatic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Nstep => "nstep",
            Variant::NetdEmphatic => "netd_emphatic",
            Variant::Vtrace => "vtrace",
            Variant::WevtraceEmphatic => "wevtrace_emphatic",
            Variant::NevtraceEmphatic => "nevtrace_emphatic",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.as_str()).collect();
                Error::InvalidSpec(format!(
                    "unknown variant `{s}` (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

/// Options of [`key_matrix_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeyMatrixOptions {
    /// V-trace clip of the TD-error weights (and of the fixed-point policy).
    pub rho_bar: f64,
    /// V-trace clip of the trace product.
    pub c_bar: f64,
    /// State weighting; defaults to the behavior stationary distribution.
    pub weighting: Option<Vec<f64>>,
}

impl Default for KeyMatrixOptions {
    fn default() -> Self {
        Self {
            rho_bar: 1.0,
            c_bar: 1.0,
            weighting: None,
        }
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Key matrix, its feature projection and the stability verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMatrixReport {
    pub variant: Variant,
    pub n: usize,
    pub key_matrix: Vec<Vec<f64>>,
    #[serde(rename = "projected_A")]
    pub projected_a: Vec<Vec<f64>>,
    pub min_sym_eig: f64,
    pub stable: bool,
    /// The closed form drops one `N` factor (NEVtrace only).
    pub approximate: bool,
    /// Diagonal of the emphatic weighting, when the variant has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emphasis: Option<Vec<f64>>,
    /// Exact key matrix of the streaming algorithm, for approximate forms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_key_matrix: Option<Vec<Vec<f64>>>,
    /// `max |K_exact - K|` for approximate forms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximation_gap: Option<f64>,
}

impl KeyMatrixReport {
    fn build(variant: Variant, n: usize, key: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<Self> {
        let a = project(key, phi);
        let (stable, min_sym_eig) = is_positive_definite(&a)?;
        Ok(Self {
            variant,
            n,
            key_matrix: to_rows(key),
            projected_a: to_rows(&a),
            min_sym_eig,
            stable,
            approximate: false,
            emphasis: None,
            exact_key_matrix: None,
            approximation_gap: None,
        })
    }

    pub fn key(&self) -> DMatrix<f64> {
        let n = self.key_matrix.len();
        DMatrix::from_fn(n, n, |i, j| self.key_matrix[i][j])
    }

    pub fn projected(&self) -> DMatrix<f64> {
        let n = self.projected_a.len();
        DMatrix::from_fn(n, n, |i, j| self.projected_a[i][j])
    }
}

/// `Phi^T K Phi`.
pub fn project(key: &DMatrix<f64>, phi: &DMatrix<f64>) -> DMatrix<f64> {
    phi.transpose() * key * phi
}

/// Positive definiteness of a (possibly nonsymmetric) matrix through its
/// symmetric part: returns the verdict and the smallest eigenvalue of
/// `(A + A^T) / 2`.
pub fn is_positive_definite(a: &DMatrix<f64>) -> Result<(bool, f64)> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::EigenFailure(format!(
            "matrix is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure("matrix has non-finite entries".into()));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric eigen-solver did not converge".into()))?;
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok((min > PD_TOL, min))
}

/// Diagonal-dominance sufficient condition for positive definiteness:
/// positive diagonal, non-positive off-diagonal, positive row and column
/// sums.
pub fn diagonally_dominant_pd(k: &DMatrix<f64>, tol: f64) -> bool {
    let n = k.nrows();
    (0..n).all(|i| k[(i, i)] > 0.0)
        && (0..n).all(|i| (0..n).all(|j| i == j || k[(i, j)] <= tol))
        && k.row_iter().all(|r| r.sum() > -tol)
        && k.column_iter().all(|c| c.sum() > tol)
}

pub fn mat_pow(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

fn diag(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(v)
}

/// Solves `(I - B^T) f = d`, the fixed-point equation `f = d + B^T f` of an
/// emphatic weighting whose trace accumulates the one-block matrix `B`.
pub fn emphatic_weighting(block: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    let n = block.nrows();
    let m = DMatrix::identity(n, n) - block.transpose();
    let f = m.lu().solve(d).ok_or_else(|| {
        Error::NonContractive("I - B^T is singular in the emphatic weighting".into())
    })?;
    if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::NonContractive(
            "emphatic weighting has no non-negative solution (trace has no finite mean)".into(),
        ));
    }
    Ok(f)
}

/// `f = (I - ((P_pi Gamma)^n)^T)^{-1} d`, the NETD weighting.
pub fn netd_emphasis_vector(
    mdp: &TabularMdp,
    pi: &Policy,
    d: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    let pg = mdp.state_transition_matrix(pi) * mdp.discount_matrix();
    let f = emphatic_weighting(&mat_pow(&pg, n), &DVector::from_column_slice(d))?;
    Ok(f.iter().copied().collect())
}

/// `f^v = (I - (P_rho_bar Gamma)^T)^{-1} d`, the WEVtrace weighting.
pub fn wevtrace_emphasis_vector(
    mdp: &TabularMdp,
    pi: &Policy,
    mu: &Policy,
    d: &[f64],
    rho_bar: f64,
) -> Result<Vec<f64>> {
    let p = mdp.state_transition_matrix(&vtrace_fixed_point_policy(pi, mu, rho_bar)?);
    let f = emphatic_weighting(&(p * mdp.discount_matrix()), &DVector::from_column_slice(d))?;
    Ok(f.iter().copied().collect())
}

/// `nu(s)` for every state.
pub fn nu_vector(pi: &Policy, mu: &Policy, rho_bar: f64) -> Vec<f64> {
    (0..pi.num_states())
        .map(|s| vtrace_normalizer(pi, mu, rho_bar, s))
        .collect()
}

/// Exact expected key matrix of a streaming algorithm under the state
/// weighting `d`, together with the emphatic weighting it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedKey {
    pub key: DMatrix<f64>,
    /// `d(s) E[F_t | S_t = s]` (equal to `d` for baselines).
    pub emphasis: DVector<f64>,
}

/// Exact `K` with `A = Phi^T K Phi` for any spec:
///
/// ```text
/// E_m = sum_{j<m} (C Gamma)^j (diag(R 1) - R Gamma)
/// fixed: K = W E_n
/// mixed: K = (1/n) [W E_n + D sum_{m=1}^{n-1} E_m]
/// ```
///
/// with `C`, `R` and `T` the behavior-weighted transition matrices of the
/// target product weights, the TD-error weights and the trace weights, and
/// `W = diag((1 - eta) d + eta f)`. `f` solves `f = d + B^T f` with
/// `B = (T Gamma_trace)^n` for NETD-family traces and `B = T Gamma_trace`
/// for follow-on traces. A `max_trace` ceiling is not modelled.
pub fn expected_key_matrix(
    mdp: &TabularMdp,
    pi: &Policy,
    mu: &Policy,
    d: &[f64],
    spec: &AlgorithmSpec,
) -> Result<ExpectedKey> {
    let w = spec.resolve(pi, mu)?;
    let ns = mdp.num_states();
    if d.len() != ns {
        return Err(Error::InvalidModel(
            "weighting length does not match the state count".into(),
        ));
    }
    let c = mdp.weighted_transition_matrix(|s, a| mu.prob(s, a) * w.c[w.index(s, a)]);
    let r = mdp.weighted_transition_matrix(|s, a| mu.prob(s, a) * w.r[w.index(s, a)]);
    let t = mdp.weighted_transition_matrix(|s, a| mu.prob(s, a) * w.trace[w.index(s, a)]);
    let gamma = mdp.discount_matrix();
    let gamma_trace = DMatrix::from_diagonal(&DVector::from_iterator(
        ns,
        mdp.discounts()
            .iter()
            .map(|&g| spec.trace_weights.trace_discount(g)),
    ));
    let one_step = DMatrix::from_diagonal(&r.column_sum()) - &r * &gamma;
    let cg = &c * &gamma;
    let n = spec.n;
    // e[m] = E_m for m = 0..=n
    let mut e = Vec::with_capacity(n + 1);
    e.push(DMatrix::zeros(ns, ns));
    let mut power = DMatrix::identity(ns, ns);
    for m in 1..=n {
        let next = &e[m - 1] + &power * &one_step;
        e.push(next);
        power = &power * &cg;
    }
    let dv = DVector::from_column_slice(d);
    let emphasis = match spec.name.trace_kind() {
        None => dv.clone(),
        Some(TraceKind::Netd) => emphatic_weighting(&mat_pow(&(&t * &gamma_trace), n), &dv)?,
        Some(TraceKind::Followon) => emphatic_weighting(&(&t * &gamma_trace), &dv)?,
    };
    let eta = if spec.name.is_emphatic() {
        spec.trace_weights.eta
    } else {
        1.0
    };
    let weight = diag(&(&dv * (1.0 - eta) + &emphasis * eta));
    let key = match spec.scheme {
        Scheme::Fixed => &weight * &e[n],
        Scheme::Mixed => {
            let mut rest = DMatrix::zeros(ns, ns);
            for em in &e[1..n] {
                rest += em;
            }
            (&weight * &e[n] + diag(&dv) * rest) / n as f64
        }
    };
    Ok(ExpectedKey { key, emphasis })
}

/// Closed-form key matrix of `variant` under the behavior stationary
/// distribution, with unit V-trace clips.
pub fn key_matrix(
    mdp: &TabularMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
    variant: Variant,
) -> Result<KeyMatrixReport> {
    key_matrix_with(mdp, pi, mu, n, variant, &KeyMatrixOptions::default())
}

/// Closed forms:
///
/// * `nstep`: `D (I - (P Gamma)^n)`
/// * `netd_emphatic`: `F (I - (P Gamma)^n)`, `f = (I - ((P Gamma)^n)^T)^{-1} d`
/// * `vtrace`: exact fixed-scheme V-trace matrix; `N D (I - P_rho Gamma)` at `n = 1`
/// * `wevtrace_emphatic` (`n = 1`): `N F^v (I - P_rho Gamma)`
/// * `nevtrace_emphatic`: `F (I - N^n (P_rho Gamma)^n)` with
///   `f = (I - (N^n (P_rho Gamma)^n)^T)^{-1} d`; flagged approximate and
///   compared against the exact NEVtrace matrix.
///
/// `(P Gamma)^n` equals `P^n Gamma^n` when the discount is uniform.
pub fn key_matrix_with(
    mdp: &TabularMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
    variant: Variant,
    opts: &KeyMatrixOptions,
) -> Result<KeyMatrixReport> {
    if n == 0 {
        return Err(Error::InvalidSpec("n must be >= 1".into()));
    }
    let ns = mdp.num_states();
    let d = match &opts.weighting {
        Some(d) => d.clone(),
        None => stationary_distribution_named(mdp, mu, "behavior")?,
    };
    let dv = DVector::from_column_slice(&d);
    let phi = mdp.feature_matrix();
    let gamma = mdp.discount_matrix();
    let eye = DMatrix::<f64>::identity(ns, ns);
    match variant {
        Variant::Nstep => {
            let pg = mdp.state_transition_matrix(pi) * &gamma;
            let key = diag(&dv) * (&eye - mat_pow(&pg, n));
            KeyMatrixReport::build(variant, n, &key, &phi)
        }
        Variant::NetdEmphatic => {
            let pgn = mat_pow(&(mdp.state_transition_matrix(pi) * &gamma), n);
            let f = emphatic_weighting(&pgn, &dv)?;
            let key = diag(&f) * (&eye - pgn);
            let mut report = KeyMatrixReport::build(variant, n, &key, &phi)?;
            report.emphasis = Some(f.iter().copied().collect());
            Ok(report)
        }
        Variant::Vtrace => {
            let spec = AlgorithmSpec::new(AlgorithmName::Vtrace, n)?
                .with_target_clips(opts.rho_bar, opts.c_bar)?;
            let exact = expected_key_matrix(mdp, pi, mu, &d, &spec)?;
            KeyMatrixReport::build(variant, n, &exact.key, &phi)
        }
        Variant::WevtraceEmphatic => {
            if n != 1 {
                return Err(Error::InvalidSpec(format!(
                    "the wevtrace_emphatic closed form is defined for n = 1 only (got n = {n})"
                )));
            }
            let p = mdp.state_transition_matrix(&vtrace_fixed_point_policy(pi, mu, opts.rho_bar)?);
            let pg = p * &gamma;
            let f = emphatic_weighting(&pg, &dv)?;
            let nu = DVector::from_vec(nu_vector(pi, mu, opts.rho_bar));
            let key = diag(&nu) * diag(&f) * (&eye - pg);
            let mut report = KeyMatrixReport::build(variant, n, &key, &phi)?;
            report.emphasis = Some(f.iter().copied().collect());
            Ok(report)
        }
        Variant::NevtraceEmphatic => {
            let p = mdp.state_transition_matrix(&vtrace_fixed_point_policy(pi, mu, opts.rho_bar)?);
            let nu = DVector::from_vec(nu_vector(pi, mu, opts.rho_bar));
            let nu_n = DVector::from_iterator(ns, nu.iter().map(|x| x.powi(n as i32)));
            let block = diag(&nu_n) * mat_pow(&(p * &gamma), n);
            let f = emphatic_weighting(&block, &dv)?;
            let key = diag(&f) * (&eye - block);
            let spec = AlgorithmSpec::new(AlgorithmName::Nevtrace, n)?
                .with_target_clips(opts.rho_bar, opts.c_bar)?;
            let exact = expected_key_matrix(mdp, pi, mu, &d, &spec)?;
            let mut report = KeyMatrixReport::build(variant, n, &key, &phi)?;
            report.approximate = true;
            report.emphasis = Some(f.iter().copied().collect());
            report.approximation_gap = Some((&exact.key - &key).amax());
            report.exact_key_matrix = Some(to_rows(&exact.key));
            Ok(report)
        }
    }
}

/// Lower bounds on the column sums of `D_mu (I - (P_pi Gamma)^n)`:
///
/// ```text
/// margin_i = d_pi^T [I - (P Gamma)^n]_i - ||d_mu - d_pi||_inf ||[I - (P Gamma)^n]_i||_1
/// ```
///
/// All-positive margins certify positive column sums.
pub fn safety_margin(mdp: &TabularMdp, pi: &Policy, mu: &Policy, n: usize) -> Result<Vec<f64>> {
    let d_pi = DVector::from_vec(stationary_distribution_named(mdp, pi, "target")?);
    let d_mu = DVector::from_vec(stationary_distribution_named(mdp, mu, "behavior")?);
    let ns = mdp.num_states();
    let m = DMatrix::identity(ns, ns)
        - mat_pow(
            &(mdp.state_transition_matrix(pi) * mdp.discount_matrix()),
            n,
        );
    let gap = (&d_mu - &d_pi).amax();
    Ok((0..ns)
        .map(|i| {
            let col = m.column(i);
            d_pi.dot(&col) - gap * col.iter().map(|x| x.abs()).sum::<f64>()
        })
        .collect())
}

/// Monte-Carlo estimate of `A` with batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    pub samples: usize,
}

/// Averages `M_t phi(S_t) [sum_i coef_i (phi(S_i) - gamma_{i+1} phi(S_{i+1}))]^T`
/// along one behavior stream of `steps` transitions, using the same update
/// terms as the streaming learner.
pub fn monte_carlo_key_matrix<R: Rng>(
    env: &Environment,
    spec: &AlgorithmSpec,
    steps: usize,
    rng: R,
) -> Result<MonteCarloEstimate> {
    const BATCHES: usize = 50;
    let mdp = &env.mdp;
    let dim = mdp.feature_dim();
    let mut learner =
        StreamingLearner::new(spec, mdp, &env.target, &env.behavior, vec![0.0; dim], 0.0)?;
    let mut stream = BehaviorStream::new(env, rng);
    let batch_len = (steps / BATCHES).max(1);
    let mut batch = DMatrix::<f64>::zeros(dim, dim);
    let mut batch_count = 0usize;
    let mut batch_means: Vec<DMatrix<f64>> = Vec::with_capacity(BATCHES + 1);
    let mut total = DMatrix::<f64>::zeros(dim, dim);
    let mut samples = 0usize;
    let mut diff = vec![0.0; dim];
    for _ in 0..steps {
        let tr = stream.next_transition();
        learner.push_with(tr, |term, _| {
            diff.iter_mut().for_each(|x| *x = 0.0);
            for w in term.steps {
                let t = &w.transition;
                let (a, b) = (mdp.phi(t.state), mdp.phi(t.next_state));
                for i in 0..dim {
                    diff[i] += w.coef * (a[i] - t.discount_next * b[i]);
                }
            }
            let anchor = mdp.phi(term.anchor);
            for i in 0..dim {
                let ai = term.emphasis * anchor[i];
                if ai == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    batch[(i, j)] += ai * diff[j];
                }
            }
            batch_count += 1;
        })?;
        if batch_count >= batch_len {
            total += &batch;
            samples += batch_count;
            batch_means.push(&batch / batch_count as f64);
            batch.fill(0.0);
            batch_count = 0;
        }
    }
    if batch_count > 0 {
        total += &batch;
        samples += batch_count;
    }
    if samples == 0 {
        return Err(Error::ContractViolation(
            "no complete update window in the stream".into(),
        ));
    }
    let mean = total / samples as f64;
    let k = batch_means.len();
    let std_err = if k > 1 {
        let mut var = DMatrix::<f64>::zeros(dim, dim);
        for b in &batch_means {
            let dlt = b - &mean;
            var += dlt.component_mul(&dlt);
        }
        (var / ((k - 1) * k) as f64).map(f64::sqrt)
    } else {
        DMatrix::from_element(dim, dim, f64::INFINITY)
    };
    Ok(MonteCarloEstimate {
        mean,
        std_err,
        samples,
    })
}

//! Sparsity-restricted likelihood maximisation by iterative hard thresholding.
//!
//! Each outer iteration takes a gradient step of size `nu` from the current
//! iterate and keeps the `k` largest entries (or `k` largest groups by
//! Euclidean norm). The step size starts from `nu0` at every iteration and is
//! shrunk by `u_rate` until the thresholded candidate does not decrease the
//! log-likelihood, so the recorded likelihood sequence is non-decreasing.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmleError};
use crate::glm::{loglik_at, CoefVector, Dataset, Family, GroupMap};

/// How the initial step size `nu0 = 1/u0` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum StepInit {
    /// `1 / ||X||_inf^2` (maximum absolute row sum, squared).
    InfNorm,
    /// `c / lambda_max(X^T X)` where `c` bounds the inverse curvature of the
    /// family (4 for binomial, 1 otherwise). `lambda_max` comes from power
    /// iteration.
    Spectral,
    /// `c / max_j ||x_j||^2`, the largest step that is safe for a single
    /// coordinate. The u-search shrinks it as needed.
    ColumnNorm,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreeningConfig {
    /// Number of retained features; categorical groups count once.
    pub k: usize,
    /// Feature ids forced into the retained set.
    pub keyset: Vec<usize>,
    /// Warm start; length must equal the number of design columns.
    pub coef_initial: Option<Vec<f64>>,
    pub tol: f64,
    pub fast: bool,
    pub u_rate: f64,
    pub max_iter: usize,
    pub max_u_tries: usize,
    pub standardize: bool,
    /// Fit an unthresholded intercept alongside `beta`.
    pub intercept: bool,
    /// Threshold categorical dummies as whole groups (only meaningful when the
    /// dataset carries a group map).
    pub group: bool,
    pub step_init: StepInit,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            k: 10,
            keyset: Vec::new(),
            coef_initial: None,
            tol: 1e-2,
            fast: false,
            u_rate: 0.5,
            max_iter: 500,
            max_u_tries: 50,
            standardize: false,
            intercept: false,
            group: true,
            step_init: StepInit::ColumnNorm,
        }
    }
}

impl ScreeningConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    /// Checks the knobs against a dataset's dimensions.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let bad = |m: String| Err(SmleError::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.u_rate > 0.0 && self.u_rate < 1.0) {
            return bad(format!("u_rate must lie in (0, 1), got {}", self.u_rate));
        }
        if self.max_iter == 0 || self.max_u_tries == 0 {
            return bad("max_iter and max_u_tries must be positive".into());
        }
        if let StepInit::Fixed(v) = self.step_init {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("fixed step size must be positive, got {v}"));
            }
        }
        let n_features = data.n_features();
        let mut keys = self.keyset.clone();
        keys.sort_unstable();
        keys.dedup();
        if keys.last().is_some_and(|&m| m >= n_features) {
            return bad(format!(
                "keyset index out of range for {n_features} features"
            ));
        }
        if self.keyset_units(data) > self.k {
            return bad(format!(
                "keyset occupies {} units but k = {}",
                self.keyset_units(data),
                self.k
            ));
        }
        if let Some(init) = &self.coef_initial {
            if init.len() != data.p() {
                return Err(SmleError::DimensionMismatch(format!(
                    "coef_initial has length {} but X has {} columns",
                    init.len(),
                    data.p()
                )));
            }
            if init.iter().any(|v| !v.is_finite()) {
                return Err(SmleError::NonFinite("coef_initial".into()));
            }
        }
        Ok(())
    }

    fn uses_groups(&self, data: &Dataset) -> bool {
        self.group && data.groups.is_some()
    }

    fn keyset_units(&self, data: &Dataset) -> usize {
        if self.uses_groups(data) {
            let mut k = self.keyset.clone();
            k.sort_unstable();
            k.dedup();
            k.len()
        } else {
            data.columns_of(&self.keyset).len()
        }
    }
}

/// Keeps the `k` largest units of `v`, always including the units of the
/// `keyset` columns. A unit is a column, or a whole group when `groups` is
/// given; groups are ranked by Euclidean norm. Ties go to the lower index.
/// When `k` is at least the number of units, `v` is returned unchanged.
pub fn hard_threshold(
    v: &[f64],
    k: usize,
    keyset: &[usize],
    groups: Option<&GroupMap>,
) -> CoefVector {
    let n_units = groups.map_or(v.len(), GroupMap::n_groups);
    if k >= n_units {
        return CoefVector::from_vec(v.to_vec());
    }
    let unit_of = |c: usize| groups.map_or(c, |g| g.group_of(c));

    let mut score = vec![0.0_f64; n_units];
    for (c, &x) in v.iter().enumerate() {
        score[unit_of(c)] += x * x;
    }
    let mut keep = vec![false; n_units];
    let mut pinned = 0;
    for &c in keyset {
        let u = unit_of(c);
        if !keep[u] {
            keep[u] = true;
            pinned += 1;
        }
    }
    let budget = k.saturating_sub(pinned);
    let mut free: Vec<usize> = (0..n_units).filter(|&u| !keep[u]).collect();
    if budget < free.len() {
        let by_rank = |a: &usize, b: &usize| score[*b].total_cmp(&score[*a]).then(a.cmp(b));
        if budget > 0 {
            free.select_nth_unstable_by(budget - 1, by_rank);
        }
        free.truncate(budget);
    }
    for u in free {
        keep[u] = true;
    }
    CoefVector::from_vec(
        v.iter()
            .enumerate()
            .map(|(c, &x)| if keep[unit_of(c)] { x } else { 0.0 })
            .collect(),
    )
}

/// `1 / (max_i sum_j |X_ij|)^2`.
pub fn initial_step_size(x: &DMatrix<f64>) -> Result<f64> {
    let norm = x
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(SmleError::InvalidConfig(
            "initial step size needs a nonzero, finite feature matrix".into(),
        ));
    }
    Ok(1.0 / (norm * norm))
}

/// Largest eigenvalue of `X^T X` by power iteration.
pub fn spectral_norm_sq(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    if p == 0 || x.nrows() == 0 {
        return 0.0;
    }
    // Deterministic, non-degenerate start.
    let mut v = DVector::from_fn(p, |j, _| 1.0 + (j % 7) as f64 * 0.1);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let xv = x * &v;
        let mut w = x.tr_mul(&xv);
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        w /= next;
        v = w;
        if (next - lambda).abs() <= 1e-9 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `floor(0.5 * ln(n) * n^(1/3))`, at least 1.
pub fn default_k(n: usize) -> usize {
    let n = n as f64;
    let k = (0.5 * n.ln() * n.cbrt()).floor();
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tol,
    FastLikelihood,
    FastSupport,
    MaxIter,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Tol => "tol",
            StopReason::FastLikelihood => "fast_likelihood",
            StopReason::FastSupport => "fast_support",
            StopReason::MaxIter => "max_iter",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub loglik: f64,
    /// `||beta(t) - beta(t-1)||_2`
    pub step_delta: f64,
    pub u_tries: usize,
    /// Size of the symmetric difference between consecutive supports.
    pub support_changes: usize,
    /// Step size of the accepted candidate (last one tried if none was).
    pub step_size: f64,
    /// False when the u-search ran out of tries and the iterate was kept.
    pub accepted: bool,
    pub intercept: f64,
    /// Nonzero coefficients after this iteration.
    pub beta: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    /// `l(beta(0))`
    pub initial_loglik: f64,
    pub records: Vec<IterRecord>,
}

impl IterTrace {
    pub fn logliks(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.loglik)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ScreeningResult {
    pub beta_final: CoefVector,
    /// Final intercept; `None` when the model has none.
    pub intercept: Option<f64>,
    /// Retained design columns, ascending. Equals the support of `beta_final`.
    pub retained: Vec<usize>,
    /// Retained feature ids (groups), ascending.
    pub retained_features: Vec<usize>,
    pub iterations: usize,
    pub trace: IterTrace,
    pub stop_reason: StopReason,
    pub nu0: f64,
    /// Column means and scales when the design was standardised. The
    /// coefficients are then on the standardised scale.
    pub standardization: Option<Vec<(f64, f64)>>,
    pub config: ScreeningConfig,
}

/// Accepted u-search outcome.
#[derive(Clone, Debug)]
pub struct UStep {
    pub beta: CoefVector,
    pub intercept: f64,
    pub tries: usize,
    pub nu: f64,
    pub loglik: f64,
}

/// Problem view shared by the step routines: the (possibly standardised)
/// design, the active group map and the keyset as design columns.
struct Problem<'a> {
    data: &'a Dataset,
    groups: Option<&'a GroupMap>,
    keyset_columns: Vec<usize>,
    k: usize,
    intercept: bool,
}

struct Gradient {
    beta: DVector<f64>,
    intercept: f64,
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset, cfg: &ScreeningConfig) -> Self {
        let groups = if cfg.uses_groups(data) {
            data.groups.as_ref()
        } else {
            None
        };
        Self {
            data,
            groups,
            keyset_columns: data.columns_of(&cfg.keyset),
            k: cfg.k,
            intercept: cfg.intercept,
        }
    }

    fn threshold(&self, v: &[f64]) -> CoefVector {
        hard_threshold(v, self.k, &self.keyset_columns, self.groups)
    }

    fn theta(&self, beta: &CoefVector, b0: f64) -> DVector<f64> {
        let mut theta = beta.linear_predictor(&self.data.x);
        if b0 != 0.0 {
            theta.add_scalar_mut(b0);
        }
        theta
    }

    fn step_from(&self, beta: &CoefVector, b0: f64, grad: &Gradient, nu: f64) -> (CoefVector, f64) {
        let moved: Vec<f64> = beta
            .values()
            .iter()
            .zip(grad.beta.iter())
            .map(|(b, g)| b + nu * g)
            .collect();
        (self.threshold(&moved), b0 + nu * grad.intercept)
    }

    fn loglik(&self, beta: &CoefVector, b0: f64) -> f64 {
        loglik_at(self.data.family, &self.data.y, &self.theta(beta, b0))
    }

    fn gradient(&self, beta: &CoefVector, b0: f64) -> Result<Gradient> {
        let theta = self.theta(beta, b0);
        let family = self.data.family;
        let resid = DVector::from_iterator(
            theta.len(),
            self.data
                .y
                .iter()
                .zip(theta.iter())
                .map(|(&y, &t)| y - family.mean(t)),
        );
        let g = Gradient {
            beta: self.data.x.tr_mul(&resid),
            intercept: if self.intercept { resid.sum() } else { 0.0 },
        };
        if g.beta.iter().any(|v| !v.is_finite()) || !g.intercept.is_finite() {
            return Err(SmleError::NonFinite("likelihood gradient".into()));
        }
        Ok(g)
    }

    #[allow(clippy::too_many_arguments)]
    fn u_search(
        &self,
        beta: &CoefVector,
        b0: f64,
        loglik: f64,
        grad: &Gradient,
        nu0: f64,
        max_tries: usize,
        u_rate: f64,
    ) -> std::result::Result<UStep, (usize, f64)> {
        let mut nu = nu0;
        for tries in 1..=max_tries {
            let (cand, cand_b0) = self.step_from(beta, b0, grad, nu);
            let cand_ll = self.loglik(&cand, cand_b0);
            if cand_ll >= loglik {
                return Ok(UStep {
                    beta: cand,
                    intercept: cand_b0,
                    tries,
                    nu,
                    loglik: cand_ll,
                });
            }
            if tries < max_tries {
                nu *= u_rate;
            }
        }
        Err((max_tries, nu))
    }
}

fn check_intercept(cfg: &ScreeningConfig, b0: f64) -> Result<()> {
    if !cfg.intercept && b0 != 0.0 {
        return Err(SmleError::InvalidConfig(
            "nonzero intercept given but the configuration has none".into(),
        ));
    }
    Ok(())
}

/// One thresholded gradient step `H_k(beta + nu * l'(beta))`. The intercept,
/// when configured, takes an unthresholded step alongside.
pub fn iht_step(
    data: &Dataset,
    beta_t: &CoefVector,
    intercept: f64,
    nu: f64,
    cfg: &ScreeningConfig,
) -> Result<(CoefVector, f64)> {
    if !(nu > 0.0) {
        return Err(SmleError::InvalidConfig(format!(
            "step size must be positive, got {nu}"
        )));
    }
    check_len(data, beta_t)?;
    check_intercept(cfg, intercept)?;
    let prob = Problem::new(data, cfg);
    let grad = prob.gradient(beta_t, intercept)?;
    Ok(prob.step_from(beta_t, intercept, &grad, nu))
}

/// Backtracking search: shrink `nu` from `nu0` by `cfg.u_rate` until the
/// thresholded step does not decrease the likelihood.
pub fn u_search(
    data: &Dataset,
    beta_t: &CoefVector,
    intercept: f64,
    cfg: &ScreeningConfig,
    nu0: f64,
) -> Result<UStep> {
    if !(nu0 > 0.0) {
        return Err(SmleError::InvalidConfig(format!(
            "step size must be positive, got {nu0}"
        )));
    }
    check_len(data, beta_t)?;
    check_intercept(cfg, intercept)?;
    let prob = Problem::new(data, cfg);
    let grad = prob.gradient(beta_t, intercept)?;
    let ll = prob.loglik(beta_t, intercept);
    prob.u_search(
        beta_t,
        intercept,
        ll,
        &grad,
        nu0,
        cfg.max_u_tries,
        cfg.u_rate,
    )
    .map_err(|(tries, _)| SmleError::StepSizeExhausted {
        tries,
        beta: beta_t.clone(),
    })
}

fn check_len(data: &Dataset, beta: &CoefVector) -> Result<()> {
    if beta.len() != data.p() {
        return Err(SmleError::DimensionMismatch(format!(
            "coefficient vector has length {} but X has {} columns",
            beta.len(),
            data.p()
        )));
    }
    Ok(())
}

/// Stopping rule applied after each completed iteration.
///
/// Always: `step_delta < tol`. With `fast`, additionally
/// `step_delta < sqrt(k) * tol`, a likelihood gain below 1% of the first
/// iteration's gain, or a support unchanged for 10 consecutive iterations.
/// `max_iter` terminates regardless.
pub fn check_stop(trace: &IterTrace, cfg: &ScreeningConfig) -> Option<StopReason> {
    let last = trace.records.last()?;
    let t = trace.records.len();
    if last.step_delta < cfg.tol {
        return Some(StopReason::Tol);
    }
    if cfg.fast {
        if last.step_delta < (cfg.k as f64).sqrt() * cfg.tol {
            return Some(StopReason::Tol);
        }
        if t >= 2 {
            let first_gain = trace.records[0].loglik - trace.initial_loglik;
            let gain = last.loglik - trace.records[t - 2].loglik;
            if gain < 0.01 * first_gain {
                return Some(StopReason::FastLikelihood);
            }
        }
        if t >= 10
            && trace.records[t - 10..]
                .iter()
                .all(|r| r.support_changes == 0)
        {
            return Some(StopReason::FastSupport);
        }
    }
    if t >= cfg.max_iter {
        return Some(StopReason::MaxIter);
    }
    None
}

/// Centres and scales non-binary columns to unit sample standard deviation.
fn standardize(data: &Dataset) -> (Dataset, Vec<(f64, f64)>) {
    let mut out = data.clone();
    let n = data.n() as f64;
    let mut params = Vec::with_capacity(data.p());
    for j in 0..data.p() {
        let col = data.x.column(j);
        let binary = col.iter().all(|&v| v == 0.0 || v == 1.0);
        let mean = col.sum() / n;
        let var = if n > 1.0 {
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        if binary || !(sd > 0.0) {
            params.push((0.0, 1.0));
            continue;
        }
        out.x.column_mut(j).apply(|v| *v = (*v - mean) / sd);
        params.push((mean, sd));
    }
    (out, params)
}

fn family_curvature(family: Family) -> f64 {
    match family {
        Family::Binomial => 4.0,
        Family::Gaussian | Family::Poisson => 1.0,
    }
}

fn resolve_nu0(data: &Dataset, init: StepInit) -> Result<f64> {
    match init {
        StepInit::ColumnNorm => {
            let m = data
                .x
                .column_iter()
                .map(|c| c.norm_squared())
                .fold(0.0_f64, f64::max);
            if !(m > 0.0) || !m.is_finite() {
                return Err(SmleError::InvalidConfig(
                    "initial step size needs a nonzero, finite feature matrix".into(),
                ));
            }
            Ok(family_curvature(data.family) / m)
        }
        StepInit::InfNorm => initial_step_size(&data.x),
        StepInit::Fixed(v) => Ok(v),
        StepInit::Spectral => {
            let lambda = spectral_norm_sq(&data.x);
            if !(lambda > 0.0) {
                return Err(SmleError::InvalidConfig(
                    "initial step size needs a nonzero feature matrix".into(),
                ));
            }
            Ok(family_curvature(data.family) / lambda)
        }
    }
}

fn support_changes(prev: &[usize], next: &[usize]) -> usize {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < prev.len() && j < next.len() {
        match prev[i].cmp(&next[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    prev.len() + next.len() - 2 * common
}

/// Runs the screener from `cfg.coef_initial` (zero by default, intercept
/// zero) until a stopping rule fires.
pub fn run_screening(data: &Dataset, cfg: &ScreeningConfig) -> Result<ScreeningResult> {
    cfg.validate(data)?;
    data.validate_response()?;

    let (work, standardization) = if cfg.standardize {
        let (d, params) = standardize(data);
        (std::borrow::Cow::Owned(d), Some(params))
    } else {
        (std::borrow::Cow::Borrowed(data), None)
    };
    let work: &Dataset = &work;
    let nu0 = resolve_nu0(work, cfg.step_init)?;
    let prob = Problem::new(work, cfg);

    let mut beta = match &cfg.coef_initial {
        Some(v) => CoefVector::from_vec(v.clone()),
        None => CoefVector::zeros(work.p()),
    };
    let mut b0 = 0.0;
    let mut loglik = prob.loglik(&beta, b0);
    if !loglik.is_finite() {
        return Err(SmleError::NonFinite(
            "log-likelihood at the initial value".into(),
        ));
    }
    let mut support = beta.support();
    let mut trace = IterTrace {
        initial_loglik: loglik,
        records: Vec::new(),
    };

    let stop_reason = loop {
        let grad = prob.gradient(&beta, b0)?;
        let iter = trace.records.len() + 1;
        match prob.u_search(&beta, b0, loglik, &grad, nu0, cfg.max_u_tries, cfg.u_rate) {
            Ok(step) => {
                let next_support = step.beta.support();
                let db0 = step.intercept - b0;
                let record = IterRecord {
                    iter,
                    loglik: step.loglik,
                    step_delta: step.beta.l2_distance(&beta).hypot(db0),
                    u_tries: step.tries,
                    support_changes: support_changes(&support, &next_support),
                    step_size: step.nu,
                    accepted: true,
                    intercept: step.intercept,
                    beta: step.beta.sparse_entries(),
                };
                trace.records.push(record);
                beta = step.beta;
                b0 = step.intercept;
                loglik = step.loglik;
                support = next_support;
            }
            Err((tries, nu)) => {
                // Exhausted search: keep the iterate and call it converged.
                trace.records.push(IterRecord {
                    iter,
                    loglik,
                    step_delta: 0.0,
                    u_tries: tries,
                    support_changes: 0,
                    step_size: nu,
                    accepted: false,
                    intercept: b0,
                    beta: beta.sparse_entries(),
                });
                break StopReason::Tol;
            }
        }
        if let Some(reason) = check_stop(&trace, cfg) {
            break reason;
        }
    };

    let retained = beta.support();
    let retained_features = data.features_of(&retained);
    Ok(ScreeningResult {
        iterations: trace.records.len(),
        beta_final: beta,
        intercept: cfg.intercept.then_some(b0),
        retained,
        retained_features,
        trace,
        stop_reason,
        nu0,
        standardization,
        config: cfg.clone(),
    })
}

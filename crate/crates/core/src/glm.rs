//! Exponential-family primitives under the canonical link.
//!
//! The log-likelihood is `l(beta) = sum_i [y_i * theta_i - b(theta_i)]` with
//! `theta = X beta` and no intercept. The `c(y)` normaliser is dropped and the
//! gaussian dispersion is fixed at one, so every likelihood value produced here
//! (and every information criterion built on top of it) uses that same scale.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmleError};

/// Linear predictors are clamped to `[-THETA_CLAMP, THETA_CLAMP]` before
/// exponentiation in the binomial and poisson families.
pub const THETA_CLAMP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
    Poisson,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Binomial, Family::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }

    /// Cumulant function `b(theta)`.
    pub fn cumulant(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * theta * theta,
            Family::Binomial => {
                let t = clamp_theta(theta);
                if t > 0.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                }
            }
            Family::Poisson => clamp_theta(theta).exp(),
        }
    }

    /// Mean function `b'(theta)`.
    pub fn mean(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => theta,
            Family::Binomial => {
                let t = clamp_theta(theta);
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Family::Poisson => clamp_theta(theta).exp(),
        }
    }

    /// Variance function `b''(theta)`, the Newton weight.
    pub fn variance(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => {
                let mu = self.mean(theta);
                mu * (1.0 - mu)
            }
            Family::Poisson => clamp_theta(theta).exp(),
        }
    }

    /// Checks that every response value lies in the support of the family.
    pub fn validate_response(self, y: &[f64]) -> Result<()> {
        let bad = |detail: String| SmleError::InvalidResponse {
            family: self.name().to_string(),
            detail,
        };
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(bad(format!("y[{i}] = {v} is not finite")));
            }
            match self {
                Family::Gaussian => {}
                Family::Binomial => {
                    if v != 0.0 && v != 1.0 {
                        return Err(bad(format!("y[{i}] = {v} is not in {{0, 1}}")));
                    }
                }
                Family::Poisson => {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(bad(format!("y[{i}] = {v} is not a nonnegative integer")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = SmleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" | "linear" => Ok(Family::Gaussian),
            "binomial" | "logistic" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(SmleError::InvalidConfig(format!(
                "unknown family '{other}'"
            ))),
        }
    }
}

#[inline]
fn clamp_theta(theta: f64) -> f64 {
    theta.clamp(-THETA_CLAMP, THETA_CLAMP)
}

pub fn b_value(family: Family, theta: f64) -> f64 {
    family.cumulant(theta)
}

pub fn b_prime(family: Family, theta: f64) -> f64 {
    family.mean(theta)
}

/// Partition of design columns into groups. Group ids are dense in
/// `0..n_groups()`; for a categorical design the group id is the index of
/// the original feature, so a group is what the user calls a "feature".
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMap {
    group_of: Vec<usize>,
    n_groups: usize,
}

impl GroupMap {
    pub fn new(group_of: Vec<usize>) -> Result<Self> {
        let n_groups = group_of.iter().copied().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_groups];
        for &g in &group_of {
            seen[g] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(SmleError::InvalidConfig(format!(
                "group map leaves group {empty} without columns"
            )));
        }
        Ok(Self { group_of, n_groups })
    }

    /// One group per column.
    pub fn identity(p: usize) -> Self {
        Self {
            group_of: (0..p).collect(),
            n_groups: p,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.group_of.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn group_of(&self, column: usize) -> usize {
        self.group_of[column]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.group_of
    }

    /// Columns of every group, each list in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_groups];
        for (c, &g) in self.group_of.iter().enumerate() {
            out[g].push(c);
        }
        out
    }

    /// Sorted, deduplicated group ids touched by `columns`.
    pub fn groups_of(&self, columns: &[usize]) -> Vec<usize> {
        let mut g: Vec<usize> = columns.iter().map(|&c| self.group_of[c]).collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    /// All columns belonging to the given groups, ascending.
    pub fn columns_of(&self, groups: &[usize]) -> Vec<usize> {
        let mut wanted = vec![false; self.n_groups];
        for &g in groups {
            wanted[g] = true;
        }
        (0..self.group_of.len())
            .filter(|&c| wanted[self.group_of[c]])
            .collect()
    }

    /// Restricts the map to a subset of columns, renumbering groups densely in
    /// order of first appearance.
    pub fn restrict(&self, columns: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.n_groups];
        let mut next = 0;
        let mut group_of = Vec::with_capacity(columns.len());
        for &c in columns {
            let g = self.group_of[c];
            if remap[g] == usize::MAX {
                remap[g] = next;
                next += 1;
            }
            group_of.push(remap[g]);
        }
        Self {
            group_of,
            n_groups: next,
        }
    }
}

/// Ground truth carried by simulated data. Indices are feature (group) ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub causal_index: Vec<usize>,
    pub causal_coef: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub family: Family,
    /// Column grouping for categorical dummies. `None` means every column is
    /// its own feature.
    pub groups: Option<GroupMap>,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, family: Family) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(SmleError::DimensionMismatch(format!(
                "feature matrix must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(SmleError::DimensionMismatch(format!(
                "response has length {} but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        Ok(Self {
            y,
            x,
            family,
            groups: None,
            truth: None,
        })
    }

    pub fn with_groups(mut self, groups: GroupMap) -> Result<Self> {
        if groups.n_columns() != self.p() {
            return Err(SmleError::DimensionMismatch(format!(
                "group map covers {} columns, X has {}",
                groups.n_columns(),
                self.p()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_truth(mut self, truth: Truth) -> Result<Self> {
        let n_features = self.n_features();
        if truth.causal_index.len() != truth.causal_coef.len() {
            return Err(SmleError::InvalidConfig(
                "causal index and coefficient lengths differ".into(),
            ));
        }
        let mut sorted = truth.causal_index.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != truth.causal_index.len()
            || sorted.last().is_some_and(|&m| m >= n_features)
        {
            return Err(SmleError::InvalidConfig(
                "causal indices must be distinct feature indices".into(),
            ));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of features, counting each categorical group once.
    pub fn n_features(&self) -> usize {
        self.groups.as_ref().map_or(self.p(), GroupMap::n_groups)
    }

    pub fn validate_response(&self) -> Result<()> {
        self.family.validate_response(self.y.as_slice())
    }

    /// Feature ids touched by a set of design columns.
    pub fn features_of(&self, columns: &[usize]) -> Vec<usize> {
        match &self.groups {
            Some(g) => g.groups_of(columns),
            None => {
                let mut c = columns.to_vec();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }

    /// Design columns of a set of features.
    pub fn columns_of(&self, features: &[usize]) -> Vec<usize> {
        match &self.groups {
            Some(g) => g.columns_of(features),
            None => {
                let mut c = features.to_vec();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }

    /// Dataset on a subset of columns (in the given order). Ground truth is
    /// dropped because its indices no longer apply.
    pub fn restrict_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.p()) {
            return Err(SmleError::DimensionMismatch(format!(
                "column {bad} out of range for p = {}",
                self.p()
            )));
        }
        let x = self.x.select_columns(columns);
        Ok(Self {
            y: self.y.clone(),
            x,
            family: self.family,
            groups: self.groups.as_ref().map(|g| g.restrict(columns)),
            truth: None,
        })
    }
}

/// A length-p coefficient vector. The support is derived from the values, so
/// it always equals the set of nonzero entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefVector {
    values: Vec<f64>,
}

impl CoefVector {
    pub fn zeros(p: usize) -> Self {
        Self {
            values: vec![0.0; p],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_sparse(p: usize, entries: &[(usize, f64)]) -> Self {
        let mut values = vec![0.0; p];
        for &(j, v) in entries {
            values[j] = v;
        }
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// `(index, value)` pairs on the support.
    pub fn sparse_entries(&self) -> Vec<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    }

    /// `X beta`, touching only the support columns.
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut theta = DVector::zeros(x.nrows());
        for (j, &b) in self.values.iter().enumerate() {
            if b != 0.0 {
                theta.axpy(b, &x.column(j), 1.0);
            }
        }
        theta
    }

    pub fn l2_distance(&self, other: &CoefVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

fn check_coef_len(data: &Dataset, beta: &CoefVector) -> Result<()> {
    if beta.len() != data.p() {
        return Err(SmleError::DimensionMismatch(format!(
            "coefficient vector has length {} but X has {} columns",
            beta.len(),
            data.p()
        )));
    }
    Ok(())
}

/// Log-likelihood evaluated at a vector of linear predictors.
pub fn loglik_at(family: Family, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    y.iter()
        .zip(theta.iter())
        .map(|(&yi, &t)| yi * t - family.cumulant(t))
        .sum()
}

pub fn log_likelihood(data: &Dataset, beta: &CoefVector) -> Result<f64> {
    check_coef_len(data, beta)?;
    let theta = beta.linear_predictor(&data.x);
    Ok(loglik_at(data.family, &data.y, &theta))
}

/// Score vector `X^T (y - b'(X beta))`.
pub fn gradient(data: &Dataset, beta: &CoefVector) -> Result<DVector<f64>> {
    check_coef_len(data, beta)?;
    let theta = beta.linear_predictor(&data.x);
    Ok(gradient_at(data, &theta))
}

pub(crate) fn gradient_at(data: &Dataset, theta: &DVector<f64>) -> DVector<f64> {
    let resid = DVector::from_iterator(
        data.n(),
        data.y
            .iter()
            .zip(theta.iter())
            .map(|(&yi, &t)| yi - data.family.mean(t)),
    );
    data.x.tr_mul(&resid)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
    pub max_halvings: usize,
    pub intercept: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            max_halvings: 30,
            intercept: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Refit {
    /// Length-p coefficients, zero off the support.
    pub coef: CoefVector,
    pub intercept: Option<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub family: Family,
    /// Columns the model was fitted on, in the order given.
    pub support: Vec<usize>,
}

impl Refit {
    /// Number of estimated parameters, intercept included.
    pub fn n_params(&self) -> usize {
        self.support.len() + usize::from(self.intercept.is_some())
    }

    pub fn predict(&self, x_new: &DMatrix<f64>, scale: Scale) -> Result<DVector<f64>> {
        let mut out = predict(x_new, &self.coef, self.family, Scale::Link)?;
        if let Some(b0) = self.intercept {
            out.add_scalar_mut(b0);
        }
        if scale == Scale::Response {
            out.apply(|t| *t = self.family.mean(*t));
        }
        Ok(out)
    }
}

/// Reciprocal condition threshold on the Cholesky diagonal ratio squared.
const RANK_TOL: f64 = 1e-12;

/// Unrestricted maximum-likelihood fit on the columns in `support` by
/// Newton-Raphson with step halving.
///
/// A linear predictor reaching the clamp bound, or a binomial fit whose
/// residuals all vanish, signals that the MLE does not exist (separation) and
/// is reported as non-convergence.
pub fn newton_refit(data: &Dataset, support: &[usize], opts: &NewtonOptions) -> Result<Refit> {
    let p = data.p();
    let n = data.n();
    if let Some(&bad) = support.iter().find(|&&j| j >= p) {
        return Err(SmleError::DimensionMismatch(format!(
            "support index {bad} out of range for p = {p}"
        )));
    }
    let offset = usize::from(opts.intercept);
    let d = support.len() + offset;
    if d >= n && d > 0 {
        return Err(SmleError::SingularDesign);
    }

    let mut z = DMatrix::zeros(n, d);
    if opts.intercept {
        z.column_mut(0).fill(1.0);
    }
    for (c, &j) in support.iter().enumerate() {
        z.set_column(c + offset, &data.x.column(j));
    }

    let family = data.family;
    let assemble = |w: &DVector<f64>, iterations: usize, loglik: f64| {
        let mut coef = vec![0.0; p];
        for (c, &j) in support.iter().enumerate() {
            coef[j] = w[c + offset];
        }
        Refit {
            coef: CoefVector::from_vec(coef),
            intercept: opts.intercept.then(|| w[0]),
            loglik,
            iterations,
            family,
            support: support.to_vec(),
        }
    };
    let non_convergence = |w: &DVector<f64>, iterations: usize, reason: &str| {
        let r = assemble(w, iterations, f64::NAN);
        SmleError::NonConvergence {
            iterations,
            reason: reason.to_string(),
            last: r.coef,
        }
    };

    let mut w = DVector::zeros(d);
    let mut theta = DVector::zeros(n);
    let mut loglik = loglik_at(family, &data.y, &theta);

    for iter in 0..=opts.max_iter {
        if theta.iter().any(|t| t.abs() >= THETA_CLAMP) {
            return Err(non_convergence(
                &w,
                iter,
                "linear predictor reached the clamp bound; the MLE does not exist",
            ));
        }
        let resid = DVector::from_iterator(
            n,
            data.y
                .iter()
                .zip(theta.iter())
                .map(|(&yi, &t)| yi - family.mean(t)),
        );
        let grad = z.tr_mul(&resid);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(SmleError::NonFinite("Newton gradient".into()));
        }
        let grad_norm = grad.amax();
        if grad_norm < opts.tol || d == 0 {
            if family == Family::Binomial && d > 0 && resid.amax() < 1e-6 {
                return Err(non_convergence(
                    &w,
                    iter,
                    "fitted probabilities are 0 or 1; the design separates the response",
                ));
            }
            return Ok(assemble(&w, iter, loglik));
        }
        if iter == opts.max_iter {
            break;
        }

        let mut weighted = z.clone();
        for (i, t) in theta.iter().enumerate() {
            let v = family.variance(*t);
            weighted.row_mut(i).scale_mut(v);
        }
        let hess = z.tr_mul(&weighted);
        let chol = hess.cholesky().ok_or(SmleError::SingularDesign)?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        if !(lo > 0.0) || (lo / hi).powi(2) < RANK_TOL {
            return Err(SmleError::SingularDesign);
        }
        let step = chol.solve(&grad);
        let decrement = grad.dot(&step);
        if decrement.abs() <= 1e-15 * loglik.abs().max(1.0) {
            return Ok(assemble(&w, iter, loglik));
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand = &w + &step * t;
            let cand_theta = &z * &cand;
            let cand_ll = loglik_at(family, &data.y, &cand_theta);
            if cand_ll.is_finite() && cand_ll >= loglik {
                w = cand;
                theta = cand_theta;
                loglik = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(non_convergence(
                &w,
                iter + 1,
                "step halving could not increase the likelihood",
            ));
        }
    }
    Err(non_convergence(
        &w,
        opts.max_iter,
        "iteration limit reached",
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Link,
    Response,
}

impl FromStr for Scale {
    type Err = SmleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "link" => Ok(Scale::Link),
            "response" => Ok(Scale::Response),
            other => Err(SmleError::InvalidConfig(format!(
                "unknown prediction scale '{other}'"
            ))),
        }
    }
}

pub fn predict(
    x_new: &DMatrix<f64>,
    fit: &CoefVector,
    family: Family,
    scale: Scale,
) -> Result<DVector<f64>> {
    if x_new.ncols() != fit.len() {
        return Err(SmleError::DimensionMismatch(format!(
            "new data has {} columns, model has {}",
            x_new.ncols(),
            fit.len()
        )));
    }
    let mut eta = fit.linear_predictor(x_new);
    if scale == Scale::Response {
        eta.apply(|t| *t = family.mean(*t));
    }
    Ok(eta)
}

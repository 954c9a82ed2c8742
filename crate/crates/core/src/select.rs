//! Post-screening selection: rerun the screener for each sparsity level in a
//! range on the retained features, refit each sub-model and score it with an
//! information criterion.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SmleError};
use crate::glm::{newton_refit, Dataset, NewtonOptions};
use crate::iht::{run_screening, ScreeningConfig, ScreeningResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Ebic,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Ebic => "ebic",
        })
    }
}

impl FromStr for Criterion {
    type Err = SmleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "ebic" => Ok(Criterion::Ebic),
            other => Err(SmleError::InvalidConfig(format!(
                "unknown criterion '{other}'"
            ))),
        }
    }
}

/// `ln C(p, d)`
pub fn ln_choose(p: usize, d: usize) -> f64 {
    if d > p {
        return f64::NEG_INFINITY;
    }
    ln_gamma(p as f64 + 1.0) - ln_gamma(d as f64 + 1.0) - ln_gamma((p - d) as f64 + 1.0)
}

/// Information criterion of a model with log-likelihood `loglik` and `d`
/// parameters, fitted on `n` observations out of `p_total` candidates.
///
/// AIC is `-2L + 2d`, BIC is `-2L + d ln n` and EBIC adds `2 gamma ln C(p_total, d)`
/// to BIC.
pub fn information_criterion(
    loglik: f64,
    d: usize,
    n: usize,
    criterion: Criterion,
    gamma: f64,
    p_total: usize,
) -> f64 {
    let base = -2.0 * loglik;
    let d_f = d as f64;
    match criterion {
        Criterion::Aic => base + 2.0 * d_f,
        Criterion::Bic => base + d_f * (n as f64).ln(),
        Criterion::Ebic => base + d_f * (n as f64).ln() + 2.0 * gamma * ln_choose(p_total, d),
    }
}

/// Refits `support` (design columns of `data`) and scores the fit. A refit
/// that fails (singular design, separation) is returned as the error.
pub fn criterion_score(
    data: &Dataset,
    support: &[usize],
    criterion: Criterion,
    gamma: f64,
    p_total: usize,
    intercept: bool,
) -> Result<f64> {
    let opts = NewtonOptions {
        intercept,
        ..Default::default()
    };
    let fit = newton_refit(data, support, &opts)?;
    Ok(information_criterion(
        fit.loglik,
        support.len(),
        data.n(),
        criterion,
        gamma,
        p_total,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub k_min: usize,
    /// Defaults to the number of candidate features.
    pub k_max: Option<usize>,
    pub criterion: Criterion,
    pub gamma_ebic: f64,
    pub vote: bool,
    pub gamma_seq: Vec<f64>,
    pub vote_threshold: f64,
    pub parallel: bool,
    /// Model-space size in the EBIC term. Defaults to the number of candidate
    /// columns; passing the original column count penalizes against the full
    /// design instead.
    pub ebic_p: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: None,
            criterion: Criterion::Ebic,
            gamma_ebic: 0.5,
            vote: false,
            gamma_seq: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            vote_threshold: 0.6,
            parallel: false,
            ebic_p: None,
        }
    }
}

impl SelectionConfig {
    fn resolve_range(&self, q: usize) -> Result<(usize, usize)> {
        let bad = |m: String| Err(SmleError::InvalidConfig(m));
        let k_max = self.k_max.unwrap_or(q);
        if self.k_min == 0 {
            return bad("k_min must be at least 1".into());
        }
        if k_max > q {
            return bad(format!(
                "k_max = {k_max} exceeds the {q} candidate features"
            ));
        }
        if self.k_min > k_max {
            return bad(format!("k_min = {} exceeds k_max = {k_max}", self.k_min));
        }
        let unit = |g: f64| (0.0..=1.0).contains(&g);
        if !unit(self.gamma_ebic) || !self.gamma_seq.iter().copied().all(unit) {
            return bad("EBIC gamma values must lie in [0, 1]".into());
        }
        if self.vote && self.gamma_seq.is_empty() {
            return bad("voting needs a non-empty gamma sequence".into());
        }
        check_threshold(self.vote_threshold)?;
        Ok((self.k_min, k_max))
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(SmleError::InvalidConfig(format!(
            "vote threshold must lie in (0, 1], got {t}"
        )));
    }
    Ok(())
}

/// One candidate sub-model of the sparsity path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubModel {
    pub k: usize,
    /// Feature ids in the original data, ascending.
    pub features: Vec<usize>,
    /// Design columns in the original data, ascending.
    pub columns: Vec<usize>,
    /// Refit log-likelihood; `None` when the sub-model was not admissible.
    pub loglik: Option<f64>,
    /// Score under the configured criterion; `None` when not admissible.
    pub score: Option<f64>,
    /// Why the sub-model was skipped, if it was.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub gamma_seq: Vec<f64>,
    /// Sparsity chosen by EBIC at each gamma.
    pub chosen_k: Vec<usize>,
    /// `(feature id, number of gamma values whose model contains it)`.
    pub counts: Vec<(usize, usize)>,
    pub threshold: f64,
}

impl VoteTally {
    pub fn frequency(&self, count: usize) -> f64 {
        count as f64 / self.gamma_seq.len() as f64
    }

    /// Features whose vote frequency reaches the threshold.
    pub fn passing(&self, threshold: f64) -> Vec<usize> {
        self.counts
            .iter()
            .filter(|&&(_, c)| self.frequency(c) >= threshold - 1e-12)
            .map(|&(f, _)| f)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Candidate feature ids (the screener's retained set).
    pub candidates: Vec<usize>,
    pub criterion: Criterion,
    pub gamma_ebic: f64,
    pub models: Vec<SubModel>,
    /// Sparsity minimising the configured criterion (ties to the smaller k).
    pub chosen_k: usize,
    /// Selected feature ids, ascending.
    pub selected: Vec<usize>,
    /// Design columns of the selected features.
    pub selected_columns: Vec<usize>,
    pub votes: Option<VoteTally>,
    pub config: SelectionConfig,
}

/// Index of the smallest score; ties keep the earliest entry.
fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        if best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

struct PathPoint {
    k: usize,
    features: Vec<usize>,
    columns: Vec<usize>,
    fit: std::result::Result<f64, String>,
}

/// Runs the sparsity path on the screener's retained features and picks the
/// sub-model with the best criterion score.
///
/// Screener settings are inherited from the screening run except `k`, the
/// warm start and fast mode (forced off). A keyset stays pinned; sparsity
/// levels below its size are not admissible.
pub fn run_selection(
    data: &Dataset,
    screening: &ScreeningResult,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    select_from(data, &screening.retained_features, &screening.config, cfg)
}

/// Selection on an explicit candidate feature set with the given screener
/// settings.
pub fn select_from(
    data: &Dataset,
    candidates: &[usize],
    screening: &ScreeningConfig,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let mut candidates = candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.last().is_some_and(|&f| f >= data.n_features()) {
        return Err(SmleError::DimensionMismatch(format!(
            "candidate feature out of range for {} features",
            data.n_features()
        )));
    }
    let q = candidates.len();
    if q == 0 {
        return Err(SmleError::EmptyCandidateSet);
    }
    let (k_min, k_max) = cfg.resolve_range(q)?;

    let cand_columns = data.columns_of(&candidates);
    let sub = data.restrict_columns(&cand_columns)?;
    let local_of = |f: usize| candidates.binary_search(&f).ok();
    let keyset: Vec<usize> = screening
        .keyset
        .iter()
        .filter_map(|&f| local_of(f))
        .collect();
    let base = ScreeningConfig {
        keyset,
        coef_initial: None,
        fast: false,
        ..screening.clone()
    };
    let intercept = base.intercept;
    let n_keys = {
        let mut k = base.keyset.clone();
        k.sort_unstable();
        k.dedup();
        k.len()
    };
    let p_total = match cfg.ebic_p {
        Some(pt) if pt < cand_columns.len() => {
            return Err(SmleError::InvalidConfig(format!(
                "ebic_p = {pt} is below the {} candidate columns",
                cand_columns.len()
            )))
        }
        Some(pt) => pt,
        None => cand_columns.len(),
    };

    let point = |k: usize| -> Result<PathPoint> {
        if k < n_keys {
            return Ok(PathPoint {
                k,
                features: Vec::new(),
                columns: Vec::new(),
                fit: Err(format!("k = {k} is below the keyset size {n_keys}")),
            });
        }
        let run = run_screening(&sub, &ScreeningConfig { k, ..base.clone() })?;
        let opts = NewtonOptions {
            intercept,
            ..Default::default()
        };
        let fit = newton_refit(&sub, &run.retained, &opts)
            .map(|r| r.loglik)
            .map_err(|e| e.to_string());
        Ok(PathPoint {
            k,
            features: run
                .retained_features
                .iter()
                .map(|&g| candidates[g])
                .collect(),
            columns: run.retained.iter().map(|&c| cand_columns[c]).collect(),
            fit,
        })
    };
    let ks: Vec<usize> = (k_min..=k_max).collect();
    let points: Vec<PathPoint> = if cfg.parallel {
        ks.par_iter().map(|&k| point(k)).collect::<Result<_>>()?
    } else {
        ks.iter().map(|&k| point(k)).collect::<Result<_>>()?
    };

    let n = data.n();
    let scores_at = |criterion: Criterion, gamma: f64| -> Vec<f64> {
        points
            .iter()
            .map(|pt| match pt.fit {
                Ok(ll) => information_criterion(ll, pt.columns.len(), n, criterion, gamma, p_total),
                Err(_) => f64::INFINITY,
            })
            .collect()
    };

    let scores = scores_at(cfg.criterion, cfg.gamma_ebic);
    let best = argmin(&scores).ok_or(SmleError::NoAdmissibleModel)?;

    let votes = if cfg.vote {
        let mut counts = vec![0usize; data.n_features()];
        let mut chosen_k = Vec::with_capacity(cfg.gamma_seq.len());
        for &g in &cfg.gamma_seq {
            let i = argmin(&scores_at(Criterion::Ebic, g)).ok_or(SmleError::NoAdmissibleModel)?;
            chosen_k.push(points[i].k);
            for &f in &points[i].features {
                counts[f] += 1;
            }
        }
        Some(VoteTally {
            gamma_seq: cfg.gamma_seq.clone(),
            chosen_k,
            counts: candidates.iter().map(|&f| (f, counts[f])).collect(),
            threshold: cfg.vote_threshold,
        })
    } else {
        None
    };

    let models: Vec<SubModel> = points
        .into_iter()
        .zip(&scores)
        .map(|(pt, &score)| SubModel {
            k: pt.k,
            features: pt.features,
            columns: pt.columns,
            loglik: pt.fit.as_ref().ok().copied(),
            score: score.is_finite().then_some(score),
            failure: pt.fit.err(),
        })
        .collect();

    let (selected, selected_columns) = match &votes {
        Some(t) => {
            let s = t.passing(cfg.vote_threshold);
            let c = data.columns_of(&s);
            (s, c)
        }
        None => (models[best].features.clone(), models[best].columns.clone()),
    };

    Ok(SelectionResult {
        candidates,
        criterion: cfg.criterion,
        gamma_ebic: cfg.gamma_ebic,
        chosen_k: models[best].k,
        models,
        selected,
        selected_columns,
        votes,
        config: cfg.clone(),
    })
}

/// Recomputes the voted selection for a new threshold from stored counts,
/// without refitting anything.
pub fn vote_update(
    result: &SelectionResult,
    data: &Dataset,
    threshold: f64,
) -> Result<SelectionResult> {
    check_threshold(threshold)?;
    let votes = result.votes.as_ref().ok_or(SmleError::MissingVotes)?;
    let mut out = result.clone();
    out.selected = votes.passing(threshold);
    out.selected_columns = data.columns_of(&out.selected);
    if let Some(v) = out.votes.as_mut() {
        v.threshold = threshold;
    }
    out.config.vote_threshold = threshold;
    Ok(out)
}

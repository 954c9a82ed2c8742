//! Synthetic GLM data: correlated gaussian features, optional categorical
//! binning and a response drawn from a sparse true model.
//!
//! Randomness comes from ChaCha8 generators. A dataset with seed `s` draws its
//! features from stream 0, its response from stream 1 and any randomly chosen
//! truth (positions, effects) from stream 2 of the generator seeded with `s`.
//! Replicates of an experiment get their own seed from [`derive_seed`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SmleError};
use crate::frame::{FeatureColumn, FeatureFrame};
use crate::glm::{Dataset, Family, Truth, THETA_CLAMP};

const STREAM_FEATURES: u64 = 0;
const STREAM_RESPONSE: u64 = 1;
const STREAM_TRUTH: u64 = 2;

/// Seeded generator on a given stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 mix of a master seed and a replicate index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correlation {
    #[serde(rename = "ID")]
    Independent,
    #[serde(rename = "MA")]
    MovingAverage,
    #[serde(rename = "CS")]
    CompoundSymmetry,
    #[serde(rename = "AR")]
    AutoRegressive,
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correlation::Independent => "ID",
            Correlation::MovingAverage => "MA",
            Correlation::CompoundSymmetry => "CS",
            Correlation::AutoRegressive => "AR",
        })
    }
}

impl FromStr for Correlation {
    type Err = SmleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ID" => Ok(Correlation::Independent),
            "MA" => Ok(Correlation::MovingAverage),
            "CS" => Ok(Correlation::CompoundSymmetry),
            "AR" => Ok(Correlation::AutoRegressive),
            other => Err(SmleError::InvalidConfig(format!(
                "unknown correlation '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub structure: Correlation,
    pub rho: f64,
    /// Causal feature ids; only the CS structure looks at them.
    pub causal: Vec<usize>,
}

impl CovarianceSpec {
    pub fn new(structure: Correlation, rho: f64) -> Self {
        Self {
            structure,
            rho,
            causal: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(SmleError::InvalidConfig(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Covariance entry `(j, h)` for `j != h`.
    fn off_diagonal(&self, j: usize, h: usize, is_causal: &[bool]) -> f64 {
        let rho = self.rho;
        match self.structure {
            Correlation::Independent => 0.0,
            Correlation::MovingAverage => match j.abs_diff(h) {
                1 => rho,
                2 => rho / 2.0,
                _ => 0.0,
            },
            Correlation::CompoundSymmetry => {
                if is_causal[j] && is_causal[h] {
                    rho / 2.0
                } else {
                    rho
                }
            }
            Correlation::AutoRegressive => rho.powi(j.abs_diff(h) as i32),
        }
    }
}

fn causal_mask(causal: &[usize], p: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; p];
    for &c in causal {
        if c >= p {
            return Err(SmleError::InvalidConfig(format!(
                "causal index {c} out of range for p = {p}"
            )));
        }
        mask[c] = true;
    }
    Ok(mask)
}

/// Dense `p x p` covariance matrix with unit diagonal.
pub fn build_covariance(spec: &CovarianceSpec, p: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if p == 0 {
        return Err(SmleError::InvalidConfig("p must be positive".into()));
    }
    let mask = causal_mask(&spec.causal, p)?;
    let sigma = DMatrix::from_fn(p, p, |j, h| {
        if j == h {
            1.0
        } else {
            spec.off_diagonal(j, h, &mask)
        }
    });
    let jittered = &sigma + DMatrix::identity(p, p) * 1e-10;
    if jittered.cholesky().is_none() {
        return Err(SmleError::NotPositiveDefinite(format!(
            "{} structure with rho = {} and p = {p}",
            spec.structure, spec.rho
        )));
    }
    Ok(sigma)
}

/// Lower Cholesky factor of the MA covariance, stored as the three bands
/// `(diag, sub1, sub2)`.
fn ma_band_factor(rho: f64, p: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut d = vec![0.0; p];
    let mut l1 = vec![0.0; p];
    let mut l2 = vec![0.0; p];
    for i in 0..p {
        if i >= 2 {
            l2[i] = (rho / 2.0) / d[i - 2];
        }
        if i >= 1 {
            let carry = if i >= 2 { l2[i] * l1[i - 1] } else { 0.0 };
            l1[i] = (rho - carry) / d[i - 1];
        }
        let sq = 1.0 - l1[i] * l1[i] - l2[i] * l2[i];
        if !(sq > 1e-12) {
            return Err(SmleError::NotPositiveDefinite(format!(
                "MA structure with rho = {rho} and p = {p}"
            )));
        }
        d[i] = sq.sqrt();
    }
    Ok((d, l1, l2))
}

/// Draws `n` rows from `N(0, Sigma)` without forming `Sigma`.
///
/// ID samples directly, AR uses the order-one recursion, MA a banded Cholesky
/// factor, and CS conditions the causal block on a one-factor draw of the
/// remaining features.
pub fn sample_features(
    spec: &CovarianceSpec,
    n: usize,
    p: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mut rng = rng_for(seed, STREAM_FEATURES);
    sample_features_with(spec, n, p, &mut rng)
}

fn sample_features_with<R: Rng>(
    spec: &CovarianceSpec,
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if n == 0 || p == 0 {
        return Err(SmleError::InvalidConfig("n and p must be positive".into()));
    }
    let rho = spec.rho;
    let mut x = DMatrix::zeros(n, p);
    let mut z = vec![0.0; p];

    match spec.structure {
        Correlation::Independent => {
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        Correlation::AutoRegressive => {
            let innov = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                let mut prev: f64 = rng.sample(StandardNormal);
                x[(i, 0)] = prev;
                for j in 1..p {
                    let e: f64 = rng.sample(StandardNormal);
                    prev = rho * prev + innov * e;
                    x[(i, j)] = prev;
                }
            }
        }
        Correlation::MovingAverage => {
            let (d, l1, l2) = ma_band_factor(rho, p)?;
            for i in 0..n {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                for j in 0..p {
                    let mut v = d[j] * z[j];
                    if j >= 1 {
                        v += l1[j] * z[j - 1];
                    }
                    if j >= 2 {
                        v += l2[j] * z[j - 2];
                    }
                    x[(i, j)] = v;
                }
            }
        }
        Correlation::CompoundSymmetry => {
            let mask = causal_mask(&spec.causal, p)?;
            let causal: Vec<usize> = (0..p).filter(|&j| mask[j]).collect();
            let m = causal.len() as f64;
            let q = (p - causal.len()) as f64;
            // Causal block given the rest: mean rho * sum(x_N) / (1 - rho + q rho),
            // covariance a I + b 11^T.
            let denom = 1.0 - rho + q * rho;
            let a = 1.0 - rho / 2.0;
            let b = rho / 2.0 - if q > 0.0 { rho * rho * q / denom } else { 0.0 };
            let along = a + m * b;
            if along < -1e-10 {
                return Err(SmleError::NotPositiveDefinite(format!(
                    "CS structure with rho = {rho}, p = {p} and {} causal features",
                    causal.len()
                )));
            }
            let (sa, sl) = (a.sqrt(), along.max(0.0).sqrt());
            let (load, spec_sd) = (rho.sqrt(), (1.0 - rho).sqrt());
            for i in 0..n {
                let common: f64 = rng.sample(StandardNormal);
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                let mut noise_sum = 0.0;
                for j in 0..p {
                    if !mask[j] {
                        let v = load * common + spec_sd * z[j];
                        x[(i, j)] = v;
                        noise_sum += v;
                    }
                }
                if causal.is_empty() {
                    continue;
                }
                let mean = if q > 0.0 {
                    rho * noise_sum / denom
                } else {
                    0.0
                };
                let fbar = causal.iter().map(|&j| z[j]).sum::<f64>() / m;
                for &j in &causal {
                    x[(i, j)] = mean + sa * (z[j] - fbar) + sl * fbar;
                }
            }
        }
    }
    Ok(x)
}

/// Standard-normal quantile cut points splitting the line into `levels`
/// equal-probability bins.
pub fn bin_cuts(levels: usize) -> Vec<f64> {
    let normal = Normal::standard();
    (1..levels)
        .map(|i| normal.inverse_cdf(i as f64 / levels as f64))
        .collect()
}

/// Bins the flagged columns of `x` into letter-labelled categories and keeps
/// the remaining columns numeric.
pub fn make_categorical(x: &DMatrix<f64>, pos: &[usize], levels: &[usize]) -> Result<FeatureFrame> {
    if pos.len() != levels.len() {
        return Err(SmleError::InvalidConfig(
            "categorical positions and levels differ in length".into(),
        ));
    }
    let p = x.ncols();
    let mut level_of = vec![None; p];
    for (&j, &l) in pos.iter().zip(levels) {
        if j >= p {
            return Err(SmleError::InvalidConfig(format!(
                "categorical position {j} out of range for p = {p}"
            )));
        }
        if !(2..=26).contains(&l) {
            return Err(SmleError::InvalidConfig(format!(
                "categorical levels must lie in [2, 26], got {l}"
            )));
        }
        if level_of[j].replace(l).is_some() {
            return Err(SmleError::InvalidConfig(format!(
                "categorical position {j} listed twice"
            )));
        }
    }
    let columns = (0..p)
        .map(|j| match level_of[j] {
            None => FeatureColumn::Numeric(x.column(j).iter().copied().collect()),
            Some(l) => {
                let cuts = bin_cuts(l);
                let labels = x
                    .column(j)
                    .iter()
                    .map(|&v| {
                        let bin = cuts.iter().filter(|&&c| c <= v).count();
                        char::from(b'A' + bin as u8).to_string()
                    })
                    .collect();
                FeatureColumn::Categorical(labels)
            }
        })
        .collect();
    FeatureFrame::new(columns)
}

/// Response from the linear predictor `sum_k effects[k] * x[:, pos[k]]`.
pub fn gen_response<R: Rng>(
    x: &DMatrix<f64>,
    family: Family,
    pos: &[usize],
    effects: &[f64],
    sigma_noise: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if pos.len() != effects.len() {
        return Err(SmleError::InvalidConfig(
            "causal positions and effects differ in length".into(),
        ));
    }
    if let Some(&bad) = pos.iter().find(|&&j| j >= x.ncols()) {
        return Err(SmleError::InvalidConfig(format!(
            "causal position {bad} out of range for p = {}",
            x.ncols()
        )));
    }
    let mut theta = DVector::zeros(x.nrows());
    for (&j, &b) in pos.iter().zip(effects) {
        theta.axpy(b, &x.column(j), 1.0);
    }
    let y = match family {
        Family::Gaussian => theta.map(|t| {
            let e: f64 = rng.sample(StandardNormal);
            t + sigma_noise * e
        }),
        Family::Binomial => theta.map(|t| {
            let u: f64 = rng.random();
            if u < family.mean(t) {
                1.0
            } else {
                0.0
            }
        }),
        Family::Poisson => {
            let mut out = DVector::zeros(theta.len());
            for (o, &t) in out.iter_mut().zip(theta.iter()) {
                let lambda = t.clamp(-THETA_CLAMP, THETA_CLAMP).exp();
                let dist = Poisson::new(lambda)
                    .map_err(|e| SmleError::NonFinite(format!("poisson mean {lambda}: {e}")))?;
                *o = dist.sample(rng);
            }
            out
        }
    };
    Ok(y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n: usize,
    pub p: usize,
    pub family: Family,
    pub correlation: Correlation,
    pub rho: f64,
    /// Number of causal features when `pos_truecoef` is absent.
    pub num_truecoef: usize,
    /// Causal feature ids (0-based).
    pub pos_truecoef: Option<Vec<usize>>,
    pub effect_truecoef: Option<Vec<f64>>,
    /// Categorical feature ids (0-based).
    pub pos_ctgidx: Option<Vec<usize>>,
    pub level_ctgidx: Option<Vec<usize>>,
    pub seed: u64,
    pub sigma_noise: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 200,
            p: 1000,
            family: Family::Gaussian,
            correlation: Correlation::Independent,
            rho: 0.2,
            num_truecoef: 5,
            pos_truecoef: None,
            effect_truecoef: None,
            pos_ctgidx: None,
            level_ctgidx: None,
            seed: 1,
            sigma_noise: 1.0,
        }
    }
}

impl GenConfig {
    fn n_causal(&self) -> usize {
        match (&self.pos_truecoef, &self.effect_truecoef) {
            (Some(p), _) => p.len(),
            (None, Some(e)) => e.len(),
            (None, None) => self.num_truecoef,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SmleError::InvalidConfig(m));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if !(self.sigma_noise > 0.0) {
            return bad("sigma_noise must be positive".into());
        }
        if self.n_causal() > self.p {
            return bad(format!(
                "{} causal features exceed p = {}",
                self.n_causal(),
                self.p
            ));
        }
        if let (Some(p), Some(e)) = (&self.pos_truecoef, &self.effect_truecoef) {
            if p.len() != e.len() {
                return bad("pos_truecoef and effect_truecoef differ in length".into());
            }
        }
        if let Some(pos) = &self.pos_truecoef {
            let mut s = pos.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != pos.len() || s.last().is_some_and(|&m| m >= self.p) {
                return bad("pos_truecoef must hold distinct indices below p".into());
            }
        }
        match (&self.pos_ctgidx, &self.level_ctgidx) {
            (Some(p), Some(l)) if p.len() != l.len() => {
                bad("pos_ctgidx and level_ctgidx differ in length".into())
            }
            (Some(_), None) | (None, Some(_)) => {
                bad("pos_ctgidx and level_ctgidx must be given together".into())
            }
            _ => Ok(()),
        }
    }
}

/// Simulated data: the encoded dataset used for fitting plus the labelled
/// feature frame (categorical columns as letters).
#[derive(Clone, Debug)]
pub struct Generated {
    pub dataset: Dataset,
    pub frame: FeatureFrame,
    pub config: GenConfig,
}

/// Draws causal positions and effects when they are not given.
fn resolve_truth(cfg: &GenConfig) -> (Vec<usize>, Vec<f64>) {
    let mut rng = rng_for(cfg.seed, STREAM_TRUTH);
    let m = cfg.n_causal();
    let pos = match &cfg.pos_truecoef {
        Some(p) => p.clone(),
        None => {
            let mut v = rand::seq::index::sample(&mut rng, cfg.p, m).into_vec();
            v.sort_unstable();
            v
        }
    };
    let effects = match &cfg.effect_truecoef {
        Some(e) => e.clone(),
        None => (0..m)
            .map(|_| {
                let mag: f64 = rng.random_range(0.5..=1.5);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect(),
    };
    (pos, effects)
}

/// Simulates a dataset. The response is computed from the numeric features
/// before any categorical binning; categorical features enter the fitting
/// design as dummy columns grouped per feature.
pub fn gen_data(cfg: &GenConfig) -> Result<Generated> {
    cfg.validate()?;
    let (pos, effects) = resolve_truth(cfg);
    let spec = CovarianceSpec {
        structure: cfg.correlation,
        rho: cfg.rho,
        causal: pos.clone(),
    };
    let latent = sample_features(&spec, cfg.n, cfg.p, cfg.seed)?;
    let mut rng = rng_for(cfg.seed, STREAM_RESPONSE);
    let y = gen_response(
        &latent,
        cfg.family,
        &pos,
        &effects,
        cfg.sigma_noise,
        &mut rng,
    )?;

    let frame = match (&cfg.pos_ctgidx, &cfg.level_ctgidx) {
        (Some(p), Some(l)) => make_categorical(&latent, p, l)?,
        _ => FeatureFrame::from_matrix(&latent),
    };

    let mut order: Vec<usize> = (0..pos.len()).collect();
    order.sort_by_key(|&i| pos[i]);
    let truth = Truth {
        causal_index: order.iter().map(|&i| pos[i]).collect(),
        causal_coef: order.iter().map(|&i| effects[i]).collect(),
    };

    let dataset = if frame.has_categorical() {
        let enc = frame.encode()?;
        Dataset::new(y, enc.x, cfg.family)?.with_groups(enc.groups)?
    } else {
        Dataset::new(y, latent, cfg.family)?
    };
    let dataset = dataset.with_truth(truth)?;
    Ok(Generated {
        dataset,
        frame,
        config: cfg.clone(),
    })
}

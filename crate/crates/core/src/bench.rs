//! Monte Carlo screening experiments: sure screening rate (SSR), positive
//! retaining rate (PRR), timing, and minimum retained distance (MRD).

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{derive_seed, gen_data, Correlation, GenConfig};
use crate::error::{Result, SmleError};
use crate::glm::{Dataset, Family};
use crate::iht::{run_screening, ScreeningConfig};

/// Fraction of replicates whose retained set contains every causal feature.
pub fn ssr(retained_sets: &[Vec<usize>], causal: &[usize]) -> Result<f64> {
    if retained_sets.is_empty() {
        return Err(SmleError::InvalidConfig(
            "ssr needs at least one replicate".into(),
        ));
    }
    let hits = retained_sets
        .iter()
        .filter(|r| causal.iter().all(|&c| r.contains(&c)))
        .count();
    Ok(hits as f64 / retained_sets.len() as f64)
}

/// Mean over replicates of the fraction of causal features retained.
pub fn prr(retained_sets: &[Vec<usize>], causal: &[usize]) -> Result<f64> {
    if causal.is_empty() {
        return Err(SmleError::InvalidConfig(
            "prr needs a non-empty causal set".into(),
        ));
    }
    if retained_sets.is_empty() {
        return Err(SmleError::InvalidConfig(
            "prr needs at least one replicate".into(),
        ));
    }
    let m = causal.len() as f64;
    let total: f64 = retained_sets
        .iter()
        .map(|r| causal.iter().filter(|&&c| r.contains(&c)).count() as f64 / m)
        .sum();
    Ok(total / retained_sets.len() as f64)
}

/// Distance in column index from a causal feature to the closest retained one.
pub fn mrd(causal_position: usize, retained: &[usize]) -> Result<usize> {
    retained
        .iter()
        .map(|&r| r.abs_diff(causal_position))
        .min()
        .ok_or_else(|| SmleError::InvalidConfig("mrd needs a non-empty retained set".into()))
}

/// Mean of the per-feature MRDs over a causal set.
pub fn mean_mrd(causal: &[usize], retained: &[usize]) -> Result<f64> {
    if causal.is_empty() {
        return Err(SmleError::InvalidConfig(
            "mean MRD needs a non-empty causal set".into(),
        ));
    }
    let total = causal
        .iter()
        .map(|&c| mrd(c, retained))
        .sum::<Result<usize>>()?;
    Ok(total as f64 / causal.len() as f64)
}

/// The `k` columns with the largest `|x_j^T y|`, ascending; ties go to the
/// lower index.
pub fn marginal_top_k(data: &Dataset, k: usize) -> Vec<usize> {
    let score = data.x.tr_mul(&data.y).map(f64::abs);
    let mut order: Vec<usize> = (0..data.p()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub screening: ScreeningConfig,
}

/// One cell of an experiment: a data-generating template and the screeners to
/// run on each replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub gen: GenConfig,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cell: String,
    pub method: String,
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub replications: usize,
    pub failures: usize,
    /// `None` when every replicate failed.
    pub ssr: Option<f64>,
    pub prr: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub mean_seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

struct Replicate {
    runs: Vec<std::result::Result<(Vec<usize>, usize, f64), String>>,
    causal: Vec<usize>,
}

fn run_replicate(spec: &ExperimentSpec, rep: usize) -> std::result::Result<Replicate, String> {
    let gen = GenConfig {
        seed: derive_seed(spec.master_seed, rep as u64),
        ..spec.gen.clone()
    };
    let data = gen_data(&gen).map_err(|e| e.to_string())?.dataset;
    let causal = data
        .truth
        .as_ref()
        .map(|t| t.causal_index.clone())
        .unwrap_or_default();
    let runs = spec
        .methods
        .iter()
        .map(|m| {
            let start = Instant::now();
            let res = run_screening(&data, &m.screening);
            let secs = start.elapsed().as_secs_f64();
            res.map(|r| (r.retained_features, r.iterations, secs))
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok(Replicate { runs, causal })
}

/// Runs every method on `replications` datasets drawn with seeds derived from
/// the master seed. Replicates run in parallel; results do not depend on
/// scheduling. A failing replicate is counted, not fatal.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.replications == 0 {
        return Err(SmleError::InvalidConfig(
            "replications must be at least 1".into(),
        ));
    }
    if spec.methods.is_empty() {
        return Err(SmleError::InvalidConfig("experiment has no methods".into()));
    }
    spec.gen.validate()?;
    let reps: Vec<std::result::Result<Replicate, String>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_replicate(spec, r))
        .collect();

    let mut rows = Vec::with_capacity(spec.methods.len());
    for (mi, method) in spec.methods.iter().enumerate() {
        let mut retained = Vec::new();
        let mut causal = Vec::new();
        let (mut iters, mut secs, mut failures) = (0usize, 0.0, 0usize);
        for rep in &reps {
            match rep.as_ref().map(|r| (&r.runs[mi], &r.causal)) {
                Ok((Ok((ret, it, s)), c)) => {
                    retained.push(ret.clone());
                    causal = c.clone();
                    iters += it;
                    secs += s;
                }
                _ => failures += 1,
            }
        }
        let ok = retained.len();
        let mean = |v: f64| (ok > 0).then(|| v / ok as f64);
        rows.push(ReportRow {
            cell: spec.name.clone(),
            method: method.name.clone(),
            family: spec.gen.family,
            n: spec.gen.n,
            p: spec.gen.p,
            k: method.screening.k,
            replications: spec.replications,
            failures,
            ssr: if ok > 0 {
                Some(ssr(&retained, &causal)?)
            } else {
                None
            },
            prr: if ok > 0 && !causal.is_empty() {
                Some(prr(&retained, &causal)?)
            } else {
                None
            },
            mean_iterations: mean(iters as f64),
            mean_seconds: mean(secs),
        });
    }
    Ok(ExperimentReport { rows })
}

pub fn run_experiments(specs: &[ExperimentSpec]) -> Result<ExperimentReport> {
    let mut out = ExperimentReport::default();
    for s in specs {
        out.rows.extend(run_experiment(s)?.rows);
    }
    Ok(out)
}

/// The three screening-performance cells: p = 1000, CS correlation 0.3, the
/// first four features causal with equal effects. Linear n = 100, effect 2.5,
/// k = 20; Poisson n = 200, effect 0.7, k = 10; logistic n = 400, effect 1.5,
/// k = 30. Each cell runs the screener with `fast` off and on.
pub fn canonical_benchmark(replications: usize, master_seed: u64) -> Vec<ExperimentSpec> {
    let cells = [
        ("linear", Family::Gaussian, 100, 2.5, 20),
        ("poisson", Family::Poisson, 200, 0.7, 10),
        ("logistic", Family::Binomial, 400, 1.5, 30),
    ];
    cells
        .iter()
        .enumerate()
        .map(|(i, &(name, family, n, effect, k))| ExperimentSpec {
            name: name.to_string(),
            gen: GenConfig {
                n,
                p: 1000,
                family,
                correlation: Correlation::CompoundSymmetry,
                rho: 0.3,
                num_truecoef: 4,
                pos_truecoef: Some(vec![0, 1, 2, 3]),
                effect_truecoef: Some(vec![effect; 4]),
                ..Default::default()
            },
            methods: [("smle", false), ("smle_fast", true)]
                .iter()
                .map(|&(m, fast)| Method {
                    name: m.to_string(),
                    screening: ScreeningConfig {
                        fast,
                        ..ScreeningConfig::with_k(k)
                    },
                })
                .collect(),
            replications,
            master_seed: derive_seed(master_seed, 1000 + i as u64),
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl ExperimentReport {
    /// Deterministic columns only; timings go to [`ExperimentReport::write_timing_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| SmleError::Io(e.to_string()))?;
        let wrap = |e: csv::Error| SmleError::Io(e.to_string());
        w.write_record([
            "cell",
            "method",
            "family",
            "n",
            "p",
            "k",
            "replications",
            "failures",
            "ssr",
            "prr",
            "mean_iterations",
        ])
        .map_err(wrap)?;
        for r in &self.rows {
            w.write_record([
                r.cell.clone(),
                r.method.clone(),
                r.family.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.k.to_string(),
                r.replications.to_string(),
                r.failures.to_string(),
                fmt_opt(r.ssr),
                fmt_opt(r.prr),
                fmt_opt(r.mean_iterations),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| SmleError::Io(e.to_string()))
    }

    pub fn write_timing_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| SmleError::Io(e.to_string()))?;
        let wrap = |e: csv::Error| SmleError::Io(e.to_string());
        w.write_record(["cell", "method", "mean_seconds"])
            .map_err(wrap)?;
        for r in &self.rows {
            w.write_record([r.cell.clone(), r.method.clone(), fmt_opt(r.mean_seconds)])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| SmleError::Io(e.to_string()))
    }

    pub fn row(&self, cell: &str, method: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.cell == cell && r.method == method)
    }
}

//! Seeded Monte Carlo experiments scoring every estimator by its mean squared
//! relative error against the oracle.
//!
//! Replication `l` of a plan draws from `ChaCha8(seed)` on stream `l`, so each
//! replication's data is fixed before any scheduling happens; results are
//! collected in replication order and reduced sequentially, which makes every
//! table independent of the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covar_coes::{estimate_all, RiskEstimates, ESTIMATORS};
use crate::error::{Error, Result};
use crate::models::{sample_model, ModelConfig, ModelSpec};
use crate::oracle::{OracleCache, OracleResult};
use crate::sample::TailConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub spec: ModelSpec,
    pub n: usize,
    pub k: usize,
    pub tau_prime: f64,
    pub replications: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        TailConfig::validate(self.n, self.k, Some(self.tau_prime))?;
        Ok(())
    }

    /// The random stream of replication `rep`.
    pub fn rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }

    /// Sample and estimate replication `rep`.
    pub fn replicate(&self, rep: usize) -> Result<RiskEstimates> {
        let mut rng = self.rng(rep);
        let sample = sample_model(&self.spec, self.n, &mut rng)?;
        estimate_all(&sample, self.k, self.tau_prime)
    }
}

/// One value per extrapolated estimator, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorValues {
    pub covar1: f64,
    pub covar2: f64,
    pub covar3: f64,
    pub coes1: f64,
    pub coes2: f64,
    pub coes3: f64,
    pub coes4: f64,
}

impl EstimatorValues {
    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            covar1: v[0],
            covar2: v[1],
            covar3: v[2],
            coes1: v[3],
            coes2: v[4],
            coes3: v[5],
            coes4: v[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.covar1,
            self.covar2,
            self.covar3,
            self.coes1,
            self.coes2,
            self.coes3,
            self.coes4,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        ESTIMATORS
            .iter()
            .position(|&e| e == name)
            .map(|i| self.to_array()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsreTable {
    pub plan: ExperimentPlan,
    pub truth: OracleResult,
    pub msre: EstimatorValues,
    /// Replications that returned an error, excluded from every MSRE.
    pub failure_count: usize,
    pub failure_reasons: BTreeMap<String, usize>,
    pub warning_counts: BTreeMap<String, usize>,
}

/// `(1/N) sum (estimate / truth - 1)^2`.
pub fn msre(estimates: &[f64], truth: f64) -> Result<f64> {
    if truth == 0.0 || !truth.is_finite() {
        return Err(Error::InvalidInput(format!("MSRE needs a finite non-zero truth, got {truth}")));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidInput("MSRE of an empty sequence".into()));
    }
    let sum: f64 = estimates
        .iter()
        .map(|&e| {
            let r = e / truth - 1.0;
            r * r
        })
        .sum();
    Ok(sum / estimates.len() as f64)
}

fn failure_key(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::InvalidConfig(_) => "invalid_config",
        Error::GammaOutOfRange { .. } => "gamma_out_of_range",
        Error::SubsampleSize { .. } => "subsample_size",
        Error::NoTailDependence(_) => "no_tail_dependence",
        Error::Numerical(_) => "numerical",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// All replications of `plan`, in replication order.
pub fn replications(plan: &ExperimentPlan) -> Vec<Result<RiskEstimates>> {
    (0..plan.replications)
        .into_par_iter()
        .map(|rep| plan.replicate(rep))
        .collect()
}

fn score(plan: &ExperimentPlan, truth: OracleResult, runs: &[Result<RiskEstimates>]) -> Result<MsreTable> {
    let mut columns: [Vec<f64>; 7] = Default::default();
    let mut failure_reasons = BTreeMap::new();
    let mut warning_counts = BTreeMap::new();
    for run in runs {
        match run {
            Ok(est) => {
                for (col, v) in columns.iter_mut().zip(est.extrapolated()) {
                    col.push(v);
                }
                for w in &est.warnings {
                    *warning_counts.entry(w.key().to_string()).or_insert(0) += 1;
                }
            }
            Err(e) => *failure_reasons.entry(failure_key(e).to_string()).or_insert(0) += 1,
        }
    }
    let failure_count = runs.len() - columns[0].len();
    if columns[0].is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replications failed ({failure_reasons:?})",
            runs.len()
        )));
    }
    let mut values = [0.0; 7];
    for (i, col) in columns.iter().enumerate() {
        let target = if i < 3 { truth.covar } else { truth.coes };
        values[i] = msre(col, target)?;
    }
    Ok(MsreTable {
        plan: *plan,
        truth,
        msre: EstimatorValues::from_array(values),
        failure_count,
        failure_reasons,
        warning_counts,
    })
}

/// MSRE of every estimator over `plan.replications` seeded replications.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<MsreTable> {
    run_experiment_with(plan, OracleCache::global())
}

pub fn run_experiment_with(plan: &ExperimentPlan, cache: &OracleCache) -> Result<MsreTable> {
    plan.validate()?;
    let truth = cache.get(&plan.spec, plan.tau_prime)?;
    let runs = replications(plan);
    score(plan, truth, &runs)
}

/// Every plan of a grid, in order.
pub fn run_grid(plans: &[ExperimentPlan]) -> Result<Vec<MsreTable>> {
    if plans.is_empty() {
        return Err(Error::InvalidConfig("empty experiment grid".into()));
    }
    plans.iter().map(run_experiment).collect()
}

/// Per-replication `estimate / truth` for every estimator, for external box plots.
pub fn ratio_samples(plan: &ExperimentPlan, truth: &OracleResult) -> Vec<(usize, [f64; 7])> {
    replications(plan)
        .into_iter()
        .enumerate()
        .filter_map(|(rep, r)| r.ok().map(|e| (rep, e)))
        .map(|(rep, e)| {
            let mut v = e.extrapolated();
            for (i, x) in v.iter_mut().enumerate() {
                *x /= if i < 3 { truth.covar } else { truth.coes };
            }
            (rep, v)
        })
        .collect()
}

/// Tables grouped into `(tau', n, k)` blocks with one row per model, in first-seen order.
pub fn format_grid(tables: &[MsreTable]) -> String {
    type Block<'a> = ((u64, usize, usize), Vec<&'a MsreTable>);
    let mut blocks: Vec<Block> = Vec::new();
    for t in tables {
        let key = (t.plan.tau_prime.to_bits(), t.plan.n, t.plan.k);
        match blocks.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(t),
            None => blocks.push((key, vec![t])),
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<14}", "Model");
    for name in ESTIMATORS {
        let _ = write!(out, "{name:>10}");
    }
    out.push('\n');
    for ((_, n, k), rows) in &blocks {
        let tau = rows[0].plan.tau_prime;
        let _ = writeln!(out, "tau' = {tau}, n = {n}, k = {k}");
        for t in rows {
            let _ = write!(out, "{:<14}", t.plan.spec.family.label());
            for v in t.msre.to_array() {
                let _ = write!(out, "{v:>10.5}");
            }
            if t.failure_count > 0 {
                let _ = write!(out, "  ({} failed)", t.failure_count);
            }
            out.push('\n');
        }
    }
    out
}

/// One delimited row per table.
pub fn grid_tsv(tables: &[MsreTable]) -> String {
    let mut out = String::from("model\tn\tk\ttau_prime\treplications\tseed\tfailures");
    for name in ESTIMATORS {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for t in tables {
        let p = &t.plan;
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.spec.family, p.n, p.k, p.tau_prime, p.replications, p.seed, t.failure_count
        );
        for v in t.msre.to_array() {
            let _ = write!(out, "\t{v:e}");
        }
        out.push('\n');
    }
    out
}

/// Grid description read from a plan file.
///
/// ```json
/// { "replications": 100, "tau_prime": 0.99,
///   "experiments": [ { "model": { "family": "cauchy" }, "n": 2000, "k": 250 } ] }
/// ```
///
/// Per-experiment `tau_prime` and `replications` override the file defaults;
/// every experiment uses the run's seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub tau_prime: Option<f64>,
    pub experiments: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub model: ModelConfig,
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub tau_prime: Option<f64>,
    #[serde(default)]
    pub replications: Option<usize>,
}

fn default_replications() -> usize {
    100
}

impl PlanFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("plan file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Expand into validated plans; `seed` overrides the file's seed.
    pub fn plans(&self, seed: Option<u64>) -> Result<Vec<ExperimentPlan>> {
        let seed = seed
            .or(self.seed)
            .ok_or_else(|| Error::InvalidConfig("no seed in plan file or on the command line".into()))?;
        if self.experiments.is_empty() {
            return Err(Error::InvalidConfig("plan file lists no experiments".into()));
        }
        self.experiments
            .iter()
            .map(|e| {
                let tau_prime = e.tau_prime.or(self.tau_prime).ok_or_else(|| {
                    Error::InvalidConfig("experiment without tau_prime and no file default".into())
                })?;
                let plan = ExperimentPlan {
                    spec: ModelSpec::from_config(&e.model)?,
                    n: e.n,
                    k: e.k,
                    tau_prime,
                    replications: e.replications.unwrap_or(self.replications),
                    seed,
                };
                plan.validate()?;
                Ok(plan)
            })
            .collect()
    }
}

/// Writes `msre.tsv`, `msre.txt`, `msre.json`, `oracle.tsv` and `ratios.tsv` into `dir`.
pub fn write_outputs(dir: &Path, tables: &[MsreTable]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("msre.tsv"), grid_tsv(tables))?;
    fs::write(dir.join("msre.txt"), format_grid(tables))?;
    let mut json = serde_json::to_string_pretty(tables)?;
    json.push('\n');
    fs::write(dir.join("msre.json"), json)?;

    let mut oracle = String::from(OracleResult::TSV_HEADER);
    oracle.push('\n');
    let mut ratios = String::from("model\tn\tk\ttau_prime\trep");
    for name in ESTIMATORS {
        ratios.push('\t');
        ratios.push_str(name);
    }
    ratios.push('\n');
    for t in tables {
        let p = &t.plan;
        oracle.push_str(&t.truth.tsv_row(p.spec.family));
        oracle.push('\n');
        for (rep, v) in ratio_samples(p, &t.truth) {
            let _ = write!(ratios, "{}\t{}\t{}\t{}\t{}", p.spec.family, p.n, p.k, p.tau_prime, rep);
            for x in v {
                let _ = write!(ratios, "\t{x}");
            }
            ratios.push('\n');
        }
    }
    fs::write(dir.join("oracle.tsv"), oracle)?;
    fs::write(dir.join("ratios.tsv"), ratios)?;
    Ok(())
}

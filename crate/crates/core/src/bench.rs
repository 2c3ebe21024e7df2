//! Multistart experiment runner, results files and performance profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::rfe;
use crate::dataset::{load_csv, load_sparse, standardize, subsample, Dataset};
use crate::decomposition::{dec_sub_light, naive_alternation};
use crate::error::{Error, Result};
use crate::kernel::{FeatureMask, KernelSpec};
use crate::local_search::{initial_mask, ls, ls_star, LsConfig};
use crate::minlp::{brute_force_minlp, half_features, Incumbent, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Ls,
    LsStar,
    DecSubLight,
    Rfe1,
    Rfe2,
    NaiveAlt,
    BruteForce,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Ls,
        Algorithm::LsStar,
        Algorithm::DecSubLight,
        Algorithm::Rfe1,
        Algorithm::Rfe2,
        Algorithm::NaiveAlt,
        Algorithm::BruteForce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ls => "LS",
            Algorithm::LsStar => "LS_STAR",
            Algorithm::DecSubLight => "DEC_SUB_LIGHT",
            Algorithm::Rfe1 => "RFE1",
            Algorithm::Rfe2 => "RFE2",
            Algorithm::NaiveAlt => "NAIVE_ALT",
            Algorithm::BruteForce => "BRUTE_FORCE",
        }
    }

    /// Whether the result depends on the run seed.
    pub fn is_seeded(self) -> bool {
        !matches!(self, Algorithm::Rfe1 | Algorithm::Rfe2 | Algorithm::BruteForce)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Accepts the record names and the lower-case command-line spellings.
    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        let upper = match upper.as_str() {
            "NAIVE" => "NAIVE_ALT",
            other => other,
        };
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == upper)
            .ok_or_else(|| Error::domain(format!("unknown algorithm `{s}`")))
    }
}

/// Search parameters shared by every run of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub samples_per_round: usize,
    pub pool_size: usize,
    pub ls_star_window: usize,
    pub dec_sub_window: usize,
    pub p: Option<usize>,
    pub max_rounds: usize,
    pub naive_max_rounds: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let base = LsConfig::default();
        SearchSettings {
            samples_per_round: base.samples_per_round,
            pool_size: base.pool_size,
            ls_star_window: LsConfig::ls_star_default(0).stall_window,
            dec_sub_window: LsConfig::dec_sub_default(0).stall_window,
            p: None,
            max_rounds: base.max_rounds,
            naive_max_rounds: 100,
        }
    }
}

impl SearchSettings {
    pub fn ls_config(&self, algorithm: Algorithm, seed: u64) -> LsConfig {
        LsConfig {
            samples_per_round: self.samples_per_round,
            pool_size: self.pool_size,
            stall_window: match algorithm {
                Algorithm::DecSubLight => self.dec_sub_window,
                _ => self.ls_star_window,
            },
            p: self.p,
            seed,
            max_rounds: self.max_rounds,
            ..LsConfig::default()
        }
    }
}

/// Runs one algorithm from `start`. Seeded algorithms take their randomness
/// from `seed`; RFE and enumeration ignore `start`.
pub fn run_algorithm(
    algorithm: Algorithm,
    p: &ProblemSpec,
    start: &FeatureMask,
    settings: &SearchSettings,
    seed: u64,
) -> Result<Incumbent> {
    let cfg = settings.ls_config(algorithm, seed);
    Ok(match algorithm {
        Algorithm::Ls => ls(p, start, None)?.incumbent,
        Algorithm::LsStar => ls_star(p, start, &cfg)?.incumbent,
        Algorithm::DecSubLight => dec_sub_light(p, start, &cfg)?.incumbent,
        Algorithm::Rfe1 => rfe(p, false)?,
        Algorithm::Rfe2 => rfe(p, true)?,
        Algorithm::NaiveAlt => naive_alternation(p, start, settings.naive_max_rounds)?.incumbent,
        Algorithm::BruteForce => brute_force_minlp(p)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Sparse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub id: String,
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: DataFormat,
    /// CSV only.
    #[serde(default)]
    pub label_column: Option<String>,
    /// CSV only; defaults to the larger of the two label values.
    #[serde(default)]
    pub positive_label: Option<String>,
    /// Sparse only: fixes the feature count.
    #[serde(default)]
    pub n_features: Option<usize>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Stratified subsample to this many rows.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub subsample_seed: u64,
}

fn default_format() -> DataFormat {
    DataFormat::Csv
}

fn default_true() -> bool {
    true
}

impl DatasetSource {
    /// Loads, optionally subsamples, and standardizes. Relative paths are
    /// resolved against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let path = if self.path.is_absolute() {
            self.path.clone()
        } else {
            base.join(&self.path)
        };
        let mut d = match self.format {
            DataFormat::Csv => {
                let label = self.label_column.as_deref().unwrap_or("label");
                let positive = match &self.positive_label {
                    Some(l) => l.clone(),
                    None => crate::dataset::csv_label_values(&path, label)?
                        .pop()
                        .ok_or_else(|| Error::domain(format!("no labels in {}", path.display())))?,
                };
                load_csv(&path, label, &positive)?
            }
            DataFormat::Sparse => load_sparse(&path, self.n_features)?,
        };
        if let Some(m) = self.subsample {
            d = subsample(&d, m, self.subsample_seed)?;
        }
        if self.standardize {
            d = standardize(&d);
        }
        Ok(d.with_source_id(self.id.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelSpec>,
    #[serde(default = "default_cost", rename = "C")]
    pub cost: f64,
    /// Feature budget; `None` means half the features.
    #[serde(default, rename = "B")]
    pub budget: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub search: SearchSettings,
}

fn default_kernels() -> Vec<KernelSpec> {
    vec![KernelSpec::Polynomial {
        gamma: 0.1,
        c: 1.0,
        degree: 2,
    }]
}

fn default_cost() -> f64 {
    10.0
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::config("datasets", "at least one dataset is required"));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            if d.id.is_empty() {
                return Err(Error::config(format!("datasets[{i}].id"), "must not be empty"));
            }
            if d.subsample == Some(0) {
                return Err(Error::config(format!("datasets[{i}].subsample"), "must be positive"));
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "at least one algorithm is required"));
        }
        if self.kernels.is_empty() {
            return Err(Error::config("kernels", "at least one kernel is required"));
        }
        for (i, k) in self.kernels.iter().enumerate() {
            k.validate()
                .map_err(|e| Error::config(format!("kernels[{i}]"), e.to_string()))?;
            if !k.is_polynomial() {
                for a in [Algorithm::DecSubLight, Algorithm::NaiveAlt] {
                    if self.algorithms.contains(&a) {
                        return Err(Error::config(
                            format!("kernels[{i}]"),
                            format!("{a} requires a polynomial kernel"),
                        ));
                    }
                }
            }
        }
        if !(self.cost > 0.0 && self.cost.is_finite()) {
            return Err(Error::config("C", "must be positive and finite"));
        }
        if self.budget == Some(0) {
            return Err(Error::config("B", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        self.search
            .ls_config(Algorithm::LsStar, 0)
            .validate()
            .and(self.search.ls_config(Algorithm::DecSubLight, 0).validate())
            .map_err(|e| match e {
                Error::Config { field, message } => Error::config(format!("search.{field}"), message),
                other => other,
            })
    }

    /// Loads every dataset, resolving relative paths against `base`.
    pub fn load_datasets(&self, base: &Path) -> Result<Vec<Dataset>> {
        self.datasets.iter().map(|s| s.load(base)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset_id: String,
    pub algorithm: Algorithm,
    pub kernel: KernelSpec,
    #[serde(rename = "B")]
    pub budget: usize,
    #[serde(rename = "C")]
    pub cost: f64,
    pub seed: u64,
    pub ub: f64,
    pub wall_seconds: f64,
    pub mask: FeatureMask,
    pub converged: bool,
}

impl RunRecord {
    fn instance_key(&self) -> String {
        format!("{}|{}|B={}|C={}", self.dataset_id, self.kernel, self.budget, self.cost)
    }
}

struct Job<'a> {
    dataset: &'a Dataset,
    kernel: KernelSpec,
    algorithm: Algorithm,
    seed: u64,
}

/// Runs the cross product datasets x kernels x algorithms x seeds. All
/// algorithms given the same seed start from the same random mask. Times cover
/// the algorithm call only. With `parallel_runs > 1` runs execute
/// concurrently; the returned order is the same either way.
pub fn run_experiment(cfg: &ExperimentConfig, datasets: &[Dataset], parallel_runs: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for d in datasets {
        for &kernel in &cfg.kernels {
            for &algorithm in &cfg.algorithms {
                for &seed in &cfg.seeds {
                    jobs.push(Job {
                        dataset: d,
                        kernel,
                        algorithm,
                        seed,
                    });
                }
            }
        }
    }
    let run = |job: &Job| -> Result<RunRecord> {
        let budget = cfg.budget.unwrap_or_else(|| half_features(job.dataset.n_features()));
        let p = ProblemSpec::new(job.dataset.clone(), job.kernel, cfg.cost, budget)?;
        let start = initial_mask(p.n_features(), budget, job.seed)?;
        let clock = Instant::now();
        let inc = run_algorithm(job.algorithm, &p, &start, &cfg.search, job.seed)
            .map_err(|e| Error::domain(format!("{} on {}: {e}", job.algorithm, job.dataset.source_id())))?;
        let wall_seconds = clock.elapsed().as_secs_f64();
        Ok(RunRecord {
            dataset_id: job.dataset.source_id().to_string(),
            algorithm: job.algorithm,
            kernel: job.kernel,
            budget,
            cost: cfg.cost,
            seed: job.seed,
            ub: inc.ub,
            wall_seconds,
            converged: inc.alpha.converged,
            mask: inc.mask,
        })
    };
    if parallel_runs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel_runs)
            .build()
            .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    }
}

/// Appends records as JSON lines, creating the file if needed.
pub fn append_records(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| Error::format(k + 1, e.to_string()))?,
        );
    }
    Ok(records)
}

/// Per-run rows for box plots: `algorithm,dataset,seed,ub,seconds`.
pub fn write_boxplot_csv(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["algorithm", "dataset", "seed", "ub", "seconds"]).map_err(csv_io)?;
    for r in records {
        w.write_record([
            r.algorithm.name().to_string(),
            r.dataset_id.clone(),
            r.seed.to_string(),
            r.ub.to_string(),
            r.wall_seconds.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::domain(format!("{kind:?}")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub tau: f64,
    pub gamma_per_algorithm: BTreeMap<Algorithm, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceProfile {
    pub algorithms: Vec<Algorithm>,
    /// `dataset|kernel|B|C`, in order of first appearance.
    pub instances: Vec<String>,
    /// `eta[a][p]`: best objective of algorithm `a` on instance `p` divided by
    /// the best objective of any algorithm on `p`. Zero when `a` has no run.
    pub eta: Vec<Vec<f64>>,
    pub points: Vec<ProfilePoint>,
}

pub const PROFILE_GRID: usize = 200;

/// Performance ratios and cumulative curves. An algorithm's performance on an
/// instance is its lowest objective over seeds. Objectives are nonpositive, so
/// the ratio to the best lies in `[0, 1]` with 1 for the best algorithm;
/// `gamma(tau)` is the fraction of instances with ratio at least `tau`.
pub fn performance_profiles(records: &[RunRecord]) -> Result<PerformanceProfile> {
    if records.is_empty() {
        return Err(Error::domain("performance profiles need at least one record"));
    }
    let mut instances: Vec<String> = Vec::new();
    let mut algorithms: Vec<Algorithm> = Vec::new();
    let mut perf: BTreeMap<(usize, Algorithm), f64> = BTreeMap::new();
    for r in records {
        let key = r.instance_key();
        let p = match instances.iter().position(|k| *k == key) {
            Some(p) => p,
            None => {
                instances.push(key);
                instances.len() - 1
            }
        };
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
        perf.entry((p, r.algorithm))
            .and_modify(|v| *v = v.min(r.ub))
            .or_insert(r.ub);
    }
    algorithms.sort();
    let best: Vec<f64> = (0..instances.len())
        .map(|p| {
            algorithms
                .iter()
                .filter_map(|&a| perf.get(&(p, a)).copied())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let eta: Vec<Vec<f64>> = algorithms
        .iter()
        .map(|&a| {
            (0..instances.len())
                .map(|p| match perf.get(&(p, a)) {
                    None => 0.0,
                    Some(&v) if v == best[p] => 1.0,
                    Some(&v) => (v / best[p]).clamp(0.0, 1.0),
                })
                .collect()
        })
        .collect();
    let count = instances.len() as f64;
    let points = (0..PROFILE_GRID)
        .map(|k| {
            let tau = k as f64 / (PROFILE_GRID - 1) as f64;
            let gamma_per_algorithm = algorithms
                .iter()
                .zip(&eta)
                .map(|(&a, row)| (a, row.iter().filter(|&&e| e >= tau).count() as f64 / count))
                .collect();
            ProfilePoint {
                tau,
                gamma_per_algorithm,
            }
        })
        .collect();
    Ok(PerformanceProfile {
        algorithms,
        instances,
        eta,
        points,
    })
}

/// `tau` followed by one column per algorithm.
pub fn write_profile_csv(path: impl AsRef<Path>, profile: &PerformanceProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["tau".to_string()];
    header.extend(profile.algorithms.iter().map(|a| a.name().to_string()));
    w.write_record(&header).map_err(csv_io)?;
    for pt in &profile.points {
        let mut row = vec![pt.tau.to_string()];
        row.extend(profile.algorithms.iter().map(|a| pt.gamma_per_algorithm[a].to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
        assert_eq!("ls_star".parse::<Algorithm>().unwrap(), Algorithm::LsStar);
        assert_eq!("naive".parse::<Algorithm>().unwrap(), Algorithm::NaiveAlt);
        assert!("simplex".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_errors_name_fields() {
        let bad = r#"{"datasets":[{"id":"x","path":"x.csv"}],"algorithms":["LS"],
                      "kernels":[{"kind":"polynomial","gamma":1.0,"c":1.0,"degree":2},
                                 {"kind":"gaussian","gamma":-1.0}]}"#;
        match ExperimentConfig::from_json(bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "kernels[1]"),
            e => panic!("{e}"),
        }
        let bad = r#"{"datasets":[{"id":"x","path":"x.csv"}],"algorithms":["LS"],"seeds":[]}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config { field, .. }) if field == "seeds"));
        let bad = r#"{"datasets":[{"id":"x","path":"x.csv"}],"algorithms":["LS"],"search":{"pool_size":0}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config { field, .. }) if field == "search.pool_size"));
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"datasets":[{"id":"x","path":"x.csv"}],"algorithms":["LS"]}"#).unwrap();
        assert_eq!(cfg.cost, 10.0);
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.kernels[0].gamma(), 0.1);
        assert_eq!(cfg.search.samples_per_round, 500);
        assert_eq!(cfg.search.pool_size, 200);
        assert_eq!(cfg.search.ls_star_window, 5);
        assert_eq!(cfg.search.dec_sub_window, 10);
    }

    #[test]
    fn empty_profile_is_an_error() {
        assert!(performance_profiles(&[]).is_err());
    }
}

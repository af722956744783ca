//! Benchmark configuration and the end-to-end pipeline.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::datasets::{generate_dataset, Dataset, DatasetKind};
use super::pipeline::{boundary_grid, compute_gram_with, kernel_rows, BoundaryGrid, GramOptions, Measurement, StreamTag};
use crate::error::{Error, Result, StageExt};
use crate::kernels::KernelSpec;
use crate::optics::ShotNoiseConfig;
use crate::svm::{accuracy, condition_gram, solve, ConditionPolicy, GramMatrix, SvmSolution, DEFAULT_GAMMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSettings {
    pub name: DatasetKind,
    pub seed: u64,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    pub events: u64,
    pub fidelity: f64,
    pub seed: u64,
    #[serde(default)]
    pub pin_diagonal: bool,
}

impl NoiseSettings {
    pub fn shot_noise(&self) -> Result<ShotNoiseConfig> {
        ShotNoiseConfig::new(self.events, self.fidelity, self.seed)
    }
}

/// One benchmark run. Reads from TOML:
///
/// ```toml
/// kernel = "cosine:1"
/// gamma = 1.0
/// condition = "clip"
/// grid_side = 35
///
/// [dataset]
/// name = "moons"
/// seed = 7
/// train_size = 40
/// test_size = 60
///
/// [noise]          # optional
/// events = 2500
/// fidelity = 0.98
/// seed = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub condition: ConditionPolicy,
    #[serde(default = "default_grid_side")]
    pub grid_side: usize,
    pub dataset: DatasetSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSettings>,
}

fn default_train_size() -> usize {
    40
}

fn default_test_size() -> usize {
    60
}

fn default_kernel() -> String {
    "cosine:1".into()
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_grid_side() -> usize {
    35
}

impl BenchmarkConfig {
    pub fn new(name: DatasetKind, seed: u64, kernel: &str) -> Self {
        Self {
            kernel: kernel.into(),
            gamma: DEFAULT_GAMMA,
            condition: ConditionPolicy::default(),
            grid_side: default_grid_side(),
            dataset: DatasetSettings {
                name,
                seed,
                train_size: default_train_size(),
                test_size: default_test_size(),
            },
            noise: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::parse(&self.kernel, 2)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_spec()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.grid_side < 2 {
            return Err(Error::invalid(format!("grid_side must be >= 2, got {}", self.grid_side)));
        }
        if self.dataset.train_size < 2 || self.dataset.test_size < 2 {
            return Err(Error::invalid("train_size and test_size must be >= 2"));
        }
        if let Some(n) = &self.noise {
            n.shot_noise()?;
        }
        Ok(())
    }
}

/// Serializable summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub dataset: DatasetKind,
    pub data_seed: u64,
    pub kernel: String,
    pub gamma: f64,
    pub condition: ConditionPolicy,
    pub noise: Option<NoiseSettings>,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub gram_evaluations: usize,
    pub gram_min_eigenvalue: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub total_slack: f64,
    pub train_id: String,
    pub grid_side: usize,
}

impl BenchSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub summary: BenchSummary,
    pub data: Dataset,
    /// Gram matrix as measured, before conditioning.
    pub gram: GramMatrix,
    pub solution: SvmSolution,
    pub test_rows: DMatrix<f64>,
    pub grid: BoundaryGrid,
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchReport> {
    run_benchmark_with(config, &GramOptions::default())
}

/// Generate, measure, condition, train, evaluate and score the decision grid.
pub fn run_benchmark_with(config: &BenchmarkConfig, gram_options: &GramOptions) -> Result<BenchReport> {
    config.validate().stage("config")?;
    let kernel = config.kernel_spec().stage("config")?;
    let noise = config.noise.as_ref().map(NoiseSettings::shot_noise).transpose().stage("config")?;
    let meas = Measurement {
        kernel: &kernel,
        noise: noise.as_ref(),
    };
    let ds = &config.dataset;
    let data = generate_dataset(ds.name, ds.seed, ds.train_size, ds.test_size, kernel.convention()).stage("generate")?;

    let options = GramOptions {
        pin_diagonal: gram_options.pin_diagonal || config.noise.as_ref().is_some_and(|n| n.pin_diagonal),
        ..*gram_options
    };
    let run = compute_gram_with(data.train.points(), &kernel, noise.as_ref(), &options).stage("gram")?;
    let conditioned = condition_gram(&run.gram, config.condition);
    let solution = solve(&conditioned, data.train.labels(), config.gamma, &data.train.id()).stage("train")?;
    let train_accuracy = accuracy(&solution.model, conditioned.values(), data.train.labels()).stage("train")?;

    let test_rows = kernel_rows(data.test.points(), data.train.points(), meas, StreamTag::Test).stage("evaluate")?;
    let test_accuracy = accuracy(&solution.model, &test_rows, data.test.labels()).stage("evaluate")?;
    let grid = boundary_grid(&solution.model, data.train.points(), meas, config.grid_side).stage("boundary")?;

    let summary = BenchSummary {
        dataset: ds.name,
        data_seed: ds.seed,
        kernel: kernel.to_string(),
        gamma: config.gamma,
        condition: config.condition,
        noise: config.noise.clone(),
        train_size: data.train.len(),
        test_size: data.test.len(),
        train_accuracy,
        test_accuracy,
        gram_evaluations: run.evaluations,
        gram_min_eigenvalue: run.gram.min_eigenvalue(),
        objective: solution.objective,
        kkt_residual: solution.kkt_residual,
        total_slack: solution.total_slack(),
        train_id: solution.model.train_id.clone(),
        grid_side: grid.side,
    };
    Ok(BenchReport {
        summary,
        data,
        gram: run.gram,
        solution,
        test_rows,
        grid,
    })
}

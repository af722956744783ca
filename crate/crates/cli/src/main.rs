//! `qkernel`: datasets, Gram matrices, training, evaluation and benchmark reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkernel::bench::emit::{
    boundary_svg, read_dataset, read_grid, read_matrix, read_model, write_dataset, write_grid, write_json, write_matrix,
};
use qkernel::bench::pipeline::{boundary_grid, kernel_rows, Measurement, StreamTag};
use qkernel::bench::{
    compute_gram, emit_report, generate_dataset, run_benchmark, BenchmarkConfig, DatasetKind, Format, NoiseSettings,
};
use qkernel::error::StageExt;
use qkernel::kernels::KernelSpec;
use qkernel::optics::ShotNoiseConfig;
use qkernel::resolution::{resolution_sweep, sweep_to_csv, ProfileFamily};
use qkernel::svm::{accuracy, condition_gram, solve, ConditionPolicy, GramMatrix, DEFAULT_GAMMA};
use qkernel::{Error, Result};

#[derive(Parser)]
#[command(name = "qkernel", version, about = "Quantum-kernel classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset (train.csv, test.csv).
    Gen(GenArgs),
    /// Compute a Gram matrix for a dataset file.
    Gram(GramArgs),
    /// Train a classifier from a Gram matrix.
    Train(TrainArgs),
    /// Report test accuracy of a trained model.
    Eval(EvalArgs),
    /// Score the decision function on a grid (grid.csv, optional SVG).
    Boundary(BoundaryArgs),
    /// Run the full pipeline and write every artifact.
    Bench(BenchArgs),
    /// Accuracy table over datasets, kernels and penalties.
    Sweep(SweepArgs),
    /// Kernel-resolution table for amplitude-profile families.
    Resolve(ResolveArgs),
}

#[derive(Args)]
struct NoiseArgs {
    /// Detection events per kernel entry; enables shot noise.
    #[arg(long)]
    events: Option<u64>,
    /// Fraction of events drawn from the ideal circuit.
    #[arg(long, default_value_t = 1.0)]
    fidelity: f64,
}

impl NoiseArgs {
    fn config(&self, seed: u64) -> Result<Option<ShotNoiseConfig>> {
        self.events
            .map(|events| ShotNoiseConfig::new(events, self.fidelity, seed))
            .transpose()
    }

    fn settings(&self, seed: u64) -> Option<NoiseSettings> {
        self.events.map(|events| NoiseSettings {
            events,
            fidelity: self.fidelity,
            seed,
            pin_diagonal: false,
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "concentric")]
    dataset: DatasetKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    train_size: usize,
    #[arg(long, default_value_t = 60)]
    test_size: usize,
    /// Kernel whose input convention the data is rescaled into.
    #[arg(long, default_value = "cosine:1")]
    kernel: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GramArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "cosine:1")]
    kernel: String,
    /// Shot-noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value = "gram.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    gram: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value = "clip")]
    condition: ConditionPolicy,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "cosine:1")]
    kernel: String,
    /// Shot-noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    /// Test set drawn as triangles in the SVG.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "cosine:1")]
    kernel: String,
    #[arg(long, default_value_t = 35)]
    side: usize,
    /// Shot-noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value = "grid.csv")]
    out: PathBuf,
    /// Also write a contour plot (needs --test).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<DatasetKind>,
    /// Dataset seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    events: Option<u64>,
    #[arg(long)]
    fidelity: Option<f64>,
    /// Shot-noise seed (defaults to the dataset seed).
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "concentric,moons,xor")]
    datasets: Vec<DatasetKind>,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "cosine:1/2,cosine:1,cosine:2")]
    kernels: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    gammas: Vec<f64>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResolveArgs {
    /// Hilbert-space dimensions, e.g. `2..32` or `4,8,16`.
    #[arg(long, default_value = "2..32")]
    lens: String,
    #[arg(long, value_delimiter = ',', default_value = "msi,tsq:3,optimized")]
    families: Vec<ProfileFamily>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_lens(text: &str) -> Result<Vec<usize>> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad dimension '{s}'")))
    };
    match text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(Error::InvalidArgument(format!("empty range {text}")));
            }
            Ok((a..=b).collect())
        }
        None => text.split(',').map(num).collect(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn kernel(text: &str) -> Result<KernelSpec> {
    KernelSpec::parse(text, 2)
}

fn gen(a: &GenArgs) -> Result<()> {
    let spec = kernel(&a.kernel).stage("config")?;
    let data = generate_dataset(a.dataset, a.seed, a.train_size, a.test_size, spec.convention()).stage("generate")?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    write_dataset(&a.out.join("train.csv"), &data.train).stage("write")?;
    write_dataset(&a.out.join("test.csv"), &data.test).stage("write")?;
    println!("wrote {} train and {} test points to {}", data.train.len(), data.test.len(), a.out.display());
    Ok(())
}

fn gram(a: &GramArgs) -> Result<()> {
    let spec = kernel(&a.kernel).stage("config")?;
    let noise = a.noise.config(a.seed).stage("config")?;
    let set = read_dataset(&a.data).stage("read")?;
    let run = compute_gram(set.points(), &spec, noise.as_ref()).stage("gram")?;
    write_matrix(&a.out, run.gram.values()).stage("write")?;
    println!("{} kernel evaluations, {}x{} Gram matrix", run.evaluations, set.len(), set.len());
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let set = read_dataset(&a.data).stage("read")?;
    let values = read_matrix(&a.gram).stage("read")?;
    let gram = GramMatrix::exact(values.clone())
        .or_else(|_| GramMatrix::sampled(values, 0))
        .stage("train")?;
    let gram = condition_gram(&gram, a.condition);
    let sol = solve(&gram, set.labels(), a.gamma, &set.id()).stage("train")?;
    let acc = accuracy(&sol.model, gram.values(), set.labels()).stage("train")?;
    write_json(&a.out, &sol.model).stage("write")?;
    println!(
        "train accuracy {acc:.4}, objective {:.6e}, KKT residual {:.2e}",
        sol.objective, sol.kkt_residual
    );
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let spec = kernel(&a.kernel).stage("config")?;
    let noise = a.noise.config(a.seed).stage("config")?;
    let model = read_model(&a.model).stage("read")?;
    let train = read_dataset(&a.train).stage("read")?;
    let test = read_dataset(&a.test).stage("read")?;
    let meas = Measurement {
        kernel: &spec,
        noise: noise.as_ref(),
    };
    let rows = kernel_rows(test.points(), train.points(), meas, StreamTag::Test).stage("evaluate")?;
    let acc = accuracy(&model, &rows, test.labels()).stage("evaluate")?;
    println!("test accuracy {acc:.4} ({} points)", test.len());
    Ok(())
}

fn boundary(a: &BoundaryArgs) -> Result<()> {
    let spec = kernel(&a.kernel).stage("config")?;
    let noise = a.noise.config(a.seed).stage("config")?;
    let model = read_model(&a.model).stage("read")?;
    let train = read_dataset(&a.train).stage("read")?;
    let meas = Measurement {
        kernel: &spec,
        noise: noise.as_ref(),
    };
    let grid = boundary_grid(&model, train.points(), meas, a.side).stage("boundary")?;
    write_grid(&a.out, &grid).stage("write")?;
    if let Some(svg) = &a.svg {
        let test_path = a
            .test
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--svg needs --test".into()))
            .stage("config")?;
        let test = read_dataset(test_path).stage("read")?;
        let grid = read_grid(&a.out).stage("read")?;
        emit(Some(svg), &boundary_svg(&grid, &train, &test)).stage("write")?;
    }
    println!("{} grid nodes written to {}", grid.len(), a.out.display());
    Ok(())
}

fn bench_config(a: &BenchArgs) -> Result<BenchmarkConfig> {
    let mut cfg = match &a.config {
        Some(p) => BenchmarkConfig::load(p)?,
        None => BenchmarkConfig::new(DatasetKind::Concentric, 0, "cosine:1"),
    };
    if let Some(d) = a.dataset {
        cfg.dataset.name = d;
    }
    if let Some(s) = a.seed {
        cfg.dataset.seed = s;
    }
    if let Some(k) = &a.kernel {
        cfg.kernel = k.clone();
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if let Some(s) = a.side {
        cfg.grid_side = s;
    }
    if a.events.is_some() || a.fidelity.is_some() || a.noise_seed.is_some() {
        let base = cfg.noise.clone().unwrap_or(NoiseSettings {
            events: 2500,
            fidelity: 1.0,
            seed: cfg.dataset.seed,
            pin_diagonal: false,
        });
        cfg.noise = Some(NoiseSettings {
            events: a.events.unwrap_or(base.events),
            fidelity: a.fidelity.unwrap_or(base.fidelity),
            seed: a.noise_seed.unwrap_or(base.seed),
            pin_diagonal: base.pin_diagonal,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let cfg = bench_config(a).stage("config")?;
    let report = run_benchmark(&cfg)?;
    emit_report(&report, &a.out, &Format::ALL).stage("write")?;
    emit(Some(&a.out.join("config.toml")), &cfg.to_toml()).stage("write")?;
    let s = &report.summary;
    println!(
        "{} {} seed {}: train {:.4}, test {:.4}, {} Gram evaluations -> {}",
        s.dataset,
        s.kernel,
        s.data_seed,
        s.train_accuracy,
        s.test_accuracy,
        s.gram_evaluations,
        a.out.display()
    );
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mut table = String::from("dataset,seed,kernel,gamma,train_accuracy,test_accuracy\n");
    for &d in &a.datasets {
        for k in &a.kernels {
            for &g in &a.gammas {
                let mut cfg = BenchmarkConfig::new(d, a.seed, k);
                cfg.gamma = g;
                cfg.grid_side = 2;
                cfg.noise = a.noise.settings(a.seed);
                let s = run_benchmark(&cfg)?.summary;
                table += &format!("{d},{},{},{g},{},{}\n", a.seed, s.kernel, s.train_accuracy, s.test_accuracy);
            }
        }
    }
    emit(a.out.as_deref(), &table).stage("write")
}

fn resolve(a: &ResolveArgs) -> Result<()> {
    let lens = parse_lens(&a.lens).stage("config")?;
    let rows = resolution_sweep(lens, &a.families).stage("resolve")?;
    emit(a.out.as_deref(), &sweep_to_csv(&rows)).stage("write")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Gram(a) => gram(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Boundary(a) => boundary(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => sweep(a),
        Command::Resolve(a) => resolve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // stage-tagged errors already carry their cause chain in the message
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

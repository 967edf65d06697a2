use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stsgd::bench::{run_benchmark, write_csv, BenchmarkSpec};
use stsgd::config::RunConfig;
use stsgd::data::{read_libsvm, Dataset, FeatureScaling};
use stsgd::metrics::{selection_by_density, sparsity_pct, test_error, SelectedSet};
use stsgd::model::{read_model, write_model};
use stsgd::synth::{generate, write_support, SynthConfig};
use stsgd::{run_baseline, train, BaselineKind, Error, LossKind};

const OUT_DIR_ENV: &str = "STSGD_OUT_DIR";

#[derive(Parser)]
#[command(name = "stsgd", version, about = "Sparse linear classifiers with stabilized truncated SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write it with its stage history.
    Train(TrainArgs),
    /// Run a benchmark spec over several permutations and write result tables.
    Benchmark(BenchArgs),
    /// Selected-feature fraction by feature density for a model.
    Profile(ProfileArgs),
    /// Generate a synthetic sparse dataset with a planted support.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Stabilized,
    Sgd,
    Truncated,
    Rda,
    Fobos,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "stabilized")]
    algo: Algo,
    #[arg(long, default_value = "hinge")]
    loss: LossKind,
    /// Training data in LIBSVM format.
    #[arg(long)]
    data: PathBuf,
    /// Validation data in LIBSVM format.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    g0: Option<f64>,
    #[arg(long)]
    passes: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Feature dimension; inferred from the data when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Scale features to unit variance using training statistics.
    #[arg(long)]
    normalize: bool,
    /// Output directory (default: $STSGD_OUT_DIR or the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark spec in TOML.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// CSV destination (default: profile.csv in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    dim: usize,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 500)]
    n_val: usize,
    /// Size of the planted support.
    #[arg(long, default_value_t = 10)]
    support: usize,
    #[arg(long, default_value_t = 0.005)]
    density_min: f64,
    #[arg(long, default_value_t = 0.5)]
    density_max: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input and configuration problems exit with 2, everything else with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Parse { .. } => 2,
        Error::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn create(path: &Path) -> stsgd::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::File {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_pair(args: &TrainArgs) -> stsgd::Result<(Dataset, Option<Dataset>)> {
    let train_set = read_libsvm(&args.data, args.dim)?;
    let val = match &args.val {
        Some(p) => Some(read_libsvm(p, args.dim)?),
        None => None,
    };
    let dim = val.as_ref().map_or(train_set.dim(), |v| v.dim().max(train_set.dim()));
    let train_set = train_set.with_dim(dim)?;
    let val = val.map(|v| v.with_dim(dim)).transpose()?;
    if args.normalize {
        let s = FeatureScaling::fit(&train_set);
        let val = val.map(|v| s.apply(&v)).transpose()?;
        Ok((s.apply(&train_set)?, val))
    } else {
        Ok((train_set, val))
    }
}

#[derive(Serialize)]
struct Summary {
    algorithm: String,
    loss: LossKind,
    dim: usize,
    nonzero: usize,
    sparsity_pct: f64,
    stable_size: Option<usize>,
    stages: Option<usize>,
    test_error_pct: Option<f64>,
}

fn cmd_train(args: TrainArgs) -> stsgd::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for s in &args.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects KEY=VALUE, got `{s}`")))?;
        cfg.set(k, v.trim())?;
    }
    if let Some(v) = args.eta {
        cfg.set("eta", &v.to_string())?;
    }
    if let Some(v) = args.g0 {
        cfg.set("g0", &v.to_string())?;
    }
    if let Some(v) = args.passes {
        cfg.set("passes", &v.to_string())?;
    }
    if let Some(v) = args.seed {
        cfg.set("seed", &v.to_string())?;
    }
    let (train_set, val) = load_pair(&args)?;
    let dir = out_dir(args.out.clone());

    let (name, w, stable_size, stages) = match args.algo {
        Algo::Stabilized => {
            let res = train(&train_set, args.loss, &cfg.train)?;
            let mut hist = create(&dir.join("history.jsonl"))?;
            for rec in &res.history {
                serde_json::to_writer(&mut hist, rec)?;
                hist.write_all(b"\n")?;
            }
            hist.flush()?;
            if cfg.train.keep_trace {
                let mut tr = create(&dir.join("trace.jsonl"))?;
                for t in &res.trace {
                    serde_json::to_writer(&mut tr, t)?;
                    tr.write_all(b"\n")?;
                }
                tr.flush()?;
            }
            let stages = res.history.len();
            ("stabilized".to_string(), res.w_bar, Some(res.stable.len()), Some(stages))
        }
        algo => {
            cfg.baseline.kind = match algo {
                Algo::Sgd => BaselineKind::Sgd,
                Algo::Truncated => BaselineKind::Truncated,
                Algo::Rda => BaselineKind::Rda,
                _ => BaselineKind::Fobos,
            };
            let w = run_baseline(&train_set, args.loss, &cfg.baseline)?;
            (cfg.baseline.kind.to_string(), w, None, None)
        }
    };

    let mut model = create(&dir.join("model.txt"))?;
    write_model(&w, &mut model)?;
    model.flush()?;

    let summary = Summary {
        algorithm: name,
        loss: args.loss,
        dim: w.len(),
        nonzero: SelectedSet::from_weights(&w).len(),
        sparsity_pct: sparsity_pct(&w),
        stable_size,
        stages,
        test_error_pct: val.as_ref().map(|v| test_error(&w, v).map(|e| 100.0 * e)).transpose()?,
    };
    let mut sf = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut sf, &summary)?;
    sf.write_all(b"\n")?;
    sf.flush()?;

    print!("{}: nonzero {}/{} ({:.2}%)", summary.algorithm, summary.nonzero, summary.dim, summary.sparsity_pct);
    if let Some(s) = summary.stable_size {
        print!(", stable set {s}");
    }
    if let Some(s) = summary.stages {
        print!(", stages {s}");
    }
    if let Some(e) = summary.test_error_pct {
        print!(", test error {e:.2}%");
    }
    println!();
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_benchmark(args: BenchArgs) -> stsgd::Result<()> {
    let spec = BenchmarkSpec::from_file(&args.spec)?;
    let (train_set, val) = spec.load_data()?;
    let report = run_benchmark(&spec, &train_set, &val)?;
    let dir = out_dir(args.out);
    report.write_to(&dir)?;
    print!("{}", stsgd::bench::render_table(&report.aggregates));
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> stsgd::Result<()> {
    let file = File::open(&args.model).map_err(|e| Error::File {
        path: args.model.clone(),
        source: e,
    })?;
    let w = read_model(BufReader::new(file))?;
    let data = read_libsvm(&args.data, Some(w.len()))?;
    let bins = selection_by_density(&SelectedSet::from_weights(&w), &data, args.bins)?;
    let path = args.out.unwrap_or_else(|| out_dir(None).join("profile.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::File {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    write_csv(&path, &bins)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> stsgd::Result<()> {
    let cfg = SynthConfig {
        dim: args.dim,
        n_train: args.n_train,
        n_val: args.n_val,
        support: args.support,
        density_min: args.density_min,
        density_max: args.density_max,
        noise: args.noise,
        seed: args.seed,
    };
    let s = generate(&cfg)?;
    let dir = out_dir(args.out);
    for (name, data) in [("train.svm", &s.train), ("val.svm", &s.val)] {
        let mut f = create(&dir.join(name))?;
        stsgd::data::write_libsvm(data, &mut f)?;
        f.flush()?;
    }
    let mut f = create(&dir.join("support.txt"))?;
    write_support(&s, &mut f)?;
    f.flush()?;
    println!(
        "wrote {} ({} train, {} val, p={}, support {})",
        dir.display(),
        cfg.n_train,
        cfg.n_val,
        cfg.dim,
        cfg.support
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

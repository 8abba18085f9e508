//! The `rvsm` command line: `train`, `query`, `eval`, `bench` and `gen`.
//!
//! Logs are `key=value` lines on standard error. Tables for people go to
//! standard output; everything else is written to files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rvsm_core::metrics::evaluate_map_with_grid;
use rvsm_core::multiclass::{assemble_map, query_map};
use rvsm_core::{ClassDictionary, Provenance, SyntheticSceneSpec, VisitPolicy};

use crate::bench::{bench_queries, linearity_deviation};
use crate::cloud_io::{self, CloudFormat, LabelPolicy};
use crate::config::{hex_digest, resolve_seed, RunConfig, SEED_ENV};
use crate::grid::GridSpec;
use crate::{json, model_io, posterior_io, report, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "rvsm", version, about = "Relevance vector semantic mapping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a semantic map from a labeled point cloud.
    Train(TrainArgs),
    /// Evaluate a trained map at query points or on a grid.
    Query(QueryArgs),
    /// Score a map against a cloud with true labels.
    Eval(EvalArgs),
    /// Time queries over a ladder of query counts.
    Bench(BenchArgs),
    /// Generate a synthetic labeled scene.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Random,
    Greedy,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled cloud (.csv or .ply).
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Class dictionary; defaults to the cloud's `.classes.json` sidecar.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub downsample: Option<f64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub allow_new_classes: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Points to query (.csv with x,y,z columns, or .ply).
    #[arg(long, conflicts_with = "grid")]
    pub queries: Option<PathBuf>,
    /// Query grid `xmin:xmax:step,ymin:ymax:step,zmin:zmax:step`.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to the extension of `--out`.
    #[arg(long)]
    pub format: Option<CloudFormat>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cloud carrying the true labels.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Score a posterior CSV from `query` instead of querying the model at the truth points.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the plain-text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated query counts.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fail unless per-query cost stays within ±25% across sizes.
    #[arg(long)]
    pub assert: bool,
    /// Timings JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scene description JSON; the three-blob standard scene when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: CloudFormat,
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == '=' || c == '"') {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

/// Writes one `event=<event> key=value ...` line to standard error.
pub fn log(event: &str, fields: &[(&str, String)]) {
    let mut line = format!("event={event}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={}", quote(v)));
    }
    eprintln!("{line}");
}

fn required(flag: Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| config.clone()).ok_or_else(|| Error::Config(format!("--{name} is required")))
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(f) = args.downsample {
        cfg.downsample_fraction = f;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(p) = args.policy {
        cfg.train.policy = match p {
            PolicyArg::Random => VisitPolicy::Random,
            PolicyArg::Greedy => VisitPolicy::GreedyImprovement,
        };
    }
    cfg.allow_new_classes |= args.allow_new_classes;
    cfg.train.rng_seed = resolve_seed(args.seed, env_seed().as_deref(), cfg.train.rng_seed)?;
    let cloud_path = required(args.cloud, &cfg.paths.cloud, "cloud")?;
    let out = required(args.out, &cfg.paths.model, "out")?;
    if let Some(d) = args.dictionary {
        cfg.paths.dictionary = Some(d);
    }
    cfg.validate()?;

    let dict = cfg.paths.dictionary.as_deref().map(cloud_io::load_dictionary).transpose()?;
    let format = CloudFormat::from_path(&cloud_path)?;
    let policy = LabelPolicy { dictionary: dict.as_ref(), allow_new_classes: cfg.allow_new_classes };
    let (cloud, dict) = cloud_io::load_labeled(&cloud_path, format, policy)?;
    let source = std::fs::read(&cloud_path).map_err(|e| Error::io(&cloud_path, e))?;
    log("load", &[("path", cloud_path.display().to_string()), ("points", cloud.len().to_string()), ("classes", dict.len().to_string())]);
    let cloud = if cfg.downsample_fraction < 1.0 {
        cloud.downsample_per_class(cfg.downsample_fraction, cfg.train.rng_seed)?
    } else {
        cloud
    };

    let jobs = cfg.jobs.unwrap_or(dict.len());
    log("train", &[("points", cloud.len().to_string()), ("jobs", jobs.to_string()), ("seed", cfg.train.rng_seed.to_string())]);
    let outcomes = crate::parallel::train_classes(&cloud, &dict, &cfg.kernel, &cfg.train, jobs)?;
    for o in &outcomes {
        let s = &o.summary;
        let mut fields = vec![
            ("class", s.class_id.to_string()),
            ("positive", s.positives.to_string()),
            ("negative", s.negatives.to_string()),
            ("relevance_vectors", s.relevance_vectors.to_string()),
            ("iterations", s.iterations.to_string()),
            ("converged", s.converged.to_string()),
        ];
        if let Some(reason) = &s.untrainable {
            fields.push(("untrainable", reason.clone()));
        }
        log("class", &fields);
        if let Some(e) = o.error.as_ref().filter(|e| !e.is_input_error()) {
            return Err(Error::Training { class_id: s.class_id, source: e.clone() });
        }
    }
    let provenance = Provenance {
        rng_seed: cfg.train.rng_seed,
        config_hash: Some(cfg.digest()),
        source_digest: Some(hex_digest(&source)),
    };
    let map = assemble_map(&dict, &cfg.kernel, outcomes, provenance)?;
    print!("{}", report::training_table(&map.training, &dict));
    model_io::save_map(&map, &out)?;
    log("saved", &[("path", out.display().to_string()), ("relevance_vectors", map.relevance_count().to_string())]);
    Ok(())
}

fn query(args: QueryArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let model_path = required(args.model, &cfg.paths.model, "model")?;
    let out = required(args.out, &cfg.paths.output, "out")?;
    let map = model_io::load_map(&model_path)?;
    let points = match (args.grid, args.queries.or(cfg.paths.queries)) {
        (Some(grid), _) => grid.points(),
        (None, Some(q)) => cloud_io::load_points(&q, CloudFormat::from_path(&q)?)?,
        (None, None) => return Err(Error::Config("either --queries or --grid is required".into())),
    };
    let format = match args.format {
        Some(f) => f,
        None => CloudFormat::from_path(&out)?,
    };
    let post = query_map(&map, &points)?;
    posterior_io::save_posterior(&post, &map.dictionary, &out, format)?;
    log("query", &[("queries", post.len().to_string()), ("path", out.display().to_string())]);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let model_path = required(args.model, &cfg.paths.model, "model")?;
    let truth_path = required(args.truth, &cfg.paths.truth, "truth")?;
    let out = required(args.out, &cfg.paths.output, "out")?;
    let grid_points = args.grid_points.unwrap_or(cfg.grid_points);
    if grid_points == 0 {
        return Err(Error::Config("--grid-points must be positive".into()));
    }
    let map = model_io::load_map(&model_path)?;
    let policy = LabelPolicy { dictionary: Some(&map.dictionary), allow_new_classes: false };
    let (truth, _) = cloud_io::load_labeled(&truth_path, CloudFormat::from_path(&truth_path)?, policy)?;
    let post = match &args.posterior {
        Some(p) => posterior_io::load_posterior(p)?,
        None => query_map(&map, truth.points())?,
    };
    let mut rep = evaluate_map_with_grid(&post, &truth, grid_points)?;
    report::name_classes(&mut rep, &map.dictionary);
    report::save_report(&rep, &out)?;
    let table = report::eval_table(&rep);
    if let Some(t) = &args.table {
        std::fs::write(t, &table).map_err(|e| Error::io(t, e))?;
    }
    print!("{table}");
    let avg = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"));
    log("eval", &[("points", truth.len().to_string()), ("average_auc", avg(rep.average_auc)), ("average_sensitivity", avg(rep.average_sensitivity))]);
    Ok(())
}

#[derive(serde::Serialize)]
struct BenchRow {
    queries: usize,
    runs: usize,
    seconds: f64,
    per_query: f64,
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let model_path = required(args.model, &cfg.paths.model, "model")?;
    let sizes = args.sizes.unwrap_or_else(|| cfg.bench_sizes.clone());
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Config("bench sizes must be positive".into()));
    }
    let seed = resolve_seed(args.seed, env_seed().as_deref(), cfg.train.rng_seed)?;
    let map = model_io::load_map(&model_path)?;
    let points = bench_queries(&map, &sizes, seed)?;
    println!("{:>10}  {:>5}  {:>12}  {:>14}", "queries", "runs", "seconds", "us_per_query");
    for p in &points {
        println!("{:>10}  {:>5}  {:>12.6}  {:>14.4}", p.queries, p.runs, p.seconds, p.per_query * 1e6);
        log("bench", &[("queries", p.queries.to_string()), ("seconds", format!("{:.6}", p.seconds)), ("per_query_us", format!("{:.4}", p.per_query * 1e6))]);
    }
    if let Some(out) = &args.out {
        let rows: Vec<BenchRow> =
            points.iter().map(|p| BenchRow { queries: p.queries, runs: p.runs, seconds: p.seconds, per_query: p.per_query }).collect();
        json::write_file(out, &rows)?;
    }
    let deviation = linearity_deviation(&points);
    log("linearity", &[("max_deviation", format!("{deviation:.4}"))]);
    if args.assert && points.len() > 1 && deviation > 0.25 {
        return Err(Error::Benchmark(format!("per-query cost deviates {:.1}% from the median (limit 25%)", deviation * 100.0)));
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => json::read_file::<SyntheticSceneSpec>(p).map_err(|e| Error::Config(e.to_string()))?,
        None => SyntheticSceneSpec::standard(0.0, 0),
    };
    if let Some(n) = args.noise {
        spec.label_noise_rate = n;
    }
    spec.rng_seed = resolve_seed(args.seed, env_seed().as_deref(), spec.rng_seed)?;
    let scene = spec.generate()?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let ext = match args.format {
        CloudFormat::Csv => "csv",
        CloudFormat::Ply => "ply",
    };
    let mut ids: Vec<_> = spec.class_blobs.iter().map(|b| b.class_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let dict = ClassDictionary::from_ids(&ids).ok();
    for (name, cloud) in [("train", &scene.train), ("test", &scene.test), ("truth", &scene.truth)] {
        let path = args.out_dir.join(format!("{name}.{ext}"));
        cloud_io::save_cloud(cloud, &path, args.format)?;
        if let Some(d) = &dict {
            cloud_io::save_dictionary(d, &cloud_io::sidecar_path(&path))?;
        }
        log("gen", &[("path", path.display().to_string()), ("points", cloud.len().to_string())]);
    }
    json::write_file(&args.out_dir.join("scene.json"), &spec)?;
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Gen(a) => gen(a),
    }
}

/// Runs the command and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            log("error", &[("exit", code.to_string()), ("message", e.to_string())]);
            code
        }
    }
}

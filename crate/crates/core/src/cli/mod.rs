//! Command-line experiments. Every command reads a [`RunConfig`] and writes
//! only inside `out_dir`.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::RunConfig;

use crate::error::{DgiError, Result};
use crate::eval::{
    dim_ablation, discriminator_scores, evaluate_split, mean_std, read_embeddings_tsv, write_embeddings_tsv,
    write_scores_tsv, AblationConfig, AblationReport, EvalConfig, MetricsReport,
};
use crate::graph::{corrupt, load_dataset, CorruptionConfig, CorruptionKind, Graph, Labels, Split};
use crate::model::{encode, load_checkpoint, save_checkpoint, train, train_minibatch, DgiParams, TrainReport};
use crate::tensor::DenseMatrix;
use crate::theory::{run_suite, suite_table, SuiteReport};

#[derive(Debug, Parser)]
#[command(name = "dgi", version, about = "Deep Graph Infomax node embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train encoders and write checkpoints, embeddings and training logs.
    Train(RunArgs),
    /// Fit logistic regression on trained embeddings and report test scores.
    Eval(RunArgs),
    /// Train and evaluate across edge flip probabilities.
    SweepCorruption(RunArgs),
    /// Remove embedding dimensions by t-test rank and retrain the classifier.
    Ablate(RunArgs),
    /// Run the exact bound and mutual-information checks.
    Theory(RunArgs),
    /// Evaluate embeddings from untrained encoders.
    RandomInitBaseline(RunArgs),
    /// Evaluate logistic regression on the input features.
    RawBaseline(RunArgs),
    /// Print the effective configuration.
    ShowConfig(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file of key = value lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Shorthand for seeds=<SEED>.
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value assignments applied after the config file; the last wins.
    pub overrides: Vec<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// 1 for configuration and argument problems, 2 for everything else.
pub fn exit_code(err: &DgiError) -> u8 {
    match err {
        DgiError::Config { .. } | DgiError::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit status.
pub fn main_entry() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("DGI_LOG", "warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one command and returns the text printed on success.
pub fn run(command: &Command) -> Result<String> {
    let (name, args) = match command {
        Command::Train(a) => ("train", a),
        Command::Eval(a) => ("eval", a),
        Command::SweepCorruption(a) => ("sweep-corruption", a),
        Command::Ablate(a) => ("ablate", a),
        Command::Theory(a) => ("theory", a),
        Command::RandomInitBaseline(a) => ("random-init-baseline", a),
        Command::RawBaseline(a) => ("raw-baseline", a),
        Command::ShowConfig(a) => return Ok(a.resolve()?.emit()),
    };
    let cfg = args.resolve()?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(format!("{name}.config")), cfg.emit())?;
    let mut out = String::new();
    match command {
        Command::Train(_) => {
            for run in cmd_train(&cfg)? {
                let _ = writeln!(
                    out,
                    "seed {}: {} epochs, best objective {:.6} at epoch {}, outputs in {}",
                    run.seed,
                    run.report.losses.len(),
                    run.report.best_loss,
                    run.report.best_epoch,
                    run.dir.display()
                );
            }
        }
        Command::Eval(_) => out = metrics_line(&cmd_eval(&cfg)?),
        Command::RandomInitBaseline(_) => out = metrics_line(&cmd_random_init_baseline(&cfg)?),
        Command::RawBaseline(_) => out = metrics_line(&cmd_raw_baseline(&cfg)?),
        Command::SweepCorruption(_) => {
            for row in cmd_sweep_corruption(&cfg)? {
                let _ = writeln!(out, "{}\t{:e}\t{:.4}\t{:.4}", row.kind, row.rho, row.mean, row.std);
            }
        }
        Command::Ablate(_) => {
            let report = cmd_ablate(&cfg)?;
            for r in &report.rows {
                let _ = writeln!(out, "k={:<4} p_up {:.4}  p_down {:.4}", r.k, r.acc_p_up, r.acc_p_down);
            }
        }
        Command::Theory(_) => out = suite_table(&cmd_theory(&cfg)?),
        Command::ShowConfig(_) => unreachable!("handled above"),
    }
    Ok(out)
}

fn metrics_line(r: &MetricsReport) -> String {
    format!(
        "{} {:?}: {:.4} ± {:.4} over {} runs\n",
        r.dataset,
        r.metric,
        r.mean,
        r.std,
        r.values.len()
    )
}

/// Loads the configured dataset, row-normalizing features when enabled.
fn dataset_name(path: &std::path::Path) -> String {
    path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned())
}

pub fn load_graph(cfg: &RunConfig) -> Result<(Graph, String)> {
    let path = cfg.require_dataset()?;
    let graph = load_dataset(path)?;
    let name = dataset_name(path);
    let graph = if cfg.normalize_features {
        let x = graph.row_normalized_features();
        graph.with_features(x)?
    } else {
        graph
    };
    Ok((graph, name))
}

fn labeled(graph: &Graph) -> Result<(&Labels, &Split)> {
    let labels = graph.labels().ok_or_else(|| DgiError::Config {
        field: "dataset".into(),
        message: "evaluation needs node labels".into(),
    })?;
    let split = graph.split().ok_or_else(|| DgiError::Config {
        field: "dataset".into(),
        message: "evaluation needs a SPLIT section".into(),
    })?;
    Ok((labels, split))
}

pub fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.out_dir.join(format!("seed-{seed}"))
}

/// Seed of the `rep`-th classifier fit on embeddings from `seed`.
pub fn classifier_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_mul(10_007).wrapping_add(rep as u64)
}

fn repeated_scores(h: &DenseMatrix, graph: &Graph, ec: &EvalConfig, seed: u64, reps: usize) -> Result<Vec<f64>> {
    let (labels, split) = labeled(graph)?;
    (0..reps)
        .map(|r| evaluate_split(h, labels, split, ec, classifier_seed(seed, r)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub report: TrainReport,
}

pub fn train_graph(cfg: &RunConfig, graph: &Graph, seed: u64) -> Result<TrainReport> {
    let tc = cfg.train_config(graph.feature_dim(), seed)?;
    if cfg.batch_size > 0 {
        train_minibatch(graph, &tc, &cfg.fanouts, cfg.batch_size, &mut ChaCha8Rng::seed_from_u64(seed))
    } else {
        train(graph, &tc)
    }
}

/// Writes `model.ckpt`, `embeddings.tsv` and `train_log.tsv` under
/// `out_dir/seed-<seed>/` for every seed.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<TrainRun>> {
    let (graph, _) = load_graph(cfg)?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let report = train_graph(cfg, &graph, seed)?;
        info!("seed {seed}: {} epochs, best {:.6}", report.losses.len(), report.best_loss);
        let dir = seed_dir(cfg, seed);
        fs::create_dir_all(&dir)?;
        save_checkpoint(dir.join("model.ckpt"), &report.params, seed)?;
        write_embeddings_tsv(&report.embeddings, dir.join("embeddings.tsv"))?;
        let mut log = String::from("epoch\tloss\n");
        for (e, l) in report.losses.iter().enumerate() {
            let _ = writeln!(log, "{e}\t{l:.9}");
        }
        fs::write(dir.join("train_log.tsv"), log)?;
        runs.push(TrainRun { seed, dir, report });
    }
    Ok(runs)
}

fn check_rows(h: &DenseMatrix, graph: &Graph, source: &Path) -> Result<()> {
    if h.rows() != graph.node_count() {
        return Err(DgiError::dims(
            "eval",
            format!("{} has {} rows for {} nodes", source.display(), h.rows(), graph.node_count()),
        ));
    }
    Ok(())
}

/// Embeddings for `seed`: the explicit file, the seed's embedding file, or
/// the seed's checkpoint re-encoded.
fn embeddings_for(cfg: &RunConfig, graph: &Graph, seed: u64) -> Result<DenseMatrix> {
    if let Some(path) = &cfg.embeddings {
        if !path.is_file() {
            return Err(DgiError::Config {
                field: "embeddings".into(),
                message: format!("no such file: {}", path.display()),
            });
        }
        let h = read_embeddings_tsv(path)?;
        check_rows(&h, graph, path)?;
        return Ok(h);
    }
    let dir = seed_dir(cfg, seed);
    let tsv = dir.join("embeddings.tsv");
    if tsv.is_file() {
        let h = read_embeddings_tsv(&tsv)?;
        check_rows(&h, graph, &tsv)?;
        return Ok(h);
    }
    let ckpt = dir.join("model.ckpt");
    if ckpt.is_file() {
        return encode(graph, &load_checkpoint(&ckpt)?.params);
    }
    Err(DgiError::Config {
        field: "embeddings".into(),
        message: format!("nothing to evaluate in {}; run train first", dir.display()),
    })
}

/// Writes `metrics.json` with `repetitions` classifier fits per seed.
pub fn cmd_eval(cfg: &RunConfig) -> Result<MetricsReport> {
    let (graph, name) = load_graph(cfg)?;
    let (labels, _) = labeled(&graph)?;
    let ec = cfg.eval_config();
    let seeds = if cfg.embeddings.is_some() { vec![cfg.seeds[0]] } else { cfg.seeds.clone() };
    let mut values = Vec::new();
    for &seed in &seeds {
        let h = embeddings_for(cfg, &graph, seed)?;
        values.extend(repeated_scores(&h, &graph, &ec, seed, cfg.repetitions)?);
    }
    let report = MetricsReport::new(name, seeds, EvalConfig::metric_for(labels), values);
    report.write_json(cfg.out_dir.join("metrics.json"))?;
    Ok(report)
}

/// Writes `random_init_metrics.json`: untrained encoders, one per seed.
pub fn cmd_random_init_baseline(cfg: &RunConfig) -> Result<MetricsReport> {
    let (graph, name) = load_graph(cfg)?;
    let (labels, _) = labeled(&graph)?;
    let ec = cfg.eval_config();
    let spec = cfg.encoder_spec(graph.feature_dim())?;
    let mut values = Vec::new();
    for &seed in &cfg.seeds {
        let params = DgiParams::init(spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let h = encode(&graph, &params)?;
        values.extend(repeated_scores(&h, &graph, &ec, seed, cfg.repetitions)?);
    }
    let report = MetricsReport::new(name, cfg.seeds.clone(), EvalConfig::metric_for(labels), values);
    report.write_json(cfg.out_dir.join("random_init_metrics.json"))?;
    Ok(report)
}

/// Writes `raw_metrics.json`: the classifier on the input features.
/// Logistic regression on the dataset features exactly as stored;
/// `normalize_features` only affects encoder input.
pub fn cmd_raw_baseline(cfg: &RunConfig) -> Result<MetricsReport> {
    let path = cfg.require_dataset()?;
    let graph = load_dataset(path)?;
    let name = dataset_name(path);
    let (labels, _) = labeled(&graph)?;
    let ec = cfg.eval_config();
    let mut values = Vec::new();
    for &seed in &cfg.seeds {
        values.extend(repeated_scores(graph.features(), &graph, &ec, seed, cfg.repetitions)?);
    }
    let report = MetricsReport::new(name, cfg.seeds.clone(), EvalConfig::metric_for(labels), values);
    report.write_json(cfg.out_dir.join("raw_metrics.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: CorruptionKind,
    pub rho: f64,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Writes `sweep.tsv` (kind, rho, mean_acc, std) with one row per kind and
/// flip probability, in grid order.
pub fn cmd_sweep_corruption(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate_sweep()?;
    let (graph, _) = load_graph(cfg)?;
    labeled(&graph)?;
    let ec = cfg.eval_config();
    let mut rows = Vec::new();
    let mut tsv = String::from("kind\trho\tmean_acc\tstd\n");
    for &kind in &cfg.sweep_kinds {
        for &rho in &cfg.rho_grid {
            let run_cfg = RunConfig {
                corruption: kind,
                rho,
                ..cfg.clone()
            };
            let mut values = Vec::new();
            for &seed in &cfg.seeds {
                let report = train_graph(&run_cfg, &graph, seed)?;
                let scores = repeated_scores(&report.embeddings, &graph, &ec, seed, cfg.repetitions)?;
                values.push(scores.iter().sum::<f64>() / scores.len() as f64);
            }
            let (mean, std) = mean_std(&values);
            info!("{kind} rho={rho:e}: {mean:.4} ± {std:.4}");
            let _ = writeln!(tsv, "{kind}\t{rho:e}\t{mean:.6}\t{std:.6}");
            rows.push(SweepRow {
                kind,
                rho,
                values,
                mean,
                std,
            });
            // partial results survive an interrupted sweep
            fs::write(cfg.out_dir.join("sweep.tsv"), &tsv)?;
        }
    }
    Ok(rows)
}

/// Writes `ablation.tsv`, `ablation_pvalues.tsv` and `scores.tsv` for the
/// configured checkpoint.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<AblationReport> {
    let (graph, _) = load_graph(cfg)?;
    let (labels, split) = labeled(&graph)?;
    let seed = cfg.seeds[0];
    let ckpt_path = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| seed_dir(cfg, seed).join("model.ckpt"));
    if !ckpt_path.is_file() {
        return Err(DgiError::Config {
            field: "checkpoint".into(),
            message: format!("no such file: {}", ckpt_path.display()),
        });
    }
    let params = load_checkpoint(&ckpt_path)?.params;
    let h_pos = encode(&graph, &params)?;
    let corruption = CorruptionConfig {
        seed,
        ..cfg.corruption_config(seed)
    };
    let negative = corrupt(&graph, &corruption, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let h_neg = encode(&negative, &params)?;
    let acfg = AblationConfig {
        stride: cfg.ablation_stride,
        eval: cfg.eval_config(),
        seed: classifier_seed(seed, 0),
    };
    let report = dim_ablation(&h_pos, &h_neg, labels, split, &params.disc.value, &acfg)?;
    report.write_tsv(cfg.out_dir.join("ablation.tsv"))?;
    report.write_pvalues_tsv(cfg.out_dir.join("ablation_pvalues.tsv"))?;
    let (pos, neg) = discriminator_scores(&h_pos, &h_neg, &params.disc.value)?;
    write_scores_tsv(cfg.out_dir.join("scores.tsv"), &pos, &neg)?;
    Ok(report)
}

/// Writes `theory.txt`; fails with the offending cases when any check fails.
pub fn cmd_theory(cfg: &RunConfig) -> Result<SuiteReport> {
    let report = run_suite(cfg.theory_fault);
    let table = suite_table(&report);
    fs::write(cfg.out_dir.join("theory.txt"), &table)?;
    if !report.all_passed() {
        let names: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        return Err(DgiError::Assertion(format!("theory suite failed: {}", names.join("; "))));
    }
    Ok(report)
}

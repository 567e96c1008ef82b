//! `ctxtree`: run the context tree stages from the command line.
//!
//! Every stage reads and writes the same file formats the library uses, so
//! running the stages one by one gives the same tree as `ctxtree pipeline`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use context_tree::analysis::{coverage_series, ids_by_day, tree_stats, write_coverage_csv};
use context_tree::augment::{augment_trajectory, read_augmented_jsonl, write_augmented_jsonl, SpatialIndex};
use context_tree::cluster::{build_context_tree, read_tree_json, to_dot, write_tree_json, TagSimMode};
use context_tree::filter::filter_trajectory;
use context_tree::ingest::{parse_land_usage, parse_taxonomy, parse_trajectory};
use context_tree::pipeline::{run_pipeline, PipelineConfig};
use context_tree::prune::{prune_tree, write_report_csv, write_report_json, PruneParams};
use context_tree::summarise::{read_summary_json, summarise, write_summary_json};
use context_tree::synth::{synth, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "ctxtree", version, about = "Build context trees from trajectories and land usage data")]
struct Cli {
    /// JSON file with pipeline settings; flags given here take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ParamFlags {
    /// Filter buffer half-width in seconds.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Filter selection threshold in [0, 1].
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Also filter the first and last points using partial windows.
    #[arg(long, global = true)]
    edge_windows: bool,
    /// Largest gap in seconds bridged when merging interaction times.
    #[arg(long, global = true)]
    t_max: Option<f64>,
    /// Weight of semantic similarity in the hybrid distance.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Which part of a tag feeds the word similarity.
    #[arg(long, global = true, value_enum)]
    tag_sim_mode: Option<SimMode>,
    /// Pruning threshold.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Per-node storage penalty used by pruning.
    #[arg(long, global = true)]
    xi: Option<f64>,
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimMode {
    Keys,
    Values,
    Combined,
}

impl From<SimMode> for TagSimMode {
    fn from(m: SimMode) -> Self {
        match m {
            SimMode::Keys => TagSimMode::Keys,
            SimMode::Values => TagSimMode::Values,
            SimMode::Combined => TagSimMode::Combined,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Attach intersecting land usage elements to every trajectory point.
    Augment {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        land_usage: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Keep only the dominant elements around each point.
    Filter {
        /// Augmented points (JSON lines).
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Turn filtered points into one interaction record per element.
    Summarise {
        /// Filtered points (JSON lines).
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        land_usage: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Cluster interaction records into a context tree.
    Cluster {
        /// Summary JSON.
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prune a context tree and report what is left.
    Prune {
        /// Tree JSON.
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        /// Pruned tree JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Report CSV, one row per setting.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Add rows for a parameter sweep to the reports.
        #[arg(long, value_enum)]
        sweep: Option<Sweep>,
    },
    /// Run every stage in one go.
    Pipeline {
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        land_usage: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Directory for the tree and all intermediates.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also prune the tree with --theta and --xi.
        #[arg(long)]
        prune: bool,
    },
    /// Node, leaf and time period counts of a tree.
    Stats {
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Day-over-day coverage of element ids, as CSV.
    Coverage {
        /// Augmented or filtered points (JSON lines).
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic city, routine trajectory and taxonomy.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        days: usize,
        /// Seconds between trajectory samples.
        #[arg(long, default_value_t = 60)]
        interval: i64,
    },
    /// Render a tree as a Graphviz digraph.
    ExportDot {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sweep {
    /// theta over 0, 0.1, ..., 1 at the given xi
    Theta,
    /// xi over 0.5, 1, 1.5, 2 at the given theta
    Xi,
}

/// Failures split by exit code.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut c = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(usage)?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display())).map_err(usage)?
        }
        None => PipelineConfig::default(),
    };
    let p = &cli.params;
    c.delta = p.delta.unwrap_or(c.delta);
    c.t = p.t.unwrap_or(c.t);
    c.edge_windows |= p.edge_windows;
    c.t_max = p.t_max.unwrap_or(c.t_max);
    c.lambda = p.lambda.unwrap_or(c.lambda);
    c.tag_sim_mode = p.tag_sim_mode.map(Into::into).unwrap_or(c.tag_sim_mode);
    c.theta = p.theta.unwrap_or(c.theta);
    c.xi = p.xi.unwrap_or(c.xi);
    Ok(c)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(data)
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, body: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())).map_err(data),
        None => std::io::stdout().write_all(body.as_bytes()).context("writing stdout").map_err(data),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Augment { trajectory, land_usage, output } => {
            let traj = parse_trajectory(&trajectory, config.default_accuracy_m).map_err(data)?;
            let store = parse_land_usage(&land_usage).map_err(data)?;
            let index = SpatialIndex::with_cell_size(&store, config.cell_size_m);
            emit(output.as_deref(), &write_augmented_jsonl(&augment_trajectory(&traj, &index, &store)))
        }
        Command::Filter { input, output } => {
            let params = config.filter_params().map_err(usage)?;
            let points = read_augmented_jsonl(&read(&input)?).map_err(data)?;
            emit(output.as_deref(), &write_augmented_jsonl(&filter_trajectory(&points, &params)))
        }
        Command::Summarise { input, land_usage, output } => {
            if config.t_max.is_nan() || config.t_max <= 0.0 {
                return Err(usage(anyhow!("t_max must be positive, got {}", config.t_max)));
            }
            let points = read_augmented_jsonl(&read(&input)?).map_err(data)?;
            let store = parse_land_usage(&land_usage).map_err(data)?;
            let summary = summarise(&points, |id| store.get(id).cloned(), config.t_max).map_err(data)?;
            emit(output.as_deref(), &write_summary_json(&summary))
        }
        Command::Cluster { input, taxonomy, output } => {
            let params = config.cluster_params().map_err(usage)?;
            let summary = read_summary_json(&read(&input)?).map_err(data)?;
            let tax = parse_taxonomy(&taxonomy).map_err(data)?;
            let tree = build_context_tree(&summary, params, &tax).map_err(data)?;
            emit(output.as_deref(), &write_tree_json(&tree))
        }
        Command::Prune { input, taxonomy, output, report, csv, sweep } => {
            let params = config.prune_params().map_err(usage)?;
            let tree = read_tree_json(&read(&input)?).map_err(data)?;
            let tax = parse_taxonomy(&taxonomy).map_err(data)?;
            let (pruned, first) = prune_tree(&tree, &params, &tax).map_err(data)?;
            let mut reports = vec![first];
            let settings: Vec<(f64, f64)> = match sweep {
                None => vec![],
                Some(Sweep::Theta) => (0..=10).map(|k| (k as f64 / 10.0, params.xi)).collect(),
                Some(Sweep::Xi) => [0.5, 1.0, 1.5, 2.0].iter().map(|&x| (params.theta, x)).collect(),
            };
            for (theta, xi) in settings {
                let p = PruneParams::new(theta, xi).map_err(usage)?;
                reports.push(prune_tree(&tree, &p, &tax).map_err(data)?.1);
            }
            if let Some(path) = &report {
                emit(Some(path), &write_report_json(&reports))?;
            }
            if let Some(path) = &csv {
                emit(Some(path), &write_report_csv(&reports))?;
            }
            emit(output.as_deref(), &write_tree_json(&pruned))
        }
        Command::Pipeline { trajectory, land_usage, taxonomy, out_dir, prune } => {
            let mut config = config;
            config.trajectory = trajectory.or(config.trajectory);
            config.land_usage = land_usage.or(config.land_usage);
            config.taxonomy = taxonomy.or(config.taxonomy);
            config.output_dir = out_dir.or(config.output_dir);
            config.prune |= prune;
            for (name, path) in
                [("trajectory", &config.trajectory), ("land_usage", &config.land_usage), ("taxonomy", &config.taxonomy)]
            {
                if path.is_none() {
                    return Err(usage(anyhow!("no {name} file given (flag or config)")));
                }
            }
            config.filter_params().map_err(usage)?;
            config.cluster_params().map_err(usage)?;
            if config.prune {
                config.prune_params().map_err(usage)?;
            }
            let out = run_pipeline(&config).map_err(data)?;
            if config.output_dir.is_none() {
                emit(None, &write_tree_json(out.pruned.as_ref().map_or(&out.tree, |(t, _)| t)))?;
            }
            Ok(())
        }
        Command::Stats { input } => {
            let tree = read_tree_json(&read(&input)?).map_err(data)?;
            let stats = tree_stats(&tree.root);
            emit(None, &format!("{}\n", serde_json::to_string_pretty(&stats).expect("stats serialise")))
        }
        Command::Coverage { input, output } => {
            let points = read_augmented_jsonl(&read(&input)?).map_err(data)?;
            let rows = coverage_series(&ids_by_day(&points)).map_err(data)?;
            emit(output.as_deref(), &write_coverage_csv(&rows))
        }
        Command::Synth { out_dir, days, interval } => {
            if days == 0 || interval <= 0 {
                return Err(usage(anyhow!("--days and --interval must be positive")));
            }
            let spec = SynthSpec { days, interval_s: interval, ..Default::default() };
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(data)?;
            synth(cli.params.seed, &spec).write_to(&out_dir).map_err(data)
        }
        Command::ExportDot { input, output } => {
            let tree = read_tree_json(&read(&input)?).map_err(data)?;
            emit(output.as_deref(), &to_dot(&tree))
        }
    }
}

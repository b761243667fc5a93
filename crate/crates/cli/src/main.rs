mod config;
mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rdt_core::data::load_csv;
use rdt_core::eval::{
    rank_table, read_results_csv, run_experiment, write_rank_csv, write_results_csv, DatasetInfo, EvaluationReport,
    ExperimentConfig, FoldResult, Metric, SkippedCell,
};
use rdt_core::sim::{simulate_combiner, simulate_scorer, write_trajectory_csv, SimConfig};
use rdt_core::{Dataset, Method};
use serde::{Deserialize, Serialize};

use config::{check_band, DatasetEntry, EvaluateSection, FileConfig, RankSection, SimMode, SimulateSection};
use output::Staged;

const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(
    name = "rdtu",
    version,
    about = "Random decision tree ensembles with uncertainty-aware combiners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-validated method x leaf-size grid on datasets.
    Evaluate(EvaluateArgs),
    /// Simulate score trajectories of growing leaves.
    Simulate(SimulateArgs),
    /// Average ranks of (method, leaf size) cells across evaluation reports.
    Rank(RankArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config file, or a JSON output echo. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset CSV files (label in the last column); replace the config's list.
    datasets: Vec<PathBuf>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    leaf_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Repetitions of two-fold cross-validation.
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    mode: Option<SimMode>,
    /// Methods to simulate; in leaf mode only prob, laplace, pls and cb.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    p_pos: Option<f64>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    ensemble_leaves: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    common: Common,
    /// Results CSVs written by `evaluate`; replace the config's list.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Keep only datasets whose class ratio lies in LO,HI.
    #[arg(long, value_name = "LO,HI", value_parser = parse_band)]
    class_ratio_band: Option<[f64; 2]>,
}

fn parse_band(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    check_band([parse(lo)?, parse(hi)?]).map_err(|e| e.to_string())
}

/// Resolved settings shared by every command.
struct Base {
    file: FileConfig,
    seed: u64,
    out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Base {
    fn new(common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(p) => config::load(p)?,
            None => FileConfig::default(),
        };
        let seed = common.seed.or(file.seed).unwrap_or(1);
        let out = common
            .out
            .clone()
            .or(file.out.clone())
            .unwrap_or_else(|| DEFAULT_OUT.into());
        let jobs = common.jobs.or(file.jobs).unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        Ok(Self { file, seed, out, pool })
    }

    fn echo(&self, mut cfg: FileConfig) -> FileConfig {
        cfg.seed = Some(self.seed);
        cfg.out = Some(self.out.clone());
        cfg
    }
}

#[derive(Serialize, Deserialize)]
struct EvaluateEcho {
    command: String,
    version: String,
    config: FileConfig,
    datasets: Vec<DatasetInfo>,
    rows: usize,
    skipped: Vec<SkippedCell>,
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let base = Base::new(&args.common)?;
    let section = base.file.evaluate.clone().unwrap_or_default();
    let entries: Vec<DatasetEntry> = if args.datasets.is_empty() {
        section.datasets.clone()
    } else {
        args.datasets.iter().cloned().map(DatasetEntry::Path).collect()
    };
    if entries.is_empty() {
        bail!("no datasets given (pass CSV paths or list them under [evaluate] datasets)");
    }
    let defaults = ExperimentConfig::default();
    let experiment = ExperimentConfig {
        trees: args.trees.or(section.trees).unwrap_or(defaults.trees),
        leaf_sizes: args.leaf_sizes.or(section.leaf_sizes).unwrap_or(defaults.leaf_sizes),
        methods: args.methods.or(section.methods).unwrap_or(defaults.methods),
        seed: base.seed,
        repetitions: args.repetitions.or(section.repetitions).unwrap_or(defaults.repetitions),
    };
    experiment.validate()?;

    let mut datasets: Vec<Dataset> = Vec::with_capacity(entries.len());
    let mut resolved = Vec::with_capacity(entries.len());
    for entry in &entries {
        let mut spec = entry.spec();
        let d =
            load_csv(&spec.path, &spec.csv_options()).with_context(|| format!("loading {}", spec.path.display()))?;
        spec.path = absolute(&spec.path);
        resolved.push(DatasetEntry::Spec(spec));
        datasets.push(d);
    }

    let report = base.pool.install(|| run_experiment(&datasets, &experiment))?;
    print_summary(&report);

    let echo = EvaluateEcho {
        command: "evaluate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: base.echo(FileConfig {
            evaluate: Some(EvaluateSection {
                datasets: resolved,
                trees: Some(experiment.trees),
                leaf_sizes: Some(experiment.leaf_sizes.clone()),
                methods: Some(experiment.methods.clone()),
                repetitions: Some(experiment.repetitions),
            }),
            ..FileConfig::default()
        }),
        datasets: report.datasets.clone(),
        rows: report.results.len(),
        skipped: report.skipped.clone(),
    };
    let mut staged = Staged::new(&base.out)?;
    staged.add("results.csv", |w| Ok(write_results_csv(&report.results, w)?))?;
    staged.add_json("results.json", &echo)?;
    staged.commit()?;
    println!(
        "wrote {} rows to {}",
        report.results.len(),
        base.out.join("results.csv").display()
    );

    if report.skipped.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for s in &report.skipped {
            eprintln!(
                "skipped {} leaf {} rep {} fold {}: {}",
                s.dataset, s.min_leaf, s.repetition, s.fold, s.reason
            );
        }
        Ok(ExitCode::from(2))
    }
}

/// Mean AUC per method and leaf size, one block per dataset.
fn print_summary(report: &EvaluationReport) {
    let leaves = &report.config.leaf_sizes;
    for info in &report.datasets {
        println!(
            "{}: {} instances, {} features, positive ratio {:.3}",
            info.name, info.instances, info.features, info.class_ratio
        );
        let mut cells: BTreeMap<(Method, usize), (f64, f64, usize)> = BTreeMap::new();
        for r in report.results.iter().filter(|r| r.dataset == info.name) {
            let e = cells.entry((r.method, r.min_leaf)).or_default();
            e.0 += r.auc;
            e.1 += r.accuracy;
            e.2 += 1;
        }
        let mut header = format!("  {:<9}", "mean AUC");
        for l in leaves {
            header.push_str(&format!(" {:>7}", format!("leaf {l}")));
        }
        println!("{header}");
        for m in &report.config.methods {
            let mut line = format!("  {:<9}", m.id());
            for l in leaves {
                match cells.get(&(*m, *l)) {
                    Some((auc, _, n)) => line.push_str(&format!(" {:>7.4}", auc / *n as f64)),
                    None => line.push_str(&format!(" {:>7}", "-")),
                }
            }
            println!("{line}");
        }
    }
}

#[derive(Serialize)]
struct SimulateEcho<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a FileConfig,
    method: Method,
    mode: SimMode,
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let base = Base::new(&args.common)?;
    let section = base.file.simulate.clone().unwrap_or_default();
    let mode = args.mode.or(section.mode).unwrap_or_default();
    let defaults = SimConfig::default();
    let sim = SimConfig {
        p_pos: args.p_pos.or(section.p_pos).unwrap_or(defaults.p_pos),
        max_n: args.max_n.or(section.max_n).unwrap_or(defaults.max_n),
        trials: args.trials.or(section.trials).unwrap_or(defaults.trials),
        ensemble_leaves: args
            .ensemble_leaves
            .or(section.ensemble_leaves)
            .unwrap_or(defaults.ensemble_leaves),
        seed: base.seed,
        quantiles: args.quantiles.or(section.quantiles).unwrap_or(defaults.quantiles),
    };
    sim.validate()?;
    let methods = args.methods.or(section.methods).unwrap_or_else(|| match mode {
        SimMode::Leaf => Method::ALL.iter().copied().filter(|m| m.scorer().is_some()).collect(),
        SimMode::Ensemble => Method::ALL.to_vec(),
    });
    if methods.is_empty() {
        bail!("no methods selected");
    }
    if mode == SimMode::Leaf {
        if let Some(m) = methods.iter().find(|m| m.scorer().is_none()) {
            bail!("method `{m}` has no per-leaf scorer; leaf mode accepts prob, laplace, pls and cb");
        }
    }

    let echo_cfg = base.echo(FileConfig {
        simulate: Some(SimulateSection {
            mode: Some(mode),
            methods: Some(methods.clone()),
            p_pos: Some(sim.p_pos),
            max_n: Some(sim.max_n),
            trials: Some(sim.trials),
            ensemble_leaves: Some(sim.ensemble_leaves),
            quantiles: Some(sim.quantiles.clone()),
        }),
        ..FileConfig::default()
    });
    let mut staged = Staged::new(&base.out)?;
    for &m in &methods {
        let traj = base.pool.install(|| match (mode, m.scorer()) {
            (SimMode::Leaf, Some(s)) => simulate_scorer(&sim, s),
            _ => simulate_combiner(&sim, m),
        })?;
        staged.add(&format!("sim_{m}.csv"), |w| Ok(write_trajectory_csv(&traj, w)?))?;
        staged.add_json(
            &format!("sim_{m}.json"),
            &SimulateEcho {
                command: "simulate",
                version: env!("CARGO_PKG_VERSION"),
                config: &echo_cfg,
                method: m,
                mode,
            },
        )?;
        let last = traj.steps.last().expect("max_n >= 1");
        println!("{m:<9} mean at n={}: {:+.4}", last.step, last.mean);
    }
    staged.commit()?;
    println!("wrote {} trajectories to {}", methods.len(), base.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Sidecar echo of a results CSV: `x.csv` -> `x.json`.
fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

#[derive(Serialize)]
struct RankEcho<'a> {
    command: &'static str,
    version: &'static str,
    config: FileConfig,
    excluded: Vec<String>,
    table: &'a rdt_core::eval::RankTable,
}

fn cmd_rank(args: RankArgs) -> Result<ExitCode> {
    let base = Base::new(&args.common)?;
    let section: RankSection = base.file.rank.clone().unwrap_or_default();
    let inputs = if args.inputs.is_empty() {
        section.inputs.clone()
    } else {
        args.inputs.clone()
    };
    if inputs.is_empty() {
        bail!("no results CSVs given");
    }
    let metric = args.metric.or(section.metric).unwrap_or(Metric::Auc);
    let band = match args.class_ratio_band {
        Some(b) => Some(b),
        None => section.class_ratio_band.map(check_band).transpose()?,
    };

    let mut results: Vec<FoldResult> = Vec::new();
    let mut owner: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut ratios: BTreeMap<String, f64> = BTreeMap::new();
    for path in &inputs {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let rows = read_results_csv(file).with_context(|| format!("reading {}", path.display()))?;
        for name in rows
            .iter()
            .map(|r| r.dataset.clone())
            .collect::<std::collections::BTreeSet<_>>()
        {
            if let Some(prev) = owner.insert(name.clone(), path.clone()) {
                bail!(
                    "dataset `{name}` appears in both {} and {}",
                    prev.display(),
                    path.display()
                );
            }
        }
        if band.is_some() {
            let side = sidecar(path);
            let text = fs::read_to_string(&side)
                .with_context(|| format!("class-ratio band needs {} for dataset ratios", side.display()))?;
            let echo: EvaluateEcho =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", side.display()))?;
            ratios.extend(echo.datasets.into_iter().map(|d| (d.name, d.class_ratio)));
        }
        results.extend(rows);
    }

    let mut excluded = Vec::new();
    if let Some([lo, hi]) = band {
        for name in owner.keys() {
            let ratio = *ratios
                .get(name)
                .with_context(|| format!("no class ratio recorded for dataset `{name}`"))?;
            if !(lo..=hi).contains(&ratio) {
                excluded.push(name.clone());
            }
        }
        results.retain(|r| !excluded.contains(&r.dataset));
        if results.is_empty() {
            bail!("no dataset has a class ratio within [{lo}, {hi}]");
        }
    }

    let table = rank_table(&results, metric)?;
    for name in &excluded {
        println!("excluded {name} (class ratio {:.3})", ratios[name]);
    }
    println!("ranked {} cells over {}", table.cells, table.datasets.join(", "));
    let mut best: Vec<_> = table.entries.iter().collect();
    best.sort_by(|a, b| a.average_rank.total_cmp(&b.average_rank));
    for e in best.iter().take(5) {
        println!("  {:<9} leaf {:<3} {:.2}", e.method.id(), e.min_leaf, e.average_rank);
    }

    let echo = RankEcho {
        command: "rank",
        version: env!("CARGO_PKG_VERSION"),
        config: base.echo(FileConfig {
            rank: Some(RankSection {
                inputs: inputs.iter().map(|p| absolute(p)).collect(),
                metric: Some(metric),
                class_ratio_band: band,
            }),
            ..FileConfig::default()
        }),
        excluded,
        table: &table,
    };
    let stem = format!("ranks_{}", serde_json::to_value(metric)?.as_str().unwrap_or("metric"));
    let mut staged = Staged::new(&base.out)?;
    staged.add(&format!("{stem}.csv"), |w| Ok(write_rank_csv(&table, w)?))?;
    staged.add_json(&format!("{stem}.json"), &echo)?;
    staged.commit()?;
    println!("wrote {}", base.out.join(format!("{stem}.csv")).display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Rank(a) => cmd_rank(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

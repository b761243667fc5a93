//! Metrics, the cross-validation driver and average-rank tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{combine_all, CombineContext, Method};
use crate::data::{make_splits, Class, Dataset};
use crate::error::{Error, Result};
use crate::rdt::{build_ensemble, TreeParams};
use crate::seed::{derive_seed, name_seed};

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via the Mann–Whitney statistic with midranks.
pub fn auc(scores: &[f64], labels: &[Class]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|c| c.is_pos()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("auc labels".into()));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, c)| c.is_pos())
        .map(|(r, _)| r)
        .sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Fraction of correct sign predictions. A zero score predicts the
/// training-majority class (positive when `prior_pos >= 0.5`).
pub fn accuracy(scores: &[f64], labels: &[Class], prior_pos: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, c)| {
            let predict_pos = if **s == 0.0 { prior_pos >= 0.5 } else { **s > 0.0 };
            predict_pos == c.is_pos()
        })
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Accuracy,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(Metric::Auc),
            "accuracy" => Ok(Metric::Accuracy),
            other => Err(Error::Config(format!("unknown metric `{other}` (auc | accuracy)"))),
        }
    }
}

/// One row of the flat results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub dataset: String,
    pub method: Method,
    pub min_leaf: usize,
    pub repetition: usize,
    pub fold: usize,
    pub auc: f64,
    pub accuracy: f64,
}

impl FoldResult {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Auc => self.auc,
            Metric::Accuracy => self.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub dataset: String,
    pub min_leaf: usize,
    pub repetition: usize,
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trees: usize,
    pub leaf_sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            leaf_sizes: vec![1, 2, 3, 4, 8, 32],
            methods: Method::ALL.to_vec(),
            seed: 1,
            repetitions: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::Config("trees must be at least 1".into()));
        }
        if self.leaf_sizes.is_empty() || self.leaf_sizes.contains(&0) {
            return Err(Error::Config(
                "leaf sizes must be a non-empty list of positive counts".into(),
            ));
        }
        if self.leaf_sizes.iter().collect::<BTreeSet<_>>().len() != self.leaf_sizes.len() {
            return Err(Error::Config("leaf sizes must be duplicate-free".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method required".into()));
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return Err(Error::Config("methods must be duplicate-free".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub instances: usize,
    pub features: usize,
    pub class_ratio: f64,
}

impl DatasetInfo {
    pub fn of(d: &Dataset) -> Self {
        Self {
            name: d.name().to_string(),
            instances: d.len(),
            features: d.features().len(),
            class_ratio: d.class_ratio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetInfo>,
    pub results: Vec<FoldResult>,
    pub skipped: Vec<SkippedCell>,
}

struct Cell {
    dataset: usize,
    repetition: usize,
    fold: usize,
    min_leaf: usize,
}

/// Runs repeated two-fold cross-validation over the leaf-size grid. One
/// ensemble per (fold, leaf size) serves every method, since all methods
/// read the same routed leaf counts.
pub fn run_experiment(datasets: &[Dataset], config: &ExperimentConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let names: BTreeSet<&str> = datasets.iter().map(|d| d.name()).collect();
    if names.len() != datasets.len() {
        return Err(Error::Config("dataset names must be unique".into()));
    }

    let mut skipped = Vec::new();
    let mut cells = Vec::new();
    let mut plans = Vec::with_capacity(datasets.len());
    for (di, d) in datasets.iter().enumerate() {
        let plan = make_splits(d, config.repetitions, derive_seed(config.seed, name_seed(d.name())));
        match plan {
            Ok(plan) => {
                for repetition in 0..plan.repetitions {
                    for fold in 0..plan.folds {
                        for &min_leaf in &config.leaf_sizes {
                            cells.push(Cell {
                                dataset: di,
                                repetition,
                                fold,
                                min_leaf,
                            });
                        }
                    }
                }
                plans.push(Some(plan));
            }
            Err(e) => {
                for repetition in 0..config.repetitions {
                    for fold in 0..2 {
                        for &min_leaf in &config.leaf_sizes {
                            skipped.push(SkippedCell {
                                dataset: d.name().to_string(),
                                min_leaf,
                                repetition,
                                fold,
                                reason: e.to_string(),
                            });
                        }
                    }
                }
                plans.push(None);
            }
        }
    }

    let outcomes: Vec<std::result::Result<Vec<FoldResult>, SkippedCell>> = cells
        .par_iter()
        .map(|cell| {
            let d = &datasets[cell.dataset];
            let plan = plans[cell.dataset]
                .as_ref()
                .expect("cells only exist for planned datasets");
            run_cell(d, plan.split(cell.repetition, cell.fold), cell, config).map_err(|e| SkippedCell {
                dataset: d.name().to_string(),
                min_leaf: cell.min_leaf,
                repetition: cell.repetition,
                fold: cell.fold,
                reason: e.to_string(),
            })
        })
        .collect();

    let mut results = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(rows) => results.extend(rows),
            Err(skip) => skipped.push(skip),
        }
    }
    let order: BTreeMap<&str, usize> = datasets.iter().enumerate().map(|(i, d)| (d.name(), i)).collect();
    results.sort_by_key(|r| (order[r.dataset.as_str()], r.method, r.min_leaf, r.repetition, r.fold));
    skipped.sort_by_key(|s| (order[s.dataset.as_str()], s.min_leaf, s.repetition, s.fold));

    Ok(EvaluationReport {
        config: config.clone(),
        datasets: datasets.iter().map(DatasetInfo::of).collect(),
        results,
        skipped,
    })
}

fn run_cell(
    d: &Dataset,
    (train, test): (Vec<usize>, Vec<usize>),
    cell: &Cell,
    config: &ExperimentConfig,
) -> Result<Vec<FoldResult>> {
    let labels: Vec<Class> = test.iter().map(|&i| d.instances()[i].label).collect();
    if labels.iter().all(|c| c.is_pos()) || labels.iter().all(|c| !c.is_pos()) {
        return Err(Error::SingleClass(format!("{} (test fold)", d.name())));
    }
    let seed = [cell.repetition as u64, cell.fold as u64, cell.min_leaf as u64]
        .into_iter()
        .fold(derive_seed(config.seed, name_seed(d.name())), derive_seed);
    let model = build_ensemble(d, &train, config.trees, &TreeParams::new(cell.min_leaf), seed)?;
    let ctx = CombineContext::new(model.prior_pos)?;

    let mut per_method = vec![Vec::with_capacity(test.len()); config.methods.len()];
    for &i in &test {
        let leaves = model.route(&d.instances()[i])?;
        for (m, score) in combine_all(&config.methods, &leaves, &ctx)?.into_iter().enumerate() {
            per_method[m].push(score);
        }
    }
    config
        .methods
        .iter()
        .zip(per_method)
        .map(|(&method, scores)| {
            Ok(FoldResult {
                dataset: d.name().to_string(),
                method,
                min_leaf: cell.min_leaf,
                repetition: cell.repetition,
                fold: cell.fold,
                auc: auc(&scores, &labels)?,
                accuracy: accuracy(&scores, &labels, model.prior_pos)?,
            })
        })
        .collect()
}

/// Results CSV column order; part of the stable interface.
pub const RESULT_COLUMNS: [&str; 7] = ["dataset", "method", "min_leaf", "repetition", "fold", "auc", "accuracy"];

pub fn write_results_csv<W: Write>(results: &[FoldResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<FoldResult>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(Error::Schema(format!("unexpected results header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: Method,
    pub min_leaf: usize,
    pub average_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub metric: Metric,
    pub datasets: Vec<String>,
    /// Number of (method, leaf size) cells; the worst possible rank.
    pub cells: usize,
    pub entries: Vec<RankEntry>,
    /// Per-dataset ranks, aligned with `entries`.
    pub per_dataset: BTreeMap<String, Vec<f64>>,
}

/// Mean metric per (method, leaf size) cell within each dataset, ranked
/// jointly across the whole cross product (1 = best, ties get midranks), then
/// averaged over datasets.
pub fn rank_table(results: &[FoldResult], metric: Metric) -> Result<RankTable> {
    // dataset -> (method, leaf size) -> (metric sum, folds)
    type CellSums = BTreeMap<(Method, usize), (f64, usize)>;
    let mut sums: BTreeMap<&str, CellSums> = BTreeMap::new();
    let mut dataset_order: Vec<&str> = Vec::new();
    for r in results {
        if !sums.contains_key(r.dataset.as_str()) {
            dataset_order.push(&r.dataset);
        }
        let e = sums
            .entry(&r.dataset)
            .or_default()
            .entry((r.method, r.min_leaf))
            .or_insert((0.0, 0));
        e.0 += r.metric(metric);
        e.1 += 1;
    }
    if dataset_order.is_empty() {
        return Err(Error::Empty("no results to rank".into()));
    }
    let grid: BTreeSet<(Method, usize)> = sums.values().flat_map(|cells| cells.keys().copied()).collect();
    let missing: Vec<String> = dataset_order
        .iter()
        .flat_map(|d| {
            grid.iter()
                .filter(|cell| !sums[d].contains_key(cell))
                .map(move |(m, leaf)| format!("{d}/{m}/{leaf}"))
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::RaggedGrid(missing));
    }

    let cells: Vec<(Method, usize)> = grid.into_iter().collect();
    let mut totals = vec![0.0; cells.len()];
    let mut per_dataset = BTreeMap::new();
    for d in &dataset_order {
        let means: Vec<f64> = cells
            .iter()
            .map(|c| {
                let (s, n) = sums[d][c];
                // negate so that rank 1 is the best
                -(s / n as f64)
            })
            .collect();
        let ranks = midranks(&means);
        for (t, r) in totals.iter_mut().zip(&ranks) {
            *t += r;
        }
        per_dataset.insert(d.to_string(), ranks);
    }
    let n = dataset_order.len() as f64;
    Ok(RankTable {
        metric,
        datasets: dataset_order.iter().map(|d| d.to_string()).collect(),
        cells: cells.len(),
        entries: cells
            .iter()
            .zip(totals)
            .map(|(&(method, min_leaf), t)| RankEntry {
                method,
                min_leaf,
                average_rank: t / n,
            })
            .collect(),
        per_dataset,
    })
}

/// Rank CSV columns: metric, method, min_leaf, average_rank, datasets.
pub fn write_rank_csv<W: Write>(table: &RankTable, out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        metric: Metric,
        method: Method,
        min_leaf: usize,
        average_rank: f64,
        datasets: &'a str,
    }
    let joined = table.datasets.join(";");
    let mut w = csv::Writer::from_writer(out);
    for e in &table.entries {
        w.serialize(Row {
            metric: table.metric,
            method: e.method,
            min_leaf: e.min_leaf,
            average_rank: e.average_rank,
            datasets: &joined,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

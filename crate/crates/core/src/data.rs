//! Datasets, CSV ingestion and the 5x2 cross-validation splitter.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Pos,
    Neg,
}

impl Class {
    pub fn is_pos(self) -> bool {
        self == Class::Pos
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Nominal(categories.into_iter().map(Into::into).collect()),
        }
    }

    /// Number of categories for nominal features, `None` for numeric ones.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Numeric => None,
            FeatureKind::Nominal(c) => Some(c.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Numeric(f64),
    Category(u32),
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<Value>,
    pub label: Class,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<FeatureSpec>,
    instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<FeatureSpec>, instances: Vec<Instance>) -> Result<Self> {
        let name = name.into();
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate feature name `{}`", f.name)));
            }
            if let FeatureKind::Nominal(cats) = &f.kind {
                let distinct: HashSet<_> = cats.iter().collect();
                if cats.is_empty() || distinct.len() != cats.len() {
                    return Err(Error::InvalidDataset(format!(
                        "nominal feature `{}` needs a non-empty, duplicate-free category list",
                        f.name
                    )));
                }
            }
        }
        if instances.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "`{name}` has {} instances, at least 2 required",
                instances.len()
            )));
        }
        for (i, inst) in instances.iter().enumerate() {
            check_instance(&features, inst).map_err(|e| Error::InvalidDataset(format!("instance {i}: {e}")))?;
        }
        Ok(Self {
            name,
            features,
            instances,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// (positives, negatives) over the whole dataset.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.instances.iter().filter(|i| i.label.is_pos()).count();
        (pos, self.instances.len() - pos)
    }

    pub fn class_ratio(&self) -> f64 {
        self.class_counts().0 as f64 / self.len() as f64
    }
}

/// Checks value arity and category ranges of `inst` against `features`.
pub fn check_instance(features: &[FeatureSpec], inst: &Instance) -> Result<()> {
    if inst.values.len() != features.len() {
        return Err(Error::Schema(format!(
            "instance has {} values, schema has {} features",
            inst.values.len(),
            features.len()
        )));
    }
    for (f, v) in features.iter().zip(&inst.values) {
        match (&f.kind, v) {
            (_, Value::Missing) | (FeatureKind::Numeric, Value::Numeric(_)) => {}
            (FeatureKind::Nominal(cats), Value::Category(c)) if (*c as usize) < cats.len() => {}
            (FeatureKind::Nominal(cats), Value::Category(c)) => {
                return Err(Error::Schema(format!(
                    "category {c} out of range for `{}` ({} categories)",
                    f.name,
                    cats.len()
                )))
            }
            _ => return Err(Error::Schema(format!("value kind does not match feature `{}`", f.name))),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub label: LabelColumn,
    /// Columns forced to nominal even when every value parses as a number.
    pub nominal: Vec<String>,
    /// Label value mapped to the positive class. Defaults to the
    /// lexicographically greater of the two distinct label values.
    pub positive: Option<String>,
    /// Dataset name; defaults to the file stem.
    pub name: Option<String>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Loads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = options.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    });
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Empty(format!("{} has no header", path.display())));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = i + 2;
        if record.len() != header.len() {
            return Err(Error::Arity {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    parse_table(name, &header, &rows, options)
}

fn parse_table(name: String, header: &[String], rows: &[Vec<String>], options: &CsvOptions) -> Result<Dataset> {
    let label_idx = match &options.label {
        LabelColumn::Last => header.len() - 1,
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Schema(format!(
                "label column index {i} out of range ({} columns)",
                header.len()
            )))
        }
        LabelColumn::Name(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::Schema(format!("no label column named `{n}`")))?,
    };
    for forced in &options.nominal {
        if !header.contains(forced) {
            return Err(Error::Schema(format!(
                "nominal override names unknown column `{forced}`"
            )));
        }
    }

    let mut labels = BTreeSet::new();
    for (i, row) in rows.iter().enumerate() {
        let cell = &row[label_idx];
        if is_missing(cell) {
            return Err(Error::InvalidDataset(format!("row {}: missing label", i + 2)));
        }
        labels.insert(cell.as_str());
    }
    if labels.len() > 2 {
        return Err(Error::TooManyLabels {
            column: header[label_idx].clone(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        });
    }
    let positive = match &options.positive {
        Some(p) => p.clone(),
        None => labels.iter().next_back().map(|s| s.to_string()).unwrap_or_default(),
    };

    let mut features = Vec::with_capacity(header.len() - 1);
    let mut columns = Vec::with_capacity(header.len() - 1);
    for (col, col_name) in header.iter().enumerate() {
        if col == label_idx {
            continue;
        }
        let cells = rows.iter().map(|r| r[col].as_str());
        let numeric = !options.nominal.contains(col_name)
            && cells.clone().any(|c| !is_missing(c))
            && cells
                .clone()
                .filter(|c| !is_missing(c))
                .all(|c| c.parse::<f64>().is_ok_and(f64::is_finite));
        if numeric {
            features.push(FeatureSpec::numeric(col_name.clone()));
        } else {
            let cats: BTreeSet<&str> = cells.filter(|c| !is_missing(c)).collect();
            if cats.is_empty() {
                return Err(Error::InvalidDataset(format!(
                    "column `{col_name}` has only missing values"
                )));
            }
            features.push(FeatureSpec::nominal(col_name.clone(), cats));
        }
        columns.push(col);
    }

    let instances = rows
        .iter()
        .map(|row| {
            let values = columns
                .iter()
                .zip(&features)
                .map(|(&col, spec)| {
                    let cell = row[col].as_str();
                    if is_missing(cell) {
                        return Value::Missing;
                    }
                    match &spec.kind {
                        // checked above
                        FeatureKind::Numeric => Value::Numeric(cell.parse().unwrap_or(f64::NAN)),
                        FeatureKind::Nominal(cats) => {
                            Value::Category(cats.iter().position(|c| c == cell).unwrap_or(0) as u32)
                        }
                    }
                })
                .collect();
            let label = if row[label_idx] == positive {
                Class::Pos
            } else {
                Class::Neg
            };
            Instance { values, label }
        })
        .collect();
    Dataset::new(name, features, instances)
}

/// Repeated two-fold partitions of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    /// `assignments[rep][instance]` is the fold index of that instance.
    pub assignments: Vec<Vec<u8>>,
}

impl SplitPlan {
    /// (train, test) instance indices when `fold` is held out in repetition `rep`.
    pub fn split(&self, rep: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments[rep].len()).partition(|&i| self.assignments[rep][i] as usize == fold);
        (train, test)
    }
}

/// Five repetitions of unstratified two-fold cross-validation.
pub fn make_5x2(dataset: &Dataset, seed: u64) -> Result<SplitPlan> {
    make_splits(dataset, 5, seed)
}

pub fn make_splits(dataset: &Dataset, repetitions: usize, seed: u64) -> Result<SplitPlan> {
    let (pos, neg) = dataset.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(dataset.name().to_string()));
    }
    if pos < 2 || neg < 2 {
        return Err(Error::InvalidDataset(format!(
            "`{}` needs at least 2 instances of each class ({pos} positive, {neg} negative)",
            dataset.name()
        )));
    }
    if repetitions == 0 {
        return Err(Error::Config("at least one repetition required".into()));
    }
    let n = dataset.len();
    let first = n.div_ceil(2);
    let assignments = (0..repetitions)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64));
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut fold = vec![0u8; n];
            for &i in &order[first..] {
                fold[i] = 1;
            }
            fold
        })
        .collect();
    Ok(SplitPlan {
        repetitions,
        folds: 2,
        seed,
        assignments,
    })
}

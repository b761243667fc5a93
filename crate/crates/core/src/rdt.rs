//! Random decision tree construction and routing.
//!
//! Inner tests are drawn at random: a feature is picked uniformly from the
//! features still available on the path (nominal features are used at most
//! once per path, numeric features stay available), and numeric thresholds
//! are the feature value of a uniformly drawn training instance at the node.
//! No split criterion is optimized. Every node keeps the class counts of the
//! training instances that reached it, so routing can fall back to an
//! ancestor when a branch received no training data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_instance, Class, Dataset, FeatureKind, FeatureSpec, Instance, Value};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Class counts `[w⁺, w⁻]` of the training instances that reached a node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeafStats {
    pub pos: u32,
    pub neg: u32,
}

impl LeafStats {
    pub const fn new(pos: u32, neg: u32) -> Self {
        Self { pos, neg }
    }

    pub const fn n(self) -> u32 {
        self.pos + self.neg
    }

    pub const fn swapped(self) -> Self {
        Self {
            pos: self.neg,
            neg: self.pos,
        }
    }

    /// Errors with [`Error::EmptyLeaf`] when `n == 0`.
    pub fn require_nonempty(self) -> Result<Self> {
        if self.n() == 0 {
            Err(Error::EmptyLeaf)
        } else {
            Ok(self)
        }
    }

    fn add(&mut self, class: Class) {
        match class {
            Class::Pos => self.pos += 1,
            Class::Neg => self.neg += 1,
        }
    }
}

impl std::ops::Add for LeafStats {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.pos + rhs.pos, self.neg + rhs.neg)
    }
}

impl std::iter::Sum for LeafStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// The leaf statistics one test instance reaches in each of the K trees.
pub type LeafVector = Vec<LeafStats>;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Test {
    /// One child per declared category.
    Nominal { feature: usize },
    /// `value <= threshold` goes to child 0, everything else to child 1.
    Numeric { feature: usize, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub test: Test,
    /// `None` marks a branch that received no training instances.
    pub children: Vec<Option<NodeId>>,
    /// Branch taken by missing values: the child with most training instances.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub counts: LeafStats,
    pub split: Option<Split>,
}

/// A single random tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Test draws per node before giving up on a split that separates nothing.
    pub retries: usize,
}

impl TreeParams {
    pub const DEFAULT_RETRIES: usize = 10;

    pub fn new(min_leaf: usize) -> Self {
        Self {
            min_leaf,
            max_depth: None,
            retries: Self::DEFAULT_RETRIES,
        }
    }
}

struct Pending {
    node: NodeId,
    rows: Vec<usize>,
    depth: usize,
    used_nominal: Vec<usize>,
}

/// Builds one random tree over `rows` of `data`.
pub fn build_tree<R: Rng>(data: &Dataset, rows: &[usize], params: &TreeParams, rng: &mut R) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::InvalidDataset("cannot build a tree on an empty subset".into()));
    }
    if params.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be at least 1".into()));
    }
    let features = data.features();
    let instances = data.instances();
    let mut nodes = vec![TreeNode {
        counts: count(instances, rows),
        split: None,
    }];
    let mut stack = vec![Pending {
        node: 0,
        rows: rows.to_vec(),
        depth: 0,
        used_nominal: Vec::new(),
    }];

    while let Some(job) = stack.pop() {
        if job.rows.len() <= params.min_leaf || params.max_depth.is_some_and(|d| job.depth >= d) {
            continue;
        }
        let available: Vec<usize> = (0..features.len())
            .filter(|f| features[*f].arity().is_none() || !job.used_nominal.contains(f))
            .collect();
        if available.is_empty() {
            continue;
        }
        let Some((test, parts)) = draw_split(features, instances, &job.rows, &available, params.retries, rng) else {
            continue;
        };

        let missing = parts
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut parts = parts;
        let feature = match test {
            Test::Nominal { feature } | Test::Numeric { feature, .. } => feature,
        };
        let missing_rows: Vec<usize> = job
            .rows
            .iter()
            .copied()
            .filter(|&r| matches!(instances[r].values[feature], Value::Missing))
            .collect();
        parts[missing].extend(missing_rows);

        let mut used_nominal = job.used_nominal;
        if matches!(test, Test::Nominal { .. }) {
            used_nominal.push(feature);
        }
        let mut children = Vec::with_capacity(parts.len());
        let mut child_jobs = Vec::new();
        for part in parts {
            if part.is_empty() {
                children.push(None);
                continue;
            }
            let id = nodes.len() as NodeId;
            nodes.push(TreeNode {
                counts: count(instances, &part),
                split: None,
            });
            children.push(Some(id));
            child_jobs.push(Pending {
                node: id,
                rows: part,
                depth: job.depth + 1,
                used_nominal: used_nominal.clone(),
            });
        }
        nodes[job.node as usize].split = Some(Split {
            test,
            children,
            missing,
        });
        // reversed so the first child is expanded first
        stack.extend(child_jobs.into_iter().rev());
    }
    Ok(Tree { nodes })
}

fn count(instances: &[Instance], rows: &[usize]) -> LeafStats {
    let mut c = LeafStats::default();
    for &r in rows {
        c.add(instances[r].label);
    }
    c
}

/// Draws up to `retries` random tests and returns the first one that puts the
/// non-missing instances into at least two non-empty branches.
fn draw_split<R: Rng>(
    features: &[FeatureSpec],
    instances: &[Instance],
    rows: &[usize],
    available: &[usize],
    retries: usize,
    rng: &mut R,
) -> Option<(Test, Vec<Vec<usize>>)> {
    for _ in 0..retries.max(1) {
        let feature = available[rng.random_range(0..available.len())];
        let (test, parts) = match &features[feature].kind {
            FeatureKind::Nominal(cats) => {
                let mut parts = vec![Vec::new(); cats.len()];
                for &r in rows {
                    if let Value::Category(c) = instances[r].values[feature] {
                        parts[c as usize].push(r);
                    }
                }
                (Test::Nominal { feature }, parts)
            }
            FeatureKind::Numeric => {
                let pick = rows[rng.random_range(0..rows.len())];
                let Value::Numeric(threshold) = instances[pick].values[feature] else {
                    continue;
                };
                let mut parts = vec![Vec::new(), Vec::new()];
                for &r in rows {
                    if let Value::Numeric(v) = instances[r].values[feature] {
                        parts[usize::from(v > threshold)].push(r);
                    }
                }
                (Test::Numeric { feature, threshold }, parts)
            }
        };
        if parts.iter().filter(|p| !p.is_empty()).count() >= 2 {
            return Some((test, parts));
        }
    }
    None
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Counts of the leaf `instance` reaches; stops at the deepest node whose
    /// next branch received training data.
    pub fn route(&self, instance: &Instance) -> LeafStats {
        let mut node = &self.nodes[0];
        while let Some(split) = &node.split {
            let branch = match (&split.test, instance.values[test_feature(&split.test)]) {
                (_, Value::Missing) => split.missing,
                (Test::Nominal { .. }, Value::Category(c)) => c as usize,
                (Test::Numeric { threshold, .. }, Value::Numeric(v)) => usize::from(v > *threshold),
                _ => split.missing,
            };
            match split.children.get(branch).copied().flatten() {
                Some(child) => node = &self.nodes[child as usize],
                None => break,
            }
        }
        node.counts
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.split.is_none())
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: usize) -> usize {
            match &t.nodes[id].split {
                None => 0,
                Some(s) => {
                    1 + s
                        .children
                        .iter()
                        .flatten()
                        .map(|&c| go(t, c as usize))
                        .max()
                        .unwrap_or(0)
                }
            }
        }
        go(self, 0)
    }
}

fn test_feature(test: &Test) -> usize {
    match test {
        Test::Nominal { feature } | Test::Numeric { feature, .. } => *feature,
    }
}

/// K random trees plus what prediction needs from the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub schema: Vec<FeatureSpec>,
    pub trees: Vec<Tree>,
    pub min_leaf: usize,
    pub seed: u64,
    /// Fraction of positives in the training rows.
    pub prior_pos: f64,
}

/// Builds `k` trees; tree `i` uses a stream seeded from `(seed, i)` so the
/// result does not depend on build order.
pub fn build_ensemble(
    data: &Dataset,
    rows: &[usize],
    k: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<EnsembleModel> {
    if k == 0 {
        return Err(Error::Config("ensemble needs at least one tree".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("empty training subset".into()));
    }
    let totals = count(data.instances(), rows);
    if totals.pos == 0 || totals.neg == 0 {
        return Err(Error::SingleClass(format!("{} (training subset)", data.name())));
    }
    let trees = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            build_tree(data, rows, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        schema: data.features().to_vec(),
        trees,
        min_leaf: params.min_leaf,
        seed,
        prior_pos: f64::from(totals.pos) / f64::from(totals.n()),
    })
}

const FORMAT_TAG: &str = "rdt-ensemble/1";

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    model: M,
}

impl EnsembleModel {
    pub fn k(&self) -> usize {
        self.trees.len()
    }

    pub fn route(&self, instance: &Instance) -> Result<LeafVector> {
        check_instance(&self.schema, instance)?;
        Ok(self.trees.iter().map(|t| t.route(instance)).collect())
    }

    /// Serializes to JSON wrapped in a versioned envelope.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: FORMAT_TAG.to_string(),
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope<EnsembleModel> = serde_json::from_str(text)?;
        if env.format != FORMAT_TAG {
            return Err(Error::Format(format!(
                "expected `{FORMAT_TAG}`, found `{}`",
                env.format
            )));
        }
        Ok(env.model)
    }
}

//! Combination strategies that turn a [`LeafVector`] into one ensemble score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::{combine_masses, mass_from_leaf, Rule};
use crate::error::{Error, Result};
use crate::rdt::LeafStats;
use crate::scoring::{aggregate_avg, aggregate_vote, score_prob, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum Method {
    ProbAvg,
    LaplaceAvg,
    PlsAvg,
    CbAvg,
    Vote,
    Pool,
    Dempster,
    Cautious,
    Eva,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::ProbAvg,
        Method::LaplaceAvg,
        Method::PlsAvg,
        Method::CbAvg,
        Method::Vote,
        Method::Pool,
        Method::Dempster,
        Method::Cautious,
        Method::Eva,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::ProbAvg => "prob",
            Method::LaplaceAvg => "laplace",
            Method::PlsAvg => "pls",
            Method::CbAvg => "cb",
            Method::Vote => "vote",
            Method::Pool => "pool",
            Method::Dempster => "dempster",
            Method::Cautious => "cautious",
            Method::Eva => "eva",
        }
    }

    /// The per-leaf scorer behind the averaging methods.
    pub fn scorer(self) -> Option<Scorer> {
        match self {
            Method::ProbAvg => Some(Scorer::Prob),
            Method::LaplaceAvg => Some(Scorer::Laplace),
            Method::PlsAvg => Some(Scorer::Plausibility),
            Method::CbAvg => Some(Scorer::ConfidenceBound),
            _ => None,
        }
    }

    /// Closed range of the combined score.
    pub fn range(self) -> (f64, f64) {
        match self {
            Method::ProbAvg | Method::LaplaceAvg | Method::CbAvg | Method::Pool => (-0.5, 0.5),
            _ => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl From<Method> for &'static str {
    fn from(m: Method) -> Self {
        m.id()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Parses a comma-separated list of method identifiers.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombineContext {
    /// Fraction of positives in the training data.
    pub prior_pos: f64,
    /// Additive smoothing inside `P(y | w)` for evidence accumulation.
    pub eva_smoothing: f64,
}

impl CombineContext {
    pub const DEFAULT_EVA_SMOOTHING: f64 = 0.1;

    pub fn new(prior_pos: f64) -> Result<Self> {
        Self::with_smoothing(prior_pos, Self::DEFAULT_EVA_SMOOTHING)
    }

    pub fn with_smoothing(prior_pos: f64, eva_smoothing: f64) -> Result<Self> {
        if !(prior_pos > 0.0 && prior_pos < 1.0) {
            return Err(Error::OutOfRange {
                what: "prior_pos",
                detail: format!("{prior_pos} not in (0, 1)"),
            });
        }
        if !(eva_smoothing > 0.0 && eva_smoothing.is_finite()) {
            return Err(Error::OutOfRange {
                what: "eva_smoothing",
                detail: format!("{eva_smoothing} must be positive"),
            });
        }
        Ok(Self {
            prior_pos,
            eva_smoothing,
        })
    }
}

/// Probability of the pooled counts, minus ½.
pub fn pool(leaves: &[LeafStats]) -> Result<f64> {
    if leaves.is_empty() {
        return Err(Error::EmptyScores);
    }
    score_prob(leaves.iter().copied().sum())
}

/// Log-space evidence for each class: `ln P(y) + Σ ln(P(y|wᵢ)/P(y))`.
pub fn eva_log_evidence(leaves: &[LeafStats], ctx: &CombineContext) -> Result<(f64, f64)> {
    if leaves.is_empty() {
        return Err(Error::EmptyScores);
    }
    let (prior_pos, prior_neg) = (ctx.prior_pos, 1.0 - ctx.prior_pos);
    let (ln_prior_pos, ln_prior_neg) = (prior_pos.ln(), prior_neg.ln());
    let s = ctx.eva_smoothing;
    let mut log_a = ln_prior_pos;
    let mut log_b = ln_prior_neg;
    for leaf in leaves {
        let leaf = leaf.require_nonempty()?;
        let denom = f64::from(leaf.n()) + 2.0 * s;
        log_a += ((f64::from(leaf.pos) + s) / denom).ln() - ln_prior_pos;
        log_b += ((f64::from(leaf.neg) + s) / denom).ln() - ln_prior_neg;
    }
    Ok((log_a, log_b))
}

/// Evidence accumulation, returned as `(A − B)/(A + B)` where `A` and `B` are
/// the accumulated class evidences; computed as `tanh((ln A − ln B)/2)`.
pub fn eva(leaves: &[LeafStats], ctx: &CombineContext) -> Result<f64> {
    let (log_a, log_b) = eva_log_evidence(leaves, ctx)?;
    Ok(((log_a - log_b) / 2.0).tanh())
}

/// Scores one leaf vector with `method`.
pub fn combine(method: Method, leaves: &[LeafStats], ctx: &CombineContext) -> Result<f64> {
    if leaves.is_empty() {
        return Err(Error::EmptyScores);
    }
    match method {
        Method::ProbAvg | Method::LaplaceAvg | Method::PlsAvg | Method::CbAvg => {
            let scorer = method.scorer().expect("averaging method has a scorer");
            let scores = leaves.iter().map(|l| scorer.score(*l)).collect::<Result<Vec<_>>>()?;
            aggregate_avg(&scores)
        }
        Method::Vote => {
            let scores = leaves.iter().map(|l| score_prob(*l)).collect::<Result<Vec<_>>>()?;
            aggregate_vote(&scores)
        }
        Method::Pool => pool(leaves),
        Method::Dempster | Method::Cautious => {
            let masses = leaves.iter().map(|l| mass_from_leaf(*l)).collect::<Result<Vec<_>>>()?;
            let rule = if method == Method::Dempster {
                Rule::Dempster
            } else {
                Rule::Cautious
            };
            Ok(combine_masses(rule, &masses)?.score())
        }
        Method::Eva => eva(leaves, ctx),
    }
}

/// Scores one leaf vector with every method in `methods`, in order.
pub fn combine_all(methods: &[Method], leaves: &[LeafStats], ctx: &CombineContext) -> Result<Vec<f64>> {
    methods.iter().map(|m| combine(*m, leaves, ctx)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(p: u32, q: u32) -> LeafStats {
        LeafStats::new(p, q)
    }

    fn ctx(prior: f64) -> CombineContext {
        CombineContext::new(prior).unwrap()
    }

    #[test]
    fn identifiers_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
        assert!("median".parse::<Method>().is_err());
        assert_eq!(parse_methods("prob, eva").unwrap(), vec![Method::ProbAvg, Method::Eva]);
        assert_eq!(serde_json::to_string(&Method::PlsAvg).unwrap(), "\"pls\"");
    }

    #[test]
    fn pool_examples() {
        assert!((pool(&[l(4, 0), l(10, 40)]).unwrap() - (14.0 / 54.0 - 0.5)).abs() < 1e-15);
        assert_eq!(pool(&[l(3, 9)]).unwrap(), score_prob(l(3, 9)).unwrap());
        assert_eq!(pool(&[l(2, 2), l(5, 5)]).unwrap(), 0.0);
        assert!(pool(&[l(0, 0)]).is_err());
        assert!(pool(&[]).is_err());
    }

    #[test]
    fn eva_examples() {
        assert_eq!(eva(&[l(3, 1), l(1, 3)], &ctx(0.5)).unwrap(), 0.0);
        let v = eva(&[l(1, 0)], &ctx(0.5)).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-12, "{v}");
        // smoothed P(⊕|[3,1]) = 3.5/5 = 0.7 sits at the prior, so all ratio factors are 1
        let c = CombineContext::with_smoothing(0.7, 0.5).unwrap();
        let at_prior = [l(3, 1), l(3, 1), l(3, 1)];
        let (a, b) = eva_log_evidence(&at_prior, &c).unwrap();
        let raw = a.exp() - b.exp();
        assert!((raw - (0.7 - 0.3)).abs() < 1e-12);
        assert!(eva(&[l(0, 0)], &c).is_err());
    }

    #[test]
    fn eva_handles_long_vectors() {
        let leaves = vec![l(5, 0); 2000];
        let v = eva(&leaves, &ctx(0.4)).unwrap();
        assert_eq!(v, 1.0);
        let leaves = vec![l(0, 5); 2000];
        assert_eq!(eva(&leaves, &ctx(0.4)).unwrap(), -1.0);
    }

    #[test]
    fn context_validation() {
        assert!(CombineContext::new(0.0).is_err());
        assert!(CombineContext::new(1.0).is_err());
        assert!(CombineContext::with_smoothing(0.5, 0.0).is_err());
    }

    #[test]
    fn prob_avg_worked_example() {
        let v = combine(Method::ProbAvg, &[l(4, 0), l(10, 40)], &ctx(0.5)).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pure_leaf_positive_under_every_method() {
        for m in Method::ALL {
            assert!(combine(m, &[l(1, 0)], &ctx(0.5)).unwrap() > 0.0, "{m}");
            assert!(combine(m, &[l(0, 1)], &ctx(0.5)).unwrap() < 0.0, "{m}");
        }
    }

    #[test]
    fn single_leaf_coherence() {
        for n in 1..=30 {
            for p in 0..=n {
                let lv = [l(p, n - p)];
                let c = ctx(0.3);
                assert_eq!(
                    combine(Method::Pool, &lv, &c).unwrap(),
                    combine(Method::ProbAvg, &lv, &c).unwrap()
                );
                let d = combine(Method::Dempster, &lv, &c).unwrap();
                let k = combine(Method::Cautious, &lv, &c).unwrap();
                assert!((d - k).abs() < 1e-9, "[{p},{}]: {d} vs {k}", n - p);
            }
        }
    }

    #[test]
    fn empty_vector_rejected() {
        for m in Method::ALL {
            assert!(combine(m, &[], &ctx(0.5)).is_err());
        }
    }
}

//! Per-leaf scores and the aggregation of score vectors.
//!
//! A score is a signed real: positive prefers the positive class, negative
//! the negative class, zero is a tie.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rdt::LeafStats;
use crate::uncertainty::{profile, separation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scorer {
    Prob,
    Laplace,
    Plausibility,
    ConfidenceBound,
}

impl Scorer {
    pub const ALL: [Scorer; 4] = [
        Scorer::Prob,
        Scorer::Laplace,
        Scorer::Plausibility,
        Scorer::ConfidenceBound,
    ];

    pub fn score(self, leaf: LeafStats) -> Result<f64> {
        match self {
            Scorer::Prob => score_prob(leaf),
            Scorer::Laplace => Ok(score_laplace(leaf)),
            Scorer::Plausibility => score_plausibility(leaf),
            Scorer::ConfidenceBound => score_cb(leaf),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Scorer::Prob => "prob",
            Scorer::Laplace => "laplace",
            Scorer::Plausibility => "pls",
            Scorer::ConfidenceBound => "cb",
        }
    }

    /// Closed range the scorer's output lies in.
    pub fn range(self) -> (f64, f64) {
        match self {
            Scorer::Plausibility => (-1.0, 1.0),
            _ => (-0.5, 0.5),
        }
    }
}

fn ratio(leaf: LeafStats) -> Result<f64> {
    let leaf = leaf.require_nonempty()?;
    Ok(f64::from(leaf.pos) / f64::from(leaf.n()))
}

/// `w⁺/n − ½`.
pub fn score_prob(leaf: LeafStats) -> Result<f64> {
    Ok(ratio(leaf)? - 0.5)
}

/// `(w⁺+1)/(n+2) − ½`; defined for empty leaves too.
pub fn score_laplace(leaf: LeafStats) -> f64 {
    (f64::from(leaf.pos) + 1.0) / (f64::from(leaf.n()) + 2.0) - 0.5
}

/// `s⊕ − s⊖`, the difference of the degrees of preference.
pub fn score_plausibility(leaf: LeafStats) -> Result<f64> {
    let p = profile(leaf)?;
    Ok(p.s_pos - p.s_neg)
}

/// `(1 − c(w)) · (w⁺/n − ½)` with `c` the beta-binomial separation.
pub fn score_cb(leaf: LeafStats) -> Result<f64> {
    Ok((1.0 - separation(leaf)?) * score_prob(leaf)?)
}

/// Arithmetic mean.
pub fn aggregate_avg(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Mean of the signs: +1 for positive scores, −1 for negative, 0 abstains.
pub fn aggregate_vote(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let total: f64 = scores
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / scores.len() as f64)
}

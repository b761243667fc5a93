//! Mass functions on the two-class frame `Ω = {⊕, ⊖}` and their
//! conjunctive combination.
//!
//! Two rules are provided: the unnormalized Dempster rule, which multiplies
//! commonalities and lets conflict accumulate on `∅`, and the cautious rule,
//! which takes the componentwise minimum of conjunctive weight functions and
//! is idempotent. On a two-element frame the canonical decomposition has a
//! closed form, so no general lattice machinery is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rdt::LeafStats;
use crate::uncertainty::profile;

/// Minimum mass kept on `{⊕}`, `{⊖}` and `Ω` for masses built from leaves.
pub const MASS_FLOOR: f64 = 1e-5;
const SUM_TOLERANCE: f64 = 1e-9;
const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassFunction {
    pub empty: f64,
    pub pos: f64,
    pub neg: f64,
    pub omega: f64,
}

impl MassFunction {
    pub const VACUOUS: Self = Self {
        empty: 0.0,
        pos: 0.0,
        neg: 0.0,
        omega: 1.0,
    };

    pub fn new(empty: f64, pos: f64, neg: f64, omega: f64) -> Result<Self> {
        let m = Self { empty, pos, neg, omega };
        if m.as_array().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMass(format!("negative or non-finite mass in {m:?}")));
        }
        if (m.total() - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidMass(format!("masses sum to {}", m.total())));
        }
        Ok(m)
    }

    /// Simple support function: `1 − x` on `{⊕}`, `x` on `Ω`.
    pub fn support_pos(strength: f64) -> Result<Self> {
        Self::new(0.0, strength, 0.0, 1.0 - strength)
    }

    pub fn support_neg(strength: f64) -> Result<Self> {
        Self::new(0.0, 0.0, strength, 1.0 - strength)
    }

    pub fn total(&self) -> f64 {
        self.empty + self.pos + self.neg + self.omega
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.empty, self.pos, self.neg, self.omega]
    }

    /// Raises `{⊕}`, `{⊖}` and `Ω` to at least [`MASS_FLOOR`]. The added mass
    /// comes out of `∅` while it lasts, then out of the largest focal set.
    pub fn floored(self) -> Self {
        let mut m = self;
        let mut deficit = 0.0;
        for v in [&mut m.pos, &mut m.neg, &mut m.omega] {
            if *v < MASS_FLOOR {
                deficit += MASS_FLOOR - *v;
                *v = MASS_FLOOR;
            }
        }
        let from_empty = deficit.min(m.empty);
        m.empty -= from_empty;
        deficit -= from_empty;
        if deficit > 0.0 {
            let largest = if m.pos >= m.neg && m.pos >= m.omega {
                &mut m.pos
            } else if m.neg >= m.omega {
                &mut m.neg
            } else {
                &mut m.omega
            };
            *largest -= deficit;
        }
        m
    }

    /// `m({⊕}) − m({⊖})`.
    pub fn score(&self) -> f64 {
        self.pos - self.neg
    }
}

/// Mass function of a leaf from its uncertainty profile, floored.
pub fn mass_from_leaf(leaf: LeafStats) -> Result<MassFunction> {
    let p = profile(leaf)?;
    let m = MassFunction {
        empty: 0.0,
        pos: p.s_pos,
        neg: p.s_neg,
        omega: p.u_e + p.u_a,
    };
    Ok(m.floored())
}

/// Unnormalized Dempster combination `(a ⊓ b)(A) = Σ_{B∩C=A} a(B)·b(C)`.
pub fn dempster_pair(a: &MassFunction, b: &MassFunction) -> MassFunction {
    let pos = a.pos * b.pos + a.pos * b.omega + a.omega * b.pos;
    let neg = a.neg * b.neg + a.neg * b.omega + a.omega * b.neg;
    let omega = a.omega * b.omega;
    let empty = a.empty * b.total() + (a.pos + a.neg + a.omega) * b.empty + a.pos * b.neg + a.neg * b.pos;
    MassFunction { empty, pos, neg, omega }
}

/// Conjunctive weights of the canonical decomposition on the 2-frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub pos: f64,
    pub neg: f64,
    pub empty: f64,
}

impl WeightFunction {
    pub const VACUOUS: Self = Self {
        pos: 1.0,
        neg: 1.0,
        empty: 1.0,
    };

    pub fn new(pos: f64, neg: f64, empty: f64) -> Result<Self> {
        let w = Self { pos, neg, empty };
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(pos) || !unit(neg) || !(empty > 0.0 && empty.is_finite()) {
            return Err(Error::InvalidWeights(format!("{w:?}")));
        }
        Ok(w)
    }
}

/// Decomposes `m` through its commonalities `Q(A) = Σ_{B⊇A} m(B)`.
pub fn weights_of(m: &MassFunction) -> Result<WeightFunction> {
    if m.omega <= 0.0 {
        return Err(Error::InvalidMass("m(Ω) must be positive to decompose".into()));
    }
    let q_pos = m.pos + m.omega;
    let q_neg = m.neg + m.omega;
    let q_omega = m.omega;
    Ok(WeightFunction {
        pos: q_omega / q_pos,
        neg: q_omega / q_neg,
        empty: q_pos * q_neg / q_omega,
    })
}

/// Cautious rule on weights: componentwise minimum.
pub fn cautious_pair(a: &WeightFunction, b: &WeightFunction) -> WeightFunction {
    WeightFunction {
        pos: a.pos.min(b.pos),
        neg: a.neg.min(b.neg),
        empty: a.empty.min(b.empty),
    }
}

/// Recomposes a mass function from its weights by Möbius inversion of the
/// commonalities.
pub fn mass_of(w: &WeightFunction) -> Result<MassFunction> {
    let q_pos = w.empty * w.neg;
    let q_neg = w.empty * w.pos;
    let q_omega = w.empty * w.pos * w.neg;
    let raw = [1.0 - q_pos - q_neg + q_omega, q_pos - q_omega, q_neg - q_omega, q_omega];
    if let Some(bad) = raw.iter().find(|v| **v < -NEGATIVE_TOLERANCE || !v.is_finite()) {
        return Err(Error::InvalidWeights(format!("{w:?} yields mass {bad}")));
    }
    let [empty, pos, neg, omega] = raw.map(|v| v.max(0.0));
    Ok(MassFunction { empty, pos, neg, omega })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Dempster,
    Cautious,
}

/// Left fold of `rule` over `masses`.
pub fn combine_masses(rule: Rule, masses: &[MassFunction]) -> Result<MassFunction> {
    let (first, rest) = masses.split_first().ok_or(Error::EmptyScores)?;
    match rule {
        Rule::Dempster => Ok(rest.iter().fold(*first, |acc, m| dempster_pair(&acc, m))),
        Rule::Cautious => {
            let mut acc = weights_of(first)?;
            for m in rest {
                acc = cautious_pair(&acc, &weights_of(m)?);
            }
            mass_of(&acc)
        }
    }
}

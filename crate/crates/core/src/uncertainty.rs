//! Plausibility-based uncertainty of a leaf and beta-binomial separation.
//!
//! For a leaf `w = [w⁺, w⁻]` the degree of support for the positive class is
//!
//! ```text
//! π(⊕|w) = sup_θ min( L(θ), 2θ − 1 ),   L(θ) = (θ/θ̂)^w⁺ ((1−θ)/(1−θ̂))^w⁻,   θ̂ = w⁺/n
//! ```
//!
//! and `π(⊖|w)` uses `1 − 2θ`. Epistemic uncertainty is the smaller support,
//! aleatoric uncertainty one minus the larger, and the remaining mass is the
//! degree of preference of the winning class.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::data::Class;
use crate::error::{Error, Result};
use crate::rdt::LeafStats;

/// Supports closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;
const RELATIVE_TOLERANCE: f64 = 1e-12;
const MAX_BISECTIONS: usize = 2000;
/// Leaves with `n` up to this size have their profiles tabulated.
pub const MEMO_MAX_N: u32 = 64;

/// `ln L(θ)` at `θ = (1+t)/2`, the point where the positive-class line
/// `2θ − 1` equals `t`. Terms with a zero exponent are dropped before any
/// division so pure leaves need no special casing.
fn log_likelihood_at(leaf: LeafStats, t: f64) -> f64 {
    let n = f64::from(leaf.n());
    let mut acc = 0.0;
    if leaf.pos > 0 {
        let ln_theta = t.ln_1p() - LN_2;
        acc += f64::from(leaf.pos) * (ln_theta - (f64::from(leaf.pos) / n).ln());
    }
    if leaf.neg > 0 {
        let ln_rest = (-t).ln_1p() - LN_2;
        acc += f64::from(leaf.neg) * (ln_rest - (f64::from(leaf.neg) / n).ln());
    }
    acc
}

/// Degree of support `π(class|leaf)`.
pub fn plausibility(leaf: LeafStats, class: Class) -> Result<f64> {
    let leaf = leaf.require_nonempty()?;
    Ok(match class {
        Class::Pos => support_pos(leaf),
        // L is symmetric under θ ↦ 1−θ with the counts swapped
        Class::Neg => support_pos(leaf.swapped()),
    })
}

/// Solves `L(θ) = 2θ − 1` for `t = 2θ − 1`. On `t ∈ [max(2θ̂−1, 0), 1]` the
/// likelihood falls while `t` rises, so `ln L − ln t` is monotone and the
/// supremum of the minimum sits at the crossing. Bisection stops on a
/// relative bracket width; supports of large pure leaves are around `2⁻ⁿ`.
fn support_pos(leaf: LeafStats) -> f64 {
    let gap = |t: f64| log_likelihood_at(leaf, t) - t.ln();
    if gap(1.0) >= 0.0 {
        return 1.0;
    }
    let theta_hat = f64::from(leaf.pos) / f64::from(leaf.n());
    let (mut lo, mut hi) = ((2.0 * theta_hat - 1.0).max(0.0), 1.0);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= RELATIVE_TOLERANCE * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyProfile {
    pub pi_pos: f64,
    pub pi_neg: f64,
    /// Epistemic uncertainty.
    pub u_e: f64,
    /// Aleatoric uncertainty.
    pub u_a: f64,
    pub s_pos: f64,
    pub s_neg: f64,
}

impl UncertaintyProfile {
    fn from_supports(pi_pos: f64, pi_neg: f64) -> Self {
        let u_e = pi_pos.min(pi_neg);
        let u_a = 1.0 - pi_pos.max(pi_neg);
        let committed = 1.0 - (u_a + u_e);
        let (s_pos, s_neg) = if (pi_pos - pi_neg).abs() <= TIE_TOLERANCE {
            (committed / 2.0, committed / 2.0)
        } else if pi_pos > pi_neg {
            (committed, 0.0)
        } else {
            (0.0, committed)
        };
        Self {
            pi_pos,
            pi_neg,
            u_e,
            u_a,
            s_pos,
            s_neg,
        }
    }

    fn compute(leaf: LeafStats) -> Self {
        Self::from_supports(support_pos(leaf), support_pos(leaf.swapped()))
    }
}

fn memo_index(leaf: LeafStats) -> usize {
    // triangular layout over (n, pos) with n ≤ MEMO_MAX_N
    let n = leaf.n() as usize;
    n * (n + 1) / 2 + leaf.pos as usize
}

fn memo() -> &'static [UncertaintyProfile] {
    static TABLE: OnceLock<Vec<UncertaintyProfile>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(memo_index(LeafStats::new(MEMO_MAX_N, 0)) + 1);
        for n in 0..=MEMO_MAX_N {
            for pos in 0..=n {
                let leaf = LeafStats::new(pos, n - pos);
                table.push(if n == 0 {
                    // never read; keeps the layout dense
                    UncertaintyProfile::from_supports(1.0, 1.0)
                } else {
                    UncertaintyProfile::compute(leaf)
                });
            }
        }
        table
    })
}

/// Full uncertainty profile of a leaf. Small leaves come from a shared table.
pub fn profile(leaf: LeafStats) -> Result<UncertaintyProfile> {
    let leaf = leaf.require_nonempty()?;
    if leaf.n() <= MEMO_MAX_N {
        Ok(memo()[memo_index(leaf)])
    } else {
        Ok(UncertaintyProfile::compute(leaf))
    }
}

/// Beta-binomial distribution over `0..=trials` successes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBinomialSpec {
    pub trials: u32,
    pub alpha: f64,
    pub beta: f64,
}

impl BetaBinomialSpec {
    /// Distribution of the positive count for a leaf: `α = w⁺+1`, `β = w⁻+1`.
    pub fn for_leaf(leaf: LeafStats) -> Result<Self> {
        let leaf = leaf.require_nonempty()?;
        Ok(Self {
            trials: leaf.n(),
            alpha: f64::from(leaf.pos) + 1.0,
            beta: f64::from(leaf.neg) + 1.0,
        })
    }

    pub fn mirrored(self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
            ..self
        }
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
}

/// `C(n,k) · B(k+α, n−k+β) / B(α,β)`, evaluated in log space.
pub fn bb_pmf(spec: BetaBinomialSpec, k: u32) -> Result<f64> {
    if k > spec.trials {
        return Err(Error::OutOfRange {
            what: "k",
            detail: format!("{k} > trials {}", spec.trials),
        });
    }
    let n = spec.trials;
    let ln_p = ln_choose(n, k) + ln_beta(f64::from(k) + spec.alpha, f64::from(n - k) + spec.beta)
        - ln_beta(spec.alpha, spec.beta);
    Ok(ln_p.exp())
}

/// Mode of a beta-binomial with `α, β ≥ 1`, located with the pmf ratio
/// `f(k+1)/f(k) = (n−k)(k+α) / ((k+1)(n−k−1+β))`; the pmf is unimodal there.
fn bb_mode(spec: BetaBinomialSpec) -> u32 {
    let n = spec.trials;
    let mut k = 0;
    while k < n {
        let kf = f64::from(k);
        let nk = f64::from(n - k);
        let ratio = nk * (kf + spec.alpha) / ((kf + 1.0) * (nk - 1.0 + spec.beta));
        if ratio <= 1.0 {
            break;
        }
        k += 1;
    }
    k
}

/// Height of the positive-count distribution at the middle of the support,
/// relative to its maximum. Odd `n` averages the two central values.
pub fn separation(leaf: LeafStats) -> Result<f64> {
    let spec = BetaBinomialSpec::for_leaf(leaf)?;
    let n = spec.trials;
    let mid = if n % 2 == 0 {
        bb_pmf(spec, n / 2)?
    } else {
        0.5 * (bb_pmf(spec, n / 2)? + bb_pmf(spec, n / 2 + 1)?)
    };
    let peak = bb_pmf(spec, bb_mode(spec))?;
    Ok((mid / peak).min(1.0))
}

//! Bernoulli simulation of growing leaves.
//!
//! A leaf starts empty and receives one sample per step, positive with
//! probability `p_pos`. Single-leaf mode scores the leaf after every step;
//! ensemble mode grows `ensemble_leaves` independent leaves in lockstep and
//! combines them after every step. Each trial draws from its own stream
//! seeded from `(seed, trial)`, so the same trial sees the same samples
//! whichever scorer or method is evaluated.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{combine, CombineContext, Method};
use crate::error::{Error, Result};
use crate::rdt::LeafStats;
use crate::scoring::Scorer;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p_pos: f64,
    pub max_n: usize,
    pub trials: usize,
    pub ensemble_leaves: usize,
    pub seed: u64,
    pub quantiles: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p_pos: 0.75,
            max_n: 100,
            trials: 100,
            ensemble_leaves: 100,
            seed: 1,
            quantiles: vec![0.10, 0.25, 0.75, 0.90],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_pos > 0.0 && self.p_pos < 1.0) {
            return Err(Error::Config(format!("p_pos must lie in (0, 1), got {}", self.p_pos)));
        }
        if self.max_n == 0 || self.trials == 0 || self.ensemble_leaves == 0 {
            return Err(Error::Config(
                "max_n, trials and ensemble_leaves must be at least 1".into(),
            ));
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::Config(format!(
                "quantiles must lie in (0, 1]: {:?}",
                self.quantiles
            )));
        }
        Ok(())
    }

    /// Column names for the configured quantiles, e.g. `q10`, `q50`.
    pub fn quantile_columns(&self) -> Vec<String> {
        self.quantiles
            .iter()
            .map(|q| format!("q{}", (q * 100.0).round() as i64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    /// Samples per leaf, starting at 1.
    pub step: usize,
    pub mean: f64,
    /// Standard error of the mean over trials.
    pub std_err: f64,
    pub quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub label: String,
    pub config: SimConfig,
    pub steps: Vec<StepSummary>,
    /// `trials[t][step - 1]`.
    pub trials: Vec<Vec<f64>>,
}

/// Nearest-rank empirical quantile of sorted data.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(label: String, config: &SimConfig, trials: Vec<Vec<f64>>) -> Trajectory {
    let count = trials.len() as f64;
    let steps = (0..config.max_n)
        .map(|s| {
            let mut column: Vec<f64> = trials.iter().map(|t| t[s]).collect();
            let mean = column.iter().sum::<f64>() / count;
            let var = if trials.len() > 1 {
                column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            column.sort_by(f64::total_cmp);
            StepSummary {
                step: s + 1,
                mean,
                std_err: (var / count).sqrt(),
                quantiles: config.quantiles.iter().map(|&q| nearest_rank(&column, q)).collect(),
            }
        })
        .collect();
    Trajectory {
        label,
        config: config.clone(),
        steps,
        trials,
    }
}

fn draw(rng: &mut ChaCha8Rng, p_pos: f64, leaf: &mut LeafStats) {
    if rng.random_bool(p_pos) {
        leaf.pos += 1;
    } else {
        leaf.neg += 1;
    }
}

/// Score trajectories of one growing leaf.
pub fn simulate_scorer(config: &SimConfig, scorer: Scorer) -> Result<Trajectory> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t as u64));
            let mut leaf = LeafStats::default();
            (0..config.max_n)
                .map(|_| {
                    draw(&mut rng, config.p_pos, &mut leaf);
                    scorer.score(leaf)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(scorer.id().to_string(), config, trials))
}

/// Combined-score trajectories of simulated ensembles of growing leaves.
pub fn simulate_combiner(config: &SimConfig, method: Method) -> Result<Trajectory> {
    config.validate()?;
    let ctx = CombineContext::new(config.p_pos)?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t as u64));
            let mut leaves = vec![LeafStats::default(); config.ensemble_leaves];
            (0..config.max_n)
                .map(|_| {
                    for leaf in leaves.iter_mut() {
                        draw(&mut rng, config.p_pos, leaf);
                    }
                    combine(method, &leaves, &ctx)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(method.id().to_string(), config, trials))
}

/// CSV with columns `step, method, mean, q..` (one per configured quantile).
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "method".into(), "mean".into()];
    header.extend(traj.config.quantile_columns());
    w.write_record(&header)?;
    for s in &traj.steps {
        let mut rec = vec![s.step.to_string(), traj.label.clone(), s.mean.to_string()];
        rec.extend(s.quantiles.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            max_n: 40,
            trials: 60,
            ensemble_leaves: 20,
            ..SimConfig::default()
        }
    }

    #[test]
    fn nearest_rank_definition() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(nearest_rank(&v, 0.1), 1.0);
        assert_eq!(nearest_rank(&v, 0.25), 3.0);
        assert_eq!(nearest_rank(&v, 0.5), 5.0);
        assert_eq!(nearest_rank(&v, 0.9), 9.0);
        assert_eq!(nearest_rank(&v, 1.0), 10.0);
        assert_eq!(nearest_rank(&[4.0], 0.01), 4.0);
    }

    #[test]
    fn validation() {
        let mut c = SimConfig {
            p_pos: 1.2,
            ..SimConfig::default()
        };
        assert!(simulate_scorer(&c, Scorer::Prob).is_err());
        c.p_pos = 0.5;
        c.trials = 0;
        assert!(c.validate().is_err());
        c.trials = 1;
        c.quantiles = vec![0.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic_and_shapes() {
        let c = small();
        let a = simulate_combiner(&c, Method::Pool).unwrap();
        assert_eq!(a, simulate_combiner(&c, Method::Pool).unwrap());
        assert_eq!(a.steps.len(), 40);
        assert_eq!(a.trials.len(), 60);
        assert_eq!(a.steps[0].step, 1);
    }

    #[test]
    fn quantiles_ordered_and_in_range() {
        let c = small();
        for m in Method::ALL {
            let t = simulate_combiner(&c, m).unwrap();
            let (lo, hi) = m.range();
            for s in &t.steps {
                assert!(s.quantiles.windows(2).all(|w| w[0] <= w[1]), "{m} step {}", s.step);
                assert!(s.quantiles[1] <= s.quantiles[2]);
            }
            assert!(t.trials.iter().flatten().all(|v| (lo..=hi).contains(v)), "{m}");
        }
        for sc in Scorer::ALL {
            let t = simulate_scorer(&c, sc).unwrap();
            let (lo, hi) = sc.range();
            assert!(t.trials.iter().flatten().all(|v| (lo..=hi).contains(v)));
        }
    }

    #[test]
    fn same_samples_across_scorers() {
        let c = small();
        let prob = simulate_scorer(&c, Scorer::Prob).unwrap();
        let lap = simulate_scorer(&c, Scorer::Laplace).unwrap();
        for (tp, tl) in prob.trials.iter().zip(&lap.trials) {
            for (n, (p, l)) in tp.iter().zip(tl).enumerate() {
                // (p+½)·n recovers w⁺; Laplace must match the same counts
                let pos = ((p + 0.5) * (n + 1) as f64).round();
                let expect = (pos + 1.0) / (n as f64 + 3.0) - 0.5;
                assert!((l - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let c = SimConfig {
            max_n: 3,
            trials: 5,
            quantiles: vec![0.5],
            ..SimConfig::default()
        };
        let t = simulate_scorer(&c, Scorer::Prob).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,method,mean,q50");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,prob,"));
    }
}

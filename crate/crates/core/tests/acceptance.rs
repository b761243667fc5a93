//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rdt_core::belief::{combine_masses, dempster_pair, mass_of, weights_of, MassFunction, Rule, WeightFunction};
use rdt_core::combine::{combine, CombineContext, Method};
use rdt_core::data::{load_csv, Class, CsvOptions};
use rdt_core::eval::{auc, rank_table, read_results_csv, run_experiment, write_results_csv, ExperimentConfig, Metric};
use rdt_core::scoring::Scorer;
use rdt_core::sim::{simulate_combiner, simulate_scorer, SimConfig};
use rdt_core::uncertainty::{plausibility, TIE_TOLERANCE};
use rdt_core::LeafStats;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario() -> [MassFunction; 3] {
    [
        MassFunction::support_pos(0.8).unwrap(),
        MassFunction::support_pos(0.8).unwrap(),
        MassFunction::support_neg(0.98).unwrap(),
    ]
}

fn dempster_scenario() -> Outcome {
    let m = combine_masses(Rule::Dempster, &scenario()).map_err(|e| e.to_string())?;
    let detail = format!("m(empty) = {:.7}, score = {:.7}", m.empty, m.score());
    check(
        (m.empty - 0.9408).abs() <= 1e-6 && (m.score() + 0.02).abs() <= 1e-6,
        detail,
    )
}

fn cautious_scenario() -> Outcome {
    let m = combine_masses(Rule::Cautious, &scenario()).map_err(|e| e.to_string())?;
    let s = m.score();
    let detail = format!("m(empty) = {:.7}, score = {:.7}", m.empty, s);
    let exact = (m.empty - 0.784).abs() <= 1e-6 && (s + 0.18).abs() <= 1e-6;
    let reported = (m.empty - 0.78).abs() <= 0.03 && (s.abs() - 0.20).abs() <= 0.03 && s < 0.0;
    check(exact && reported, detail)
}

fn tie_scenario() -> Outcome {
    let masses = [
        MassFunction::support_pos(0.4).unwrap(),
        MassFunction::support_pos(0.4).unwrap(),
        MassFunction::support_neg(0.4).unwrap(),
    ];
    let d = combine_masses(Rule::Dempster, &masses)
        .map_err(|e| e.to_string())?
        .score();
    let c = combine_masses(Rule::Cautious, &masses)
        .map_err(|e| e.to_string())?
        .score();
    check(
        d > 0.0 && c.abs() <= 1e-9,
        format!("dempster = {d:.6}, cautious = {c:.2e}"),
    )
}

fn prob_avg_example() -> Outcome {
    let ctx = CombineContext::new(0.5).map_err(|e| e.to_string())?;
    let v =
        combine(Method::ProbAvg, &[LeafStats::new(4, 0), LeafStats::new(10, 40)], &ctx).map_err(|e| e.to_string())?;
    check((v - 0.1).abs() <= 1e-15, format!("score = {v}"))
}

fn sign(x: f64) -> i8 {
    if x.abs() <= TIE_TOLERANCE {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

const GRID_STEPS: usize = 100_000;

fn grid_support(pos: u32, neg: u32, class: Class) -> f64 {
    let n = f64::from(pos + neg);
    let (hat_pos, hat_neg) = (f64::from(pos) / n, f64::from(neg) / n);
    (0..=GRID_STEPS)
        .map(|i| {
            let theta = i as f64 / GRID_STEPS as f64;
            let like = (theta / hat_pos).powi(pos as i32) * ((1.0 - theta) / hat_neg).powi(neg as i32);
            let line = match class {
                Class::Pos => 2.0 * theta - 1.0,
                Class::Neg => 1.0 - 2.0 * theta,
            };
            like.min(line)
        })
        .fold(f64::MIN, f64::max)
}

fn sign_sweep() -> Outcome {
    let leaves: Vec<LeafStats> = (1..=64u32)
        .flat_map(|n| (0..=n).map(move |p| LeafStats::new(p, n - p)))
        .collect();
    let disagreements: Vec<String> = leaves
        .iter()
        .filter(|l| {
            let expected = sign(f64::from(l.pos) - f64::from(l.neg));
            Scorer::ALL
                .iter()
                .any(|s| s.score(**l).map(sign).ok() != Some(expected))
        })
        .map(|l| format!("[{},{}]", l.pos, l.neg))
        .collect();
    let worst = leaves
        .par_iter()
        .flat_map_iter(|l| [Class::Pos, Class::Neg].map(|c| (*l, c)))
        .map(|(l, c)| {
            let got = plausibility(l, c).unwrap_or(f64::NAN);
            let gap = (got - grid_support(l.pos, l.neg, c)).abs();
            if gap.is_nan() {
                f64::INFINITY
            } else {
                gap
            }
        })
        .reduce(|| 0.0, f64::max);
    let detail = format!(
        "{} leaves, {} sign disagreements {:?}, max |solver - grid| = {worst:.2e}",
        leaves.len(),
        disagreements.len(),
        disagreements.iter().take(5).collect::<Vec<_>>()
    );
    check(disagreements.is_empty() && worst <= 1e-4, detail)
}

fn random_mass(rng: &mut ChaCha8Rng) -> MassFunction {
    let raw: [f64; 4] = std::array::from_fn(|i| rng.random::<f64>() + if i == 3 { 0.01 } else { 0.0 });
    let t: f64 = raw.iter().sum();
    MassFunction {
        empty: raw[0] / t,
        pos: raw[1] / t,
        neg: raw[2] / t,
        omega: raw[3] / t,
    }
}

fn mass_gap(a: &MassFunction, b: &MassFunction) -> f64 {
    a.as_array()
        .iter()
        .zip(b.as_array())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn belief_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_rule = 0.0f64;
    let mut worst_trip = 0.0f64;
    for _ in 0..1000 {
        let (a, b, c) = (random_mass(&mut rng), random_mass(&mut rng), random_mass(&mut rng));
        worst_rule = worst_rule.max(mass_gap(&dempster_pair(&a, &b), &dempster_pair(&b, &a)));
        worst_rule = worst_rule.max(mass_gap(
            &dempster_pair(&dempster_pair(&a, &b), &c),
            &dempster_pair(&a, &dempster_pair(&b, &c)),
        ));
        let caut = |x: &MassFunction, y: &MassFunction| combine_masses(Rule::Cautious, &[*x, *y]);
        let (ab, ba) = (
            caut(&a, &b).map_err(|e| e.to_string())?,
            caut(&b, &a).map_err(|e| e.to_string())?,
        );
        worst_rule = worst_rule.max(mass_gap(&ab, &ba));
        let left = caut(&ab, &c).map_err(|e| e.to_string())?;
        let right = caut(&a, &caut(&b, &c).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst_rule = worst_rule.max(mass_gap(&left, &right));
        worst_rule = worst_rule.max(mass_gap(&caut(&a, &a).map_err(|e| e.to_string())?, &a));

        let (wp, wn) = (rng.random_range(0.01..=1.0), rng.random_range(0.01..=1.0));
        let we = rng.random_range(0.01..=1.0) / (wp + wn - wp * wn);
        let w = WeightFunction::new(wp, wn, we).map_err(|e| e.to_string())?;
        let back = weights_of(&mass_of(&w).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst_trip = worst_trip
            .max((back.pos - w.pos).abs())
            .max((back.neg - w.neg).abs())
            .max((back.empty - w.empty).abs());
    }
    check(
        worst_rule <= 1e-12 && worst_trip <= 1e-9,
        format!("max rule gap = {worst_rule:.2e}, max weight round-trip gap = {worst_trip:.2e}"),
    )
}

fn auc_pairs(scores: &[f64], labels: &[Class]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (sp, _) in scores.iter().zip(labels).filter(|(_, l)| l.is_pos()) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, l)| !l.is_pos()) {
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    let mut with_ties = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=n as u32);
        let mut labels: Vec<Class> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Class::Pos } else { Class::Neg })
            .collect();
        labels[0] = Class::Pos;
        labels[1] = Class::Neg;
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels))
            .collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        if auc(&scores, &labels).map_err(|e| e.to_string())? != auc_pairs(&scores, &labels) {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("1000 instances ({with_ties} with ties), {mismatches} mismatches"),
    )
}

fn figure1_trend() -> Outcome {
    let cfg = SimConfig::default();
    let prob = simulate_scorer(&cfg, Scorer::Prob).map_err(|e| e.to_string())?;
    let lap = simulate_scorer(&cfg, Scorer::Laplace).map_err(|e| e.to_string())?;
    let last = &prob.steps[99];
    let mean_ok = (last.mean - 0.25).abs() <= 3.0 * last.std_err;
    let diff_violations = prob
        .steps
        .iter()
        .zip(&lap.steps)
        .filter(|(p, l)| (p.mean - l.mean).abs() > 1.0 / (p.step as f64 + 2.0) + 1e-15)
        .count();
    let q10 = cfg.quantiles.iter().position(|q| *q == 0.10).ok_or("no q10")?;
    let q90 = cfg.quantiles.iter().position(|q| *q == 0.90).ok_or("no q90")?;
    let band = |t: &rdt_core::sim::Trajectory| t.steps[0].quantiles[q90] - t.steps[0].quantiles[q10];
    let (bp, bl) = (band(&prob), band(&lap));
    check(
        mean_ok && diff_violations == 0 && bl < bp,
        format!(
            "prob mean@100 = {:.4} (se {:.4}), |lap - prob| violations = {diff_violations}, band@1 laplace {bl:.3} < prob {bp:.3}",
            last.mean, last.std_err
        ),
    )
}

fn eva_trend() -> Outcome {
    let t = simulate_combiner(&SimConfig::default(), Method::Eva).map_err(|e| e.to_string())?;
    let mean_abs = |step: usize| t.trials.iter().map(|tr| tr[step - 1].abs()).sum::<f64>() / t.trials.len() as f64;
    let (a4, a32) = (mean_abs(4), mean_abs(32));
    check(a32 < a4, format!("mean |score| at 4 = {a4:.4}, at 32 = {a32:.4}"))
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn is_midrank_permutation(ranks: &[f64]) -> bool {
    let m = ranks.len();
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        // positions i..=j (1-based i+1..=j+1) share their average
        if sorted[i] != (i + j + 2) as f64 / 2.0 {
            return false;
        }
        i = j + 1;
    }
    let total: f64 = ranks.iter().sum();
    (total - (m * (m + 1)) as f64 / 2.0).abs() < 1e-9
}

fn end_to_end() -> Outcome {
    let dir = data_dir();
    let datasets = ["tic-tac-toe.csv", "breast-cancer.csv"]
        .iter()
        .map(|f| load_csv(dir.join(f), &CsvOptions::default()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let config = ExperimentConfig::default();
    let start = Instant::now();
    let first = run_experiment(&datasets, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let second = run_experiment(&datasets, &config).map_err(|e| e.to_string())?;
    let deterministic = first.results == second.results;

    let expected_rows = config.methods.len() * config.leaf_sizes.len() * 2 * config.repetitions;
    let counts: Vec<usize> = datasets
        .iter()
        .map(|d| first.results.iter().filter(|r| r.dataset == d.name()).count())
        .collect();
    let complete = first.skipped.is_empty() && counts.iter().all(|c| *c == expected_rows);

    let mut buf = Vec::new();
    write_results_csv(&first.results, &mut buf).map_err(|e| e.to_string())?;
    let reread = read_results_csv(buf.as_slice()).map_err(|e| e.to_string())?;
    let round_trip = reread == first.results;

    let mut ranks_ok = true;
    for metric in [Metric::Auc, Metric::Accuracy] {
        let table = rank_table(&reread, metric).map_err(|e| e.to_string())?;
        ranks_ok &= table.cells == expected_rows / 10 && table.per_dataset.values().all(|r| is_midrank_permutation(r));
    }
    check(
        deterministic && complete && round_trip && ranks_ok && elapsed < Duration::from_secs(300),
        format!(
            "rows per dataset {counts:?} (expected {expected_rows}), deterministic = {deterministic}, csv round-trip = {round_trip}, ranks valid = {ranks_ok}, one run took {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("dempster scenario: m(empty) 0.9408, score -0.02", dempster_scenario),
        (
            "cautious scenario: 0.784 / -0.180, within 0.03 of 0.78 / 0.20",
            cautious_scenario,
        ),
        ("tie scenario: dempster > 0, cautious = 0", tie_scenario),
        ("prob-avg worked example = 0.1", prob_avg_example),
        ("sign agreement n <= 64 and grid oracle within 1e-4", sign_sweep),
        ("belief algebra on 1000 random triples", belief_algebra),
        ("rank AUC equals pair-counting AUC", auc_oracle),
        ("single-leaf simulation trends", figure1_trend),
        ("evidence accumulation |score| shrinks with leaf size", eva_trend),
        ("end-to-end 9 x 6 x 5x2 grid on two datasets", end_to_end),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

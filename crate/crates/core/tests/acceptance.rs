//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use duplexnet::backtest::{
    churn_diagnostics, feature_store, run_cell, run_on_features, BacktestConfig, Sweep,
};
use duplexnet::correlate::{kendall, to_distance, MatrixKind, TauVariant, WindowedMatrix};
use duplexnet::evaluate::{auc, ScoredPair, ScoredPairs, Split};
use duplexnet::model::{
    build_training_set, fit, is_significant, likelihood_ratio, loglik, loglik_gradient, standard_errors,
    ModelSpec, ModelVariant, RowFilter, TrainingSet,
};
use duplexnet::multiplex::{clustering_coefficient, multiplex_triadic_closure, triadic_closure, DuplexSnapshot, PairFeatures};
use duplexnet::netbuild::{pair_count, EdgeBudget, Layer, LayerGraph};
use duplexnet::synth::{generate_graph_dynamics, iid_churn_expectation, SocialMode, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut mismatched = 0;
    for case in 0..200 {
        let len = rng.random_range(5..=126);
        let ties = case % 2 == 1;
        let x = random_series(len, ties, &mut rng);
        let y = random_series(len, ties, &mut rng);
        for (variant, tau_b) in [(TauVariant::B, true), (TauVariant::A, false)] {
            match (kendall(&x, &y, variant), kendall_brute(&x, &y, tau_b)) {
                (Ok(fast), Some(slow)) => {
                    worst = worst.max((fast - slow).abs());
                    compared += 1;
                }
                (Err(_), None) => {}
                _ => mismatched += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-12 && mismatched == 0 && elapsed < Duration::from_secs(5),
        format!("{compared} comparisons, max |diff| = {worst:.1e}, {mismatched} mismatched errors, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Verdict {
    let mut got = Vec::new();
    for rho in [-1.0, 0.0, 1.0] {
        let c = WindowedMatrix::from_rows(W0, MatrixKind::Correlation, &[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        got.push(to_distance(&c).unwrap().get(0, 1));
    }
    let want = [2.0, std::f64::consts::SQRT_2, 0.0];
    verdict(got == want, format!("d(-1, 0, 1) = {got:?}"))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checks = 0usize;
    let mut failures = 0usize;
    for _ in 0..500 {
        let n = rng.random_range(2..=30);
        let fin = random_graph(n, rng.random_range(0.0..0.8), Layer::Financial, &mut rng);
        let soc = random_graph(n, rng.random_range(0.0..0.8), Layer::Social, &mut rng);
        let union = union_brute(&fin, &soc);
        let duplex = DuplexSnapshot::new(fin.clone(), soc).unwrap();
        for i in 0..n {
            checks += 1;
            failures += usize::from(clustering_coefficient(&fin, i) != clustering_brute(&fin, i));
        }
        for u in 0..n {
            for v in u + 1..n {
                checks += 2;
                failures += usize::from(triadic_closure(&fin, u, v) != triadic_brute(&fin, u, v));
                failures += usize::from(multiplex_triadic_closure(&duplex, u, v) != triadic_brute(&union, u, v));
            }
        }
    }
    verdict(failures == 0, format!("{checks} exact comparisons on 500 graphs, {failures} differ"))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let len = rng.random_range(2..=300);
        let mut rows: Vec<(f64, bool)> = (0..len)
            .map(|_| {
                let score = if case % 3 == 0 { f64::from(rng.random_range(0..4u8)) } else { rng.random() };
                (score, rng.random_bool(0.4))
            })
            .collect();
        rows[0].1 = true;
        rows[1].1 = false;
        let scored = ScoredPairs {
            split: Split::FullGraph,
            rows: rows
                .iter()
                .map(|&(score, label)| ScoredPair { u: 0, v: 1, score, label })
                .collect(),
        };
        worst = worst.max((auc(&scored).unwrap() - auc_brute(&rows).unwrap()).abs());
    }
    let ties = ScoredPairs {
        split: Split::FullGraph,
        rows: (0..10)
            .map(|k| ScoredPair { u: 0, v: 1, score: 0.3, label: k % 3 == 0 })
            .collect(),
    };
    let all_ties = auc(&ties).unwrap();
    verdict(
        worst <= 1e-12 && all_ties == 0.5,
        format!("200 sets, max |diff| = {worst:.1e}, all-ties AUC = {all_ties}"),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let truth = [-1.0, 1.5, 1.2, 0.6, 0.8, -0.7, 0.4];
    let spec = ModelSpec::new(ModelVariant::Full, 1, Layer::Financial);
    let rows: Vec<(PairFeatures, bool)> = (0..100_000)
        .map(|k| {
            let e_fin = rng.random_bool(0.3);
            let e_soc = rng.random_bool(0.3);
            let f = PairFeatures {
                u: k,
                v: k + 1,
                e_fin,
                e_soc,
                e_any: e_fin || e_soc,
                t_fin: rng.random(),
                t_soc: rng.random(),
                t_multi: rng.random(),
            };
            let mut x = [0.0; 7];
            spec.design(&f, &mut x);
            let eta: f64 = x.iter().zip(truth).map(|(a, b)| a * b).sum();
            let label = rng.random_bool(1.0 / (1.0 + (-eta).exp()));
            (f, label)
        })
        .collect();
    let data = TrainingSet::from_rows(rows, 1, Layer::Financial);
    let m = data.len() as f64;

    let zero_ll = loglik(&spec, &[0.0; 7], &data).unwrap();
    let zero_exact = zero_ll == -m * std::f64::consts::LN_2;

    let beta = [0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.05];
    let grad = loglik_gradient(&spec, &beta, &data).unwrap();
    let mut worst_rel = 0.0f64;
    for k in 0..7 {
        let h = 1e-5;
        let mut up = beta;
        let mut down = beta;
        up[k] += h;
        down[k] -= h;
        let fd = (loglik(&spec, &up, &data).unwrap() - loglik(&spec, &down, &data).unwrap()) / (2.0 * h);
        worst_rel = worst_rel.max((fd - grad[k]).abs() / grad[k].abs());
    }

    let fitted = fit(&spec, &data).unwrap();
    let se = standard_errors(&fitted, &data).unwrap();
    let z: Vec<f64> = fitted
        .coefficients
        .iter()
        .zip(truth)
        .zip(&se)
        .map(|((b, t), s)| (b - t) / s)
        .collect();
    let within = z.iter().all(|z| z.abs() <= 3.0);
    verdict(
        zero_exact && worst_rel <= 1e-6 && within && fitted.converged,
        format!(
            "zero-coefficient ll exact: {zero_exact}; max FD relative error {worst_rel:.1e}; z vs truth {:?}",
            z.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

/// Likelihood ratio of one training cell ending at the last window.
fn training_lambda(spec: &SynthSpec, h: usize) -> f64 {
    let snaps = generate_graph_dynamics(spec).unwrap();
    lambda_at(&feature_store(&snaps), h)
}

fn lambda_at(features: &[Vec<PairFeatures>], h: usize) -> f64 {
    let cfg = BacktestConfig::default();
    let t = features.len() - 1;
    let sweep = Sweep {
        train_start: 0,
        first_prediction: t,
        last: t,
    };
    let span = cfg.training_span(&sweep, t, h).unwrap();
    let data = build_training_set(features, Layer::Financial, h, span, RowFilter::All).unwrap();
    let r = fit(&ModelSpec::new(ModelVariant::Restricted, h, Layer::Financial), &data).unwrap();
    let f = fit(&ModelSpec::new(ModelVariant::Full, h, Layer::Financial), &data).unwrap();
    assert!(r.converged && f.converged);
    likelihood_ratio(&f, &r).unwrap().lambda
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let base = SynthSpec {
        n: 50,
        n_windows: 40,
        ..SynthSpec::default()
    };
    let null_hits = (1..=500u64)
        .filter(|&seed| {
            let spec = SynthSpec {
                seed,
                social_mode: SocialMode::Independent,
                ..base.clone()
            };
            is_significant(training_lambda(&spec, 1 + (seed as usize % 5)))
        })
        .count();
    let null_rate = null_hits as f64 / 500.0;

    let mut by_lag = vec![Vec::new(); 5];
    for seed in 1..=100u64 {
        let spec = SynthSpec {
            seed,
            social_lead: 5,
            social_mode: SocialMode::Lead,
            ..base.clone()
        };
        let features = feature_store(&generate_graph_dynamics(&spec).unwrap());
        for h in 1..=5 {
            by_lag[h - 1].push(lambda_at(&features, h));
        }
    }
    let share = |v: &[f64]| v.iter().filter(|&&l| is_significant(l)).count() as f64 / v.len() as f64;
    let all: Vec<f64> = by_lag.concat();
    let lead_rate = share(&all);
    let lead5_rate = share(&by_lag[4]);
    let means: Vec<f64> = by_lag.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let growing = means.windows(2).all(|w| w[1] > w[0]);
    let elapsed = start.elapsed();
    verdict(
        null_rate <= 0.02 && lead_rate >= 0.95 && lead5_rate >= 0.95 && growing && elapsed < Duration::from_secs(600),
        format!(
            "null: {null_hits}/500 significant; lead 5: {:.1}% of 500 cells significant ({:.1}% at h=5); mean lambda h=1..5 {:?}; {elapsed:.1?}",
            100.0 * lead_rate,
            100.0 * lead5_rate,
            means.iter().map(|m| m.round()).collect::<Vec<_>>()
        ),
    )
}

fn criterion_7() -> Verdict {
    let spec = SynthSpec {
        n: 100,
        n_windows: 250,
        persistence: 0.9,
        closure_strength: 4.0,
        ..SynthSpec::default()
    };
    let snaps = generate_graph_dynamics(&spec).unwrap();
    let features = feature_store(&snaps);
    let ends: Vec<usize> = snaps.iter().map(|s| s.window().end).collect();
    let cfg = BacktestConfig {
        lags: (1..=20).collect(),
        split_models: false,
        ..BacktestConfig::default()
    };
    let report = run_on_features(&cfg, &features, &ends, None).unwrap();
    let full: Vec<_> = report.aggregates.iter().filter(|a| a.split == Split::FullGraph).collect();
    let auc: Vec<(f64, f64)> = full.iter().map(|a| a.auc.map(|s| (s.mean, s.se)).unwrap()).collect();
    let star: Vec<(f64, f64)> = full.iter().map(|a| a.auc_star.map(|s| (s.mean, s.se)).unwrap()).collect();
    let tol = |a: (f64, f64), b: (f64, f64)| 2.0 * (a.1 * a.1 + b.1 * b.1).sqrt();
    let auc_down = auc.windows(2).all(|w| w[1].0 <= w[0].0 + tol(w[0], w[1]));
    let star_up = star.windows(2).all(|w| w[1].0 >= w[0].0 - tol(w[0], w[1]));
    let first = auc[0].0;
    verdict(
        auc_down && star_up && first >= 0.9 && report.failures.is_empty() && full.len() == 20,
        format!(
            "AUC h=1 {first:.4}, h=20 {:.4}; AUC* h=1 {:.4}, h=20 {:.4}; AUC non-increasing: {auc_down}; AUC* non-decreasing: {star_up}; {} failed cells",
            auc[19].0,
            star[0].0,
            star[19].0,
            report.failures.len()
        ),
    )
}

fn criterion_8() -> Verdict {
    let iid = SynthSpec {
        persistence: 0.0,
        closure_strength: 0.0,
        ..SynthSpec::default()
    };
    let graphs: Vec<LayerGraph> = generate_graph_dynamics(&iid).unwrap().into_iter().map(|s| s.financial).collect();
    let k = EdgeBudget::Quartile.edges_for(iid.n).unwrap();
    let expected = iid_churn_expectation(iid.n, k);
    let rows = churn_diagnostics(&graphs, 20).unwrap();
    let worst_z = rows
        .iter()
        .map(|r| (r.new_edge_fraction.mean - expected).abs() / r.new_edge_fraction.se)
        .fold(0.0, f64::max);

    let noisy = generate_graph_dynamics(&SynthSpec::default()).unwrap();
    let fin: Vec<LayerGraph> = noisy.iter().map(|s| s.financial.clone()).collect();
    let soc: Vec<LayerGraph> = noisy.iter().map(|s| s.social.clone()).collect();
    let f = churn_diagnostics(&fin, 20).unwrap();
    let s = churn_diagnostics(&soc, 20).unwrap();
    let ordered = f.iter().zip(&s).all(|(a, b)| b.new_edge_fraction.mean > a.new_edge_fraction.mean);
    verdict(
        worst_z <= 2.0 && ordered,
        format!(
            "iid: 1 - K/P = {expected:.5} (K = {k}, P = {}), worst |z| over h=1..20 {worst_z:.2}; social churn above financial at every h: {ordered} (h=1: {:.3} vs {:.3})",
            pair_count(iid.n),
            s[0].new_edge_fraction.mean,
            f[0].new_edge_fraction.mean
        ),
    )
}

fn criterion_9() -> Verdict {
    let spec = SynthSpec {
        n: 30,
        n_windows: 70,
        social_lead: 2,
        ..SynthSpec::default()
    };
    let clean = feature_store(&generate_graph_dynamics(&spec).unwrap());
    let noise = feature_store(
        &generate_graph_dynamics(&SynthSpec {
            seed: 99,
            social_mode: SocialMode::Independent,
            persistence: 0.0,
            ..spec.clone()
        })
        .unwrap(),
    );
    let t = 45;
    let mut poisoned = clean.clone();
    poisoned[t + 1..].clone_from_slice(&noise[t + 1..]);
    let cfg = BacktestConfig::default();
    let sweep = Sweep {
        train_start: 0,
        first_prediction: t,
        last: clean.len() - 1,
    };
    let mut identical = true;
    let mut labels_moved = 0;
    for h in 1..=10 {
        let a = run_cell(&clean, &cfg, &sweep, t, h).unwrap();
        let b = run_cell(&poisoned, &cfg, &sweep, t, h).unwrap();
        identical &= a.fits == b.fits;
        for (x, y) in a.splits.iter().zip(&b.splits) {
            let bits = |v: &[f64]| v.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
            // deletions are scored over the same pairs; only labels may move
            identical &= bits(&x.scores) == bits(&y.scores) && x.lambda.map(f64::to_bits) == y.lambda.map(f64::to_bits);
            labels_moved += usize::from(x.labels != y.labels);
        }
    }
    verdict(
        identical && labels_moved > 0,
        format!("t = {t}, h = 1..10: fits, scores and lambda bit-identical: {identical}; {labels_moved} splits with changed labels"),
    )
}

fn run_cli(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_duplexnet")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let start = Instant::now();
    let (ok_synth, err_synth) = run_cli(&[
        "synth", "--mode", "timeseries", "--n", "100", "--windows", "250", "--seed", "7", "--out", &p("data"), "--quiet",
    ]);
    let (ok_run, err_run) = run_cli(&[
        "backtest",
        "--prices",
        &p("data/prices.csv"),
        "--opinions",
        &p("data/opinions.csv"),
        "--tickers",
        &p("data/tickers.txt"),
        "--lags",
        "1,5,10,15,20",
        "--out",
        &p("run1"),
        "--quiet",
    ]);
    let first = start.elapsed();
    let (ok_rerun, err_rerun) = run_cli(&["backtest", "--config", &p("run1/config.txt"), "--out", &p("run2")]);
    let files = ["report.csv", "report.json", "churn.csv", "jaccard.csv"];
    let same = files.iter().all(|f| {
        let a = std::fs::read(Path::new(&p("run1")).join(f));
        let b = std::fs::read(Path::new(&p("run2")).join(f));
        matches!((a, b), (Ok(a), Ok(b)) if a == b)
    });
    let rows = std::fs::read_to_string(Path::new(&p("run1")).join("report.csv"))
        .map(|s| s.lines().count() - 1)
        .unwrap_or(0);
    for e in [err_synth, err_run, err_rerun] {
        if !e.is_empty() {
            eprintln!("{e}");
        }
    }
    verdict(
        ok_synth && ok_run && ok_rerun && same && rows > 0 && first < Duration::from_secs(900),
        format!("synth + backtest {first:.1?}, {rows} report rows, rerun byte-identical: {same}"),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("1 kendall oracle", criterion_1),
        ("2 distance endpoints", criterion_2),
        ("3 clustering and closure oracles", criterion_3),
        ("4 auc oracle", criterion_4),
        ("5 logistic correctness", criterion_5),
        ("6 lambda calibration", criterion_6),
        ("7 auc shape over lags", criterion_7),
        ("8 churn diagnostics", criterion_8),
        ("9 anti-leakage canary", criterion_9),
        ("10 end-to-end cli", criterion_10),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = check();
        println!("criterion {name}: {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

//! Exit criteria. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use gopenmax::activations::{ActivationRecord, DistanceMetric, Split};
use gopenmax::calibrator::{
    recalibrate, CalibrationConfig, ClassModel, Decision, FittedCalibrator, Mode, WeightFormula,
};
use gopenmax::cli::{load_folds, RunConfig};
use gopenmax::evaluation::{openness, sweep, Method, SweepGrid, ThresholdPolicy};
use gopenmax::evt::{fit_weibull_tail, weibull_cdf, WeibullModel};
use gopenmax::mixture::{sample_mixture, select_unknown_candidates, DEFAULT_SIGMA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("weibull_fit_recovery", weibull_fit_recovery),
        ("cdf_closed_form_and_monotone", cdf_closed_form_and_monotone),
        ("recalibration_oracle_equivalence", recalibration_oracle_equivalence),
        ("openness_values", openness_values),
        ("selection_matches_filter", selection_matches_filter),
        ("mixture_simplex", mixture_simplex),
        ("fixture_end_to_end", fixture_end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({ms:.0} ms)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({ms:.0} ms)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn weibull_fit_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dist = Weibull::new(1.0, 2.0).unwrap();
    let xs: Vec<f64> = (0..1000).map(|_| dist.sample(&mut rng)).collect();
    let start = Instant::now();
    let m = fit_weibull_tail(&xs, 1000).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!("lambda={:.4} k={:.4} fit={:?}", m.scale(), m.shape(), elapsed);
    ensure(
        (0.95..=1.05).contains(&m.scale()) && (1.9..=2.1).contains(&m.shape()) && elapsed < Duration::from_secs(1),
        || detail.clone(),
    )?;
    Ok(detail)
}

fn cdf_closed_form_and_monotone() -> Outcome {
    let m = WeibullModel::new(0.0, 1.0, 1.0, 1, 1).unwrap();
    let expected = 1.0 - (-1.0f64).exp();
    let got = weibull_cdf(&m, 1.0);
    ensure((got - expected).abs() <= 1e-12, || {
        format!("cdf(1) = {got}, expected {expected}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for model in 0..1000 {
        let t = rng.random_range(-5.0..5.0);
        let lambda = rng.random_range(0.01..20.0);
        let k = rng.random_range(0.05..15.0);
        let m = WeibullModel::new(t, lambda, k, 10, 10).unwrap();
        let mut xs: Vec<f64> = (0..100).map(|_| rng.random_range(t - 5.0..t + 4.0 * lambda)).collect();
        xs.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for &x in &xs {
            let c = weibull_cdf(&m, x);
            ensure((0.0..=1.0).contains(&c), || {
                format!("model {model}: cdf({x}) = {c} outside [0, 1]")
            })?;
            ensure(c >= prev, || format!("model {model}: cdf decreased at x = {x}"))?;
            ensure(x > t || c == 0.0, || {
                format!("model {model}: cdf({x}) = {c} below translation")
            })?;
            prev = c;
        }
    }
    Ok(format!(
        "cdf(1) error {:.1e}; 1000 models x 100 points monotone",
        (got - expected).abs()
    ))
}

/// Straight transcription of the recalibration procedure, independent of the
/// library's helpers.
#[allow(clippy::too_many_arguments)]
fn reference(
    av: &[f64],
    mavs: &[Vec<f64>],
    params: &[(f64, f64, f64)],
    alpha: usize,
    metric: DistanceMetric,
    formula: WeightFormula,
    mode: Mode,
    epsilon: f64,
) -> (Vec<f64>, Vec<f64>, Decision) {
    let n = av.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| av[j].partial_cmp(&av[i]).unwrap().then(i.cmp(&j)));

    let mut w = vec![1.0; n];
    for c in 1..=alpha.min(n) {
        let s = order[c - 1];
        let (mav, (t, lambda, k)) = (&mavs[s], params[s]);
        let eu = av.iter().zip(mav).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dot: f64 = av.iter().zip(mav).map(|(a, b)| a * b).sum();
        let na = av.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb = mav.iter().map(|b| b * b).sum::<f64>().sqrt();
        let cos = (1.0 - dot / (na * nb)).max(0.0);
        let d = match metric {
            DistanceMetric::Euclidean => eu,
            DistanceMetric::Cosine => cos,
            DistanceMetric::Eucos => eu / n as f64 + cos,
        };
        let cdf = if d <= t {
            0.0
        } else {
            1.0 - (-((d - t) / lambda).powf(k)).exp()
        };
        let a = alpha as f64;
        let c = c as f64;
        w[s] = match formula {
            WeightFormula::AsWritten => 1.0 - ((a - c) / a) * (1.0 - cdf),
            WeightFormula::CdfDamping => 1.0 - ((a - c + 1.0) / a) * cdf,
        };
    }

    let mut revised: Vec<f64> = (0..n).map(|i| av[i] * w[i]).collect();
    if mode == Mode::OpenMax {
        let v0: f64 = (0..n).map(|i| av[i] * (1.0 - w[i])).sum();
        revised.push(v0);
    }
    let max = revised.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = revised.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    let p: Vec<f64> = e.iter().map(|x| x / z).collect();

    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    let decision = if p[best] < epsilon || best == p.len() - 1 {
        Decision::Unknown
    } else {
        Decision::Class(best)
    };
    (revised, p, decision)
}

fn recalibration_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2017);
    let metrics = [DistanceMetric::Euclidean, DistanceMetric::Cosine, DistanceMetric::Eucos];
    let mut worst: f64 = 0.0;
    let mut combos = BTreeSet::new();
    for instance in 0..1000 {
        let formula = if instance % 2 == 0 {
            WeightFormula::CdfDamping
        } else {
            WeightFormula::AsWritten
        };
        let mode = if (instance / 2) % 2 == 0 {
            Mode::GOpenMax
        } else {
            Mode::OpenMax
        };
        combos.insert((formula == WeightFormula::CdfDamping, mode == Mode::OpenMax));
        let metric = metrics[rng.random_range(0..3)];
        let n = rng.random_range(2..=12);
        let alpha = rng.random_range(0..=n);
        let epsilon = rng.random_range(0.0..1.0);
        let mavs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-3.0..8.0)).collect())
            .collect();
        let params: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                (
                    rng.random_range(0.0..2.0),
                    rng.random_range(0.2..10.0),
                    rng.random_range(0.3..8.0),
                )
            })
            .collect();
        let av: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..12.0)).collect();

        let config = CalibrationConfig {
            alpha,
            epsilon,
            tail_size: 20,
            metric,
            weight_formula: formula,
            mode,
            correct_only: true,
        };
        let classes = (0..n)
            .map(|i| ClassModel {
                class_id: i,
                mav: mavs[i].clone(),
                weibull: WeibullModel::new(params[i].0, params[i].1, params[i].2, 20, 20).unwrap(),
            })
            .collect();
        let calib = FittedCalibrator::from_parts(config, classes).map_err(|e| e.to_string())?;
        let out = recalibrate(&av, &calib).map_err(|e| e.to_string())?;
        let (revised, probs, decision) = reference(&av, &mavs, &params, alpha, metric, formula, mode, epsilon);

        ensure(out.probabilities.len() == probs.len(), || {
            format!("instance {instance}: output length")
        })?;
        for (a, b) in out
            .probabilities
            .iter()
            .zip(&probs)
            .chain(out.revised_activations.iter().zip(&revised))
        {
            worst = worst.max((a - b).abs());
        }
        ensure(worst <= 1e-9, || format!("instance {instance}: deviation {worst:.3e}"))?;
        ensure(out.decision == decision, || {
            format!("instance {instance}: decision {} vs {decision}", out.decision)
        })?;
    }
    ensure(combos.len() == 4, || "not every formula/mode pair exercised".into())?;
    Ok(format!("1000 instances, max deviation {worst:.2e}"))
}

fn openness_values() -> Outcome {
    let o = openness(6, 10, 10).map_err(|e| e.to_string())?;
    ensure((o - 0.2254).abs() <= 1e-4, || format!("openness(6,10,10) = {o}"))?;
    for (n_train, n_test, n_r) in [(6, 6, 6), (5, 3, 7), (10, 12, 8), (60, 100, 20), (1, 1, 1)] {
        let z = openness(n_train, n_test, n_r).map_err(|e| e.to_string())?;
        ensure(z == 0.0, || {
            format!("openness({n_train},{n_test},{n_r}) = {z}, expected exactly 0")
        })?;
    }
    Ok(format!("openness(6,10,10) = {o:.6}; balanced triples give 0"))
}

fn selection_matches_filter() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let records: Vec<ActivationRecord> = (0..10_000)
        .map(|i| {
            let label = rng.random_range(0..6i64);
            let predicted = if rng.random_bool(0.7) {
                label
            } else {
                rng.random_range(0..7i64)
            };
            ActivationRecord {
                id: format!("gen-{i}"),
                split: Split::Generated,
                true_label: label,
                predicted_label: Some(predicted),
                av: vec![0.0; 6],
                source_class: None,
            }
        })
        .collect();
    let start = Instant::now();
    let selection = select_unknown_candidates(&records).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let mut brute = BTreeSet::new();
    for r in &records {
        if r.predicted_label.unwrap() != r.true_label {
            brute.insert(r.id.clone());
        }
    }
    let got: BTreeSet<String> = selection.selected_ids.iter().cloned().collect();
    ensure(got.len() == selection.selected_ids.len(), || {
        "duplicate ids selected".into()
    })?;
    ensure(got == brute, || {
        format!("{} selected vs {} expected", got.len(), brute.len())
    })?;
    ensure(elapsed < Duration::from_millis(100), || format!("took {elapsed:?}"))?;
    Ok(format!("{} of 10000 selected in {elapsed:?}", got.len()))
}

fn mixture_simplex() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..1_000_000u64 {
        let n = 1 + (seed % 50) as usize;
        let m = sample_mixture(n, seed, DEFAULT_SIGMA).map_err(|e| e.to_string())?;
        let err = (m.m.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("seed {seed}: sum deviates by {err:.3e}"))?;
    }
    Ok(format!("1e6 draws, worst deviation {worst:.2e}"))
}

fn fixture_end_to_end() -> Outcome {
    let start = Instant::now();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic/config.json");
    let cfg = RunConfig::load(&path).map_err(|e| e.to_string())?;
    let protocol = cfg.protocol.clone().ok_or("fixture config has no protocol")?;
    let folds = load_folds(&cfg).map_err(|e| e.to_string())?;
    let grid = SweepGrid {
        methods: vec![Method::SoftMax, Method::GOpenMax],
        alphas: vec![cfg.calibration.alpha],
        tail_sizes: vec![cfg.calibration.tail_size],
        unknown_counts: Some(vec![protocol.unknown_test_classes.len()]),
        threshold: ThresholdPolicy::ValidationOptimal,
        ..SweepGrid::default()
    };
    let first = sweep(&folds, &protocol, &grid, 0).map_err(|e| e.to_string())?;
    let second = sweep(&folds, &protocol, &grid, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(first == second, || "reports differ between runs".into())?;

    let f = |method: Method| -> Result<f64, String> {
        let r = first
            .iter()
            .find(|r| r.method == method)
            .ok_or_else(|| format!("no {method} report"))?;
        if let Some(e) = &r.error {
            return Err(format!("{method}: {e}"));
        }
        Ok(r.mean.as_ref().map(|m| m.f_measure).unwrap_or(f64::NAN))
    };
    let (g, s) = (f(Method::GOpenMax)?, f(Method::SoftMax)?);
    let detail = format!("gopenmax F = {g:.4}, softmax F = {s:.4}, {elapsed:?}");
    ensure(g > s && elapsed < Duration::from_secs(5), || detail.clone())?;
    Ok(detail)
}

//! Writes the synthetic three-fold fixture under `tests/fixtures/synthetic`.
//!
//! Six known classes are Gaussian clusters around `6 * e_c`. Four held-out
//! unknown classes sit either far out along one known axis (confident but
//! wrong under plain softmax) or between two known axes. The K+1 dump adds a
//! seventh logit that is high for generated training samples and for the
//! between-class unknowns.
//!
//! Usage: `cargo run -p gopenmax --example make_fixture [out_dir]`

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use gopenmax::activations::{write_dump, ActivationRecord, Split};
use gopenmax::mixture::mixture_batch;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const K: usize = 6;
const PER_CLASS: usize = 100;
const PER_UNKNOWN: usize = 40;
const GENERATED: usize = 60;
const FOLDS: usize = 3;
const NOISE: f64 = 0.6;
const SEED: u64 = 20170403;

struct Sample {
    id: String,
    label: i64,
    source: Option<i64>,
    known: Vec<f64>,
    extra: f64,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn draw(rng: &mut ChaCha8Rng, centre: &[f64], extra_mean: f64) -> (Vec<f64>, f64) {
    let noise = Normal::new(0.0, NOISE).unwrap();
    let known = centre.iter().map(|c| round4(c + noise.sample(rng))).collect();
    (known, round4(extra_mean + noise.sample(rng)))
}

fn axis(pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; K];
    for &(i, x) in pairs {
        v[i] = x;
    }
    v
}

fn record(s: &Sample, split: Split, with_extra: bool) -> ActivationRecord {
    let mut av = s.known.clone();
    if with_extra {
        av.push(s.extra);
    }
    ActivationRecord {
        id: s.id.clone(),
        split,
        true_label: s.label,
        predicted_label: Some(argmax(&av) as i64),
        av,
        source_class: s.source,
    }
}

fn write(path: PathBuf, records: &[ActivationRecord]) {
    let file = BufWriter::new(File::create(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())));
    write_dump(file, records).unwrap();
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic"));
    fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut known: Vec<Vec<Sample>> = Vec::new();
    for c in 0..K {
        let centre = axis(&[(c, 6.0)]);
        let samples = (0..PER_CLASS)
            .map(|i| {
                let (known, extra) = draw(&mut rng, &centre, -1.0);
                Sample {
                    id: format!("k{c}-{i:03}"),
                    label: c as i64,
                    source: Some(c as i64),
                    known,
                    extra,
                }
            })
            .collect();
        known.push(samples);
    }

    // (source class, centre, mean of the extra logit)
    let unknown_specs = [
        (6, axis(&[(0, 9.0), (3, 1.5)]), 0.5),
        (7, axis(&[(1, 4.5), (4, 3.0)]), 4.0),
        (8, axis(&[(2, 9.5)]), 0.0),
        (9, axis(&[(3, 3.5), (5, 3.5)]), 4.0),
    ];
    let mut unknown: Vec<Vec<Sample>> = Vec::new();
    for (source, centre, extra_mean) in &unknown_specs {
        let samples = (0..PER_UNKNOWN)
            .map(|i| {
                let (known, extra) = draw(&mut rng, centre, *extra_mean);
                Sample {
                    id: format!("u{source}-{i:03}"),
                    label: -1,
                    source: Some(*source),
                    known,
                    extra,
                }
            })
            .collect();
        unknown.push(samples);
    }

    // Generated training samples of the extra class: mixtures of two known axes.
    let generated: Vec<Sample> = (0..GENERATED)
        .map(|i| {
            let a = i % K;
            let b = (i / K + a + 1) % K;
            let centre = axis(&[(a, 2.5), (b, 2.0)]);
            let (known, extra) = draw(&mut rng, &centre, 5.0);
            Sample {
                id: format!("g-{i:03}"),
                label: K as i64,
                source: None,
                known,
                extra,
            }
        })
        .collect();

    let n_train = PER_CLASS * 6 / 10;
    let n_val = PER_CLASS * 2 / 10;
    for fold in 0..FOLDS {
        let mut net = Vec::new();
        let mut net_g = Vec::new();
        for class in &known {
            let mut order: Vec<usize> = (0..class.len()).collect();
            order.shuffle(&mut rng);
            for (pos, &i) in order.iter().enumerate() {
                let split = if pos < n_train {
                    Split::Train
                } else if pos < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                };
                net.push(record(&class[i], split, false));
                net_g.push(record(&class[i], split, true));
            }
        }
        for class in &unknown {
            let mut order: Vec<usize> = (0..class.len()).collect();
            order.shuffle(&mut rng);
            for (pos, &i) in order.iter().enumerate() {
                let split = if pos < class.len() / 2 { Split::Val } else { Split::Test };
                net.push(record(&class[i], split, false));
                net_g.push(record(&class[i], split, true));
            }
        }
        for s in &generated {
            net_g.push(record(s, Split::Train, true));
        }
        let dir = out.join(format!("fold{fold}"));
        fs::create_dir_all(&dir).unwrap();
        write(dir.join("net.jsonl"), &net);
        write(dir.join("net_g.jsonl"), &net_g);
    }

    // Closed-set classifier outputs on generator samples conditioned on mixtures.
    let noise = Normal::new(0.0, NOISE).unwrap();
    let candidates: Vec<ActivationRecord> = mixture_batch(K, 200, 7, 0.2)
        .unwrap()
        .into_iter()
        .map(|line| {
            let av: Vec<f64> = line
                .m
                .iter()
                .map(|m| round4(6.0 * m + noise.sample(&mut rng)))
                .collect();
            ActivationRecord {
                id: line.id,
                split: Split::Generated,
                true_label: line.argmax as i64,
                predicted_label: Some(argmax(&av) as i64),
                av,
                source_class: None,
            }
        })
        .collect();
    write(out.join("generated.jsonl"), &candidates);

    let config = serde_json::json!({
        "paths": {
            "dump": "fold0/net_g.jsonl",
            "generated": "generated.jsonl"
        },
        "calibration": {
            "alpha": 2,
            "epsilon": 0.5,
            "tail_size": 20,
            "metric": "euclidean",
            "weight_formula": "cdf_damping",
            "mode": "gopenmax",
            "correct_only": true
        },
        "protocol": {
            "known_classes": [0, 1, 2, 3, 4, 5],
            "unknown_test_classes": [6, 7, 8, 9],
            "n_folds": FOLDS
        },
        "folds": (0..FOLDS)
            .map(|f| serde_json::json!({"net": format!("fold{f}/net.jsonl"), "net_g": format!("fold{f}/net_g.jsonl")}))
            .collect::<Vec<_>>(),
        "grid": {
            "methods": ["softmax", "gsoftmax", "openmax", "gopenmax"],
            "alphas": [2],
            "tail_sizes": [10, 20, 40],
            "threshold": "validation_optimal"
        },
        "mixture": {
            "n_classes": K,
            "sigma": 0.2,
            "seed": 7
        }
    });
    fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&config).unwrap() + "\n",
    )
    .unwrap();
    println!("wrote fixture to {}", out.display());
}

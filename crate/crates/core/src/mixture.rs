//! Class-mixture conditioning vectors and selection of generated samples
//! that the closed-set classifier gets wrong.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activations::ActivationRecord;
use crate::error::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.2;

pub const REASON_NET_AGREES: &str = "net_agrees";
pub const REASON_OVER_BUDGET: &str = "over_budget";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureVector {
    pub m: Vec<f64>,
    pub seed: u64,
}

/// The first `n - 1` components are drawn from `Normal(1/n, sigma)` and the
/// last one closes the sum to one. Components may be negative.
pub fn sample_mixture(n_classes: usize, seed: u64, sigma: f64) -> Result<MixtureVector> {
    if n_classes == 0 {
        return Err(Error::config("n_classes", "must be at least 1"));
    }
    let normal = Normal::new(1.0 / n_classes as f64, sigma)
        .ok()
        .filter(|_| sigma > 0.0)
        .ok_or_else(|| Error::config("sigma", format!("{sigma} must be finite and > 0")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m: Vec<f64> = (0..n_classes - 1).map(|_| normal.sample(&mut rng)).collect();
    let head: f64 = m.iter().sum();
    m.push(1.0 - head);
    Ok(MixtureVector { m, seed })
}

/// Index of the largest component; ties resolve to the lowest index.
pub fn mixture_argmax(mv: &MixtureVector) -> usize {
    let mut best = 0;
    for (i, &v) in mv.m.iter().enumerate().skip(1) {
        if v > mv.m[best] {
            best = i;
        }
    }
    best
}

/// One line of a mixture batch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureLine {
    pub id: String,
    pub seed: u64,
    pub m: Vec<f64>,
    pub argmax: usize,
}

/// `count` mixtures with seeds `base_seed, base_seed + 1, ...`.
pub fn mixture_batch(n_classes: usize, count: usize, base_seed: u64, sigma: f64) -> Result<Vec<MixtureLine>> {
    (0..count)
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let mv = sample_mixture(n_classes, seed, sigma)?;
            Ok(MixtureLine {
                id: format!("mix-{i:06}"),
                seed,
                argmax: mixture_argmax(&mv),
                m: mv.m,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSelection {
    pub selected_ids: Vec<String>,
    pub total_generated: usize,
    pub rejection_reasons: BTreeMap<String, String>,
}

/// Keeps the generated samples whose prediction disagrees with their
/// mixture-argmax label. Selected ids keep input order.
pub fn select_unknown_candidates(generated: &[ActivationRecord]) -> Result<CandidateSelection> {
    let mut selection = CandidateSelection {
        total_generated: generated.len(),
        ..Default::default()
    };
    for r in generated {
        let predicted = r
            .predicted_label
            .ok_or_else(|| Error::MissingPrediction(r.id.clone()))?;
        if predicted != r.true_label {
            selection.selected_ids.push(r.id.clone());
        } else {
            selection
                .rejection_reasons
                .insert(r.id.clone(), REASON_NET_AGREES.to_string());
        }
    }
    Ok(selection)
}

/// Truncates the selected set to `max` ids; the dropped ones are rejected as
/// over budget.
pub fn cap_selection(mut selection: CandidateSelection, max: usize) -> CandidateSelection {
    if selection.selected_ids.len() > max {
        for id in selection.selected_ids.drain(max..) {
            selection.rejection_reasons.insert(id, REASON_OVER_BUDGET.to_string());
        }
    }
    selection
}

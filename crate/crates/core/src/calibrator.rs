//! OpenMax and G-OpenMax recalibration of classifier activations.
//!
//! Fitting builds one Weibull tail model per activation position from the
//! distances of correctly classified training samples to their class MAV.
//! At inference the `alpha` top-ranked activations are damped by a weight
//! derived from the sample's distance to the MAV of the ranked class, and the
//! damped vector goes through a softmax.
//!
//! Both modes end with the unknown probability in the last position:
//! OpenMax appends a pseudo-activation `sum(av_i * (1 - w_i))`, while
//! G-OpenMax already carries an explicit unknown class as its last output.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{compute_class_stats, distance, dump_dimension, ActivationRecord, DistanceMetric};
use crate::error::{Error, Result};
use crate::evt::{fit_weibull_tail, WeibullModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFormula {
    /// `w = 1 - ((alpha - c) / alpha) * S(d)` with `S` the Weibull survival
    /// function; damps activations close to the MAV.
    AsWritten,
    /// `w = 1 - ((alpha - c + 1) / alpha) * F(d)`; damping grows with the
    /// distance from the MAV.
    #[default]
    CdfDamping,
}

impl std::str::FromStr for WeightFormula {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "as_written" | "as-written" => Ok(WeightFormula::AsWritten),
            "cdf_damping" | "cdf-damping" => Ok(WeightFormula::CdfDamping),
            other => Err(format!("unknown weight formula `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Known classes only; the unknown score is aggregated from damped mass.
    #[serde(rename = "openmax")]
    OpenMax,
    /// The last activation position is an explicit unknown class.
    #[default]
    #[serde(rename = "gopenmax")]
    GOpenMax,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OpenMax => "openmax",
            Mode::GOpenMax => "gopenmax",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "openmax" => Ok(Mode::OpenMax),
            "gopenmax" | "g-openmax" => Ok(Mode::GOpenMax),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Number of top-ranked activations to recalibrate. Zero disables
    /// recalibration.
    pub alpha: usize,
    /// Rejection threshold on the maximum probability.
    pub epsilon: f64,
    pub tail_size: usize,
    pub metric: DistanceMetric,
    pub weight_formula: WeightFormula,
    pub mode: Mode,
    /// Build MAVs from correctly classified training samples only.
    pub correct_only: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            alpha: 2,
            epsilon: 0.5,
            tail_size: 20,
            metric: DistanceMetric::Euclidean,
            weight_formula: WeightFormula::CdfDamping,
            mode: Mode::GOpenMax,
            correct_only: true,
        }
    }
}

impl CalibrationConfig {
    /// Checks ranges; `n_classes` is the activation dimension when known.
    pub fn validate(&self, n_classes: Option<usize>) -> Result<()> {
        if !(self.epsilon.is_finite() && (0.0..=1.0).contains(&self.epsilon)) {
            return Err(Error::config("epsilon", format!("{} outside [0, 1]", self.epsilon)));
        }
        if self.tail_size < 2 {
            return Err(Error::config("tail_size", format!("{} is below 2", self.tail_size)));
        }
        if let Some(n) = n_classes {
            if self.alpha > n {
                return Err(Error::config(
                    "alpha",
                    format!("{} exceeds the number of classes {n}", self.alpha),
                ));
            }
            if self.mode == Mode::GOpenMax && n < 2 {
                return Err(Error::config(
                    "mode",
                    "gopenmax needs at least one known class plus the unknown class",
                ));
            }
        }
        Ok(())
    }
}

/// Class-level decision: a known class index or a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i64", try_from = "i64")]
pub enum Decision {
    Class(usize),
    Unknown,
}

impl From<Decision> for i64 {
    fn from(d: Decision) -> i64 {
        match d {
            Decision::Class(c) => c as i64,
            Decision::Unknown => -1,
        }
    }
}

impl TryFrom<i64> for Decision {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Decision::Unknown),
            v if v >= 0 => Ok(Decision::Class(v as usize)),
            v => Err(format!("invalid label {v}")),
        }
    }
}

impl Decision {
    /// Maps a dump label (`-1` for unknown) to a decision.
    pub fn from_label(label: i64) -> Decision {
        if label < 0 {
            Decision::Unknown
        } else {
            Decision::Class(label as usize)
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Class(c) => write!(f, "{c}"),
            Decision::Unknown => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class_id: usize,
    pub mav: Vec<f64>,
    pub weibull: WeibullModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCalibrator")]
pub struct FittedCalibrator {
    mode: Mode,
    config: CalibrationConfig,
    classes: Vec<ClassModel>,
}

#[derive(Deserialize)]
struct RawCalibrator {
    mode: Mode,
    config: CalibrationConfig,
    classes: Vec<ClassModel>,
}

impl TryFrom<RawCalibrator> for FittedCalibrator {
    type Error = Error;

    fn try_from(raw: RawCalibrator) -> Result<Self> {
        if raw.mode != raw.config.mode {
            return Err(Error::config("mode", "top-level mode disagrees with config.mode"));
        }
        FittedCalibrator::from_parts(raw.config, raw.classes)
    }
}

impl FittedCalibrator {
    /// Assembles a calibrator from per-class models. Class ids must be
    /// `0..n` in order and every MAV must have length `n`.
    pub fn from_parts(config: CalibrationConfig, classes: Vec<ClassModel>) -> Result<Self> {
        let n = classes.len();
        if n == 0 {
            return Err(Error::config("classes", "no class models"));
        }
        config.validate(Some(n))?;
        for (i, c) in classes.iter().enumerate() {
            if c.class_id != i {
                return Err(Error::config(
                    "classes",
                    format!("expected class_id {i}, found {}", c.class_id),
                ));
            }
            if c.mav.len() != n {
                return Err(Error::dims(n, c.mav.len()));
            }
        }
        Ok(FittedCalibrator {
            mode: config.mode,
            config,
            classes,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &CalibrationConfig {
        &self.config
    }

    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    /// Activation dimension (one model per position).
    pub fn dimension(&self) -> usize {
        self.classes.len()
    }

    /// Number of known classes.
    pub fn n_known(&self) -> usize {
        match self.mode {
            Mode::OpenMax => self.classes.len(),
            Mode::GOpenMax => self.classes.len() - 1,
        }
    }

    /// Length of the probability vector, unknown slot included.
    pub fn n_outputs(&self) -> usize {
        self.n_known() + 1
    }

    /// Same models with a different rejection threshold.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let config = CalibrationConfig { epsilon, ..self.config };
        config.validate(Some(self.dimension()))?;
        Ok(FittedCalibrator { config, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedOutput {
    /// Activation vector fed to the softmax; in OpenMax mode the
    /// pseudo-unknown activation is appended.
    pub revised_activations: Vec<f64>,
    /// Per-position weights applied to the input activations.
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub decision: Decision,
    pub unknown_probability: f64,
}

/// Fits one Weibull model per activation position.
pub fn fit(records: &[ActivationRecord], config: &CalibrationConfig) -> Result<FittedCalibrator> {
    let dim = match dump_dimension(records)? {
        Some(d) if d > 0 => d,
        _ => return Err(Error::EmptyClass(0)),
    };
    config.validate(Some(dim))?;

    let classes = (0..dim)
        .into_par_iter()
        .map(|class_id| {
            let id = class_id as i64;
            let stats =
                compute_class_stats(records, id, config.metric, config.correct_only).map_err(|e| e.with_class(id))?;
            let weibull = fit_weibull_tail(&stats.distances, config.tail_size).map_err(|e| e.with_class(id))?;
            Ok(ClassModel {
                class_id,
                mav: stats.mav,
                weibull,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    FittedCalibrator::from_parts(*config, classes)
}

/// Class indices ordered by descending activation; ties keep the lower index first.
pub fn rank_classes(av: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..av.len()).collect();
    order.sort_by(|&a, &b| av[b].total_cmp(&av[a]).then(a.cmp(&b)));
    order
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-position weights for `av`; positions outside the top `alpha` keep 1.
pub fn weights(av: &[f64], calib: &FittedCalibrator) -> Result<Vec<f64>> {
    let dim = calib.dimension();
    if av.len() != dim {
        return Err(Error::dims(dim, av.len()));
    }
    let cfg = calib.config();
    let alpha = cfg.alpha.min(dim);
    let mut w = vec![1.0; dim];
    if alpha == 0 {
        return Ok(w);
    }
    let a = cfg.alpha as f64;
    for (rank0, &class) in rank_classes(av).iter().take(alpha).enumerate() {
        let c = (rank0 + 1) as f64;
        let model = &calib.classes[class];
        let d = distance(av, &model.mav, cfg.metric)?;
        // exp(-z) underflows for far samples; weights stay strictly positive
        let survival = model.weibull.survival(d).max(f64::MIN_POSITIVE);
        w[class] = match cfg.weight_formula {
            WeightFormula::AsWritten => 1.0 - ((a - c) / a) * survival,
            WeightFormula::CdfDamping => {
                let r = (a - c + 1.0) / a;
                (1.0 - r) + r * survival
            }
        };
    }
    Ok(w)
}

pub fn recalibrate(av: &[f64], calib: &FittedCalibrator) -> Result<CalibratedOutput> {
    let w = weights(av, calib)?;
    let mut revised: Vec<f64> = av.iter().zip(&w).map(|(x, wi)| x * wi).collect();
    if calib.mode == Mode::OpenMax {
        let pseudo: f64 = av.iter().zip(&w).map(|(x, wi)| x * (1.0 - wi)).sum();
        revised.push(pseudo);
    }
    let probabilities = softmax(&revised);
    let unknown_probability = *probabilities.last().expect("at least one output");
    let decision = decide(&probabilities, calib.config.epsilon, calib.mode);
    Ok(CalibratedOutput {
        revised_activations: revised,
        weights: w,
        probabilities,
        decision,
        unknown_probability,
    })
}

/// Threshold decision for calibrated outputs: the last position is the
/// unknown class in both modes.
pub fn decide(probabilities: &[f64], epsilon: f64, _mode: Mode) -> Decision {
    threshold_decision(probabilities, epsilon, true)
}

/// Rejects when the maximum probability is below `epsilon`; otherwise the
/// argmax (lowest index on ties). With `last_is_unknown`, an argmax on the
/// last position is also a rejection.
pub fn threshold_decision(probabilities: &[f64], epsilon: f64, last_is_unknown: bool) -> Decision {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in probabilities.iter().enumerate() {
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    match best {
        None => Decision::Unknown,
        Some((_, p)) if p < epsilon => Decision::Unknown,
        Some((i, _)) if last_is_unknown && i + 1 == probabilities.len() => Decision::Unknown,
        Some((i, _)) => Decision::Class(i),
    }
}

//! Open-set evaluation: openness, F-measure, per-subset accuracies and grid
//! sweeps over calibration settings.
//!
//! A sweep evaluates every combination of method, alpha, tail size, number of
//! unknown test classes and (with a fixed-threshold policy) epsilon. With the
//! validation-optimal policy the threshold is chosen per fold from the
//! validation split only, then applied to the test split.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationRecord, DistanceMetric, Split};
use crate::calibrator::{
    fit, recalibrate, softmax, threshold_decision, CalibrationConfig, Decision, Mode, WeightFormula,
};
use crate::error::{Error, Result};

/// `1 - sqrt(2 * n_train / (n_r + n_test))`.
pub fn openness(n_train: usize, n_test: usize, n_r: usize) -> Result<f64> {
    if n_train == 0 || n_test == 0 || n_r == 0 {
        return Err(Error::InvalidCounts(format!(
            "counts must be positive (n_train={n_train}, n_test={n_test}, n_r={n_r})"
        )));
    }
    let ratio = (2 * n_train) as f64 / (n_r + n_test) as f64;
    Ok(1.0 - ratio.sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FMeasureKind {
    /// Micro-averaged over all labels, unknown included.
    #[default]
    Micro,
    /// Unweighted mean of per-class F1 over the known classes.
    MacroKnown,
}

fn check_pair(predictions: &[Decision], truths: &[Decision]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.len() != truths.len() {
        return Err(Error::dims(truths.len(), predictions.len()));
    }
    Ok(())
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Micro-averaged F1 treating `Unknown` as one more label.
pub fn f_measure(predictions: &[Decision], truths: &[Decision]) -> Result<f64> {
    f_measure_with(predictions, truths, FMeasureKind::Micro)
}

pub fn f_measure_with(predictions: &[Decision], truths: &[Decision], kind: FMeasureKind) -> Result<f64> {
    check_pair(predictions, truths)?;
    // label -> (tp, fp, fn)
    let mut counts: BTreeMap<i64, (u64, u64, u64)> = BTreeMap::new();
    for (&p, &t) in predictions.iter().zip(truths) {
        let (p, t) = (i64::from(p), i64::from(t));
        if p == t {
            counts.entry(t).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(t).or_default().2 += 1;
        }
    }
    Ok(match kind {
        FMeasureKind::Micro => {
            let (tp, fp, fn_) = counts
                .values()
                .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            harmonic(precision, recall)
        }
        FMeasureKind::MacroKnown => {
            let known: Vec<f64> = counts
                .iter()
                .filter(|(label, _)| **label >= 0)
                .map(|(_, &(tp, fp, fn_))| harmonic(ratio(tp, tp + fp), ratio(tp, tp + fn_)))
                .collect();
            if known.is_empty() {
                0.0
            } else {
                known.iter().sum::<f64>() / known.len() as f64
            }
        }
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of known-truth samples predicted with their exact class.
pub fn known_accuracy(predictions: &[Decision], truths: &[Decision]) -> Result<f64> {
    check_pair(predictions, truths)?;
    subset_accuracy(predictions, truths, |t| t != Decision::Unknown, "known")
}

/// Fraction of unknown-truth samples rejected as unknown.
pub fn unknown_accuracy(predictions: &[Decision], truths: &[Decision]) -> Result<f64> {
    check_pair(predictions, truths)?;
    subset_accuracy(predictions, truths, |t| t == Decision::Unknown, "unknown")
}

fn subset_accuracy(
    predictions: &[Decision],
    truths: &[Decision],
    keep: impl Fn(Decision) -> bool,
    what: &'static str,
) -> Result<f64> {
    let (hits, total) = predictions
        .iter()
        .zip(truths)
        .filter(|(_, &t)| keep(t))
        .fold((0u64, 0u64), |(h, n), (&p, &t)| (h + u64::from(p == t), n + 1));
    if total == 0 {
        return Err(Error::EmptySubset(what));
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub known_classes: Vec<i64>,
    #[serde(default)]
    pub unknown_test_classes: Vec<i64>,
    #[serde(default = "default_folds")]
    pub n_folds: usize,
    #[serde(default)]
    pub split_fractions: SplitFractions,
}

fn default_folds() -> usize {
    3
}

impl ProtocolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.known_classes.is_empty() {
            return Err(Error::config("protocol.known_classes", "must not be empty"));
        }
        if let Some(c) = self
            .unknown_test_classes
            .iter()
            .find(|c| self.known_classes.contains(c))
        {
            return Err(Error::config(
                "protocol.unknown_test_classes",
                format!("class {c} is also listed as known"),
            ));
        }
        if self.n_folds == 0 {
            return Err(Error::config("protocol.n_folds", "must be at least 1"));
        }
        let f = self.split_fractions;
        let all = [f.train, f.val, f.test];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "protocol.split_fractions",
                "fractions must be non-negative and sum to 1",
            ));
        }
        Ok(())
    }

    /// Openness with the first `n_unknown` unknown test classes present.
    pub fn openness_with(&self, n_unknown: usize) -> Result<f64> {
        let k = self.known_classes.len();
        openness(k, k + n_unknown, k)
    }
}

/// Classifier output treatment being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Softmax of the closed-set classifier with a probability threshold.
    #[serde(rename = "softmax")]
    SoftMax,
    /// Softmax of the K+1 classifier; the extra class means unknown.
    #[serde(rename = "gsoftmax")]
    GSoftMax,
    #[serde(rename = "openmax")]
    OpenMax,
    #[serde(rename = "gopenmax")]
    GOpenMax,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SoftMax, Method::GSoftMax, Method::OpenMax, Method::GOpenMax];

    pub fn uses_generated_class(self) -> bool {
        matches!(self, Method::GSoftMax | Method::GOpenMax)
    }

    pub fn calibration_mode(self) -> Option<Mode> {
        match self {
            Method::OpenMax => Some(Mode::OpenMax),
            Method::GOpenMax => Some(Mode::GOpenMax),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::SoftMax => "softmax",
            Method::GSoftMax => "gsoftmax",
            Method::OpenMax => "openmax",
            Method::GOpenMax => "gopenmax",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Every epsilon of the grid is its own cell.
    Fixed,
    /// Per fold, the epsilon maximising validation F-measure is applied to test.
    #[default]
    ValidationOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub methods: Vec<Method>,
    pub alphas: Vec<usize>,
    pub tail_sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// Numbers of unknown test classes to include; all levels when absent.
    pub unknown_counts: Option<Vec<usize>>,
    pub threshold: ThresholdPolicy,
    pub metric: DistanceMetric,
    pub weight_formula: WeightFormula,
    pub correct_only: bool,
    pub f_measure: FMeasureKind,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            methods: Method::ALL.to_vec(),
            alphas: vec![2],
            tail_sizes: vec![20],
            epsilons: (0..20).map(|i| i as f64 * 0.05).collect(),
            unknown_counts: None,
            threshold: ThresholdPolicy::ValidationOptimal,
            metric: DistanceMetric::Euclidean,
            weight_formula: WeightFormula::CdfDamping,
            correct_only: true,
            f_measure: FMeasureKind::Micro,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self, protocol: &ProtocolSpec) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::config(format!("grid.{name}"), "must not be empty"))
            } else {
                Ok(())
            }
        };
        nonempty("methods", self.methods.len())?;
        nonempty("alphas", self.alphas.len())?;
        nonempty("tail_sizes", self.tail_sizes.len())?;
        nonempty("epsilons", self.epsilons.len())?;
        if let Some(e) = self
            .epsilons
            .iter()
            .find(|e| !(e.is_finite() && (0.0..=1.0).contains(*e)))
        {
            return Err(Error::config("grid.epsilons", format!("{e} outside [0, 1]")));
        }
        if let Some(t) = self.tail_sizes.iter().find(|t| **t < 2) {
            return Err(Error::config("grid.tail_sizes", format!("{t} is below 2")));
        }
        if let Some(counts) = &self.unknown_counts {
            nonempty("unknown_counts", counts.len())?;
            let max = protocol.unknown_test_classes.len();
            if let Some(c) = counts.iter().find(|c| **c > max) {
                return Err(Error::config(
                    "grid.unknown_counts",
                    format!("{c} exceeds the {max} unknown test classes"),
                ));
            }
        }
        Ok(())
    }

    fn unknown_levels(&self, protocol: &ProtocolSpec) -> Vec<usize> {
        self.unknown_counts
            .clone()
            .unwrap_or_else(|| (0..=protocol.unknown_test_classes.len()).collect())
    }

    /// Number of reports a sweep produces.
    pub fn n_cells(&self, protocol: &ProtocolSpec) -> usize {
        let eps = match self.threshold {
            ThresholdPolicy::Fixed => self.epsilons.len(),
            ThresholdPolicy::ValidationOptimal => 1,
        };
        self.methods.len() * self.alphas.len() * self.tail_sizes.len() * self.unknown_levels(protocol).len() * eps
    }
}

/// Dumps of one cross-validation fold.
#[derive(Debug, Clone, Default)]
pub struct FoldDumps {
    /// Closed-set classifier (K outputs).
    pub net: Vec<ActivationRecord>,
    /// Classifier with the extra generated class (K + 1 outputs).
    pub net_g: Option<Vec<ActivationRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub epsilon: f64,
    pub f_measure: f64,
    pub known_accuracy: Option<f64>,
    pub unknown_accuracy: Option<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub epsilon: f64,
    pub f_measure: f64,
    pub known_accuracy: Option<f64>,
    pub unknown_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: Method,
    pub alpha: usize,
    pub tail_size: usize,
    /// Grid epsilon for fixed-threshold cells; `None` when chosen per fold.
    pub epsilon: Option<f64>,
    pub threshold: ThresholdPolicy,
    pub unknown_classes: usize,
    pub openness: f64,
    pub folds: Vec<FoldMetrics>,
    pub mean: Option<MeanMetrics>,
    pub error: Option<String>,
}

/// Calibrated (or plain softmax) output of one evaluation record.
#[derive(Debug, Clone)]
struct Scored {
    split: Split,
    truth: Decision,
    source_class: Option<i64>,
    probabilities: Vec<f64>,
}

/// Validation and test scores of one (method, alpha, tail size, fold) unit.
#[derive(Debug, Clone)]
struct FoldScores {
    val: Vec<Scored>,
    test: Vec<Scored>,
    last_is_unknown: bool,
}

fn score_fold(
    dumps: &FoldDumps,
    method: Method,
    alpha: usize,
    tail_size: usize,
    grid: &SweepGrid,
) -> Result<FoldScores> {
    let records = if method.uses_generated_class() {
        dumps
            .net_g
            .as_deref()
            .ok_or_else(|| Error::config("folds.net_g", format!("{method} needs the K+1 classifier dump")))?
    } else {
        &dumps.net[..]
    };
    let dim = crate::activations::dump_dimension(records)?.ok_or(Error::EmptyInput)?;
    let generated_label = if method.uses_generated_class() {
        Some(dim as i64 - 1)
    } else {
        None
    };

    let calibrator = match method.calibration_mode() {
        Some(mode) => {
            let config = CalibrationConfig {
                alpha,
                epsilon: 0.0,
                tail_size,
                metric: grid.metric,
                weight_formula: grid.weight_formula,
                mode,
                correct_only: grid.correct_only,
            };
            Some(fit(records, &config)?)
        }
        None => None,
    };

    let mut scores = FoldScores {
        val: Vec::new(),
        test: Vec::new(),
        last_is_unknown: method != Method::SoftMax,
    };
    for r in records {
        let bucket = match r.split {
            Split::Val => &mut scores.val,
            Split::Test => &mut scores.test,
            _ => continue,
        };
        let probabilities = match &calibrator {
            Some(c) => recalibrate(&r.av, c)?.probabilities,
            None => softmax(&r.av),
        };
        let truth = if r.is_unknown() || Some(r.true_label) == generated_label {
            Decision::Unknown
        } else {
            Decision::Class(r.true_label as usize)
        };
        bucket.push(Scored {
            split: r.split,
            truth,
            source_class: r.source_class,
            probabilities,
        });
    }
    Ok(scores)
}

/// Whether a record takes part when the first `n_unknown` unknown classes
/// are active. Unknown records without a source class count only at the
/// full openness level.
fn in_subset(s: &Scored, protocol: &ProtocolSpec, n_unknown: usize) -> bool {
    if s.truth != Decision::Unknown {
        return true;
    }
    match s.source_class {
        Some(c) => protocol.unknown_test_classes[..n_unknown].contains(&c),
        None => n_unknown == protocol.unknown_test_classes.len(),
    }
}

fn metrics_at(
    scored: &[&Scored],
    epsilon: f64,
    last_is_unknown: bool,
    kind: FMeasureKind,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let predictions: Vec<Decision> = scored
        .iter()
        .map(|s| threshold_decision(&s.probabilities, epsilon, last_is_unknown))
        .collect();
    let truths: Vec<Decision> = scored.iter().map(|s| s.truth).collect();
    let f = f_measure_with(&predictions, &truths, kind)?;
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptySubset(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok((
        f,
        optional(known_accuracy(&predictions, &truths))?,
        optional(unknown_accuracy(&predictions, &truths))?,
    ))
}

/// Picks the epsilon with the highest validation F-measure; ties keep the
/// earliest grid value. Only validation records are accepted.
fn select_epsilon(val: &[&Scored], epsilons: &[f64], last_is_unknown: bool, kind: FMeasureKind) -> Result<f64> {
    assert!(
        val.iter().all(|s| s.split == Split::Val),
        "threshold selection must only see validation records"
    );
    let mut best: Option<(f64, f64)> = None;
    for &eps in epsilons {
        let (f, _, _) = metrics_at(val, eps, last_is_unknown, kind)?;
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((eps, f));
        }
    }
    best.map(|(e, _)| e).ok_or(Error::EmptyInput)
}

fn fold_metrics(
    fold: usize,
    scores: &FoldScores,
    protocol: &ProtocolSpec,
    n_unknown: usize,
    epsilon: Option<f64>,
    grid: &SweepGrid,
) -> Result<FoldMetrics> {
    let epsilon = match epsilon {
        Some(e) => e,
        None => {
            let val: Vec<&Scored> = scores
                .val
                .iter()
                .filter(|s| in_subset(s, protocol, n_unknown))
                .collect();
            if val.is_empty() {
                return Err(Error::EmptySubset("validation"));
            }
            select_epsilon(&val, &grid.epsilons, scores.last_is_unknown, grid.f_measure)?
        }
    };
    let test: Vec<&Scored> = scores
        .test
        .iter()
        .filter(|s| in_subset(s, protocol, n_unknown))
        .collect();
    let (f_measure, known_accuracy, unknown_accuracy) =
        metrics_at(&test, epsilon, scores.last_is_unknown, grid.f_measure)?;
    Ok(FoldMetrics {
        fold,
        epsilon,
        f_measure,
        known_accuracy,
        unknown_accuracy,
        n_samples: test.len(),
    })
}

fn mean_of(folds: &[FoldMetrics]) -> MeanMetrics {
    let n = folds.len() as f64;
    let mean_opt = |get: fn(&FoldMetrics) -> Option<f64>| -> Option<f64> {
        folds.iter().map(get).sum::<Option<f64>>().map(|s| s / n)
    };
    MeanMetrics {
        epsilon: folds.iter().map(|f| f.epsilon).sum::<f64>() / n,
        f_measure: folds.iter().map(|f| f.f_measure).sum::<f64>() / n,
        known_accuracy: mean_opt(|f| f.known_accuracy),
        unknown_accuracy: mean_opt(|f| f.unknown_accuracy),
    }
}

/// Evaluates the full grid. Invalid protocol or grid settings fail the whole
/// call; failures inside a cell are recorded in that cell's report.
pub fn sweep(
    folds: &[FoldDumps],
    protocol: &ProtocolSpec,
    grid: &SweepGrid,
    jobs: usize,
) -> Result<Vec<EvaluationReport>> {
    protocol.validate()?;
    grid.validate(protocol)?;
    if folds.len() != protocol.n_folds {
        return Err(Error::config(
            "folds",
            format!("protocol expects {} folds, got {}", protocol.n_folds, folds.len()),
        ));
    }

    let mut units = Vec::new();
    for &method in &grid.methods {
        for &alpha in &grid.alphas {
            for &tail_size in &grid.tail_sizes {
                for fold in 0..folds.len() {
                    units.push((method, alpha, tail_size, fold));
                }
            }
        }
    }
    let run = || -> Vec<Result<FoldScores, String>> {
        units
            .par_iter()
            .map(|&(method, alpha, tail_size, fold)| {
                score_fold(&folds[fold], method, alpha, tail_size, grid).map_err(|e| format!("fold {fold}: {e}"))
            })
            .collect()
    };
    let scored = if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?
            .install(run)
    } else {
        run()
    };

    let n_folds = folds.len();
    let levels = grid.unknown_levels(protocol);
    let epsilons: Vec<Option<f64>> = match grid.threshold {
        ThresholdPolicy::Fixed => grid.epsilons.iter().copied().map(Some).collect(),
        ThresholdPolicy::ValidationOptimal => vec![None],
    };

    let mut reports = Vec::with_capacity(grid.n_cells(protocol));
    let mut unit = 0;
    for &method in &grid.methods {
        for &alpha in &grid.alphas {
            for &tail_size in &grid.tail_sizes {
                let fold_scores = &scored[unit..unit + n_folds];
                unit += n_folds;
                for &n_unknown in &levels {
                    let openness = protocol.openness_with(n_unknown)?;
                    for &epsilon in &epsilons {
                        let outcome: std::result::Result<Vec<FoldMetrics>, String> = fold_scores
                            .iter()
                            .enumerate()
                            .map(|(fold, s)| {
                                let s = s.as_ref().map_err(Clone::clone)?;
                                fold_metrics(fold, s, protocol, n_unknown, epsilon, grid)
                                    .map_err(|e| format!("fold {fold}: {e}"))
                            })
                            .collect();
                        let (folds, mean, error) = match outcome {
                            Ok(f) => {
                                let m = mean_of(&f);
                                (f, Some(m), None)
                            }
                            Err(e) => (Vec::new(), None, Some(e)),
                        };
                        reports.push(EvaluationReport {
                            method,
                            alpha,
                            tail_size,
                            epsilon,
                            threshold: grid.threshold,
                            unknown_classes: n_unknown,
                            openness,
                            folds,
                            mean,
                            error,
                        });
                    }
                }
            }
        }
    }
    Ok(reports)
}

pub const CSV_HEADER: &str = "mode,alpha,epsilon,tail_size,openness,f_measure,known_acc,unknown_acc,fold";

/// One row per fold plus a `mean` row for multi-fold reports; failed cells
/// get a single row with empty metrics.
pub fn reports_to_csv(reports: &[EvaluationReport]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let prefix = |eps: Option<f64>| format!("{},{},{},{},{}", r.method, r.alpha, opt(eps), r.tail_size, r.openness);
        for f in &r.folds {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                prefix(Some(f.epsilon)),
                f.f_measure,
                opt(f.known_accuracy),
                opt(f.unknown_accuracy),
                f.fold
            ));
        }
        match &r.mean {
            Some(_) if r.folds.len() == 1 => {}
            Some(m) => out.push_str(&format!(
                "{},{},{},{},mean\n",
                prefix(Some(m.epsilon)),
                m.f_measure,
                opt(m.known_accuracy),
                opt(m.unknown_accuracy)
            )),
            None => out.push_str(&format!("{},,,,error\n", prefix(r.epsilon))),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const U: Decision = Decision::Unknown;
    fn c(i: usize) -> Decision {
        Decision::Class(i)
    }

    #[test]
    fn openness_values() {
        assert_eq!(openness(6, 6, 6).unwrap(), 0.0);
        assert_eq!(openness(5, 3, 7).unwrap(), 0.0);
        assert!((openness(6, 10, 10).unwrap() - 0.2254).abs() < 1e-4);
        assert!((openness(60, 95, 60).unwrap() - 0.1201).abs() < 1e-4);
        assert!(matches!(openness(0, 1, 1), Err(Error::InvalidCounts(_))));
        assert!(matches!(openness(1, 0, 1), Err(Error::InvalidCounts(_))));
    }

    #[test]
    fn openness_grows_with_test_classes() {
        let mut prev = openness(6, 6, 6).unwrap();
        for n_test in 7..40 {
            let o = openness(6, n_test, 6).unwrap();
            assert!(o > prev);
            prev = o;
        }
    }

    #[test]
    fn f_measure_examples() {
        let t = [c(0), c(1), U, c(2)];
        assert_eq!(f_measure(&t, &t).unwrap(), 1.0);
        assert_eq!(f_measure(&[U, U, U], &[c(0), c(1), c(2)]).unwrap(), 0.0);
        let p = [c(0), c(1), U, c(1)];
        assert!((f_measure(&p, &t).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(f_measure(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(f_measure(&[U], &[U, U]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn macro_known_f_measure() {
        // class 0: tp 1 fp 0 fn 1 -> f 2/3; class 1: tp 1 fp 1 fn 0 -> f 2/3
        let p = [c(0), c(1), c(1), U];
        let t = [c(0), c(1), c(0), U];
        let f = f_measure_with(&p, &t, FMeasureKind::MacroKnown).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn accuracies() {
        let truths = [c(0), c(1)];
        assert!(matches!(
            unknown_accuracy(&[c(0), c(1)], &truths),
            Err(Error::EmptySubset("unknown"))
        ));
        assert!(matches!(known_accuracy(&[U], &[U]), Err(Error::EmptySubset("known"))));
        assert_eq!(unknown_accuracy(&[U, U, c(0)], &[U, U, c(0)]).unwrap(), 1.0);
        let truths = vec![U; 10];
        let mut preds = vec![U; 7];
        preds.extend([c(0), c(1), c(2)]);
        assert!((unknown_accuracy(&preds, &truths).unwrap() - 0.7).abs() < 1e-12);
        assert!((known_accuracy(&[c(0), U, c(2)], &[c(0), c(1), c(1)]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn protocol_validation() {
        let mut p = ProtocolSpec {
            known_classes: vec![0, 1, 2],
            unknown_test_classes: vec![3, 4],
            n_folds: 3,
            split_fractions: SplitFractions::default(),
        };
        p.validate().unwrap();
        assert!((p.openness_with(2).unwrap() - (1.0 - (6.0f64 / 8.0).sqrt())).abs() < 1e-15);
        p.unknown_test_classes.push(1);
        assert!(p.validate().is_err());
        p.unknown_test_classes.pop();
        p.split_fractions.test = 0.3;
        assert!(p.validate().is_err());
    }

    fn decisions() -> impl Strategy<Value = Vec<(Decision, Decision)>> {
        let d = prop_oneof![Just(U), (0usize..4).prop_map(Decision::Class)];
        prop::collection::vec((d.clone(), d), 1..60)
    }

    proptest! {
        #[test]
        fn f_measure_bounds(pairs in decisions()) {
            let (p, t): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let f = f_measure(&p, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f == 1.0, p == t);
            let macro_f = f_measure_with(&p, &t, FMeasureKind::MacroKnown).unwrap();
            prop_assert!((0.0..=1.0).contains(&macro_f));
        }
    }
}

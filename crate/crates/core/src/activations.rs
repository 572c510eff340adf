//! Activation dumps, per-class mean activation vectors and distances.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Generated,
}

/// One sample's activation vector with its labels.
///
/// `true_label == -1` marks a ground-truth unknown. `source_class`, when
/// present, is the sample's class id in the original dataset; the evaluation
/// protocol uses it to decide which unknown classes take part in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRecord {
    pub id: String,
    pub split: Split,
    pub true_label: i64,
    #[serde(default)]
    pub predicted_label: Option<i64>,
    pub av: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_class: Option<i64>,
}

impl ActivationRecord {
    pub fn is_unknown(&self) -> bool {
        self.true_label < 0
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_label == Some(self.true_label)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
    /// Euclidean distance divided by the dimension, plus cosine distance.
    Eucos,
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            "eucos" | "eucos_combined" => Ok(DistanceMetric::Eucos),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Per-class mean activation vector and the distances of the class samples to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: i64,
    pub mav: Vec<f64>,
    pub distances: Vec<f64>,
    pub n_samples: usize,
}

/// Reads a JSON-lines dump. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn load_dump(path: impl AsRef<Path>) -> Result<Vec<ActivationRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dump(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

pub fn parse_dump<R: BufRead>(reader: R) -> Result<Vec<ActivationRecord>> {
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<dump>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ActivationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let d = *dim.get_or_insert(record.av.len());
        if record.av.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: record.av.len(),
                line: Some(line_no),
            });
        }
        if record.true_label < -1 {
            return Err(Error::InvalidLabel {
                line: line_no,
                label: record.true_label,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Serialises records as JSON lines.
pub fn write_dump<W: std::io::Write>(mut out: W, records: &[ActivationRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<dump>", e))?;
    }
    Ok(())
}

/// Length of the activation vectors of a dump, if uniform and non-empty.
pub fn dump_dimension(records: &[ActivationRecord]) -> Result<Option<usize>> {
    let Some(first) = records.first() else {
        return Ok(None);
    };
    let d = first.av.len();
    if let Some(r) = records.iter().find(|r| r.av.len() != d) {
        return Err(Error::dims(d, r.av.len()));
    }
    Ok(Some(d))
}

pub fn distance(av: &[f64], mav: &[f64], metric: DistanceMetric) -> Result<f64> {
    if av.len() != mav.len() {
        return Err(Error::dims(mav.len(), av.len()));
    }
    Ok(match metric {
        DistanceMetric::Euclidean => euclidean(av, mav),
        DistanceMetric::Cosine => cosine(av, mav),
        DistanceMetric::Eucos => {
            let d = av.len().max(1) as f64;
            euclidean(av, mav) / d + cosine(av, mav)
        }
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Neumaier-compensated sum; makes the MAV independent of record order to
/// well below 1e-9 relative.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Records contributing to a class model: training split, matching label and,
/// with `correct_only`, a matching prediction.
pub fn contributing(
    records: &[ActivationRecord],
    class_id: i64,
    correct_only: bool,
) -> impl Iterator<Item = &ActivationRecord> {
    records.iter().filter(move |r| {
        r.split == Split::Train && r.true_label == class_id && (!correct_only || r.predicted_label == Some(class_id))
    })
}

pub fn compute_class_stats(
    records: &[ActivationRecord],
    class_id: i64,
    metric: DistanceMetric,
    correct_only: bool,
) -> Result<ClassStats> {
    let members: Vec<&ActivationRecord> = contributing(records, class_id, correct_only).collect();
    let Some(first) = members.first() else {
        return Err(Error::EmptyClass(class_id));
    };
    let dim = first.av.len();
    if let Some(r) = members.iter().find(|r| r.av.len() != dim) {
        return Err(Error::dims(dim, r.av.len()));
    }

    let n = members.len() as f64;
    let mav: Vec<f64> = (0..dim)
        .map(|j| compensated_sum(members.iter().map(|r| r.av[j])) / n)
        .collect();
    let distances = members
        .iter()
        .map(|r| distance(&r.av, &mav, metric))
        .collect::<Result<Vec<_>>>()?;

    Ok(ClassStats {
        class_id,
        mav,
        distances,
        n_samples: members.len(),
    })
}

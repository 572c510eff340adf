//! Open-set recognition by Weibull recalibration of classifier activations.
//!
//! The pipeline: dump activation vectors ([`activations`]), fit per-class
//! tail models ([`evt`], [`calibrator::fit`]), recalibrate new samples
//! ([`calibrator::recalibrate`]) and score whole protocols
//! ([`evaluation::sweep`]). [`mixture`] covers the class-mixture inputs and
//! sample selection used when training a generator.

pub mod activations;
pub mod calibrator;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod evt;
pub mod mixture;
pub mod plot;

pub use activations::{ActivationRecord, ClassStats, DistanceMetric, Split};
pub use calibrator::{
    recalibrate, CalibratedOutput, CalibrationConfig, Decision, FittedCalibrator, Mode, WeightFormula,
};
pub use error::{Error, Result};
pub use evaluation::{openness, EvaluationReport, Method, ProtocolSpec, SweepGrid};
pub use evt::{fit_weibull_tail, weibull_cdf, WeibullModel};
pub use mixture::{sample_mixture, select_unknown_candidates, CandidateSelection, MixtureVector};

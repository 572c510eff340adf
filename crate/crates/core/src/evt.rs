//! Weibull tail fitting for per-class distance populations.
//!
//! A class model is fitted on the largest distances of that class ("fit
//! high"): a two-parameter Weibull is fitted by maximum likelihood to the
//! `tail_size` largest values. Distances are non-negative, so the
//! translation `t` stays at zero unless the tail reaches zero, in which case
//! it is placed just below the tail minimum to keep every fitted point
//! strictly positive.
//!
//! ```text
//! F(x) = 1 - exp(-((x - t) / lambda)^k)    for x > t
//!      = 0                                 for x <= t
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape root-solve bracket. Newton steps leaving it fall back to bisection.
const SHAPE_MIN: f64 = 1e-4;
const SHAPE_MAX: f64 = 1e4;
const SHAPE_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;

/// Relative margin placing the translation below a zero tail minimum.
const TRANSLATION_MARGIN: f64 = 1e-6;

/// Fitted Weibull tail model of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeibull", into = "RawWeibull")]
pub struct WeibullModel {
    translation: f64,
    scale: f64,
    shape: f64,
    tail_size: usize,
    n_fitted: usize,
}

#[derive(Serialize, Deserialize)]
struct RawWeibull {
    t: f64,
    lambda: f64,
    k: f64,
    tail_size: usize,
    n_fitted: usize,
}

impl TryFrom<RawWeibull> for WeibullModel {
    type Error = Error;

    fn try_from(raw: RawWeibull) -> Result<Self> {
        WeibullModel::new(raw.t, raw.lambda, raw.k, raw.tail_size, raw.n_fitted)
    }
}

impl From<WeibullModel> for RawWeibull {
    fn from(m: WeibullModel) -> Self {
        RawWeibull {
            t: m.translation,
            lambda: m.scale,
            k: m.shape,
            tail_size: m.tail_size,
            n_fitted: m.n_fitted,
        }
    }
}

impl WeibullModel {
    /// Builds a model from explicit parameters, e.g. one read back from disk.
    pub fn new(t: f64, lambda: f64, k: f64, tail_size: usize, n_fitted: usize) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidModel(format!("translation {t} is not finite")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidModel(format!("scale {lambda} must be > 0")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidModel(format!("shape {k} must be > 0")));
        }
        if tail_size == 0 || n_fitted == 0 {
            return Err(Error::InvalidModel("tail_size and n_fitted must be positive".into()));
        }
        Ok(WeibullModel {
            translation: t,
            scale: lambda,
            shape: k,
            tail_size,
            n_fitted,
        })
    }

    pub fn translation(&self) -> f64 {
        self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn tail_size(&self) -> usize {
        self.tail_size
    }

    pub fn n_fitted(&self) -> usize {
        self.n_fitted
    }

    /// Cumulative probability of `x`; zero at or below the translation.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() || x <= self.translation {
            return 0.0;
        }
        let z = ((x - self.translation) / self.scale).powf(self.shape);
        -(-z).exp_m1()
    }

    /// `1 - cdf(x)`, computed without cancellation.
    pub fn survival(&self, x: f64) -> f64 {
        if x.is_nan() || x <= self.translation {
            return 1.0;
        }
        let z = ((x - self.translation) / self.scale).powf(self.shape);
        (-z).exp()
    }

    /// Log-likelihood of `xs` under the model. Points at or below the
    /// translation have zero density and yield `-inf`.
    pub fn log_likelihood(&self, xs: &[f64]) -> f64 {
        let (k, lambda) = (self.shape, self.scale);
        xs.iter()
            .map(|&x| {
                let y = x - self.translation;
                if y <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let r = y / lambda;
                k.ln() - lambda.ln() + (k - 1.0) * r.ln() - r.powf(k)
            })
            .sum()
    }
}

/// Free-function form of [`WeibullModel::cdf`].
pub fn weibull_cdf(model: &WeibullModel, x: f64) -> f64 {
    model.cdf(x)
}

/// Fits a Weibull model to the `tail_size` largest values of `distances`.
pub fn fit_weibull_tail(distances: &[f64], tail_size: usize) -> Result<WeibullModel> {
    if tail_size < 2 {
        return Err(Error::InvalidTailSize(tail_size));
    }
    if distances.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: distances.len(),
        });
    }
    if let Some((index, &value)) = distances
        .iter()
        .enumerate()
        .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
    {
        return Err(Error::InvalidDistance { index, value });
    }

    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = tail_size.min(sorted.len());
    let tail = &sorted[..n];

    let (largest, smallest) = (tail[0], tail[n - 1]);
    if largest == smallest {
        return Err(Error::DegenerateTail { n, value: largest });
    }

    let translation = (smallest - TRANSLATION_MARGIN * smallest.abs().max(1.0)).min(0.0);
    let excess: Vec<f64> = tail.iter().map(|&x| x - translation).collect();
    let (scale, shape) = fit_two_parameter(&excess)?;

    WeibullModel::new(translation, scale, shape, tail_size, n)
}

/// Two-parameter MLE on strictly positive samples. Returns `(scale, shape)`.
///
/// The shape solves
/// `sum(y^k ln y) / sum(y^k) - 1/k - mean(ln y) = 0`, which is increasing in
/// `k`; the scale follows as `(mean(y^k))^(1/k)`. Samples are normalised by
/// their maximum so every power stays in `(0, 1]`.
fn fit_two_parameter(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len() as f64;
    let max = samples.iter().copied().fold(f64::MIN, f64::max);
    let logs: Vec<f64> = samples.iter().map(|&y| (y / max).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n;

    // (g(k), g'(k), mean(z^k))
    let eval = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let p = (k * l).exp();
            s0 += p;
            s1 += p * l;
            s2 += p * l * l;
        }
        let ratio = s1 / s0;
        let g = ratio - 1.0 / k - mean_log;
        let dg = (s2 / s0 - ratio * ratio) + 1.0 / (k * k);
        (g, dg, s0 / n)
    };

    let (mut lo, mut hi) = (SHAPE_MIN, SHAPE_MAX);
    if eval(hi).0 <= 0.0 {
        // Spread too small to resolve within the shape bracket.
        return Err(Error::NonConvergence { iterations: 0 });
    }

    let mut k = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let (g, dg, mean_pow) = eval(k);
        if g == 0.0 {
            return Ok((max * mean_pow.powf(1.0 / k), k));
        }
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            // geometric midpoint; the bracket spans eight decades
            (lo * hi).sqrt()
        };
        let step = (next - k).abs();
        k = next;
        if step <= SHAPE_TOL * k.max(1.0) {
            let (_, _, mean_pow) = eval(k);
            return Ok((max * mean_pow.powf(1.0 / k), k));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force MLE over the grid (0.01..=10)^2 at step 0.01.
    fn grid_mle(excess: &[f64]) -> (f64, f64, f64) {
        let logs: Vec<f64> = excess.iter().map(|y| y.ln()).collect();
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 1..=1000 {
            let lambda = i as f64 * 0.01;
            let ll_lambda = lambda.ln();
            for j in 1..=1000 {
                let k = j as f64 * 0.01;
                let mut ll = 0.0;
                for &l in &logs {
                    let lr = l - ll_lambda;
                    ll += k.ln() - ll_lambda + (k - 1.0) * lr - (k * lr).exp();
                }
                if ll > best.0 {
                    best = (ll, lambda, k);
                }
            }
        }
        (best.1, best.2, best.0)
    }

    fn weibull_samples(n: usize, lambda: f64, k: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                lambda * (-(1.0 - u).ln()).powf(1.0 / k)
            })
            .collect()
    }

    #[test]
    fn cdf_closed_form() {
        let m = WeibullModel::new(0.0, 1.0, 1.0, 10, 10).unwrap();
        assert_eq!(m.cdf(0.0), 0.0);
        assert!((m.cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((m.cdf(1.0) - 0.632121).abs() < 1e-6);

        let m = WeibullModel::new(2.0, 3.0, 0.5, 10, 10).unwrap();
        assert_eq!(m.cdf(1.0), 0.0);
        assert_eq!(m.cdf(2.0), 0.0);
        assert!(m.cdf(1e9) > 0.999);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WeibullModel::new(0.0, 0.0, 1.0, 1, 1).is_err());
        assert!(WeibullModel::new(0.0, 1.0, -1.0, 1, 1).is_err());
        assert!(WeibullModel::new(f64::NAN, 1.0, 1.0, 1, 1).is_err());
        let json = r#"{"t":0.0,"lambda":-1.0,"k":1.0,"tail_size":3,"n_fitted":3}"#;
        assert!(serde_json::from_str::<WeibullModel>(json).is_err());
    }

    #[test]
    fn json_shape() {
        let m = WeibullModel::new(0.5, 2.0, 1.5, 20, 7).unwrap();
        let v = serde_json::to_value(m).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"t": 0.5, "lambda": 2.0, "k": 1.5, "tail_size": 20, "n_fitted": 7})
        );
        let back: WeibullModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn degenerate_and_insufficient() {
        assert!(matches!(
            fit_weibull_tail(&[5.0, 5.0, 5.0], 3),
            Err(Error::DegenerateTail { .. })
        ));
        assert!(matches!(
            fit_weibull_tail(&[1.0], 3),
            Err(Error::InsufficientData { got: 1, .. })
        ));
        assert!(matches!(
            fit_weibull_tail(&[1.0, 2.0], 1),
            Err(Error::InvalidTailSize(1))
        ));
        assert!(matches!(
            fit_weibull_tail(&[1.0, -2.0], 2),
            Err(Error::InvalidDistance { index: 1, .. })
        ));
        // the population has distinct values but the tail does not
        assert!(matches!(
            fit_weibull_tail(&[1.0, 3.0, 3.0], 2),
            Err(Error::DegenerateTail { n: 2, .. })
        ));
    }

    #[test]
    fn fits_largest_values_against_grid_oracle() {
        let m = fit_weibull_tail(&[0.5, 1.0, 1.5, 2.0, 2.5], 3).unwrap();
        assert_eq!(m.n_fitted(), 3);
        assert_eq!(m.tail_size(), 3);
        assert_eq!(m.translation(), 0.0);
        // grid oracle on {1.5, 2.0, 2.5}: lambda = 2.17, k = 5.68
        assert!((m.scale() - 2.17).abs() <= 0.02, "lambda {}", m.scale());
        assert!((m.shape() - 5.68).abs() <= 0.02, "k {}", m.shape());

        let (gl, gk, _) = grid_mle(&[2.5, 2.0, 1.5]);
        assert!((m.scale() - gl).abs() <= 0.02);
        assert!((m.shape() - gk).abs() <= 0.02);
    }

    #[test]
    fn zero_in_tail_moves_translation_below_it() {
        let m = fit_weibull_tail(&[0.0, 0.4, 1.0, 1.7], 4).unwrap();
        assert_eq!(m.translation(), -1e-6);
        assert!(m.cdf(0.0) > 0.0);
    }

    #[test]
    fn tail_fit_matches_grid_oracle() {
        let xs = weibull_samples(1000, 1.0, 2.0, 11);
        let m = fit_weibull_tail(&xs, 250).unwrap();
        assert_eq!(m.n_fitted(), 250);

        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let excess: Vec<f64> = sorted[..250].iter().map(|x| x - m.translation()).collect();
        let (gl, gk, gll) = grid_mle(&excess);
        assert!((m.shape() - gk).abs() <= 0.15 * gk, "k {} vs {}", m.shape(), gk);
        assert!((m.scale() - gl).abs() <= 0.15 * gl, "lambda {} vs {}", m.scale(), gl);
        let mut tail = sorted[..250].to_vec();
        tail.reverse();
        assert!(m.log_likelihood(&tail) >= gll - 1e-3);
    }

    #[test]
    fn recovers_generating_parameters() {
        let xs = weibull_samples(10_000, 1.0, 2.0, 5);
        let m = fit_weibull_tail(&xs, xs.len()).unwrap();
        assert!((m.scale() - 1.0).abs() <= 0.05, "lambda {}", m.scale());
        assert!((m.shape() - 2.0).abs() <= 0.10, "k {}", m.shape());
    }

    #[test]
    fn deterministic() {
        let xs = weibull_samples(500, 2.0, 1.3, 9);
        let a = fit_weibull_tail(&xs, 100).unwrap();
        let b = fit_weibull_tail(&xs, 100).unwrap();
        assert_eq!(a.scale().to_bits(), b.scale().to_bits());
        assert_eq!(a.shape().to_bits(), b.shape().to_bits());
        assert_eq!(a.translation().to_bits(), b.translation().to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn small_tails_beat_the_grid(xs in prop::collection::vec(0.0f64..5.0, 3..=10)) {
            let mut sorted = xs.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(sorted[0] - sorted[sorted.len() - 1] > 1e-3);
            let m = fit_weibull_tail(&xs, xs.len()).unwrap();
            let excess: Vec<f64> = xs.iter().map(|x| x - m.translation()).collect();
            let (_, _, grid_ll) = grid_mle(&excess);
            prop_assert!(m.log_likelihood(&xs) >= grid_ll - 1e-3);
        }

        #[test]
        fn cdf_is_monotone(
            t in -10.0f64..10.0,
            lambda in 1e-3f64..100.0,
            k in 1e-2f64..20.0,
            mut a in -50.0f64..200.0,
            mut b in -50.0f64..200.0,
        ) {
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let m = WeibullModel::new(t, lambda, k, 5, 5).unwrap();
            let (ca, cb) = (m.cdf(a), m.cdf(b));
            prop_assert!(ca <= cb);
            prop_assert!((0.0..=1.0).contains(&ca) && (0.0..=1.0).contains(&cb));
        }

        #[test]
        fn fitted_parameters_positive(
            xs in prop::collection::vec(0.0f64..1e3, 2..200),
            tail in 2usize..300,
        ) {
            if let Ok(m) = fit_weibull_tail(&xs, tail) {
                prop_assert!(m.scale() > 0.0 && m.shape() > 0.0);
                prop_assert_eq!(m.n_fitted(), tail.min(xs.len()));
                prop_assert_eq!(m.cdf(m.translation()), 0.0);
            }
        }
    }
}

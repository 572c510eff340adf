//! Minimal SVG line charts for sweep reports.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::evaluation::{EvaluationReport, Method};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Series {
    label: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

fn color_of(method: Method) -> &'static str {
    let idx = Method::ALL.iter().position(|m| *m == method).unwrap_or(0);
    COLORS[idx % COLORS.len()]
}

/// Best mean value of `metric` per method at each x; NaN-free and sorted by x.
fn best_by(
    reports: &[EvaluationReport],
    x: impl Fn(&EvaluationReport) -> f64,
    metric: impl Fn(&EvaluationReport) -> Option<f64>,
) -> BTreeMap<Method, Vec<(f64, f64)>> {
    let mut best: BTreeMap<(usize, u64), (Method, f64, f64)> = BTreeMap::new();
    for r in reports {
        let Some(y) = metric(r) else { continue };
        let xv = x(r);
        let idx = Method::ALL.iter().position(|m| *m == r.method).unwrap_or(0);
        let key = (idx, xv.to_bits());
        let entry = best.entry(key).or_insert((r.method, xv, y));
        if y > entry.2 {
            entry.2 = y;
        }
    }
    let mut out: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
    for (_, (method, xv, y)) in best {
        out.entry(method).or_default().push((xv, y));
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

/// Mean F-measure against openness, best configuration per method.
pub fn f_measure_vs_openness(reports: &[EvaluationReport]) -> String {
    let series = best_by(reports, |r| r.openness, |r| r.mean.as_ref().map(|m| m.f_measure))
        .into_iter()
        .map(|(method, points)| Series {
            label: method.to_string(),
            color: color_of(method),
            dashed: false,
            points,
        })
        .collect::<Vec<_>>();
    render("F-measure vs openness", "openness", "F-measure", &series)
}

/// Mean known (solid) and unknown (dashed) accuracy against tail size.
pub fn accuracy_vs_tail_size(reports: &[EvaluationReport]) -> String {
    let calibrated: Vec<EvaluationReport> = reports
        .iter()
        .filter(|r| r.method.calibration_mode().is_some())
        .cloned()
        .collect();
    let mut series = Vec::new();
    for (method, points) in best_by(
        &calibrated,
        |r| r.tail_size as f64,
        |r| r.mean.as_ref().and_then(|m| m.known_accuracy),
    ) {
        series.push(Series {
            label: format!("{method} known"),
            color: color_of(method),
            dashed: false,
            points,
        });
    }
    for (method, points) in best_by(
        &calibrated,
        |r| r.tail_size as f64,
        |r| r.mean.as_ref().and_then(|m| m.unknown_accuracy),
    ) {
        series.push(Series {
            label: format!("{method} unknown"),
            color: color_of(method),
            dashed: true,
            points,
        });
    }
    render("Accuracy vs tail size", "tail size", "accuracy", &series)
}

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (mut x_min, mut x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max - x_min < 1e-12 {
        x_max = x_min + 1.0;
    }
    let (plot_w, plot_h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - y.clamp(0.0, 1.0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.1}</text>"#,
            MARGIN - 6.0,
            sy(y) + 4.0
        );
        let x = x_min + (x_max - x_min) * i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            sx(x),
            HEIGHT - MARGIN + 18.0,
            tick(x)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{}" stroke-width="2" fill="none"{dash}/>"#,
            pts.join(" "),
            s.color
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                sx(x),
                sy(y),
                s.color
            );
        }
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{x1}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{c}" stroke-width="2"{dash}/><text x="{tx}" y="{ty}">{label}</text>"#,
            x1 = WIDTH - MARGIN - 130.0,
            x2 = WIDTH - MARGIN - 110.0,
            c = s.color,
            tx = WIDTH - MARGIN - 104.0,
            ty = ly + 4.0,
            label = s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() >= 1.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{MeanMetrics, ThresholdPolicy};

    fn report(method: Method, openness: f64, tail: usize, f: f64) -> EvaluationReport {
        EvaluationReport {
            method,
            alpha: 2,
            tail_size: tail,
            epsilon: None,
            threshold: ThresholdPolicy::ValidationOptimal,
            unknown_classes: 0,
            openness,
            folds: vec![],
            mean: Some(MeanMetrics {
                epsilon: 0.5,
                f_measure: f,
                known_accuracy: Some(f),
                unknown_accuracy: Some(1.0 - f),
            }),
            error: None,
        }
    }

    #[test]
    fn renders_one_polyline_per_method() {
        let reports = vec![
            report(Method::SoftMax, 0.0, 10, 0.9),
            report(Method::SoftMax, 0.1, 10, 0.7),
            report(Method::GOpenMax, 0.0, 10, 0.92),
            report(Method::GOpenMax, 0.1, 10, 0.88),
            report(Method::GOpenMax, 0.1, 20, 0.89),
        ];
        let svg = f_measure_vs_openness(&reports);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">gopenmax</text>"));

        let svg = accuracy_vs_tail_size(&reports);
        // softmax has no tail size; gopenmax known + unknown
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
    }

    #[test]
    fn empty_input_still_valid_svg() {
        let svg = f_measure_vs_openness(&[]);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

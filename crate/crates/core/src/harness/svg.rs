//! Self-contained SVG 1.1 figures: log-log gap curves, one polyline per
//! batch size, a dotted rate reference line, and a legend. No external
//! fonts or stylesheets, so the files render anywhere.

use super::ExperimentResult;
use crate::oracles::rates::{LossCurve, RateFit};

#[derive(Debug, thiserror::Error)]
pub enum SvgError {
    #[error("no curves to draw")]
    Empty,
    #[error("axis degenerate: no strictly positive gap values")]
    DegenerateAxis,
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render labelled gap curves with per-curve fits and a dotted reference
/// line of the given log-log slope anchored at the first curve's midpoint.
pub fn render_svg(
    curves: &[(String, LossCurve)],
    fits: &[Option<RateFit>],
    reference_slope: f64,
    title: &str,
) -> Result<String, SvgError> {
    if curves.is_empty() {
        return Err(SvgError::Empty);
    }

    // Log-log point sets, skipping non-positive gaps.
    let logged: Vec<Vec<(f64, f64)>> = curves
        .iter()
        .map(|(_, c)| {
            c.sample_counts
                .iter()
                .zip(&c.mean_gap)
                .filter(|(_, &g)| g > 0.0)
                .map(|(&t, &g)| ((t as f64).log10(), g.log10()))
                .collect()
        })
        .collect();
    if logged.iter().all(|pts| pts.is_empty()) {
        return Err(SvgError::DegenerateAxis);
    }

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for pts in &logged {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_max - x_min < 1e-9 {
        x_max = x_min + 1.0;
    }
    y_min = (y_min - 0.2).floor();
    y_max = (y_max + 0.2).ceil();

    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut doc = String::with_capacity(1 << 14);
    doc.push_str(&format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="20" font-family="monospace" font-size="14">{}</text>
"#,
        MARGIN_L,
        esc(title)
    ));

    // Axes.
    doc.push_str(&format!(
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black" stroke-width="1"/>
<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black" stroke-width="1"/>
"#,
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B
    ));

    // Decade ticks and labels.
    let x_lo = x_min.ceil() as i64;
    let x_hi = x_max.floor() as i64;
    for d in x_lo..=x_hi {
        let x = px(d as f64);
        doc.push_str(&format!(
            r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{b2}" stroke="black" stroke-width="1"/>
<text x="{x}" y="{ty}" font-family="monospace" font-size="12" text-anchor="middle">1e{d}</text>
"#,
            b = HEIGHT - MARGIN_B,
            b2 = HEIGHT - MARGIN_B + 6.0,
            ty = HEIGHT - MARGIN_B + 22.0,
        ));
    }
    let y_lo = y_min.ceil() as i64;
    let y_hi = y_max.floor() as i64;
    for d in y_lo..=y_hi {
        let y = py(d as f64);
        doc.push_str(&format!(
            r#"<line x1="{l2}" y1="{y}" x2="{l}" y2="{y}" stroke="black" stroke-width="1"/>
<text x="{tx}" y="{ty}" font-family="monospace" font-size="12" text-anchor="end">1e{d}</text>
"#,
            l = MARGIN_L,
            l2 = MARGIN_L - 6.0,
            tx = MARGIN_L - 10.0,
            ty = y + 4.0,
        ));
    }
    doc.push_str(&format!(
        r#"<text x="{cx}" y="{cy}" font-family="monospace" font-size="13" text-anchor="middle">samples</text>
<text x="18" y="{my}" font-family="monospace" font-size="13" text-anchor="middle" transform="rotate(-90 18 {my})">loss gap</text>
"#,
        cx = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        cy = HEIGHT - 12.0,
        my = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
    ));

    // Data polylines.
    for (i, pts) in logged.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        doc.push_str(&format!(
            r#"<polyline class="data" fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>
"#,
            path.join(" ")
        ));
    }

    // Dotted reference line through the first curve's midpoint.
    if let Some(pts) = logged.iter().find(|p| !p.is_empty()) {
        let (ax, ay) = pts[pts.len() / 2];
        let y_at = |x: f64| ay + reference_slope * (x - ax);
        doc.push_str(&format!(
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.2" stroke-dasharray="6 4"/>
"#,
            px(x_min),
            py(y_at(x_min).clamp(y_min, y_max)),
            px(x_max),
            py(y_at(x_max).clamp(y_min, y_max)),
        ));
    }

    // Legend.
    let lx = WIDTH - MARGIN_R + 14.0;
    let mut ly = MARGIN_T + 10.0;
    for (i, (label, _)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let note = match fits.get(i).and_then(|f| f.as_ref()) {
            Some(fit) => format!("{} (slope {:.2})", label, fit.slope),
            None => label.clone(),
        };
        doc.push_str(&format!(
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.6"/>
<text x="{}" y="{}" font-family="monospace" font-size="12">{}</text>
"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            esc(&note)
        ));
        ly += 18.0;
    }
    doc.push_str(&format!(
        r#"<text x="{lx}" y="{ly}" font-family="monospace" font-size="12">dotted: slope {reference_slope:.2}</text>
"#
    ));

    doc.push_str("</svg>\n");
    Ok(doc)
}

/// Figure for a full experiment result: one curve per batch size.
pub fn render_experiment_svg(result: &ExperimentResult) -> Result<String, SvgError> {
    let curves: Vec<(String, LossCurve)> = result
        .per_batch
        .iter()
        .map(|b| (format!("B={}", b.batch), b.curve.clone()))
        .collect();
    let fits: Vec<Option<RateFit>> = result
        .per_batch
        .iter()
        .map(|b| b.fit.as_ref().ok().cloned())
        .collect();
    render_svg(&curves, &fits, result.config.reference_slope, &result.config.id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_over_t_curve() -> LossCurve {
        let counts: Vec<u64> = (0..40).map(|i| 1 + i * 25).collect();
        LossCurve {
            mean_gap: counts.iter().map(|&t| 1.0 / t as f64).collect(),
            stderr: vec![0.0; counts.len()],
            sample_counts: counts,
        }
    }

    #[test]
    fn single_curve_has_one_polyline_and_one_dotted_line() {
        let doc = render_svg(
            &[("B=1".into(), one_over_t_curve())],
            &[None],
            -1.0,
            "unit",
        )
        .unwrap();
        assert_eq!(doc.matches("<polyline").count(), 1);
        assert_eq!(doc.matches("stroke-dasharray").count(), 1);
        assert!(doc.starts_with("<?xml"));
    }

    #[test]
    fn three_curves_three_polylines_three_legend_entries() {
        let c = one_over_t_curve();
        let curves = vec![
            ("B=1".into(), c.clone()),
            ("B=10".into(), c.clone()),
            ("B=100".into(), c),
        ];
        let doc = render_svg(&curves, &[None, None, None], -1.0, "unit").unwrap();
        assert_eq!(doc.matches(r#"class="data""#).count(), 3);
        assert_eq!(doc.matches("B=1<").count(), 1);
        assert!(doc.contains("B=10<") && doc.contains("B=100<"));
    }

    #[test]
    fn empty_and_degenerate_inputs_error() {
        assert!(matches!(render_svg(&[], &[], -1.0, "x"), Err(SvgError::Empty)));
        let zero = LossCurve {
            sample_counts: vec![1, 10],
            mean_gap: vec![0.0, 0.0],
            stderr: vec![0.0, 0.0],
        };
        assert!(matches!(
            render_svg(&[("B=1".into(), zero)], &[None], -1.0, "x"),
            Err(SvgError::DegenerateAxis)
        ));
    }
}

//! Static SVG line plots of metrics over time.

use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use terramcl::eval::{MetricsRow, ReplayOutput};

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(23, 190, 207),
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn line_plot(path: &Path, title: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let root = SVGBackend::new(path, (900, 480)).into_drawing_area();
    let err = |e: &dyn std::fmt::Display| anyhow!("plotting {}: {e}", path.display());
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc(y_label)
        .draw()
        .map_err(|e| err(&e))?;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(1)))
            .map_err(|e| err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    if series.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
    }
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

fn collect(runs: &[(&str, &ReplayOutput)], suffix: &str, f: impl Fn(&MetricsRow) -> Option<f64>) -> Vec<Series> {
    runs.iter()
        .map(|(name, out)| Series {
            label: if suffix.is_empty() { name.to_string() } else { format!("{name} {suffix}") },
            points: out.rows.iter().filter_map(|r| f(r).map(|v| (r.t, v))).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

/// Writes translation_error.svg, yaw_error.svg, quality.svg,
/// uncertainty.svg and, when timings were recorded, timings.svg.
pub fn write_all(dir: &Path, runs: &[(&str, &ReplayOutput)]) -> Result<()> {
    line_plot(
        &dir.join("translation_error.svg"),
        "Translation error",
        "error [m]",
        &collect(runs, "", |r| r.translation_error),
    )?;
    line_plot(&dir.join("yaw_error.svg"), "Yaw error", "error [rad]", &collect(runs, "", |r| r.yaw_error))?;
    line_plot(&dir.join("quality.svg"), "Quality", "hit ratio", &collect(runs, "", |r| Some(r.quality)))?;
    let mut uncertainty = collect(runs, "sum", |r| Some(r.uncertainty_sum));
    uncertainty.extend(collect(runs, "product", |r| Some(r.uncertainty_product)));
    line_plot(&dir.join("uncertainty.svg"), "Covariance diagonal", "value", &uncertainty)?;
    let mut timings = collect(runs, "predict", |r| r.predict_us);
    timings.extend(collect(runs, "correct", |r| r.correct_us));
    timings.extend(collect(runs, "reseed", |r| r.reseed_us));
    if !timings.is_empty() {
        line_plot(&dir.join("timings.svg"), "Phase timings", "time [us]", &timings)?;
    }
    Ok(())
}

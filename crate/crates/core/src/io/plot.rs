//! Minimal SVG line plots for report figures.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Markers only, no connecting line.
    pub scatter: bool,
}

pub struct Axis {
    pub label: String,
    pub log: bool,
}

const COLORS: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
];

fn bounds(vals: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite() && (!log || *v > 0.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return if log { (0.1, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        (lo / 1.5, hi * 1.5)
    } else {
        let pad = ((hi - lo) * 0.05).max(1e-12);
        (lo - pad, hi + pad)
    }
}

pub fn write_svg_plot(path: &Path, title: &str, x: &Axis, y: &Axis, series: &[Series]) -> Result<()> {
    let mut svg = String::new();
    draw(&mut svg, title, x, y, series).map_err(|e| Error::Format(format!("plot {}: {e}", path.display())))?;
    super::atomic_write(path, |f| std::io::Write::write_all(f, svg.as_bytes()))
}

fn draw(
    svg: &mut String,
    title: &str,
    x: &Axis,
    y: &Axis,
    series: &[Series],
) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::with_string(svg, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let xr = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), x.log);
    let yr = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), y.log);
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60);
    macro_rules! body {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(x.label.as_str())
                .y_desc(y.label.as_str())
                .draw()?;
            for (i, s) in series.iter().enumerate() {
                let color = COLORS[i % COLORS.len()];
                let pts = s.points.iter().copied().filter(|(a, b)| a.is_finite() && b.is_finite());
                if s.scatter {
                    chart
                        .draw_series(pts.map(|p| Circle::new(p, 3, color.filled())))?
                        .label(s.label.as_str())
                        .legend(move |(a, b)| Circle::new((a + 10, b), 3, color.filled()));
                } else {
                    chart
                        .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
                        .label(s.label.as_str())
                        .legend(move |(a, b)| PathElement::new(vec![(a, b), (a + 20, b)], color));
                }
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()?;
        }};
    }
    match (x.log, y.log) {
        (false, false) => body!(builder.build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)?),
        (true, false) => body!(builder.build_cartesian_2d((xr.0..xr.1).log_scale(), yr.0..yr.1)?),
        (false, true) => body!(builder.build_cartesian_2d(xr.0..xr.1, (yr.0..yr.1).log_scale())?),
        (true, true) => body!(builder.build_cartesian_2d((xr.0..xr.1).log_scale(), (yr.0..yr.1).log_scale())?),
    }
    root.present()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_svg() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.svg");
        let s = Series {
            label: "y".into(),
            points: vec![(1.0, 2.0), (2.0, 8.0), (3.0, 18.0)],
            scatter: false,
        };
        write_svg_plot(
            &p,
            "test",
            &Axis {
                label: "P".into(),
                log: false,
            },
            &Axis {
                label: "R".into(),
                log: true,
            },
            &[s],
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<svg"));
    }
}

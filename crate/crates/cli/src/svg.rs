//! Decision-region plots.

use std::fmt::Write;

use exactnet_core::analysis::LabeledRegion;
use exactnet_core::geometry::{GeometryError, PlanarRegion, PlaneFrame};

/// matplotlib's tab10.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const PLOT_SIZE: f64 = 500.0;
const MARGIN: f64 = 10.0;
const LEGEND_WIDTH: f64 = 110.0;
const LEGEND_ROW: f64 = 20.0;

/// Renders one filled path per region plus a legend with one entry per
/// output label. Coordinates are those of the input polygon's plane, scaled
/// so the longer side spans 500 units, with y pointing up.
pub fn render(
    x: &PlanarRegion,
    regions: &[LabeledRegion],
    labels: usize,
    colors: &[String],
) -> Result<String, GeometryError> {
    let frame = PlaneFrame::from_points(x.preimage())?;
    let outline: Vec<(f64, f64)> = x.preimage().iter().map(|p| frame.project(p)).collect();
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(a, b) in &outline {
        lo = (lo.0.min(a), lo.1.min(b));
        hi = (hi.0.max(a), hi.1.max(b));
    }
    let scale = PLOT_SIZE / (hi.0 - lo.0).max(hi.1 - lo.1);
    let to_screen = |(a, b): (f64, f64)| (MARGIN + (a - lo.0) * scale, MARGIN + (hi.1 - b) * scale);
    let width = 2.0 * MARGIN + (hi.0 - lo.0) * scale + LEGEND_WIDTH;
    let height = (2.0 * MARGIN + (hi.1 - lo.1) * scale).max(2.0 * MARGIN + LEGEND_ROW * labels as f64);
    let color = |label: usize| -> &str {
        colors
            .get(label)
            .map(String::as_str)
            .unwrap_or(PALETTE[label % PALETTE.len()])
    };

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.3} {height:.3}" width="{width:.0}" height="{height:.0}">"#
    )
    .unwrap();
    out.push_str("<g id=\"regions\" stroke=\"#000000\" stroke-width=\"0.5\">\n");
    for r in regions {
        let mut d = String::new();
        for (i, p) in r.region.preimage().iter().enumerate() {
            let (sx, sy) = to_screen(frame.project(p));
            write!(d, "{}{sx:.4} {sy:.4} ", if i == 0 { "M" } else { "L" }).unwrap();
        }
        d.push('Z');
        writeln!(
            out,
            r#"<path d="{d}" fill="{}" data-label="{}"/>"#,
            color(r.label),
            r.label
        )
        .unwrap();
    }
    out.push_str("</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    let left = width - LEGEND_WIDTH + MARGIN;
    for label in 0..labels {
        let top = MARGIN + LEGEND_ROW * label as f64;
        writeln!(
            out,
            r##"<rect x="{left:.1}" y="{top:.1}" width="14" height="14" fill="{}" stroke="#000000" stroke-width="0.5"/>"##,
            color(label)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">label {label}</text>"#,
            left + 20.0,
            top + 11.0
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

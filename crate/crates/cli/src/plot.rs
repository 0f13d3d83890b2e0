//! Standalone SVG plots. Every function takes table rows exactly as they are
//! written to CSV, so re-rendering from a CSV file reproduces the image.

use std::ops::Range;

use impact_harvest::export::{CriticalRow, SweepRow, TrajectoryRow};
use plotters::prelude::*;

const SIZE: (u32, u32) = (900, 600);
const PALETTE: [RGBColor; 4] = [
    RGBColor(31, 90, 200),
    RGBColor(20, 150, 60),
    RGBColor(150, 60, 170),
    RGBColor(200, 120, 20),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchQuantity {
    Velocity,
    Phase,
    Interval,
    Delta,
    Eigenvalue,
    Energy,
}

type Getter = fn(&SweepRow) -> Option<f64>;

impl BranchQuantity {
    fn series(self) -> Vec<(&'static str, Getter, RGBColor)> {
        match self {
            BranchQuantity::Velocity => vec![
                ("v_k", |r| r.v_k, PALETTE[0]),
                ("v_k+1", |r| r.v_k1, PALETTE[1]),
                ("v_k+2", |r| r.v_k2, PALETTE[2]),
            ],
            BranchQuantity::Phase => vec![("phi_k", |r| r.phi_k, PALETTE[0])],
            BranchQuantity::Interval => vec![
                ("dt_k", |r| r.dt_k, PALETTE[0]),
                ("dt_k+1", |r| r.dt_k1, PALETTE[1]),
            ],
            BranchQuantity::Delta => vec![("Delta", |r| r.delta, PALETTE[0])],
            BranchQuantity::Eigenvalue => vec![
                ("Re lambda_1", |r| r.lambda1_re, PALETTE[0]),
                ("Re lambda_2", |r| r.lambda2_re, PALETTE[1]),
            ],
            BranchQuantity::Energy => vec![
                ("U_I avg", |r| r.u_i_avg, RGBColor(210, 30, 30)),
                ("U_T avg", |r| r.u_t_avg, RGBColor(0, 170, 190)),
            ],
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            BranchQuantity::Velocity => "impact speed |Z'|",
            BranchQuantity::Phase => "phase phi_k",
            BranchQuantity::Interval => "flight time",
            BranchQuantity::Delta => "Delta",
            BranchQuantity::Eigenvalue => "Re lambda",
            BranchQuantity::Energy => "averaged output",
        }
    }

    /// Stability boundary drawn as a reference line.
    fn reference(self) -> Option<f64> {
        match self {
            BranchQuantity::Delta => Some(0.0),
            BranchQuantity::Eigenvalue => Some(-1.0),
            _ => None,
        }
    }
}

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.05 * lo.abs().max(1.0)
    };
    (lo - pad)..(hi + pad)
}

fn marker_color(kind: &str) -> RGBColor {
    match kind {
        "G1" => BLACK,
        "G2" => RGBColor(220, 20, 20),
        _ => RGBColor(130, 130, 130),
    }
}

/// Polylines of consecutive points with the same stability flag. Each pair
/// of neighbours is solid only if both ends are stable.
fn stability_runs(points: &[(f64, f64, bool)]) -> Vec<(bool, Vec<(f64, f64)>)> {
    let mut runs: Vec<(bool, Vec<(f64, f64)>)> = Vec::new();
    for w in points.windows(2) {
        let solid = w[0].2 && w[1].2;
        match runs.last_mut() {
            Some((s, pts)) if *s == solid => pts.push((w[1].0, w[1].1)),
            _ => runs.push((solid, vec![(w[0].0, w[0].1), (w[1].0, w[1].1)])),
        }
    }
    runs
}

/// Branch diagram against `d`: analytic families as solid (stable) and
/// dashed (unstable or non-physical) lines, simulated samples as circles,
/// critical points as vertical lines.
pub fn branch_svg(
    rows: &[SweepRow],
    markers: &[CriticalRow],
    quantity: BranchQuantity,
    title: &str,
) -> String {
    let series = quantity.series();
    let x_range = span(rows.iter().map(|r| r.d).chain(markers.iter().map(|m| m.d)));
    let y_range = span(
        rows.iter()
            .flat_map(|r| series.iter().map(move |(_, g, _)| g(r).unwrap_or(f64::NAN)))
            .chain(quantity.reference()),
    );

    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, SIZE).into_drawing_area();
        root.fill(&WHITE).expect("svg fill");
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(65)
            .build_cartesian_2d(x_range.clone(), y_range.clone())
            .expect("chart");
        chart
            .configure_mesh()
            .x_desc("d")
            .y_desc(quantity.axis_label())
            .light_line_style(WHITE)
            .draw()
            .expect("mesh");

        if let Some(y0) = quantity.reference() {
            chart
                .draw_series(DashedLineSeries::new(
                    vec![(x_range.start, y0), (x_range.end, y0)],
                    8,
                    4,
                    RGBColor(220, 20, 20).stroke_width(1),
                ))
                .expect("reference");
        }

        let mut families: Vec<&str> = rows
            .iter()
            .filter(|r| r.source == "analytic")
            .map(|r| r.orbit_type.as_str())
            .collect();
        families.sort_unstable();
        families.dedup();
        for (name, get, color) in &series {
            let mut first = true;
            for family in &families {
                let mut pts: Vec<(f64, f64, bool)> = rows
                    .iter()
                    .filter(|r| r.source == "analytic" && r.orbit_type == *family)
                    .filter_map(|r| get(r).map(|y| (r.d, y, r.is_stable())))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (solid, line) in stability_runs(&pts) {
                    let style = color.stroke_width(2);
                    let drawn = if solid {
                        chart
                            .draw_series(LineSeries::new(line, style))
                            .expect("line")
                    } else {
                        chart
                            .draw_series(DashedLineSeries::new(line, 6, 4, style))
                            .expect("dashed")
                    };
                    if first {
                        let c = *color;
                        drawn.label(*name).legend(move |(x, y)| {
                            PathElement::new(vec![(x, y), (x + 20, y)], c.stroke_width(2))
                        });
                        first = false;
                    }
                }
            }
            let sims: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.source == "simulated")
                .filter_map(|r| get(r).map(|y| (r.d, y)))
                .collect();
            if !sims.is_empty() {
                let drawn = chart
                    .draw_series(
                        sims.into_iter()
                            .map(|p| Circle::new(p, 3, BLACK.stroke_width(1))),
                    )
                    .expect("points");
                if first {
                    let c = *color;
                    drawn
                        .label(*name)
                        .legend(move |(x, y)| Circle::new((x + 10, y), 3, c.stroke_width(1)));
                }
            }
        }

        for m in markers {
            let c = marker_color(&m.kind);
            chart
                .draw_series(LineSeries::new(
                    vec![(m.d, y_range.start), (m.d, y_range.end)],
                    c.stroke_width(1),
                ))
                .expect("marker");
            chart
                .draw_series(std::iter::once(Text::new(
                    m.kind.clone(),
                    (m.d, y_range.end),
                    ("sans-serif", 13).into_font().color(&c),
                )))
                .expect("marker label");
        }

        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .position(SeriesLabelPosition::UpperRight)
            .draw()
            .expect("legend");
        root.present().expect("svg");
    }
    out
}

/// `Z'` against `Z` with the barriers drawn at `Z = ±d/2`.
pub fn phase_portrait_svg(rows: &[TrajectoryRow], d: f64, title: &str) -> String {
    let x_range = span(rows.iter().map(|r| r.z).chain([-0.5 * d, 0.5 * d]));
    let y_range = span(rows.iter().map(|r| r.zdot));
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, SIZE).into_drawing_area();
        root.fill(&WHITE).expect("svg fill");
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(65)
            .build_cartesian_2d(x_range, y_range.clone())
            .expect("chart");
        chart
            .configure_mesh()
            .x_desc("Z")
            .y_desc("Z'")
            .light_line_style(WHITE)
            .draw()
            .expect("mesh");
        for z in [-0.5 * d, 0.5 * d] {
            chart
                .draw_series(LineSeries::new(
                    vec![(z, y_range.start), (z, y_range.end)],
                    BLACK.stroke_width(1),
                ))
                .expect("barrier");
        }
        // impacts break the curve: split where the velocity jumps
        let mut piece: Vec<(f64, f64)> = Vec::new();
        let mut pieces = Vec::new();
        for w in rows.windows(2) {
            if piece.is_empty() {
                piece.push((w[0].z, w[0].zdot));
            }
            if w[1].t == w[0].t {
                pieces.push(std::mem::take(&mut piece));
            } else {
                piece.push((w[1].z, w[1].zdot));
            }
        }
        pieces.push(piece);
        for p in pieces.into_iter().filter(|p| p.len() > 1) {
            chart
                .draw_series(LineSeries::new(p, PALETTE[0].stroke_width(1)))
                .expect("orbit");
        }
        root.present().expect("svg");
    }
    out
}

/// Absolute displacements of the cylinder ends and the ball against time.
pub fn time_series_svg(rows: &[TrajectoryRow], title: &str) -> String {
    let x_range = span(rows.iter().map(|r| r.t));
    let y_range = span(rows.iter().flat_map(|r| [r.x_top, r.x_bottom, r.x_ball]));
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, SIZE).into_drawing_area();
        root.fill(&WHITE).expect("svg fill");
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(65)
            .build_cartesian_2d(x_range, y_range)
            .expect("chart");
        chart
            .configure_mesh()
            .x_desc("t")
            .y_desc("displacement")
            .light_line_style(WHITE)
            .draw()
            .expect("mesh");
        let blue = RGBColor(31, 90, 200);
        let red = RGBColor(210, 30, 30);
        chart
            .draw_series(LineSeries::new(
                rows.iter().map(|r| (r.t, r.x_top)),
                blue.stroke_width(2),
            ))
            .expect("top")
            .label("X* + d/2, X* - d/2")
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], blue.stroke_width(2))
            });
        chart
            .draw_series(LineSeries::new(
                rows.iter().map(|r| (r.t, r.x_bottom)),
                blue.stroke_width(2),
            ))
            .expect("bottom");
        chart
            .draw_series(LineSeries::new(
                rows.iter().map(|r| (r.t, r.x_ball)),
                red.stroke_width(2),
            ))
            .expect("ball")
            .label("x*")
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], red.stroke_width(2)));
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .expect("legend");
        root.present().expect("svg");
    }
    out
}

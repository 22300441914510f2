//! SVG rendering of pre-fold grids and folded bi-linear layouts.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::layout::{ColumnKind, LayoutError, PhysicalLayout, QubitRole};

const CELL: f64 = 32.0;
const MARGIN: f64 = 40.0;
const RADIUS: f64 = 7.0;
const RAIL_GAP: f64 = 150.0;

fn role_fill(role: QubitRole) -> &'static str {
    match role {
        QubitRole::Data => "#f5a623",
        QubitRole::SyndromeX => "#4a90d9",
        QubitRole::SyndromeZ => "#5cb85c",
    }
}

/// Render a layout as an SVG document.
///
/// Pre-fold layouts are drawn as the 2D grid with logical-block regions and
/// spacer columns highlighted; folded layouts are drawn as two rails with one
/// polyline per resonator and a tick mark per airbridge hop.
pub fn emit_svg(layout: &PhysicalLayout) -> Result<String, LayoutError> {
    if layout.qubits.is_empty() {
        return Err(LayoutError::EmptyLayout);
    }
    if layout.is_folded() {
        Ok(render_folded(layout))
    } else {
        Ok(render_prefold(layout))
    }
}

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    )
}

fn block_and_spacer_rects(layout: &PhysicalLayout, out: &mut String, height: f64) {
    let spec = &layout.spec;
    let m = spec.rows() as f64;
    for block in 0..spec.n {
        let start = (block * (spec.rows() + 1)) as f64;
        let x = MARGIN + start * CELL - CELL / 2.0;
        let w = m * CELL;
        let _ = writeln!(
            out,
            "  <rect class=\"block-region\" x=\"{x:.1}\" y=\"{:.1}\" width=\"{w:.1}\" \
             height=\"{height:.1}\" fill=\"#f6f1e7\" stroke=\"none\"/>",
            MARGIN - CELL / 2.0
        );
    }
    for col in 0..spec.columns() {
        if matches!(spec.column_kind(col), ColumnKind::Spacer) {
            let x = MARGIN + col as f64 * CELL - CELL / 2.0;
            let _ = writeln!(
                out,
                "  <rect class=\"spacer\" x=\"{x:.1}\" y=\"{:.1}\" width=\"{CELL:.1}\" \
                 height=\"{height:.1}\" fill=\"#fbe3e4\" stroke=\"none\"/>",
                MARGIN - CELL / 2.0
            );
        }
    }
}

fn render_prefold(layout: &PhysicalLayout) -> String {
    let spec = &layout.spec;
    let width = MARGIN * 2.0 + (spec.columns() - 1) as f64 * CELL;
    let height = MARGIN * 2.0 + (spec.rows() - 1) as f64 * CELL;
    let pos: HashMap<u32, (f64, f64)> = layout
        .qubits
        .iter()
        .map(|q| {
            let (r, c) = q.grid_pos;
            (
                q.id,
                (MARGIN + c as f64 * CELL, MARGIN + r as f64 * CELL),
            )
        })
        .collect();

    let mut out = svg_header(width, height);
    block_and_spacer_rects(layout, &mut out, height - MARGIN);

    for edge in &layout.resonators {
        let (x1, y1) = pos[&edge.endpoints.0];
        let (x2, y2) = pos[&edge.endpoints.1];
        let dash = if edge.active { "" } else { " stroke-dasharray=\"4 3\"" };
        let _ = writeln!(
            out,
            "  <line class=\"resonator\" x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" \
             y2=\"{y2:.1}\" stroke=\"#888888\" stroke-width=\"1.5\"{dash}/>"
        );
        airbridge_marks(&mut out, edge.crossings, x1, y1, x2, y2);
    }

    for q in &layout.qubits {
        let (x, y) = pos[&q.id];
        let _ = writeln!(
            out,
            "  <circle class=\"qubit\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{RADIUS}\" \
             fill=\"{}\" stroke=\"#333333\"/>",
            role_fill(q.role)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn render_folded(layout: &PhysicalLayout) -> String {
    let (r0, r1) = layout.rail_sizes();
    let longest = r0.max(r1) as f64;
    let step = 24.0;
    let width = MARGIN * 2.0 + (longest - 1.0).max(1.0) * step;
    let height = MARGIN * 2.0 + RAIL_GAP;
    let rail_y = [MARGIN, MARGIN + RAIL_GAP];

    let pos: HashMap<u32, (f64, f64)> = layout
        .qubits
        .iter()
        .map(|q| {
            let (rail, idx) = q.folded_pos.unwrap();
            (
                q.id,
                (MARGIN + idx as f64 * step, rail_y[rail as usize]),
            )
        })
        .collect();

    let mut out = svg_header(width, height);

    // Logical-block bands along each rail.
    let spec = &layout.spec;
    for block in 0..spec.n {
        for rail in 0..2u8 {
            let idxs: Vec<u32> = layout
                .qubits
                .iter()
                .filter(|q| {
                    matches!(spec.column_kind(q.grid_pos.1),
                             ColumnKind::Block { block: b, .. } if b == block)
                        && q.folded_pos.unwrap().0 == rail
                })
                .map(|q| q.folded_pos.unwrap().1)
                .collect();
            let (Some(&lo), Some(&hi)) = (idxs.iter().min(), idxs.iter().max()) else {
                continue;
            };
            let x = MARGIN + lo as f64 * step - step / 2.0;
            let w = (hi - lo) as f64 * step + step;
            let y = rail_y[rail as usize] - 14.0;
            let _ = writeln!(
                out,
                "  <rect class=\"block-region\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" \
                 height=\"28\" fill=\"#f6f1e7\" stroke=\"none\"/>"
            );
        }
    }

    for edge in &layout.resonators {
        let (x1, y1) = pos[&edge.endpoints.0];
        let (x2, y2) = pos[&edge.endpoints.1];
        let dash = if edge.active { "" } else { " stroke-dasharray=\"4 3\"" };
        if (y1 - y2).abs() < f64::EPSILON {
            // Intra-rail link: a shallow arc outside the rail.
            let bulge = if y1 <= MARGIN + 1.0 { -18.0 } else { 18.0 };
            let _ = writeln!(
                out,
                "  <path class=\"resonator\" d=\"M {x1:.1} {y1:.1} Q {:.1} {:.1} {x2:.1} {y2:.1}\" \
                 fill=\"none\" stroke=\"#888888\" stroke-width=\"1.5\"{dash}/>",
                (x1 + x2) / 2.0,
                y1 + bulge
            );
        } else {
            let _ = writeln!(
                out,
                "  <line class=\"resonator\" x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" \
                 y2=\"{y2:.1}\" stroke=\"#888888\" stroke-width=\"1.5\"{dash}/>"
            );
            airbridge_marks(&mut out, edge.crossings, x1, y1, x2, y2);
        }
    }

    for q in &layout.qubits {
        let (x, y) = pos[&q.id];
        let spacer = matches!(spec.column_kind(q.grid_pos.1), ColumnKind::Spacer);
        if spacer {
            let _ = writeln!(
                out,
                "  <circle class=\"spacer\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{:.1}\" \
                 fill=\"none\" stroke=\"#d9534f\" stroke-width=\"2\"/>",
                RADIUS + 3.0
            );
        }
        let _ = writeln!(
            out,
            "  <circle class=\"qubit\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{RADIUS}\" \
             fill=\"{}\" stroke=\"#333333\"/>",
            role_fill(q.role)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One small marker per airbridge hop, spread along the wire.
fn airbridge_marks(out: &mut String, crossings: u32, x1: f64, y1: f64, x2: f64, y2: f64) {
    for k in 0..crossings {
        let t = (k as f64 + 1.0) / (crossings as f64 + 1.0);
        let x = x1 + (x2 - x1) * t;
        let y = y1 + (y2 - y1) * t;
        let _ = writeln!(
            out,
            "  <circle class=\"airbridge\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"2.5\" \
             fill=\"#ffffff\" stroke=\"#d9534f\" stroke-width=\"1\"/>"
        );
    }
}

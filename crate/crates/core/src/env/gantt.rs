use std::fmt::Write as _;

use super::{ScheduleEntry, State};
use crate::instances::Instance;

const ROW_H: f64 = 28.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const WIDTH: f64 = 800.0;

// Job colours cycle through this palette.
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// SVG 1.1 Gantt chart of a (partial) schedule: one row per machine, one
/// labelled box per entry.
pub fn export_gantt(state: &State) -> String {
    gantt_svg(state.instance(), state.entries())
}

pub fn gantt_svg(inst: &Instance, entries: &[ScheduleEntry]) -> String {
    let m = inst.n_machines();
    let span = entries.iter().map(|e| e.end).fold(0.0, f64::max);
    let scale = if span > 0.0 { WIDTH / span } else { 1.0 };
    let height = TOP + ROW_H * m as f64 + 40.0;
    let total_w = LEFT + WIDTH + 20.0;

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{total_w}" height="{height}" viewBox="0 0 {total_w} {height}" font-family="sans-serif" font-size="10">"#
    )
    .unwrap();

    let axis_y = TOP + ROW_H * m as f64;
    writeln!(
        svg,
        r#"<g class="axes"><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{axis_y}" stroke="black"/><line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        LEFT + WIDTH
    )
    .unwrap();
    for mach in 0..m {
        let y = TOP + ROW_H * (mach as f64 + 0.5) + 3.0;
        writeln!(svg, r#"<text x="4" y="{y}">M{mach}</text>"#).unwrap();
    }
    let ticks = 5;
    for t in 0..=ticks {
        let v = span * t as f64 / ticks as f64;
        let x = LEFT + v * scale;
        writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{axis_y}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{v:.1}</text>"#,
            axis_y + 4.0,
            axis_y + 16.0
        )
        .unwrap();
    }
    writeln!(svg, "</g>").unwrap();

    writeln!(svg, r#"<g class="boxes">"#).unwrap();
    for e in entries {
        let x = LEFT + e.start * scale;
        let w = (e.end - e.start) * scale;
        let y = TOP + ROW_H * e.machine as f64 + 3.0;
        let colour = PALETTE[e.job % PALETTE.len()];
        writeln!(
            svg,
            r#"<rect class="op" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="{colour}" stroke="black"><title>J{} O{} [{:.1}, {:.1}]</title></rect><text x="{:.2}" y="{:.2}" text-anchor="middle">J{}.{}</text>"#,
            ROW_H - 6.0,
            e.job,
            e.op,
            e.start,
            e.end,
            x + w / 2.0,
            y + ROW_H / 2.0,
            e.job,
            e.op
        )
        .unwrap();
    }
    writeln!(svg, "</g>\n</svg>").unwrap();
    svg
}

//! Top-down SVG renderings of scenes and predictions.
//!
//! Screen `x` follows the runway axis and screen `y` points to its right, so
//! the picture is a plan view. Colours: observed history blue, samples green
//! and cyan, the best sample black, ground truth red.

use std::fmt::Write;

use thiserror::Error;

use crate::model::PredictionSet;
use crate::scene::Scene;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;
const SAMPLE_COLOURS: [&str; 2] = ["#2ca02c", "#17becf"];

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
}

struct Frame {
    min: [f64; 2],
    scale: f64,
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a [f64; 3]>) -> Option<Frame> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !lo[0].is_finite() {
            return None;
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
        Some(Frame {
            min: lo,
            scale: (SIZE - 2.0 * MARGIN) / span,
        })
    }

    fn map(&self, p: &[f64; 3]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.min[0]) * self.scale,
            MARGIN + (p[1] - self.min[1]) * self.scale,
        )
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[[f64; 3]], colour: &str, class: &str, width: f64) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = frame.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    );
}

fn open(out: &mut String, title: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    // 1 km scale bar.
    let len = 1000.0 * frame.scale;
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="grey"/><text x="{MARGIN}" y="{ty:.2}" font-size="12" fill="grey">1 km</text>"#,
        y = SIZE - MARGIN / 2.0,
        x2 = MARGIN + len,
        ty = SIZE - MARGIN / 2.0 - 4.0,
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One blue polyline per agent.
pub fn scene_svg(scene: &Scene) -> Result<String, PlotError> {
    let tracks: Vec<Vec<[f64; 3]>> = scene
        .agents()
        .values()
        .map(|pts| pts.iter().map(|p| p.pos()).collect())
        .collect();
    let frame = Frame::fit(tracks.iter().flatten()).ok_or(PlotError::Empty)?;
    let mut out = String::new();
    open(&mut out, &format!("scene {}", scene.scene_id), &frame);
    for t in &tracks {
        polyline(&mut out, &frame, t, "#1f77b4", "track", 1.5);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// History, every sample, the best sample per agent and the truth when known.
/// Each agent gets exactly one `sample` polyline per sample; the one with the
/// lowest ADE is drawn black.
pub fn prediction_svg(set: &PredictionSet) -> Result<String, PlotError> {
    if set.history.is_empty() || set.samples.is_empty() {
        return Err(PlotError::Empty);
    }
    let all = set
        .history
        .iter()
        .chain(&set.truth)
        .chain(set.samples.iter().flat_map(|s| &s.positions))
        .flatten();
    let frame = Frame::fit(all).ok_or(PlotError::Empty)?;
    let mut out = String::new();
    open(&mut out, &format!("scene {} t={}", set.scene_id, set.start_t), &frame);
    for a in 0..set.history.len() {
        let best = set.truth.get(a).filter(|t| !t.is_empty()).and_then(|truth| {
            let ades: Vec<f64> = set
                .samples
                .iter()
                .map(|s| crate::eval::ade_fde(&s.positions[a], truth).map_or(f64::INFINITY, |r| r.0))
                .collect();
            (0..ades.len()).min_by(|&i, &j| ades[i].total_cmp(&ades[j]))
        });
        let _ = writeln!(out, r#"<g class="agent" id="{}">"#, escape(&set.agent_ids[a]));
        for (i, s) in set.samples.iter().enumerate() {
            if Some(i) != best {
                polyline(&mut out, &frame, &s.positions[a], SAMPLE_COLOURS[i % 2], "sample", 1.0);
            }
        }
        if let Some(b) = best {
            polyline(&mut out, &frame, &set.samples[b].positions[a], "black", "sample best", 1.5);
            polyline(&mut out, &frame, &set.truth[a], "#d62728", "truth", 1.5);
        }
        polyline(&mut out, &frame, &set.history[a], "#1f77b4", "history", 2.0);
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

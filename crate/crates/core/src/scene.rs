//! Scenes: contiguous multi-agent episodes on a 1 Hz grid, and their CSV form.
//!
//! Columns: `scene_id,t,agent_id,x,y,z,u_along,u_cross`. Rows are ordered by
//! scene, agent id, then time. Floats use shortest round-trip formatting so a
//! written file reads back bit-identical.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::WindContext;

pub const SCENE_HEADER: &str = "scene_id,t,agent_id,x,y,z,u_along,u_cross";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: i64,
    pub agent_id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TrackPoint {
    pub fn pos(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: usize,
    pub start_t: i64,
    /// Points sorted by agent id, then time.
    pub points: Vec<TrackPoint>,
    /// One entry per second from `start_t` to `end_t()` inclusive.
    pub wind: Vec<WindContext>,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scene {scene_id}: {message}")]
    Invalid { scene_id: usize, message: String },
}

impl Scene {
    /// Build a scene from points and a wind lookup, sorting the points.
    pub fn new(
        scene_id: usize,
        mut points: Vec<TrackPoint>,
        wind_at: impl Fn(i64) -> WindContext,
    ) -> Scene {
        points.sort_by(|a, b| a.agent_id.cmp(&b.agent_id).then(a.t.cmp(&b.t)));
        let start_t = points.iter().map(|p| p.t).min().unwrap_or(0);
        let end_t = points.iter().map(|p| p.t).max().unwrap_or(-1);
        let wind = (start_t..=end_t).map(wind_at).collect();
        Scene {
            scene_id,
            start_t,
            points,
            wind,
        }
    }

    pub fn duration_s(&self) -> usize {
        self.wind.len()
    }

    pub fn end_t(&self) -> i64 {
        self.start_t + self.wind.len() as i64 - 1
    }

    pub fn wind_at(&self, t: i64) -> Option<&WindContext> {
        if t < self.start_t {
            return None;
        }
        self.wind.get((t - self.start_t) as usize)
    }

    /// Points grouped per agent, in id order.
    pub fn agents(&self) -> BTreeMap<&str, Vec<&TrackPoint>> {
        let mut out: BTreeMap<&str, Vec<&TrackPoint>> = BTreeMap::new();
        for p in &self.points {
            out.entry(p.agent_id.as_str()).or_default().push(p);
        }
        out
    }

    /// Check the scene invariants: every second occupied, 1 Hz steps per
    /// agent without duplicates, finite coordinates, wind covering the span.
    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |message: String| SceneError::Invalid {
            scene_id: self.scene_id,
            message,
        };
        if self.points.is_empty() {
            return Err(invalid("no points".into()));
        }
        let mut occupied = vec![false; self.duration_s()];
        for p in &self.points {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(invalid(format!("non-finite point at t={}", p.t)));
            }
            let Some(slot) = p
                .t
                .checked_sub(self.start_t)
                .and_then(|d| occupied.get_mut(d as usize))
            else {
                return Err(invalid(format!("point at t={} outside wind span", p.t)));
            };
            *slot = true;
        }
        if let Some(i) = occupied.iter().position(|o| !o) {
            return Err(invalid(format!(
                "no agent present at t={}",
                self.start_t + i as i64
            )));
        }
        for w in self.points.windows(2) {
            if w[0].agent_id == w[1].agent_id && w[1].t <= w[0].t {
                return Err(invalid(format!(
                    "agent {} not strictly increasing in time at t={}",
                    w[0].agent_id, w[1].t
                )));
            }
        }
        Ok(())
    }
}

/// Write scenes as CSV with a header line.
pub fn write_scenes<W: Write>(mut out: W, scenes: &[Scene]) -> std::io::Result<()> {
    writeln!(out, "{SCENE_HEADER}")?;
    for s in scenes {
        for p in &s.points {
            let w = s.wind_at(p.t).copied().unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.scene_id, p.t, p.agent_id, p.x, p.y, p.z, w.u_along, w.u_cross
            )?;
        }
    }
    Ok(())
}

pub fn scenes_to_string(scenes: &[Scene]) -> String {
    let mut buf = Vec::new();
    write_scenes(&mut buf, scenes).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Read scenes from CSV. Scenes come back in order of first appearance.
pub fn read_scenes<R: BufRead>(reader: R) -> Result<Vec<Scene>, SceneError> {
    let mut order: Vec<usize> = Vec::new();
    let mut rows: BTreeMap<usize, Vec<(TrackPoint, WindContext)>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("scene_id")) {
            continue;
        }
        let parse_err = |message: String| SceneError::Parse {
            line: lineno,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(parse_err(format!("expected 8 fields, got {}", f.len())));
        }
        let num = |i: usize| -> Result<f64, SceneError> {
            f[i].parse::<f64>()
                .map_err(|_| parse_err(format!("bad number `{}`", f[i])))
        };
        let scene_id: usize = f[0]
            .parse()
            .map_err(|_| parse_err(format!("bad scene id `{}`", f[0])))?;
        let t: i64 = f[1]
            .parse()
            .map_err(|_| parse_err(format!("bad time `{}`", f[1])))?;
        let point = TrackPoint {
            t,
            agent_id: f[2].to_string(),
            x: num(3)?,
            y: num(4)?,
            z: num(5)?,
        };
        let wind = WindContext {
            u_along: num(6)?,
            u_cross: num(7)?,
            variable: false,
        };
        if !rows.contains_key(&scene_id) {
            order.push(scene_id);
        }
        rows.entry(scene_id).or_default().push((point, wind));
    }
    let mut scenes = Vec::with_capacity(order.len());
    for id in order {
        let rows = rows.remove(&id).expect("id recorded");
        let mut winds: BTreeMap<i64, WindContext> = BTreeMap::new();
        let mut points = Vec::with_capacity(rows.len());
        for (p, w) in rows {
            winds.entry(p.t).or_insert(w);
            points.push(p);
        }
        let scene = Scene::new(id, points, |t| winds.get(&t).copied().unwrap_or_default());
        scenes.push(scene);
    }
    Ok(scenes)
}

pub fn read_scene_file(path: &std::path::Path) -> Result<Vec<Scene>, SceneError> {
    let file = std::fs::File::open(path)?;
    read_scenes(std::io::BufReader::new(file))
}

//! Fixed-horizon multi-agent windows cut from scenes, and day-based splits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HorizonConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    pub min_agents: usize,
    pub stride: usize,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig {
            t_obs: 11,
            t_pred: 120,
            min_agents: 1,
            stride: 1,
        }
    }
}

#[allow(clippy::len_without_is_empty)]
impl HorizonConfig {
    pub fn len(&self) -> usize {
        self.t_obs + self.t_pred
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.t_obs < 2 {
            // the rollout needs the last two observed points
            return Err(DatasetError::Config("t_obs must be >= 2".into()));
        }
        if self.t_pred == 0 || self.min_agents == 0 || self.stride == 0 {
            return Err(DatasetError::Config(
                "t_pred, min_agents and stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid horizon config: {0}")]
    Config(String),
    #[error("day `{0}` listed in both train and test")]
    Overlap(String),
    #[error("day `{0}` not found under {1}")]
    MissingDay(String, PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One training or evaluation sample. Every agent is present at all
/// `t_obs + t_pred` steps. Positions are absolute local metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceWindow {
    pub scene_id: usize,
    pub start_t: i64,
    pub agent_ids: Vec<String>,
    /// `[agent][step]`, `t_obs` steps.
    pub history: Vec<Vec<[f64; 3]>>,
    /// `[agent][step]`, `t_pred` steps.
    pub future: Vec<Vec<[f64; 3]>>,
    /// `[agent][step]` (u_along, u_cross), `t_obs` steps, same for all agents.
    pub wind_hist: Vec<Vec<[f64; 2]>>,
}

impl SequenceWindow {
    pub fn agents(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn t_obs(&self) -> usize {
        self.history.first().map_or(0, Vec::len)
    }

    pub fn t_pred(&self) -> usize {
        self.future.first().map_or(0, Vec::len)
    }
}

/// Per-agent contiguous runs of positions: (start time, positions).
fn agent_runs(scene: &Scene) -> BTreeMap<&str, Vec<(i64, Vec<[f64; 3]>)>> {
    let mut runs: BTreeMap<&str, Vec<(i64, Vec<[f64; 3]>)>> = BTreeMap::new();
    for p in &scene.points {
        let agent = runs.entry(p.agent_id.as_str()).or_default();
        match agent.last_mut() {
            Some((start, pos)) if *start + pos.len() as i64 == p.t => pos.push(p.pos()),
            _ => agent.push((p.t, vec![p.pos()])),
        }
    }
    runs
}

/// Slide a `t_obs + t_pred` window across the scene. Only agents present for
/// the whole window are kept; a window is emitted when at least `min_agents`
/// qualify. Agents are ordered by id.
pub fn make_windows(scene: &Scene, cfg: &HorizonConfig) -> Vec<SequenceWindow> {
    let len = cfg.len() as i64;
    let runs = agent_runs(scene);
    let mut out = Vec::new();
    let mut start = scene.start_t;
    while start + len - 1 <= scene.end_t() {
        let mut ids = Vec::new();
        let mut history = Vec::new();
        let mut future = Vec::new();
        for (id, agent) in &runs {
            let Some((run_start, pos)) = agent
                .iter()
                .find(|(s, p)| *s <= start && start + len <= *s + p.len() as i64)
            else {
                continue;
            };
            let off = (start - run_start) as usize;
            ids.push(id.to_string());
            history.push(pos[off..off + cfg.t_obs].to_vec());
            future.push(pos[off + cfg.t_obs..off + cfg.len()].to_vec());
        }
        if ids.len() >= cfg.min_agents {
            let wind: Vec<[f64; 2]> = (0..cfg.t_obs as i64)
                .map(|k| {
                    let w = scene.wind_at(start + k).copied().unwrap_or_default();
                    [w.u_along, w.u_cross]
                })
                .collect();
            out.push(SequenceWindow {
                scene_id: scene.scene_id,
                start_t: start,
                wind_hist: vec![wind; ids.len()],
                agent_ids: ids,
                history,
                future,
            });
        }
        start += cfg.stride as i64;
    }
    out
}

/// Scene files of the listed days. A day is a sub-directory of `root`; its
/// scene files are the `*.csv` files inside, sorted by name.
pub fn day_files(root: &Path, days: &[String]) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files = Vec::new();
    for day in days {
        let dir = root.join(day);
        if !dir.is_dir() {
            return Err(DatasetError::MissingDay(day.clone(), root.to_path_buf()));
        }
        let mut day_files: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        day_files.sort();
        files.extend(day_files);
    }
    Ok(files)
}

/// All day directories under `root`, sorted.
pub fn list_days(root: &Path) -> Result<Vec<String>, DatasetError> {
    let mut days: Vec<String> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    days.sort();
    Ok(days)
}

/// Resolve train and test day lists to scene files. The lists must be
/// disjoint.
pub fn split_days(
    root: &Path,
    train_days: &[String],
    test_days: &[String],
) -> Result<(Vec<PathBuf>, Vec<PathBuf>), DatasetError> {
    let train: BTreeSet<&String> = train_days.iter().collect();
    if let Some(day) = test_days.iter().find(|d| train.contains(d)) {
        return Err(DatasetError::Overlap(day.clone()));
    }
    Ok((day_files(root, train_days)?, day_files(root, test_days)?))
}

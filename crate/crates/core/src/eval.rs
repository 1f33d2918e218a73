//! Displacement metrics, best-of-N scoring, baselines and the evaluation loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SequenceWindow;
use crate::kinematics::verlet_positions;
use crate::model::{Model, ModelError, PredictionSample, PredictionSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction has {pred} steps, truth has {truth}")]
    Length { pred: usize, truth: usize },
    #[error("no samples to score")]
    NoSamples,
    #[error("nearest-neighbour index is empty")]
    EmptyIndex,
    #[error("empty test set")]
    EmptyTestSet,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Average and final displacement error in kilometres.
pub fn ade_fde(pred: &[[f64; 3]], truth: &[[f64; 3]]) -> Result<(f64, f64), EvalError> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(EvalError::Length {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let dist = |a: &[f64; 3], b: &[f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    let total: f64 = pred.iter().zip(truth).map(|(a, b)| dist(a, b)).sum();
    let ade = total / pred.len() as f64;
    let fde = dist(pred.last().unwrap(), truth.last().unwrap());
    Ok((ade / 1000.0, fde / 1000.0))
}

/// Lowest ADE among the samples, paired with that sample's FDE. Ties keep the
/// earliest sample.
pub fn best_of_n(samples: &[Vec<[f64; 3]>], truth: &[[f64; 3]]) -> Result<(f64, f64), EvalError> {
    let mut best: Option<(f64, f64)> = None;
    for s in samples {
        let (ade, fde) = ade_fde(s, truth)?;
        if best.is_none_or(|(b, _)| ade < b) {
            best = Some((ade, fde));
        }
    }
    best.ok_or(EvalError::NoSamples)
}

/// Zero-acceleration Verlet rollout for every agent.
pub fn baseline_const_velocity(window: &SequenceWindow, t_pred: usize, dt: f64) -> PredictionSample {
    let zeros = vec![[0.0; 3]; t_pred];
    let positions = window
        .history
        .iter()
        .map(|h| verlet_positions(h[h.len() - 2], h[h.len() - 1], &zeros, dt))
        .collect();
    PredictionSample {
        accelerations: vec![zeros; window.agents()],
        positions,
    }
}

/// Training (history, future) pairs for the nearest-neighbour baseline.
#[derive(Debug, Clone, Default)]
pub struct NearestNeighborIndex {
    histories: Vec<Vec<[f64; 3]>>,
    futures: Vec<Vec<[f64; 3]>>,
}

impl NearestNeighborIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_windows<'a>(windows: impl IntoIterator<Item = &'a SequenceWindow>) -> Self {
        let mut idx = Self::new();
        for w in windows {
            for a in 0..w.agents() {
                idx.push(w.history[a].clone(), w.future[a].clone());
            }
        }
        idx
    }

    pub fn push(&mut self, history: Vec<[f64; 3]>, future: Vec<[f64; 3]>) {
        self.histories.push(history);
        self.futures.push(future);
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn future(&self, i: usize) -> &[[f64; 3]] {
        &self.futures[i]
    }

    /// Entry whose history has the smallest summed squared distance to
    /// `query`; ties keep the lowest index.
    pub fn nearest(&self, query: &[[f64; 3]]) -> Result<usize, EvalError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, h) in self.histories.iter().enumerate() {
            if h.len() != query.len() {
                return Err(EvalError::Length {
                    pred: query.len(),
                    truth: h.len(),
                });
            }
            let d: f64 = h
                .iter()
                .zip(query)
                .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                .sum();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i).ok_or(EvalError::EmptyIndex)
    }

    pub fn predict(&self, window: &SequenceWindow) -> Result<PredictionSample, EvalError> {
        let mut positions = Vec::with_capacity(window.agents());
        for h in &window.history {
            positions.push(self.futures[self.nearest(h)?].clone());
        }
        let steps = positions.first().map_or(0, Vec::len);
        Ok(PredictionSample {
            accelerations: vec![vec![[0.0; 3]; steps]; window.agents()],
            positions,
        })
    }
}

/// Anything that can produce `n` futures for a window.
pub trait Predictor {
    fn name(&self) -> &'static str;
    fn predict(&self, window: &SequenceWindow, n: usize, seed: u64) -> Result<PredictionSet, EvalError>;
}

fn wrap(window: &SequenceWindow, samples: Vec<PredictionSample>) -> PredictionSet {
    PredictionSet {
        scene_id: window.scene_id,
        start_t: window.start_t,
        agent_ids: window.agent_ids.clone(),
        history: window.history.clone(),
        truth: window.future.clone(),
        samples,
    }
}

impl Predictor for Model {
    fn name(&self) -> &'static str {
        "trajairnet"
    }

    fn predict(&self, window: &SequenceWindow, n: usize, seed: u64) -> Result<PredictionSet, EvalError> {
        Ok(Model::predict(self, window, n, seed)?)
    }
}

/// Constant-velocity baseline.
#[derive(Debug, Clone, Copy)]
pub struct ConstantVelocity {
    pub dt: f64,
}

impl Predictor for ConstantVelocity {
    fn name(&self) -> &'static str {
        "const_velocity"
    }

    fn predict(&self, window: &SequenceWindow, n: usize, _seed: u64) -> Result<PredictionSet, EvalError> {
        let s = baseline_const_velocity(window, window.t_pred(), self.dt);
        Ok(wrap(window, vec![s; n.max(1)]))
    }
}

impl Predictor for NearestNeighborIndex {
    fn name(&self) -> &'static str {
        "nearest_neighbor"
    }

    fn predict(&self, window: &SequenceWindow, n: usize, _seed: u64) -> Result<PredictionSet, EvalError> {
        let s = NearestNeighborIndex::predict(self, window)?;
        Ok(wrap(window, vec![s; n.max(1)]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub ade_km: f64,
    pub fde_km: f64,
    pub n_samples: usize,
    pub n_windows: usize,
    pub n_agents: usize,
}

/// Per-window seed for sampling, fixed by the run seed and window position.
pub fn window_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-agent best-of-N errors of one prediction set.
pub fn score_set(set: &PredictionSet) -> Result<Vec<(f64, f64)>, EvalError> {
    (0..set.agent_ids.len())
        .map(|a| {
            let samples: Vec<Vec<[f64; 3]>> = set.samples.iter().map(|s| s.positions[a].clone()).collect();
            best_of_n(&samples, &set.truth[a])
        })
        .collect()
}

/// Mean best-of-N ADE/FDE over every agent of every window.
pub fn evaluate<P: Predictor + ?Sized>(
    predictor: &P,
    windows: &[SequenceWindow],
    n: usize,
    seed: u64,
) -> Result<EvalResult, EvalError> {
    if windows.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let (mut ade, mut fde, mut agents) = (0.0, 0.0, 0usize);
    for (i, w) in windows.iter().enumerate() {
        let set = predictor.predict(w, n, window_seed(seed, i))?;
        for (a, f) in score_set(&set)? {
            ade += a;
            fde += f;
            agents += 1;
        }
    }
    Ok(EvalResult {
        ade_km: ade / agents as f64,
        fde_km: fde / agents as f64,
        n_samples: n,
        n_windows: windows.len(),
        n_agents: agents,
    })
}

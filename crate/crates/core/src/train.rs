//! Training loop: trajectory MSE plus the CVAE KL term, optimised with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SequenceWindow;
use crate::diff::checkpoint::Checkpoint;
use crate::diff::{AdamState, DiffError, Graph, Tensor, Var};
use crate::model::{standard_normal, Latent, Model, ModelConfig, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Windows per optimiser step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Stop after this many steps even if epochs remain.
    pub max_steps: Option<usize>,
    /// Rescale the gradient when its global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            batch_size: 16,
            learning_rate: 1e-4,
            max_steps: None,
            clip_norm: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTrainSet,
    #[error("non-finite loss at step {step}: {source}")]
    NonFinite {
        step: usize,
        /// Parameters as they were before the failing step.
        checkpoint: Box<Checkpoint>,
        source: DiffError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Loss terms of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_traj: f64,
    pub l_cvae: f64,
    pub l_total: f64,
}

/// Handles to the loss terms on a graph.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub l_traj: Var,
    pub l_cvae: Var,
    pub l_total: Var,
}

/// `L_total = L_traj + L_cvae`. `positions` are metres `[rows, t_pred * 3]`;
/// `target` is the future in network units (metres / `position_scale`) of the
/// same shape. The MSE is taken in network units over agents, steps and axes.
pub fn combined_loss(
    g: &mut Graph,
    positions: Var,
    target: Var,
    mu: Var,
    log_var: Var,
    position_scale: f64,
) -> Result<LossVars, DiffError> {
    let pred = g.scale(positions, 1.0 / position_scale)?;
    let l_traj = g.mse(pred, target)?;
    let l_cvae = g.gaussian_kl(mu, log_var)?;
    let l_total = g.add(l_traj, l_cvae)?;
    Ok(LossVars {
        l_traj,
        l_cvae,
        l_total,
    })
}

impl LossVars {
    pub fn report(&self, g: &Graph) -> LossReport {
        LossReport {
            l_traj: g.value(self.l_traj).item(),
            l_cvae: g.value(self.l_cvae).item(),
            l_total: g.value(self.l_total).item(),
        }
    }
}

/// Forward and backward pass on a batch with posterior sampling.
/// Returns the loss and one gradient per parameter.
pub fn batch_gradients(
    model: &Model,
    windows: &[&SequenceWindow],
    eps_seed: u64,
) -> Result<(LossReport, Vec<Tensor>), ModelError> {
    let inputs = model.gather(windows, true)?;
    let rows = inputs.rows();
    let eps = standard_normal(&[rows, model.config.cvae_latent_dim], eps_seed);
    let target = inputs
        .future
        .clone()
        .expect("gathered with future")
        .data()
        .to_vec();
    let mut g = Graph::new();
    let fwd = model.forward(&mut g, &inputs, Latent::Posterior(eps))?;
    let target = g.leaf(Tensor::new(vec![rows, model.config.t_pred * 3], target)?);
    let loss = combined_loss(
        &mut g,
        fwd.positions,
        target,
        fwd.mu.expect("posterior path"),
        fwd.log_var.expect("posterior path"),
        model.config.position_scale,
    )?;
    let mut grads = g.backward(loss.l_total)?;
    let per_param = fwd
        .params
        .iter()
        .zip(&model.params)
        .map(|(v, p)| grads.take(*v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok((loss.report(&g), per_param))
}

fn clip(grads: &mut [Tensor], max_norm: f64) {
    let norm = grads
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for t in grads.iter_mut() {
            for v in t.data_mut() {
                *v *= s;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    /// Loss of every optimiser step.
    pub history: Vec<LossReport>,
}

/// Train a freshly initialised model. Deterministic for a given seed.
pub fn train(windows: &[SequenceWindow], model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<Trained, TrainError> {
    let model = Model::new(model_cfg.clone(), cfg.seed)?;
    train_from(model, windows, cfg, |_, _| {})
}

/// Continue training `model`. `on_step` sees the step index and its loss.
pub fn train_from(
    mut model: Model,
    windows: &[SequenceWindow],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, &LossReport),
) -> Result<Trained, TrainError> {
    if windows.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let mut adam = AdamState::new(&model.params, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7a1a);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::new();
    let batch = cfg.batch_size.max(1);
    let mut step = 0usize;
    'epochs: for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let refs: Vec<&SequenceWindow> = chunk.iter().map(|&i| &windows[i]).collect();
            let eps_seed = rand::Rng::random::<u64>(&mut rng);
            let (report, mut grads) = match batch_gradients(&model, &refs, eps_seed) {
                Ok(r) => r,
                Err(ModelError::Diff(source)) => {
                    return Err(TrainError::NonFinite {
                        step,
                        checkpoint: Box::new(model.to_checkpoint(serde_json::json!({ "aborted_at_step": step }))?),
                        source,
                    })
                }
                Err(e) => return Err(e.into()),
            };
            if !report.l_total.is_finite() {
                return Err(TrainError::NonFinite {
                    step,
                    checkpoint: Box::new(model.to_checkpoint(serde_json::json!({ "aborted_at_step": step }))?),
                    source: DiffError::NonFinite { op: "loss" },
                });
            }
            if let Some(max) = cfg.clip_norm {
                clip(&mut grads, max);
            }
            adam.step(&mut model.params, &grads)?;
            on_step(step, &report);
            history.push(report);
            step += 1;
        }
    }
    Ok(Trained { model, history })
}

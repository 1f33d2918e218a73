//! The prediction network.
//!
//! Each agent's absolute history goes through a shared causal TCN and the wind
//! sequence through a 1-D CNN; the two encodings are concatenated. A
//! multi-head graph attention layer over all agents of a window adds social
//! context. A CVAE (posterior encoder during training, standard-normal prior
//! at test time) decodes the conditioning into a latent sample, an MLP maps it
//! to per-step accelerations, and a Verlet rollout turns those into positions.
//! Zero accelerations reproduce a constant-velocity forecast exactly.

mod layers;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SequenceWindow;
use crate::diff::checkpoint::{Checkpoint, CheckpointError};
use crate::diff::{DiffError, Graph, Tensor, Var};
use crate::provenance;

pub use layers::Layout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub tcn_channels: usize,
    pub tcn_kernel: usize,
    /// Layer `l` uses dilation `2^l`.
    pub tcn_layers: usize,
    pub cnn_channels: usize,
    pub cnn_kernel: usize,
    pub gat_heads: usize,
    pub gat_dim: usize,
    pub leaky_slope: f64,
    pub cvae_latent_dim: usize,
    pub mlp_hidden: usize,
    pub t_obs: usize,
    pub t_pred: usize,
    pub delta_t: f64,
    /// Metres per network input unit for positions.
    pub position_scale: f64,
    /// m/s per network input unit for wind.
    pub wind_scale: f64,
    /// m/s² per network output unit for accelerations.
    pub accel_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            tcn_channels: 32,
            tcn_kernel: 4,
            tcn_layers: 2,
            cnn_channels: 16,
            cnn_kernel: 3,
            gat_heads: 4,
            gat_dim: 32,
            leaky_slope: 0.2,
            cvae_latent_dim: 64,
            mlp_hidden: 64,
            t_obs: 11,
            t_pred: 120,
            delta_t: 1.0,
            position_scale: 1000.0,
            wind_scale: 10.0,
            accel_scale: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes = [
            ("tcn_channels", self.tcn_channels),
            ("tcn_kernel", self.tcn_kernel),
            ("tcn_layers", self.tcn_layers),
            ("cnn_channels", self.cnn_channels),
            ("cnn_kernel", self.cnn_kernel),
            ("gat_heads", self.gat_heads),
            ("gat_dim", self.gat_dim),
            ("cvae_latent_dim", self.cvae_latent_dim),
            ("mlp_hidden", self.mlp_hidden),
            ("t_pred", self.t_pred),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be positive")));
        }
        if self.t_obs < 2 {
            return Err(ModelError::Config("t_obs must be >= 2".into()));
        }
        // the data grid is 1 Hz
        if self.delta_t != 1.0 {
            return Err(ModelError::Config("delta_t must match the 1 Hz grid (1.0)".into()));
        }
        for (name, v) in [
            ("position_scale", self.position_scale),
            ("wind_scale", self.wind_scale),
            ("accel_scale", self.accel_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Width of `h_enc`.
    pub fn enc_dim(&self) -> usize {
        self.tcn_channels + self.cnn_channels
    }

    /// Width of `h_gat`.
    pub fn gat_out_dim(&self) -> usize {
        self.gat_heads * self.gat_dim
    }

    /// Width of the CVAE conditioning vector `h_enc ⊕ h_gat`.
    pub fn cond_dim(&self) -> usize {
        self.enc_dim() + self.gat_out_dim()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("checkpoint does not match: {0}")]
    Mismatch(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint metadata: {0}")]
    Meta(#[from] serde_json::Error),
}

/// Network weights plus the configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Vec<Tensor>,
}

/// How the CVAE latent is obtained for a forward pass.
#[derive(Debug, Clone)]
pub enum Latent {
    /// Training path: `z = mu + exp(log_var / 2) * eps` from the posterior
    /// encoder. `eps` is `[agents, latent]`.
    Posterior(Tensor),
    /// Test path: `z` drawn by the caller from the prior, `[agents, latent]`.
    Prior(Tensor),
}

/// Inputs gathered from a batch of windows, one row per agent.
#[derive(Debug, Clone)]
pub struct BatchInputs {
    /// Row ranges of each window.
    pub groups: Vec<std::ops::Range<usize>>,
    pub history: Tensor,
    pub wind: Tensor,
    pub future: Option<Tensor>,
    pub prev: Tensor,
    pub last: Tensor,
}

impl BatchInputs {
    pub fn rows(&self) -> usize {
        self.prev.shape()[0]
    }
}

/// Graph handles produced by a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub params: Vec<Var>,
    pub h_obs: Var,
    pub h_enc: Var,
    pub h_gat: Var,
    pub h_pred: Option<Var>,
    pub mu: Option<Var>,
    pub log_var: Option<Var>,
    pub z: Var,
    pub h_cvae: Var,
    /// `[agents, t_pred * 3]`, m/s².
    pub accel: Var,
    /// `[agents, t_pred * 3]`, metres.
    pub positions: Var,
    /// Per window, per head: `[A, A]` attention weights (row sums to 1).
    pub attention: Vec<Vec<Tensor>>,
}

/// One sampled future for every agent of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSample {
    /// `[agent][step]`, m/s².
    pub accelerations: Vec<Vec<[f64; 3]>>,
    /// `[agent][step]`, metres.
    pub positions: Vec<Vec<[f64; 3]>>,
}

/// `N` sampled futures for the agents of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub scene_id: usize,
    pub start_t: i64,
    pub agent_ids: Vec<String>,
    pub history: Vec<Vec<[f64; 3]>>,
    pub truth: Vec<Vec<[f64; 3]>>,
    pub samples: Vec<PredictionSample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    format: String,
    code_version: String,
    config_hash: String,
    config: ModelConfig,
    #[serde(default)]
    extra: serde_json::Value,
}

const CHECKPOINT_FORMAT: &str = "trajairnet";

impl Model {
    /// Fresh weights, uniformly initialised in `±1/sqrt(fan_in)`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model, ModelError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = layout.init(seed);
        Ok(Model {
            config,
            layout,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Stack windows into per-agent rows. Fails when a window's horizons
    /// disagree with the config.
    pub fn gather(&self, windows: &[&SequenceWindow], with_future: bool) -> Result<BatchInputs, ModelError> {
        let cfg = &self.config;
        let rows: usize = windows.iter().map(|w| w.agents()).sum();
        let mut groups = Vec::with_capacity(windows.len());
        let mut hist = Vec::with_capacity(rows * cfg.t_obs * 3);
        let mut wind = Vec::with_capacity(rows * cfg.t_obs * 2);
        let mut fut = Vec::with_capacity(if with_future { rows * cfg.t_pred * 3 } else { 0 });
        let mut prev = Vec::with_capacity(rows * 3);
        let mut last = Vec::with_capacity(rows * 3);
        let mut start = 0;
        for w in windows {
            if w.agents() == 0 {
                return Err(ModelError::Input("window without agents".into()));
            }
            if w.t_obs() != cfg.t_obs || (with_future && w.t_pred() != cfg.t_pred) {
                return Err(ModelError::Input(format!(
                    "window horizons {}+{} do not match model {}+{}",
                    w.t_obs(),
                    w.t_pred(),
                    cfg.t_obs,
                    cfg.t_pred
                )));
            }
            for a in 0..w.agents() {
                for p in &w.history[a] {
                    hist.extend(p.iter().map(|v| v / cfg.position_scale));
                }
                for u in &w.wind_hist[a] {
                    wind.extend(u.iter().map(|v| v / cfg.wind_scale));
                }
                if with_future {
                    for p in &w.future[a] {
                        fut.extend(p.iter().map(|v| v / cfg.position_scale));
                    }
                }
                prev.extend_from_slice(&w.history[a][cfg.t_obs - 2]);
                last.extend_from_slice(&w.history[a][cfg.t_obs - 1]);
            }
            groups.push(start..start + w.agents());
            start += w.agents();
        }
        Ok(BatchInputs {
            groups,
            history: Tensor::new(vec![rows, cfg.t_obs, 3], hist)?,
            wind: Tensor::new(vec![rows, cfg.t_obs, 2], wind)?,
            future: if with_future {
                Some(Tensor::new(vec![rows, cfg.t_pred, 3], fut)?)
            } else {
                None
            },
            prev: Tensor::new(vec![rows, 3], prev)?,
            last: Tensor::new(vec![rows, 3], last)?,
        })
    }

    /// Put every parameter on the graph as a leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|t| g.leaf(t.clone())).collect()
    }

    /// `h_obs`: shared-weight TCN over each agent's absolute history, final
    /// time step.
    pub fn encode_history(&self, g: &mut Graph, p: &[Var], history: Var) -> Result<Var, ModelError> {
        layers::tcn(g, p, &self.layout.tcn_obs, history)
    }

    /// `h_enc = h_obs ⊕ CNN(wind)`.
    pub fn encode_context(&self, g: &mut Graph, p: &[Var], h_obs: Var, wind: Var) -> Result<Var, ModelError> {
        let l = &self.layout.wind_cnn;
        let h = g.causal_conv1d(wind, p[l.w], p[l.b], 1)?;
        let h = g.relu(h)?;
        let h = g.mean(h, 1)?;
        Ok(g.concat(&[h_obs, h], 1)?)
    }

    /// Multi-head graph attention over the fully connected agent graph of each
    /// window (self edges included). Heads are concatenated.
    pub fn social_attention(
        &self,
        g: &mut Graph,
        p: &[Var],
        h_enc: Var,
        groups: &[std::ops::Range<usize>],
    ) -> Result<(Var, Vec<Vec<Tensor>>), ModelError> {
        layers::gat(g, p, &self.layout.gat, &self.config, h_enc, groups)
    }

    /// Training path of the CVAE. Returns `(z, h_cvae, mu, log_var)`.
    pub fn cvae_train_forward(
        &self,
        g: &mut Graph,
        p: &[Var],
        h_pred: Var,
        cond: Var,
        eps: Var,
    ) -> Result<(Var, Var, Var, Var), ModelError> {
        let q = &self.layout.posterior;
        let x = g.concat(&[h_pred, cond], 1)?;
        let h = g.linear(x, p[q.hidden.w], p[q.hidden.b])?;
        let h = g.relu(h)?;
        let mu = g.linear(h, p[q.mu.w], p[q.mu.b])?;
        let log_var = g.linear(h, p[q.log_var.w], p[q.log_var.b])?;
        let half = g.scale(log_var, 0.5)?;
        let std = g.exp(half)?;
        let noise = g.mul(std, eps)?;
        let z = g.add(mu, noise)?;
        let h_cvae = self.decode(g, p, z, cond)?;
        Ok((z, h_cvae, mu, log_var))
    }

    /// Test path of the CVAE: decode a prior sample `z`.
    pub fn cvae_sample_forward(&self, g: &mut Graph, p: &[Var], z: Var, cond: Var) -> Result<Var, ModelError> {
        self.decode(g, p, z, cond)
    }

    fn decode(&self, g: &mut Graph, p: &[Var], z: Var, cond: Var) -> Result<Var, ModelError> {
        let d = &self.layout.decoder;
        let x = g.concat(&[z, cond], 1)?;
        let h = g.linear(x, p[d.w], p[d.b])?;
        Ok(g.relu(h)?)
    }

    /// MLP head to accelerations, then the Verlet rollout. Returns
    /// `(accel, positions)`.
    pub fn head_and_rollout(
        &self,
        g: &mut Graph,
        p: &[Var],
        h_cvae: Var,
        prev: Var,
        last: Var,
    ) -> Result<(Var, Var), ModelError> {
        let m = &self.layout.head;
        let h = g.linear(h_cvae, p[m.hidden.w], p[m.hidden.b])?;
        let h = g.relu(h)?;
        let out = g.linear(h, p[m.out.w], p[m.out.b])?;
        let accel = g.scale(out, self.config.accel_scale)?;
        let positions = g.verlet(accel, prev, last, self.config.delta_t)?;
        Ok((accel, positions))
    }

    /// Full forward pass over a batch.
    pub fn forward(&self, g: &mut Graph, inputs: &BatchInputs, latent: Latent) -> Result<Forward, ModelError> {
        let p = self.bind(g);
        self.forward_with(g, p, inputs, latent)
    }

    /// Forward pass with parameters already on the graph, in layout order.
    pub fn forward_with(
        &self,
        g: &mut Graph,
        p: Vec<Var>,
        inputs: &BatchInputs,
        latent: Latent,
    ) -> Result<Forward, ModelError> {
        let rows = inputs.rows();
        let history = g.leaf(inputs.history.clone());
        let wind = g.leaf(inputs.wind.clone());
        let prev = g.leaf(inputs.prev.clone());
        let last = g.leaf(inputs.last.clone());

        let h_obs = self.encode_history(g, &p, history)?;
        let h_enc = self.encode_context(g, &p, h_obs, wind)?;
        let (h_gat, attention) = self.social_attention(g, &p, h_enc, &inputs.groups)?;
        let cond = g.concat(&[h_enc, h_gat], 1)?;

        let latent_shape = [rows, self.config.cvae_latent_dim];
        let (h_pred, mu, log_var, z, h_cvae) = match latent {
            Latent::Posterior(eps) => {
                check_shape(&eps, &latent_shape)?;
                let future = inputs
                    .future
                    .as_ref()
                    .ok_or_else(|| ModelError::Input("posterior latent needs the future".into()))?;
                let future = g.leaf(future.clone());
                let h_pred = layers::tcn(g, &p, &self.layout.tcn_pred, future)?;
                let eps = g.leaf(eps);
                let (z, h_cvae, mu, log_var) = self.cvae_train_forward(g, &p, h_pred, cond, eps)?;
                (Some(h_pred), Some(mu), Some(log_var), z, h_cvae)
            }
            Latent::Prior(z) => {
                check_shape(&z, &latent_shape)?;
                let z = g.leaf(z);
                let h_cvae = self.cvae_sample_forward(g, &p, z, cond)?;
                (None, None, None, z, h_cvae)
            }
        };
        let (accel, positions) = self.head_and_rollout(g, &p, h_cvae, prev, last)?;
        Ok(Forward {
            params: p,
            h_obs,
            h_enc,
            h_gat,
            h_pred,
            mu,
            log_var,
            z,
            h_cvae,
            accel,
            positions,
            attention,
        })
    }

    /// Draw `N` futures for one window from the prior.
    pub fn predict(&self, window: &SequenceWindow, n: usize, seed: u64) -> Result<PredictionSet, ModelError> {
        let batch: Vec<&SequenceWindow> = vec![window; n];
        let inputs = self.gather(&batch, false)?;
        let z = standard_normal(&[inputs.rows(), self.config.cvae_latent_dim], seed);
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, &inputs, Latent::Prior(z))?;
        let agents = window.agents();
        let steps = self.config.t_pred;
        let split = |v: Var, sample: usize| -> Vec<Vec<[f64; 3]>> {
            let data = g.value(v).data();
            (0..agents)
                .map(|a| {
                    let row = sample * agents + a;
                    data[row * steps * 3..(row + 1) * steps * 3]
                        .chunks_exact(3)
                        .map(|c| [c[0], c[1], c[2]])
                        .collect()
                })
                .collect()
        };
        let samples = (0..n)
            .map(|s| PredictionSample {
                accelerations: split(fwd.accel, s),
                positions: split(fwd.positions, s),
            })
            .collect();
        Ok(PredictionSet {
            scene_id: window.scene_id,
            start_t: window.start_t,
            agent_ids: window.agent_ids.clone(),
            history: window.history.clone(),
            truth: window.future.clone(),
            samples,
        })
    }

    /// Serialise weights and config. `extra` is stored verbatim in the
    /// metadata (training provenance, loss history).
    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Result<Checkpoint, ModelError> {
        let meta = CheckpointMeta {
            format: CHECKPOINT_FORMAT.into(),
            code_version: provenance::CODE_VERSION.into(),
            config_hash: provenance::config_hash(&self.config),
            config: self.config.clone(),
            extra,
        };
        Ok(Checkpoint {
            meta: serde_json::to_string(&meta)?,
            params: self
                .layout
                .names
                .iter()
                .cloned()
                .zip(self.params.iter().cloned())
                .collect(),
        })
    }

    /// Rebuild a model from a checkpoint. When `expected` is given the stored
    /// config must equal it.
    pub fn from_checkpoint(ckpt: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Model, ModelError> {
        let meta: CheckpointMeta = serde_json::from_str(&ckpt.meta)?;
        if meta.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Mismatch(format!("format `{}`", meta.format)));
        }
        if let Some(cfg) = expected {
            if *cfg != meta.config {
                return Err(ModelError::Mismatch("model config differs from checkpoint".into()));
            }
        }
        meta.config.validate()?;
        let layout = Layout::new(&meta.config);
        if ckpt.params.len() != layout.names.len() {
            return Err(ModelError::Mismatch(format!(
                "{} tensors, expected {}",
                ckpt.params.len(),
                layout.names.len()
            )));
        }
        let fresh = layout.init(0);
        let mut params = Vec::with_capacity(fresh.len());
        for ((name, t), (want_name, want)) in ckpt.params.iter().zip(layout.names.iter().zip(&fresh)) {
            if name != want_name || t.shape() != want.shape() {
                return Err(ModelError::Mismatch(format!(
                    "tensor `{name}` {:?}, expected `{want_name}` {:?}",
                    t.shape(),
                    want.shape()
                )));
            }
            params.push(t.clone());
        }
        Ok(Model {
            config: meta.config,
            layout,
            params,
        })
    }

    /// Metadata `extra` field of a checkpoint.
    pub fn checkpoint_extra(ckpt: &Checkpoint) -> Result<serde_json::Value, ModelError> {
        let meta: CheckpointMeta = serde_json::from_str(&ckpt.meta)?;
        Ok(meta.extra)
    }
}

fn check_shape(t: &Tensor, shape: &[usize]) -> Result<(), ModelError> {
    if t.shape() != shape {
        return Err(DiffError::Shape {
            op: "latent",
            left: t.shape().to_vec(),
            right: shape.to_vec(),
        }
        .into());
    }
    Ok(())
}

/// Seeded standard-normal tensor.
pub fn standard_normal(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

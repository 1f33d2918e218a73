use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::diff::{Graph, Tensor, Var};

/// Indices of a weight/bias pair in the parameter list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tcn {
    pub layers: Vec<(Dense, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gat {
    pub w: usize,
    /// Per head `[gat_dim, 1]` scoring vectors.
    pub a_src: Vec<usize>,
    pub a_dst: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub hidden: Dense,
    pub mu: Dense,
    pub log_var: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub hidden: Dense,
    pub out: Dense,
}

/// Parameter names, shapes and init scales in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    /// Uniform init half-width per tensor.
    bounds: Vec<f64>,
    pub tcn_obs: Tcn,
    pub tcn_pred: Tcn,
    pub wind_cnn: Dense,
    pub gat: Gat,
    pub posterior: Posterior,
    pub decoder: Dense,
    pub head: Head,
}

// The acceleration layer starts small so an untrained model is close to the
// constant-velocity forecast.
const OUTPUT_INIT_GAIN: f64 = 0.01;

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Layout {
        let mut l = Layout {
            names: Vec::new(),
            shapes: Vec::new(),
            bounds: Vec::new(),
            tcn_obs: Tcn { layers: Vec::new() },
            tcn_pred: Tcn { layers: Vec::new() },
            wind_cnn: Dense { w: 0, b: 0 },
            gat: Gat {
                w: 0,
                a_src: Vec::new(),
                a_dst: Vec::new(),
            },
            posterior: Posterior {
                hidden: Dense { w: 0, b: 0 },
                mu: Dense { w: 0, b: 0 },
                log_var: Dense { w: 0, b: 0 },
            },
            decoder: Dense { w: 0, b: 0 },
            head: Head {
                hidden: Dense { w: 0, b: 0 },
                out: Dense { w: 0, b: 0 },
            },
        };
        l.tcn_obs = l.tcn("tcn_obs", cfg);
        l.tcn_pred = l.tcn("tcn_pred", cfg);
        l.wind_cnn = l.conv("wind_cnn", cfg.cnn_kernel, 2, cfg.cnn_channels);
        let enc = cfg.enc_dim();
        let gat_w = l.add("gat.w", vec![enc, cfg.gat_out_dim()], 1.0 / (enc as f64).sqrt());
        let mut a_src = Vec::new();
        let mut a_dst = Vec::new();
        let a_bound = 1.0 / (cfg.gat_dim as f64).sqrt();
        for h in 0..cfg.gat_heads {
            a_src.push(l.add(&format!("gat.a_src.{h}"), vec![cfg.gat_dim, 1], a_bound));
            a_dst.push(l.add(&format!("gat.a_dst.{h}"), vec![cfg.gat_dim, 1], a_bound));
        }
        l.gat = Gat { w: gat_w, a_src, a_dst };
        let cond = cfg.cond_dim();
        l.posterior = Posterior {
            hidden: l.dense("q.hidden", cfg.tcn_channels + cond, cfg.mlp_hidden, 1.0),
            mu: l.dense("q.mu", cfg.mlp_hidden, cfg.cvae_latent_dim, 1.0),
            log_var: l.dense("q.log_var", cfg.mlp_hidden, cfg.cvae_latent_dim, 1.0),
        };
        l.decoder = l.dense("p.decoder", cfg.cvae_latent_dim + cond, cfg.mlp_hidden, 1.0);
        l.head = Head {
            hidden: l.dense("head.hidden", cfg.mlp_hidden, cfg.mlp_hidden, 1.0),
            out: l.dense("head.out", cfg.mlp_hidden, cfg.t_pred * 3, OUTPUT_INIT_GAIN),
        };
        l
    }

    fn add(&mut self, name: &str, shape: Vec<usize>, bound: f64) -> usize {
        self.names.push(name.to_string());
        self.shapes.push(shape);
        self.bounds.push(bound);
        self.names.len() - 1
    }

    fn dense(&mut self, name: &str, inp: usize, out: usize, gain: f64) -> Dense {
        let bound = gain / (inp as f64).sqrt();
        Dense {
            w: self.add(&format!("{name}.w"), vec![inp, out], bound),
            b: self.add(&format!("{name}.b"), vec![out], bound),
        }
    }

    fn conv(&mut self, name: &str, kernel: usize, cin: usize, cout: usize) -> Dense {
        let bound = 1.0 / ((kernel * cin) as f64).sqrt();
        Dense {
            w: self.add(&format!("{name}.w"), vec![kernel, cin, cout], bound),
            b: self.add(&format!("{name}.b"), vec![cout], bound),
        }
    }

    fn tcn(&mut self, name: &str, cfg: &ModelConfig) -> Tcn {
        let mut layers = Vec::new();
        let mut cin = 3;
        for i in 0..cfg.tcn_layers {
            let d = self.conv(&format!("{name}.{i}"), cfg.tcn_kernel, cin, cfg.tcn_channels);
            layers.push((d, 1usize << i));
            cin = cfg.tcn_channels;
        }
        Tcn { layers }
    }

    pub fn shape(&self, idx: usize) -> &[usize] {
        &self.shapes[idx]
    }

    /// Seeded uniform initialisation.
    pub fn init(&self, seed: u64) -> Vec<Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.shapes
            .iter()
            .zip(&self.bounds)
            .map(|(shape, &bound)| {
                let n: usize = shape.iter().product();
                let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
                Tensor::new(shape.clone(), data).expect("shape matches")
            })
            .collect()
    }
}

/// Causal TCN, ReLU after each layer, final time step as the encoding.
pub fn tcn(g: &mut Graph, p: &[Var], tcn: &Tcn, x: Var) -> Result<Var, ModelError> {
    let mut h = x;
    for (layer, dilation) in &tcn.layers {
        h = g.causal_conv1d(h, p[layer.w], p[layer.b], *dilation)?;
        h = g.relu(h)?;
    }
    let last = g.shape(h)[1] - 1;
    Ok(g.select(h, 1, last)?)
}

/// Graph attention: per head, `e_ij = leaky(a_src·Wh_i + a_dst·Wh_j)`,
/// softmax over `j`, output `Σ_j α_ij Wh_j`.
pub fn gat(
    g: &mut Graph,
    p: &[Var],
    gat: &Gat,
    cfg: &ModelConfig,
    h_enc: Var,
    groups: &[std::ops::Range<usize>],
) -> Result<(Var, Vec<Vec<Tensor>>), ModelError> {
    let wh_all = g.matmul(h_enc, p[gat.w])?;
    let mut outputs = Vec::with_capacity(groups.len());
    let mut attention = Vec::with_capacity(groups.len());
    for range in groups {
        let wh = g.slice(wh_all, 0, range.start, range.len())?;
        let mut heads = Vec::with_capacity(cfg.gat_heads);
        let mut weights = Vec::with_capacity(cfg.gat_heads);
        for h in 0..cfg.gat_heads {
            let whh = g.slice(wh, 1, h * cfg.gat_dim, cfg.gat_dim)?;
            let src = g.matmul(whh, p[gat.a_src[h]])?;
            let dst = g.matmul(whh, p[gat.a_dst[h]])?;
            let scores = g.add_outer(src, dst)?;
            let scores = g.leaky_relu(scores, cfg.leaky_slope)?;
            let alpha = g.softmax(scores, 1)?;
            weights.push(g.value(alpha).clone());
            heads.push(g.matmul(alpha, whh)?);
        }
        outputs.push(g.concat(&heads, 1)?);
        attention.push(weights);
    }
    let out = if outputs.len() == 1 {
        outputs[0]
    } else {
        g.concat(&outputs, 0)?
    };
    Ok((out, attention))
}

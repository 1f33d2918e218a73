//! Central finite-difference checking of reverse-mode gradients.

use super::{DiffError, Graph, Tensor, Var};

/// Default central-difference step.
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Worst error over all checked coordinates, where the error of one
    /// coordinate is its absolute error if that is below `abs_floor`, and its
    /// relative error otherwise.
    pub worst: f64,
    /// Largest absolute difference, floor or not.
    pub max_abs: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.worst <= rel_tol
    }
}

/// Compare analytic gradients of `build` at `inputs` against central
/// differences. `build` must return a scalar.
///
/// An entry counts as agreeing when the absolute difference is at most
/// `abs_floor`; otherwise its relative difference is recorded.
pub fn check<F>(inputs: &[Tensor], abs_floor: f64, build: F) -> Result<GradCheck, DiffError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, DiffError>,
{
    let eval = |xs: &[Tensor]| -> Result<f64, DiffError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut checked = 0;
    let mut probe = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        for j in 0..inputs[i].numel() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + STEP;
            let up = eval(&probe)?;
            probe[i].data_mut()[j] = orig - STEP;
            let down = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.data()[j];
            let diff = (a - numeric).abs();
            let err = if diff <= abs_floor {
                0.0
            } else {
                diff / a.abs().max(numeric.abs())
            };
            worst = worst.max(err);
            max_abs = max_abs.max(diff);
            checked += 1;
        }
    }
    Ok(GradCheck { worst, max_abs, checked })
}

/// Reduce any tensor to a scalar with fixed pseudo-random weights so every
/// output element contributes a distinct amount.
pub fn weighted_sum(g: &mut Graph, x: Var) -> Result<Var, DiffError> {
    let shape = g.shape(x).to_vec();
    let n: usize = shape.iter().product();
    let weights: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.7548776662).fract() - 0.5).collect();
    let w = g.leaf(Tensor::new(shape, weights)?);
    let prod = g.mul(x, w)?;
    g.sum(prod)
}

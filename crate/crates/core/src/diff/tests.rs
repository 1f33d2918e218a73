use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{check, weighted_sum};
use super::*;

const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    // keep away from the relu kink at zero
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn assert_grad(name: &str, inputs: &[Tensor], build: impl Fn(&mut Graph, &[Var]) -> Result<Var, DiffError>) {
    let r = check(inputs, FLOOR, build).unwrap();
    assert!(r.passes(TOL), "{name}: worst {} over {}", r.worst, r.checked);
}

#[test]
fn linear_identity() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::vector(vec![2.0, 3.0]));
    let w = g.leaf(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let b = g.leaf(Tensor::zeros(&[2]));
    let y = g.linear(x, w, b).unwrap();
    assert_eq!(g.value(y).data(), &[2.0, 3.0]);
}

#[test]
fn shape_errors_name_both_shapes() {
    let mut g = Graph::new();
    let a = g.leaf(Tensor::zeros(&[2, 3]));
    let b = g.leaf(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err();
    assert_eq!(
        err,
        DiffError::Shape {
            op: "matmul",
            left: vec![2, 3],
            right: vec![2, 3]
        }
    );
    assert!(err.to_string().contains("[2, 3]"));
}

#[test]
fn non_finite_is_an_error() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::vector(vec![1000.0]));
    assert_eq!(g.exp(x).unwrap_err(), DiffError::NonFinite { op: "exp" });
}

#[test]
fn kl_zero_at_standard_normal() {
    let mut g = Graph::new();
    let mu = g.leaf(Tensor::zeros(&[3, 4]));
    let lv = g.leaf(Tensor::zeros(&[3, 4]));
    let kl = g.gaussian_kl(mu, lv).unwrap();
    assert_eq!(g.value(kl).item(), 0.0);
}

#[test]
fn identity_kernel_conv() {
    let mut g = Graph::new();
    let data: Vec<f64> = (0..10).map(|v| v as f64 * 0.3 - 1.0).collect();
    let x = g.leaf(Tensor::new(vec![2, 5, 1], data.clone()).unwrap());
    let w = g.leaf(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap());
    let b = g.leaf(Tensor::zeros(&[1]));
    let y = g.causal_conv1d(x, w, b, 1).unwrap();
    assert_eq!(g.value(y).data(), data.as_slice());
}

#[test]
fn conv_is_causal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x0 = rand_tensor(&mut rng, &[1, 12, 2]);
    let w = rand_tensor(&mut rng, &[3, 2, 4]);
    let b = rand_tensor(&mut rng, &[4]);
    let run = |x: &Tensor| {
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.leaf(x.clone()), g.leaf(w.clone()), g.leaf(b.clone()));
        let y = g.causal_conv1d(xv, wv, bv, 2).unwrap();
        g.value(y).clone()
    };
    let base = run(&x0);
    for t in 0..12 {
        let mut x = x0.clone();
        x.data_mut()[t * 2] += 5.0;
        let y = run(&x);
        assert_eq!(&y.data()[..t * 4], &base.data()[..t * 4], "perturbing t={t}");
    }
}

#[test]
fn softmax_normalised_and_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = rand_tensor(&mut rng, &[3, 5, 2]);
    for axis in 0..3 {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone());
        let y = g.softmax(xv, axis).unwrap();
        let shifted: Vec<f64> = x.data().iter().map(|v| v + 17.5).collect();
        let xs = g.leaf(Tensor::new(x.shape().to_vec(), shifted).unwrap());
        let ys = g.softmax(xs, axis).unwrap();
        for (a, b) in g.value(y).data().iter().zip(g.value(ys).data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let sums = g.sum(y).unwrap();
        let expected = (30 / x.shape()[axis]) as f64;
        assert!((g.value(sums).item() - expected).abs() < 1e-9);
    }
}

#[test]
fn adam_zero_gradient_is_noop() {
    let params = vec![Tensor::vector(vec![0.3, -1.2]), Tensor::scalar(4.0)];
    let mut updated = params.clone();
    let mut state = AdamState::new(&params, 1e-4);
    let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
    state.step(&mut updated, &zeros).unwrap();
    assert_eq!(updated, params);
}

#[test]
fn adam_moves_against_gradient() {
    let params = vec![Tensor::vector(vec![1.0])];
    let mut p = params.clone();
    let mut state = AdamState::new(&params, 0.1);
    state.step(&mut p, &[Tensor::vector(vec![2.0])]).unwrap();
    // first bias-corrected step has magnitude lr
    assert!((p[0].data()[0] - 0.9).abs() < 1e-7);
}

#[test]
fn gradients_linear_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ins = vec![
        rand_tensor(&mut rng, &[3, 4]),
        rand_tensor(&mut rng, &[4, 2]),
        rand_tensor(&mut rng, &[2]),
    ];
    assert_grad("linear", &ins, |g, v| {
        let y = g.linear(v[0], v[1], v[2])?;
        weighted_sum(g, y)
    });
    assert_grad("matmul", &ins[..2], |g, v| {
        let y = g.matmul(v[0], v[1])?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradients_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ins = vec![
        rand_tensor(&mut rng, &[2, 6, 2]),
        rand_tensor(&mut rng, &[3, 2, 3]),
        rand_tensor(&mut rng, &[3]),
    ];
    for d in 1..=2 {
        assert_grad("conv", &ins, |g, v| {
            let y = g.causal_conv1d(v[0], v[1], v[2], d)?;
            weighted_sum(g, y)
        });
    }
}

#[test]
fn gradients_elementwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ins = vec![rand_tensor(&mut rng, &[4, 5]), rand_tensor(&mut rng, &[4, 5])];
    assert_grad("relu", &ins[..1], |g, v| {
        let y = g.relu(v[0])?;
        weighted_sum(g, y)
    });
    assert_grad("leaky_relu", &ins[..1], |g, v| {
        let y = g.leaky_relu(v[0], 0.2)?;
        weighted_sum(g, y)
    });
    assert_grad("tanh", &ins[..1], |g, v| {
        let y = g.tanh(v[0])?;
        weighted_sum(g, y)
    });
    assert_grad("exp", &ins[..1], |g, v| {
        let y = g.exp(v[0])?;
        weighted_sum(g, y)
    });
    assert_grad("scale", &ins[..1], |g, v| {
        let y = g.scale(v[0], -2.5)?;
        weighted_sum(g, y)
    });
    assert_grad("add", &ins, |g, v| {
        let y = g.add(v[0], v[1])?;
        weighted_sum(g, y)
    });
    assert_grad("mul", &ins, |g, v| {
        let y = g.mul(v[0], v[1])?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradients_structural() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let ins = vec![
        rand_tensor(&mut rng, &[2, 3, 4]),
        rand_tensor(&mut rng, &[2, 2, 4]),
    ];
    for axis in 0..3 {
        assert_grad("softmax", &ins[..1], |g, v| {
            let y = g.softmax(v[0], axis)?;
            weighted_sum(g, y)
        });
        assert_grad("mean", &ins[..1], |g, v| {
            let y = g.mean(v[0], axis)?;
            weighted_sum(g, y)
        });
        assert_grad("select", &ins[..1], |g, v| {
            let y = g.select(v[0], axis, 1)?;
            weighted_sum(g, y)
        });
        assert_grad("slice", &ins[..1], |g, v| {
            let y = g.slice(v[0], axis, 1, 1)?;
            weighted_sum(g, y)
        });
    }
    assert_grad("concat", &ins, |g, v| {
        let y = g.concat(&[v[0], v[1], v[0]], 1)?;
        weighted_sum(g, y)
    });
    assert_grad("reshape", &ins[..1], |g, v| {
        let y = g.reshape(v[0], &[6, 4])?;
        weighted_sum(g, y)
    });
    let cols = vec![rand_tensor(&mut rng, &[3, 1]), rand_tensor(&mut rng, &[3, 1])];
    assert_grad("add_outer", &cols, |g, v| {
        let y = g.add_outer(v[0], v[1])?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradients_losses_and_rollout() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let ins = vec![rand_tensor(&mut rng, &[3, 4]), rand_tensor(&mut rng, &[3, 4])];
    assert_grad("mse", &ins, |g, v| g.mse(v[0], v[1]));
    assert_grad("gaussian_kl", &ins, |g, v| g.gaussian_kl(v[0], v[1]));
    let roll = vec![
        rand_tensor(&mut rng, &[2, 15]),
        rand_tensor(&mut rng, &[2, 3]),
        rand_tensor(&mut rng, &[2, 3]),
    ];
    assert_grad("verlet", &roll, |g, v| {
        let y = g.verlet(v[0], v[1], v[2], 0.7)?;
        weighted_sum(g, y)
    });
}

#[test]
fn small_network_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let ins = vec![
        rand_tensor(&mut rng, &[3, 4]),
        rand_tensor(&mut rng, &[4, 5]),
        rand_tensor(&mut rng, &[5]),
        rand_tensor(&mut rng, &[5, 2]),
        rand_tensor(&mut rng, &[2]),
        rand_tensor(&mut rng, &[3, 2]),
    ];
    assert_grad("mlp", &ins, |g, v| {
        let h = g.linear(v[0], v[1], v[2])?;
        let h = g.tanh(h)?;
        let y = g.linear(h, v[3], v[4])?;
        g.mse(y, v[5])
    });
}

#[test]
fn shared_input_accumulates() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::vector(vec![3.0]));
    let y = g.mul(x, x).unwrap();
    let s = g.sum(y).unwrap();
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[6.0]);
}

//! Checks shared by the integration tests and the acceptance runner. Each
//! returns a short summary on success and a description of the first
//! disagreement on failure.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajair::dataset::{make_windows, HorizonConfig, SequenceWindow};
use trajair::diff::gradcheck::{self, weighted_sum};
use trajair::diff::{DiffError, Graph, Tensor, Var};
use trajair::eval::{ade_fde, baseline_const_velocity, best_of_n, NearestNeighborIndex};
use trajair::geo::segment_scenes;
use trajair::ingest::{join_weather, nearest_report, parse_metar, MetarReport, RawTrackRecord, WindContext, WindDirection};
use trajair::model::{standard_normal, Latent, Model, ModelConfig, ModelError};
use trajair::scene::{Scene, TrackPoint};
use trajair::train::combined_loss;

pub type Check = Result<String, String>;

pub const INSTANCES: usize = 100;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

// ---------------------------------------------------------------- METAR

pub enum Expect {
    Ok {
        station: &'static str,
        /// day, hour, minute of the issue group
        time: (i64, i64, i64),
        dir: WindDirection,
        speed: u32,
        gust: Option<u32>,
    },
    Err,
}

fn ok(station: &'static str, time: (i64, i64, i64), dir: WindDirection, speed: u32, gust: Option<u32>) -> Expect {
    Expect::Ok {
        station,
        time,
        dir,
        speed,
        gust,
    }
}

/// Hand-decoded METAR strings.
pub fn golden_metars() -> Vec<(&'static str, Expect)> {
    use WindDirection::{Calm, Degrees as D, Variable};
    vec![
        ("KBTP 011753Z 26006KT 10SM CLR 21/13 A3000", ok("KBTP", (1, 17, 53), D(260), 6, None)),
        ("KBTP 011753Z 00000KT 10SM CLR 21/13 A3000", ok("KBTP", (1, 17, 53), Calm, 0, None)),
        ("KBTP 011753Z VRB03KT 10SM CLR 21/13 A3000", ok("KBTP", (1, 17, 53), Variable, 3, None)),
        ("KBTP 011753Z 26012G20KT 10SM CLR 21/13 A3000", ok("KBTP", (1, 17, 53), D(260), 12, Some(20))),
        ("METAR KBTP 150055Z 09004KT 7SM BKN030 12/08 A2992", ok("KBTP", (15, 0, 55), D(90), 4, None)),
        ("SPECI KBTP 302359Z 36010KT 5SM -RA OVC008 08/07 A2980", ok("KBTP", (30, 23, 59), D(0), 10, None)),
        ("KBTP 031153Z AUTO 18015G25KT 10SM SCT050 25/18 A2995", ok("KBTP", (3, 11, 53), D(180), 15, Some(25))),
        ("KBTP 031153Z COR 27008KT 10SM CLR 18/10 A3010", ok("KBTP", (3, 11, 53), D(270), 8, None)),
        ("KPIT 200451Z 01005KT 10SM FEW250 15/11 A3002", ok("KPIT", (20, 4, 51), D(10), 5, None)),
        ("KAGC 091653Z 32018G28KT 10SM BKN045 05/M03 A2975", ok("KAGC", (9, 16, 53), D(320), 18, Some(28))),
        ("KBTP 101553Z VRB02KT 10SM CLR 28/15 A3001", ok("KBTP", (10, 15, 53), Variable, 2, None)),
        ("KBTP 111953Z VRB06G15KT 10SM CLR 28/15 A3001", ok("KBTP", (11, 19, 53), Variable, 6, Some(15))),
        ("KBTP 050000Z 00000KT 1/4SM FG VV001 10/10 A3020", ok("KBTP", (5, 0, 0), Calm, 0, None)),
        ("KBTP 071253Z 235105G130KT 1SM +TSRA OVC010 20/19 A2950", ok("KBTP", (7, 12, 53), D(235), 105, Some(130))),
        ("KBTP 081853Z 36005KT 10SM CLR 20/05 A3000", ok("KBTP", (8, 18, 53), D(0), 5, None)),
        ("KBTP 121453Z 00105KT 10SM CLR 22/10 A3004", ok("KBTP", (12, 14, 53), D(1), 5, None)),
        ("KBTP 132153Z 35999KT 10SM CLR 22/10 A3004", ok("KBTP", (13, 21, 53), D(359), 99, None)),
        ("KBTP 142353Z 09012G12KT 10SM CLR 22/10 A3004", ok("KBTP", (14, 23, 53), D(90), 12, Some(12))),
        ("K2G4 161153Z 22007KT 10SM CLR 14/09 A3011", ok("K2G4", (16, 11, 53), D(220), 7, None)),
        ("KBTP 170653Z RTD 13011KT 10SM CLR 14/09 A3011", ok("KBTP", (17, 6, 53), D(130), 11, None)),
        ("KBTP 281753Z 04003KT", ok("KBTP", (28, 17, 53), D(40), 3, None)),
        ("KBTP 311159Z 27020G35KT 3SM BLSN OVC015 M05/M08 A2960 RMK PK WND 27038/1130", ok("KBTP", (31, 11, 59), D(270), 20, Some(35))),
        // malformed
        ("", Expect::Err),
        ("KBTP", Expect::Err),
        ("KBTP 011753Z", Expect::Err),
        ("KBTP 011753Z 2606KT 10SM", Expect::Err),
        ("KBTP 011753Z 26006 10SM", Expect::Err),
        ("KBTP 011753Z 26006MPS 10SM", Expect::Err),
        ("KBTP 011753Z 26012G08KT 10SM", Expect::Err),
        ("KBTP 011753Z 37006KT 10SM", Expect::Err),
        ("KBTP 011753Z 26000KT 10SM", Expect::Err),
        ("KBTP 011753Z VRBKT 10SM", Expect::Err),
        ("KBTP 011753 26006KT 10SM", Expect::Err),
        ("KBTP 321753Z 26006KT 10SM", Expect::Err),
        ("KBTP 012453Z 26006KT 10SM", Expect::Err),
        ("KB 011753Z 26006KT", Expect::Err),
        ("KBTP 011753Z 26006G2KT", Expect::Err),
        ("KBTP 011753Z ABC06KT", Expect::Err),
    ]
}

pub fn check_metar_golden() -> Check {
    let cases = golden_metars();
    ensure!(cases.len() >= 30, "only {} golden strings", cases.len());
    for (raw, expect) in &cases {
        let got = parse_metar(raw);
        match (expect, got) {
            (Expect::Ok { station, time, dir, speed, gust }, Ok(r)) => {
                let t = (time.0 - 1) * 86_400 + time.1 * 3_600 + time.2 * 60;
                ensure!(
                    r.station == *station
                        && r.issue_time == t
                        && r.wind_dir == *dir
                        && r.wind_speed_kt == *speed
                        && r.gust_kt == *gust
                        && r.raw_text == *raw,
                    "`{raw}` decoded as {r:?}"
                );
                let again = parse_metar(&r.raw_text).map_err(|e| format!("`{raw}` round trip: {e}"))?;
                ensure!(again == r, "`{raw}` does not round-trip");
            }
            (Expect::Err, Err(_)) => {}
            (Expect::Ok { .. }, Err(e)) => return Err(format!("`{raw}` rejected: {e}")),
            (Expect::Err, Ok(r)) => return Err(format!("`{raw}` accepted as {r:?}")),
        }
    }
    let malformed = cases.iter().filter(|c| matches!(c.1, Expect::Err)).count();
    Ok(format!("{} strings ({} malformed)", cases.len(), malformed))
}

// ------------------------------------------------------------- gradients

pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_FLOOR: f64 = 1e-6;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    // stay clear of the relu kink
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

type Build = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var, DiffError>>;

/// Every engine op, each with inputs of at most 64 elements.
pub fn op_cases() -> Vec<(&'static str, Vec<Tensor>, Build)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut r = |s: &[usize]| rand_tensor(&mut rng, s);
    let x34 = r(&[3, 4]);
    let y34 = r(&[3, 4]);
    let x234 = r(&[2, 3, 4]);
    let mut cases: Vec<(&'static str, Vec<Tensor>, Build)> = vec![
        (
            "linear",
            vec![x34.clone(), r(&[4, 5]), r(&[5])],
            Box::new(|g, v| {
                let y = g.linear(v[0], v[1], v[2])?;
                weighted_sum(g, y)
            }),
        ),
        (
            "matmul",
            vec![x34.clone(), r(&[4, 2])],
            Box::new(|g, v| {
                let y = g.matmul(v[0], v[1])?;
                weighted_sum(g, y)
            }),
        ),
        (
            "causal_conv1d",
            vec![r(&[2, 6, 2]), r(&[3, 2, 3]), r(&[3])],
            Box::new(|g, v| {
                let y = g.causal_conv1d(v[0], v[1], v[2], 2)?;
                weighted_sum(g, y)
            }),
        ),
        ("relu", vec![x34.clone()], Box::new(|g, v| {
            let y = g.relu(v[0])?;
            weighted_sum(g, y)
        })),
        ("leaky_relu", vec![x34.clone()], Box::new(|g, v| {
            let y = g.leaky_relu(v[0], 0.2)?;
            weighted_sum(g, y)
        })),
        ("tanh", vec![x34.clone()], Box::new(|g, v| {
            let y = g.tanh(v[0])?;
            weighted_sum(g, y)
        })),
        ("exp", vec![x34.clone()], Box::new(|g, v| {
            let y = g.exp(v[0])?;
            weighted_sum(g, y)
        })),
        ("scale", vec![x34.clone()], Box::new(|g, v| {
            let y = g.scale(v[0], -1.7)?;
            weighted_sum(g, y)
        })),
        ("add", vec![x34.clone(), y34.clone()], Box::new(|g, v| {
            let y = g.add(v[0], v[1])?;
            weighted_sum(g, y)
        })),
        ("mul", vec![x34.clone(), y34.clone()], Box::new(|g, v| {
            let y = g.mul(v[0], v[1])?;
            weighted_sum(g, y)
        })),
        ("sum", vec![x34.clone()], Box::new(|g, v| {
            let y = g.tanh(v[0])?;
            g.sum(y)
        })),
        ("concat", vec![x234.clone(), r(&[2, 1, 4])], Box::new(|g, v| {
            let y = g.concat(&[v[0], v[1], v[0]], 1)?;
            weighted_sum(g, y)
        })),
        ("reshape", vec![x234.clone()], Box::new(|g, v| {
            let y = g.reshape(v[0], &[6, 4])?;
            weighted_sum(g, y)
        })),
        ("add_outer", vec![r(&[3, 1]), r(&[3, 1])], Box::new(|g, v| {
            let y = g.add_outer(v[0], v[1])?;
            weighted_sum(g, y)
        })),
        ("mse", vec![x34.clone(), y34.clone()], Box::new(|g, v| g.mse(v[0], v[1]))),
        ("gaussian_kl", vec![x34.clone(), y34.clone()], Box::new(|g, v| g.gaussian_kl(v[0], v[1]))),
        (
            "verlet",
            vec![r(&[2, 15]), r(&[2, 3]), r(&[2, 3])],
            Box::new(|g, v| {
                let y = g.verlet(v[0], v[1], v[2], 0.7)?;
                weighted_sum(g, y)
            }),
        ),
    ];
    for axis in 0..3 {
        let names = [
            ["softmax/0", "mean/0", "select/0", "slice/0"],
            ["softmax/1", "mean/1", "select/1", "slice/1"],
            ["softmax/2", "mean/2", "select/2", "slice/2"],
        ][axis];
        cases.push((names[0], vec![x234.clone()], Box::new(move |g, v| {
            let y = g.softmax(v[0], axis)?;
            weighted_sum(g, y)
        })));
        cases.push((names[1], vec![x234.clone()], Box::new(move |g, v| {
            let y = g.mean(v[0], axis)?;
            weighted_sum(g, y)
        })));
        cases.push((names[2], vec![x234.clone()], Box::new(move |g, v| {
            let y = g.select(v[0], axis, 1)?;
            weighted_sum(g, y)
        })));
        cases.push((names[3], vec![x234.clone()], Box::new(move |g, v| {
            let y = g.slice(v[0], axis, 1, 1)?;
            weighted_sum(g, y)
        })));
    }
    cases
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        tcn_channels: 4,
        tcn_kernel: 2,
        tcn_layers: 2,
        cnn_channels: 2,
        cnn_kernel: 2,
        gat_heads: 2,
        gat_dim: 3,
        cvae_latent_dim: 3,
        mlp_hidden: 5,
        t_obs: 4,
        t_pred: 6,
        position_scale: 500.0,
        accel_scale: 5.0,
        ..ModelConfig::default()
    }
}

/// Straight-ish random tracks for `agents` aircraft.
pub fn random_window(cfg: &ModelConfig, agents: usize, seed: u64) -> SequenceWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::new();
    let mut future = Vec::new();
    for _ in 0..agents {
        let p0: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2000.0..2000.0));
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-40.0..40.0));
        let bend = rng.random_range(-0.3..0.3);
        let at = |k: usize| -> [f64; 3] {
            let k = k as f64;
            [p0[0] + v[0] * k, p0[1] + v[1] * k + bend * k * k, p0[2] + v[2] * k]
        };
        history.push((0..cfg.t_obs).map(at).collect());
        future.push((cfg.t_obs..cfg.t_obs + cfg.t_pred).map(at).collect());
    }
    let wind = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
    SequenceWindow {
        scene_id: 0,
        start_t: 0,
        agent_ids: (0..agents).map(|a| format!("a{a}")).collect(),
        history,
        future,
        wind_hist: vec![vec![wind; cfg.t_obs]; agents],
    }
}

pub fn check_gradients() -> Check {
    let cases = op_cases();
    let mut worst: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for (name, inputs, build) in &cases {
        let r = gradcheck::check(inputs, GRAD_FLOOR, build).map_err(|e| format!("{name}: {e}"))?;
        ensure!(r.passes(GRAD_TOL), "{name}: worst relative error {}", r.worst);
        worst = worst.max(r.worst);
        max_abs = max_abs.max(r.max_abs);
    }
    let cfg = tiny_config();
    let model = Model::new(cfg.clone(), 12).map_err(|e| e.to_string())?;
    let w = random_window(&cfg, 2, 13);
    let inputs = model.gather(&[&w], true).map_err(|e| e.to_string())?;
    let eps = standard_normal(&[2, cfg.cvae_latent_dim], 5);
    let target = Tensor::new(vec![2, cfg.t_pred * 3], inputs.future.clone().unwrap().into_data()).unwrap();
    let r = gradcheck::check(&model.params, GRAD_FLOOR, |g, vars| {
        let f = model
            .forward_with(g, vars.to_vec(), &inputs, Latent::Posterior(eps.clone()))
            .map_err(|e| match e {
                ModelError::Diff(d) => d,
                other => DiffError::Invalid {
                    op: "model",
                    message: other.to_string(),
                },
            })?;
        let t = g.leaf(target.clone());
        let loss = combined_loss(g, f.positions, t, f.mu.unwrap(), f.log_var.unwrap(), cfg.position_scale)?;
        Ok(loss.l_total)
    })
    .map_err(|e| format!("model: {e}"))?;
    ensure!(r.passes(GRAD_TOL), "end-to-end model: worst relative error {}", r.worst);
    ensure!(r.checked == model.param_count(), "model check skipped parameters");
    Ok(format!(
        "{} op cases worst rel {:.1e} max abs {:.1e}; tiny model ({} params) worst rel {:.1e} max abs {:.1e}",
        cases.len(),
        worst,
        max_abs,
        r.checked,
        r.worst,
        r.max_abs
    ))
}

// ------------------------------------------------------ exact invariants

pub fn check_structural() -> Check {
    // zero acceleration is the constant-velocity baseline, bit for bit
    let cfg = ModelConfig::default();
    let mut zero = Model::new(cfg.clone(), 1).map_err(|e| e.to_string())?;
    for p in &mut zero.params {
        *p = Tensor::zeros(p.shape());
    }
    for seed in 0..5 {
        let w = random_window(&cfg, 1 + seed as usize, seed);
        let set = zero.predict(&w, 3, seed).map_err(|e| e.to_string())?;
        let cv = baseline_const_velocity(&w, cfg.t_pred, cfg.delta_t);
        for s in &set.samples {
            ensure!(s.positions == cv.positions, "zero-acceleration rollout differs from the baseline");
        }
    }

    // permutation equivariance and attention normalisation
    let model = Model::new(cfg.clone(), 2).map_err(|e| e.to_string())?;
    let mut worst_perm: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for seed in 0..5u64 {
        let a = 2 + seed as usize;
        let w = random_window(&cfg, a, 100 + seed);
        let mut perm: Vec<usize> = (0..a).collect();
        perm.rotate_left(1);
        perm.swap(0, a - 1);
        let wp = SequenceWindow {
            agent_ids: perm.iter().map(|&i| w.agent_ids[i].clone()).collect(),
            history: perm.iter().map(|&i| w.history[i].clone()).collect(),
            future: perm.iter().map(|&i| w.future[i].clone()).collect(),
            wind_hist: perm.iter().map(|&i| w.wind_hist[i].clone()).collect(),
            ..w.clone()
        };
        let d = cfg.cvae_latent_dim;
        let z = standard_normal(&[a, d], seed);
        let zp = Tensor::new(
            vec![a, d],
            perm.iter().flat_map(|&i| z.data()[i * d..(i + 1) * d].to_vec()).collect(),
        )
        .unwrap();
        let run = |w: &SequenceWindow, z: Tensor| -> Result<(Tensor, Tensor, Vec<Tensor>), String> {
            let inputs = model.gather(&[w], false).map_err(|e| e.to_string())?;
            let mut g = Graph::new();
            let f = model.forward(&mut g, &inputs, Latent::Prior(z)).map_err(|e| e.to_string())?;
            Ok((g.value(f.h_gat).clone(), g.value(f.positions).clone(), f.attention[0].clone()))
        };
        let (h, pos, att) = run(&w, z)?;
        let (hp, posp, _) = run(&wp, zp)?;
        for (t, tp) in [(&h, &hp), (&pos, &posp)] {
            let width = t.numel() / a;
            for (k, &i) in perm.iter().enumerate() {
                for c in 0..width {
                    worst_perm = worst_perm.max((tp.data()[k * width + c] - t.data()[i * width + c]).abs());
                }
            }
        }
        for head in &att {
            for row in head.data().chunks(a) {
                worst_norm = worst_norm.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    ensure!(worst_perm < 1e-9, "permutation equivariance off by {worst_perm}");
    ensure!(worst_norm < 1e-9, "attention rows off by {worst_norm}");

    // KL non-negative, zero exactly at the standard normal
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..INSTANCES {
        let mu = rand_tensor(&mut rng, &[2, 4]);
        let lv = rand_tensor(&mut rng, &[2, 4]);
        let mut g = Graph::new();
        let (m, l) = (g.leaf(mu), g.leaf(lv));
        let kl = g.gaussian_kl(m, l).map_err(|e| e.to_string())?;
        ensure!(g.value(kl).item() >= 0.0, "negative KL");
    }
    let mut g = Graph::new();
    let (m, l) = (g.leaf(Tensor::zeros(&[3, 5])), g.leaf(Tensor::zeros(&[3, 5])));
    let kl = g.gaussian_kl(m, l).map_err(|e| e.to_string())?;
    ensure!(g.value(kl).item() == 0.0, "KL at (0, I) is {}", g.value(kl).item());

    // causal convolution: a change at time t leaves earlier outputs untouched
    let x = rand_tensor(&mut rng, &[2, 12, 3]);
    let w = rand_tensor(&mut rng, &[3, 3, 4]);
    let b = rand_tensor(&mut rng, &[4]);
    let conv = |x: &Tensor| {
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.leaf(x.clone()), g.leaf(w.clone()), g.leaf(b.clone()));
        let y = g.causal_conv1d(xv, wv, bv, 2).unwrap();
        g.value(y).clone()
    };
    let base = conv(&x);
    for t in 0..12 {
        let mut xd = x.clone();
        for batch in 0..2 {
            xd.data_mut()[(batch * 12 + t) * 3 + 1] += 0.5;
        }
        let y = conv(&xd);
        for batch in 0..2 {
            for s in 0..t {
                let r = (batch * 12 + s) * 4;
                ensure!(y.data()[r..r + 4] == base.data()[r..r + 4], "output at {s} moved after input at {t}");
            }
        }
    }
    Ok(format!(
        "zero-accel == baseline exact; perm {worst_perm:.1e}; softmax {worst_norm:.1e}; KL >= 0 over {INSTANCES}; causal conv exact"
    ))
}

// --------------------------------------------------------------- oracles

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]].iter().map(|d| d * d).sum::<f64>().sqrt()
}

fn rand_track(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(-3000.0..3000.0)))
        .collect()
}

pub fn oracle_ade_fde() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for i in 0..INSTANCES {
        let n = rng.random_range(1..30);
        let (p, t) = (rand_track(&mut rng, n), rand_track(&mut rng, n));
        let mut total = 0.0;
        for k in 0..n {
            total += dist(&p[k], &t[k]);
        }
        let want = (total / n as f64 / 1000.0, dist(&p[n - 1], &t[n - 1]) / 1000.0);
        let got = ade_fde(&p, &t).map_err(|e| e.to_string())?;
        ensure!(got == want, "instance {i}: {got:?} != {want:?}");
    }
    Ok(format!("{INSTANCES} instances"))
}

pub fn oracle_best_of_n() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..INSTANCES {
        let n = rng.random_range(1..15);
        let k = rng.random_range(1..8);
        let truth = rand_track(&mut rng, n);
        let mut samples: Vec<Vec<[f64; 3]>> = (0..k).map(|_| rand_track(&mut rng, n)).collect();
        if k > 2 && rng.random_bool(0.3) {
            samples[k - 1] = samples[1].clone();
        }
        let mut best = (f64::INFINITY, f64::INFINITY);
        for s in &samples {
            let ade = s.iter().zip(&truth).map(|(a, b)| dist(a, b)).sum::<f64>() / n as f64 / 1000.0;
            if ade < best.0 {
                best = (ade, dist(&s[n - 1], &truth[n - 1]) / 1000.0);
            }
        }
        let got = best_of_n(&samples, &truth).map_err(|e| e.to_string())?;
        ensure!(got == best, "instance {i}: {got:?} != {best:?}");
    }
    Ok(format!("{INSTANCES} instances"))
}

pub fn oracle_nearest_neighbor() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for i in 0..INSTANCES {
        let size = rng.random_range(1..=100);
        let h = rng.random_range(2..6);
        let mut index = NearestNeighborIndex::new();
        let mut entries = Vec::new();
        for _ in 0..size {
            let hist = if !entries.is_empty() && rng.random_bool(0.1) {
                let j = rng.random_range(0..entries.len());
                let (hh, _): &(Vec<[f64; 3]>, Vec<[f64; 3]>) = &entries[j];
                hh.clone()
            } else {
                rand_track(&mut rng, h)
            };
            let fut = rand_track(&mut rng, 3);
            index.push(hist.clone(), fut.clone());
            entries.push((hist, fut));
        }
        let query = if rng.random_bool(0.3) {
            entries[rng.random_range(0..size)].0.clone()
        } else {
            rand_track(&mut rng, h)
        };
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, (hist, _)) in entries.iter().enumerate() {
            let d: f64 = hist
                .iter()
                .zip(&query)
                .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>())
                .sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        let got = index.nearest(&query).map_err(|e| e.to_string())?;
        ensure!(got == best.1, "instance {i}: chose {got}, scan chose {}", best.1);
        ensure!(index.future(got) == entries[best.1].1.as_slice(), "instance {i}: wrong future");
    }
    Ok(format!("{INSTANCES} instances, index sizes up to 100"))
}

fn report(t: i64) -> MetarReport {
    MetarReport {
        station: "KBTP".into(),
        issue_time: t,
        wind_dir: WindDirection::Calm,
        wind_speed_kt: 0,
        gust_kt: None,
        raw_text: format!("KBTP {t}"),
    }
}

pub fn oracle_weather_join() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for i in 0..INSTANCES {
        let m = rng.random_range(1..12);
        let mut times: Vec<i64> = (0..m).map(|_| rng.random_range(0..50) * 20).collect();
        times.sort();
        let reports: Vec<MetarReport> = times.iter().map(|&t| report(t)).collect();
        let records: Vec<RawTrackRecord> = (0..rng.random_range(1..40))
            .map(|_| RawTrackRecord {
                timestamp: rng.random_range(-100..1200),
                aircraft_id: "A".into(),
                latitude: 40.0,
                longitude: -80.0,
                altitude_msl_ft: 1000.0,
            })
            .collect();
        let joined = join_weather(&records, &reports).map_err(|e| e.to_string())?;
        for (k, r) in records.iter().enumerate() {
            // smallest gap, then earliest time, then first in the list
            let want = (0..m)
                .min_by_key(|&j| ((reports[j].issue_time - r.timestamp).abs(), reports[j].issue_time, j))
                .unwrap();
            let got = nearest_report(&reports, r.timestamp);
            ensure!(got == want, "instance {i} record {k}: report {got}, scan says {want}");
            ensure!(std::ptr::eq(joined[k].1, &reports[want]), "instance {i}: join disagrees");
        }
    }
    Ok(format!("{INSTANCES} instances"))
}

/// Random agents with random presence intervals (possibly several per agent).
fn random_presence(rng: &mut ChaCha8Rng, span: i64) -> Vec<TrackPoint> {
    let mut pts = Vec::new();
    for a in 0..rng.random_range(1..5) {
        let id = format!("ac{a}");
        let mut t = rng.random_range(0..span / 2);
        while t < span {
            let len = rng.random_range(1..span / 2);
            for s in t..(t + len).min(span) {
                pts.push(TrackPoint {
                    t: 1000 + s,
                    agent_id: id.clone(),
                    x: s as f64,
                    y: a as f64,
                    z: rng.random_range(0.0..10.0),
                });
            }
            t += len + rng.random_range(1..span / 3);
        }
    }
    pts
}

fn occupied(points: &[TrackPoint]) -> BTreeSet<i64> {
    points.iter().map(|p| p.t).collect()
}

pub fn oracle_segmentation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut total = 0;
    for i in 0..INSTANCES {
        let pts = random_presence(&mut rng, 60);
        // occupancy scan: maximal runs of consecutive occupied seconds
        let occ = occupied(&pts);
        let mut runs: Vec<(i64, i64)> = Vec::new();
        for &t in &occ {
            match runs.last_mut() {
                Some((_, end)) if *end + 1 == t => *end = t,
                _ => runs.push((t, t)),
            }
        }
        let scenes = segment_scenes(pts.clone(), 0, |_| WindContext::CALM);
        ensure!(scenes.len() == runs.len(), "instance {i}: {} scenes, scan found {}", scenes.len(), runs.len());
        for (k, (s, (a, b))) in scenes.iter().zip(&runs).enumerate() {
            ensure!(s.scene_id == k, "instance {i}: scene ids not dense");
            ensure!(s.start_t == *a && s.end_t() == *b, "instance {i}: scene {k} spans {}..{}, scan {a}..{b}", s.start_t, s.end_t());
            let inside = pts.iter().filter(|p| p.t >= *a && p.t <= *b).count();
            ensure!(s.points.len() == inside, "instance {i}: scene {k} lost points");
            s.validate().map_err(|e| format!("instance {i}: {e}"))?;
        }
        total += runs.len();
    }
    Ok(format!("{INSTANCES} instances, {total} scenes"))
}

pub fn oracle_windows() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let mut total = 0;
    for i in 0..INSTANCES {
        let mut pts = random_presence(&mut rng, 40);
        // keep the scene valid: a carrier agent present throughout
        for s in 0..40 {
            pts.push(TrackPoint {
                t: 1000 + s,
                agent_id: "base".into(),
                x: 0.0,
                y: s as f64,
                z: 0.0,
            });
        }
        let scene = Scene::new(i, pts.clone(), |t| WindContext {
            u_along: t as f64,
            u_cross: -(t as f64),
            variable: false,
        });
        let cfg = HorizonConfig {
            t_obs: rng.random_range(2..5),
            t_pred: rng.random_range(1..8),
            min_agents: rng.random_range(1..4),
            stride: rng.random_range(1..4),
        };
        let windows = make_windows(&scene, &cfg);

        let present: HashSet<(&str, i64)> = pts.iter().map(|p| (p.agent_id.as_str(), p.t)).collect();
        let pos: BTreeMap<(&str, i64), [f64; 3]> = pts.iter().map(|p| ((p.agent_id.as_str(), p.t), p.pos())).collect();
        let ids: BTreeSet<&str> = pts.iter().map(|p| p.agent_id.as_str()).collect();
        let len = cfg.len() as i64;
        let mut want = Vec::new();
        let mut start = scene.start_t;
        while start + len - 1 <= scene.end_t() {
            let full: Vec<&str> = ids
                .iter()
                .copied()
                .filter(|id| (start..start + len).all(|t| present.contains(&(*id, t))))
                .collect();
            if full.len() >= cfg.min_agents {
                want.push((start, full));
            }
            start += cfg.stride as i64;
        }
        ensure!(windows.len() == want.len(), "instance {i}: {} windows, enumeration {}", windows.len(), want.len());
        for (w, (start, full)) in windows.iter().zip(&want) {
            ensure!(w.start_t == *start, "instance {i}: window at {} vs {start}", w.start_t);
            ensure!(w.agent_ids.iter().map(String::as_str).eq(full.iter().copied()), "instance {i}: agents differ at {start}");
            for (a, id) in full.iter().enumerate() {
                for k in 0..cfg.t_obs {
                    ensure!(w.history[a][k] == pos[&(*id, start + k as i64)], "instance {i}: history mismatch");
                    let t = (start + k as i64) as f64;
                    ensure!(w.wind_hist[a][k] == [t, -t], "instance {i}: wind mismatch");
                }
                for k in 0..cfg.t_pred {
                    ensure!(
                        w.future[a][k] == pos[&(*id, start + (cfg.t_obs + k) as i64)],
                        "instance {i}: future mismatch"
                    );
                }
            }
        }
        total += windows.len();
    }
    Ok(format!("{INSTANCES} instances, {total} windows"))
}

pub fn all_oracles() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("ade/fde", oracle_ade_fde as fn() -> Check),
        ("best-of-n", oracle_best_of_n),
        ("nearest-neighbor", oracle_nearest_neighbor),
        ("weather join", oracle_weather_join),
        ("window enumeration", oracle_windows),
        ("scene segmentation", oracle_segmentation),
    ]
}

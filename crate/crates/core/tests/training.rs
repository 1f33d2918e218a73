//! Training and evaluation on small synthetic corpora.

use trajair::dataset::{make_windows, HorizonConfig, SequenceWindow};
use trajair::eval::{best_of_n, evaluate, window_seed, ConstantVelocity, EvalError, Predictor};
use trajair::model::{Model, ModelConfig, PredictionSample, PredictionSet};
use trajair::synth::{scene_from_seed, scene_seed, PatternSpec};
use trajair::train::{train, train_from, TrainConfig, TrainError};

fn small_config() -> ModelConfig {
    ModelConfig {
        tcn_channels: 8,
        cnn_channels: 4,
        gat_heads: 2,
        gat_dim: 8,
        cvae_latent_dim: 8,
        mlp_hidden: 16,
        t_obs: 11,
        t_pred: 20,
        ..ModelConfig::default()
    }
}

fn windows(n_scenes: usize, stride: usize, seed: u64) -> Vec<SequenceWindow> {
    let spec = PatternSpec::default();
    let horizon = HorizonConfig {
        t_obs: 11,
        t_pred: 20,
        stride,
        ..HorizonConfig::default()
    };
    (0..n_scenes)
        .flat_map(|id| make_windows(&scene_from_seed(&spec, id, scene_seed(seed, id)).unwrap().1, &horizon))
        .collect()
}

#[test]
fn training_is_deterministic() {
    let w = windows(2, 40, 1);
    let cfg = TrainConfig {
        max_steps: Some(8),
        batch_size: 4,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train(&w, &small_config(), &cfg).unwrap();
    let b = train(&w, &small_config(), &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params, b.model.params);
    let bytes = |m: &Model| m.to_checkpoint(serde_json::Value::Null).unwrap().to_bytes();
    assert_eq!(bytes(&a.model), bytes(&b.model));
    let other = train(&w, &small_config(), &TrainConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a.model.params, other.model.params);
}

#[test]
fn loss_falls_on_a_small_set() {
    let w: Vec<SequenceWindow> = windows(3, 30, 2).into_iter().take(10).collect();
    assert_eq!(w.len(), 10);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 10,
        learning_rate: 1e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let mut seen = 0;
    let t = train_from(Model::new(small_config(), 5).unwrap(), &w, &cfg, |_, _| seen += 1).unwrap();
    assert_eq!(seen, 200);
    let mean = |r: &[trajair::train::LossReport]| r.iter().map(|l| l.l_traj).sum::<f64>() / r.len() as f64;
    let (first, last) = (mean(&t.history[..10]), mean(&t.history[190..]));
    assert!(last < 0.9 * first, "{first} -> {last}");
    assert!(t.history.iter().all(|l| (l.l_total - l.l_traj - l.l_cvae).abs() < 1e-9));
}

#[test]
fn overflow_aborts_with_a_checkpoint() {
    let w = windows(1, 40, 3);
    let cfg = ModelConfig {
        accel_scale: 1e300,
        ..small_config()
    };
    let err = train(&w, &cfg, &TrainConfig::default()).unwrap_err();
    match err {
        TrainError::NonFinite { step, checkpoint, .. } => {
            assert_eq!(step, 0);
            let restored = Model::from_checkpoint(&checkpoint, Some(&cfg)).unwrap();
            assert_eq!(restored.params, Model::new(cfg, 0).unwrap().params);
            assert_eq!(Model::checkpoint_extra(&checkpoint).unwrap()["aborted_at_step"], 0);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn empty_training_set_is_rejected() {
    assert!(matches!(
        train(&[], &small_config(), &TrainConfig::default()),
        Err(TrainError::EmptyTrainSet)
    ));
}

#[test]
fn evaluation_matches_manual_accumulation() {
    let w = windows(3, 50, 4);
    let model = Model::new(small_config(), 9).unwrap();
    let a = evaluate(&model, &w, 4, 17).unwrap();
    assert_eq!(a, evaluate(&model, &w, 4, 17).unwrap());

    let (mut ade, mut fde, mut agents) = (0.0, 0.0, 0);
    for (i, win) in w.iter().enumerate() {
        let set = model.predict(win, 4, window_seed(17, i)).unwrap();
        for k in 0..win.agents() {
            let samples: Vec<_> = set.samples.iter().map(|s| s.positions[k].clone()).collect();
            // per-sample ADE in km, then pick the smallest
            let scored: Vec<(f64, f64)> = samples
                .iter()
                .map(|s| {
                    let d: Vec<f64> = s
                        .iter()
                        .zip(&win.future[k])
                        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
                        .collect();
                    (d.iter().sum::<f64>() / d.len() as f64 / 1000.0, d[d.len() - 1] / 1000.0)
                })
                .collect();
            let best = scored.iter().copied().fold((f64::INFINITY, 0.0), |b, s| if s.0 < b.0 { s } else { b });
            assert_eq!(best_of_n(&samples, &win.future[k]).unwrap(), best);
            ade += best.0;
            fde += best.1;
            agents += 1;
        }
    }
    assert_eq!(a.n_agents, agents);
    assert!((a.ade_km - ade / agents as f64).abs() < 1e-12);
    assert!((a.fde_km - fde / agents as f64).abs() < 1e-12);
}

struct Oracle;

impl Predictor for Oracle {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn predict(&self, w: &SequenceWindow, n: usize, _seed: u64) -> Result<PredictionSet, EvalError> {
        let sample = PredictionSample {
            accelerations: vec![vec![[0.0; 3]; w.t_pred()]; w.agents()],
            positions: w.future.clone(),
        };
        Ok(PredictionSet {
            scene_id: w.scene_id,
            start_t: w.start_t,
            agent_ids: w.agent_ids.clone(),
            history: w.history.clone(),
            truth: w.future.clone(),
            samples: vec![sample; n],
        })
    }
}

#[test]
fn perfect_predictor_scores_zero() {
    let w = windows(2, 60, 5);
    let r = evaluate(&Oracle, &w, 3, 0).unwrap();
    assert_eq!((r.ade_km, r.fde_km), (0.0, 0.0));
    assert!(matches!(evaluate(&Oracle, &[], 3, 0), Err(EvalError::EmptyTestSet)));
}

#[test]
fn constant_velocity_is_exact_on_straight_lines() {
    let line = |p0: [f64; 3], v: [f64; 3], range: std::ops::Range<usize>| -> Vec<[f64; 3]> {
        range.map(|k| std::array::from_fn(|i| p0[i] + v[i] * k as f64)).collect()
    };
    let w = SequenceWindow {
        scene_id: 0,
        start_t: 0,
        agent_ids: vec!["a".into(), "b".into()],
        history: vec![line([0.0; 3], [40.0, 3.0, -1.0], 0..11), line([900.0, 5.0, 300.0], [-30.0, 20.0, 0.0], 0..11)],
        future: vec![line([0.0; 3], [40.0, 3.0, -1.0], 11..31), line([900.0, 5.0, 300.0], [-30.0, 20.0, 0.0], 11..31)],
        wind_hist: vec![vec![[0.0; 2]; 11]; 2],
    };
    let r = evaluate(&ConstantVelocity { dt: 1.0 }, &[w], 1, 0).unwrap();
    assert!(r.ade_km < 1e-9 && r.fde_km < 1e-9);
}

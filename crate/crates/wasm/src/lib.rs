//! WebAssembly bindings for the demo page in `www/`.
//!
//! Everything runs on the synthetic generator, so the page needs no data.
//! The runway axis is the x axis of the synthetic frame (azimuth 0 here),
//! so wind directions are relative to the runway heading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use trajair::dataset::{make_windows, HorizonConfig};
use trajair::eval::{score_set, ConstantVelocity, Predictor};
use trajair::ingest::wind_components;
use trajair::plot::{prediction_svg, scene_svg};
use trajair::scene::Scene;
use trajair::synth::{generate_scene, random_scenario, runway_for, PatternSpec, Runway};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Wind resolved along and across the runway, and the runway it selects.
#[wasm_bindgen]
pub struct WindView {
    pub u_along: f64,
    pub u_cross: f64,
    high: bool,
}

#[wasm_bindgen]
impl WindView {
    #[wasm_bindgen(getter)]
    pub fn runway(&self) -> String {
        if self.high { "high" } else { "low" }.into()
    }
}

/// `from_deg` is measured from the runway heading.
#[wasm_bindgen]
pub fn wind(from_deg: f64, speed_kt: f64) -> WindView {
    let w = wind_components(from_deg, speed_kt, 0.0);
    WindView {
        u_along: w.u_along,
        u_cross: w.u_cross,
        high: runway_for(&PatternSpec::default(), &w) == Runway::High,
    }
}

/// A random scenario for `seed`, flown in the given wind.
pub fn scene(seed: u64, from_deg: f64, speed_kt: f64) -> Result<Scene, String> {
    let spec = PatternSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenario = random_scenario(&spec, 0, &mut rng).map_err(|e| e.to_string())?;
    scenario.wind = wind_components(from_deg, speed_kt, 0.0);
    generate_scene(&spec, &scenario, seed).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn scene_plot(seed: u64, from_deg: f64, speed_kt: f64) -> Result<String, JsError> {
    scene_svg(&scene(seed, from_deg, speed_kt).map_err(js_err)?).map_err(js_err)
}

/// Constant-velocity prediction for one window of a scene.
#[wasm_bindgen]
pub struct Rollout {
    svg: String,
    pub ade_km: f64,
    pub fde_km: f64,
    pub windows: usize,
    pub index: usize,
}

#[wasm_bindgen]
impl Rollout {
    #[wasm_bindgen(getter)]
    pub fn svg(&self) -> String {
        self.svg.clone()
    }
}

/// Window `position` in [0, 1] picks how far into the scene the rollout
/// starts. ADE/FDE are averaged over the window's agents.
pub fn rollout_inner(seed: u64, from_deg: f64, speed_kt: f64, position: f64) -> Result<Rollout, String> {
    let s = scene(seed, from_deg, speed_kt)?;
    let windows = make_windows(
        &s,
        &HorizonConfig {
            stride: 5,
            ..HorizonConfig::default()
        },
    );
    if windows.is_empty() {
        return Err("scene is shorter than one window".into());
    }
    let index = ((position.clamp(0.0, 1.0) * (windows.len() - 1) as f64).round()) as usize;
    let set = ConstantVelocity { dt: 1.0 }
        .predict(&windows[index], 1, 0)
        .map_err(|e| e.to_string())?;
    let scores = score_set(&set).map_err(|e| e.to_string())?;
    let n = scores.len() as f64;
    Ok(Rollout {
        svg: prediction_svg(&set).map_err(|e| e.to_string())?,
        ade_km: scores.iter().map(|s| s.0).sum::<f64>() / n,
        fde_km: scores.iter().map(|s| s.1).sum::<f64>() / n,
        windows: windows.len(),
        index,
    })
}

#[wasm_bindgen]
pub fn rollout(seed: u64, from_deg: f64, speed_kt: f64, position: f64) -> Result<Rollout, JsError> {
    rollout_inner(seed, from_deg, speed_kt, position).map_err(js_err)
}

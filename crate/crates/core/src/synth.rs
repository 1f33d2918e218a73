//! Synthetic traffic around a single runway with left-hand rectangular
//! circuits.
//!
//! Geometry lives in the runway frame: the runway runs from `(0, 0)` to
//! `(runway_length_m, 0)`, `x` along the axis and `y` to its right. Aircraft
//! fly at constant airspeed and steer toward the next waypoint with a bounded
//! turn rate, starting each turn early enough to roll out on the next leg.
//! Positions are sampled at 1 Hz and perturbed with correlated Gaussian noise.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::WindContext;
use crate::scene::{write_scenes, Scene, TrackPoint};

/// Simulation sub-steps per second.
const SUBSTEPS: usize = 10;
/// Hard cap on flight length, in seconds.
const MAX_FLIGHT_S: usize = 3600;
/// First timestamp of scene 0 in a corpus; later scenes are an hour apart.
const CORPUS_EPOCH: i64 = 1_600_000_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid pattern spec: {0}")]
    Spec(String),
    #[error("infeasible geometry: {0}")]
    Infeasible(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// Which end of the runway is active. `Low` departs and lands toward `+x`
/// with the circuit at `y < 0`; `High` is the same circuit rotated by 180°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Runway {
    Low,
    High,
}

impl Runway {
    /// Land into the wind. A calm or pure crosswind picks `Low`.
    pub fn into_wind(wind: &WindContext) -> Runway {
        if wind.u_along > 0.0 {
            Runway::High
        } else {
            Runway::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intent {
    FullCircuit,
    DownwindEntry,
    StraightOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternSpec {
    pub runway_length_m: f64,
    pub field_elevation_m: f64,
    /// Height of the downwind leg above the field.
    pub pattern_altitude_m: f64,
    /// Distance past the departure end before the crosswind turn.
    pub upwind_extension_m: f64,
    /// Lateral distance between the runway and the downwind leg.
    pub downwind_offset_m: f64,
    /// Distance short of the threshold where base turns onto final.
    pub final_extension_m: f64,
    /// Length of the 45° leg flown before joining downwind.
    pub entry_leg_m: f64,
    /// Distance flown past the departure end by a straight-out departure.
    pub departure_leg_m: f64,
    pub airspeed_mps: f64,
    pub turn_rate_dps: f64,
    pub noise_sigma_m: f64,
    /// Correlation time of the positional noise.
    pub noise_tau_s: f64,
    /// `None` picks the runway from the wind.
    pub runway_in_use: Option<Runway>,
    pub max_agents: usize,
    pub max_wind_kt: f64,
    pub region_radius_m: f64,
    pub ceiling_m: f64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        PatternSpec {
            runway_length_m: 1500.0,
            field_elevation_m: 380.0,
            pattern_altitude_m: 300.0,
            upwind_extension_m: 600.0,
            downwind_offset_m: 1200.0,
            final_extension_m: 800.0,
            entry_leg_m: 2000.0,
            departure_leg_m: 2500.0,
            airspeed_mps: 36.0,
            turn_rate_dps: 9.0,
            noise_sigma_m: 15.0,
            noise_tau_s: 20.0,
            runway_in_use: None,
            max_agents: 3,
            max_wind_kt: 20.0,
            region_radius_m: 5000.0,
            ceiling_m: 6000.0 * crate::geo::FT_TO_M,
        }
    }
}

impl PatternSpec {
    pub fn turn_radius_m(&self) -> f64 {
        self.airspeed_mps / self.turn_rate_dps.to_radians()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = [
            ("runway_length_m", self.runway_length_m),
            ("pattern_altitude_m", self.pattern_altitude_m),
            ("upwind_extension_m", self.upwind_extension_m),
            ("downwind_offset_m", self.downwind_offset_m),
            ("final_extension_m", self.final_extension_m),
            ("entry_leg_m", self.entry_leg_m),
            ("departure_leg_m", self.departure_leg_m),
            ("airspeed_mps", self.airspeed_mps),
            ("turn_rate_dps", self.turn_rate_dps),
            ("noise_tau_s", self.noise_tau_s),
            ("region_radius_m", self.region_radius_m),
            ("ceiling_m", self.ceiling_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SynthError::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_sigma_m >= 0.0 && self.noise_sigma_m.is_finite()) {
            return Err(SynthError::Spec("noise_sigma_m must be >= 0".into()));
        }
        if !(self.max_wind_kt >= 0.0) {
            return Err(SynthError::Spec("max_wind_kt must be >= 0".into()));
        }
        if self.max_agents == 0 {
            return Err(SynthError::Spec("max_agents must be >= 1".into()));
        }
        if !self.field_elevation_m.is_finite() {
            return Err(SynthError::Spec("field_elevation_m must be finite".into()));
        }
        let r = self.turn_radius_m();
        let legs = [
            ("upwind_extension_m", self.upwind_extension_m, r),
            ("downwind_offset_m", self.downwind_offset_m, 2.0 * r),
            ("final_extension_m", self.final_extension_m, r),
            ("entry_leg_m", self.entry_leg_m, r),
        ];
        for (name, v, min) in legs {
            if v < min {
                return Err(SynthError::Infeasible(format!(
                    "{name} = {v} m is shorter than {min:.1} m needed at turn radius {r:.1} m"
                )));
            }
        }
        if self.field_elevation_m + 1.5 * self.pattern_altitude_m > self.ceiling_m {
            return Err(SynthError::Infeasible("pattern altitude above the ceiling".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSchedule {
    /// Seconds after the scenario start.
    pub spawn_s: i64,
    pub intent: Intent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub start_t: i64,
    pub agents: Vec<AgentSchedule>,
    pub wind: WindContext,
}

impl SyntheticScenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.agents.is_empty() {
            return Err(SynthError::Scenario("no agents".into()));
        }
        if self.agents.windows(2).any(|w| w[1].spawn_s < w[0].spawn_s) {
            return Err(SynthError::Scenario("spawn times must be non-decreasing".into()));
        }
        if self.agents[0].spawn_s != 0 {
            return Err(SynthError::Scenario("first agent must spawn at 0".into()));
        }
        Ok(())
    }
}

/// Runway the scenario will use under `spec`.
pub fn runway_for(spec: &PatternSpec, wind: &WindContext) -> Runway {
    spec.runway_in_use.unwrap_or_else(|| Runway::into_wind(wind))
}

#[derive(Debug, Clone, Copy)]
struct Waypoint {
    x: f64,
    y: f64,
    z: f64,
}

/// Waypoints for `Low`, starting position and initial heading (radians from
/// `+x` toward `+y`).
fn route(spec: &PatternSpec, intent: Intent) -> ([f64; 3], f64, Vec<Waypoint>) {
    let l = spec.runway_length_m;
    let e = spec.field_elevation_m;
    let p = spec.pattern_altitude_m;
    let d = spec.downwind_offset_m;
    let f = spec.final_extension_m;
    let wp = |x, y, z| Waypoint { x, y, z };
    let approach = [wp(-f, -d, e + 0.6 * p), wp(-f, 0.0, e + 0.3 * p), wp(0.0, 0.0, e)];
    match intent {
        Intent::FullCircuit => {
            let u = l + spec.upwind_extension_m;
            let mut w = vec![wp(u, 0.0, e + 0.8 * p), wp(u, -d, e + p)];
            w.extend(approach);
            ([0.0, 0.0, e], 0.0, w)
        }
        Intent::DownwindEntry => {
            // Join abeam midfield on a 45° track from outside the circuit.
            let h = spec.entry_leg_m / std::f64::consts::SQRT_2;
            let start = [l / 2.0 + h, -d - h, e + p];
            let heading = (h).atan2(-h);
            let mut w = vec![wp(l / 2.0, -d, e + p)];
            w.extend(approach);
            (start, heading, w)
        }
        Intent::StraightOut => {
            let x = l + spec.departure_leg_m;
            ([0.0, 0.0, e], 0.0, vec![wp(l, 0.0, e + 0.3 * p), wp(x, 0.0, e + 1.5 * p)])
        }
    }
}

fn wrap(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a < -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

/// Noiseless 1 Hz track for one agent on `runway`.
pub fn fly(spec: &PatternSpec, intent: Intent, runway: Runway) -> Result<Vec<[f64; 3]>, SynthError> {
    let (start, mut heading, wps) = route(spec, intent);
    let r = spec.turn_radius_m();
    let dt = 1.0 / SUBSTEPS as f64;
    let step = spec.airspeed_mps * dt;
    let max_turn = spec.turn_rate_dps.to_radians() * dt;
    // Distance before each waypoint at which to start turning for the next leg.
    let mut lead = vec![step; wps.len()];
    for i in 0..wps.len().saturating_sub(1) {
        let (ax, ay) = if i == 0 {
            (wps[0].x - start[0], wps[0].y - start[1])
        } else {
            (wps[i].x - wps[i - 1].x, wps[i].y - wps[i - 1].y)
        };
        let (bx, by) = (wps[i + 1].x - wps[i].x, wps[i + 1].y - wps[i].y);
        let turn = wrap(by.atan2(bx) - ay.atan2(ax)).abs();
        lead[i] = (r * (turn / 2.0).tan()).max(step);
    }

    let [mut x, mut y, mut z] = start;
    let mut out = vec![[x, y, z]];
    let mut target = 0;
    let mut sub = 0usize;
    while target < wps.len() {
        let w = wps[target];
        let dist = (w.x - x).hypot(w.y - y);
        if dist <= lead[target] {
            target += 1;
            continue;
        }
        let err = wrap((w.y - y).atan2(w.x - x) - heading);
        heading += err.clamp(-max_turn, max_turn);
        x += step * heading.cos();
        y += step * heading.sin();
        z += (w.z - z) * (step / dist).min(1.0);
        sub += 1;
        if sub.is_multiple_of(SUBSTEPS) {
            out.push([x, y, z]);
        }
        if sub > MAX_FLIGHT_S * SUBSTEPS {
            return Err(SynthError::Infeasible(format!("{intent:?} did not finish within {MAX_FLIGHT_S} s")));
        }
    }
    if runway == Runway::High {
        let l = spec.runway_length_m;
        for p in &mut out {
            *p = [l - p[0], -p[1], p[2]];
        }
    }
    for p in &out {
        if p[0].hypot(p[1]) > spec.region_radius_m || p[2] > spec.ceiling_m {
            return Err(SynthError::Infeasible(format!(
                "{intent:?} leaves the {} m / {} m region",
                spec.region_radius_m, spec.ceiling_m
            )));
        }
    }
    Ok(out)
}

/// AR(1) noise with stationary standard deviation `sigma`.
fn correlated_noise(n: usize, sigma: f64, tau: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let phi = (-1.0 / tau).exp();
    let innov = sigma * (1.0 - phi * phi).sqrt();
    let mut e: [f64; 3] = std::array::from_fn(|_| {
        let v: f64 = StandardNormal.sample(rng);
        sigma * v
    });
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(e);
        for v in &mut e {
            let xi: f64 = StandardNormal.sample(rng);
            *v = phi * *v + innov * xi;
        }
    }
    out
}

fn agent_id(i: usize) -> String {
    format!("ac{i:02}")
}

/// Render a scenario to a scene. Deterministic per `seed`.
pub fn generate_scene(spec: &PatternSpec, scenario: &SyntheticScenario, seed: u64) -> Result<Scene, SynthError> {
    spec.validate()?;
    scenario.validate()?;
    let runway = runway_for(spec, &scenario.wind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut covered_until = scenario.start_t - 1;
    for (i, a) in scenario.agents.iter().enumerate() {
        let track = fly(spec, a.intent, runway)?;
        let t0 = scenario.start_t + a.spawn_s;
        if t0 > covered_until + 1 {
            return Err(SynthError::Scenario(format!(
                "agent {i} spawns at +{} s after all earlier agents have left",
                a.spawn_s
            )));
        }
        covered_until = covered_until.max(t0 + track.len() as i64 - 1);
        let noise = if spec.noise_sigma_m > 0.0 {
            correlated_noise(track.len(), spec.noise_sigma_m, spec.noise_tau_s, &mut rng)
        } else {
            vec![[0.0; 3]; track.len()]
        };
        let id = agent_id(i);
        for (k, (p, n)) in track.iter().zip(&noise).enumerate() {
            points.push(TrackPoint {
                t: t0 + k as i64,
                agent_id: id.clone(),
                x: p[0] + n[0],
                y: p[1] + n[1],
                z: p[2] + n[2],
            });
        }
    }
    let wind = scenario.wind;
    Ok(Scene::new(0, points, |_| wind))
}

/// Draw a scenario: uniform wind direction, uniform speed up to
/// `max_wind_kt`, and up to `max_agents` overlapping agents.
pub fn random_scenario(spec: &PatternSpec, start_t: i64, rng: &mut ChaCha8Rng) -> Result<SyntheticScenario, SynthError> {
    spec.validate()?;
    let from = rng.random_range(0.0..360.0);
    let speed = rng.random_range(0.0..=spec.max_wind_kt);
    let wind = crate::ingest::wind_components(from, speed, 0.0);
    let runway = runway_for(spec, &wind);
    let n = rng.random_range(1..=spec.max_agents);
    let mut agents = Vec::with_capacity(n);
    let mut end = 0i64;
    for i in 0..n {
        let intent = match rng.random_range(0..10) {
            0..=4 => Intent::FullCircuit,
            5..=7 => Intent::DownwindEntry,
            _ => Intent::StraightOut,
        };
        let spawn_s = if i == 0 {
            0
        } else {
            let prev = agents.last().map_or(0, |a: &AgentSchedule| a.spawn_s);
            let lo = prev + 10;
            let hi = (end - 10).max(lo);
            rng.random_range(lo..=hi)
        };
        let len = fly(spec, intent, runway)?.len() as i64;
        end = end.max(spawn_s + len);
        agents.push(AgentSchedule { spawn_s, intent });
    }
    Ok(SyntheticScenario { start_t, agents, wind })
}

/// Scenario and scene for corpus entry `scene_id` drawn from `seed`.
pub fn scene_from_seed(spec: &PatternSpec, scene_id: usize, seed: u64) -> Result<(SyntheticScenario, Scene), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = random_scenario(spec, CORPUS_EPOCH + 3600 * scene_id as i64, &mut rng)?;
    let mut scene = generate_scene(spec, &scenario, rng.random())?;
    scene.scene_id = scene_id;
    Ok((scenario, scene))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: usize,
    /// Path relative to the corpus root.
    pub file: String,
    pub seed: u64,
    pub runway: Runway,
    pub scenario: SyntheticScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub spec: PatternSpec,
    pub scenes: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
/// Scenes are spread over this many day directories (fewer for tiny corpora).
pub const CORPUS_DAYS: usize = 5;

/// Per-scene seed derived from the corpus seed.
pub fn scene_seed(seed: u64, scene_id: usize) -> u64 {
    let mut z = seed.wrapping_add((scene_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn day_name(scene_id: usize, n_scenes: usize) -> String {
    let days = CORPUS_DAYS.min(n_scenes).max(1);
    format!("day_{:02}", scene_id * days / n_scenes)
}

/// Write `n_scenes` scene files under `out/day_XX/` and a manifest.
pub fn generate_corpus(spec: &PatternSpec, n_scenes: usize, seed: u64, out: &Path) -> Result<Manifest, SynthError> {
    spec.validate()?;
    if n_scenes == 0 {
        return Err(SynthError::Spec("n_scenes must be >= 1".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut scenes = Vec::with_capacity(n_scenes);
    for id in 0..n_scenes {
        let s = scene_seed(seed, id);
        let (scenario, scene) = scene_from_seed(spec, id, s)?;
        let rel = PathBuf::from(day_name(id, n_scenes)).join(format!("scene_{id:04}.csv"));
        let path = out.join(&rel);
        std::fs::create_dir_all(path.parent().expect("has parent"))?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write_scenes(&mut w, std::slice::from_ref(&scene))?;
        std::io::Write::flush(&mut w)?;
        scenes.push(ManifestEntry {
            scene_id: id,
            file: rel.to_string_lossy().replace('\\', "/"),
            seed: s,
            runway: runway_for(spec, &scenario.wind),
            scenario,
        });
    }
    let manifest = Manifest {
        code_version: crate::provenance::CODE_VERSION.to_string(),
        config_hash: crate::provenance::config_hash(spec),
        seed,
        spec: spec.clone(),
        scenes,
    };
    std::fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Rebuild one scene of a corpus from its manifest entry.
pub fn regenerate(manifest: &Manifest, scene_id: usize) -> Result<Scene, SynthError> {
    let entry = manifest
        .scenes
        .iter()
        .find(|e| e.scene_id == scene_id)
        .ok_or_else(|| SynthError::Scenario(format!("scene {scene_id} not in manifest")))?;
    Ok(scene_from_seed(&manifest.spec, scene_id, entry.seed)?.1)
}

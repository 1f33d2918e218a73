//! Cleaning, local-frame projection, region crop, 1 Hz resampling and scene
//! segmentation of decoded track data.
//!
//! The local frame has its origin at the configured runway end. `x` points
//! along the runway axis azimuth, `y` points 90° clockwise of it (to the right
//! when facing along `x`) and `z` is altitude MSL in metres.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, MetarReport, RawTrackRecord, WindContext};
use crate::scene::{Scene, TrackPoint};

pub const FT_TO_M: f64 = 0.3048;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Largest lat/lon offset from the origin accepted by [`to_local`].
pub const SMALL_AREA_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub axis_azimuth_deg: f64,
    pub altitude_ceiling_ft: f64,
    pub radius_m: f64,
    pub gap_split_s: i64,
}

impl Default for FrameConfig {
    // Threshold of runway 08 at KBTP.
    fn default() -> Self {
        FrameConfig {
            origin_lat: 40.7768,
            origin_lon: -79.9553,
            axis_azimuth_deg: 82.0,
            altitude_ceiling_ft: 6000.0,
            radius_m: 5000.0,
            gap_split_s: 60,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("invalid frame config: {0}")]
    Config(String),
    #[error("point ({lat}, {lon}) is more than {SMALL_AREA_DEG}° from the origin")]
    OutsideSmallArea { lat: f64, lon: f64 },
}

impl FrameConfig {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.radius_m > 0.0) {
            return Err(GeoError::Config("radius_m must be > 0".into()));
        }
        if self.gap_split_s < 1 {
            return Err(GeoError::Config("gap_split_s must be >= 1".into()));
        }
        if !(0.0..360.0).contains(&self.axis_azimuth_deg) {
            return Err(GeoError::Config("axis_azimuth_deg must be in [0, 360)".into()));
        }
        if !(-90.0..=90.0).contains(&self.origin_lat) || !(-180.0..=180.0).contains(&self.origin_lon) {
            return Err(GeoError::Config("origin out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub corrupt: usize,
    pub duplicate: usize,
}

fn is_corrupt(r: &RawTrackRecord) -> bool {
    !(r.latitude.is_finite()
        && r.longitude.is_finite()
        && r.altitude_msl_ft.is_finite()
        && (-90.0..=90.0).contains(&r.latitude)
        && (-180.0..=180.0).contains(&r.longitude)
        && r.timestamp > 0)
}

/// Drop records with missing or out-of-range location fields, then drop
/// repeats of an (aircraft, lat, lon, alt) tuple, keeping the first.
pub fn clean(records: Vec<RawTrackRecord>) -> (Vec<RawTrackRecord>, CleanReport) {
    let mut report = CleanReport::default();
    let mut seen: HashSet<(String, u64, u64, u64)> = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if is_corrupt(&r) {
            report.corrupt += 1;
            continue;
        }
        // +0.0 and -0.0 compare equal as locations
        let key = (
            r.aircraft_id.clone(),
            (r.latitude + 0.0).to_bits(),
            (r.longitude + 0.0).to_bits(),
            (r.altitude_msl_ft + 0.0).to_bits(),
        );
        if !seen.insert(key) {
            report.duplicate += 1;
            continue;
        }
        out.push(r);
    }
    (out, report)
}

fn geodetic_to_ecef(lat_deg: f64, lon_deg: f64, h: f64) -> [f64; 3] {
    let (lat, lon) = (lat_deg.to_radians(), lon_deg.to_radians());
    let n = WGS84_A / (1.0 - WGS84_E2 * lat.sin().powi(2)).sqrt();
    [
        (n + h) * lat.cos() * lon.cos(),
        (n + h) * lat.cos() * lon.sin(),
        (n * (1.0 - WGS84_E2) + h) * lat.sin(),
    ]
}

fn ecef_to_geodetic(p: [f64; 3]) -> (f64, f64, f64) {
    let [x, y, z] = p;
    let lon = y.atan2(x);
    let r = x.hypot(y);
    let mut lat = z.atan2(r * (1.0 - WGS84_E2));
    let mut h = 0.0;
    for _ in 0..8 {
        let n = WGS84_A / (1.0 - WGS84_E2 * lat.sin().powi(2)).sqrt();
        h = r / lat.cos() - n;
        lat = z.atan2(r * (1.0 - WGS84_E2 * n / (n + h)));
    }
    (lat.to_degrees(), lon.to_degrees(), h)
}

/// East/north offsets of a surface point on the origin's tangent plane.
fn enu_horizontal(cfg: &FrameConfig, lat: f64, lon: f64) -> (f64, f64) {
    let o = geodetic_to_ecef(cfg.origin_lat, cfg.origin_lon, 0.0);
    let p = geodetic_to_ecef(lat, lon, 0.0);
    let d = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];
    let (phi, lam) = (cfg.origin_lat.to_radians(), cfg.origin_lon.to_radians());
    let east = -lam.sin() * d[0] + lam.cos() * d[1];
    let north = -phi.sin() * lam.cos() * d[0] - phi.sin() * lam.sin() * d[1] + phi.cos() * d[2];
    (east, north)
}

/// Project a record into the runway frame.
pub fn to_local(record: &RawTrackRecord, cfg: &FrameConfig) -> Result<[f64; 3], GeoError> {
    if (record.latitude - cfg.origin_lat).abs() > SMALL_AREA_DEG
        || (record.longitude - cfg.origin_lon).abs() > SMALL_AREA_DEG
    {
        return Err(GeoError::OutsideSmallArea {
            lat: record.latitude,
            lon: record.longitude,
        });
    }
    let (e, n) = enu_horizontal(cfg, record.latitude, record.longitude);
    let az = cfg.axis_azimuth_deg.to_radians();
    let x = e * az.sin() + n * az.cos();
    let y = e * az.cos() - n * az.sin();
    Ok([x, y, record.altitude_msl_ft * FT_TO_M])
}

/// Inverse of [`to_local`]: (lat, lon, altitude ft).
pub fn to_geodetic(local: [f64; 3], cfg: &FrameConfig) -> (f64, f64, f64) {
    let az = cfg.axis_azimuth_deg.to_radians();
    let [x, y, z] = local;
    let e = x * az.sin() + y * az.cos();
    let n = x * az.cos() - y * az.sin();
    // Point on the tangent plane, then drop it along the ellipsoid normal.
    let (phi, lam) = (cfg.origin_lat.to_radians(), cfg.origin_lon.to_radians());
    let o = geodetic_to_ecef(cfg.origin_lat, cfg.origin_lon, 0.0);
    let dx = -lam.sin() * e - phi.sin() * lam.cos() * n;
    let dy = lam.cos() * e - phi.sin() * lam.sin() * n;
    let dz = phi.cos() * n;
    let mut target = [o[0] + dx, o[1] + dy, o[2] + dz];
    // Iterate so the surface point's tangent-plane projection matches (e, n).
    let (mut lat, mut lon, _) = ecef_to_geodetic(target);
    for _ in 0..5 {
        let (e1, n1) = enu_horizontal(cfg, lat, lon);
        let (de, dn) = (e - e1, n - n1);
        target[0] += -lam.sin() * de - phi.sin() * lam.cos() * dn;
        target[1] += lam.cos() * de - phi.sin() * lam.sin() * dn;
        target[2] += phi.cos() * dn;
        let g = ecef_to_geodetic(target);
        lat = g.0;
        lon = g.1;
    }
    (lat, lon, z / FT_TO_M)
}

/// True when a local point lies inside the region of interest.
pub fn in_region(p: &[f64; 3], cfg: &FrameConfig) -> bool {
    p[2] / FT_TO_M <= cfg.altitude_ceiling_ft && p[0].hypot(p[1]) <= cfg.radius_m
}

/// Remove points above the altitude ceiling or beyond the radius.
pub fn crop_region(points: Vec<TrackPoint>, cfg: &FrameConfig) -> Vec<TrackPoint> {
    points.into_iter().filter(|p| in_region(&p.pos(), cfg)).collect()
}

/// Resample one agent's time-sorted points onto whole seconds by linear
/// interpolation. Gaps longer than `gap_split_s` are left open. Later points
/// sharing a timestamp with an earlier one are ignored.
pub fn interpolate_1hz(points: &[TrackPoint], gap_split_s: i64) -> Vec<TrackPoint> {
    let mut pts: Vec<&TrackPoint> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last().is_none_or(|l| p.t > l.t) {
            pts.push(p);
        }
    }
    let Some(first) = pts.first() else {
        return Vec::new();
    };
    let mut out = vec![(*first).clone()];
    for pair in pts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dt = b.t - a.t;
        if dt <= gap_split_s {
            for t in a.t + 1..b.t {
                let w = (t - a.t) as f64 / dt as f64;
                out.push(TrackPoint {
                    t,
                    agent_id: a.agent_id.clone(),
                    x: a.x + (b.x - a.x) * w,
                    y: a.y + (b.y - a.y) * w,
                    z: a.z + (b.z - a.z) * w,
                });
            }
        }
        out.push(b.clone());
    }
    out
}

/// Split 1 Hz points into scenes: maximal runs of seconds in which at least
/// one agent is present. Scene ids count up from `first_id`.
pub fn segment_scenes(
    points: Vec<TrackPoint>,
    first_id: usize,
    wind_at: impl Fn(i64) -> WindContext,
) -> Vec<Scene> {
    let mut by_time: BTreeMap<i64, Vec<TrackPoint>> = BTreeMap::new();
    for p in points {
        by_time.entry(p.t).or_default().push(p);
    }
    let mut scenes = Vec::new();
    let mut current: Vec<TrackPoint> = Vec::new();
    let mut last_t: Option<i64> = None;
    for (t, pts) in by_time {
        if last_t.is_some_and(|l| t - l > 1) {
            let id = first_id + scenes.len();
            scenes.push(Scene::new(id, std::mem::take(&mut current), &wind_at));
        }
        current.extend(pts);
        last_t = Some(t);
    }
    if !current.is_empty() {
        let id = first_id + scenes.len();
        scenes.push(Scene::new(id, current, &wind_at));
    }
    scenes
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub input_records: usize,
    pub clean: CleanReport,
    pub outside_small_area: usize,
    pub cropped: usize,
    pub scenes: usize,
}

/// Run the full chain for one day of records.
pub fn process_records(
    records: Vec<RawTrackRecord>,
    reports: &[MetarReport],
    cfg: &FrameConfig,
) -> Result<(Vec<Scene>, ProcessReport), crate::Error> {
    cfg.validate()?;
    if reports.is_empty() {
        return Err(ingest::IngestError::NoWeather.into());
    }
    let mut report = ProcessReport {
        input_records: records.len(),
        ..Default::default()
    };
    let (records, clean_report) = clean(records);
    report.clean = clean_report;

    let mut local = Vec::with_capacity(records.len());
    for r in &records {
        match to_local(r, cfg) {
            Ok([x, y, z]) => local.push(TrackPoint {
                t: r.timestamp,
                agent_id: r.aircraft_id.clone(),
                x,
                y,
                z,
            }),
            Err(_) => report.outside_small_area += 1,
        }
    }
    let before = local.len();
    let local = crop_region(local, cfg);
    report.cropped = before - local.len();

    let mut per_agent: BTreeMap<String, Vec<TrackPoint>> = BTreeMap::new();
    for p in local {
        per_agent.entry(p.agent_id.clone()).or_default().push(p);
    }
    let mut resampled = Vec::new();
    for pts in per_agent.values_mut() {
        pts.sort_by_key(|p| p.t);
        resampled.extend(interpolate_1hz(pts, cfg.gap_split_s));
    }
    let scenes = segment_scenes(resampled, 0, |t| {
        ingest::wind_to_runway_frame(&reports[ingest::nearest_report(reports, t)], cfg.axis_azimuth_deg)
    });
    report.scenes = scenes.len();
    Ok((scenes, report))
}

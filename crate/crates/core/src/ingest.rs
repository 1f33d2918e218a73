//! Ingestion of decoded ADS-B track logs and METAR weather reports.
//!
//! Track logs are newline-delimited CSV with five columns:
//! `timestamp,aircraft_id,latitude,longitude,altitude_ft`. A header line is
//! optional. METAR files hold one report per line, optionally prefixed by the
//! issue time (unix seconds or `YYYY-MM-DDTHH:MMZ`) and a comma.

use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Knots to metres per second.
pub const KT_TO_MPS: f64 = 0.514444;

/// One decoded ADS-B report.
///
/// Empty location fields decode to `NaN` so that the cleaning stage can count
/// and drop them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrackRecord {
    pub timestamp: i64,
    pub aircraft_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_msl_ft: f64,
}

/// A problem with one input line. Parsing continues past it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable stream: {0}")]
    Io(#[from] std::io::Error),
    #[error("no weather available")]
    NoWeather,
    #[error("metar: {0}")]
    Metar(#[from] MetarError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetarError {
    #[error("empty report")]
    Empty,
    #[error("bad station identifier `{0}`")]
    Station(String),
    #[error("bad issue time group `{0}`")]
    IssueTime(String),
    #[error("missing wind group")]
    MissingWind,
    #[error("ill-formed wind group `{0}`")]
    Wind(String),
    #[error("bad time prefix `{0}`")]
    Prefix(String),
}

/// Parse a track log. Returns the well-formed records in input order together
/// with one diagnostic per malformed line (1-based line numbers).
pub fn parse_track_log<R: std::io::BufRead>(
    reader: R,
) -> Result<(Vec<RawTrackRecord>, Vec<Diagnostic>), IngestError> {
    let mut records = Vec::new();
    let mut diags = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if idx == 0 && is_header(trimmed) {
            continue;
        }
        match parse_track_line(trimmed) {
            Ok(rec) => records.push(rec),
            Err(message) => diags.push(Diagnostic {
                line: lineno,
                message,
            }),
        }
    }
    Ok((records, diags))
}

fn is_header(line: &str) -> bool {
    line.split(',')
        .next()
        .map(|f| f.trim().parse::<i64>().is_err() && f.trim().chars().any(|c| c.is_alphabetic()))
        .unwrap_or(false)
}

fn parse_track_line(line: &str) -> Result<RawTrackRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 5 {
        return Err("missing field".to_string());
    }
    if fields.len() > 5 {
        return Err("too many fields".to_string());
    }
    let timestamp: i64 = fields[0]
        .parse()
        .map_err(|_| format!("bad timestamp `{}`", fields[0]))?;
    if timestamp <= 0 {
        return Err(format!("non-positive timestamp {timestamp}"));
    }
    if fields[1].is_empty() {
        return Err("empty aircraft id".to_string());
    }
    let num = |s: &str, what: &str| -> Result<f64, String> {
        if s.is_empty() {
            Ok(f64::NAN)
        } else {
            s.parse::<f64>().map_err(|_| format!("bad {what} `{s}`"))
        }
    };
    Ok(RawTrackRecord {
        timestamp,
        aircraft_id: fields[1].to_string(),
        latitude: num(fields[2], "latitude")?,
        longitude: num(fields[3], "longitude")?,
        altitude_msl_ft: num(fields[4], "altitude")?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindDirection {
    /// Degrees true, direction the wind blows from.
    Degrees(u16),
    Variable,
    Calm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetarReport {
    pub station: String,
    /// UTC seconds. Reports parsed without a time prefix carry seconds since
    /// the start of their month until [`MetarReport::anchor_month`] is applied.
    pub issue_time: i64,
    pub wind_dir: WindDirection,
    pub wind_speed_kt: u32,
    pub gust_kt: Option<u32>,
    pub raw_text: String,
}

impl MetarReport {
    /// Shift a month-relative issue time to unix seconds.
    pub fn anchor_month(&mut self, year: i32, month: u32) -> Result<(), MetarError> {
        let start = NaiveDate::from_ymd_opt(year, month, 1)
            .ok_or_else(|| MetarError::Prefix(format!("{year}-{month:02}")))?
            .and_hms_opt(0, 0, 0)
            .expect("midnight exists");
        self.issue_time += start.and_utc().timestamp();
        Ok(())
    }
}

/// Parse a single METAR body.
///
/// The wind group follows `dddssKT`, `dddssGggKT`, `VRBssKT` or `00000KT`
/// (three-digit speeds allowed). Everything else is kept only in `raw_text`.
pub fn parse_metar(raw: &str) -> Result<MetarReport, MetarError> {
    let mut tokens = raw.split_whitespace().peekable();
    let mut first = tokens.next().ok_or(MetarError::Empty)?;
    if first == "METAR" || first == "SPECI" {
        first = tokens.next().ok_or(MetarError::Empty)?;
    }
    if first.len() != 4 || !first.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(MetarError::Station(first.to_string()));
    }
    let station = first.to_string();

    let time_tok = tokens.next().ok_or(MetarError::MissingWind)?;
    let issue_time = parse_issue_group(time_tok)?;

    // Optional modifiers between the time group and the wind group.
    while let Some(&tok) = tokens.peek() {
        if tok == "AUTO" || tok == "COR" || tok == "RTD" {
            tokens.next();
        } else {
            break;
        }
    }
    let wind_tok = tokens.next().ok_or(MetarError::MissingWind)?;
    let (wind_dir, wind_speed_kt, gust_kt) = parse_wind_group(wind_tok)?;

    Ok(MetarReport {
        station,
        issue_time,
        wind_dir,
        wind_speed_kt,
        gust_kt,
        raw_text: raw.to_string(),
    })
}

fn parse_issue_group(tok: &str) -> Result<i64, MetarError> {
    let bad = || MetarError::IssueTime(tok.to_string());
    let digits = tok.strip_suffix('Z').ok_or_else(bad)?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let day: i64 = digits[0..2].parse().map_err(|_| bad())?;
    let hour: i64 = digits[2..4].parse().map_err(|_| bad())?;
    let minute: i64 = digits[4..6].parse().map_err(|_| bad())?;
    if !(1..=31).contains(&day) || hour > 23 || minute > 59 {
        return Err(bad());
    }
    Ok((day - 1) * 86_400 + hour * 3_600 + minute * 60)
}

fn parse_wind_group(tok: &str) -> Result<(WindDirection, u32, Option<u32>), MetarError> {
    let bad = || MetarError::Wind(tok.to_string());
    let body = tok.strip_suffix("KT").ok_or_else(bad)?;
    if body.len() < 5 {
        return Err(bad());
    }
    let (dir_part, rest) = body.split_at(3);
    let (speed_part, gust_part) = match rest.find('G') {
        Some(g) => (&rest[..g], Some(&rest[g + 1..])),
        None => (rest, None),
    };
    let two_or_three_digits =
        |s: &str| (s.len() == 2 || s.len() == 3) && s.bytes().all(|b| b.is_ascii_digit());
    if !two_or_three_digits(speed_part) {
        return Err(bad());
    }
    let speed: u32 = speed_part.parse().map_err(|_| bad())?;
    let gust = match gust_part {
        Some(g) if two_or_three_digits(g) => {
            let g: u32 = g.parse().map_err(|_| bad())?;
            if g < speed {
                return Err(bad());
            }
            Some(g)
        }
        Some(_) => return Err(bad()),
        None => None,
    };
    let dir = if dir_part == "VRB" {
        WindDirection::Variable
    } else if dir_part.bytes().all(|b| b.is_ascii_digit()) {
        let d: u16 = dir_part.parse().map_err(|_| bad())?;
        if d > 360 {
            return Err(bad());
        }
        if d == 0 && speed == 0 && gust.is_none() {
            WindDirection::Calm
        } else if speed == 0 {
            return Err(bad());
        } else {
            WindDirection::Degrees(d % 360)
        }
    } else {
        return Err(bad());
    };
    Ok((dir, speed, gust))
}

/// Parse one line of a METAR file. A leading `unix_seconds,` or
/// `YYYY-MM-DDTHH:MMZ,` prefix sets the issue time; otherwise `anchor` (year,
/// month) resolves the body's day/hour/minute group.
pub fn parse_metar_line(line: &str, anchor: Option<(i32, u32)>) -> Result<MetarReport, MetarError> {
    let line = line.trim();
    if let Some((prefix, body)) = line.split_once(',') {
        let t = parse_time_prefix(prefix.trim())?;
        let mut rep = parse_metar(body.trim())?;
        rep.issue_time = t;
        return Ok(rep);
    }
    let mut rep = parse_metar(line)?;
    match anchor {
        Some((y, m)) => rep.anchor_month(y, m)?,
        None => return Err(MetarError::Prefix("no time prefix and no month anchor".into())),
    }
    Ok(rep)
}

fn parse_time_prefix(s: &str) -> Result<i64, MetarError> {
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    for fmt in ["%Y-%m-%dT%H:%MZ", "%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(MetarError::Prefix(s.to_string()))
}

/// Parse a METAR file, returning reports sorted by issue time plus per-line
/// diagnostics.
pub fn parse_metar_file<R: std::io::BufRead>(
    reader: R,
    anchor: Option<(i32, u32)>,
) -> Result<(Vec<MetarReport>, Vec<Diagnostic>), IngestError> {
    let mut reports = Vec::new();
    let mut diags = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        match parse_metar_line(&line, anchor) {
            Ok(r) => reports.push(r),
            Err(e) => diags.push(Diagnostic {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    reports.sort_by_key(|r| r.issue_time);
    Ok((reports, diags))
}

/// Wind velocity resolved along (`u_along`) and to the right of (`u_cross`)
/// the runway axis, in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindContext {
    pub u_along: f64,
    pub u_cross: f64,
    pub variable: bool,
}

impl WindContext {
    pub const CALM: WindContext = WindContext {
        u_along: 0.0,
        u_cross: 0.0,
        variable: false,
    };
}

/// Resolve a report's wind into the runway frame. The air moves toward
/// `dir + 180°`; gusts are ignored.
pub fn wind_to_runway_frame(report: &MetarReport, axis_azimuth_deg: f64) -> WindContext {
    match report.wind_dir {
        WindDirection::Calm => WindContext::CALM,
        WindDirection::Variable => WindContext {
            u_along: 0.0,
            u_cross: 0.0,
            variable: true,
        },
        WindDirection::Degrees(d) => {
            wind_components(f64::from(d), f64::from(report.wind_speed_kt), axis_azimuth_deg)
        }
    }
}

/// Along/cross components for a wind blowing from `from_deg` at `speed_kt`.
pub fn wind_components(from_deg: f64, speed_kt: f64, axis_azimuth_deg: f64) -> WindContext {
    let speed = speed_kt * KT_TO_MPS;
    let rel = (from_deg + 180.0 - axis_azimuth_deg).to_radians();
    WindContext {
        u_along: speed * rel.cos(),
        u_cross: speed * rel.sin(),
        variable: false,
    }
}

/// Index of the report nearest in time to `t`; ties go to the earlier report.
/// `reports` must be sorted by issue time and non-empty.
pub fn nearest_report(reports: &[MetarReport], t: i64) -> usize {
    let idx = reports.partition_point(|r| r.issue_time < t);
    if idx == 0 {
        return 0;
    }
    if idx == reports.len() {
        return first_at(reports, reports.len() - 1);
    }
    let before = t - reports[idx - 1].issue_time;
    let after = reports[idx].issue_time - t;
    if after < before {
        idx
    } else {
        first_at(reports, idx - 1)
    }
}

// Several reports can share a timestamp; keep the first of the run.
fn first_at(reports: &[MetarReport], mut idx: usize) -> usize {
    let t = reports[idx].issue_time;
    while idx > 0 && reports[idx - 1].issue_time == t {
        idx -= 1;
    }
    idx
}

/// Pair every record with the report closest in time.
pub fn join_weather<'a>(
    records: &'a [RawTrackRecord],
    reports: &'a [MetarReport],
) -> Result<Vec<(&'a RawTrackRecord, &'a MetarReport)>, IngestError> {
    if reports.is_empty() {
        return Err(IngestError::NoWeather);
    }
    Ok(records
        .iter()
        .map(|r| (r, &reports[nearest_report(reports, r.timestamp)]))
        .collect())
}

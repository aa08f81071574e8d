//! Dark-space schedules and white-space availability.
//!
//! A transmitter is "dark" while a radiometer beam (inflated by the buffer
//! multiplier) covers it. Two granularities exist:
//!
//! * `PixelLevel`: the instantaneous beam footprint must cover the
//!   transmitter. Needs a phase-locked scanner.
//! * `ScanLine`: the whole scan line during which any boresight angle of
//!   the swath could cover the transmitter is dark.
//!
//! The scan phase of every satellite is anchored at its element epoch:
//! scan line 0 starts exactly at the epoch.
//!
//! [`dark_intervals`] prefilters with a coarse horizon check, scans the
//! candidate lines and brackets each boundary by bisection to 1 ms.
//! [`brute_force_oracle`] samples the same predicate on a uniform grid and
//! exists for verification.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Utc};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::exec::Exec;
use crate::orbit::{wgs84, GroundPoint, OrbitError, OrbitalElements, Propagator};
use crate::radiometer::{golden_min, strip_quad, BeamEllipse, RadiometerSpec, ScanFrame};
use crate::time;

/// Longest window accepted by the schedulers.
pub const MAX_WINDOW_DAYS: f64 = 30.0;

/// Satellites below this elevation (degrees) cannot cover the transmitter.
pub const HORIZON_GUARD_DEG: f64 = -2.0;

/// Step of the horizon prefilter, seconds.
pub const PREFILTER_STEP: f64 = 10.0;

/// Boundary bracketing tolerance, seconds.
pub const BOUNDARY_TOLERANCE: f64 = 1e-3;

const COARSE_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeofenceError {
    #[error("no satellites given")]
    EmptyConstellation,
    #[error("window of {days:.2} days exceeds the {MAX_WINDOW_DAYS}-day limit")]
    WindowTooLarge { days: f64 },
    #[error("window end must be after its start")]
    InvalidWindow,
    #[error("radiometer {0} is not phase locked; pixel-level geofencing needs a predictable scan phase")]
    NotPhaseLocked(String),
    #[error("invalid buffer policy: {0}")]
    InvalidPolicy(String),
    #[error("sampling step must be positive")]
    InvalidStep,
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(alias = "pixel", alias = "pixel_level")]
    PixelLevel,
    #[serde(alias = "scanline", alias = "scan_line")]
    ScanLine,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::PixelLevel => "PixelLevel",
            PolicyKind::ScanLine => "ScanLine",
        })
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = GeofenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "pixel" | "pixellevel" => Ok(PolicyKind::PixelLevel),
            "scanline" | "line" => Ok(PolicyKind::ScanLine),
            _ => Err(GeofenceError::InvalidPolicy(format!("unknown policy kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferPolicy {
    pub kind: PolicyKind,
    /// footprint inflation factor, ≥ 1
    #[serde(default = "one")]
    pub buffer_multiplier: f64,
    /// seconds of guard time added at both ends of every interval
    #[serde(default)]
    pub temporal_pad: f64,
}

fn one() -> f64 {
    1.0
}

impl BufferPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            buffer_multiplier: 1.0,
            temporal_pad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeofenceError> {
        if !(self.buffer_multiplier >= 1.0 && self.buffer_multiplier.is_finite()) {
            return Err(GeofenceError::InvalidPolicy(format!(
                "buffer_multiplier must be >= 1, got {}",
                self.buffer_multiplier
            )));
        }
        if !(self.temporal_pad >= 0.0 && self.temporal_pad.is_finite()) {
            return Err(GeofenceError::InvalidPolicy(format!(
                "temporal_pad must be >= 0, got {}",
                self.temporal_pad
            )));
        }
        Ok(())
    }

    /// Checks the policy against a radiometer.
    pub fn check_radiometer(&self, spec: &RadiometerSpec) -> Result<(), GeofenceError> {
        if self.kind == PolicyKind::PixelLevel && !spec.phase_locked {
            return Err(GeofenceError::NotPhaseLocked(spec.name.clone()));
        }
        Ok(())
    }
}

/// One satellite of a constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct Satellite {
    pub id: String,
    pub elements: OrbitalElements,
    pub radiometer: RadiometerSpec,
}

impl Satellite {
    pub fn new(elements: OrbitalElements, radiometer: RadiometerSpec) -> Self {
        Self {
            id: elements.label(),
            elements,
            radiometer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntervalSource {
    pub satellite_id: String,
    pub scan_line_index: i64,
}

/// A merged dark interval. `satellite_id` and `scan_line_index` name the
/// earliest contributor; `sources` lists all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkInterval {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub satellite_id: String,
    pub scan_line_index: i64,
    pub sources: Vec<IntervalSource>,
}

impl DarkInterval {
    fn single(start: DateTime<Utc>, end: DateTime<Utc>, satellite_id: &str, line: i64) -> Self {
        Self {
            start,
            end,
            satellite_id: satellite_id.to_string(),
            scan_line_index: line,
            sources: vec![IntervalSource {
                satellite_id: satellite_id.to_string(),
                scan_line_index: line,
            }],
        }
    }

    pub fn duration(&self) -> f64 {
        time::elapsed_seconds(&self.start, &self.end)
    }

    pub fn contains(&self, other: &DarkInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkSchedule {
    pub tx_id: String,
    pub policy: BufferPolicy,
    pub window: (DateTime<Utc>, DateTime<Utc>),
    pub intervals: Vec<DarkInterval>,
}

#[derive(Serialize)]
struct ScheduleRow<'a> {
    tx_id: &'a str,
    satellite_id: String,
    scan_line_index: String,
    start_utc: String,
    end_utc: String,
    policy_kind: String,
}

impl DarkSchedule {
    fn rows(&self) -> impl Iterator<Item = ScheduleRow<'_>> {
        self.intervals.iter().map(move |iv| {
            let join = |f: &dyn Fn(&IntervalSource) -> String| {
                iv.sources.iter().map(f).collect::<Vec<_>>().join(";")
            };
            ScheduleRow {
                tx_id: &self.tx_id,
                satellite_id: join(&|s| s.satellite_id.clone()),
                scan_line_index: join(&|s| s.scan_line_index.to_string()),
                start_utc: time::format_iso(&iv.start),
                end_utc: time::format_iso(&iv.end),
                policy_kind: self.policy.kind.to_string(),
            }
        })
    }

    /// CSV rows; merged intervals list every source, `;`-separated.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_schedules_csv(std::slice::from_ref(self), out)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for iv in &self.intervals {
            let line = serde_json::json!({
                "tx_id": self.tx_id,
                "satellite_id": iv.satellite_id,
                "scan_line_index": iv.scan_line_index,
                "start_utc": time::format_iso(&iv.start),
                "end_utc": time::format_iso(&iv.end),
                "policy_kind": self.policy.kind.to_string(),
                "sources": iv.sources,
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Total dark time, seconds.
    pub fn dark_seconds(&self) -> f64 {
        self.intervals.iter().map(DarkInterval::duration).sum()
    }

    /// Whether every interval of `other` lies inside one of ours.
    pub fn covers(&self, other: &DarkSchedule) -> bool {
        other
            .intervals
            .iter()
            .all(|o| self.intervals.iter().any(|s| s.contains(o)))
    }
}

/// Writes several schedules into one CSV with a single header.
pub fn write_schedules_csv<W: Write>(schedules: &[DarkSchedule], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["tx_id", "satellite_id", "scan_line_index", "start_utc", "end_utc", "policy_kind"])?;
    for s in schedules {
        for row in s.rows() {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// How dark time is handled by the network; accounting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DarkHandling {
    /// transmissions pause
    #[default]
    Paused,
    /// traffic moves to another band
    Migrated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilityReport {
    pub tx_id: String,
    pub window_seconds: f64,
    pub dark_seconds: f64,
    pub white_fraction: f64,
    pub dark_fraction: f64,
    #[serde(serialize_with = "ratio_or_infinite")]
    pub white_to_dark_ratio: f64,
    /// dark seconds of each merged interval credited to every satellite that
    /// contributed to it
    pub per_satellite_breakdown: BTreeMap<String, f64>,
    pub dark_handling: DarkHandling,
}

fn ratio_or_infinite<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("infinite")
    }
}

/// White/dark partition of the schedule window.
pub fn availability(schedule: &DarkSchedule) -> AvailabilityReport {
    let window_seconds = time::elapsed_seconds(&schedule.window.0, &schedule.window.1);
    let dark_seconds = schedule.dark_seconds();
    let dark_fraction = if window_seconds > 0.0 {
        (dark_seconds / window_seconds).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let white_fraction = 1.0 - dark_fraction;
    let mut per_satellite = BTreeMap::new();
    for iv in &schedule.intervals {
        let mut ids: Vec<&str> = iv.sources.iter().map(|s| s.satellite_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            *per_satellite.entry(id.to_string()).or_insert(0.0) += iv.duration();
        }
    }
    AvailabilityReport {
        tx_id: schedule.tx_id.clone(),
        window_seconds,
        dark_seconds,
        white_fraction,
        dark_fraction,
        white_to_dark_ratio: if dark_fraction > 0.0 {
            white_fraction / dark_fraction
        } else {
            f64::INFINITY
        },
        per_satellite_breakdown: per_satellite,
        dark_handling: DarkHandling::Paused,
    }
}

impl AvailabilityReport {
    pub fn with_handling(mut self, handling: DarkHandling) -> Self {
        self.dark_handling = handling;
        self
    }
}

/// Dark time found inside one scan line, seconds since the satellite epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LineEvent {
    pub line: i64,
    pub start: f64,
    pub end: f64,
    /// time of the smallest pixel margin
    pub t_min: f64,
}

/// Subtension geometry of one (satellite, transmitter) pair.
#[derive(Debug, Clone)]
pub(crate) struct Tracker<'a> {
    pub sat: &'a Satellite,
    pub prop: Propagator,
    pub tx_ecef: Vector3<f64>,
    tx_up: Vector3<f64>,
    tx_altitude: f64,
    half_beam: f64,
    m2: f64,
    sin_guard: f64,
}

impl<'a> Tracker<'a> {
    pub fn new(sat: &'a Satellite, tx: &GroundPoint, multiplier: f64) -> Result<Self, GeofenceError> {
        Ok(Self {
            sat,
            prop: Propagator::new(&sat.elements)?,
            tx_ecef: tx.ecef(),
            tx_up: wgs84::enu_basis(tx)[2],
            tx_altitude: tx.altitude,
            half_beam: sat.radiometer.beamwidth_3db / 2.0,
            m2: multiplier * multiplier,
            sin_guard: HORIZON_GUARD_DEG.to_radians().sin(),
        })
    }

    pub fn period(&self) -> f64 {
        self.sat.radiometer.scan_period
    }

    pub fn offset(&self, t: &DateTime<Utc>) -> f64 {
        time::elapsed_seconds(&self.sat.elements.epoch, t)
    }

    pub fn instant(&self, seconds: f64) -> DateTime<Utc> {
        time::add_seconds(&self.sat.elements.epoch, seconds)
    }

    /// Sine of the satellite elevation seen from the transmitter.
    pub fn sin_elevation(&self, pos: &Vector3<f64>) -> f64 {
        let d = pos - self.tx_ecef;
        d.dot(&self.tx_up) / d.norm()
    }

    /// Scan frame at `s`, or `None` when the satellite is below the guard.
    fn frame(&self, s: f64) -> Option<ScanFrame> {
        let (pos, vel) = self.prop.ecef_at_offset(s).ok()?;
        if self.sin_elevation(&pos) < self.sin_guard {
            return None;
        }
        Some(ScanFrame::from_state(&crate::orbit::SatelliteState {
            t: self.sat.elements.epoch,
            position_ecef: pos,
            velocity_ecef: vel,
            geodetic: wgs84::ecef_to_geodetic(&pos),
        }))
    }

    /// Pixel margin `q/m² - 1` of the instantaneous beam at `s`.
    pub fn pixel_margin(&self, s: f64) -> f64 {
        let Some(frame) = self.frame(s) else {
            return f64::INFINITY;
        };
        let angle = self.sat.radiometer.boresight_at(s);
        match BeamEllipse::project(&frame, angle, self.half_beam, self.tx_altitude) {
            Ok(e) => e.quad(&self.tx_ecef) / self.m2 - 1.0,
            Err(_) => f64::INFINITY,
        }
    }

    /// Strip margin at `s`: best boresight angle of the swath.
    pub fn strip_margin(&self, s: f64) -> f64 {
        let Some(frame) = self.frame(s) else {
            return f64::INFINITY;
        };
        let h = self.sat.radiometer.scan_half_angle;
        let own = BeamEllipse::project(&frame, self.sat.radiometer.boresight_at(s), self.half_beam, self.tx_altitude)
            .map(|e| e.quad(&self.tx_ecef))
            .unwrap_or(f64::INFINITY);
        let q = strip_quad(&frame, &self.tx_ecef, self.half_beam, h, self.tx_altitude).min(own);
        q / self.m2 - 1.0
    }

    /// Margin for the policy's own predicate.
    pub fn dark_at(&self, s: f64, kind: PolicyKind) -> bool {
        match kind {
            PolicyKind::PixelLevel => self.pixel_margin(s) <= 0.0,
            PolicyKind::ScanLine => self.pixel_margin(s) <= 0.0 || self.strip_margin(s) <= 0.0,
        }
    }

    /// Conservative line filter: the transmitter must come within reach of
    /// the scan plane along track.
    fn line_is_candidate(&self, line: i64) -> bool {
        let p = self.period();
        let reach = 2.0 * self.m2.sqrt() * self.half_beam + 2.0;
        let along = |s: f64| -> Option<f64> {
            let (pos, vel) = self.prop.ecef_at_offset(s).ok()?;
            let frame = ScanFrame::from_state(&crate::orbit::SatelliteState {
                t: self.sat.elements.epoch,
                position_ecef: pos,
                velocity_ecef: vel,
                geodetic: wgs84::ecef_to_geodetic(&pos),
            });
            Some(frame.along_track_angle(&self.tx_ecef))
        };
        match (along(line as f64 * p), along((line + 1) as f64 * p)) {
            (Some(a), Some(b)) => a.signum() != b.signum() || a.abs().min(b.abs()) <= reach,
            _ => true,
        }
    }

    /// Minimum of `margin` over the line via coarse sampling and golden
    /// section; returns `(t, value)`.
    fn line_minimum(&self, line: i64, margin: &dyn Fn(f64) -> f64) -> (f64, f64) {
        let p = self.period();
        let (ls, le) = (line as f64 * p, (line + 1) as f64 * p - IN_LINE_GUARD);
        let step = p / COARSE_SAMPLES as f64;
        let coarse: Vec<(f64, f64)> = (0..COARSE_SAMPLES)
            .map(|i| {
                let t = ls + (i as f64 + 0.5) * step;
                (t, margin(t))
            })
            .collect();
        let (t0, m0) = coarse
            .iter()
            .copied()
            .fold((ls, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        if !m0.is_finite() {
            return (t0, m0);
        }
        let (t, m) = golden_min((t0 - step).max(ls), (t0 + step).min(le), 1e-5, margin);
        if m < m0 {
            (t, m)
        } else {
            (t0, m0)
        }
    }

    /// Pixel-level dark sub-interval of one scan line.
    pub fn pixel_event(&self, line: i64) -> Option<LineEvent> {
        let p = self.period();
        let (ls, le) = (line as f64 * p, (line + 1) as f64 * p);
        let margin = |t: f64| self.pixel_margin(t);
        let (t_min, m_min) = self.line_minimum(line, &margin);
        if m_min > 0.0 {
            return None;
        }
        // the sweep wraps at le; instants within the phase epsilon of it
        // already belong to the next line
        let last = le - IN_LINE_GUARD;
        let start = if margin(ls) <= 0.0 {
            ls
        } else {
            bisect(ls, t_min, &|t| margin(t) <= 0.0)
        };
        let end = if margin(last) <= 0.0 {
            le
        } else {
            bisect(last, t_min, &|t| margin(t) <= 0.0)
        };
        Some(LineEvent {
            line,
            start,
            end: end.max(start + 1e-6).min(le),
            t_min,
        })
    }

    /// Whole-line dark test for the scan-line policy.
    pub fn line_event(&self, line: i64) -> Option<LineEvent> {
        let p = self.period();
        let (ls, le) = (line as f64 * p, (line + 1) as f64 * p);
        let strip = |t: f64| self.strip_margin(t);
        let (t_min, m_min) = self.line_minimum(line, &strip);
        if m_min <= 0.0 {
            return Some(LineEvent {
                line,
                start: ls,
                end: le,
                t_min,
            });
        }
        self.pixel_event(line).map(|e| LineEvent {
            start: ls,
            end: le,
            ..e
        })
    }

    /// Scan lines that can contain dark time within `[from, to]` (seconds
    /// since epoch), found with a coarse horizon check.
    pub fn candidate_lines(&self, from: f64, to: f64) -> Result<Vec<i64>, GeofenceError> {
        let p = self.period();
        let first = (from / PREFILTER_STEP).floor() as i64;
        let last = (to / PREFILTER_STEP).ceil() as i64;
        let mut visible = Vec::with_capacity((last - first + 1) as usize);
        for k in first..=last {
            let (pos, _) = self.prop.ecef_at_offset(k as f64 * PREFILTER_STEP)?;
            visible.push(self.sin_elevation(&pos) >= self.sin_guard);
        }
        let mut lines = std::collections::BTreeSet::new();
        let mut k = 0usize;
        while k < visible.len() {
            if !visible[k] {
                k += 1;
                continue;
            }
            let run_start = k;
            while k < visible.len() && visible[k] {
                k += 1;
            }
            // widen by one step each side
            let s0 = ((first + run_start as i64 - 1) as f64 * PREFILTER_STEP).max(from);
            let s1 = ((first + k as i64) as f64 * PREFILTER_STEP).min(to);
            if s1 >= s0 {
                lines.extend((s0 / p).floor() as i64..=(s1 / p).floor() as i64);
            }
        }
        Ok(lines.into_iter().filter(|&l| self.line_is_candidate(l)).collect())
    }
}

/// Offset from a line's end that still resolves to the same line.
const IN_LINE_GUARD: f64 = 1e-6;

/// Locates the dark/light transition between `outside` (light) and
/// `inside` (dark) to [`BOUNDARY_TOLERANCE`]. A start boundary resolves to
/// the dark side, an end boundary to the light side.
fn bisect(outside: f64, inside: f64, dark: &dyn Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (outside, inside);
    let rising = outside < inside;
    while (hi - lo).abs() > BOUNDARY_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if dark(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if rising {
        hi
    } else {
        lo
    }
}

fn check_inputs(
    sats: &[Satellite],
    window: &(DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
) -> Result<(), GeofenceError> {
    if sats.is_empty() {
        return Err(GeofenceError::EmptyConstellation);
    }
    if window.1 <= window.0 {
        return Err(GeofenceError::InvalidWindow);
    }
    let days = time::elapsed_seconds(&window.0, &window.1) / 86_400.0;
    if days > MAX_WINDOW_DAYS {
        return Err(GeofenceError::WindowTooLarge { days });
    }
    policy.validate()?;
    for s in sats {
        policy.check_radiometer(&s.radiometer)?;
    }
    Ok(())
}

/// Pads, clips to the window, sorts and merges raw intervals.
fn assemble(
    tx_id: &str,
    window: &(DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
    raw: Vec<DarkInterval>,
) -> DarkSchedule {
    let mut ivs: Vec<DarkInterval> = raw
        .into_iter()
        .filter_map(|mut iv| {
            if policy.temporal_pad > 0.0 {
                iv.start = time::add_seconds(&iv.start, -policy.temporal_pad);
                iv.end = time::add_seconds(&iv.end, policy.temporal_pad);
            }
            iv.start = iv.start.max(window.0);
            iv.end = iv.end.min(window.1);
            (iv.end > iv.start).then_some(iv)
        })
        .collect();
    ivs.sort_by(|a, b| {
        (a.start, a.end, &a.satellite_id, a.scan_line_index).cmp(&(b.start, b.end, &b.satellite_id, b.scan_line_index))
    });
    DarkSchedule {
        tx_id: tx_id.to_string(),
        policy: *policy,
        window: *window,
        intervals: merge_sorted(ivs),
    }
}

fn merge_sorted(ivs: Vec<DarkInterval>) -> Vec<DarkInterval> {
    let mut out: Vec<DarkInterval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(cur) if iv.start <= cur.end => {
                cur.end = cur.end.max(iv.end);
                for s in iv.sources {
                    if !cur.sources.contains(&s) {
                        cur.sources.push(s);
                    }
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

/// Merges schedules of the same transmitter computed over adjacent windows.
pub fn concatenate(parts: &[DarkSchedule]) -> Option<DarkSchedule> {
    let first = parts.first()?;
    let window = (
        parts.iter().map(|p| p.window.0).min()?,
        parts.iter().map(|p| p.window.1).max()?,
    );
    let mut ivs: Vec<DarkInterval> = parts.iter().flat_map(|p| p.intervals.iter().cloned()).collect();
    ivs.sort_by(|a, b| (a.start, a.end).cmp(&(b.start, b.end)));
    Some(DarkSchedule {
        tx_id: first.tx_id.clone(),
        policy: first.policy,
        window,
        intervals: merge_sorted(ivs),
    })
}

/// Dark-space schedule of one transmitter against a constellation.
pub fn dark_intervals(
    tx_id: &str,
    tx: &GroundPoint,
    sats: &[Satellite],
    window: (DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
) -> Result<DarkSchedule, GeofenceError> {
    dark_intervals_with(tx_id, tx, sats, window, policy, Exec::default())
}

/// [`dark_intervals`] with an explicit execution mode.
pub fn dark_intervals_with(
    tx_id: &str,
    tx: &GroundPoint,
    sats: &[Satellite],
    window: (DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
    exec: Exec,
) -> Result<DarkSchedule, GeofenceError> {
    check_inputs(sats, &window, policy)?;
    let trackers = sats
        .iter()
        .map(|s| Tracker::new(s, tx, policy.buffer_multiplier))
        .collect::<Result<Vec<_>, _>>()?;
    // every line touching the padded window is evaluated in full, then
    // clipped, so results do not depend on where a window is cut
    let mut jobs = Vec::new();
    for (i, tr) in trackers.iter().enumerate() {
        let reach = tr.period() + policy.temporal_pad;
        let from = tr.offset(&window.0) - reach;
        let to = tr.offset(&window.1) + reach;
        jobs.extend(tr.candidate_lines(from, to)?.into_iter().map(|l| (i, l)));
    }
    let events = exec.map(&jobs, |&(i, line)| {
        let tr = &trackers[i];
        let ev = match policy.kind {
            PolicyKind::PixelLevel => tr.pixel_event(line),
            PolicyKind::ScanLine => tr.line_event(line),
        };
        ev.map(|e| DarkInterval::single(tr.instant(e.start), tr.instant(e.end), &tr.sat.id, e.line))
    });
    Ok(assemble(tx_id, &window, policy, events.into_iter().flatten().collect()))
}

/// Independent transmitter queries, one schedule each (in input order).
pub fn dark_intervals_batch(
    txs: &[(String, GroundPoint)],
    sats: &[Satellite],
    window: (DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
    exec: Exec,
) -> Result<Vec<DarkSchedule>, GeofenceError> {
    // parallelism lives inside each query; queries run in order
    txs.iter()
        .map(|(id, p)| dark_intervals_with(id, p, sats, window, policy, exec))
        .collect()
}

/// Reference schedule by uniform sampling every `dt` seconds.
///
/// A dark sample at `t` marks `[t, t + dt)` (PixelLevel) or its whole scan
/// line (ScanLine). Intervals shorter than `dt` may be missed.
pub fn brute_force_oracle(
    tx_id: &str,
    tx: &GroundPoint,
    sats: &[Satellite],
    window: (DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
    dt: f64,
) -> Result<DarkSchedule, GeofenceError> {
    brute_force_oracle_with(tx_id, tx, sats, window, policy, dt, Exec::default())
}

pub fn brute_force_oracle_with(
    tx_id: &str,
    tx: &GroundPoint,
    sats: &[Satellite],
    window: (DateTime<Utc>, DateTime<Utc>),
    policy: &BufferPolicy,
    dt: f64,
    exec: Exec,
) -> Result<DarkSchedule, GeofenceError> {
    if !(dt > 0.0) {
        return Err(GeofenceError::InvalidStep);
    }
    check_inputs(sats, &window, policy)?;
    let pad = policy.temporal_pad;
    let span = time::elapsed_seconds(&window.0, &window.1) + 2.0 * pad;
    let n = (span / dt).ceil() as usize;
    let mut raw = Vec::new();
    for sat in sats {
        let tr = Tracker::new(sat, tx, policy.buffer_multiplier)?;
        // surfaces propagation errors before the sampling loop swallows them
        tr.prop.ecef_at_offset(tr.offset(&window.0) - pad)?;
        tr.prop.ecef_at_offset(tr.offset(&window.1) + pad)?;
        let base = tr.offset(&window.0) - pad;
        let dark = exec.map_range(n, |i| tr.dark_at(base + i as f64 * dt, policy.kind));
        let p = tr.period();
        let mut i = 0;
        while i < n {
            if !dark[i] {
                i += 1;
                continue;
            }
            let first = i;
            while i < n && dark[i] {
                i += 1;
            }
            let (s0, s1) = (base + first as f64 * dt, base + i as f64 * dt);
            match policy.kind {
                PolicyKind::PixelLevel => {
                    let line = (s0 / p).floor() as i64;
                    raw.push(DarkInterval::single(tr.instant(s0), tr.instant(s1), &sat.id, line));
                }
                PolicyKind::ScanLine => {
                    let last_sample = base + (i - 1) as f64 * dt;
                    for line in (s0 / p).floor() as i64..=(last_sample / p).floor() as i64 {
                        let (ls, le) = (line as f64 * p, (line + 1) as f64 * p);
                        raw.push(DarkInterval::single(tr.instant(ls), tr.instant(le), &sat.id, line));
                    }
                }
            }
        }
    }
    Ok(assemble(tx_id, &window, policy, raw))
}

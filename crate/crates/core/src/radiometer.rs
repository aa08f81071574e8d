//! Cross-track scanning radiometer model.
//!
//! The boresight sweeps linearly from `-scan_half_angle` to
//! `+scan_half_angle` once per scan period, perpendicular to the ground
//! track. Sample `k` of a line starts at `k * scan_period / samples_per_scan`
//! and its nominal boresight is `-h + k * 2h / (samples_per_scan - 1)`; the
//! continuous sweep passes through each nominal angle at the sample's start
//! and dwells at `+h` for the last sample.
//!
//! A pixel footprint is the 3 dB beam cone projected onto the ellipsoid. It
//! is described by two conjugate semi-diameters in the local tangent plane at
//! the boresight intersection, so that "inside" is the quadratic form
//! `q(p) <= 1` (or `q <= m²` once inflated by a buffer multiplier `m`).

use std::path::Path;

use chrono::{DateTime, Utc};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geofence::{BufferPolicy, PolicyKind};
use crate::orbit::{wgs84, GroundPoint, SatelliteState};
use crate::time;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadiometerError {
    #[error("radiometer {0} is not phase locked; use scan-line geofencing")]
    NotPhaseLocked(String),
    #[error("boresight does not intersect the Earth")]
    NoIntersection,
    #[error("invalid radiometer spec: {0}")]
    InvalidSpec(String),
    #[error("unknown radiometer preset {0:?}")]
    UnknownPreset(String),
}

/// RF and scan-geometry parameters of one radiometer channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiometerSpec {
    pub name: String,
    pub itu_sensor_id: String,
    /// Hz
    pub center_frequency: f64,
    /// Hz
    pub bandwidth: f64,
    /// dBi
    pub antenna_max_gain: f64,
    /// degrees, full width
    pub beamwidth_3db: f64,
    /// seconds
    pub scan_period: f64,
    /// degrees, maximum cross-track boresight angle from nadir
    pub scan_half_angle: f64,
    pub samples_per_scan: u32,
    /// kelvin
    pub n_temp: f64,
    /// scan phase predictable from satellite position
    pub phase_locked: bool,
}

const PHASE_EPSILON: f64 = 1e-9;

const PRESETS: &[(&str, &str)] = &[
    ("atms", include_str!("../presets/atms.json")),
    ("amsu-a", include_str!("../presets/amsu_a.json")),
];

impl RadiometerSpec {
    pub fn validate(&self) -> Result<(), RadiometerError> {
        let bad = |msg: &str| Err(RadiometerError::InvalidSpec(format!("{}: {msg}", self.name)));
        if !(self.bandwidth > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(self.center_frequency > 0.0) {
            return bad("center_frequency must be positive");
        }
        if !(self.beamwidth_3db > 0.0 && self.beamwidth_3db < 90.0) {
            return bad("beamwidth_3db must be in (0, 90)");
        }
        if !(self.scan_period > 0.0) {
            return bad("scan_period must be positive");
        }
        if self.samples_per_scan < 1 {
            return bad("samples_per_scan must be at least 1");
        }
        if !(self.scan_half_angle >= 0.0 && self.scan_half_angle < 90.0) {
            return bad("scan_half_angle must be in [0, 90)");
        }
        if !(self.n_temp >= 0.0) {
            return bad("n_temp must be non-negative");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RadiometerError> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| RadiometerError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, RadiometerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RadiometerError::InvalidSpec(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Built-in preset by name (`atms`, `amsu-a`), case-insensitive.
    pub fn preset(name: &str) -> Result<Self, RadiometerError> {
        let key = name.to_ascii_lowercase().replace('_', "-");
        PRESETS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, json)| Self::from_json(json))
            .unwrap_or_else(|| Err(RadiometerError::UnknownPreset(name.to_string())))
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(k, _)| *k)
    }

    /// Dwell time of one sample, seconds.
    pub fn dwell(&self) -> f64 {
        self.scan_period / f64::from(self.samples_per_scan)
    }

    /// Angular step between nominal sample boresights, degrees.
    pub fn sample_spacing(&self) -> f64 {
        if self.samples_per_scan > 1 {
            2.0 * self.scan_half_angle / f64::from(self.samples_per_scan - 1)
        } else {
            0.0
        }
    }

    /// Nominal boresight of sample `k`, degrees.
    pub fn sample_boresight(&self, k: u32) -> f64 {
        (-self.scan_half_angle + self.sample_spacing() * f64::from(k)).min(self.scan_half_angle)
    }

    /// (line, sample, seconds into the line) for time since the scan origin.
    /// Instants within a nanosecond of a boundary count as on it, matching
    /// the resolution of the time type.
    pub fn phase(&self, elapsed: f64) -> (i64, u32, f64) {
        let line = ((elapsed + PHASE_EPSILON) / self.scan_period).floor();
        let into = (elapsed - line * self.scan_period).clamp(0.0, self.scan_period);
        let sample = (((into + PHASE_EPSILON) / self.dwell()).floor() as u32).min(self.samples_per_scan - 1);
        (line as i64, sample, into)
    }

    /// Continuous boresight angle at `elapsed` seconds after the scan origin.
    pub fn boresight_at(&self, elapsed: f64) -> f64 {
        let (_, _, into) = self.phase(elapsed);
        (-self.scan_half_angle + self.sample_spacing() * into / self.dwell()).min(self.scan_half_angle)
    }

    /// Seconds after the scan origin at which `line` starts.
    pub fn line_start(&self, line: i64) -> f64 {
        line as f64 * self.scan_period
    }
}

/// One radiometer sample in scan-line order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub scan_line_index: i64,
    pub sample_index: u32,
    /// start of the sample's dwell
    pub t: DateTime<Utc>,
    /// degrees, signed cross-track angle from nadir (positive to the right of track)
    pub boresight_angle: f64,
}

/// Scan sample for the instant `t`, with the phase origin at `t0`.
pub fn scan_phase(spec: &RadiometerSpec, t: &DateTime<Utc>, t0: &DateTime<Utc>) -> Result<ScanSample, RadiometerError> {
    if !spec.phase_locked {
        return Err(RadiometerError::NotPhaseLocked(spec.name.clone()));
    }
    Ok(sample_at(spec, time::elapsed_seconds(t0, t), t0))
}

/// Like [`scan_phase`] but ignoring `phase_locked`; used for nominal
/// scan-line bookkeeping of unlocked sensors.
pub fn sample_at(spec: &RadiometerSpec, elapsed: f64, t0: &DateTime<Utc>) -> ScanSample {
    let (line, sample, _) = spec.phase(elapsed);
    ScanSample {
        scan_line_index: line,
        sample_index: sample,
        t: time::add_seconds(t0, spec.line_start(line) + f64::from(sample) * spec.dwell()),
        boresight_angle: spec.sample_boresight(sample),
    }
}

/// Local scan frame of a satellite: geodetic nadir, along-track and
/// right-of-track unit vectors (Earth-fixed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanFrame {
    pub origin: Vector3<f64>,
    pub down: Vector3<f64>,
    pub along: Vector3<f64>,
    pub right: Vector3<f64>,
}

impl ScanFrame {
    pub fn from_state(sat: &SatelliteState) -> Self {
        let down = -wgs84::enu_basis(&sat.geodetic)[2];
        let v = sat.velocity_ecef;
        let mut along = v - down * v.dot(&down);
        if along.norm() < 1e-9 {
            // stationary synthetic states: take north as the track direction
            along = wgs84::enu_basis(&sat.geodetic)[1];
        }
        let along = along.normalize();
        let right = down.cross(&along);
        Self {
            origin: sat.position_ecef,
            down,
            along,
            right,
        }
    }

    pub fn boresight(&self, angle_deg: f64) -> Vector3<f64> {
        let (s, c) = angle_deg.to_radians().sin_cos();
        self.down * c + self.right * s
    }

    /// Cross-track angle (degrees) whose scan plane passes closest to `p`.
    pub fn cross_track_angle(&self, p: &Vector3<f64>) -> f64 {
        let d = p - self.origin;
        d.dot(&self.right).atan2(d.dot(&self.down)).to_degrees()
    }

    /// Along-track angular offset (degrees) of `p` from the scan plane.
    pub fn along_track_angle(&self, p: &Vector3<f64>) -> f64 {
        let d = (p - self.origin).normalize();
        d.dot(&self.along).clamp(-1.0, 1.0).asin().to_degrees()
    }
}

/// Beam ellipse on the ground: centre, tangent basis and conjugate
/// semi-diameters (east/north components, meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamEllipse {
    pub center: Vector3<f64>,
    pub east: Vector3<f64>,
    pub north: Vector3<f64>,
    /// in-scan semi-diameter
    pub cross: [f64; 2],
    /// along-track semi-diameter
    pub along: [f64; 2],
    inv: [[f64; 2]; 2],
}

impl BeamEllipse {
    /// Projects the cone of half-angle `half_beam` around boresight `angle`
    /// onto the ellipsoid raised by `ground_altitude`.
    pub fn project(frame: &ScanFrame, angle: f64, half_beam: f64, ground_altitude: f64) -> Result<Self, RadiometerError> {
        let hit = |dir: &Vector3<f64>| {
            wgs84::ray_ellipsoid(&frame.origin, dir, ground_altitude).ok_or(RadiometerError::NoIntersection)
        };
        let b = frame.boresight(angle);
        let center = hit(&b)?;
        let (s, c) = half_beam.to_radians().sin_cos();
        let (sa, ca) = angle.to_radians().sin_cos();
        let in_scan = frame.right * ca - frame.down * sa;
        let c1 = hit(&(b * c + in_scan * s))?;
        let c2 = hit(&(b * c - in_scan * s))?;
        let a1 = hit(&(b * c + frame.along * s))?;
        let a2 = hit(&(b * c - frame.along * s))?;

        let (ea, eb) = (wgs84::A + ground_altitude, wgs84::B + ground_altitude);
        let normal = Vector3::new(center.x / (ea * ea), center.y / (ea * ea), center.z / (eb * eb)).normalize();
        let mut east = Vector3::z().cross(&normal);
        if east.norm() < 1e-12 {
            east = Vector3::y();
        }
        let east = east.normalize();
        let north = normal.cross(&east);

        let half = |p: Vector3<f64>, q: Vector3<f64>| {
            let d = (p - q) * 0.5;
            [d.dot(&east), d.dot(&north)]
        };
        let cross = half(c1, c2);
        let along = half(a1, a2);
        let det = cross[0] * along[1] - along[0] * cross[1];
        if det.abs() < 1e-6 {
            return Err(RadiometerError::NoIntersection);
        }
        let inv = [[along[1] / det, -along[0] / det], [-cross[1] / det, cross[0] / det]];
        Ok(Self {
            center,
            east,
            north,
            cross,
            along,
            inv,
        })
    }

    /// Tangent-plane coordinates (east, north) of `p` relative to the centre.
    pub fn local(&self, p: &Vector3<f64>) -> [f64; 2] {
        let d = p - self.center;
        [d.dot(&self.east), d.dot(&self.north)]
    }

    /// Quadratic form value; 1 on the 3 dB ellipse.
    pub fn quad(&self, p: &Vector3<f64>) -> f64 {
        let [x, y] = self.local(p);
        let a = self.inv[0][0] * x + self.inv[0][1] * y;
        let b = self.inv[1][0] * x + self.inv[1][1] * y;
        a * a + b * b
    }

    /// Point on the tangent plane for unit-disk coordinates `(a, b)`.
    pub fn point(&self, a: f64, b: f64) -> Vector3<f64> {
        let e = a * self.cross[0] + b * self.along[0];
        let n = a * self.cross[1] + b * self.along[1];
        self.center + self.east * e + self.north * n
    }

    /// (semi_major, semi_minor, major-axis azimuth in [0, 180) degrees).
    pub fn axes(&self) -> (f64, f64, f64) {
        // M = [cross along] in (east, north) rows; M Mᵀ eigen-decomposition
        let (m00, m01, m10, m11) = (self.cross[0], self.along[0], self.cross[1], self.along[1]);
        let s_ee = m00 * m00 + m01 * m01;
        let s_nn = m10 * m10 + m11 * m11;
        let s_en = m00 * m10 + m01 * m11;
        let mean = 0.5 * (s_ee + s_nn);
        let diff = 0.5 * (s_ee - s_nn);
        let root = diff.hypot(s_en);
        let major = (mean + root).sqrt();
        let minor = (mean - root).max(0.0).sqrt();
        // principal direction angle from east, then convert to azimuth
        let theta = 0.5 * (2.0 * s_en).atan2(s_ee - s_nn);
        let azimuth = (90.0 - theta.to_degrees()).rem_euclid(180.0);
        (major, minor, azimuth)
    }

    /// Area, m².
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.cross[0] * self.along[1] - self.along[0] * self.cross[1]).abs()
    }
}

/// Everything needed to re-project a footprint's beam at other scan angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub frame: ScanFrame,
    pub ellipse: BeamEllipse,
    pub half_beam: f64,
    pub scan_half_angle: f64,
    pub ground_altitude: f64,
}

impl BeamGeometry {
    /// Strip quadratic form: smallest `q` over every boresight angle in the
    /// scan range (always including this footprint's own angle).
    pub fn strip_quad(&self, p: &Vector3<f64>) -> f64 {
        strip_quad(&self.frame, p, self.half_beam, self.scan_half_angle, self.ground_altitude)
            .min(self.ellipse.quad(p))
    }
}

/// Which satellite and sample produced a footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintSource {
    pub satellite_id: String,
    pub sample: ScanSample,
}

/// Ground ellipse observed by one radiometer sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFootprint {
    pub center: GroundPoint,
    /// meters
    pub semi_major: f64,
    /// meters
    pub semi_minor: f64,
    /// major-axis azimuth, degrees in [0, 180)
    pub orientation: f64,
    pub source: FootprintSource,
    pub geometry: BeamGeometry,
}

impl PixelFootprint {
    /// Quadratic form of `tx` against this footprint scaled by `multiplier`
    /// (≤ 1 means inside the inflated ellipse).
    pub fn scaled_quad(&self, tx: &GroundPoint, multiplier: f64) -> f64 {
        self.geometry.ellipse.quad(&tx.ecef()) / (multiplier * multiplier)
    }
}

/// Pixel footprint of `sample` seen from `sat`, at ground altitude 0.
pub fn pixel_footprint(sat: &SatelliteState, sample: &ScanSample, spec: &RadiometerSpec) -> Result<PixelFootprint, RadiometerError> {
    pixel_footprint_at(sat, sample, spec, 0.0, "")
}

/// [`pixel_footprint`] over terrain at `ground_altitude` meters, tagged with
/// a satellite identifier.
pub fn pixel_footprint_at(
    sat: &SatelliteState,
    sample: &ScanSample,
    spec: &RadiometerSpec,
    ground_altitude: f64,
    satellite_id: &str,
) -> Result<PixelFootprint, RadiometerError> {
    let frame = ScanFrame::from_state(sat);
    let half_beam = spec.beamwidth_3db / 2.0;
    let ellipse = BeamEllipse::project(&frame, sample.boresight_angle, half_beam, ground_altitude)?;
    let (semi_major, semi_minor, orientation) = ellipse.axes();
    let mut center = wgs84::ecef_to_geodetic(&ellipse.center);
    center.altitude = ground_altitude;
    Ok(PixelFootprint {
        center,
        semi_major,
        semi_minor,
        orientation,
        source: FootprintSource {
            satellite_id: satellite_id.to_string(),
            sample: *sample,
        },
        geometry: BeamGeometry {
            frame,
            ellipse,
            half_beam,
            scan_half_angle: spec.scan_half_angle,
            ground_altitude,
        },
    })
}

/// Whether `tx` falls inside the footprint (PixelLevel) or anywhere in the
/// footprint's scan-line strip (ScanLine), after inflation by the policy's
/// buffer multiplier.
pub fn subtends(fp: &PixelFootprint, tx: &GroundPoint, policy: &BufferPolicy) -> bool {
    let p = tx.ecef();
    let m2 = policy.buffer_multiplier * policy.buffer_multiplier;
    match policy.kind {
        PolicyKind::PixelLevel => fp.geometry.ellipse.quad(&p) <= m2,
        PolicyKind::ScanLine => fp.geometry.strip_quad(&p) <= m2,
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of `f` on `[lo, hi]`.
pub(crate) fn golden_min<F: FnMut(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Smallest beam quadratic form of `p` over all boresight angles in
/// `[-scan_half_angle, scan_half_angle]`, for a frozen satellite frame.
pub fn strip_quad(frame: &ScanFrame, p: &Vector3<f64>, half_beam: f64, scan_half_angle: f64, ground_altitude: f64) -> f64 {
    let q = |angle: f64| {
        BeamEllipse::project(frame, angle, half_beam, ground_altitude)
            .map(|e| e.quad(p))
            .unwrap_or(f64::INFINITY)
    };
    let aim = frame.cross_track_angle(p);
    let reach = 3.0 * half_beam;
    let lo = (aim - reach).clamp(-scan_half_angle, scan_half_angle);
    let hi = (aim + reach).clamp(-scan_half_angle, scan_half_angle);
    let (_, best) = if hi - lo > 1e-9 {
        golden_min(lo, hi, 1e-7, q)
    } else {
        (lo, q(lo))
    };
    best.min(q(lo)).min(q(hi))
}

/// Fraction of the `on` footprint's area also covered by `off`, computed by
/// clipping polygonal approximations in the `on` tangent plane.
pub fn overlap_fraction(on: &PixelFootprint, off: &PixelFootprint) -> f64 {
    const N: usize = 256;
    let e_on = &on.geometry.ellipse;
    let e_off = &off.geometry.ellipse;
    let ring = |e: &BeamEllipse| -> Vec<[f64; 2]> {
        (0..N)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / N as f64;
                e_on.local(&e.point(phi.cos(), phi.sin()))
            })
            .collect()
    };
    let subject = ensure_ccw(ring(e_on));
    let clip = ensure_ccw(ring(e_off));
    let on_area = polygon_area(&subject);
    if on_area <= 0.0 {
        return 0.0;
    }
    (polygon_area(&clip_convex(&subject, &clip)) / on_area).clamp(0.0, 1.0)
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        sum += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * sum
}

fn ensure_ccw(mut poly: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    if polygon_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Sutherland–Hodgman clipping of `subject` by the convex CCW polygon `clip`.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::utc;
    use proptest::prelude::*;

    fn atms() -> RadiometerSpec {
        RadiometerSpec::preset("atms").unwrap()
    }

    fn nadir_state() -> SatelliteState {
        SatelliteState::from_geodetic(
            utc(2023, 4, 23, 0, 0, 0),
            GroundPoint::new(40.0, -121.0, 832_100.0),
            // roughly northbound, 7.4 km/s
            Vector3::new(-1000.0, 500.0, 7300.0),
        )
    }

    fn policy(kind: PolicyKind, m: f64) -> BufferPolicy {
        BufferPolicy {
            kind,
            buffer_multiplier: m,
            temporal_pad: 0.0,
        }
    }

    #[test]
    fn presets_load_and_reject_unknown_fields() {
        let a = atms();
        assert_eq!(a.samples_per_scan, 96);
        assert!(a.phase_locked);
        assert!(!RadiometerSpec::preset("amsu-a").unwrap().phase_locked);
        let mut json: serde_json::Value = serde_json::from_str(include_str!("../presets/atms.json")).unwrap();
        json["extra"] = serde_json::json!(1);
        assert!(RadiometerSpec::from_json(&json.to_string()).is_err());
        assert!(matches!(RadiometerSpec::preset("nope"), Err(RadiometerError::UnknownPreset(_))));
    }

    #[test]
    fn invalid_specs() {
        let mut s = atms();
        s.bandwidth = 0.0;
        assert!(s.validate().is_err());
        let mut s = atms();
        s.beamwidth_3db = 95.0;
        assert!(s.validate().is_err());
        let mut s = atms();
        s.samples_per_scan = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn phase_origin_and_period() {
        let spec = atms();
        let t0 = utc(2023, 4, 23, 0, 0, 0);
        let s0 = scan_phase(&spec, &t0, &t0).unwrap();
        assert_eq!((s0.scan_line_index, s0.sample_index), (0, 0));
        assert_eq!(s0.boresight_angle, -spec.scan_half_angle);
        let s1 = scan_phase(&spec, &time::add_seconds(&t0, spec.scan_period), &t0).unwrap();
        assert_eq!((s1.scan_line_index, s1.sample_index), (1, 0));
        assert_eq!(s1.boresight_angle, s0.boresight_angle);
    }

    #[test]
    fn half_period_is_mid_scan() {
        let spec = atms();
        let t0 = utc(2023, 4, 23, 0, 0, 0);
        let s = scan_phase(&spec, &time::add_seconds(&t0, spec.scan_period / 2.0), &t0).unwrap();
        assert_eq!(s.sample_index, 48);
        assert!(s.boresight_angle.abs() <= spec.sample_spacing());
    }

    #[test]
    fn unlocked_sensor_refuses_phase() {
        let spec = RadiometerSpec::preset("amsu-a").unwrap();
        let t0 = utc(2023, 4, 23, 0, 0, 0);
        assert!(matches!(scan_phase(&spec, &t0, &t0), Err(RadiometerError::NotPhaseLocked(_))));
    }

    #[test]
    fn nadir_footprint() {
        let spec = atms();
        let sat = nadir_state();
        let sample = ScanSample {
            scan_line_index: 0,
            sample_index: 48,
            t: sat.t,
            boresight_angle: 0.0,
        };
        let fp = pixel_footprint(&sat, &sample, &spec).unwrap();
        let sub = GroundPoint::new(40.0, -121.0, 0.0);
        assert!(wgs84::surface_distance(&fp.center, &sub) < 100.0);
        // flat-Earth oracle: 2 h tan(bw/2)
        let oracle = 2.0 * 832_100.0 * (2.6f64).to_radians().tan();
        assert!((oracle - 75_580.0).abs() < 100.0);
        assert!((2.0 * fp.semi_major - oracle).abs() < 1000.0, "{}", fp.semi_major);
        assert!((2.0 * fp.semi_minor - oracle).abs() < 1000.0, "{}", fp.semi_minor);
    }

    #[test]
    fn edge_footprint_is_elongated() {
        let spec = atms();
        let sat = nadir_state();
        for angle in [-spec.scan_half_angle, spec.scan_half_angle] {
            let sample = ScanSample {
                scan_line_index: 0,
                sample_index: 0,
                t: sat.t,
                boresight_angle: angle,
            };
            let fp = pixel_footprint(&sat, &sample, &spec).unwrap();
            assert!(fp.semi_major / fp.semi_minor > 1.5, "{fp:?}");
        }
    }

    #[test]
    fn boresight_beyond_limb_misses() {
        let mut spec = atms();
        spec.scan_half_angle = 80.0;
        let sample = ScanSample {
            scan_line_index: 0,
            sample_index: 0,
            t: nadir_state().t,
            boresight_angle: 80.0,
        };
        assert_eq!(
            pixel_footprint(&nadir_state(), &sample, &spec).unwrap_err(),
            RadiometerError::NoIntersection
        );
    }

    fn off_center(fp: &PixelFootprint, factor: f64) -> GroundPoint {
        let az = fp.orientation.to_radians();
        let e = &fp.geometry.ellipse;
        let p = e.center + e.east * (factor * fp.semi_major * az.sin()) + e.north * (factor * fp.semi_major * az.cos());
        wgs84::ecef_to_geodetic(&p)
    }

    #[test]
    fn subtension_buffering() {
        let spec = atms();
        let sat = nadir_state();
        let sample = ScanSample {
            scan_line_index: 0,
            sample_index: 70,
            t: sat.t,
            boresight_angle: 25.0,
        };
        let fp = pixel_footprint(&sat, &sample, &spec).unwrap();
        for kind in [PolicyKind::PixelLevel, PolicyKind::ScanLine] {
            assert!(subtends(&fp, &fp.center, &policy(kind, 1.0)));
            assert!(subtends(&fp, &fp.center, &policy(kind, 2.0)));
        }
        let far = off_center(&fp, 10.0);
        assert!(!subtends(&fp, &far, &policy(PolicyKind::PixelLevel, 2.0)));
        let near = off_center(&fp, 1.5);
        assert!(subtends(&fp, &near, &policy(PolicyKind::PixelLevel, 2.0)));
        assert!(!subtends(&fp, &near, &policy(PolicyKind::PixelLevel, 1.0)));
        // cross-track far point is still inside the swath strip
        let across = wgs84::ecef_to_geodetic(&(fp.geometry.ellipse.center + fp.geometry.frame.right * 300_000.0));
        assert!(subtends(&fp, &across, &policy(PolicyKind::ScanLine, 1.0)));
        assert!(!subtends(&fp, &across, &policy(PolicyKind::PixelLevel, 1.0)));
    }

    #[test]
    fn consecutive_samples_overlap_when_oversampled() {
        let spec = atms();
        assert!(spec.sample_spacing() < spec.beamwidth_3db);
        let sat = nadir_state();
        let mk = |k: u32| {
            let s = ScanSample {
                scan_line_index: 0,
                sample_index: k,
                t: sat.t,
                boresight_angle: spec.sample_boresight(k),
            };
            pixel_footprint(&sat, &s, &spec).unwrap()
        };
        for k in [0, 30, 47, 80, 94] {
            let f = overlap_fraction(&mk(k), &mk(k + 1));
            assert!(f > 0.5, "sample {k}: {f}");
        }
        assert_eq!(overlap_fraction(&mk(0), &mk(95)), 0.0);
        assert!((overlap_fraction(&mk(10), &mk(10)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nadir_pixel_is_overhead() {
        let spec = atms();
        let sat = nadir_state();
        let sample = ScanSample {
            scan_line_index: 0,
            sample_index: 48,
            t: sat.t,
            boresight_angle: 0.0,
        };
        let fp = pixel_footprint(&sat, &sample, &spec).unwrap();
        let look = crate::orbit::topocentric(&sat, &fp.center);
        assert!(look.elevation > 89.9);
    }

    proptest! {
        #[test]
        fn scan_phase_is_periodic(frac in 0.0f64..1.0, k in -1000i64..1000) {
            let spec = atms();
            // stay clear of sample boundaries so float rounding cannot flip them
            let dwell = spec.dwell();
            let into = (frac * (spec.samples_per_scan as f64)).floor() * dwell + 0.5 * dwell;
            let base = 1234.0 * spec.scan_period + into;
            let (l0, s0, _) = spec.phase(base);
            let (l1, s1, _) = spec.phase(base + k as f64 * spec.scan_period);
            prop_assert_eq!(l1 - l0, k);
            prop_assert_eq!(s0, s1);
            prop_assert_eq!(spec.sample_boresight(s0), spec.sample_boresight(s1));
        }

        #[test]
        fn pixel_implies_strip(angle in -52.0f64..52.0, a in -3.0f64..3.0, b in -3.0f64..3.0, m in 1.0f64..3.0) {
            let spec = atms();
            let sat = nadir_state();
            let sample = ScanSample { scan_line_index: 0, sample_index: 0, t: sat.t, boresight_angle: angle };
            let fp = pixel_footprint(&sat, &sample, &spec).unwrap();
            let tx = wgs84::ecef_to_geodetic(&fp.geometry.ellipse.point(a, b));
            if subtends(&fp, &tx, &policy(PolicyKind::PixelLevel, m)) {
                prop_assert!(subtends(&fp, &tx, &policy(PolicyKind::ScanLine, m)));
            }
        }
    }
}

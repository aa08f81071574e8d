//! TLE ingestion, SGP4 propagation and ground-relative geometry.
//!
//! Propagation uses SGP4 with WGS-72 gravity constants (the model TLEs are
//! fitted against, run in AFSPC-compatibility mode so that the published
//! verification vectors reproduce). The TEME output is rotated into the
//! Earth-fixed frame with IAU-82 GMST; geodetic coordinates use WGS-84.

mod tle;
pub mod wgs84;

use chrono::{DateTime, Utc};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time;

pub use tle::{checksum, parse_tle, parse_tle_file};

/// Propagation beyond this distance from the element epoch is refused.
pub const MAX_EPOCH_OFFSET_DAYS: f64 = 30.0;

/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION: f64 = 7.292_115_146_706_979e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("line {line}: expected 69 characters, found {length}")]
    LineLength { line: u8, length: usize },
    #[error("line {line} column {column}: checksum is {found}, expected {expected}")]
    ChecksumMismatch {
        line: u8,
        column: usize,
        expected: u8,
        found: u8,
    },
    #[error("line {line} column {column}: cannot decode {field} from {text:?}")]
    FieldSyntax {
        line: u8,
        column: usize,
        field: &'static str,
        text: String,
    },
    #[error("element set is missing a line")]
    MissingLine,
    #[error("elements rejected by SGP4: {0}")]
    InvalidElements(String),
    #[error("orbit decayed or diverged: {0}")]
    DecayedOrbit(String),
    #[error("requested time is {days:.2} days from the element epoch (limit {MAX_EPOCH_OFFSET_DAYS})")]
    EpochTooFar { days: f64 },
}

/// Mean orbital elements decoded from a two-line element set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub name: Option<String>,
    pub catalog_number: u32,
    pub classification: char,
    pub international_designator: String,
    pub epoch: DateTime<Utc>,
    /// rev/day², as printed (already halved)
    pub mean_motion_dot: f64,
    /// rev/day³, as printed (already divided by six)
    pub mean_motion_ddot: f64,
    /// 1/earth-radii
    pub bstar: f64,
    pub ephemeris_type: u8,
    pub element_set_number: u32,
    /// degrees
    pub inclination: f64,
    /// degrees
    pub raan: f64,
    pub eccentricity: f64,
    /// degrees
    pub arg_perigee: f64,
    /// degrees
    pub mean_anomaly: f64,
    /// rev/day
    pub mean_motion: f64,
    pub revolution_number: u32,
    pub element_set_checksum_ok: bool,
}

impl OrbitalElements {
    /// Orbital period implied by the mean motion, seconds.
    pub fn period_seconds(&self) -> f64 {
        86_400.0 / self.mean_motion
    }

    /// Display identifier: the name line if present, else the catalog number.
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.catalog_number.to_string())
    }

    fn to_sgp4(&self) -> sgp4::Elements {
        sgp4::Elements {
            object_name: self.name.clone(),
            international_designator: None,
            norad_id: u64::from(self.catalog_number),
            classification: match self.classification {
                'C' => sgp4::Classification::Classified,
                'S' => sgp4::Classification::Secret,
                _ => sgp4::Classification::Unclassified,
            },
            datetime: self.epoch.naive_utc(),
            mean_motion_dot: self.mean_motion_dot,
            mean_motion_ddot: self.mean_motion_ddot,
            drag_term: self.bstar,
            element_set_number: u64::from(self.element_set_number),
            inclination: self.inclination,
            right_ascension: self.raan,
            eccentricity: self.eccentricity,
            argument_of_perigee: self.arg_perigee,
            mean_anomaly: self.mean_anomaly,
            mean_motion: self.mean_motion,
            revolution_number: u64::from(self.revolution_number),
            ephemeris_type: self.ephemeris_type,
        }
    }
}

/// A point on or above the WGS-84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    /// degrees, [-90, 90]
    pub latitude: f64,
    /// degrees, (-180, 180]
    pub longitude: f64,
    /// meters above the ellipsoid
    #[serde(default)]
    pub altitude: f64,
}

impl GroundPoint {
    /// Builds a point, clamping latitude and wrapping longitude into (-180, 180].
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Self {
        let mut lon = (longitude + 180.0).rem_euclid(360.0) - 180.0;
        if lon <= -180.0 {
            lon += 360.0;
        }
        Self {
            latitude: latitude.clamp(-90.0, 90.0),
            longitude: lon,
            altitude,
        }
    }

    pub fn ecef(&self) -> Vector3<f64> {
        wgs84::geodetic_to_ecef(self)
    }
}

/// Satellite position as seen from a ground point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookAngles {
    /// degrees above the local horizon
    pub elevation: f64,
    /// degrees clockwise from north, [0, 360)
    pub azimuth: f64,
    /// meters
    pub slant_range: f64,
}

/// Propagated satellite state in the Earth-fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub t: DateTime<Utc>,
    /// meters
    pub position_ecef: Vector3<f64>,
    /// m/s, relative to the rotating Earth
    pub velocity_ecef: Vector3<f64>,
    pub geodetic: GroundPoint,
}

impl SatelliteState {
    /// Builds a state from geodetic coordinates and an Earth-fixed velocity.
    pub fn from_geodetic(t: DateTime<Utc>, geodetic: GroundPoint, velocity_ecef: Vector3<f64>) -> Self {
        Self {
            t,
            position_ecef: geodetic.ecef(),
            velocity_ecef,
            geodetic,
        }
    }
}

/// SGP4 propagator initialised once per element set.
#[derive(Debug, Clone)]
pub struct Propagator {
    elements: OrbitalElements,
    constants: sgp4::Constants,
    epoch_jd: f64,
    /// (SI seconds after epoch, TAI-UTC change) for leap seconds within range
    leaps: Vec<(f64, i32)>,
}

impl Propagator {
    pub fn new(elements: &OrbitalElements) -> Result<Self, OrbitError> {
        let constants = sgp4::Constants::from_elements_afspc_compatibility_mode(&elements.to_sgp4())
            .map_err(|e| OrbitError::InvalidElements(e.to_string()))?;
        let leaps = time::LEAP_SECONDS
            .windows(2)
            .filter_map(|w| {
                let (y, m, d, tai) = w[1];
                let offset = time::elapsed_seconds(&elements.epoch, &time::utc(y, m, d, 0, 0, 0));
                let near = offset.abs() <= (MAX_EPOCH_OFFSET_DAYS + 1.0) * 86_400.0;
                near.then_some((offset, tai - w[0].3))
            })
            .collect();
        Ok(Self {
            elements: elements.clone(),
            constants,
            epoch_jd: time::julian_date(&elements.epoch),
            leaps,
        })
    }

    pub fn elements(&self) -> &OrbitalElements {
        &self.elements
    }

    /// Raw SGP4 output in TEME: (position km, velocity km/s).
    pub fn propagate_teme(&self, minutes_since_epoch: f64) -> Result<([f64; 3], [f64; 3]), OrbitError> {
        let p = self
            .constants
            .propagate_afspc_compatibility_mode(sgp4::MinutesSinceEpoch(minutes_since_epoch))
            .map_err(|e| OrbitError::DecayedOrbit(e.to_string()))?;
        Ok((p.position, p.velocity))
    }

    /// Earth-fixed position and velocity (m, m/s) `seconds` SI seconds after
    /// the element epoch. Avoids calendar arithmetic in tight loops.
    pub fn ecef_at_offset(&self, seconds: f64) -> Result<(Vector3<f64>, Vector3<f64>), OrbitError> {
        let days = seconds / 86_400.0;
        if days.abs() > MAX_EPOCH_OFFSET_DAYS {
            return Err(OrbitError::EpochTooFar { days });
        }
        let (r, v) = self.propagate_teme(seconds / 60.0)?;
        // TAI-UTC at t minus TAI-UTC at epoch
        let leap: i32 = self
            .leaps
            .iter()
            .map(|&(at, d)| match (at > 0.0, seconds >= at) {
                (true, true) => d,
                (false, false) => -d,
                _ => 0,
            })
            .sum();
        let jd = self.epoch_jd + (seconds - f64::from(leap)) / 86_400.0;
        Ok(teme_to_ecef(r, v, time::gmst_jd(jd)))
    }

    /// Earth-fixed state at `t`.
    pub fn propagate(&self, t: &DateTime<Utc>) -> Result<SatelliteState, OrbitError> {
        let seconds = time::elapsed_seconds(&self.elements.epoch, t);
        let days = seconds / 86_400.0;
        if days.abs() > MAX_EPOCH_OFFSET_DAYS {
            return Err(OrbitError::EpochTooFar { days });
        }
        let (r, v) = self.propagate_teme(seconds / 60.0)?;
        let (position_ecef, velocity_ecef) = teme_to_ecef(r, v, time::gmst(t));
        Ok(SatelliteState {
            t: *t,
            position_ecef,
            velocity_ecef,
            geodetic: wgs84::ecef_to_geodetic(&position_ecef),
        })
    }
}

/// Rotates a TEME state (km, km/s) to Earth-fixed (m, m/s) given GMST.
pub fn teme_to_ecef(r: [f64; 3], v: [f64; 3], gmst: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = gmst.sin_cos();
    let rotate = |x: [f64; 3]| Vector3::new(c * x[0] + s * x[1], -s * x[0] + c * x[1], x[2]) * 1000.0;
    let r_ecef = rotate(r);
    let omega = Vector3::new(0.0, 0.0, EARTH_ROTATION);
    let v_ecef = rotate(v) - omega.cross(&r_ecef);
    (r_ecef, v_ecef)
}

/// One-shot propagation. Prefer [`Propagator`] when evaluating many instants.
pub fn propagate(elements: &OrbitalElements, t: &DateTime<Utc>) -> Result<SatelliteState, OrbitError> {
    Propagator::new(elements)?.propagate(t)
}

/// Elevation, azimuth and slant range of a satellite from a ground point,
/// in the local east-north-up frame.
pub fn topocentric(sat: &SatelliteState, ground: &GroundPoint) -> LookAngles {
    look_from(&sat.position_ecef, ground)
}

pub(crate) fn look_from(target: &Vector3<f64>, ground: &GroundPoint) -> LookAngles {
    let d = target - ground.ecef();
    let [east, north, up] = wgs84::enu_basis(ground);
    let slant_range = d.norm();
    let (e, n, u) = (d.dot(&east), d.dot(&north), d.dot(&up));
    let elevation = (u / slant_range).clamp(-1.0, 1.0).asin().to_degrees();
    let mut azimuth = e.atan2(n).to_degrees().rem_euclid(360.0);
    if azimuth >= 360.0 {
        azimuth = 0.0;
    }
    LookAngles {
        elevation,
        azimuth,
        slant_range,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table2_nadir_elevation() {
        let sat = SatelliteState::from_geodetic(
            time::utc(2023, 4, 23, 0, 0, 0),
            GroundPoint::new(40.774, -120.988, 832_100.0),
            Vector3::zeros(),
        );
        let look = topocentric(&sat, &GroundPoint::new(40.646, -121.637, 20.0));
        assert!((look.elevation - 85.6).abs() <= 0.3, "{look:?}");
    }

    #[test]
    fn table2_edge_elevation_and_range() {
        let sat = SatelliteState::from_geodetic(
            time::utc(2023, 4, 23, 0, 0, 0),
            GroundPoint::new(40.828, -121.006, 832_100.0),
            Vector3::zeros(),
        );
        let look = topocentric(&sat, &GroundPoint::new(42.701, -105.927, 20.0));
        assert!((look.elevation - 25.8).abs() <= 0.3, "{look:?}");
        assert!((look.slant_range - 1_578_000.0).abs() <= 10_000.0, "{look:?}");
    }

    #[test]
    fn directly_overhead() {
        let sat = SatelliteState::from_geodetic(
            time::utc(2023, 4, 23, 0, 0, 0),
            GroundPoint::new(12.0, 34.0, 832_100.0),
            Vector3::zeros(),
        );
        let look = topocentric(&sat, &GroundPoint::new(12.0, 34.0, 0.0));
        assert!((look.elevation - 90.0).abs() < 1e-6);
        assert!((look.slant_range - 832_100.0).abs() < 1e-6);
    }

    #[test]
    fn longitude_normalization() {
        assert_eq!(GroundPoint::new(0.0, -180.0, 0.0).longitude, 180.0);
        assert_eq!(GroundPoint::new(0.0, 540.0, 0.0).longitude, 180.0);
        assert!((GroundPoint::new(0.0, 190.0, 0.0).longitude + 170.0).abs() < 1e-12);
    }

    proptest! {
        // Along the sub-satellite radial, the nearer point sees the satellite higher.
        #[test]
        fn nearer_point_sees_higher(az in 0.0f64..360.0, d1 in 0.0f64..2.0e6, d2 in 0.0f64..2.0e6) {
            let sub = GroundPoint::new(30.0, 10.0, 0.0);
            let sat = SatelliteState::from_geodetic(time::utc(2023, 1, 1, 0, 0, 0),
                GroundPoint::new(30.0, 10.0, 832_100.0), Vector3::zeros());
            let at = |d: f64| {
                let ang = d / wgs84::MEAN_RADIUS;
                let (la, lo, a) = (sub.latitude.to_radians(), sub.longitude.to_radians(), az.to_radians());
                let lat2 = (la.sin() * ang.cos() + la.cos() * ang.sin() * a.cos()).asin();
                let lon2 = lo + (a.sin() * ang.sin() * la.cos()).atan2(ang.cos() - la.sin() * lat2.sin());
                GroundPoint::new(lat2.to_degrees(), lon2.to_degrees(), 0.0)
            };
            let (l1, l2) = (topocentric(&sat, &at(d1)), topocentric(&sat, &at(d2)));
            if l1.slant_range < l2.slant_range {
                prop_assert!(l1.elevation >= l2.elevation - 1e-9);
            } else {
                prop_assert!(l2.elevation >= l1.elevation - 1e-9);
            }
        }
    }
}

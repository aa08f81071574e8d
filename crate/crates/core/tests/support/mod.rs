//! Fixtures shared by the integration suites (also pulled into the CLI
//! acceptance harness by path).
#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use coexist::geofence::{BufferPolicy, PolicyKind, Satellite};
use coexist::orbit::{parse_tle, parse_tle_file, wgs84, GroundPoint, OrbitalElements, Propagator};
use coexist::radiometer::{RadiometerSpec, ScanFrame};
use coexist::time;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn noaa21_elements() -> OrbitalElements {
    let text = std::fs::read_to_string(fixtures_dir().join("noaa21_synthetic.tle")).unwrap();
    parse_tle_file(&text).unwrap().remove(0)
}

pub fn atms_satellite() -> Satellite {
    Satellite::new(noaa21_elements(), RadiometerSpec::preset("atms").unwrap())
}

/// One verification row: minutes since epoch, TEME position (km), velocity (km/s).
pub struct VectorRow {
    pub minutes: f64,
    pub r: [f64; 3],
    pub v: [f64; 3],
}

pub struct VectorCase {
    pub name: String,
    pub elements: OrbitalElements,
    pub rows: Vec<VectorRow>,
}

pub fn sgp4_cases() -> Vec<VectorCase> {
    let dir = fixtures_dir().join("sgp4_verification");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "tle").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let tle = std::fs::read_to_string(dir.join(format!("{name}.tle"))).unwrap();
            let mut lines = tle.lines().filter(|l| !l.trim().is_empty());
            let elements = parse_tle(lines.next().unwrap(), lines.next().unwrap()).unwrap();
            let mut rdr = csv::Reader::from_path(dir.join(format!("{name}.csv"))).unwrap();
            let rows = rdr
                .deserialize::<(f64, f64, f64, f64, f64, f64, f64)>()
                .map(|r| {
                    let (m, x, y, z, vx, vy, vz) = r.unwrap();
                    VectorRow {
                        minutes: m,
                        r: [x, y, z],
                        v: [vx, vy, vz],
                    }
                })
                .collect();
            VectorCase { name, elements, rows }
        })
        .collect()
}

/// Largest position error (m) over rows with `|t| <= max_minutes`.
pub fn max_position_error(case: &VectorCase, max_minutes: f64) -> (f64, f64) {
    let prop = Propagator::new(&case.elements).unwrap();
    let mut at_epoch = 0.0f64;
    let mut within = 0.0f64;
    for row in case.rows.iter().filter(|r| r.minutes.abs() <= max_minutes) {
        let (r, _) = prop.propagate_teme(row.minutes).unwrap();
        let err = ((r[0] - row.r[0]).powi(2) + (r[1] - row.r[1]).powi(2) + (r[2] - row.r[2]).powi(2)).sqrt() * 1000.0;
        if row.minutes == 0.0 {
            at_epoch = at_epoch.max(err);
        }
        within = within.max(err);
    }
    (at_epoch, within)
}

/// A randomized single-satellite geofence scenario.
#[derive(Debug, Clone)]
pub struct OracleFixture {
    pub tx: GroundPoint,
    pub window: (DateTime<Utc>, DateTime<Utc>),
    pub policy: BufferPolicy,
}

/// Seeded fixture: a 6 h window starting within five days of the epoch,
/// with the transmitter dropped inside the swath of a pass in the window.
pub fn oracle_fixture(sat: &Satellite, seed: u64, kind: PolicyKind) -> OracleFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0E1 ^ seed);
    let prop = Propagator::new(&sat.elements).unwrap();
    let epoch = sat.elements.epoch;
    let start = time::add_seconds(&epoch, rng.random_range(0.0..5.0 * 86_400.0));
    let window = (start, time::add_seconds(&start, 6.0 * 3600.0));
    let t = time::add_seconds(&start, rng.random_range(1800.0..19_800.0));
    let state = prop.propagate(&t).unwrap();
    let frame = ScanFrame::from_state(&state);
    let h = sat.radiometer.scan_half_angle;
    let angle = rng.random_range(-h..h);
    let hit = wgs84::ray_ellipsoid(&frame.origin, &frame.boresight(angle), 0.0).unwrap();
    let mut tx = wgs84::ecef_to_geodetic(&hit);
    tx.altitude = 0.0;
    let mut policy = BufferPolicy::new(kind);
    policy.buffer_multiplier = [1.0, 1.5, 2.0][(seed % 3) as usize];
    OracleFixture { tx, window, policy }
}

/// 1 000 ATMS pixels from consecutive scan lines and a sparse deployment
/// covering their swath.
pub fn interference_scene(
    density_per_km2: f64,
    seed: u64,
) -> (
    Satellite,
    Vec<(coexist::SatelliteState, coexist::PixelFootprint)>,
    Vec<coexist::propagation::TransmitterSpec>,
) {
    use coexist::exec::Exec;
    use coexist::propagation::*;

    let sat = atms_satellite();
    // a line well after the epoch, over mid latitudes
    let first = 1000;
    let mut pixels = scan_pixels(&sat, first..first + 12, Exec::Parallel).unwrap();
    pixels.truncate(1000);
    assert_eq!(pixels.len(), 1000);
    let lats = pixels.iter().map(|p| p.1.center.latitude);
    let lons = pixels.iter().map(|p| p.1.center.longitude);
    let area = BoundingBox {
        south: lats.clone().fold(f64::INFINITY, f64::min) - 0.5,
        north: lats.fold(f64::NEG_INFINITY, f64::max) + 0.5,
        west: lons.clone().fold(f64::INFINITY, f64::min) - 0.5,
        east: lons.fold(f64::NEG_INFINITY, f64::max) + 0.5,
    };
    let mut config = DeploymentConfig::preset(Scenario::Rural);
    for c in config.kinds.values_mut() {
        c.density_per_km2 = density_per_km2;
    }
    let deployment = generate_deployment(&area, &config, seed, 0).unwrap();
    (sat, pixels, deployment)
}

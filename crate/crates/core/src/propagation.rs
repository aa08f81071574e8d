//! Aggregate interference from ground transmitters into radiometer pixels.
//!
//! Each transmitter covered by a pixel contributes its EIRP density plus the
//! loss chain toward the satellite, optionally corrected by a two-ray ground
//! reflection term. Contributions add in the linear domain.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geofence::{BufferPolicy, PolicyKind, Satellite};
use crate::linkbudget::{atmospheric_loss_db, db_to_linear, fspl_db, linear_to_db, AtmosphereModel, LinkError, LossChain};
use crate::orbit::{topocentric, wgs84, GroundPoint, OrbitError, Propagator, SatelliteState};
use crate::radiometer::{pixel_footprint_at, subtends, PixelFootprint, RadiometerError, RadiometerSpec, ScanSample};
use crate::{time, SPEED_OF_LIGHT};

/// Default clamp for deep two-ray nulls, dB.
pub const DEFAULT_NULL_FLOOR_DB: f64 = -60.0;

/// Default ground reflection coefficient.
pub const DEFAULT_GAMMA: f64 = -0.7;

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("bounding box has no area")]
    EmptyArea,
    #[error("no interference samples")]
    NoSamples,
    #[error("invalid transmitter {id}: {reason}")]
    InvalidTransmitter { id: String, reason: String },
    #[error("invalid deployment config: {0}")]
    InvalidConfig(String),
    #[error("deployment line {line}: {source}")]
    DeploymentSyntax { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Radiometer(#[from] RadiometerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransmitterKind {
    #[serde(rename = "gNB")]
    Gnb,
    #[serde(rename = "UE")]
    Ue,
    #[serde(rename = "IAB")]
    Iab,
    #[serde(rename = "FWA_ClassV")]
    FwaClassV,
    Flashlight,
}

impl fmt::Display for TransmitterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransmitterKind::Gnb => "gNB",
            TransmitterKind::Ue => "UE",
            TransmitterKind::Iab => "IAB",
            TransmitterKind::FwaClassV => "FWA_ClassV",
            TransmitterKind::Flashlight => "Flashlight",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pointing {
    /// degrees clockwise from north
    pub azimuth: f64,
    /// degrees above the horizon
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterSpec {
    pub id: String,
    pub location: GroundPoint,
    /// meters above local ground
    pub antenna_height: f64,
    /// dBm/MHz toward the satellite
    pub eirp_density: f64,
    /// Hz
    pub center_frequency: f64,
    /// Hz
    pub emission_bandwidth: f64,
    #[serde(default)]
    pub pointing: Pointing,
    pub kind: TransmitterKind,
}

impl TransmitterSpec {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let bad = |reason: &str| {
            Err(PropagationError::InvalidTransmitter {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.emission_bandwidth > 0.0) {
            return bad("emission_bandwidth must be positive");
        }
        if !(self.antenna_height >= 0.0) {
            return bad("antenna_height must be non-negative");
        }
        if !(self.center_frequency > 0.0) {
            return bad("center_frequency must be positive");
        }
        if !self.eirp_density.is_finite() {
            return bad("eirp_density must be finite");
        }
        Ok(())
    }

    /// Antenna phase centre.
    pub fn antenna(&self) -> GroundPoint {
        GroundPoint {
            altitude: self.location.altitude + self.antenna_height,
            ..self.location
        }
    }
}

pub fn write_deployment_jsonl<W: Write>(txs: &[TransmitterSpec], mut out: W) -> std::io::Result<()> {
    for tx in txs {
        serde_json::to_writer(&mut out, tx)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one transmitter per non-blank line.
pub fn read_deployment_jsonl<R: BufRead>(input: R) -> Result<Vec<TransmitterSpec>, PropagationError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tx: TransmitterSpec =
            serde_json::from_str(&line).map_err(|source| PropagationError::DeploymentSyntax { line: i + 1, source })?;
        tx.validate()?;
        out.push(tx);
    }
    Ok(out)
}

/// `20 log10 |1 + Γ e^{jkΔ}|` with `Δ = 2 h sin(elevation)`, floored.
pub fn two_ray_gain_db(antenna_height: f64, elevation: f64, frequency: f64, gamma: Complex64, floor_db: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT;
    let delta = 2.0 * antenna_height * elevation.to_radians().sin();
    let field = Complex64::new(1.0, 0.0) + gamma * Complex64::from_polar(1.0, k * delta);
    (20.0 * field.norm().log10()).max(floor_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathModel {
    #[serde(rename = "los")]
    LosOnly,
    #[serde(rename = "two-ray")]
    TwoRay,
}

impl fmt::Display for PathModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathModel::LosOnly => "los",
            PathModel::TwoRay => "two-ray",
        })
    }
}

impl std::str::FromStr for PathModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "los" | "los-only" => Ok(PathModel::LosOnly),
            "two-ray" | "tworay" => Ok(PathModel::TwoRay),
            other => Err(format!("unknown propagation model {other:?} (expected los or two-ray)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Urban,
    Suburban,
    Rural,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "urban" => Ok(Scenario::Urban),
            "suburban" => Ok(Scenario::Suburban),
            "rural" => Ok(Scenario::Rural),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

/// Geodetic box (degrees). Must not straddle the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub south: f64,
    pub north: f64,
    pub west: f64,
    pub east: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let ok = self.south >= -90.0
            && self.north <= 90.0
            && self.north > self.south
            && self.west >= -180.0
            && self.east <= 180.0
            && self.east > self.west;
        if ok {
            Ok(())
        } else {
            Err(PropagationError::EmptyArea)
        }
    }

    /// Area on the mean sphere, km².
    pub fn area_km2(&self) -> f64 {
        let r = wgs84::MEAN_RADIUS / 1000.0;
        r * r * (self.north.to_radians().sin() - self.south.to_radians().sin()) * (self.east - self.west).to_radians()
    }

    pub fn contains(&self, p: &GroundPoint) -> bool {
        (self.south..=self.north).contains(&p.latitude) && (self.west..=self.east).contains(&p.longitude)
    }

    pub fn center(&self) -> GroundPoint {
        let mid = 0.5 * (self.north.to_radians().sin() + self.south.to_radians().sin());
        GroundPoint::new(mid.asin().to_degrees(), 0.5 * (self.west + self.east), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std_dev: f64 },
}

impl Distribution {
    fn validate(&self) -> Result<(), PropagationError> {
        let ok = match *self {
            Distribution::Fixed { value } => value.is_finite(),
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && high >= low,
            Distribution::Normal { mean, std_dev } => mean.is_finite() && std_dev.is_finite() && std_dev >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(PropagationError::InvalidConfig(format!("bad distribution {self:?}")))
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Fixed { value } => value,
            Distribution::Uniform { low, high } if high > low => rng.random_range(low..high),
            Distribution::Uniform { low, .. } => low,
            Distribution::Normal { mean, std_dev } => Normal::new(mean, std_dev).map_or(mean, |n| n.sample(rng)),
        }
    }
}

/// Population parameters of one transmitter kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindConfig {
    pub density_per_km2: f64,
    /// dBm/MHz
    pub eirp_density: Distribution,
    /// meters
    pub antenna_height: Distribution,
    /// Hz
    pub center_frequency: f64,
    /// Hz
    pub emission_bandwidth: f64,
    /// degrees
    #[serde(default)]
    pub pointing_elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    pub kinds: BTreeMap<TransmitterKind, KindConfig>,
}

impl DeploymentConfig {
    /// Illustrative populations for a quick start. The densities and
    /// emission levels are placeholders, not regulatory figures.
    pub fn preset(scenario: Scenario) -> Self {
        let (gnb, ue, iab, fwa) = match scenario {
            Scenario::Urban => (10.0, 30.0, 2.0, 0.5),
            Scenario::Suburban => (2.0, 6.0, 0.4, 0.3),
            Scenario::Rural => (0.1, 0.3, 0.02, 0.1),
        };
        let kind = |density, eirp: Distribution, height: Distribution, tilt| KindConfig {
            density_per_km2: density,
            eirp_density: eirp,
            antenna_height: height,
            center_frequency: 24.5e9,
            emission_bandwidth: 200e6,
            pointing_elevation: tilt,
        };
        let mut kinds = BTreeMap::new();
        kinds.insert(
            TransmitterKind::Gnb,
            kind(gnb, Distribution::Uniform { low: -45.0, high: -35.0 }, Distribution::Uniform { low: 6.0, high: 25.0 }, -10.0),
        );
        kinds.insert(
            TransmitterKind::Ue,
            kind(ue, Distribution::Normal { mean: -50.0, std_dev: 3.0 }, Distribution::Fixed { value: 1.5 }, 0.0),
        );
        kinds.insert(
            TransmitterKind::Iab,
            kind(iab, Distribution::Fixed { value: -40.0 }, Distribution::Uniform { low: 4.0, high: 10.0 }, 0.0),
        );
        kinds.insert(
            TransmitterKind::FwaClassV,
            kind(fwa, Distribution::Fixed { value: -35.0 }, Distribution::Uniform { low: 3.0, high: 8.0 }, 5.0),
        );
        Self { kinds }
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        for (k, c) in &self.kinds {
            if !(c.density_per_km2 >= 0.0 && c.density_per_km2.is_finite()) {
                return Err(PropagationError::InvalidConfig(format!("{k}: density must be ≥ 0")));
            }
            if !(c.emission_bandwidth > 0.0 && c.center_frequency > 0.0) {
                return Err(PropagationError::InvalidConfig(format!("{k}: frequency and bandwidth must be positive")));
            }
            c.eirp_density.validate()?;
            c.antenna_height.validate()?;
        }
        Ok(())
    }
}

/// Transmitter count for `density · area` with a uniform draw `u ∈ [0, 1)`.
pub fn transmitter_count(density_per_km2: f64, area_km2: f64, u: f64) -> usize {
    (density_per_km2 * area_km2 + u).floor() as usize
}

/// RNG for one Monte Carlo replicate: the master seed picks the key, the
/// replicate index the stream.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Uniformly placed transmitters inside `area`, deterministic in
/// `(config, seed, replicate)`.
pub fn generate_deployment(
    area: &BoundingBox,
    config: &DeploymentConfig,
    seed: u64,
    replicate: u64,
) -> Result<Vec<TransmitterSpec>, PropagationError> {
    area.validate()?;
    config.validate()?;
    let mut rng = replicate_rng(seed, replicate);
    let area_km2 = area.area_km2();
    let (s0, s1) = (area.south.to_radians().sin(), area.north.to_radians().sin());
    let mut out = Vec::new();
    for (kind, c) in &config.kinds {
        let n = transmitter_count(c.density_per_km2, area_km2, rng.random::<f64>());
        for i in 0..n {
            // uniform in sin(latitude) gives uniform density on the sphere
            let lat = rng.random_range(s0..s1).asin().to_degrees();
            let lon = rng.random_range(area.west..area.east);
            let eirp = c.eirp_density.sample(&mut rng);
            let height = c.antenna_height.sample(&mut rng).max(0.0);
            let azimuth = rng.random_range(0.0..360.0);
            out.push(TransmitterSpec {
                id: format!("{kind}-{replicate}-{i}"),
                location: GroundPoint::new(lat, lon, 0.0),
                antenna_height: height,
                eirp_density: eirp,
                center_frequency: c.center_frequency,
                emission_bandwidth: c.emission_bandwidth,
                pointing: Pointing {
                    azimuth,
                    elevation: c.pointing_elevation,
                },
                kind: *kind,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceParams {
    /// complex ground reflection coefficient `[re, im]`
    #[serde(default = "default_gamma", with = "complex_pair")]
    pub gamma: Complex64,
    #[serde(default = "default_floor")]
    pub null_floor_db: f64,
    #[serde(default = "default_atmosphere")]
    pub atmosphere: AtmosphereModel,
    #[serde(default = "default_polarization")]
    pub polarization_db: f64,
}

fn default_gamma() -> Complex64 {
    Complex64::new(DEFAULT_GAMMA, 0.0)
}
fn default_floor() -> f64 {
    DEFAULT_NULL_FLOOR_DB
}
fn default_atmosphere() -> AtmosphereModel {
    AtmosphereModel::Cosecant { zenith_db: 6.08 }
}
fn default_polarization() -> f64 {
    -3.0
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

impl Default for InterferenceParams {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            null_floor_db: default_floor(),
            atmosphere: default_atmosphere(),
            polarization_db: default_polarization(),
        }
    }
}

/// One transmitter's share of a pixel's interference, with every term needed
/// to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub tx_id: String,
    /// dBm/MHz
    pub contribution: f64,
    pub path: PathModel,
    pub eirp_density: f64,
    /// `g_tx` is 0: the EIRP density already includes it
    pub loss: LossChain,
    pub two_ray_gain_db: f64,
    pub elevation: f64,
    pub slant_range: f64,
}

impl Contribution {
    pub fn recompute(&self) -> f64 {
        self.eirp_density + self.loss.total + self.two_ray_gain_db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSample {
    pub pixel: PixelFootprint,
    /// dBm/MHz; `-inf` when nothing contributes
    pub aggregate: f64,
    pub contributors: Vec<Contribution>,
    pub model: PathModel,
}

/// Linear power sum in dB, independent of input order.
pub fn power_sum_db(values_db: &[f64]) -> f64 {
    let mut lin: Vec<f64> = values_db.iter().map(|&v| db_to_linear(v)).collect();
    lin.sort_by(f64::total_cmp);
    let total: f64 = lin.iter().sum();
    if total > 0.0 {
        linear_to_db(total)
    } else {
        f64::NEG_INFINITY
    }
}

/// Aggregate interference of `deployment` into one pixel.
pub fn aggregate_interference(
    pixel: &PixelFootprint,
    sat: &SatelliteState,
    deployment: &[TransmitterSpec],
    model: PathModel,
    radiometer: &RadiometerSpec,
    params: &InterferenceParams,
) -> Result<InterferenceSample, PropagationError> {
    aggregate_from(pixel, sat, deployment.iter(), model, radiometer, params)
}

fn aggregate_from<'t>(
    pixel: &PixelFootprint,
    sat: &SatelliteState,
    candidates: impl Iterator<Item = &'t TransmitterSpec>,
    model: PathModel,
    radiometer: &RadiometerSpec,
    params: &InterferenceParams,
) -> Result<InterferenceSample, PropagationError> {
    let policy = BufferPolicy::new(PolicyKind::PixelLevel);
    let center = pixel.geometry.ellipse.center;
    let reach = pixel_reach(pixel);
    let mut contributors = Vec::new();
    for tx in candidates {
        if (tx.location.ecef() - center).norm() > reach || !subtends(pixel, &tx.location, &policy) {
            continue;
        }
        let look = topocentric(sat, &tx.antenna());
        if look.elevation <= 0.0 {
            continue;
        }
        let loss = LossChain::new(
            fspl_db(look.slant_range, tx.center_frequency)?,
            atmospheric_loss_db(look.elevation, &params.atmosphere)?,
            params.polarization_db,
            0.0,
            radiometer.antenna_max_gain,
        );
        let gain = match model {
            PathModel::LosOnly => 0.0,
            PathModel::TwoRay => two_ray_gain_db(
                tx.antenna_height,
                look.elevation,
                tx.center_frequency,
                params.gamma,
                params.null_floor_db,
            ),
        };
        contributors.push(Contribution {
            tx_id: tx.id.clone(),
            contribution: tx.eirp_density + loss.total + gain,
            path: model,
            eirp_density: tx.eirp_density,
            loss,
            two_ray_gain_db: gain,
            elevation: look.elevation,
            slant_range: look.slant_range,
        });
    }
    let values: Vec<f64> = contributors.iter().map(|c| c.contribution).collect();
    Ok(InterferenceSample {
        pixel: pixel.clone(),
        aggregate: power_sum_db(&values),
        contributors,
        model,
    })
}

/// Every pixel of `lines` (scan line indices relative to the element epoch)
/// with the satellite state at the sample start. Pixels whose boresight
/// misses the Earth are skipped.
pub fn scan_pixels(
    sat: &Satellite,
    lines: std::ops::Range<i64>,
    exec: Exec,
) -> Result<Vec<(SatelliteState, PixelFootprint)>, PropagationError> {
    let prop = Propagator::new(&sat.elements)?;
    let spec = &sat.radiometer;
    let n = spec.samples_per_scan as usize;
    let jobs: Vec<(i64, u32)> = lines.flat_map(|l| (0..n as u32).map(move |k| (l, k))).collect();
    let results = exec.map(&jobs, |&(line, k)| -> Result<Option<(SatelliteState, PixelFootprint)>, PropagationError> {
        let offset = spec.line_start(line) + f64::from(k) * spec.dwell();
        let t = time::add_seconds(&sat.elements.epoch, offset);
        let state = prop.propagate(&t)?;
        let sample = ScanSample {
            scan_line_index: line,
            sample_index: k,
            t,
            boresight_angle: spec.sample_boresight(k),
        };
        match pixel_footprint_at(&state, &sample, spec, 0.0, &sat.id) {
            Ok(fp) => Ok(Some((state, fp))),
            Err(RadiometerError::NoIntersection) => Ok(None),
            Err(e) => Err(e.into()),
        }
    });
    results.into_iter().filter_map(Result::transpose).collect()
}

/// [`aggregate_interference`] over many pixels, in input order.
pub fn interference_grid(
    pixels: &[(SatelliteState, PixelFootprint)],
    deployment: &[TransmitterSpec],
    model: PathModel,
    radiometer: &RadiometerSpec,
    params: &InterferenceParams,
    exec: Exec,
) -> Result<Vec<InterferenceSample>, PropagationError> {
    let index = DeploymentIndex::new(deployment);
    exec.map(pixels, |(state, fp)| {
        let near = index.near(&fp.center, pixel_reach(fp));
        aggregate_from(fp, state, near.into_iter().map(|i| &deployment[i]), model, radiometer, params)
    })
    .into_iter()
    .collect()
}

/// Distance (m) beyond which a transmitter cannot sit inside the pixel.
fn pixel_reach(pixel: &PixelFootprint) -> f64 {
    2.0 * pixel.semi_major
}

const CELL_DEG: f64 = 0.5;
const LON_CELLS: i32 = (360.0 / CELL_DEG) as i32;

/// Half-degree latitude/longitude buckets over a deployment.
pub struct DeploymentIndex {
    cells: HashMap<(i32, i32), Vec<usize>>,
}

impl DeploymentIndex {
    pub fn new(deployment: &[TransmitterSpec]) -> Self {
        let mut cells: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
        for (i, tx) in deployment.iter().enumerate() {
            cells.entry(cell(&tx.location)).or_default().push(i);
        }
        Self { cells }
    }

    /// Ascending indices of every transmitter within `radius` meters of
    /// `center`, plus some further away.
    pub fn near(&self, center: &GroundPoint, radius: f64) -> Vec<usize> {
        // one degree of arc is never shorter than 110.5 km on WGS84
        let dlat = radius / 110_000.0 + 1e-6;
        let (lo, hi) = (center.latitude - dlat, center.latitude + dlat);
        let rows = (lo / CELL_DEG).floor() as i32..=(hi / CELL_DEG).floor() as i32;
        let max_lat = lo.abs().max(hi.abs());
        let dlon = if max_lat < 89.0 { dlat / max_lat.to_radians().cos() } else { 360.0 };
        let cols: Vec<i32> = if dlon >= 180.0 {
            (0..LON_CELLS).collect()
        } else {
            let a = ((center.longitude - dlon + 180.0) / CELL_DEG).floor() as i32;
            let b = ((center.longitude + dlon + 180.0) / CELL_DEG).floor() as i32;
            (a..=b).map(|j| j.rem_euclid(LON_CELLS)).collect()
        };
        let mut out: Vec<usize> = rows
            .flat_map(|r| cols.iter().map(move |&c| (r, c)))
            .filter_map(|k| self.cells.get(&k))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn cell(p: &GroundPoint) -> (i32, i32) {
    let row = (p.latitude / CELL_DEG).floor() as i32;
    let col = ((p.longitude + 180.0) / CELL_DEG).floor() as i32;
    (row, col.rem_euclid(LON_CELLS))
}

pub fn write_grid_csv<W: Write>(samples: &[InterferenceSample], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pixel_lat", "pixel_lon", "aggregate_dbm_mhz", "model", "n_contributors"])?;
    for s in samples {
        let agg = if s.aggregate.is_finite() {
            format!("{:.6}", s.aggregate)
        } else {
            "-inf".to_string()
        };
        w.write_record([
            format!("{:.6}", s.pixel.center.latitude),
            format!("{:.6}", s.pixel.center.longitude),
            agg,
            s.model.to_string(),
            s.contributors.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub area_km2: f64,
    pub n_pixels: usize,
    /// dBm/MHz
    pub threshold: f64,
    pub quantile: f64,
    pub fraction_compliant: f64,
    pub pass: bool,
    /// how the pixel population was drawn
    pub sampling: String,
}

pub const DEFAULT_THRESHOLD: f64 = -200.0;
pub const DEFAULT_QUANTILE: f64 = 0.9999;
pub const DEFAULT_AREA_KM2: f64 = 2.0e6;

/// Share of aggregates strictly below `threshold`; passes when that share
/// reaches `quantile`.
pub fn compliance_values(
    aggregates: &[f64],
    threshold: f64,
    quantile: f64,
    area_km2: f64,
    sampling: &str,
) -> Result<ComplianceReport, PropagationError> {
    if aggregates.is_empty() {
        return Err(PropagationError::NoSamples);
    }
    let ok = aggregates.iter().filter(|&&a| a < threshold).count();
    let fraction = ok as f64 / aggregates.len() as f64;
    Ok(ComplianceReport {
        area_km2,
        n_pixels: aggregates.len(),
        threshold,
        quantile,
        fraction_compliant: fraction,
        pass: fraction >= quantile,
        sampling: sampling.to_string(),
    })
}

pub fn compliance(
    samples: &[InterferenceSample],
    threshold: f64,
    quantile: f64,
    area_km2: f64,
) -> Result<ComplianceReport, PropagationError> {
    let aggregates: Vec<f64> = samples.iter().map(|s| s.aggregate).collect();
    compliance_values(&aggregates, threshold, quantile, area_km2, "every pixel of the simulated scan lines")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    #[test]
    fn index_finds_neighbours_across_the_antimeridian() {
        let tx = |id: &str, lat, lon| TransmitterSpec {
            id: id.into(),
            location: GroundPoint::new(lat, lon, 0.0),
            antenna_height: 1.0,
            eirp_density: 0.0,
            center_frequency: 24e9,
            emission_bandwidth: 1e8,
            pointing: Pointing::default(),
            kind: TransmitterKind::Ue,
        };
        let d = vec![tx("a", 10.0, 179.9), tx("b", 10.0, -179.9), tx("c", 12.0, 0.0), tx("d", 10.3, 179.0)];
        let index = DeploymentIndex::new(&d);
        assert_eq!(index.near(&GroundPoint::new(10.0, -179.95, 0.0), 50_000.0), vec![0, 1]);
        assert_eq!(index.near(&GroundPoint::new(89.9, 0.0, 0.0), 10_000.0), Vec::<usize>::new());
        let all = index.near(&GroundPoint::new(10.0, 179.5, 0.0), 300_000.0);
        assert_eq!(all, vec![0, 1, 3]);
    }

    fn small_box() -> BoundingBox {
        BoundingBox {
            south: 40.0,
            north: 40.1,
            west: -105.1,
            east: -105.0,
        }
    }

    fn nadir_pixel() -> (SatelliteState, PixelFootprint) {
        let spec = RadiometerSpec::preset("atms").unwrap();
        let sat = SatelliteState::from_geodetic(
            time::utc(2023, 4, 23, 0, 0, 0),
            GroundPoint::new(40.05, -105.05, 832_100.0),
            Vector3::new(-1000.0, 500.0, 7300.0),
        );
        let s = ScanSample {
            scan_line_index: 0,
            sample_index: 48,
            t: sat.t,
            boresight_angle: 0.0,
        };
        let fp = pixel_footprint_at(&sat, &s, &spec, 0.0, "sat").unwrap();
        (sat, fp)
    }

    fn tx(id: &str, lat: f64, lon: f64, eirp: f64) -> TransmitterSpec {
        TransmitterSpec {
            id: id.into(),
            location: GroundPoint::new(lat, lon, 0.0),
            antenna_height: 10.0,
            eirp_density: eirp,
            center_frequency: 23.8e9,
            emission_bandwidth: 200e6,
            pointing: Pointing::default(),
            kind: TransmitterKind::Gnb,
        }
    }

    #[test]
    fn two_ray_cases() {
        let f = 23.8e9;
        let lambda = SPEED_OF_LIGHT / f;
        let el = 30.0f64;
        assert_eq!(two_ray_gain_db(10.0, el, f, Complex64::new(0.0, 0.0), -60.0), 0.0);
        let h_half = lambda / 2.0 / (2.0 * el.to_radians().sin());
        let g = two_ray_gain_db(h_half, el, f, Complex64::new(-1.0, 0.0), -60.0);
        assert!((g - 6.0206).abs() < 1e-3, "{g}");
        let g = two_ray_gain_db(2.0 * h_half, el, f, Complex64::new(-1.0, 0.0), -60.0);
        assert_eq!(g, -60.0);
    }

    #[test]
    fn deployment_count_rule() {
        assert_eq!(transmitter_count(1.0, 100.0, 0.0), 100);
        assert_eq!(transmitter_count(1.0, 100.0, 0.999), 100);
        assert_eq!(transmitter_count(0.5, 3.0, 0.6), 2);
        let cfg = DeploymentConfig::preset(Scenario::Urban);
        let area = small_box();
        let d = generate_deployment(&area, &cfg, 7, 0).unwrap();
        for (kind, c) in &cfg.kinds {
            let n = d.iter().filter(|t| t.kind == *kind).count() as f64;
            let lambda = c.density_per_km2 * area.area_km2();
            assert!(n == lambda.floor() || n == lambda.floor() + 1.0);
        }
        assert!(d.iter().all(|t| area.contains(&t.location)));
        assert_eq!(d, generate_deployment(&area, &cfg, 7, 0).unwrap());
        assert_ne!(d, generate_deployment(&area, &cfg, 7, 1).unwrap());
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let mut b = small_box();
        b.north = b.south;
        assert!(matches!(
            generate_deployment(&b, &DeploymentConfig::preset(Scenario::Rural), 1, 0),
            Err(PropagationError::EmptyArea)
        ));
    }

    #[test]
    fn deployment_jsonl_roundtrip() {
        let d = generate_deployment(&small_box(), &DeploymentConfig::preset(Scenario::Suburban), 3, 0).unwrap();
        let mut buf = Vec::new();
        write_deployment_jsonl(&d, &mut buf).unwrap();
        assert_eq!(read_deployment_jsonl(buf.as_slice()).unwrap(), d);
        assert!(matches!(
            read_deployment_jsonl("{\"id\":1}\n".as_bytes()),
            Err(PropagationError::DeploymentSyntax { line: 1, .. })
        ));
    }

    #[test]
    fn aggregate_basics() {
        let spec = RadiometerSpec::preset("atms").unwrap();
        let (sat, fp) = nadir_pixel();
        let p = InterferenceParams::default();
        let empty = aggregate_interference(&fp, &sat, &[], PathModel::LosOnly, &spec, &p).unwrap();
        assert_eq!(empty.aggregate, f64::NEG_INFINITY);
        let one = [tx("a", 40.05, -105.05, -40.0)];
        let s = aggregate_interference(&fp, &sat, &one, PathModel::LosOnly, &spec, &p).unwrap();
        assert_eq!(s.contributors.len(), 1);
        assert_eq!(s.aggregate, s.contributors[0].contribution);
        assert_eq!(s.contributors[0].recompute(), s.contributors[0].contribution);
        // far outside the pixel
        let far = [tx("b", 45.0, -105.05, -40.0)];
        let s = aggregate_interference(&fp, &sat, &far, PathModel::LosOnly, &spec, &p).unwrap();
        assert!(s.contributors.is_empty());
    }

    #[test]
    fn gamma_zero_matches_los_bitwise() {
        let spec = RadiometerSpec::preset("atms").unwrap();
        let (sat, fp) = nadir_pixel();
        let d = generate_deployment(&small_box(), &DeploymentConfig::preset(Scenario::Urban), 11, 0).unwrap();
        let los = aggregate_interference(&fp, &sat, &d, PathModel::LosOnly, &spec, &InterferenceParams::default()).unwrap();
        let p0 = InterferenceParams {
            gamma: Complex64::new(0.0, 0.0),
            ..Default::default()
        };
        let tr = aggregate_interference(&fp, &sat, &d, PathModel::TwoRay, &spec, &p0).unwrap();
        assert!(!los.contributors.is_empty());
        assert_eq!(los.aggregate.to_bits(), tr.aggregate.to_bits());
    }

    #[test]
    fn compliance_boundaries() {
        let mut v = vec![-210.0; 10_000];
        v[0] = -199.0;
        let r = compliance_values(&v, -200.0, 0.9999, 2e6, "").unwrap();
        assert_eq!(r.fraction_compliant, 0.9999);
        assert!(r.pass);
        v[1] = -199.0;
        assert!(!compliance_values(&v, -200.0, 0.9999, 2e6, "").unwrap().pass);
        let r = compliance_values(&[-200.0; 100], -200.0, 0.9999, 2e6, "").unwrap();
        assert_eq!(r.fraction_compliant, 0.0);
        assert!(!r.pass);
        assert!(matches!(compliance_values(&[], -200.0, 0.9999, 2e6, ""), Err(PropagationError::NoSamples)));
    }

    #[test]
    fn params_json() {
        let p: InterferenceParams = serde_json::from_str(r#"{"gamma":[0.0,0.5]}"#).unwrap();
        assert_eq!(p.gamma, Complex64::new(0.0, 0.5));
        assert_eq!(p.null_floor_db, -60.0);
        let back: InterferenceParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn power_sum_properties(mut v in proptest::collection::vec(-250.0f64..-100.0, 1..40), extra in -250.0f64..-100.0, seed in 0u64..1000) {
            let base = power_sum_db(&v);
            // brute-force oracle: plain left-to-right sum
            let naive = linear_to_db(v.iter().map(|x| 10f64.powf(x / 10.0)).sum::<f64>());
            prop_assert!((base - naive).abs() < 1e-9);
            let mut rng = replicate_rng(seed, 0);
            for i in (1..v.len()).rev() {
                let j = rand::Rng::random_range(&mut rng, 0..=i);
                v.swap(i, j);
            }
            prop_assert_eq!(power_sum_db(&v).to_bits(), base.to_bits());
            v.push(extra);
            prop_assert!(power_sum_db(&v) >= base);
        }

        #[test]
        fn two_ray_bounded(h in 0.0f64..50.0, el in 0.1f64..90.0, g in 0.0f64..1.0, phase in 0.0f64..6.28) {
            let gamma = Complex64::from_polar(g, phase);
            let v = two_ray_gain_db(h, el, 23.8e9, gamma, -60.0);
            prop_assert!(v >= -60.0);
            prop_assert!(v <= 20.0 * (1.0 + g).log10() + 1e-12);
        }
    }
}

//! Scenario file: one JSON document, paths relative to the file itself.
//!
//! Subcommand sections (`link`, `itu`, `experiment`) are parsed lazily so a
//! darkspaces run does not trip over an incomplete link section.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use coexist::experiment::ExperimentConfig;
use coexist::geofence::{BufferPolicy, Satellite};
use coexist::linkbudget::LinkParams;
use coexist::orbit::{parse_tle_file, GroundPoint};
use coexist::propagation::{
    read_deployment_jsonl, BoundingBox, DeploymentConfig, InterferenceParams, PathModel, Scenario, TransmitterSpec,
    DEFAULT_QUANTILE, DEFAULT_THRESHOLD,
};
use coexist::RadiometerSpec;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub satellites: Vec<SatelliteEntry>,
    #[serde(default)]
    pub transmitters: Option<TransmitterSource>,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub policy: Option<BufferPolicy>,
    #[serde(default)]
    pub link: Option<Value>,
    /// extra or replacement link geometries, by name
    #[serde(default)]
    pub geometries: BTreeMap<String, Geometry>,
    #[serde(default)]
    pub itu: Option<Value>,
    #[serde(default)]
    pub experiment: Option<Value>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteEntry {
    /// TLE file; every element set in it becomes a satellite
    pub tle: PathBuf,
    /// preset name or path to a radiometer JSON file
    pub radiometer: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TransmitterSource {
    File(PathBuf),
    Inline(Vec<TransmitterSpec>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Where the flashlight and the satellite sit for a link budget.
#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(untagged)]
pub enum Geometry {
    /// tabulated path loss at a given elevation
    Tabulated { fspl_db: f64, elevation_deg: f64 },
    /// computed from positions
    Positions { satellite: GroundPoint, ground: GroundPoint },
}

/// Reference geometries: the tabulated nadir and edge columns, and the same
/// two scan positions computed from their coordinates.
pub fn builtin_geometries() -> BTreeMap<String, Geometry> {
    let mut m = BTreeMap::new();
    m.insert("nadir".into(), Geometry::Tabulated { fspl_db: -185.0, elevation_deg: 85.6 });
    m.insert("edge".into(), Geometry::Tabulated { fspl_db: -184.0, elevation_deg: 25.8 });
    m.insert(
        "nadir-geometry".into(),
        Geometry::Positions {
            satellite: GroundPoint::new(40.774, -120.988, 832_100.0),
            ground: GroundPoint::new(40.646, -121.637, 20.0),
        },
    );
    m.insert(
        "edge-geometry".into(),
        Geometry::Positions {
            satellite: GroundPoint::new(40.828, -121.006, 832_100.0),
            ground: GroundPoint::new(42.701, -105.927, 20.0),
        },
    );
    m
}

fn default_replicates() -> u64 {
    1
}
fn default_model() -> PathModel {
    PathModel::LosOnly
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_quantile() -> f64 {
    DEFAULT_QUANTILE
}
fn default_scenario() -> Scenario {
    Scenario::Rural
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItuConfig {
    /// defaults to a box of about 2e6 km² around the flashlight site
    #[serde(default)]
    pub area: Option<BoundingBox>,
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    /// replaces the scenario preset when given
    #[serde(default)]
    pub deployment: Option<DeploymentConfig>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_model")]
    pub model: PathModel,
    #[serde(default)]
    pub interference: InterferenceParams,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
}

/// About 2e6 km² centred near 40.8 N, 121.5 W.
pub const DEFAULT_ITU_AREA: BoundingBox = BoundingBox {
    south: 34.4,
    north: 47.2,
    west: -129.85,
    east: -113.15,
};

// no deny_unknown_fields here: the flattened plan settings reject typos
#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentSection {
    /// id of a flashlight in `transmitters`, or an inline spec
    pub flashlight: FlashlightRef,
    /// satellite id; the first satellite when absent
    #[serde(default)]
    pub satellite: Option<String>,
    #[serde(flatten)]
    pub plan: ExperimentConfig,
    /// dBm; no default is offered
    pub damage_threshold_dbm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FlashlightRef {
    Id(String),
    Inline(Box<TransmitterSpec>),
}

/// A loaded config plus where it came from.
pub struct Loaded {
    pub config: ScenarioConfig,
    pub base: PathBuf,
    pub sha256: String,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config: ScenarioConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            config,
            base,
            sha256: crate::output::sha256_hex(&bytes),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn satellites(&self) -> Result<Vec<Satellite>, CliError> {
        let c = &self.config;
        if c.satellites.is_empty() {
            return Err(CliError::Config("satellites: at least one entry is required".into()));
        }
        let mut out = Vec::new();
        for entry in &c.satellites {
            let radiometer = self.radiometer(&entry.radiometer)?;
            let path = self.resolve(&entry.tle);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("satellites.tle {}: {e}", path.display())))?;
            let sets = parse_tle_file(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            out.extend(sets.into_iter().map(|el| Satellite::new(el, radiometer.clone())));
        }
        Ok(out)
    }

    fn radiometer(&self, name: &str) -> Result<RadiometerSpec, CliError> {
        let spec = if name.ends_with(".json") {
            RadiometerSpec::from_file(&self.resolve(Path::new(name)))
        } else {
            RadiometerSpec::preset(name)
        };
        spec.map_err(|e| CliError::Config(format!("satellites.radiometer: {e}")))
    }

    pub fn transmitters(&self) -> Result<Vec<TransmitterSpec>, CliError> {
        let txs = match &self.config.transmitters {
            None => return Err(CliError::Config("transmitters: missing".into())),
            Some(TransmitterSource::Inline(v)) => v.clone(),
            Some(TransmitterSource::File(p)) => {
                let path = self.resolve(p);
                let f = std::fs::File::open(&path)
                    .map_err(|e| CliError::Config(format!("transmitters {}: {e}", path.display())))?;
                read_deployment_jsonl(std::io::BufReader::new(f))
                    .map_err(|e| CliError::Config(format!("transmitters {}: {e}", path.display())))?
            }
        };
        for tx in &txs {
            tx.validate().map_err(|e| CliError::Config(format!("transmitters: {e}")))?;
        }
        Ok(txs)
    }

    pub fn window(&self) -> Result<(DateTime<Utc>, DateTime<Utc>), CliError> {
        let w = self.config.window.ok_or_else(|| CliError::Config("window: missing".into()))?;
        if w.end <= w.start {
            return Err(CliError::Config("window: end must be after start".into()));
        }
        Ok((w.start, w.end))
    }

    pub fn link(&self) -> Result<LinkParams, CliError> {
        let link: LinkParams = section(&self.config.link, "link")?;
        link.validate().map_err(|e| CliError::Config(format!("link: {e}")))?;
        Ok(link)
    }

    pub fn itu(&self) -> Result<ItuConfig, CliError> {
        match &self.config.itu {
            None => section(&Some(Value::Object(Default::default())), "itu"),
            some => section(some, "itu"),
        }
    }

    pub fn experiment(&self) -> Result<ExperimentSection, CliError> {
        section(&self.config.experiment, "experiment")
    }
}

fn section<T: DeserializeOwned>(v: &Option<Value>, name: &str) -> Result<T, CliError> {
    let v = v.as_ref().ok_or_else(|| CliError::Config(format!("{name}: missing section")))?;
    T::deserialize(v).map_err(|e| CliError::Config(format!("{name}: {e}")))
}

//! Flashlight link budget: loss chain, noise power and the ON/OFF ratio.
//!
//! Power arithmetic happens in watts; decibels appear only at the edges.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbit::LookAngles;
use crate::{BOLTZMANN, SPEED_OF_LIGHT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("{0} must be positive")]
    NonPositiveInput(&'static str),
    #[error("elevation {0}° is not above the horizon")]
    ElevationNonPositive(f64),
    #[error("elevation {elevation}° outside the atmosphere table [{min}°, {max}°]")]
    TableOutOfRange { elevation: f64, min: f64, max: f64 },
    #[error("invalid atmosphere table: {0}")]
    InvalidTable(String),
    #[error("noise plus water-vapour power must be positive")]
    ZeroDenominator,
    #[error("target ratio {0} must exceed 1")]
    RatioNotAboveOne(f64),
    #[error("invalid link parameters: {0}")]
    InvalidParameters(String),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Free-space path loss as a negative gain, dB.
pub fn fspl_db(slant_range: f64, frequency: f64) -> Result<f64, LinkError> {
    if !(slant_range > 0.0) {
        return Err(LinkError::NonPositiveInput("slant range"));
    }
    if !(frequency > 0.0) {
        return Err(LinkError::NonPositiveInput("frequency"));
    }
    Ok(-20.0 * (4.0 * std::f64::consts::PI * slant_range * frequency / SPEED_OF_LIGHT).log10())
}

/// Piecewise-linear `(elevation deg, loss dB ≤ 0)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AtmosphereTable {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for AtmosphereTable {
    type Error = LinkError;

    fn try_from(mut points: Vec<(f64, f64)>) -> Result<Self, LinkError> {
        if points.is_empty() {
            return Err(LinkError::InvalidTable("no rows".into()));
        }
        if points.iter().any(|&(e, l)| !e.is_finite() || !l.is_finite() || l > 0.0) {
            return Err(LinkError::InvalidTable("losses must be finite and ≤ 0 dB".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(LinkError::InvalidTable("duplicate elevation".into()));
        }
        Ok(Self { points })
    }
}

impl From<AtmosphereTable> for Vec<(f64, f64)> {
    fn from(t: AtmosphereTable) -> Self {
        t.points
    }
}

impl AtmosphereTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, LinkError> {
        points.try_into()
    }

    /// The two reference rows shipped by default (nadir and swath edge).
    pub fn reference() -> Self {
        Self::new(vec![(85.6, -6.1), (25.8, -10.9)]).expect("static table")
    }

    /// Reads `elevation_deg,loss_db` CSV with a header row.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, LinkError> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut points = Vec::new();
        for row in rdr.deserialize::<(f64, f64)>() {
            points.push(row.map_err(|e| LinkError::InvalidTable(e.to_string()))?);
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn interpolate(&self, elevation: f64) -> Result<f64, LinkError> {
        let (min, max) = (self.points[0].0, self.points[self.points.len() - 1].0);
        if elevation < min || elevation > max {
            return Err(LinkError::TableOutOfRange { elevation, min, max });
        }
        let i = self.points.partition_point(|p| p.0 < elevation);
        if self.points[i].0 == elevation {
            return Ok(self.points[i].1);
        }
        let ((e0, l0), (e1, l1)) = (self.points[i - 1], self.points[i]);
        Ok(l0 + (l1 - l0) * (elevation - e0) / (e1 - e0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AtmosphereModel {
    /// Flat-layer scaling of the zenith attenuation (positive dB).
    Cosecant { zenith_db: f64 },
    Table { points: AtmosphereTable },
}

impl Default for AtmosphereModel {
    fn default() -> Self {
        AtmosphereModel::Table {
            points: AtmosphereTable::reference(),
        }
    }
}

/// Atmospheric attenuation as a negative gain, dB.
pub fn atmospheric_loss_db(elevation: f64, model: &AtmosphereModel) -> Result<f64, LinkError> {
    if !(elevation > 0.0) {
        return Err(LinkError::ElevationNonPositive(elevation));
    }
    match model {
        AtmosphereModel::Cosecant { zenith_db } => Ok(-zenith_db / elevation.to_radians().sin()),
        AtmosphereModel::Table { points } => points.interpolate(elevation),
    }
}

/// Gains and losses between transmitter output and radiometer input, dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossChain {
    pub fspl: f64,
    pub atmosphere: f64,
    pub polarization: f64,
    pub g_tx: f64,
    pub g_rx: f64,
    pub total: f64,
}

impl LossChain {
    pub fn new(fspl: f64, atmosphere: f64, polarization: f64, g_tx: f64, g_rx: f64) -> Self {
        Self {
            fspl,
            atmosphere,
            polarization,
            g_tx,
            g_rx,
            total: fspl + atmosphere + polarization + g_tx + g_rx,
        }
    }

    /// Recomputes the total from the components, in the same order.
    pub fn recomputed_total(&self) -> f64 {
        self.fspl + self.atmosphere + self.polarization + self.g_tx + self.g_rx
    }

    pub fn linear(&self) -> f64 {
        db_to_linear(self.total)
    }
}

pub fn total_loss_db(fspl: f64, atmosphere: f64, polarization: f64, g_tx: f64, g_rx: f64) -> LossChain {
    LossChain::new(fspl, atmosphere, polarization, g_tx, g_rx)
}

/// Thermal noise `k_B T Δf`, watts.
pub fn noise_power(n_temp: f64, bandwidth: f64) -> f64 {
    BOLTZMANN * n_temp * bandwidth
}

/// ON/OFF ratio of the radiometer output with the flashlight switched on.
pub fn on_off_ratio(p_on: f64, loss_total: f64, p_noise: f64, p_h2o: f64) -> Result<f64, LinkError> {
    let floor = p_noise + p_h2o;
    if !(floor > 0.0) {
        return Err(LinkError::ZeroDenominator);
    }
    if !(p_on >= 0.0) {
        return Err(LinkError::NonPositiveInput("transmit power"));
    }
    Ok(1.0 + p_on * db_to_linear(loss_total) / floor)
}

/// Transmit power (watts) giving `target_ratio`; inverse of [`on_off_ratio`].
pub fn required_tx_power(target_ratio: f64, loss_total: f64, p_noise: f64, p_h2o: f64) -> Result<f64, LinkError> {
    if !(target_ratio > 1.0) {
        return Err(LinkError::RatioNotAboveOne(target_ratio));
    }
    let floor = p_noise + p_h2o;
    if !(floor > 0.0) {
        return Err(LinkError::ZeroDenominator);
    }
    Ok((target_ratio - 1.0) * floor / db_to_linear(loss_total))
}

/// Background water-vapour emission seen by the radiometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H2oRule {
    /// absolute watts
    Absolute(f64),
    /// multiple of the noise power
    NoiseMultiple(f64),
}

impl Default for H2oRule {
    fn default() -> Self {
        H2oRule::NoiseMultiple(100.0)
    }
}

impl H2oRule {
    pub fn watts(&self, p_noise: f64) -> f64 {
        match *self {
            H2oRule::Absolute(w) => w,
            H2oRule::NoiseMultiple(k) => k * p_noise,
        }
    }
}

/// Gain vs off-axis angle: a scalar maximum plus an optional
/// `(angle deg, relative dB ≤ 0)` pointing-loss table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaGain {
    pub max_gain_dbi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointing_loss: Option<Vec<(f64, f64)>>,
}

impl AntennaGain {
    pub fn scalar(max_gain_dbi: f64) -> Self {
        Self {
            max_gain_dbi,
            pointing_loss: None,
        }
    }

    /// Gain at `off_axis` degrees; beyond the last row the last loss holds.
    pub fn gain_at(&self, off_axis: f64) -> f64 {
        let Some(table) = self.pointing_loss.as_deref().filter(|t| !t.is_empty()) else {
            return self.max_gain_dbi;
        };
        let a = off_axis.abs();
        let loss = match table.iter().position(|p| p.0 >= a) {
            Some(0) => table[0].1,
            Some(i) => {
                let ((a0, l0), (a1, l1)) = (table[i - 1], table[i]);
                l0 + (l1 - l0) * (a - a0) / (a1 - a0)
            }
            None => table[table.len() - 1].1,
        };
        self.max_gain_dbi + loss
    }
}

/// Configurable link parameters; defaults follow the reference flashlight
/// setup (15 dBi transmitter, 30 dBi radiometer, -3 dB polarization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// dBm
    #[serde(default = "default_p_on")]
    pub p_on_dbm: f64,
    /// Hz
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    /// Hz
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// kelvin; no default exists
    pub n_temp: f64,
    #[serde(default)]
    pub p_h2o: H2oRule,
    #[serde(default = "default_g_tx")]
    pub g_tx_dbi: f64,
    #[serde(default = "default_g_rx")]
    pub g_rx_dbi: f64,
    #[serde(default = "default_polarization")]
    pub polarization_db: f64,
    #[serde(default)]
    pub atmosphere: AtmosphereModel,
}

fn default_p_on() -> f64 {
    40.0
}
fn default_frequency() -> f64 {
    23.8e9
}
fn default_bandwidth() -> f64 {
    0.2e9
}
fn default_g_tx() -> f64 {
    15.0
}
fn default_g_rx() -> f64 {
    30.0
}
fn default_polarization() -> f64 {
    -3.0
}

impl LinkParams {
    pub fn with_n_temp(n_temp: f64) -> Self {
        Self {
            p_on_dbm: default_p_on(),
            frequency: default_frequency(),
            bandwidth: default_bandwidth(),
            n_temp,
            p_h2o: H2oRule::default(),
            g_tx_dbi: default_g_tx(),
            g_rx_dbi: default_g_rx(),
            polarization_db: default_polarization(),
            atmosphere: AtmosphereModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |m: &str| Err(LinkError::InvalidParameters(m.to_string()));
        if !(self.frequency > 0.0) {
            return bad("frequency must be positive");
        }
        if !(self.bandwidth >= 0.0) {
            return bad("bandwidth must be non-negative");
        }
        if !(self.n_temp >= 0.0) {
            return bad("n_temp must be non-negative");
        }
        if self.polarization_db > 0.0 {
            return bad("polarization_db must be ≤ 0");
        }
        Ok(())
    }

    /// Loss chain for a transmitter seeing the satellite at `look`.
    pub fn chain_for(&self, look: &LookAngles) -> Result<LossChain, LinkError> {
        Ok(LossChain::new(
            fspl_db(look.slant_range, self.frequency)?,
            atmospheric_loss_db(look.elevation, &self.atmosphere)?,
            self.polarization_db,
            self.g_tx_dbi,
            self.g_rx_dbi,
        ))
    }
}

/// Evaluated flashlight link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// dBm
    pub p_on: f64,
    pub loss: LossChain,
    /// watts
    pub p_noise: f64,
    /// watts
    pub p_h2o: f64,
    /// dBm
    pub p_received: f64,
    pub on_off_ratio: f64,
}

impl LinkBudget {
    pub fn evaluate(p_on_dbm: f64, loss: LossChain, n_temp: f64, bandwidth: f64, h2o: H2oRule) -> Result<Self, LinkError> {
        let p_noise = noise_power(n_temp, bandwidth);
        let p_h2o = h2o.watts(p_noise);
        let p_on = dbm_to_watts(p_on_dbm);
        Ok(Self {
            p_on: p_on_dbm,
            loss,
            p_noise,
            p_h2o,
            p_received: watts_to_dbm(p_on * loss.linear()),
            on_off_ratio: on_off_ratio(p_on, loss.total, p_noise, p_h2o)?,
        })
    }

    pub fn from_params(params: &LinkParams, loss: LossChain) -> Result<Self, LinkError> {
        params.validate()?;
        Self::evaluate(params.p_on_dbm, loss, params.n_temp, params.bandwidth, params.p_h2o)
    }

    /// Transmit power (dBm) reaching `target_ratio` on this link.
    pub fn required_p_on_dbm(&self, target_ratio: f64) -> Result<f64, LinkError> {
        required_tx_power(target_ratio, self.loss.total, self.p_noise, self.p_h2o).map(watts_to_dbm)
    }
}

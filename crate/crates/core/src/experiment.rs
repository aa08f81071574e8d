//! RF flashlight measurement protocol.
//!
//! A flashlight transmitter switches ON exactly while a radiometer pixel
//! covers it, and the same pixel position one scan line later (or a pixel
//! from a second satellite) serves as the OFF reference. Pulses are never
//! placed on consecutive scan lines, so no OFF reference is itself lit.

use std::collections::HashMap;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geofence::{GeofenceError, PolicyKind, Satellite, Tracker};
use crate::linkbudget::{noise_power, H2oRule, LinkError, LinkParams, LossChain};
use crate::orbit::{topocentric, wgs84, GroundPoint, LookAngles, OrbitError, Propagator};
use crate::propagation::{TransmitterKind, TransmitterSpec};
use crate::radiometer::{overlap_fraction, pixel_footprint_at, PixelFootprint, RadiometerError, ScanSample};
use crate::time;

/// Default ON pulse cap for pixel-level plans, seconds.
pub const DEFAULT_MAX_PULSE: f64 = 0.1;

/// Default minimum ON/OFF overlap, as a fraction of the ON pixel area.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("transmitter {0} is not a flashlight")]
    NotFlashlight(String),
    #[error("clearance band low edge {0} Hz is not positive")]
    NegativeLowEdge(f64),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geofence(#[from] GeofenceError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Radiometer(#[from] RadiometerError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Band that must be free of other emitters: `f_c ± n Δf_c`.
pub fn clearance_band(f_c: f64, delta_f_c: f64, n: u32) -> Result<(f64, f64), ExperimentError> {
    let half = f64::from(n) * delta_f_c;
    let low = f_c - half;
    if n > 0 && low <= 0.0 {
        return Err(ExperimentError::NegativeLowEdge(low));
    }
    Ok((low, f_c + half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_overlap")]
    pub overlap_threshold: f64,
    /// seconds; defaults to 0.1 s (pixel level) or one scan period (scan line)
    #[serde(default)]
    pub max_pulse: Option<f64>,
    /// clearance multiple `n` in `f_c ± n Δf_c`
    #[serde(default = "default_clearance")]
    pub clearance_multiple: u32,
}

fn default_overlap() -> f64 {
    DEFAULT_OVERLAP_THRESHOLD
}

fn default_clearance() -> u32 {
    3
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            max_pulse: None,
            clearance_multiple: default_clearance(),
        }
    }
}

/// Scan timing needed to map instants back to samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanTiming {
    pub epoch: DateTime<Utc>,
    pub scan_period: f64,
    pub samples_per_scan: u32,
}

impl ScanTiming {
    pub fn dwell(&self) -> f64 {
        self.scan_period / f64::from(self.samples_per_scan)
    }

    pub fn sample_start(&self, line: i64, sample: u32) -> DateTime<Utc> {
        time::add_seconds(&self.epoch, line as f64 * self.scan_period + f64::from(sample) * self.dwell())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub on_start: DateTime<Utc>,
    pub on_end: DateTime<Utc>,
    pub target: ScanSample,
    pub off_reference: ScanSample,
    pub overlap_fraction: f64,
    /// satellite as seen from the flashlight at the pulse centre
    pub look: LookAngles,
}

impl Pulse {
    pub fn duration(&self) -> f64 {
        time::elapsed_seconds(&self.on_start, &self.on_end)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    /// scan lines in which the flashlight is covered
    pub covered_lines: usize,
    pub discarded_overlap: usize,
    pub skipped_consecutive: usize,
    pub outside_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashlightPlan {
    pub tx: TransmitterSpec,
    pub satellite_id: String,
    pub mode: PolicyKind,
    pub window: (DateTime<Utc>, DateTime<Utc>),
    pub max_pulse: f64,
    pub overlap_threshold: f64,
    pub scan: ScanTiming,
    pub pulses: Vec<Pulse>,
    pub diagnostics: PlanDiagnostics,
    pub clearance_band_hz: (f64, f64),
    pub checklist: Vec<String>,
}

impl FlashlightPlan {
    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn write_pulses_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "pulse_index",
            "satellite_id",
            "on_start_utc",
            "on_end_utc",
            "duration_s",
            "target_line",
            "target_sample",
            "off_line",
            "off_sample",
            "overlap_fraction",
            "elevation_deg",
            "slant_range_m",
        ])?;
        for (i, p) in self.pulses.iter().enumerate() {
            w.write_record([
                i.to_string(),
                self.satellite_id.clone(),
                time::format_iso(&p.on_start),
                time::format_iso(&p.on_end),
                format!("{:.6}", p.duration()),
                p.target.scan_line_index.to_string(),
                p.target.sample_index.to_string(),
                p.off_reference.scan_line_index.to_string(),
                p.off_reference.sample_index.to_string(),
                format!("{:.6}", p.overlap_fraction),
                format!("{:.6}", p.look.elevation),
                format!("{:.3}", p.look.slant_range),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn checklist(band: (f64, f64)) -> Vec<String> {
    vec![
        "regulatory coordination of test site and frequencies (NTIA, FCC) on file".to_string(),
        format!(
            "spectrum survey shows {:.3}-{:.3} GHz free of other emitters",
            band.0 / 1e9,
            band.1 / 1e9
        ),
        "radiated-power safety audit reviewed".to_string(),
        "pixel exclusion file delivered to downstream data users".to_string(),
        "switch timing verified against the pulse table".to_string(),
    ]
}

fn footprint(
    prop: &Propagator,
    sat: &Satellite,
    sample: &ScanSample,
    altitude: f64,
) -> Result<PixelFootprint, ExperimentError> {
    let state = prop.propagate(&sample.t)?;
    Ok(pixel_footprint_at(&state, sample, &sat.radiometer, altitude, &sat.id)?)
}

/// ON/OFF pulse schedule for one flashlight and one satellite.
///
/// Phase-locked radiometers get pixel-level pulses centred on the moment of
/// closest beam approach; others get whole-scan-line pulses.
pub fn plan_experiment(
    tx: &TransmitterSpec,
    sat: &Satellite,
    window: (DateTime<Utc>, DateTime<Utc>),
    config: &ExperimentConfig,
) -> Result<FlashlightPlan, ExperimentError> {
    if tx.kind != TransmitterKind::Flashlight {
        return Err(ExperimentError::NotFlashlight(tx.id.clone()));
    }
    if window.1 <= window.0 {
        return Err(GeofenceError::InvalidWindow.into());
    }
    let days = time::elapsed_seconds(&window.0, &window.1) / 86_400.0;
    if days > crate::geofence::MAX_WINDOW_DAYS {
        return Err(GeofenceError::WindowTooLarge { days }.into());
    }
    if !(0.0..=1.0).contains(&config.overlap_threshold) {
        return Err(ExperimentError::InvalidConfig("overlap_threshold must be in [0, 1]".into()));
    }
    let spec = &sat.radiometer;
    let mode = if spec.phase_locked {
        PolicyKind::PixelLevel
    } else {
        PolicyKind::ScanLine
    };
    let max_pulse = config.max_pulse.unwrap_or(match mode {
        PolicyKind::PixelLevel => DEFAULT_MAX_PULSE,
        PolicyKind::ScanLine => spec.scan_period,
    });
    if !(max_pulse > 0.0) {
        return Err(ExperimentError::InvalidConfig("max_pulse must be positive".into()));
    }
    let band = clearance_band(tx.center_frequency, tx.emission_bandwidth, config.clearance_multiple)?;

    let tracker = Tracker::new(sat, &tx.location, 1.0)?;
    let prop = &tracker.prop;
    let (ws, we) = (tracker.offset(&window.0), tracker.offset(&window.1));
    let mut diagnostics = PlanDiagnostics::default();
    let mut pulses = Vec::new();
    let mut last_line: Option<i64> = None;
    for line in tracker.candidate_lines(ws, we)? {
        let event = match mode {
            PolicyKind::PixelLevel => tracker.pixel_event(line),
            PolicyKind::ScanLine => tracker.line_event(line),
        };
        let Some(ev) = event else { continue };
        diagnostics.covered_lines += 1;
        let len = max_pulse.min(ev.end - ev.start);
        let on_start = (ev.t_min - len / 2.0).clamp(ev.start, ev.end - len);
        let on_end = on_start + len;
        if on_start < ws || on_end > we {
            diagnostics.outside_window += 1;
            continue;
        }
        if last_line == Some(line - 1) {
            diagnostics.skipped_consecutive += 1;
            continue;
        }
        let (_, k, _) = spec.phase(ev.t_min);
        let timing = |l: i64| ScanSample {
            scan_line_index: l,
            sample_index: k,
            t: tracker.instant(spec.line_start(l) + f64::from(k) * spec.dwell()),
            boresight_angle: spec.sample_boresight(k),
        };
        let (target, off) = (timing(line), timing(line + 1));
        let on_fp = footprint(prop, sat, &target, tx.location.altitude)?;
        let off_fp = footprint(prop, sat, &off, tx.location.altitude)?;
        let overlap = overlap_fraction(&on_fp, &off_fp);
        if overlap < config.overlap_threshold {
            diagnostics.discarded_overlap += 1;
            continue;
        }
        let centre = tracker.instant(0.5 * (on_start + on_end));
        let look = topocentric(&prop.propagate(&centre)?, &tx.antenna());
        // truncate the length so nanosecond rounding never stretches the pulse
        let start_utc = tracker.instant(on_start);
        pulses.push(Pulse {
            on_start: start_utc,
            on_end: start_utc + chrono::Duration::nanoseconds((len * 1e9).floor() as i64),
            target,
            off_reference: off,
            overlap_fraction: overlap,
            look,
        });
        last_line = Some(line);
    }
    Ok(FlashlightPlan {
        tx: tx.clone(),
        satellite_id: sat.id.clone(),
        mode,
        window,
        max_pulse,
        overlap_threshold: config.overlap_threshold,
        scan: ScanTiming {
            epoch: sat.elements.epoch,
            scan_period: spec.scan_period,
            samples_per_scan: spec.samples_per_scan,
        },
        pulses,
        diagnostics,
        clearance_band_hz: band,
        checklist: checklist(band),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRecord {
    pub satellite_id: String,
    pub scan_line_index: i64,
    pub sample_index: u32,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub reason: String,
}

/// One record per sample whose dwell overlaps an ON pulse.
pub fn exclusion_records(plan: &FlashlightPlan) -> Vec<ExclusionRecord> {
    let scan = &plan.scan;
    let mut out = Vec::new();
    for (i, p) in plan.pulses.iter().enumerate() {
        let (s0, s1) = (
            time::elapsed_seconds(&scan.epoch, &p.on_start),
            time::elapsed_seconds(&scan.epoch, &p.on_end),
        );
        let line = p.target.scan_line_index;
        let line_start = line as f64 * scan.scan_period;
        for k in 0..scan.samples_per_scan {
            let a = line_start + f64::from(k) * scan.dwell();
            let b = a + scan.dwell();
            if a < s1 && s0 < b {
                out.push(ExclusionRecord {
                    satellite_id: plan.satellite_id.clone(),
                    scan_line_index: line,
                    sample_index: k,
                    start: scan.sample_start(line, k),
                    end: scan.sample_start(line, k + 1),
                    reason: format!("flashlight ON pulse {i}"),
                });
            }
        }
    }
    out
}

pub fn write_exclusions_csv<W: Write>(records: &[ExclusionRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["satellite_id", "scan_line_index", "sample_index", "start_utc", "end_utc", "reason"])?;
    for r in records {
        w.write_record([
            r.satellite_id.clone(),
            r.scan_line_index.to_string(),
            r.sample_index.to_string(),
            time::format_iso(&r.start),
            time::format_iso(&r.end),
            r.reason.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A radiometer sample with its measured (or simulated) power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSample {
    pub satellite_id: String,
    pub sample: ScanSample,
    pub center: GroundPoint,
    /// watts
    pub power: f64,
    /// dB, total loss from the flashlight to this radiometer
    pub loss_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingMode {
    SameRadiometerAdjacentLines,
    CrossSatellite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnOffPair {
    pub on_sample_power: f64,
    pub off_sample_power: f64,
    pub delta_t: f64,
    pub mode: PairingMode,
    /// dB, ON-path total loss minus OFF-path total loss
    pub loss_correction: f64,
    pub on: ScanSample,
    pub off: ScanSample,
    pub off_satellite_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub pairs: Vec<OnOffPair>,
    /// pulses whose ON or OFF measurement could not be found
    pub unmatched_on: Vec<ScanSample>,
}

/// Pairs ON measurements with their OFF references.
///
/// `max_center_distance` (meters) bounds the pixel-centre separation
/// accepted in cross-satellite mode.
pub fn pair_measurements(
    plan: &FlashlightPlan,
    samples: &[MeasuredSample],
    mode: PairingMode,
    max_center_distance: f64,
) -> PairingResult {
    let key = |s: &MeasuredSample| (s.satellite_id.clone(), s.sample.scan_line_index, s.sample.sample_index);
    let index: HashMap<_, &MeasuredSample> = samples.iter().map(|s| (key(s), s)).collect();
    let mut result = PairingResult::default();
    for p in &plan.pulses {
        let on_key = (plan.satellite_id.clone(), p.target.scan_line_index, p.target.sample_index);
        let Some(on) = index.get(&on_key) else {
            result.unmatched_on.push(p.target);
            continue;
        };
        let off = match mode {
            PairingMode::SameRadiometerAdjacentLines => index
                .get(&(plan.satellite_id.clone(), p.off_reference.scan_line_index, p.off_reference.sample_index))
                .copied(),
            PairingMode::CrossSatellite => samples
                .iter()
                .filter(|s| s.satellite_id != plan.satellite_id)
                .map(|s| (wgs84::surface_distance(&on.center, &s.center), s))
                .filter(|(d, _)| *d <= max_center_distance)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, s)| s),
        };
        let Some(off) = off else {
            result.unmatched_on.push(p.target);
            continue;
        };
        result.pairs.push(OnOffPair {
            on_sample_power: on.power,
            off_sample_power: off.power,
            delta_t: time::elapsed_seconds(&on.sample.t, &off.sample.t),
            mode,
            loss_correction: match mode {
                PairingMode::SameRadiometerAdjacentLines => 0.0,
                PairingMode::CrossSatellite => on.loss_total - off.loss_total,
            },
            on: on.sample,
            off: off.sample,
            off_satellite_id: off.satellite_id.clone(),
        });
    }
    result
}

/// Simulated ON and OFF sample powers for a same-radiometer plan: thermal
/// noise plus water vapour everywhere, plus the flashlight in ON pixels.
pub fn simulate_measurements(
    plan: &FlashlightPlan,
    link: &LinkParams,
    bandwidth: f64,
) -> Result<Vec<MeasuredSample>, ExperimentError> {
    let p_noise = noise_power(link.n_temp, bandwidth);
    let scene = p_noise + link.p_h2o.watts(p_noise);
    let mut out = Vec::new();
    for p in &plan.pulses {
        let chain = worst_case_chain(link, &p.look)?;
        let received = crate::linkbudget::dbm_to_watts(link.p_on_dbm) * chain.linear();
        for (s, power) in [(p.target, scene + received), (p.off_reference, scene)] {
            out.push(MeasuredSample {
                satellite_id: plan.satellite_id.clone(),
                sample: s,
                center: plan.tx.location,
                power,
                loss_total: chain.total,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub pass: bool,
    /// dBm; `None` for an empty plan
    pub max_received_dbm: Option<f64>,
    pub damage_threshold_dbm: f64,
    /// dB, `damage_threshold - max_received`
    pub margin_db: Option<f64>,
    pub worst_pulse: Option<usize>,
    pub p_on_dbm: f64,
}

/// Worst-case chain for a pulse geometry: peak antenna gains, and no
/// atmospheric loss where the atmosphere model cannot be evaluated.
fn worst_case_chain(link: &LinkParams, look: &LookAngles) -> Result<LossChain, ExperimentError> {
    let atmosphere = crate::linkbudget::atmospheric_loss_db(look.elevation, &link.atmosphere).unwrap_or(0.0);
    Ok(LossChain::new(
        crate::linkbudget::fspl_db(look.slant_range, link.frequency)?,
        atmosphere,
        link.polarization_db,
        link.g_tx_dbi,
        link.g_rx_dbi,
    ))
}

/// Audit from precomputed per-pulse total losses (dB).
pub fn safety_audit_losses(p_on_dbm: f64, losses: &[f64], damage_threshold_dbm: f64) -> SafetyReport {
    let worst = losses
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let max_received = worst.map(|(_, l)| p_on_dbm + l);
    SafetyReport {
        pass: max_received.is_none_or(|r| r < damage_threshold_dbm),
        max_received_dbm: max_received,
        damage_threshold_dbm,
        margin_db: max_received.map(|r| damage_threshold_dbm - r),
        worst_pulse: worst.map(|(i, _)| i),
        p_on_dbm,
    }
}

/// Highest power any pulse can deliver into the radiometer, against a
/// configured damage threshold.
pub fn safety_audit(plan: &FlashlightPlan, link: &LinkParams, damage_threshold_dbm: f64) -> Result<SafetyReport, ExperimentError> {
    let losses = plan
        .pulses
        .iter()
        .map(|p| worst_case_chain(link, &p.look).map(|c| c.total))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(safety_audit_losses(link.p_on_dbm, &losses, damage_threshold_dbm))
}

/// Noise/H2O split used by [`simulate_measurements`], exposed for reports.
pub fn scene_power(n_temp: f64, bandwidth: f64, h2o: H2oRule) -> f64 {
    let n = noise_power(n_temp, bandwidth);
    n + h2o.watts(n)
}

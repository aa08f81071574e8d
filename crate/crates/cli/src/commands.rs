//! Subcommand bodies. Each returns after every output file is written.

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use coexist::exec::Exec;
use coexist::experiment::{
    exclusion_records, pair_measurements, plan_experiment, safety_audit, simulate_measurements, write_exclusions_csv,
    ExperimentError, PairingMode, PairingResult, SafetyReport,
};
use coexist::geofence::{
    availability, dark_intervals_batch, write_schedules_csv, AvailabilityReport, BufferPolicy, GeofenceError,
    PolicyKind, Satellite,
};
use coexist::linkbudget::{atmospheric_loss_db, fspl_db, LinkBudget, LinkError, LinkParams, LossChain};
use coexist::orbit::{parse_tle_file, topocentric, wgs84, OrbitError, Propagator, SatelliteState};
use coexist::propagation::{
    compliance_values, generate_deployment, interference_grid, scan_pixels, write_grid_csv, BoundingBox,
    ComplianceReport, DeploymentConfig, PathModel, PropagationError, TransmitterKind, TransmitterSpec,
};
use coexist::{time, GroundPoint, PixelFootprint};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{builtin_geometries, FlashlightRef, Geometry, Loaded, DEFAULT_ITU_AREA};
use crate::output::{OutDir, WithProvenance};
use crate::{CliError, Provenance};

fn geofence_err(e: GeofenceError) -> CliError {
    match e {
        GeofenceError::Orbit(_) => CliError::Compute(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn experiment_err(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Geofence(g) => geofence_err(g),
        ExperimentError::NotFlashlight(_) | ExperimentError::NegativeLowEdge(_) | ExperimentError::InvalidConfig(_) => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Compute(e.to_string()),
    }
}

fn propagation_err(e: PropagationError) -> CliError {
    match e {
        PropagationError::EmptyArea
        | PropagationError::InvalidTransmitter { .. }
        | PropagationError::InvalidConfig(_)
        | PropagationError::DeploymentSyntax { .. } => CliError::Config(e.to_string()),
        _ => CliError::Compute(e.to_string()),
    }
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(compute)?;
    Ok(buf)
}

#[derive(Serialize)]
struct DarkspacesDoc<'a> {
    policy: &'a BufferPolicy,
    window: (DateTime<Utc>, DateTime<Utc>),
    satellites: Vec<&'a str>,
    reports: Vec<AvailabilityReport>,
}

pub fn darkspaces(cfg: &Loaded, policy_flag: Option<PolicyKind>, prov: &Provenance, out: &mut OutDir) -> Result<(), CliError> {
    let sats = cfg.satellites()?;
    let txs = cfg.transmitters()?;
    let window = cfg.window()?;
    let mut policy = cfg.config.policy.unwrap_or(BufferPolicy::new(PolicyKind::ScanLine));
    if let Some(kind) = policy_flag {
        policy.kind = kind;
    }
    policy.validate().map_err(geofence_err)?;
    for s in &sats {
        policy
            .check_radiometer(&s.radiometer)
            .map_err(|e| CliError::Config(format!("{}: {e}", s.id)))?;
    }
    let queries: Vec<(String, GroundPoint)> = txs.iter().map(|t| (t.id.clone(), t.location)).collect();
    let schedules = dark_intervals_batch(&queries, &sats, window, &policy, Exec::Parallel).map_err(geofence_err)?;

    out.write("darkspaces.csv", &csv_bytes(|b| write_schedules_csv(&schedules, b))?)?;
    let mut jsonl = Vec::new();
    for s in &schedules {
        s.write_jsonl(&mut jsonl).map_err(compute)?;
    }
    out.write("darkspaces.jsonl", &jsonl)?;
    let doc = DarkspacesDoc {
        policy: &policy,
        window,
        satellites: sats.iter().map(|s| s.id.as_str()).collect(),
        reports: schedules.iter().map(availability).collect(),
    };
    for r in &doc.reports {
        println!("{}: dark {:.1} s of {:.0} s, white:dark {}", r.tx_id, r.dark_seconds, r.window_seconds, ratio(r.white_to_dark_ratio));
    }
    out.write_json("availability.json", &WithProvenance { provenance: prov, body: doc })
}

fn ratio(r: f64) -> String {
    if r.is_finite() {
        format!("{r:.1}:1")
    } else {
        "infinite".into()
    }
}

#[derive(Serialize)]
struct LinkResult {
    geometry: String,
    source: Geometry,
    elevation_deg: f64,
    /// meters; absent for tabulated path loss
    slant_range_m: Option<f64>,
    budget: LinkBudget,
    /// transmit power for an ON/OFF ratio of 10
    required_p_on_dbm_ratio_10: f64,
}

#[derive(Serialize)]
struct LinkDoc {
    link: LinkParams,
    results: Vec<LinkResult>,
}

fn evaluate_geometry(link: &LinkParams, name: &str, g: &Geometry) -> Result<LinkResult, LinkError> {
    let (fspl, elevation, slant) = match g {
        Geometry::Tabulated { fspl_db, elevation_deg } => (*fspl_db, *elevation_deg, None),
        Geometry::Positions { satellite, ground } => {
            let state = SatelliteState::from_geodetic(time::utc(2000, 1, 1, 0, 0, 0), *satellite, Default::default());
            let look = topocentric(&state, ground);
            (fspl_db(look.slant_range, link.frequency)?, look.elevation, Some(look.slant_range))
        }
    };
    let chain = LossChain::new(
        fspl,
        atmospheric_loss_db(elevation, &link.atmosphere)?,
        link.polarization_db,
        link.g_tx_dbi,
        link.g_rx_dbi,
    );
    let budget = LinkBudget::from_params(link, chain)?;
    Ok(LinkResult {
        geometry: name.to_string(),
        source: g.clone(),
        elevation_deg: elevation,
        slant_range_m: slant,
        required_p_on_dbm_ratio_10: budget.required_p_on_dbm(10.0)?,
        budget,
    })
}

pub fn linkbudget(cfg: &Loaded, geometry: Option<&str>, prov: &Provenance, out: &mut OutDir) -> Result<(), CliError> {
    let link = cfg.link()?;
    let mut geometries = builtin_geometries();
    geometries.extend(cfg.config.geometries.clone());
    let selected: Vec<(&String, &Geometry)> = match geometry {
        Some(name) => {
            let g = geometries.get_key_value(name).ok_or_else(|| {
                let known: Vec<&str> = geometries.keys().map(String::as_str).collect();
                CliError::Config(format!("--geometry {name:?}: unknown (known: {})", known.join(", ")))
            })?;
            vec![g]
        }
        None => geometries.iter().collect(),
    };
    let results = selected
        .into_iter()
        .map(|(n, g)| evaluate_geometry(&link, n, g).map_err(|e| CliError::Compute(format!("geometry {n}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    for r in &results {
        println!(
            "{}: total loss {:.1} dB, received {:.1} dBm, ON/OFF {:.3}",
            r.geometry, r.budget.loss.total, r.budget.p_received, r.budget.on_off_ratio
        );
    }
    out.write_json("linkbudget.json", &WithProvenance { provenance: prov, body: LinkDoc { link, results } })
}

/// Overrides for `itu-sim` taken from the command line.
#[derive(Debug, Default, Clone)]
pub struct ItuFlags {
    pub model: Option<PathModel>,
    pub gamma: Option<Complex64>,
    pub threshold: Option<f64>,
    pub quantile: Option<f64>,
}

#[derive(Serialize)]
struct ItuDoc {
    model: PathModel,
    gamma: [f64; 2],
    area: BoundingBox,
    seed: u64,
    replicates: u64,
    transmitters_per_replicate: Vec<usize>,
    pixels_per_replicate: usize,
    grids: Vec<String>,
    compliance: ComplianceReport,
}

/// Pixels of the satellite's closest pass over `area` whose centres fall
/// inside it.
fn pass_pixels(
    sat: &Satellite,
    area: &BoundingBox,
    window: (DateTime<Utc>, DateTime<Utc>),
) -> Result<Vec<(SatelliteState, PixelFootprint)>, CliError> {
    let prop = Propagator::new(&sat.elements).map_err(compute)?;
    let center = area.center();
    let span = time::elapsed_seconds(&window.0, &window.1);
    let mut best = (f64::INFINITY, window.0);
    let mut s = 0.0;
    while s <= span {
        let t = time::add_seconds(&window.0, s);
        let state = prop.propagate(&t).map_err(compute)?;
        let d = wgs84::surface_distance(&state.geodetic, &center);
        if d < best.0 {
            best = (d, t);
        }
        s += 10.0;
    }
    let corners = [
        GroundPoint::new(area.south, area.west, 0.0),
        GroundPoint::new(area.south, area.east, 0.0),
        GroundPoint::new(area.north, area.west, 0.0),
        GroundPoint::new(area.north, area.east, 0.0),
    ];
    let half = corners.iter().map(|c| wgs84::surface_distance(c, &center)).fold(0.0, f64::max);
    // ground speed of a LEO subsatellite point is below 7.5 km/s
    let half_time = half / 6_500.0 + 60.0;
    let p = sat.radiometer.scan_period;
    let c = (time::elapsed_seconds(&sat.elements.epoch, &best.1) / p).floor() as i64;
    let n = (half_time / p).ceil() as i64;
    let pixels = scan_pixels(sat, c - n..c + n + 1, Exec::Parallel).map_err(propagation_err)?;
    Ok(pixels.into_iter().filter(|(_, fp)| area.contains(&fp.center)).collect())
}

pub fn itu_sim(cfg: &Loaded, flags: &ItuFlags, seed: u64, prov: &Provenance, out: &mut OutDir) -> Result<(), CliError> {
    let mut itu = cfg.itu()?;
    let sats = cfg.satellites()?;
    let window = cfg.window()?;
    if let Some(m) = flags.model {
        itu.model = m;
    }
    if let Some(g) = flags.gamma {
        itu.interference.gamma = g;
    }
    if let Some(t) = flags.threshold {
        itu.threshold = t;
    }
    if let Some(q) = flags.quantile {
        itu.quantile = q;
    }
    if !(0.0..=1.0).contains(&itu.quantile) {
        return Err(CliError::Config(format!("quantile {} is outside [0, 1]", itu.quantile)));
    }
    if itu.replicates == 0 {
        return Err(CliError::Config("itu.replicates must be at least 1".into()));
    }
    let area = itu.area.unwrap_or(DEFAULT_ITU_AREA);
    area.validate().map_err(propagation_err)?;
    let deployment_cfg = itu.deployment.clone().unwrap_or_else(|| DeploymentConfig::preset(itu.scenario));
    deployment_cfg.validate().map_err(propagation_err)?;

    let mut groups = Vec::new();
    for sat in &sats {
        groups.push((sat, pass_pixels(sat, &area, window)?));
    }
    let n_pixels: usize = groups.iter().map(|g| g.1.len()).sum();
    if n_pixels == 0 {
        return Err(CliError::Compute("no pixel centre falls inside the area during the window".into()));
    }

    let mut aggregates = Vec::new();
    let mut counts = Vec::new();
    let mut grids = Vec::new();
    for r in 0..itu.replicates {
        let deployment = generate_deployment(&area, &deployment_cfg, seed, r).map_err(propagation_err)?;
        counts.push(deployment.len());
        let mut samples = Vec::with_capacity(n_pixels);
        for (sat, pixels) in &groups {
            samples.extend(
                interference_grid(pixels, &deployment, itu.model, &sat.radiometer, &itu.interference, Exec::Parallel)
                    .map_err(propagation_err)?,
            );
        }
        aggregates.extend(samples.iter().map(|s| s.aggregate));
        let name = format!("grid_r{r:03}.csv");
        out.write(&name, &csv_bytes(|b| write_grid_csv(&samples, b))?)?;
        grids.push(name);
    }
    let sampling = format!(
        "pixels of the closest pass of each satellite with centres inside the area, {} replicate(s)",
        itu.replicates
    );
    let report = compliance_values(&aggregates, itu.threshold, itu.quantile, area.area_km2(), &sampling)
        .map_err(propagation_err)?;
    println!(
        "{} pixels x {} replicate(s): {:.6} below {} dBm/MHz (need {}): {}",
        n_pixels,
        itu.replicates,
        report.fraction_compliant,
        report.threshold,
        report.quantile,
        if report.pass { "PASS" } else { "FAIL" }
    );
    let doc = ItuDoc {
        model: itu.model,
        gamma: [itu.interference.gamma.re, itu.interference.gamma.im],
        area,
        seed,
        replicates: itu.replicates,
        transmitters_per_replicate: counts,
        pixels_per_replicate: n_pixels,
        grids,
        compliance: report,
    };
    out.write_json("compliance.json", &WithProvenance { provenance: prov, body: doc })
}

#[derive(Serialize)]
struct ExperimentDoc<'a> {
    plan: &'a coexist::experiment::FlashlightPlan,
    audit: &'a SafetyReport,
    exclusions: usize,
    simulated_pairing: PairingResult,
}

pub fn experiment(cfg: &Loaded, prov: &Provenance, out: &mut OutDir) -> Result<(), CliError> {
    let section = cfg.experiment()?;
    let link = cfg.link()?;
    let sats = cfg.satellites()?;
    let window = cfg.window()?;
    let tx: TransmitterSpec = match &section.flashlight {
        FlashlightRef::Inline(t) => (**t).clone(),
        FlashlightRef::Id(id) => cfg
            .transmitters()?
            .into_iter()
            .find(|t| &t.id == id)
            .ok_or_else(|| CliError::Config(format!("experiment.flashlight: no transmitter {id:?}")))?,
    };
    if tx.kind != TransmitterKind::Flashlight {
        return Err(CliError::Config(format!("experiment.flashlight: {} is a {}, not a Flashlight", tx.id, tx.kind)));
    }
    let sat = match &section.satellite {
        None => &sats[0],
        Some(id) => sats
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| CliError::Config(format!("experiment.satellite: no satellite {id:?}")))?,
    };
    let plan = plan_experiment(&tx, sat, window, &section.plan).map_err(experiment_err)?;
    if plan.is_empty() {
        eprintln!("warning: no usable pass of {} over {} in the window; the plan is empty", sat.id, tx.id);
    }
    let audit = safety_audit(&plan, &link, section.damage_threshold_dbm).map_err(experiment_err)?;
    let exclusions = exclusion_records(&plan);
    let samples = simulate_measurements(&plan, &link, sat.radiometer.bandwidth).map_err(experiment_err)?;
    let pairing = pair_measurements(&plan, &samples, PairingMode::SameRadiometerAdjacentLines, 0.0);

    out.write("pulses.csv", &csv_bytes(|b| plan.write_pulses_csv(b))?)?;
    out.write("exclusions.csv", &csv_bytes(|b| write_exclusions_csv(&exclusions, b))?)?;
    out.write_json("safety.json", &WithProvenance { provenance: prov, body: &audit })?;
    println!(
        "{} pulses ({} lines covered), max received {}, audit {}",
        plan.pulses.len(),
        plan.diagnostics.covered_lines,
        audit.max_received_dbm.map_or("n/a".into(), |r| format!("{r:.1} dBm")),
        if audit.pass { "PASS" } else { "FAIL" }
    );
    let doc = ExperimentDoc {
        plan: &plan,
        audit: &audit,
        exclusions: exclusions.len(),
        simulated_pairing: pairing,
    };
    out.write_json("plan.json", &WithProvenance { provenance: prov, body: doc })
}

#[derive(Serialize)]
struct TleEntry {
    file: PathBuf,
    catalog_number: u32,
    name: Option<String>,
    epoch: DateTime<Utc>,
    period_minutes: f64,
    inclination_deg: f64,
    eccentricity: f64,
    subsatellite_at_epoch: GroundPoint,
}

#[derive(Serialize)]
struct TleDoc {
    element_sets: Vec<TleEntry>,
}

pub fn validate_tle(files: &[PathBuf], prov: &Provenance, out: &mut OutDir) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Config("no TLE files given".into()));
    }
    let mut entries = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let sets = parse_tle_file(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for el in sets {
            let state = Propagator::new(&el)
                .and_then(|p| p.propagate(&el.epoch))
                .map_err(|e: OrbitError| CliError::Compute(format!("{} {}: {e}", path.display(), el.catalog_number)))?;
            println!("{} {}: ok, epoch {}", path.display(), el.label(), el.epoch);
            entries.push(TleEntry {
                file: path.clone(),
                catalog_number: el.catalog_number,
                name: el.name.clone(),
                epoch: el.epoch,
                period_minutes: el.period_seconds() / 60.0,
                inclination_deg: el.inclination,
                eccentricity: el.eccentricity,
                subsatellite_at_epoch: state.geodetic,
            });
        }
    }
    out.write_json("tle_report.json", &WithProvenance { provenance: prov, body: TleDoc { element_sets: entries } })
}

/// TLE paths named by a config's satellite entries.
pub fn config_tle_paths(cfg: &Loaded) -> Vec<PathBuf> {
    let paths: BTreeSet<PathBuf> = cfg.config.satellites.iter().map(|s| cfg.resolve(&s.tle)).collect();
    paths.into_iter().collect()
}

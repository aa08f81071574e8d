use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn tle_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/noaa21_synthetic.tle")
}

fn scenario(radiometer: &str) -> Value {
    json!({
        "satellites": [{ "tle": tle_path(), "radiometer": radiometer }],
        "transmitters": [{
            "id": "flash",
            "location": { "latitude": 40.8178, "longitude": -121.4695, "altitude": 1000.0 },
            "antenna_height": 3.0,
            "eirp_density": 17.0,
            "center_frequency": 24.0e9,
            "emission_bandwidth": 0.2e9,
            "kind": "Flashlight"
        }],
        "window": { "start": "2023-04-23T06:00:00Z", "end": "2023-04-23T12:00:00Z" },
        "link": { "n_temp": 500.0 },
        "itu": {
            "area": { "south": 40.5, "north": 41.0, "west": -121.8, "east": -121.0 },
            "deployment": { "kinds": { "UE": {
                "density_per_km2": 0.05,
                "eirp_density": { "dist": "fixed", "value": -50.0 },
                "antenna_height": { "dist": "uniform", "low": 1.0, "high": 10.0 },
                "center_frequency": 24.5e9,
                "emission_bandwidth": 0.2e9
            } } }
        },
        "experiment": { "flashlight": "flash", "damage_threshold_dbm": -30.0 },
        "seed": 7
    })
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(config: &Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("scenario.json"), serde_json::to_vec_pretty(config).unwrap()).unwrap();
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("scenario.json")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, sub: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_coexist"))
            .arg(sub)
            .arg("--config")
            .arg(self.config())
            .arg("--out-dir")
            .arg(self.out(out))
            .args(extra)
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn darkspaces_csv_header_and_outputs() {
    let run = Run::new(&scenario("atms"));
    let o = run.exec("darkspaces", "out", &["--policy", "pixel"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(run.out("out/darkspaces.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tx_id,satellite_id,scan_line_index,start_utc,end_utc,policy_kind");
    assert!(csv.lines().count() > 1);
    assert_eq!(
        files(&run.out("out")),
        ["availability.json", "darkspaces.csv", "darkspaces.jsonl", "manifest.json"]
    );
    // nothing besides the config and the out dir appeared
    assert_eq!(files(run.dir.path()), ["out", "scenario.json"]);
    let av = read_json(&run.out("out/availability.json"));
    assert_eq!(av["provenance"]["seed"], 7);
    assert_eq!(av["policy"]["kind"], "PixelLevel");
}

#[test]
fn pixel_policy_needs_a_phase_locked_radiometer() {
    let run = Run::new(&scenario("amsu-a"));
    let ok = run.exec("darkspaces", "line", &["--policy", "scanline"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let bad = run.exec("darkspaces", "pixel", &["--policy", "pixel"]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("not phase locked"), "{}", stderr(&bad));
}

#[test]
fn reruns_are_byte_identical() {
    let run = Run::new(&scenario("atms"));
    for sub in ["darkspaces", "linkbudget", "itu-sim", "experiment"] {
        let a = run.exec(sub, &format!("{sub}-a"), &[]);
        let b = run.exec(sub, &format!("{sub}-b"), &[]);
        assert_eq!(code(&a), 0, "{sub}: {}", stderr(&a));
        assert_eq!(code(&b), 0);
        let (da, db) = (run.out(&format!("{sub}-a")), run.out(&format!("{sub}-b")));
        assert_eq!(files(&da), files(&db));
        for f in files(&da) {
            assert_eq!(std::fs::read(da.join(&f)).unwrap(), std::fs::read(db.join(&f)).unwrap(), "{sub}/{f}");
        }
    }
}

#[test]
fn linkbudget_reference_columns() {
    let run = Run::new(&scenario("atms"));
    for (g, total) in [("edge", -153.0), ("nadir", -149.0)] {
        let o = run.exec("linkbudget", g, &["--geometry", g]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let doc = read_json(&run.out(&format!("{g}/linkbudget.json")));
        let t = doc["results"][0]["budget"]["loss"]["total"].as_f64().unwrap();
        assert_eq!(t.round(), total);
    }
    let o = run.exec("linkbudget", "x", &["--geometry", "zenith"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_n_temp_is_a_config_error() {
    let mut cfg = scenario("atms");
    cfg["link"] = json!({ "p_on_dbm": 40.0 });
    let run = Run::new(&cfg);
    let o = run.exec("linkbudget", "out", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_temp"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let mut cfg = scenario("atms");
    cfg["windw"] = json!(1);
    let o = Run::new(&cfg).exec("darkspaces", "out", &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_gamma_two_ray_grid_equals_los() {
    let run = Run::new(&scenario("atms"));
    let los = run.exec("itu-sim", "los", &["--model", "los"]);
    let two = run.exec("itu-sim", "two", &["--model", "two-ray", "--gamma", "0"]);
    assert_eq!(code(&los), 0, "{}", stderr(&los));
    assert_eq!(code(&two), 0, "{}", stderr(&two));
    let strip = |p: PathBuf| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},{},{}", f[0], f[1], f[2], f[4])
            })
            .collect()
    };
    let a = strip(run.out("los/grid_r000.csv"));
    assert!(!a.is_empty());
    assert_eq!(a, strip(run.out("two/grid_r000.csv")));
    let report = read_json(&run.out("los/compliance.json"));
    assert_eq!(report["compliance"]["threshold"], -200.0);
    assert_eq!(report["compliance"]["quantile"], 0.9999);
}

#[test]
fn seed_changes_the_deployment() {
    let run = Run::new(&scenario("atms"));
    assert_eq!(code(&run.exec("itu-sim", "a", &[])), 0);
    assert_eq!(code(&run.exec("itu-sim", "b", &["--seed", "8"])), 0);
    let a = std::fs::read(run.out("a/grid_r000.csv")).unwrap();
    let b = std::fs::read(run.out("b/grid_r000.csv")).unwrap();
    assert_ne!(a, b);
    let doc = read_json(&run.out("b/compliance.json"));
    assert_eq!(doc["seed"], 8);
    assert_eq!(doc["provenance"]["overrides"][0][0], "--seed");
}

#[test]
fn experiment_outputs() {
    let run = Run::new(&scenario("atms"));
    let o = run.exec("experiment", "out", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan = read_json(&run.out("out/plan.json"));
    let pulses = plan["plan"]["pulses"].as_array().unwrap();
    assert!(!pulses.is_empty());
    let csv = std::fs::read_to_string(run.out("out/pulses.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let d: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(d <= 0.1);
    }
    assert!(plan["audit"]["margin_db"].is_number());
    let ex = std::fs::read_to_string(run.out("out/exclusions.csv")).unwrap();
    assert_eq!(ex.lines().next().unwrap(), "satellite_id,scan_line_index,sample_index,start_utc,end_utc,reason");
}

#[test]
fn empty_pass_window_warns_but_succeeds() {
    let mut cfg = scenario("atms");
    cfg["window"] = json!({ "start": "2023-04-23T00:00:00Z", "end": "2023-04-23T00:10:00Z" });
    let run = Run::new(&cfg);
    let o = run.exec("experiment", "out", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let plan = read_json(&run.out("out/plan.json"));
    assert_eq!(plan["plan"]["pulses"].as_array().unwrap().len(), 0);
}

#[test]
fn far_future_window_is_a_computation_error() {
    let mut cfg = scenario("atms");
    cfg["window"] = json!({ "start": "2025-04-23T00:00:00Z", "end": "2025-04-23T06:00:00Z" });
    let o = Run::new(&cfg).exec("darkspaces", "out", &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn validate_tle_reports_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let ok = Command::new(env!("CARGO_BIN_EXE_coexist"))
        .args(["validate-tle", "--out-dir"])
        .arg(&out)
        .arg(tle_path())
        .output()
        .unwrap();
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let doc = read_json(&out.join("tle_report.json"));
    assert_eq!(doc["element_sets"][0]["catalog_number"], 54234);

    let text = std::fs::read_to_string(tle_path()).unwrap();
    let broken = dir.path().join("broken.tle");
    std::fs::write(&broken, text.replace("98.7400", "98.7401")).unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_coexist"))
        .args(["validate-tle", "--out-dir"])
        .arg(&out)
        .arg(&broken)
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("checksum"), "{}", stderr(&bad));
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_uavscale"));
    c.env_remove("UAVSCALE_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\n{}",
            String::from_utf8_lossy(&o.stdout),
            stderr(o)
        )
    })
}

fn synth(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out-dir", d];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_str().unwrap().to_owned()
}

#[test]
fn report_has_stable_top_level_keys() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--layout", "center"]);
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        &p(t.path(), "detections/img_0000.txt"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort();
    let mut want = uavscale::report::TOP_LEVEL_KEYS.to_vec();
    want.sort();
    assert_eq!(keys, want);
    assert_eq!(v["scale"]["status"], "ok");
    assert!(v["crop_plan"].is_null());
    assert!(v["sensitivity"].is_null());
    assert_eq!(v["instances"].as_array().unwrap().len(), 20);
    let s = v["scale"]["global_scale"].as_f64().unwrap();
    assert!((s - 0.1).abs() <= 1e-6, "{s}");
    assert!((v["scale"]["altitude_m"].as_f64().unwrap() - 100.0).abs() <= 1e-4);
}

#[test]
fn too_few_detections_exit_three_with_stable_report() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--count", "4", "--layout", "center"]);
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        &p(t.path(), "detections/img_0000.txt"),
    ]);
    assert_eq!(code(&o), 3);
    let v = json(&o);
    assert_eq!(v["scale"]["status"], "insufficient-anchors");
    assert!(v["scale"].get("global_scale").is_none());
    assert!(v["aggregation"].is_null());
    assert_eq!(v["instances"].as_array().unwrap().len(), 4);
}

#[test]
fn malformed_line_exits_four_and_names_the_line() {
    let t = tempfile::tempdir().unwrap();
    let f = t.path().join("bad.txt");
    std::fs::write(
        &f,
        "0 0 10 0 10 4 0 4 small-vehicle 0.9\n0 0 10 zero 10 4 0 4 small-vehicle 0.9\n",
    )
    .unwrap();
    let o = run(&[
        "--focal-px",
        "1000",
        "--image-width",
        "640",
        "--image-height",
        "480",
        "estimate",
        f.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_config_exits_five() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &[]);
    let det = p(t.path(), "detections/img_0000.txt");

    let unknown = t.path().join("unknown.toml");
    std::fs::write(&unknown, "fx = 1000.0\nfocal = 3\n").unwrap();
    let o = run(&["--config", unknown.to_str().unwrap(), "estimate", &det]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("focal"));

    // no image size anywhere
    let o = run(&["--focal-px", "1000", "estimate", &det]);
    assert_eq!(code(&o), 5);

    // pitch above the horizon
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "--pitch-deg",
        "10",
        "estimate",
        &det,
    ]);
    assert_eq!(code(&o), 5);

    // orthophotos are nadir by definition
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "--orthophoto",
        "--pitch-deg",
        "-60",
        "estimate",
        &det,
    ]);
    assert_eq!(code(&o), 5);
}

#[test]
fn missing_input_exits_four() {
    let o = run(&[
        "--focal-px",
        "1000",
        "--image-width",
        "640",
        "--image-height",
        "480",
        "estimate",
        "/nonexistent/dets.txt",
    ]);
    assert_eq!(code(&o), 4);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["estimate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let t = tempfile::tempdir().unwrap();
    let r = t.path().join("r.json");
    std::fs::write(&r, "{}").unwrap();
    assert_eq!(
        code(&run(&["plan-crops", "--report", r.to_str().unwrap()])),
        2
    );
    assert_eq!(
        code(&run(&[
            "plan-crops",
            "--report",
            r.to_str().unwrap(),
            "--map",
            "0,0,10"
        ])),
        2
    );
}

fn scale_file(dir: &Path, s: f64) -> String {
    let f = dir.join("scale.json");
    let v = serde_json::json!({
        "n_detections": 20, "n_valid": 20, "n_inliers": 20,
        "status": "ok", "global_scale": s, "altitude_m": s * 1000.0,
        "avg_resolution": s,
    });
    std::fs::write(&f, v.to_string()).unwrap();
    f.to_str().unwrap().to_owned()
}

#[test]
fn plan_crops_window_grid() {
    let t = tempfile::tempdir().unwrap();
    let r = scale_file(t.path(), 0.1);
    let o = run(&[
        "plan-crops",
        "--report",
        &r,
        "--map",
        "0,0,4000,4000",
        "--gsd-sat",
        "0.3",
        "--uav-width",
        "6000",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!((v["crop_size_px"].as_f64().unwrap() - 2000.0).abs() < 1e-9);
    assert!((v["stride_px"].as_f64().unwrap() - 1000.0).abs() < 1e-9);
    let w = v["windows"].as_array().unwrap();
    assert_eq!(w.len(), 9);
    assert_eq!(w[0]["x"], 0);
    assert_eq!(w[8]["x"], 2000);
    assert_eq!(w[8]["y"], 2000);

    let o = run(&[
        "plan-crops",
        "--report",
        &r,
        "--map",
        "0,0,4000,4000",
        "--gsd-sat",
        "0.3",
        "--uav-width",
        "4000",
    ]);
    let v = json(&o);
    assert!((v["crop_size_px"].as_f64().unwrap() - 4000.0 / 3.0).abs() < 0.01);
}

#[test]
fn plan_crops_from_full_report_and_oversized_warning() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--layout", "center"]);
    let rep = t.path().join("r.json");
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        &p(t.path(), "detections/img_0000.txt"),
        "-o",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    // 0.1 m/px over 640 px is 64 m, 32 map pixels at 2 m/px
    let o = run(&[
        "plan-crops",
        "--report",
        rep.to_str().unwrap(),
        "--map",
        "0,0,100,100",
        "--gsd-sat",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!((v["crop_size_px"].as_f64().unwrap() - 32.0).abs() < 1e-4);
    assert_eq!(v["oversized"], false);

    let o = run(&[
        "plan-crops",
        "--report",
        rep.to_str().unwrap(),
        "--map",
        "0,0,20,30",
        "--gsd-sat",
        "2",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
    let v = json(&o);
    assert_eq!(v["oversized"], true);
    assert_eq!(v["windows"].as_array().unwrap().len(), 1);
    assert_eq!(v["windows"][0]["size"], 20);
}

#[test]
fn estimate_with_map_fills_crop_plan() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--layout", "center"]);
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "--gsd-sat",
        "0.3",
        "estimate",
        &p(t.path(), "detections/img_0000.txt"),
        "--map",
        "0,0,1000,1000",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let c = v["crop_plan"]["crop_size_px"].as_f64().unwrap();
    assert!((c - 640.0 * 0.1 / 0.3).abs() < 1e-3, "{c}");
}

#[test]
fn json_and_dota_inputs_agree() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a, &["--seed", "7", "--pitch-deg", "-70"]);
    synth(
        &b,
        &["--seed", "7", "--pitch-deg", "-70", "--format", "json"],
    );
    let est = |dir: &Path, f: &str| {
        let o = run(&["--config", &p(dir, "config.toml"), "estimate", &p(dir, f)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        json(&o)
    };
    let va = est(&a, "detections/img_0000.txt");
    let vb = est(&b, "detections/img_0000.json");
    assert_eq!(va["scale"], vb["scale"]);
    assert_eq!(va["instances"], vb["instances"]);
}

#[test]
fn directory_input_writes_one_report_per_file() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--images", "3"]);
    let out = t.path().join("reports");
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        &p(t.path(), "detections"),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for k in 0..3 {
        assert!(out.join(format!("img_{k:04}.report.json")).is_file());
    }
    // without an output directory several inputs print one array
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        &p(t.path(), "detections"),
    ]);
    assert_eq!(json(&o).as_array().unwrap().len(), 3);
}

#[test]
fn orthophoto_mode_recovers_gsd() {
    let t = tempfile::tempdir().unwrap();
    synth(
        t.path(),
        &["--orthophoto", "--altitude", "80", "--outliers", "0.2"],
    );
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        &p(t.path(), "detections/img_0000.txt"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["meta"]["orthophoto"], true);
    assert_eq!(v["meta"]["prior"]["height_m"], 0.0);
    assert_eq!(v["meta"]["prior_source"]["height_m"], "orthophoto");
    assert!(v["scale"]["altitude_m"].is_null());
    let s = v["scale"]["global_scale"].as_f64().unwrap();
    assert!((s - 0.08).abs() / 0.08 <= 1e-9, "{s}");
}

#[test]
fn category_filter_counts_dropped_lines() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--layout", "center"]);
    let f = t.path().join("detections/img_0000.txt");
    let mut text = std::fs::read_to_string(&f).unwrap();
    text.push_str("0 0 10 0 10 4 0 4 plane 0.99\n");
    std::fs::write(&f, text).unwrap();
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "estimate",
        f.to_str().unwrap(),
    ]);
    let v = json(&o);
    assert_eq!(v["meta"]["dropped_category"], 1);
    assert_eq!(v["instances"].as_array().unwrap().len(), 20);
}

#[test]
fn flags_override_config_file() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--layout", "center"]);
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "--length-m",
        "8.8",
        "estimate",
        &p(t.path(), "detections/img_0000.txt"),
    ]);
    let v = json(&o);
    assert_eq!(v["meta"]["prior"]["length_m"], 8.8);
    assert_eq!(v["meta"]["prior_source"]["length_m"], "override");
    assert_eq!(v["meta"]["prior_source"]["width_m"], "config-file");
}

#[test]
fn sensitivity_section() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--pitch-deg", "-60"]);
    let o = run(&[
        "--config",
        &p(t.path(), "config.toml"),
        "sensitivity",
        &p(t.path(), "detections/img_0000.txt"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let s = &v["sensitivity"];
    let k = s["d_r_rel_per_d_theta"].as_f64().unwrap();
    let want = -1.0 / (-60f64).to_radians().tan();
    assert!((k - want).abs() < 1e-12, "{k} vs {want}");
    let pitch = s["fd_check"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["quantity"] == "pitch-resolution")
        .expect("pitch check present");
    assert!(pitch["rel_gap"].as_f64().unwrap() < 0.02);
}

#[test]
fn synth_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        synth(
            d,
            &[
                "--images",
                "4",
                "--noise",
                "0.05",
                "--outliers",
                "0.1",
                "--seed",
                "3",
            ],
        );
    }
    for k in 0..4 {
        let rel = format!("detections/img_{k:04}.txt");
        assert_eq!(
            std::fs::read(a.join(&rel)).unwrap(),
            std::fs::read(b.join(&rel)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.join("truth.json")).unwrap(),
        std::fs::read(b.join("truth.json")).unwrap()
    );
}

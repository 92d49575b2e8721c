use leo_ris::ao::Mode;
use leo_ris::harness::*;
use std::path::PathBuf;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("leo-ris-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn empty_file_gives_the_reference_scenario() {
    let cfg = ScenarioConfig::from_toml_str("", ScenarioConfig::reference()).unwrap();
    assert_eq!(cfg, ScenarioConfig::reference());
    assert_eq!(cfg.scenario.kind, SceneKind::Physical);
    assert_eq!((cfg.constellation.num_planes, cfg.constellation.sats_per_plane), (36, 22));
    assert_eq!(cfg.constellation.altitude_km, 550.0);
    assert_eq!(cfg.antennas_per_sat(), 16);
    assert_eq!(cfg.array.ris_cols * cfg.array.ris_rows, 100);
    assert_eq!(cfg.ue.count, 6);
    assert_eq!(cfg.frame.slots, 60);
    let budgets = cfg.budgets();
    assert_eq!(budgets.len(), cfg.group.size);
    assert!((budgets[0] - 10.0).abs() < 1e-12);
    let link = cfg.link_params();
    assert!((link.noise_power() - 1.035e-13).abs() < 1e-17);
    assert!((link.sat_gain_max - 100.0).abs() < 1e-9);
}

#[test]
fn too_many_users_fail_validation() {
    let err = ScenarioConfig::from_toml_str("ue.count = 100", ScenarioConfig::reference()).unwrap_err();
    assert!(matches!(&err, HarnessError::Validation { field, .. } if field == "ue.count"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn inconsistent_frame_fails_validation() {
    let err = ScenarioConfig::from_toml_str("frame.slots = 7", ScenarioConfig::desk()).unwrap_err();
    assert!(matches!(err, HarnessError::Validation { .. }));
    let err = ScenarioConfig::from_toml_str("ue.positions_m = [[1.0, 2.0]]", ScenarioConfig::desk()).unwrap_err();
    assert!(matches!(err, HarnessError::Validation { .. }));
}

#[test]
fn unknown_keys_and_bad_syntax_are_rejected() {
    let err = ScenarioConfig::from_toml_str("uav.warp_drive = 1", ScenarioConfig::desk()).unwrap_err();
    assert!(matches!(&err, HarnessError::Validation { field, .. } if field == "uav.warp_drive"));
    let err = ScenarioConfig::from_toml_str("ue.count = ", ScenarioConfig::desk()).unwrap_err();
    assert!(matches!(err, HarnessError::Parse { .. }));
    assert_eq!(err.exit_code(), 1);
    let err = ScenarioConfig::from_toml_str("ue.count = \"three\"", ScenarioConfig::desk()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn tables_and_dotted_keys_agree() {
    let a = ScenarioConfig::from_toml_str("uav.max_speed_mps = 8.0\nrun.mode = \"no_ris\"", ScenarioConfig::desk()).unwrap();
    let b = ScenarioConfig::from_toml_str("[uav]\nmax_speed_mps = 8.0\n[run]\nmode = \"no_ris\"", ScenarioConfig::desk()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.uav.max_speed, 8.0);
    assert_eq!(a.run.mode, Mode::NoRis);
}

#[test]
fn serialization_round_trips() {
    for base in [ScenarioConfig::reference(), ScenarioConfig::desk()] {
        let mut cfg = base.clone();
        cfg.ue.count = 2;
        cfg.ue.positions_m = vec![[0.25, 300.0], [1e-3, 2.0 / 3.0]];
        cfg.constellation.epoch_s = 0.1 + 0.2;
        let text = cfg.to_toml_string();
        let dir = scratch_dir("roundtrip");
        let path = dir.join("cfg.toml");
        std::fs::write(&path, &text).unwrap();
        let back = load_scenario(&path, base.clone()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string(), text);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(text.lines().count(), ScenarioConfig::KEYS.len());
    }
}

#[test]
fn missing_file_is_a_runtime_failure() {
    let err = load_scenario(&scratch_dir("missing").join("nope.toml"), ScenarioConfig::desk()).unwrap_err();
    assert!(matches!(err, HarnessError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn empty_report_is_header_only() {
    let bytes = csv_bytes(std::iter::empty()).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), "scenario_id,slot,key,metric,value,seed\n");
}

#[test]
fn rows_serialize_with_empty_slot_for_aggregates() {
    let rows = [
        Row { scenario_id: "s".into(), slot: Some(0), key: "k".into(), metric: "min_rate".into(), value: 1.5, seed: 3 },
        Row { scenario_id: "s".into(), slot: None, key: "k".into(), metric: "mean_min_rate".into(), value: 0.25, seed: 3 },
    ];
    let text = String::from_utf8(csv_bytes(&rows).unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "s,0,k,min_rate,1.5,3");
    assert_eq!(lines[2], "s,,k,mean_min_rate,0.25,3");
}

#[test]
fn presets_expand_to_their_sweeps() {
    let base = ScenarioConfig::desk();
    let count = |p: &str| preset_points(p, &base).unwrap().len();
    assert_eq!(count("single"), 1);
    assert_eq!(count("convergence"), 3);
    assert_eq!(count("speed_altitude_sweep"), 9);
    assert_eq!(count("ris_elements_sweep"), 4);
    assert_eq!(count("connection_strategies"), 3);
    assert_eq!(count("constellation_density"), 3);
    for p in PRESETS {
        for point in preset_points(p, &base).unwrap() {
            point.config.validate().unwrap();
            assert!(!point.modes.is_empty());
        }
    }
    let physical = preset_points("constellation_density", &base).unwrap();
    assert!(physical.iter().all(|p| p.config.scenario.kind == SceneKind::Physical));
    let err = preset_points("no_such_preset", &base).unwrap_err();
    assert!(matches!(err, HarnessError::UnknownPreset(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn experiment_writes_csv_and_a_verifiable_manifest() {
    let mut base = ScenarioConfig::desk();
    base.frame = FrameSection { duration_s: 2.0, slots: 2, slot_s: 1.0, rain_redraw: RainRedraw::PerSlot };
    base.solver.ao_max_iterations = 2;
    let report = run_experiment("single", &base, 1).unwrap();
    assert_eq!(report.config_hash, base.hash());
    assert_eq!(report.version, version());
    assert!(report.points.iter().all(|p| p.status == PointStatus::Ok));
    let slots: Vec<_> = report.rows().filter(|r| r.metric == "min_rate").map(|r| r.slot).collect();
    assert_eq!(slots, vec![Some(0), Some(1)]);
    assert_eq!(report.rows().filter(|r| r.metric == "mean_min_rate" && r.slot.is_none()).count(), 1);

    let dir = scratch_dir("manifest");
    let csv = emit_csv(&report, &dir).unwrap();
    let manifest = write_manifest(&report, &dir).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + report.rows().count());
    let back = read_manifest(&manifest).unwrap();
    assert_eq!(back, report);

    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    json["config"] = serde_json::Value::String(json["config"].as_str().unwrap().replace("run.seed = 1", "run.seed = 2"));
    std::fs::write(&manifest, serde_json::to_string(&json).unwrap()).unwrap();
    let err = read_manifest(&manifest).unwrap_err();
    assert!(matches!(err, HarnessError::HashMismatch { .. }), "{err}");
}

#[test]
fn mc_check_reports_every_user() {
    let mut cfg = ScenarioConfig::desk();
    cfg.run.mc_samples = 2000;
    let rows = mc_check(&cfg).unwrap();
    assert_eq!(rows.len(), cfg.ue.count);
    for r in rows {
        assert!(r.tolerance >= 0.1 && r.mc_std_error > 0.0);
        assert_eq!(r.pass, (r.approx - r.mc_mean).abs() <= r.tolerance);
    }
}

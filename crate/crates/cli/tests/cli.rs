use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pmqkd::decoy::{finite_size_estimate, TallyTable};
use pmqkd::montecarlo::{simulate, Engine, SimConfig, SimMetadata};
use pmqkd::{ChannelParams, ProtocolParams};
use pmqkd_cli::{parse_config, RunConfig};

fn pmqkd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmqkd"))
        .args(args)
        .current_dir(dir)
        .env_remove(pmqkd_cli::OUTPUT_DIR_ENV)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_then_estimate_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--preset",
        "table1",
        "--distance-km",
        "40",
        "--rounds",
        "1e11",
        "--seed",
        "17",
        "--engine",
        "cell",
        "--out",
        "run/t.csv",
    ];
    let o = pmqkd(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = pmqkd(
        &["estimate", "--tallies", "run/t.csv", "--out", "est.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let from_files = fs::read_to_string(dir.path().join("est.json")).unwrap();

    let mut config = SimConfig::new(
        ChannelParams::table1(40.0, 0.03),
        ProtocolParams::table1(1e11),
        17,
    );
    config.engine = Engine::Cell;
    let out = simulate(&config).unwrap();
    let groups: Vec<usize> = (0..8).collect();
    let est = finite_size_estimate(&out.tallies, &config.protocol, &groups).unwrap();
    assert_eq!(
        from_files,
        serde_json::to_string_pretty(&est).unwrap() + "\n"
    );

    // The files themselves round-trip exactly.
    let table = TallyTable::read_path(&dir.path().join("run/t.csv")).unwrap();
    assert_eq!(table, out.tallies);
    let meta = SimMetadata::from_json(&fs::read_to_string(dir.path().join("run/t.json")).unwrap())
        .unwrap();
    assert_eq!(meta.config, config);
    assert_eq!(meta.ground_truth, out.truth);

    // Without --out the estimate goes to stdout.
    let o = pmqkd(&["estimate", "--tallies", "run/t.csv"], dir.path());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), from_files);
}

#[test]
fn unknown_flag_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmqkd(
        &["scan", "--no-such-flag", "1", "--out", "s.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_values_exit_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmqkd(
        &["scan", "--nu", "0.5", "--mu", "0.1", "--out", "s.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`nu`"), "{}", stderr(&o));
    assert!(!dir.path().join("s.csv").exists());

    fs::write(
        dir.path().join("bad.toml"),
        "[ChannelParams]\nmisalignmnet = 0.1\n",
    )
    .unwrap();
    let o = pmqkd(&["scan", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("misalignmnet"), "{}", stderr(&o));

    let o = pmqkd(
        &["simulate", "--rounds", "10.5", "--out", "t.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`rounds`"), "{}", stderr(&o));
}

#[test]
fn degenerate_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // No signal clicks in any phase group.
    let mut csv = String::from("setting,j_s,sent,clicked,bit_errors\n");
    for setting in ["s", "vac", "w"] {
        for j in 0..8 {
            let clicked = if setting == "w" { 3 } else { 0 };
            csv += &format!("{setting},{j},1000,{clicked},0\n");
        }
    }
    fs::write(dir.path().join("t.csv"), csv).unwrap();
    let o = pmqkd(&["estimate", "--tallies", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn scan_example_crosses_plob_near_330_km() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "scan",
        "--preset",
        "table1",
        "--e0",
        "0.13",
        "--protocols",
        "pm-asym,plob",
        "--distance-step",
        "10",
    ];
    let o = pmqkd(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let first = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[1] == "pm-asym" && f[5] == "1")
        .expect("a flagged crossing row");
    let d: f64 = first[0].parse().unwrap();
    assert!((300.0..=360.0).contains(&d), "crossing row at {d} km");
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scan.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["sim"]["channel"]["misalignment"], 0.13);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pmqkd"))
        .args(["scan", "--protocols", "plob", "--distance-stop", "20"])
        .current_dir(dir.path())
        .env(pmqkd_cli::OUTPUT_DIR_ENV, "outputs")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("outputs/scan.csv").exists());
    assert!(dir.path().join("outputs/scan.json").exists());
}

#[test]
fn verify_symmetry_prints_passing_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmqkd(
        &["verify-symmetry", "--intensities", "0.5,1", "--slices", "8"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("check,mu,nu,slices,delta,value,bound,leakage,pass"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")), "{text}");
}

#[test]
fn table1_preset_sets_exactly_the_table_values() {
    let layers =
        parse_config("preset = \"table1\"\n[ChannelParams]\nmisalignment = 0.07\n").unwrap();
    let run = RunConfig::resolve(&layers, None).unwrap();
    let (c, p) = (run.channel(), run.protocol());
    assert_eq!(
        (
            c.dark_count_rate,
            c.detector_efficiency,
            c.attenuation_db_per_km
        ),
        (1e-8, 0.2, 0.2)
    );
    assert_eq!(
        (p.ec_efficiency, p.phase_slices, p.epsilon, p.rounds),
        (1.1, 16, 1.7e-10, 1e12)
    );
    assert_eq!(c.misalignment, 0.07);

    // A file value sits above the preset, a flag above both.
    let mut layers =
        parse_config("preset = \"table1-n13\"\n[ProtocolParams]\nphase_slices = 8\n").unwrap();
    layers.overlay(&parse_config("[ProtocolParams]\nepsilon = 1e-9\n").unwrap());
    let run = RunConfig::resolve(&layers, None).unwrap();
    assert_eq!(
        (
            run.protocol().rounds,
            run.protocol().phase_slices,
            run.protocol().epsilon
        ),
        (1e13, 8, 1e-9)
    );
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmqkd(&["scan", "--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("--misalignment") && text.contains("--e0"));
}

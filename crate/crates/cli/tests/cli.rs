use std::path::Path;
use std::process::{Command, Output};

use ironstream::wire::{read_tsv, replay, PacketType};

fn ironstream(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ironstream"))
        .args(args)
        .current_dir(dir)
        .env_remove("IRONSTREAM_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_default_writes_2500_frames() {
    let dir = tempfile::tempdir().unwrap();
    let o = ironstream(dir.path(), &["simulate", "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("frames         2500"));
    let r = replay(&dir.path().join("run/session.ibci")).unwrap();
    let frames: usize = r
        .packets
        .iter()
        .filter_map(|p| match &p.payload {
            ironstream::wire::Payload::Data(d) => Some(d.frames.len()),
            _ => None,
        })
        .sum();
    assert_eq!(frames, 2500);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/session.json")).unwrap()).unwrap();
    assert_eq!(sidecar["summary"]["frames"], 2500);
    assert_eq!(sidecar["config"]["scenario"], "eyes-closed");
}

#[test]
fn invalid_rate_names_the_menu() {
    let dir = tempfile::tempdir().unwrap();
    let o = ironstream(
        dir.path(),
        &["simulate", "--rate", "300", "--gain", "5", "--devices", "4"],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(
        err.contains("250") && err.contains("500") && err.contains("1000"),
        "{err}"
    );
    assert!(
        err.contains("gain") && err.contains("devices"),
        "every problem is listed: {err}"
    );
}

#[test]
fn usage_and_runtime_errors_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ironstream(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        ironstream(dir.path(), &["analyze", "missing.ibci"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ironstream(dir.path(), &["analyze", "missing.ibci", "--report", "bogus"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = ironstream(
            dir.path(),
            &[
                "simulate",
                "--scenario",
                "device-check",
                "--seed",
                "11",
                "--duration",
                "3",
                "--out",
                out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a/session.ibci")).unwrap();
    let b = std::fs::read(dir.path().join("b/session.ibci")).unwrap();
    assert_eq!(a, b);
    let o = ironstream(
        dir.path(),
        &[
            "simulate",
            "--scenario",
            "device-check",
            "--seed",
            "12",
            "--duration",
            "3",
            "--out",
            "c",
        ],
    );
    assert!(o.status.success());
    assert_ne!(a, std::fs::read(dir.path().join("c/session.ibci")).unwrap());
}

#[test]
fn shorted_session_noise_report() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        ironstream(dir.path(), &["simulate", "--scenario", "shorted", "--out", "s"])
            .status
            .success()
    );
    let o = ironstream(
        dir.path(),
        &["analyze", "s/session.ibci", "--report", "noise", "--out", "s"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s/report.json")).unwrap()).unwrap();
    let mean = report["noise_mean_rms_uv"].as_f64().unwrap();
    assert!((0.3..=0.5).contains(&mean), "{mean}");
}

#[test]
fn eyes_closed_alpha_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ironstream(dir.path(), &["simulate", "--out", "e"]).status.success());
    let o = ironstream(
        dir.path(),
        &["analyze", "e/session.ibci", "--report", "detect", "--out", "e"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e/report.json")).unwrap()).unwrap();
    let detected: Vec<bool> = report["alpha"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["detected"].as_bool().unwrap())
        .collect();
    assert_eq!(detected, [false, true, true, true, false]);
}

#[test]
fn analysis_files_read_back() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ironstream(dir.path(), &["simulate", "--duration", "4", "--out", "x"])
        .status
        .success());
    assert!(ironstream(dir.path(), &["analyze", "x/session.ibci", "--out", "x"])
        .status
        .success());
    let traces = read_tsv(std::fs::File::open(dir.path().join("x/traces.tsv")).unwrap()).unwrap();
    assert_eq!(traces.rows.len(), 1000);
    assert_eq!(traces.columns[0], "t_seconds");
    assert_eq!(traces.columns[7], "O1_uV");
    let psd = read_tsv(std::fs::File::open(dir.path().join("x/psd.tsv")).unwrap()).unwrap();
    assert_eq!(psd.columns.len(), 9);
    let f = psd.column("freq_hz").unwrap();
    assert!((f[1] - f[0] - 0.5).abs() < 1e-12);
}

#[test]
fn gel_montage_impedance_is_good() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["dc", "ac"] {
        let o = ironstream(dir.path(), &["impedance", "--scenario", "resting", "--mode", mode]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.contains(" good ")), "{text}");
    }
}

#[test]
fn budget_examples() {
    let dir = tempfile::tempdir().unwrap();
    let o = ironstream(dir.path(), &["budget", "--capacity-mah", "1200", "--draw-ma", "133.33"]);
    assert!(stdout(&o).contains("= 9.00 h"), "{}", stdout(&o));
    let o = ironstream(dir.path(), &["budget", "--capacity-mah", "600", "--draw-ma", "133.33"]);
    assert!(stdout(&o).contains("= 4.50 h"));
    let o = ironstream(dir.path(), &["budget", "--draw-ma", "0"]);
    assert_eq!(o.status.code(), Some(3));
    let o = ironstream(dir.path(), &["budget"]);
    assert!(stdout(&o).contains("adc") && stdout(&o).contains("8.40"));
}

#[test]
fn export_matches_session() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ironstream(dir.path(), &["simulate", "--duration", "1", "--out", "e"])
        .status
        .success());
    let o = ironstream(dir.path(), &["export", "e/session.ibci", "--out", "e/x.tsv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = read_tsv(std::fs::File::open(dir.path().join("e/x.tsv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 250);
    assert_eq!(t.rows[249][0], 0.996);
    let r = replay(&dir.path().join("e/session.ibci")).unwrap();
    assert_eq!(r.packets.iter().filter(|p| p.ptype() == PacketType::Data).count(), 250);
}

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 3\nduration = 2.0\n[acquisition]\nrate = 500\ndevices = 2\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ironstream"))
        .args(["simulate", "--out", "c", "--no-sensors"])
        .current_dir(dir.path())
        .env("IRONSTREAM_CONFIG", dir.path().join("run.toml"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("500 SPS") && text.contains("16 channel(s)") && text.contains("frames         1000"),
        "{text}"
    );
    assert!(text.contains("sensor frames  0"));
}

#[test]
fn serve_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut server = Command::new(env!("CARGO_BIN_EXE_ironstream"))
        .args([
            "serve",
            "--port",
            "0",
            "--fast",
            "--frames",
            "500",
            "--scenario",
            "resting",
        ])
        .current_dir(dir.path())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    std::io::BufRead::read_line(
        &mut std::io::BufReader::new(server.stdout.as_mut().unwrap()),
        &mut first,
    )
    .unwrap();
    let port = first.trim().rsplit(':').next().unwrap().to_string();
    let o = ironstream(dir.path(), &["record", "--port", &port, "--out", "r/s.ibci"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(server.wait().unwrap().success());
    let o = ironstream(dir.path(), &["export", "r/s.ibci"]);
    assert_eq!(stdout(&o).lines().count(), 501);
}

use mipt_shadows::cli::{parse_grid, replay, run, Experiment, ExperimentConfig};
use mipt_shadows::circuit::{GateEnsemble, Prescramble};
use mipt_shadows::Error;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mipt-shadows-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn estimate_config(out: &Path) -> ExperimentConfig {
    serde_json::from_value(serde_json::json!({
        "experiment": "estimate",
        "n_qubits": [5],
        "p_grid": [0.3],
        "gate_ensemble": "clifford2q",
        "prescramble": "global_clifford",
        "n_traj": 200,
        "n_shots": 60,
        "observable": "ZIIIZ",
        "output": out,
        "master_seed": 11,
    }))
    .unwrap()
}

#[test]
fn grid_parsing() {
    assert_eq!(parse_grid("0.1:0.3:0.1").unwrap(), vec![0.1, 0.2, 0.3]);
    assert_eq!(parse_grid("0.5,0.25").unwrap(), vec![0.5, 0.25]);
    assert!(parse_grid("0.3:0.1:0.1").is_err());
    assert!(parse_grid("a,b").is_err());
}

#[test]
fn config_round_trip_and_unknown_fields() {
    let c = estimate_config(Path::new("x"));
    let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
    v["bogus"] = 1.into();
    assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn runs_are_byte_identical() {
    for exp in [Experiment::ShadowNorms, Experiment::Purify, Experiment::Charge] {
        let (ga, gb) = (scratch(&format!("det-a-{}", exp.name())), scratch(&format!("det-b-{}", exp.name())));
        let mk = |out: &Path| -> ExperimentConfig {
            serde_json::from_value(serde_json::json!({
                "experiment": exp,
                "n_qubits": [4, 5],
                "p_grid": [0.2, 0.4],
                "gate_ensemble": if exp == Experiment::Charge { "u1_haar" } else { "haar" },
                "prescramble": "none",
                "n_traj": 40,
                "output": out,
                "master_seed": 3,
            }))
            .unwrap()
        };
        let (ca, cb) = (mk(&ga), mk(&gb));
        let fa = run(&ca).unwrap();
        run(&cb).unwrap();
        for f in fa.files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
            let a = std::fs::read_to_string(f).unwrap();
            let b = std::fs::read_to_string(gb.join(f.file_name().unwrap())).unwrap();
            // the output path sits in the config header line
            let strip = |s: &str| s.lines().skip(2).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(&a), strip(&b), "{}", f.display());
            assert!(a.starts_with("# config_hash="));
        }
    }
}

#[test]
fn replay_reproduces_estimate() {
    let out = scratch("replay");
    let c = estimate_config(&out);
    run(&c).unwrap();
    let stored: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    let r = replay(&c, &out.join("records.tsv")).unwrap();
    assert_eq!(r.estimate, stored["results"]["estimate"].as_f64().unwrap());
    assert_eq!(r.n_shots, 60);

    // a different observable re-uses the same records
    let mut c2 = c.clone();
    c2.observable = Some("fidelity".into());
    let r2 = replay(&c2, &out.join("records.tsv")).unwrap();
    assert_eq!(r2.n_shots, 60);
    assert!(r2.estimate.is_finite());
}

#[test]
fn corrupted_records_are_rejected() {
    let out = scratch("corrupt");
    let c = estimate_config(&out);
    run(&c).unwrap();
    let path = out.join("records.tsv");
    let text = std::fs::read_to_string(&path).unwrap();

    // tamper with a stored log probability
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let k = lines.iter().position(|l| !l.starts_with('#') && l.split('\t').nth(4).is_some_and(|t| !t.is_empty())).unwrap();
    let mut f: Vec<String> = lines[k].split('\t').map(String::from).collect();
    let lp: f64 = f[2].parse().unwrap();
    f[2] = (lp - 0.5).to_string();
    lines[k] = f.join("\t");
    let bad = out.join("tampered.tsv");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    assert!(matches!(replay(&c, &bad), Err(Error::RecordMismatch(_))));

    // wrong circuit hash
    let mut c2 = c.clone();
    c2.p_grid = vec![0.35];
    assert!(matches!(replay(&c2, &path), Err(Error::HashMismatch { .. })));

    // truncated line
    let trunc = out.join("trunc.tsv");
    std::fs::write(&trunc, format!("{}\n0\t1\n", text.lines().next().unwrap())).unwrap();
    assert!(matches!(replay(&c, &trunc), Err(Error::Parse(_))));
}

#[test]
fn resource_guard() {
    let mut c = estimate_config(Path::new("unused"));
    c.n_qubits = vec![14];
    c.gate_ensemble = GateEnsemble::Haar;
    c.prescramble = Prescramble::GlobalHaar;
    c.observable = Some("fidelity".into());
    assert!(matches!(c.validate(), Err(Error::TooManyQubits { .. })));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mipt-shadows");
    let out = scratch("bin");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    let o = out.to_str().unwrap();
    assert_eq!(code(&["purify", "--N", "3", "--p", "0.3", "--ntraj", "5", "--out", o]), 0);
    assert!(out.join("purify.csv").exists() && out.join("manifest.json").exists());
    assert_eq!(code(&["purify", "--N", "3", "--p", "1.5", "--out", o]), 2);
    assert_eq!(code(&["shadow-norms", "--N", "14", "--p", "0.2", "--engine", "dense", "--out", o]), 3);
    assert_eq!(code(&["run", "--config", out.join("missing.json").to_str().unwrap()]), 1);
    let status = Command::new(bin)
        .args(["purify", "--N", "3", "--p", "0.3", "--ntraj", "5", "--out", o])
        .env("MIPT_SHADOWS_WORKERS", "0")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

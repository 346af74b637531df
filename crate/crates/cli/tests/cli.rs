//! Command-line behavior: exit codes, manifests, and deterministic outputs.

use std::path::Path;
use std::process::Command;

fn pwc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pwc"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const TINY_CONFIG: &str = r#"
[mesh]
resolution = 6

[mcmc]
iters = 200
burn = 80
thin = 2
chains = 1
calibration_draws = 500

[scenario]
n_obs = 30
family = "gumbel"
"#;

#[test]
fn bad_config_exits_2() {
    let dir = tempdir("badcfg");
    write(&dir.join("run.toml"), "[model]\nfamily = \"cauchy\"\n");
    let out = pwc()
        .args(["--config"])
        .arg(dir.join("run.toml"))
        .args(["--out"])
        .arg(dir.join("o"))
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("cauchy") || msg.contains("family"), "{msg}");
}

#[test]
fn missing_dataset_exits_3() {
    let dir = tempdir("nodata");
    write(&dir.join("run.toml"), TINY_CONFIG);
    let out = pwc()
        .args(["--config"])
        .arg(dir.join("run.toml"))
        .args(["--out"])
        .arg(dir.join("o"))
        .args(["fit", "--data"])
        .arg(dir.join("absent.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic_and_manifested() {
    let dir = tempdir("simdet");
    write(&dir.join("run.toml"), TINY_CONFIG);
    for name in ["a", "b"] {
        let st = pwc()
            .args(["--config"])
            .arg(dir.join("run.toml"))
            .args(["--seed", "42", "--out"])
            .arg(dir.join(name))
            .args(["simulate", "--replications", "2"])
            .status()
            .unwrap();
        assert!(st.success());
    }
    for r in 0..2 {
        let a = std::fs::read(dir.join("a").join(format!("dataset_{r}.csv"))).unwrap();
        let b = std::fs::read(dir.join("b").join(format!("dataset_{r}.csv"))).unwrap();
        assert_eq!(a, b, "replication {r} differs between identical runs");
    }
    // manifest lists exactly the files present in the directory
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a/manifest.json")).unwrap())
            .unwrap();
    let listed: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(dir.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    assert_eq!(listed.len(), 7); // 3 files x 2 replications + manifest
}

#[test]
fn select_single_model_has_no_winner_flag() {
    let dir = tempdir("selone");
    std::fs::create_dir_all(dir.join("fit1")).unwrap();
    write(
        &dir.join("fit1/fit_stats.csv"),
        "model,dic,waic,p_dic,p_waic\ngaussian-constant,100,101,3,3\n",
    );
    write(
        &dir.join("fit1/manifest.json"),
        r#"{"command":"fit","version":"0","config_fingerprint":"x","data_fingerprint":"abc","seed":1,"created":"0","model":"gaussian-constant","outputs":["fit_stats.csv"]}"#,
    );
    let st = pwc()
        .args(["--out"])
        .arg(dir.join("sel"))
        .args(["select", "--fit"])
        .arg(dir.join("fit1"))
        .status()
        .unwrap();
    assert!(st.success());
    let table = std::fs::read_to_string(dir.join("sel/selection.csv")).unwrap();
    assert_eq!(table, "model,dic,waic,best\ngaussian-constant,100,101,\n");
}

#[test]
fn select_rejects_mismatched_datasets() {
    let dir = tempdir("selmix");
    for (name, fp) in [("fit1", "abc"), ("fit2", "def")] {
        std::fs::create_dir_all(dir.join(name)).unwrap();
        write(
            &dir.join(name).join("fit_stats.csv"),
            "model,dic,waic,p_dic,p_waic\ngaussian-constant,100,101,3,3\n",
        );
        write(
            &dir.join(name).join("manifest.json"),
            &format!(
                r#"{{"command":"fit","version":"0","config_fingerprint":"x","data_fingerprint":"{fp}","seed":1,"created":"0","model":null,"outputs":[]}}"#
            ),
        );
    }
    let out = pwc()
        .args(["--out"])
        .arg(dir.join("sel"))
        .args(["select", "--fit"])
        .arg(dir.join("fit1"))
        .args(["--fit"])
        .arg(dir.join("fit2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different dataset"));
}

#[test]
fn plot_on_empty_dir_exits_3() {
    let dir = tempdir("plotempty");
    std::fs::create_dir_all(dir.join("o")).unwrap();
    let out = pwc()
        .args(["--out"])
        .arg(dir.join("o"))
        .arg("plot")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("pwc-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

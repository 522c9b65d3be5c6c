use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_compound-ld"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const LDP: &str = r#"
[summand]
kind = "rademacher"

[counting]
kind = "poisson"
rate = 1.0

[experiment]
kind = "ldp-check"
ns = [50, 100, 200, 400]
reps = 10000

[experiment.event]
mode = "count-coordinate"
level = 2.0
"#;

#[test]
fn defaults_lists_documented_values() {
    let out = bin().arg("defaults").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "optimizer.max_iterations = 10000",
        "montecarlo.block_size = 1000",
        "ldp-check.band = 0.15",
    ] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ldp.toml", LDP);
    let out = bin()
        .args(["ldp-check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn ldp_check_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ldp.toml", LDP);
    let run = |out: &str, workers: &str| {
        let o = bin()
            .args(["ldp-check", "--seed", "17", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .env("COMPOUND_LD_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stdout)
        );
    };
    run("a", "1");
    run("b", "4");
    let csv = |d: &str| std::fs::read(dir.path().join(d).join("ldp-check.csv")).unwrap();
    assert_eq!(csv("a"), csv("b"));
    let summary: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("a/ldp-check.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["seed"], 17);
    let target = summary["bands"][0]["target"].as_f64().unwrap();
    assert!((target - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-9);
    assert_eq!(
        summary["bands"][0]["tolerance"].as_f64().unwrap(),
        0.15 * target
    );

    // Rerunning from the emitted config reproduces the table.
    let o = bin()
        .args(["ldp-check", "--config"])
        .arg(dir.path().join("a/ldp-check.config.toml"))
        .arg("--out")
        .arg(dir.path().join("a"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv("a"), csv("b"));
}

#[test]
fn failing_band_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = LDP.replace("reps = 10000", "reps = 10000\nseed = 3\nband = 1e-9");
    let cfg = write(dir.path(), "ldp.toml", &text);
    let o = bin()
        .args(["ldp-check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ldp.toml", LDP);
    let o = bin()
        .args(["md-check", "--seed", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ml_eval_and_md_check_pass() {
    let dir = tempfile::tempdir().unwrap();
    let ml = write(
        dir.path(),
        "ml.toml",
        "[summand]\nkind = \"rademacher\"\n[counting]\nkind = \"poisson\"\nrate = 1.0\n\
         [experiment]\nkind = \"ml-eval\"\nnu = 0.5\nbeta = 1.0\nxs = [0.0, 0.5, 2.0, 5.0, 10.0]\n",
    );
    let o = bin()
        .args(["ml-eval", "--config"])
        .arg(&ml)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let csv = std::fs::read_to_string(dir.path().join("ml-eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);

    let md = write(
        dir.path(),
        "md.toml",
        "[summand]\nkind = \"rademacher\"\n[counting]\nkind = \"poisson\"\nrate = 1.0\n\
         [experiment]\nkind = \"md-check\"\netas = [-1.0, 1.0]\nns = [100, 1000, 10000, 100000]\n\
         scaling = { kind = \"power\", gamma = 0.5 }\n",
    );
    let o = bin()
        .args(["md-check", "--config"])
        .arg(&md)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let plot = std::fs::read_to_string(dir.path().join("md-check.plot.dat")).unwrap();
    assert!(plot
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .all(|l| l.split(' ').count() == 2));
}

use std::path::Path;
use std::process::Command;

use discforest_cli::table::read_figure_data;
use discforest_cli::experiment::load_summary;
use discforest_cli::{ExperimentConfig, Summary};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_discforest"));
    c.env("DISCFOREST_THREADS", "1");
    c
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().arg("no-such-command")), 1);
    assert_eq!(code(bin().args(["init", "nope"])), 1);
    assert_eq!(code(bin().args(["model", "inspect", "--forest", "/nonexistent/forest.json"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\":\"discforest\"").unwrap();
    assert_eq!(code(bin().args(["model", "load", "--forest"]).arg(&bad)), 2);
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "task = \"gauss\"\n[gauss]\nn = 0\n").unwrap();
    assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg)), 1);
}

#[test]
fn init_prints_a_loadable_config() {
    for task in ["gauss", "pose", "label"] {
        let out = bin().args(["init", task]).output().unwrap();
        assert!(out.status.success());
        let c = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
        c.resolve().unwrap();
    }
}

fn small_gauss(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("g.toml");
    std::fs::write(
        &cfg,
        "task = \"gauss\"\nseed = 3\n[train]\nnum_trees = 3\nmax_levels = 8\n\
         [gauss]\nn = 4000\nablations = [\"m\"]\n[gauss.grids]\nm = [10, 20]\n",
    )
    .unwrap();
    cfg
}

#[test]
fn run_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_gauss(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg).arg("--output").arg(out)), 0);
    }
    for f in ["config.toml", "summary.json", "provenance.json", "fig4.csv", "baseline.forest.json", "disc.forest.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let (cols, rows) = read_figure_data(&a.join("fig4.csv")).unwrap();
    assert_eq!(cols, ["m", "baselineAcc", "discAcc"]);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [10.0, 20.0]);
    let summary = load_summary(&a).unwrap();
    assert!(matches!(summary, Summary::Gauss(_)));
    assert_eq!(summary, load_summary(&b).unwrap());
    for f in ["fig4.csv", "summary.json", "disc.forest.json", "retrain-log.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // Thread count does not change results.
    let c = dir.path().join("c");
    let mut cmd = bin();
    cmd.env("DISCFOREST_THREADS", "3");
    assert_eq!(code(cmd.args(["run", "--config"]).arg(&cfg).arg("--output").arg(&c)), 0);
    assert_eq!(std::fs::read(a.join("fig4.csv")).unwrap(), std::fs::read(c.join("fig4.csv")).unwrap());
}

#[test]
fn gauss_subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_gauss(dir.path());
    let d = dir.path();
    let ok = |args: &[&str]| {
        let out = bin().args(args).arg("--config").arg(&cfg).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let p = |f: &str| d.join(f).to_string_lossy().into_owned();
    ok(&["gauss", "gen", "--out", &p("data")]);
    for f in ["spec.json", "train.csv", "disc.csv", "eval.csv"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    ok(&["gauss", "train", "--out", &p("base.json")]);
    ok(&["gauss", "disc", "--forest", &p("base.json"), "--out", &p("disc.json")]);
    let eval = ok(&["gauss", "eval", "--forest", &p("disc.json")]);
    assert!(eval.contains("accuracy"), "{eval}");
    let inspect = bin().args(["model", "inspect", "--forest", &p("disc.json")]).output().unwrap();
    assert!(inspect.status.success());
    assert_eq!(
        code(bin().args(["model", "save", "--forest", &p("disc.json"), "--out", &p("again.json")])),
        0
    );
    assert_eq!(std::fs::read(d.join("disc.json")).unwrap(), std::fs::read(d.join("again.json")).unwrap());
}

#[test]
fn ik_demo_reports_exact_limbs() {
    let out = bin().args(["ik", "demo", "--poses", "200"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["maxLengthError"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["mainMoved"], 0);
}

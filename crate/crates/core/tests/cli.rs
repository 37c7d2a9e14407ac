use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_scribeshift");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn err_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(!out.status.success(), "{args:?} should fail");
    serde_json::from_slice(&out.stderr).expect("stderr is json")
}

fn tiny_corpus(dir: &Path) -> String {
    let synth = ok_json(&[
        "synth",
        "--preset",
        "paper-like",
        "--seed",
        "3",
        "--lines",
        "4",
        "--glyphs-per-line",
        "6",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(synth["switch_column"], 27);
    assert_eq!(synth["columns"], 54);
    dir.join("pipeline.toml").display().to_string()
}

#[test]
fn subcommands_share_one_workdir() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_corpus(tmp.path());
    let manifest = tmp.path().join("manifest.csv");

    let check = ok_json(&[
        "ingest",
        "--manifest",
        manifest.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(check["records"], 54);
    assert_eq!(check["layout"]["n_columns"], 54);

    let small = [
        "--config",
        &config,
        "--set",
        "fraglet.min_ink_pixels=1000",
        "--set",
        "fraglet.spread_k=2",
        "--set",
        "codebook.primary.rows=5",
        "--set",
        "codebook.primary.cols=5",
        "--set",
        "codebook.primary.epochs=1",
        "--set",
        "codebook.secondary.rows=4",
        "--set",
        "codebook.secondary.cols=4",
        "--set",
        "codebook.secondary.epochs=1",
        "--set",
        "stats.mc_iters=2000",
        "--set",
        "visual.bootstrap_draws=10",
    ];
    let with = |head: &[&str]| -> Vec<String> {
        head.iter()
            .chain(small.iter())
            .map(|s| s.to_string())
            .collect()
    };
    let call = |head: &[&str]| {
        let args = with(head);
        ok_json(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let fail = |head: &[&str]| {
        let args = with(head);
        err_json(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };

    let missing = fail(&["features"]);
    assert_eq!(missing["error"], "missing-stage");

    for s in ["ingest", "preproc", "codebook", "features", "distances"] {
        let v = call(&[s]);
        assert_eq!(v["stage"], s);
        assert_eq!(v["digest"].as_str().unwrap().len(), 64);
    }
    let scatter = tmp.path().join("scatter.svg");
    call(&["pca", "--out", scatter.to_str().unwrap()]);
    assert!(std::fs::read_to_string(&scatter)
        .unwrap()
        .starts_with("<svg"));

    let logistic = call(&["stats", "logistic"]);
    assert_eq!(logistic["stats"]["fits"].as_array().unwrap().len(), 6);
    let curve = tmp.path().join("votes.svg");
    let votes = call(&["stats", "votes", "--out", curve.to_str().unwrap()]);
    assert!(votes["stats"]["min_p"].is_number());
    assert!(curve.is_file());
    assert_eq!(
        fail(&["stats", "anova", "--out", "x.svg"])["error"],
        "invalid-parameter"
    );

    let chart = tmp.path().join("chart.svg");
    let c = call(&[
        "chart",
        "--letter",
        "aleph",
        "--out",
        chart.to_str().unwrap(),
    ]);
    assert!(c["instances"].as_u64().unwrap() > 0);
    let heat = tmp.path().join("heat.svg");
    let h = call(&[
        "heatmap",
        "--letter",
        "aleph",
        "--group",
        "left",
        "--out",
        heat.to_str().unwrap(),
    ]);
    assert_eq!(h["group"], "first-half");
    assert!(tmp.path().join("heat.txt").is_file());

    let fm = call(&["fragletmap", "--topk", "7"]);
    assert_eq!(fm["summary"]["top_cells"].as_array().unwrap().len(), 7);

    let a = call(&["run", "--stages", "all"]);
    let b = call(&["run", "--stages", "stats"]);
    assert_eq!(a["digest"], b["digest"]);
}

#[test]
fn errors_are_machine_readable() {
    let e = err_json(&["run", "--config", "/nonexistent/pipeline.toml"]);
    assert_eq!(e["error"], "io");
    assert_eq!(e["path"], "/nonexistent/pipeline.toml");

    let e = err_json(&["synth", "--preset", "nope", "--out", "/tmp/unused"]);
    assert_eq!(e["error"], "invalid-parameter");

    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.csv");
    std::fs::write(
        &m,
        "scan_id,column_index,split_side,image_path\nx,notanumber,whole,a.png\n",
    )
    .unwrap();
    let e = err_json(&["ingest", "--manifest", m.to_str().unwrap(), "--check"]);
    assert_eq!(e["error"], "manifest-row");
}

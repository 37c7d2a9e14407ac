use std::path::Path;

use scribeshift::pipeline::*;
use scribeshift::synth::{preset, write_corpus};
use scribeshift::Error;

fn small_config(dir: &Path) -> PipelineConfig {
    let mut spec = preset("hard", 5).unwrap();
    spec.n_columns = 10;
    spec.switch_column = Some(5);
    spec.lines_per_column = 6;
    spec.glyphs_per_line = 8;
    let files = write_corpus(&spec, &dir.join("corpus")).unwrap();
    let text = format!(
        r#"
[paths]
manifest = "{}"
workdir = "{}"
templates = "{}"

[preproc]
deskew = true
max_deskew_deg = 2.0

[fraglet]
min_ink_pixels = 1000
spread_k = 2

[codebook.primary]
rows = 6
cols = 6
epochs = 2
seed = 11

[codebook.secondary]
rows = 5
cols = 5
epochs = 2
seed = 12

[stats]
vote_wmin = 2
vote_wmax = 4
nn_wmin = 2
nn_wmax = 4
n_left = 4
n_right = 4
k_hits = 2
mc_iters = 2000

[visual]
letters = ["shin"]
topk = 5
bootstrap_draws = 20
thumbnail_height = 40
"#,
        files.manifest.display(),
        dir.join("work").display(),
        files.templates.display()
    );
    PipelineConfig::from_toml_str(&text, dir).unwrap()
}

#[test]
fn full_run_is_reproducible_and_guards_its_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let work = &cfg.paths.workdir;

    let first = run_pipeline(&cfg, &Stage::ALL).unwrap();
    for stage in Stage::ALL {
        assert!(
            first.summary(stage).is_some(),
            "{stage} missing from report"
        );
    }
    let stats: StatsSummary =
        serde_json::from_value(first.summary(Stage::Stats).unwrap().clone()).unwrap();
    assert_eq!(stats.fits.len(), 6);
    assert!(stats.sibling_pairs == 10);
    for f in [
        "pca/scatter_pc12.svg",
        "stats/vote_curve.svg",
        "stats/positions.svg",
        "glyphs/instances.csv",
        "fragletmap/saliency.csv",
        "fragletmap/overlay.png",
        "report.json",
    ] {
        assert!(work.join(f).is_file(), "{f}");
    }
    let second = run_pipeline(&cfg, &Stage::ALL).unwrap();
    assert_eq!(first.digest, second.digest);
    assert_eq!(
        std::fs::read(&first.path).unwrap(),
        std::fs::read(&second.path).unwrap()
    );

    // a later stage alone reuses current intermediates
    let again = run_pipeline(&cfg, &[Stage::Stats]).unwrap();
    assert_eq!(again.digest, first.digest);

    // touching an intermediate makes dependants refuse it
    let matrix = work.join("distances/secondary.txt");
    let mut text = std::fs::read_to_string(&matrix).unwrap();
    text.push('\n');
    std::fs::write(&matrix, text).unwrap();
    match run_pipeline(&cfg, &[Stage::Stats]) {
        Err(Error::StaleInput { stage, path }) => {
            assert_eq!(stage, "distances");
            assert_eq!(path, matrix);
        }
        other => panic!("expected stale input, got {other:?}"),
    }

    // changing a stage's configuration also invalidates it
    let mut changed = cfg.clone();
    changed.stats.k_hits = 3;
    assert!(matches!(
        run_pipeline(&changed, &[Stage::Glyphs]),
        Err(Error::StaleInput { ref stage, .. }) if stage == "stats"
    ));
}

#[test]
fn ingest_only_and_missing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let r = run_pipeline(&cfg, &[Stage::Ingest]).unwrap();
    let layout = &r.summary(Stage::Ingest).unwrap()["layout"];
    assert_eq!(layout["n_columns"], 10);
    assert_eq!(layout["gaps"].as_array().unwrap().len(), 0);
    match run_pipeline(&cfg, &[Stage::Features]) {
        Err(Error::MissingStage { stage, .. }) => assert_eq!(stage, "preproc"),
        other => panic!("expected missing stage, got {other:?}"),
    }
}

#[test]
fn bad_paths_fail_validation() {
    let mut cfg = PipelineConfig::default();
    cfg.paths.manifest = "/nonexistent/manifest.csv".into();
    assert!(matches!(
        run_pipeline(&cfg, &[Stage::Ingest]),
        Err(Error::Config(_))
    ));
}

//! Runs every stage on a small synthetic corpus from a TOML config and
//! prints the located switch column.
use scribeshift::pipeline::{run_pipeline, PipelineConfig, Stage, StatsSummary};
use scribeshift::stats::{FitMethod, Smoothing};
use scribeshift::synth::{preset, write_corpus};

const CONFIG: &str = r#"
[paths]
manifest = "corpus/manifest.csv"
workdir = "work"
templates = "corpus/templates"

[fraglet]
min_ink_pixels = 5000
spread_k = 3

[codebook.primary]
rows = 10
cols = 10
epochs = 4
seed = 1

[codebook.secondary]
rows = 12
cols = 12
epochs = 4
seed = 2

[stats]
vote_wmin = 3
vote_wmax = 8
nn_wmin = 3
nn_wmax = 8
n_left = 8
n_right = 8
mc_iters = 20000

[visual]
bootstrap_draws = 100
"#;

fn main() -> scribeshift::Result<()> {
    let dir = std::env::temp_dir().join("scribeshift-pipeline");
    let mut spec = preset("hard", 8)?;
    spec.n_columns = 20;
    spec.switch_column = Some(10);
    spec.lines_per_column = 12;
    write_corpus(&spec, &dir.join("corpus"))?;

    let cfg = PipelineConfig::from_toml_str(CONFIG, &dir)?;
    let run = run_pipeline(&cfg, &Stage::ALL)?;
    let stats: StatsSummary =
        serde_json::from_value(run.summary(Stage::Stats).unwrap().clone()).unwrap();
    println!("sibling top-1 {:.2}", stats.sibling_top1_rate);
    println!(
        "vote minimum at column {} (p {:.2e})",
        stats.vote_min_column, stats.vote_min_p
    );
    for m in [FitMethod::MonteCarlo, FitMethod::LeastSquares] {
        let f = stats.fit(m, Smoothing::None).unwrap();
        println!("{m:?}: x_offset {:.2}, r {:.3}", f.params.x_offset, f.r);
    }
    println!("true switch after column {}", spec.switch_column.unwrap());
    println!("report {} digest {}", run.path.display(), run.digest);

    // a second run of only the stats stage reproduces the report
    let again = run_pipeline(&cfg, &[Stage::Stats])?;
    assert_eq!(again.digest, run.digest);
    Ok(())
}

//! Writes a small two-writer corpus and prints where the style changes.
use scribeshift::synth::{preset, style_distance, write_corpus};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("paper-like", 7)?;
    spec.n_columns = 12;
    spec.switch_column = Some(6);
    spec.lines_per_column = 8;

    let dir = std::env::temp_dir().join("scribeshift-synth");
    let files = write_corpus(&spec, &dir)?;
    println!("manifest     {}", files.manifest.display());
    println!("ground truth {}", files.ground_truth.display());
    println!("templates    {}", files.templates.display());
    println!(
        "{} columns, switch after column {:?}",
        files.images.len(),
        spec.switch_column
    );
    println!(
        "style gap {:.3}",
        style_distance(&spec.style_left, &spec.style_right)
    );
    for w in &files.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

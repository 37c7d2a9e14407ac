//! Hinge histograms separate slanted from upright handwriting.
use scribeshift::hinge::{hinge_feature, HingeConfig};
use scribeshift::space::chi_square_distance;
use scribeshift::synth::{preset, render_column};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("hard", 2)?;
    spec.lines_per_column = 6;
    let cfg = HingeConfig::default();
    println!("dim {}", cfg.dim());

    let feats: Vec<_> = [1, 2, 40, 41]
        .iter()
        .map(|&c| hinge_feature(&render_column(&spec, c).ink, &cfg))
        .collect::<Result<_, _>>()?;
    let names = ["left 1", "left 2", "right 40", "right 41"];
    for i in 0..feats.len() {
        let row: Vec<String> = (0..feats.len())
            .map(|j| format!("{:.4}", chi_square_distance(&feats[i], &feats[j]).unwrap()))
            .collect();
        println!("{:<9} {}", names[i], row.join("  "));
    }
    Ok(())
}

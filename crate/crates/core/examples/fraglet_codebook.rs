//! Fraglets from a few columns, a small Kohonen map, and the resulting
//! bag-of-patterns histograms.
use scribeshift::codebook::{train_sofm, SofmParams};
use scribeshift::fraglet::{extract_fraglets, fraglet_histogram, FragmentParams, FRAGLET_DIM};
use scribeshift::synth::{preset, render_column};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("paper-like", 3)?;
    spec.lines_per_column = 6;
    let params = FragmentParams::default();

    let train: Vec<_> = [2, 30]
        .iter()
        .flat_map(|&c| extract_fraglets(&render_column(&spec, c).ink, &params))
        .collect();
    println!(
        "{} training fraglets of {} values",
        train.len(),
        FRAGLET_DIM
    );

    let vecs: Vec<&[f64]> = train.iter().map(|f| f.values()).collect();
    let cb = train_sofm(&vecs, &SofmParams::new(8, 8, 5).with_epochs(10))?;
    println!("codebook {}x{}", cb.rows(), cb.cols());

    for c in [5, 45] {
        let h = fraglet_histogram(&render_column(&spec, c).ink, &cb, 3, &params)?;
        let mut top: Vec<(usize, f64)> = h.values().iter().copied().enumerate().collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1));
        let cells: Vec<String> = top[..5]
            .iter()
            .map(|(i, v)| format!("{i}:{v:.3}"))
            .collect();
        println!("column {c:>2} busiest cells {}", cells.join(" "));
    }
    Ok(())
}

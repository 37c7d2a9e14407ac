//! Split every column in two, compare halves by chi-square distance, check
//! that each half finds its sibling, and embed the lot with PCA.
use std::collections::BTreeSet;

use scribeshift::corpus::{SampleLabel, SplitSide};
use scribeshift::hinge::{hinge_feature, HingeConfig};
use scribeshift::preproc::{split_column, SplitAxis};
use scribeshift::space::{distance_matrix, nearest_neighbours, pca_embed, sibling_check};
use scribeshift::synth::{preset, render_column};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("hard", 4)?;
    spec.n_columns = 12;
    spec.switch_column = Some(6);
    spec.lines_per_column = 10;
    let cfg = HingeConfig::default();

    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for c in 1..=spec.n_columns {
        let halves = split_column(&render_column(&spec, c).ink, SplitAxis::HorizontalCut)?;
        for (side, img) in [
            (SplitSide::A, &halves.half_a),
            (SplitSide::B, &halves.half_b),
        ] {
            feats.push(hinge_feature(img, &cfg)?);
            labels.push(SampleLabel::new(c, side));
        }
    }
    let m = distance_matrix(&feats, &labels)?;
    let sib = sibling_check(&m);
    println!(
        "sibling top-1 rate {:.2} over {} columns",
        sib.top1_rate,
        sib.entries.len()
    );

    let query = SampleLabel::new(3, SplitSide::A);
    let skip: BTreeSet<_> = [SampleLabel::new(3, SplitSide::B)].into();
    let hits = nearest_neighbours(&m, query, 5, &skip)?;
    let cols: Vec<u32> = hits.hits.iter().map(|h| h.label.column_index).collect();
    println!("nearest to {query}: columns {cols:?}");

    let e = pca_embed(&feats, &labels)?;
    println!(
        "explained variance {:?}",
        e.explained_variance.map(|v| (v * 1e4).round() / 1e4)
    );
    for (l, p) in e.labels.iter().zip(&e.coords).step_by(4) {
        println!("{l:<6} {:+.4} {:+.4}", p[0], p[1]);
    }
    Ok(())
}

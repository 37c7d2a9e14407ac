//! Ranks codebook cells by how well they separate two writers, then guesses
//! the writer of held-out columns from those cells alone.
use scribeshift::codebook::{train_sofm, SofmParams};
use scribeshift::fraglet::{extract_fraglets, fraglet_histogram, FragmentParams};
use scribeshift::synth::{preset, render_column};
use scribeshift::visual::{
    predict_group, rank_discriminative_fraglets, render_overlay, DEFAULT_TAU,
};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("hard", 6)?;
    spec.n_columns = 14;
    spec.switch_column = Some(7);
    spec.lines_per_column = 8;
    let params = FragmentParams::default();
    let inks: Vec<_> = (1..=spec.n_columns)
        .map(|c| render_column(&spec, c).ink)
        .collect();

    let pool: Vec<_> = [&inks[0], &inks[13]]
        .iter()
        .flat_map(|i| extract_fraglets(i, &params))
        .collect();
    let vecs: Vec<&[f64]> = pool.iter().map(|f| f.values()).collect();
    let cb = train_sofm(&vecs, &SofmParams::new(10, 10, 2).with_epochs(8))?;
    let hists = inks
        .iter()
        .map(|i| fraglet_histogram(i, &cb, 3, &params))
        .collect::<Result<Vec<_>, _>>()?;

    // train on all but the first and last column of each side
    let train: Vec<usize> = (1..6).chain(8..13).collect();
    let left: Vec<bool> = train.iter().map(|&i| i < 7).collect();
    let picked: Vec<_> = train.iter().map(|&i| hists[i].clone()).collect();
    let s = rank_discriminative_fraglets(&picked, &left, cb.rows(), cb.cols(), DEFAULT_TAU)?;
    println!("top cells {:?}", s.top_cells(8));

    for i in [0, 6, 7, 13] {
        let p = predict_group(&hists[i], &s, 20)?;
        let o = render_overlay(&inks[i], &cb, &s, 20, &params)?;
        let green = o.green_share().map_or("n/a".into(), |g| format!("{g:.2}"));
        println!(
            "column {:>2}: {} (margin {:+.4}), green share {green}",
            i + 1,
            p.label,
            p.margin
        );
    }
    Ok(())
}

//! Otsu and Sauvola on an unevenly lit synthetic page, then deskew and split.
use scribeshift::image::GrayImage;
use scribeshift::preproc::{
    binarize_otsu, binarize_sauvola, clean_margins, deskew, otsu_threshold, rotate, split_column,
    SplitAxis,
};
use scribeshift::synth::{preset, render_column};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("paper-like", 1)?;
    spec.lines_per_column = 6;
    let col = render_column(&spec, 3);
    let tilted = rotate(&col.ink, 2.0);

    // paper darkens towards the right edge
    let w = tilted.width() as f64;
    let page = GrayImage::from_fn(tilted.width(), tilted.height(), |x, y| {
        let paper = 235.0 - 90.0 * x as f64 / w;
        if tilted.get(x, y) {
            40
        } else {
            paper as u8
        }
    })?;

    println!("otsu threshold {}", otsu_threshold(&page)?);
    let otsu = binarize_otsu(&page)?;
    let sauvola = binarize_sauvola(&page, 31, 0.2)?;
    println!(
        "ink pixels: truth {} otsu {} sauvola {}",
        tilted.ink_count(),
        otsu.ink_count(),
        sauvola.ink_count()
    );

    let cleaned = clean_margins(&sauvola, 0.0, 0.0)?;
    let (straight, angle) = deskew(&cleaned, 5.0)?;
    println!("deskew angle {angle:.1} deg");

    let halves = split_column(&straight, SplitAxis::HorizontalCut)?;
    println!(
        "halves {}x{} and {}x{}",
        halves.half_a.width(),
        halves.half_a.height(),
        halves.half_b.width(),
        halves.half_b.height()
    );
    Ok(())
}

//! Recognizes one letter across a two-writer corpus and compares the mean
//! shape on either side of the switch.
use scribeshift::synth::{preset, render_column};
use scribeshift::visual::{
    bootstrap_flip_probability, heatmap, recognize_glyphs, render_chart, templates_for_style,
    HeatmapGroup, Provenance, DEFAULT_THETA, MID_BAND,
};

fn main() -> scribeshift::Result<()> {
    let mut spec = preset("paper-like", 5)?;
    spec.n_columns = 10;
    spec.switch_column = Some(5);
    spec.lines_per_column = 40;
    let templates =
        templates_for_style(&spec.style_left, spec.glyph_width_px, spec.glyph_height_px)?;

    let mut found = Vec::new();
    for c in 1..=spec.n_columns {
        let col = render_column(&spec, c);
        let source = Provenance {
            scan_id: format!("col-{c}"),
            column_index: c,
        };
        found.extend(
            recognize_glyphs(&col.ink, &templates, DEFAULT_THETA, &source)?
                .into_iter()
                .filter(|g| g.letter == "aleph"),
        );
    }
    println!("{} aleph instances", found.len());

    let dir = std::env::temp_dir().join("scribeshift-heatmap");
    std::fs::create_dir_all(&dir).map_err(|e| scribeshift::Error::io(&dir, e))?;
    let chart = dir.join("chart.svg");
    std::fs::write(&chart, render_chart("aleph", &found)?)
        .map_err(|e| scribeshift::Error::io(&chart, e))?;

    let split = spec.switch_column.unwrap();
    for group in [HeatmapGroup::FirstHalf, HeatmapGroup::SecondHalf] {
        let sel: Vec<_> = found
            .iter()
            .filter(|g| group.contains(g.source.column_index, split))
            .cloned()
            .collect();
        let h = heatmap(&sel, 48, group)?;
        h.save(&dir.join(format!("{}.txt", group.as_str())))?;
        let flip = bootstrap_flip_probability(&sel, 48, MID_BAND, 200, 9)?;
        println!(
            "{:<11} n {:>4}  band pixels {:>3}  flip probability {:.4}",
            group.as_str(),
            h.n_instances,
            flip.band_pixels,
            flip.flip_probability
        );
    }
    println!("written to {}", dir.display());
    Ok(())
}

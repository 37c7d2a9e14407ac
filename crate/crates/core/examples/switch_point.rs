//! Fits the four-parameter logistic to a noisy step series, then runs the
//! summary-statistic tests on the two sides.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use scribeshift::stats::{
    fit_logistic_ls, fit_logistic_mc, logistic_eval, one_way_anova_summary, smooth, t_test_summary,
    GroupSummary, LogisticParams, Series,
};

fn main() -> scribeshift::Result<()> {
    let truth = LogisticParams {
        x_offset: 27.0,
        y_offset: 14.0,
        a: 26.0,
        b: 1.5,
    };
    let noise = Normal::new(0.0, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let columns: Vec<u32> = (1..=54).collect();
    let values = columns
        .iter()
        .map(|&c| logistic_eval(&truth, c as f64) + noise.sample(&mut rng))
        .collect();
    let raw = Series::new(columns, values)?;

    for (name, s) in [
        ("raw", raw.clone()),
        ("smooth 3", smooth(&raw, 3)?),
        ("smooth 5", smooth(&raw, 5)?),
    ] {
        let mc = fit_logistic_mc(&s, 100_000, 1)?;
        let ls = fit_logistic_ls(&s)?;
        println!(
            "{name:<9} mc x0 {:.2} r {:.3} | ls x0 {:.2} r {:.3}",
            mc.params.x_offset, mc.r, ls.params.x_offset, ls.r
        );
    }

    let left = GroupSummary::from_values(&raw.values[..27])?;
    let right = GroupSummary::from_values(&raw.values[27..])?;
    let anova = one_way_anova_summary(left.clone(), right.clone())?;
    println!(
        "anova F({}, {}) = {:.1}, p = {:.2e}",
        anova.df[0], anova.df[1], anova.statistic, anova.p
    );

    let t = t_test_summary(
        GroupSummary::new(18, 0.238, 0.003),
        GroupSummary::new(17, 0.231, 0.008),
    )?;
    println!("t({}) = {:.3}, p = {:.4}", t.df[0], t.statistic, t.p);
    Ok(())
}

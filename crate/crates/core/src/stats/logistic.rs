//! Four-parameter logistic transition `f(x) = y_offset + A / (1 + exp(−b (x − x_offset)))`
//! with `b > 0`. The same curve written with `exp(+b' (x − x_offset))` in the
//! denominator has `b' = −b`.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::series::{pearson, Series};
use crate::error::{Error, Result};

pub const B_MAX_MC: f64 = 10.0;
const B_MIN_LS: f64 = 1e-3;
const B_MAX_LS: f64 = 50.0;
const LS_MAX_ITERS: usize = 200;
pub const NO_TRANSITION: &str = "no transition";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub x_offset: f64,
    pub y_offset: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub b: f64,
}

impl LogisticParams {
    /// Steepness in the decreasing-exponent convention.
    pub fn printed_b(&self) -> f64 {
        -self.b
    }
}

pub fn logistic_eval(p: &LogisticParams, x: f64) -> f64 {
    p.y_offset + p.a / (1.0 + (-p.b * (x - p.x_offset)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    MonteCarlo,
    LeastSquares,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    #[serde(rename = "3")]
    Window3,
    #[serde(rename = "5")]
    Window5,
}

impl Smoothing {
    pub fn window(self) -> Option<usize> {
        match self {
            Smoothing::None => None,
            Smoothing::Window3 => Some(3),
            Smoothing::Window5 => Some(5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: LogisticParams,
    pub r: f64,
    pub method: FitMethod,
    pub smoothing: Smoothing,
    pub sse: f64,
    pub iterations: usize,
    pub seed: Option<u64>,
    pub flags: Vec<String>,
}

fn check_series(s: &Series) -> Result<()> {
    if s.len() < 8 {
        return Err(Error::TooFewSamples {
            needed: 8,
            got: s.len(),
        });
    }
    if s.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "series has non-finite values".into(),
        ));
    }
    Ok(())
}

fn is_constant(s: &Series) -> bool {
    s.max() - s.min() <= 1e-12 * s.max().abs().max(1.0)
}

fn sse(p: &LogisticParams, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (y - logistic_eval(p, x)).powi(2))
        .sum()
}

fn model_r(p: &LogisticParams, xs: &[f64], ys: &[f64]) -> f64 {
    let f: Vec<f64> = xs.iter().map(|&x| logistic_eval(p, x)).collect();
    pearson(&f, ys).unwrap_or(0.0)
}

fn flat_report(s: &Series, method: FitMethod, seed: Option<u64>) -> FitReport {
    let mean = s.values.iter().sum::<f64>() / s.len() as f64;
    let xs = s.xs();
    FitReport {
        params: LogisticParams {
            x_offset: (xs[0] + xs[xs.len() - 1]) / 2.0,
            y_offset: mean,
            a: 0.0,
            b: 1.0,
        },
        r: 0.0,
        method,
        smoothing: Smoothing::None,
        sse: 0.0,
        iterations: 0,
        seed,
        flags: vec![NO_TRANSITION.to_string()],
    }
}

/// Seeded random search over `(x_offset, b)` maximizing Pearson r. Because r
/// does not depend on `y_offset` or `A > 0`, those two follow by linear
/// regression of the series on the sampled shape, clamped to
/// `y_offset ∈ [min, max]` and `A ∈ [0, 2·range]`.
pub fn fit_logistic_mc(series: &Series, iters: usize, seed: u64) -> Result<FitReport> {
    check_series(series)?;
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    if is_constant(series) {
        return Ok(flat_report(series, FitMethod::MonteCarlo, Some(seed)));
    }
    let xs = series.xs();
    let ys = &series.values;
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, f64, f64)> = None;
    let mut shape = vec![0.0; xs.len()];
    for _ in 0..iters {
        let x0 = rng.random_range(lo..=hi);
        let b = B_MAX_MC * (1.0 - rng.random::<f64>());
        for (s, &x) in shape.iter_mut().zip(&xs) {
            *s = 1.0 / (1.0 + (-b * (x - x0)).exp());
        }
        let Ok(r) = pearson(&shape, ys) else { continue };
        if best.is_none_or(|(br, _, _)| r > br) {
            best = Some((r, x0, b));
        }
    }
    let Some((_, x0, b)) = best else {
        return Ok(flat_report(series, FitMethod::MonteCarlo, Some(seed)));
    };
    let n = xs.len() as f64;
    for (s, &x) in shape.iter_mut().zip(&xs) {
        *s = 1.0 / (1.0 + (-b * (x - x0)).exp());
    }
    let ms = shape.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = shape.iter().zip(ys).map(|(s, y)| (s - ms) * (y - my)).sum();
    let var: f64 = shape.iter().map(|s| (s - ms).powi(2)).sum();
    let range = series.max() - series.min();
    let a = (cov / var).clamp(0.0, 2.0 * range);
    let y0 = (my - a * ms).clamp(series.min(), series.max());
    let params = LogisticParams {
        x_offset: x0,
        y_offset: y0,
        a,
        b,
    };
    let mut flags = Vec::new();
    let r = if a == 0.0 {
        flags.push(NO_TRANSITION.to_string());
        0.0
    } else {
        model_r(&params, &xs, ys)
    };
    Ok(FitReport {
        params,
        r,
        method: FitMethod::MonteCarlo,
        smoothing: Smoothing::None,
        sse: sse(&params, &xs, ys),
        iterations: iters,
        seed: Some(seed),
        flags,
    })
}

fn quartile_guess(xs: &[f64], ys: &[f64], x0: f64, b: f64) -> LogisticParams {
    let q = (ys.len() / 4).max(1);
    let first = ys[..q].iter().sum::<f64>() / q as f64;
    let last = ys[ys.len() - q..].iter().sum::<f64>() / q as f64;
    let _ = xs;
    LogisticParams {
        x_offset: x0,
        y_offset: first,
        a: last - first,
        b,
    }
}

/// Damped Gauss–Newton from one start; returns the best iterate, its SSE,
/// iterations used and whether it converged.
fn levenberg_marquardt(
    xs: &[f64],
    ys: &[f64],
    start: LogisticParams,
) -> (LogisticParams, f64, usize, bool) {
    let mut p = start;
    let mut cost = sse(&p, xs, ys);
    let mut lambda = 1e-3;
    for it in 0..LS_MAX_ITERS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let s = 1.0 / (1.0 + (-p.b * (x - p.x_offset)).exp());
            let ds = s * (1.0 - s);
            let j = Vector4::new(-p.a * ds * p.b, 1.0, s, p.a * ds * (x - p.x_offset));
            let r = y - (p.y_offset + p.a * s);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for k in 0..4 {
                m[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = m.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let cand = LogisticParams {
                x_offset: p.x_offset + delta[0],
                y_offset: p.y_offset + delta[1],
                a: p.a + delta[2],
                b: (p.b + delta[3]).clamp(B_MIN_LS, B_MAX_LS),
            };
            let c = sse(&cand, xs, ys);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = cand;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || cost == 0.0 {
                    return (p, cost, it + 1, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: a stationary point
            return (p, cost, it + 1, true);
        }
    }
    (p, cost, LS_MAX_ITERS, false)
}

/// Least-squares fit. Runs from the quartile-based initial guess and from a
/// deterministic grid of `(x_offset, b)` restarts; keeps the lowest SSE.
pub fn fit_logistic_ls(series: &Series) -> Result<FitReport> {
    check_series(series)?;
    if is_constant(series) {
        return Ok(flat_report(series, FitMethod::LeastSquares, None));
    }
    let xs = series.xs();
    let ys = &series.values;
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let mut starts = vec![quartile_guess(&xs, ys, (lo + hi) / 2.0, 0.5)];
    let mut x0 = lo;
    while x0 <= hi {
        for b in [0.3, 1.0, 3.0] {
            starts.push(quartile_guess(&xs, ys, x0, b));
        }
        x0 += 2.0;
    }
    let mut best: Option<(LogisticParams, f64, usize, bool)> = None;
    let mut total_iters = 0;
    for s in starts {
        let fit = levenberg_marquardt(&xs, ys, s);
        total_iters += fit.2;
        if best.as_ref().is_none_or(|b| fit.1 < b.1) {
            best = Some(fit);
        }
    }
    let (params, cost, _, converged) = best.expect("at least one start");
    let mut flags = Vec::new();
    if !converged {
        flags.push("not converged".to_string());
    }
    let r = model_r(&params, &xs, ys);
    if params.a.abs() <= 1e-12 {
        flags.push(NO_TRANSITION.to_string());
    }
    Ok(FitReport {
        params,
        r,
        method: FitMethod::LeastSquares,
        smoothing: Smoothing::None,
        sse: cost,
        iterations: total_iters,
        seed: None,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    const TABLE: LogisticParams = LogisticParams {
        x_offset: 27.8,
        y_offset: 24.1,
        a: 7.98,
        b: 0.92,
    };

    fn sampled(noise_sd: f64, seed: u64) -> Series {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sd.max(1e-300)).unwrap();
        let cols: Vec<u32> = (1..=54).collect();
        let values = cols
            .iter()
            .map(|&c| {
                logistic_eval(&TABLE, c as f64)
                    + if noise_sd > 0.0 {
                        normal.sample(&mut rng)
                    } else {
                        0.0
                    }
            })
            .collect();
        Series::new(cols, values).unwrap()
    }

    #[test]
    fn eval_shape() {
        assert_eq!(logistic_eval(&TABLE, 27.8), 24.1 + 7.98 / 2.0);
        assert!((logistic_eval(&TABLE, -1e6) - 24.1).abs() < 1e-12);
        assert!((logistic_eval(&TABLE, 1e6) - 32.08).abs() < 1e-12);
        let step = LogisticParams { b: 1e6, ..TABLE };
        assert_eq!(logistic_eval(&step, 27.79), 24.1);
        assert_eq!(logistic_eval(&step, 27.81), 24.1 + 7.98);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let v = logistic_eval(&TABLE, k as f64 * 0.3);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn noiseless_inversion() {
        let s = sampled(0.0, 0);
        let mc = fit_logistic_mc(&s, 100_000, 1).unwrap();
        assert!((mc.params.x_offset - 27.8).abs() <= 0.5, "{mc:?}");
        assert!(mc.r > 0.99);
        let ls = fit_logistic_ls(&s).unwrap();
        for (got, want) in [
            (ls.params.x_offset, 27.8),
            (ls.params.y_offset, 24.1),
            (ls.params.a, 7.98),
            (ls.params.b, 0.92),
        ] {
            assert!((got - want).abs() <= 0.1, "{ls:?}");
        }
        assert!(ls.r > 0.999);
    }

    #[test]
    fn constant_series_has_no_transition() {
        let s = Series::new((1..=20).collect(), vec![3.0; 20]).unwrap();
        let mc = fit_logistic_mc(&s, 1000, 0).unwrap();
        assert!(mc.flags.contains(&NO_TRANSITION.to_string()));
        assert_eq!(mc.params.a, 0.0);
        let ls = fit_logistic_ls(&s).unwrap();
        assert!(ls.flags.contains(&NO_TRANSITION.to_string()));
        assert!(fit_logistic_mc(&Series::new(vec![1, 2], vec![0.0, 1.0]).unwrap(), 10, 0).is_err());
    }

    #[test]
    fn mc_is_deterministic_and_monotone_in_iterations() {
        let s = sampled(4.0, 3);
        assert_eq!(
            fit_logistic_mc(&s, 5000, 9).unwrap(),
            fit_logistic_mc(&s, 5000, 9).unwrap()
        );
        let mut prev = -1.0;
        for iters in [10, 100, 1000, 10_000] {
            let r = fit_logistic_mc(&s, iters, 9).unwrap().r;
            assert!(r >= prev - 1e-12);
            prev = r;
        }
    }

    #[test]
    fn noisy_fits_agree() {
        for seed in 0..5 {
            let s = sampled(4.0, seed);
            let mc = fit_logistic_mc(&s, 100_000, seed).unwrap();
            let ls = fit_logistic_ls(&s).unwrap();
            assert!(
                (mc.params.x_offset - ls.params.x_offset).abs() <= 1.5,
                "{mc:?} {ls:?}"
            );
            assert!((mc.r - ls.r).abs() <= 0.02);
            assert!((-1.0..=1.0).contains(&mc.r) && mc.params.b > 0.0);
        }
    }
}

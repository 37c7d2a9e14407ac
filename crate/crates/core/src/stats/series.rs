use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::summary::{t_test_summary, GroupSummary, StatReport};
use crate::error::{Error, Result};
use crate::space::DistanceMatrix;

/// Values indexed by true column number (gaps are simply absent).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<u32>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(columns: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if columns.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: values.len(),
            });
        }
        if columns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "series columns must be strictly increasing".into(),
            ));
        }
        Ok(Self { columns, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.columns.iter().map(|&c| c as f64).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `column,value` rows under a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,value\n");
        for (c, v) in self.columns.iter().zip(&self.values) {
            out.push_str(&format!("{c},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        let mut values = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && *l != "column,value")
        {
            let (c, v) = line
                .split_once(',')
                .ok_or_else(|| Error::parse("series", format!("bad row `{line}`")))?;
            columns.push(
                c.trim()
                    .parse()
                    .map_err(|_| Error::parse("series", format!("bad column `{c}`")))?,
            );
            values.push(
                v.trim()
                    .parse()
                    .map_err(|_| Error::parse("series", format!("bad value `{v}`")))?,
            );
        }
        Self::new(columns, values)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Column index of every sample plus the ordered list of present columns.
fn column_groups(m: &DistanceMatrix) -> BTreeMap<u32, Vec<usize>> {
    let mut g: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, l) in m.labels().iter().enumerate() {
        g.entry(l.column_index).or_default().push(i);
    }
    g
}

/// Column-to-column distance: mean over all cross-sample pairs.
pub fn column_distances(m: &DistanceMatrix) -> (Vec<u32>, Vec<Vec<f64>>) {
    let groups = column_groups(m);
    let cols: Vec<u32> = groups.keys().copied().collect();
    let members: Vec<&Vec<usize>> = groups.values().collect();
    let k = cols.len();
    let mut c = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..a {
            let mut s = 0.0;
            for &i in members[a] {
                for &j in members[b] {
                    s += m.get(i, j);
                }
            }
            let v = s / (members[a].len() * members[b].len()) as f64;
            c[a][b] = v;
            c[b][a] = v;
        }
    }
    (cols, c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteCurve {
    pub curve: Series,
    pub wmin: usize,
    pub wmax: usize,
    /// Columns with an empty side, recorded with p = 1.
    pub edge_columns: Vec<u32>,
    /// Set when the series is too short for `wmax` and windows were clipped.
    pub clipped: bool,
}

impl VoteCurve {
    /// Column and p of the lowest point; ties go to the earlier column.
    pub fn global_min(&self) -> (u32, f64) {
        let mut best = (self.curve.columns[0], self.curve.values[0]);
        for (&c, &p) in self.curve.columns.iter().zip(&self.curve.values) {
            if p < best.1 {
                best = (c, p);
            }
        }
        best
    }
}

/// Left/right vote chi-square curve. For every column, its `w` nearest other
/// columns vote left or right of it; the counts are tested against the split
/// expected from how many columns lie on each side. p is averaged over
/// `w = wmin..=wmax`.
pub fn lr_vote_curve(m: &DistanceMatrix, wmin: usize, wmax: usize) -> Result<VoteCurve> {
    if wmin == 0 || wmin > wmax {
        return Err(Error::InvalidParameter(format!(
            "bad window range {wmin}..{wmax}"
        )));
    }
    let (cols, c) = column_distances(m);
    let k = cols.len();
    if k < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: k });
    }
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    let clipped = wmax > k - 1;
    let mut values = Vec::with_capacity(k);
    let mut edge_columns = Vec::new();
    for a in 0..k {
        let (n_left, n_right) = (a as f64, (k - 1 - a) as f64);
        if a == 0 || a == k - 1 {
            values.push(1.0);
            edge_columns.push(cols[a]);
            continue;
        }
        let mut order: Vec<usize> = (0..k).filter(|&b| b != a).collect();
        order.sort_by(|&x, &y| c[a][x].total_cmp(&c[a][y]).then(x.cmp(&y)));
        let mut p_sum = 0.0;
        let mut n_w = 0;
        for w in wmin..=wmax {
            let w = w.min(k - 1);
            let left = order[..w].iter().filter(|&&b| b < a).count() as f64;
            let total = w as f64;
            let e_left = total * n_left / (n_left + n_right);
            let e_right = total - e_left;
            let stat =
                (left - e_left).powi(2) / e_left + (total - left - e_right).powi(2) / e_right;
            p_sum += chi.sf(stat);
            n_w += 1;
        }
        values.push((p_sum / n_w as f64).clamp(0.0, 1.0));
    }
    Ok(VoteCurve {
        curve: Series::new(cols, values)?,
        wmin,
        wmax,
        edge_columns,
        clipped,
    })
}

/// Per-column mean distance to the nearest samples of other columns,
/// averaged over window sizes.
pub fn nn_distance_series(m: &DistanceMatrix, wmin: usize, wmax: usize) -> Result<Series> {
    if wmin == 0 || wmin > wmax {
        return Err(Error::InvalidParameter(format!(
            "bad window range {wmin}..{wmax}"
        )));
    }
    let groups = column_groups(m);
    if groups.len() <= 2 * wmin {
        return Err(Error::TooFewSamples {
            needed: 2 * wmin + 1,
            got: groups.len(),
        });
    }
    let labels = m.labels();
    let mut values = Vec::with_capacity(groups.len());
    for (&col, members) in &groups {
        let mut per_sample = 0.0;
        for &i in members {
            let d: Vec<f64> = m
                .ranked(i)
                .into_iter()
                .filter(|&j| labels[j].column_index != col)
                .map(|j| m.get(i, j))
                .collect();
            let mut acc = 0.0;
            for w in wmin..=wmax {
                let w = w.min(d.len());
                acc += d[..w].iter().sum::<f64>() / w as f64;
            }
            per_sample += acc / (wmax - wmin + 1) as f64;
        }
        values.push(per_sample / members.len() as f64);
    }
    Series::new(groups.keys().copied().collect(), values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceGroups {
    pub per_column: Series,
    pub left: GroupSummary,
    pub right: GroupSummary,
    pub test: StatReport,
}

/// Splits the neighbour-distance series into its first `n_left` and last
/// `n_right` columns and compares them with a t-test.
pub fn nn_distance_groups(
    m: &DistanceMatrix,
    wmin: usize,
    wmax: usize,
    n_left: usize,
    n_right: usize,
) -> Result<DistanceGroups> {
    let s = nn_distance_series(m, wmin, wmax)?;
    if n_left + n_right > s.len() || n_left < 2 || n_right < 2 {
        return Err(Error::TooFewSamples {
            needed: (n_left + n_right).max(4),
            got: s.len(),
        });
    }
    let left = GroupSummary::from_values(&s.values[..n_left])?;
    let right = GroupSummary::from_values(&s.values[s.len() - n_right..])?;
    let test = t_test_summary(left, right)?;
    Ok(DistanceGroups {
        per_column: s,
        left,
        right,
        test,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NNSeries {
    pub series: Series,
    pub k_hits: usize,
    /// Samples per column that contributed (2 for split scans).
    pub splits_used: usize,
}

/// Mean column position of the `k_hits` nearest samples from other columns,
/// pooled over all samples of the column.
pub fn nn_position_series(m: &DistanceMatrix, k_hits: usize) -> Result<NNSeries> {
    if k_hits == 0 {
        return Err(Error::InvalidParameter("k_hits must be at least 1".into()));
    }
    let groups = column_groups(m);
    if groups.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: groups.len(),
        });
    }
    let labels = m.labels();
    let mut values = Vec::with_capacity(groups.len());
    let mut splits_used = 0;
    for (&col, members) in &groups {
        splits_used = splits_used.max(members.len());
        let mut sum = 0.0;
        let mut n = 0usize;
        for &i in members {
            for j in m
                .ranked(i)
                .into_iter()
                .filter(|&j| labels[j].column_index != col)
                .take(k_hits)
            {
                sum += labels[j].column_index as f64;
                n += 1;
            }
        }
        values.push(sum / n as f64);
    }
    Ok(NNSeries {
        series: Series::new(groups.keys().copied().collect(), values)?,
        k_hits,
        splits_used,
    })
}

/// Centered running mean; the window shrinks to the available samples at
/// the ends.
pub fn smooth(series: &Series, w: usize) -> Result<Series> {
    if w % 2 == 0 || w == 0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing window must be odd, got {w}"
        )));
    }
    let h = w / 2;
    let n = series.len();
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            series.values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    Series::new(series.columns.clone(), values)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: a.len(),
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SampleLabel, SplitSide};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn split_labels(n: u32) -> Vec<SampleLabel> {
        (1..=n)
            .flat_map(|c| {
                [
                    SampleLabel::new(c, SplitSide::A),
                    SampleLabel::new(c, SplitSide::B),
                ]
            })
            .collect()
    }

    /// Matrix from per-sample points on a line; distance = |p_i − p_j|.
    fn line_matrix(labels: Vec<SampleLabel>, pos: &[f64]) -> DistanceMatrix {
        let n = labels.len();
        let d = (0..n * n)
            .map(|k| (pos[k / n] - pos[k % n]).abs())
            .collect();
        DistanceMatrix::new(labels, d).unwrap()
    }

    fn random_matrix(labels: Vec<SampleLabel>, rng: &mut ChaCha8Rng) -> DistanceMatrix {
        let n = labels.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = rng.random_range(0.1..1.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceMatrix::new(labels, d).unwrap()
    }

    #[test]
    fn smoothing_by_hand() {
        let s = Series::new(vec![1, 2, 3, 4, 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(smooth(&s, 3).unwrap().values, vec![1.5, 2.0, 3.0, 4.0, 4.5]);
        let c = Series::new(vec![1, 2, 3], vec![7.0; 3]).unwrap();
        assert_eq!(smooth(&c, 5).unwrap(), c);
        assert!(smooth(&s, 4).is_err());
    }

    #[test]
    fn pearson_by_hand() {
        // sab = 5, saa = 2, sbb = 38/3, r = 5 / sqrt(76/3)
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - 5.0 / (76.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.9934).abs() < 1e-4);
        let a = [1.0, 5.0, 2.0, 8.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&a, &[1.0; 4]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn csv_round_trip() {
        let s = Series::new(vec![1, 3, 4], vec![0.5, 0.25, 1e-7]).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("column,value\n1,0.5\n"));
        assert_eq!(Series::from_csv(&text).unwrap(), s);
    }

    #[test]
    fn hard_switch_positions_and_votes() {
        let labels = split_labels(54);
        // two tight clusters far apart, switch after column 27
        let pos: Vec<f64> = labels
            .iter()
            .map(|l| {
                if l.column_index <= 27 {
                    l.column_index as f64 * 0.01
                } else {
                    100.0 + l.column_index as f64 * 0.01
                }
            })
            .collect();
        let m = line_matrix(labels, &pos);
        let nn = nn_position_series(&m, 8).unwrap();
        assert_eq!(nn.splits_used, 2);
        let v = &nn.series.values;
        assert!(v[..27].iter().all(|&x| x <= 27.0));
        assert!(v[27..].iter().all(|&x| x >= 28.0));
        assert!((v[13] - 14.0).abs() < 5.0);
        for x in v {
            assert!((1.0..=54.0).contains(x));
        }
        let vc = lr_vote_curve(&m, 9, 26).unwrap();
        let (col, p) = vc.global_min();
        assert!((25..=29).contains(&col), "min at {col}");
        assert!(p < 0.05);
        assert_eq!(vc.edge_columns, vec![1, 54]);
        assert!(vc.curve.values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn random_votes_have_no_systematic_dip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut means = Vec::new();
        let mut dips = 0;
        for _ in 0..100 {
            let m = random_matrix(split_labels(54), &mut rng);
            let vc = lr_vote_curve(&m, 9, 26).unwrap();
            means.push(vc.curve.values.iter().sum::<f64>() / 54.0);
            if vc.global_min().1 < 0.05 {
                dips += 1;
            }
        }
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        assert!(mean > 0.2, "mean p {mean}");
        assert!(dips <= 20, "{dips} of 100 random curves dipped");
    }

    #[test]
    fn distance_groups_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(split_labels(54), &mut rng);
        let g = nn_distance_groups(&m, 18, 26, 18, 17).unwrap();
        assert_eq!(g.left.n, 18);
        assert_eq!(g.right.n, 17);
        assert_eq!(g.test.df, vec![33.0]);
        let tiny = random_matrix(split_labels(2), &mut rng);
        assert!(nn_distance_groups(&tiny, 18, 26, 18, 17).is_err());
    }

    #[test]
    fn distance_groups_see_tighter_cluster() {
        let labels = split_labels(54);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pos: Vec<f64> = labels
            .iter()
            .map(|l| {
                if l.column_index <= 27 {
                    rng.random_range(0.0..10.0)
                } else {
                    50.0 + rng.random_range(0.0..3.0)
                }
            })
            .collect();
        pos.shuffle(&mut ChaCha8Rng::seed_from_u64(0)); // mixes clusters: no structure
        let null = nn_distance_groups(&line_matrix(labels.clone(), &pos), 18, 26, 18, 17).unwrap();
        let pos: Vec<f64> = labels
            .iter()
            .map(|l| {
                if l.column_index <= 27 {
                    rng.random_range(0.0..10.0)
                } else {
                    50.0 + rng.random_range(0.0..3.0)
                }
            })
            .collect();
        let g = nn_distance_groups(&line_matrix(labels, &pos), 18, 26, 18, 17).unwrap();
        assert!(g.left.mean > g.right.mean);
        assert!(g.test.p < 0.01);
        assert!(null.test.p > g.test.p);
    }

    proptest! {
        #[test]
        fn smoothing_stays_in_range(v in proptest::collection::vec(-100.0f64..100.0, 1..40), w in prop_oneof![Just(3usize), Just(5)]) {
            let s = Series::new((1..=v.len() as u32).collect(), v).unwrap();
            let sm = smooth(&s, w).unwrap();
            for x in &sm.values {
                prop_assert!(*x >= s.min() - 1e-9 && *x <= s.max() + 1e-9);
            }
        }
    }
}

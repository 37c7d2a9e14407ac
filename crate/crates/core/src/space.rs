//! Chi-square feature space: pairwise distances, ranked neighbours, the
//! split-scan sibling probe and a 3-D PCA embedding.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{SampleLabel, SplitSide};
use crate::error::{Error, Result};
use crate::feature::FeatureVector;

/// `½ Σ (x − y)² / (x + y)`; bins where both are zero add nothing.
pub fn chi_square(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let s = a + b;
            if s == 0.0 {
                0.0
            } else {
                (a - b) * (a - b) / s
            }
        })
        .sum::<f64>()
}

pub fn chi_square_distance(x: &FeatureVector, y: &FeatureVector) -> Result<f64> {
    if x.kind() != y.kind() {
        return Err(Error::KindMismatch {
            expected: x.kind().to_string(),
            actual: y.kind().to_string(),
        });
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    Ok(chi_square(x.values(), y.values()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    labels: Vec<SampleLabel>,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Checks shape, symmetry, zero diagonal and non-negativity.
    pub fn new(labels: Vec<SampleLabel>, d: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if d.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: d.len(),
            });
        }
        let unique: BTreeSet<_> = labels.iter().collect();
        if unique.len() != n {
            return Err(Error::InvalidParameter(
                "distance matrix labels must be unique".into(),
            ));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "non-zero diagonal at {}",
                    labels[i]
                )));
            }
            for j in 0..i {
                let v = d[i * n + j];
                if !(v >= 0.0) || v != d[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({}, {}) is negative or asymmetric",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(Self { labels, d })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[SampleLabel] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n() + j]
    }

    pub fn index_of(&self, label: SampleLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn max_entry(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// All other samples, nearest first, ties by label order.
    pub fn ranked(&self, i: usize) -> Vec<usize> {
        let mut others: Vec<usize> = (0..self.n()).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            self.get(i, a)
                .total_cmp(&self.get(i, b))
                .then(self.labels[a].cmp(&self.labels[b]))
        });
        others
    }

    /// Header of labels, then rows `0..=i` of the lower triangle.
    pub fn to_text(&self) -> String {
        let mut out = self
            .labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = (0..=i).map(|j| format!("{:e}", self.get(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let labels = lines
            .next()
            .ok_or_else(|| Error::parse("distance matrix", "missing header"))?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<SampleLabel>>>()?;
        let n = labels.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("distance matrix", format!("missing row {}", i + 1)))?;
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::parse("distance matrix", e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != i + 1 {
                return Err(Error::DimensionMismatch {
                    expected: i + 1,
                    actual: row.len(),
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self::new(labels, d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub fn distance_matrix(
    features: &[FeatureVector],
    labels: &[SampleLabel],
) -> Result<DistanceMatrix> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    for f in &features[1..] {
        chi_square_distance(&features[0], f)?;
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| chi_square(features[i].values(), features[j].values()))
                .collect()
        })
        .collect();
    let mut d = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    DistanceMatrix::new(labels.to_vec(), d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub label: SampleLabel,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitList {
    pub query: SampleLabel,
    pub hits: Vec<Hit>,
    /// Fewer than `k` candidates were available.
    pub truncated: bool,
}

pub fn nearest_neighbours(
    m: &DistanceMatrix,
    query: SampleLabel,
    k: usize,
    exclude: &BTreeSet<SampleLabel>,
) -> Result<HitList> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let qi = m
        .index_of(query)
        .ok_or_else(|| Error::InvalidParameter(format!("query {query} is not in the matrix")))?;
    let hits: Vec<Hit> = m
        .ranked(qi)
        .into_iter()
        .filter(|&j| !exclude.contains(&m.labels[j]))
        .take(k)
        .map(|j| Hit {
            label: m.labels[j],
            distance: m.get(qi, j),
        })
        .collect();
    Ok(HitList {
        query,
        truncated: hits.len() < k,
        hits,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiblingEntry {
    pub column_index: u32,
    /// 1-based rank of the b half in the a half's hit list.
    pub rank: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SiblingReport {
    pub entries: Vec<SiblingEntry>,
    pub top1_rate: f64,
    /// Split samples whose other half is missing.
    pub no_sibling: Vec<SampleLabel>,
}

pub fn sibling_check(m: &DistanceMatrix) -> SiblingReport {
    let mut report = SiblingReport::default();
    for (i, &l) in m.labels.iter().enumerate() {
        let Some(other) = l.side.sibling() else {
            continue;
        };
        let sib = m.index_of(SampleLabel::new(l.column_index, other));
        match (l.side, sib) {
            (_, None) => report.no_sibling.push(l),
            (SplitSide::A, Some(j)) => {
                let rank = m
                    .ranked(i)
                    .iter()
                    .position(|&x| x == j)
                    .expect("sibling is ranked")
                    + 1;
                report.entries.push(SiblingEntry {
                    column_index: l.column_index,
                    rank,
                });
            }
            _ => {}
        }
    }
    if !report.entries.is_empty() {
        let top = report.entries.iter().filter(|e| e.rank == 1).count();
        report.top1_rate = top as f64 / report.entries.len() as f64;
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding3D {
    pub labels: Vec<SampleLabel>,
    pub coords: Vec<[f64; 3]>,
    /// Descending; components beyond the data rank are 0.
    pub explained_variance: [f64; 3],
    /// Components actually supported by the data.
    pub components: usize,
    pub rank_deficient: bool,
    pub mean: Vec<f64>,
    /// Unit loading vectors, one per supported component.
    pub loadings: Vec<Vec<f64>>,
}

impl Embedding3D {
    pub fn project(&self, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, l) in self.loadings.iter().enumerate() {
            out[c] = l
                .iter()
                .zip(v)
                .zip(&self.mean)
                .map(|((l, x), m)| l * (x - m))
                .sum();
        }
        out
    }

    pub fn reconstruct(&self, p: [f64; 3]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, l) in self.loadings.iter().enumerate() {
            for (o, li) in out.iter_mut().zip(l) {
                *o += p[c] * li;
            }
        }
        out
    }

    /// `column_index split x y z` rows.
    pub fn to_text(&self) -> String {
        self.labels
            .iter()
            .zip(&self.coords)
            .map(|(l, c)| {
                format!(
                    "{} {} {:e} {:e} {:e}\n",
                    l.column_index, l.side, c[0], c[1], c[2]
                )
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Reads embedding rows back as `(label, xyz)`.
pub fn parse_embedding(text: &str) -> Result<Vec<(SampleLabel, [f64; 3])>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(Error::parse(
                    "embedding",
                    format!("expected 5 fields in `{line}`"),
                ));
            }
            let col = t[0]
                .parse::<u32>()
                .map_err(|e| Error::parse("embedding", e.to_string()))?;
            let side = t[1].parse::<SplitSide>()?;
            let mut xyz = [0.0; 3];
            for k in 0..3 {
                xyz[k] = t[2 + k].parse().map_err(|e: std::num::ParseFloatError| {
                    Error::parse("embedding", e.to_string())
                })?;
            }
            Ok((SampleLabel::new(col, side), xyz))
        })
        .collect()
}

/// PCA of raw vectors via SVD of the centered data matrix.
pub fn pca_embed_raw(rows: &[&[f64]], labels: &[SampleLabel]) -> Result<Embedding3D> {
    let n = rows.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let s_max = order
        .first()
        .map(|&k| svd.singular_values[k])
        .unwrap_or(0.0);
    let tol = s_max * (n.max(d) as f64) * f64::EPSILON;

    let mut explained_variance = [0.0; 3];
    let mut loadings = Vec::new();
    for &k in order.iter().take(3) {
        let s = svd.singular_values[k];
        if s <= tol {
            break;
        }
        let mut l: Vec<f64> = v_t.row(k).iter().copied().collect();
        let big = (0..d).fold(0, |b, j| if l[j].abs() > l[b].abs() { j } else { b });
        if l[big] < 0.0 {
            l.iter_mut().for_each(|v| *v = -*v);
        }
        explained_variance[loadings.len()] = s * s / (n - 1) as f64;
        loadings.push(l);
    }
    let components = loadings.len();
    let mut emb = Embedding3D {
        labels: labels.to_vec(),
        coords: Vec::with_capacity(n),
        explained_variance,
        components,
        rank_deficient: components < 3,
        mean,
        loadings,
    };
    emb.coords = rows.iter().map(|r| emb.project(r)).collect();
    Ok(emb)
}

pub fn pca_embed(features: &[FeatureVector], labels: &[SampleLabel]) -> Result<Embedding3D> {
    if let Some(f) = features.iter().find(|f| f.kind() != features[0].kind()) {
        return Err(Error::KindMismatch {
            expected: features[0].kind().to_string(),
            actual: f.kind().to_string(),
        });
    }
    let rows: Vec<&[f64]> = features.iter().map(|f| f.values()).collect();
    pca_embed_raw(&rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::FeatureKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_counts(FeatureKind::Hinge, v).unwrap()
    }

    fn lab(c: u32, s: SplitSide) -> SampleLabel {
        SampleLabel::new(c, s)
    }

    /// Direct evaluation written as a plain loop over bins.
    fn eq1(x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            if x[i] + y[i] > 0.0 {
                acc += (x[i] - y[i]).powi(2) / (x[i] + y[i]);
            }
        }
        acc / 2.0
    }

    #[test]
    fn hand_values() {
        assert_eq!(chi_square(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        let d = chi_square(&[0.5, 0.5], &[0.25, 0.75]);
        assert!((d - 0.066_666_666_7).abs() < 1e-9);
        assert!(chi_square_distance(&fv(&[1.0, 2.0]), &fv(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn matrix_matches_pairwise_and_round_trips() {
        let f = vec![
            fv(&[1.0, 2.0, 3.0]),
            fv(&[3.0, 2.0, 1.0]),
            fv(&[0.0, 1.0, 0.0]),
        ];
        let labels = vec![
            lab(1, SplitSide::A),
            lab(1, SplitSide::B),
            lab(2, SplitSide::A),
        ];
        let m = distance_matrix(&f, &labels).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), chi_square_distance(&f[i], &f[j]).unwrap());
            }
        }
        let back = DistanceMatrix::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let same = distance_matrix(&[fv(&[1.0, 1.0]), fv(&[1.0, 1.0])], &labels[..2]).unwrap();
        assert_eq!(same.max_entry(), 0.0);
        assert!(distance_matrix(&f[..1], &labels[..1]).is_err());
    }

    fn matrix(labels: Vec<SampleLabel>, rows: &[&[f64]]) -> DistanceMatrix {
        let n = labels.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                d[i * n + j] = rows[i][j];
                d[j * n + i] = rows[i][j];
            }
        }
        DistanceMatrix::new(labels, d).unwrap()
    }

    #[test]
    fn neighbour_order_and_ties() {
        let q = lab(5, SplitSide::A);
        let a = lab(2, SplitSide::B);
        let b = lab(7, SplitSide::A);
        let m = matrix(vec![q, a, b], &[&[], &[0.1], &[0.2, 0.3]]);
        let hits = nearest_neighbours(&m, q, 2, &BTreeSet::new()).unwrap();
        assert_eq!(
            hits.hits.iter().map(|h| h.label).collect::<Vec<_>>(),
            vec![a, b]
        );
        let more = nearest_neighbours(&m, q, 5, &BTreeSet::new()).unwrap();
        assert!(more.truncated);
        assert_eq!(more.hits.len(), 2);

        let tie = matrix(
            vec![q, b, a, lab(2, SplitSide::A)],
            &[&[], &[0.2], &[0.2, 0.1], &[0.2, 0.1, 0.0]],
        );
        let hits = nearest_neighbours(&tie, q, 3, &BTreeSet::new()).unwrap();
        assert_eq!(
            hits.hits.iter().map(|h| h.label).collect::<Vec<_>>(),
            vec![lab(2, SplitSide::A), a, b]
        );
        let ex: BTreeSet<_> = [lab(2, SplitSide::A)].into();
        let hits = nearest_neighbours(&tie, q, 1, &ex).unwrap();
        assert_eq!(hits.hits[0].label, a);
    }

    #[test]
    fn siblings() {
        let f = vec![
            fv(&[1.0, 2.0]),
            fv(&[1.0, 2.0]),
            fv(&[5.0, 1.0]),
            fv(&[5.0, 1.0]),
            fv(&[1.0, 1.0]),
        ];
        let labels = vec![
            lab(1, SplitSide::A),
            lab(1, SplitSide::B),
            lab(2, SplitSide::A),
            lab(2, SplitSide::B),
            lab(3, SplitSide::A),
        ];
        let r = sibling_check(&distance_matrix(&f, &labels).unwrap());
        assert_eq!(r.entries.len(), 2);
        assert!(r.entries.iter().all(|e| e.rank == 1));
        assert_eq!(r.top1_rate, 1.0);
        assert_eq!(r.no_sibling, vec![lab(3, SplitSide::A)]);
    }

    fn labels_n(n: usize) -> Vec<SampleLabel> {
        (1..=n as u32).map(|c| lab(c, SplitSide::Whole)).collect()
    }

    #[test]
    fn pca_plane_and_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let plane: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                (0..10).map(|j| 1.0 + a * u[j] + b * v[j]).collect()
            })
            .collect();
        let rows: Vec<&[f64]> = plane.iter().map(|r| r.as_slice()).collect();
        let e = pca_embed_raw(&rows, &labels_n(30)).unwrap();
        assert!(e.explained_variance[2].abs() < 1e-9);
        assert!(e.rank_deficient);
        assert!(e.explained_variance[0] >= e.explained_variance[1]);

        let cube: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b, c) = (
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                );
                (0..10)
                    .map(|j| a * u[j] + b * v[j] + c * w[j] - 0.5)
                    .collect()
            })
            .collect();
        let rows: Vec<&[f64]> = cube.iter().map(|r| r.as_slice()).collect();
        let e = pca_embed_raw(&rows, &labels_n(30)).unwrap();
        assert_eq!(e.components, 3);
        for (r, c) in cube.iter().zip(&e.coords) {
            let back = e.reconstruct(*c);
            for (x, y) in r.iter().zip(&back) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        for l in &e.loadings {
            let big = l
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn pca_isotropic_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..3).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let rows: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let e = pca_embed_raw(&rows, &labels_n(1000)).unwrap();
        assert!(e.explained_variance[0] / e.explained_variance[2] < 1.5);
    }

    #[test]
    fn pca_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                (0..6)
                    .map(|j| ((i * j) as f64).sin() + rng.random_range(0.0..0.3))
                    .collect()
            })
            .collect();
        let labels = labels_n(12);
        let rows: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let e = pca_embed_raw(&rows, &labels).unwrap();
        let perm: Vec<usize> = (0..12).rev().collect();
        let prow: Vec<&[f64]> = perm.iter().map(|&i| data[i].as_slice()).collect();
        let plab: Vec<_> = perm.iter().map(|&i| labels[i]).collect();
        let p = pca_embed_raw(&prow, &plab).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            for c in 0..3 {
                assert!((p.coords[k][c] - e.coords[i][c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn embedding_text() {
        let e = Embedding3D {
            labels: vec![lab(3, SplitSide::B)],
            coords: vec![[0.5, -1.0, 2.0]],
            explained_variance: [1.0, 0.5, 0.1],
            components: 3,
            rank_deficient: false,
            mean: vec![],
            loadings: vec![],
        };
        assert_eq!(e.to_text(), "3 b 5e-1 -1e0 2e0\n");
        assert_eq!(
            parse_embedding(&e.to_text()).unwrap(),
            vec![(lab(3, SplitSide::B), [0.5, -1.0, 2.0])]
        );
    }

    fn histogram() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 12).prop_map(|mut v| {
            v[0] += 1e-3;
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]
        #[test]
        fn chi_square_axioms(x in histogram(), y in histogram()) {
            let dxy = chi_square(&x, &y);
            prop_assert!((dxy - eq1(&x, &y)).abs() < 1e-12);
            prop_assert_eq!(dxy, chi_square(&y, &x));
            prop_assert!(dxy >= 0.0);
            prop_assert!(dxy <= 1.0 + 1e-12);
            prop_assert_eq!(chi_square(&x, &x), 0.0);
            if x != y {
                prop_assert!(dxy > 0.0);
            }
        }
    }
}

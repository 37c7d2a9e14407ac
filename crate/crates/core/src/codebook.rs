//! Kohonen self-organizing map used as the fraglet vocabulary.
//!
//! File format: a header line `rows cols dim epochs seed n_samples`, then one
//! centroid per line (row-major cell order), 12 significant digits.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighbourhood weights below this are not applied.
const NEIGHBOURHOOD_CUTOFF: f64 = 1e-5;

/// Below this many multiply-adds per step the map is searched serially.
const PARALLEL_WORK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SofmParams {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Defaults to `max(rows, cols) / 2`.
    pub radius_start: Option<f64>,
    pub radius_end: f64,
}

impl SofmParams {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            epochs: 50,
            seed,
            lr_start: 0.5,
            lr_end: 0.01,
            radius_start: None,
            radius_end: 1.0,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub radius_start: f64,
    pub radius_end: f64,
    /// Mean distance from each sample to its best-matching unit, after each
    /// epoch.
    pub quantization_error: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Codebook {
    rows: usize,
    cols: usize,
    dim: usize,
    centroids: Vec<f64>,
    pub meta: TrainingMeta,
    #[serde(skip)]
    index: OnceLock<Option<ProjectionIndex>>,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        (self.rows, self.cols, self.dim) == (other.rows, other.cols, other.dim)
            && self.centroids == other.centroids
            && self.meta == other.meta
    }
}

impl Codebook {
    pub fn from_centroids(
        rows: usize,
        cols: usize,
        dim: usize,
        centroids: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "codebook dimensions must be positive".into(),
            ));
        }
        if centroids.len() != rows * cols * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * cols * dim,
                actual: centroids.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            dim,
            centroids,
            meta: TrainingMeta::default(),
            index: OnceLock::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centroid(&self, cell: usize) -> &[f64] {
        &self.centroids[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn cell_position(&self, cell: usize) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    pub fn sq_dist(&self, cell: usize, v: &[f64]) -> f64 {
        sq_dist(self.centroid(cell), v)
    }

    /// Best-matching unit; ties go to the lowest cell index.
    pub fn bmu(&self, v: &[f64]) -> usize {
        self.nearest(v, 1)[0]
    }

    /// The `k` nearest cells, nearest first; ties go to the lower index.
    pub fn nearest(&self, v: &[f64], k: usize) -> Vec<usize> {
        let index = self
            .index
            .get_or_init(|| ProjectionIndex::build(&self.centroids, self.dim));
        match index {
            Some(ix) if v.len() == self.dim && k < self.len() / 4 => ix.knn(&self.centroids, v, k),
            _ => knn(&self.centroids, self.dim, v, k),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {} {}\n",
            self.rows, self.cols, self.dim, self.meta.epochs, self.meta.seed, self.meta.n_samples
        );
        for c in self.centroids.chunks_exact(self.dim) {
            let line: Vec<String> = c.iter().map(|v| format!("{v:.11e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("codebook", "missing header"))?;
        let h: Vec<u64> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|e| Error::parse("codebook header", e.to_string()))
            })
            .collect::<Result<_>>()?;
        let [rows, cols, dim, epochs, seed, n_samples] = h[..] else {
            return Err(Error::parse(
                "codebook header",
                "expected `rows cols dim epochs seed n_samples`",
            ));
        };
        let (rows, cols, dim) = (rows as usize, cols as usize, dim as usize);
        let mut centroids = Vec::with_capacity(rows * cols * dim);
        let mut n_lines = 0;
        for line in lines {
            n_lines += 1;
            let before = centroids.len();
            for t in line.split_whitespace() {
                centroids.push(
                    t.parse::<f64>()
                        .map_err(|e| Error::parse("codebook", e.to_string()))?,
                );
            }
            if centroids.len() - before != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: centroids.len() - before,
                });
            }
        }
        if n_lines != rows * cols {
            return Err(Error::parse(
                "codebook",
                format!("expected {} centroids, found {n_lines}", rows * cols),
            ));
        }
        let mut cb = Self::from_centroids(rows, cols, dim, centroids)?;
        cb.meta.epochs = epochs as usize;
        cb.meta.seed = seed;
        cb.meta.n_samples = n_samples as usize;
        Ok(cb)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[inline]
/// Squared Euclidean distance. Term `i` goes to accumulator `i % 4`; the
/// bounded variant below uses the same order so both agree bit for bit.
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    accumulate(&mut acc, a, b);
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[inline]
fn accumulate(acc: &mut [f64; 4], a: &[f64], b: &[f64]) {
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..4 {
            acc[j] += (x[j] - y[j]) * (x[j] - y[j]);
        }
    }
    for (j, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        acc[j] += (x - y) * (x - y);
    }
}

/// Squared distance, or `None` as soon as the running sum exceeds `bound`.
/// Sums in the same order as [`sq_dist`], so finished values are identical.
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a.chunks(16).zip(b.chunks(16)) {
        accumulate(&mut acc, ca, cb);
        if (acc[0] + acc[1]) + (acc[2] + acc[3]) > bound {
            return None;
        }
    }
    Some((acc[0] + acc[1]) + (acc[2] + acc[3]))
}

/// Coordinates read by the coarse pre-ordering pass: one pair out of every 8.
const COARSE_STRIDE: usize = 16;
const COARSE_MIN_DIM: usize = 128;

fn coarse_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in (0..a.len() - 1).step_by(COARSE_STRIDE) {
        s += (a[j] - b[j]).powi(2) + (a[j + 1] - b[j + 1]).powi(2);
    }
    s
}

/// Exact k-nearest search with early abandoning. For long vectors the cells
/// `k` cells that look closest by a coarse distance are visited first so the
/// bound is tight from the start;
/// the visiting order never changes the result.
fn knn(centroids: &[f64], dim: usize, v: &[f64], k: usize) -> Vec<usize> {
    let n = centroids.len() / dim;
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let cell = |i: usize| &centroids[i * dim..(i + 1) * dim];
    let order: Vec<usize> = if dim >= COARSE_MIN_DIM && n > 2 * k {
        let mut o: Vec<(f64, usize)> = (0..n).map(|i| (coarse_dist(cell(i), v), i)).collect();
        o.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut seen = vec![false; n];
        let mut order: Vec<usize> = o[..k].iter().map(|p| p.1).collect();
        for &i in &order {
            seen[i] = true;
        }
        order.extend((0..n).filter(|&i| !seen[i]));
        order
    } else {
        (0..n).collect()
    };
    let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
    for i in order {
        let bound = if heap.len() < k {
            f64::INFINITY
        } else {
            heap.peek().map_or(f64::INFINITY, |w: &Candidate| w.0)
        };
        if let Some(d) = sq_dist_bounded(cell(i), v, bound) {
            let cand = Candidate(d, i);
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("full heap") {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| c.1).collect()
}

/// Leading principal axes of a finished map and every centroid projected onto
/// them. Projection onto orthonormal axes never lengthens a vector, so the
/// projected distance is a lower bound on the true one.
#[derive(Clone, Debug)]
struct ProjectionIndex {
    dim: usize,
    axes: usize,
    basis: Vec<f64>,
    proj: Vec<f64>,
}

const INDEX_AXES: usize = 24;
const INDEX_MIN_CELLS: usize = 256;
const INDEX_MIN_DIM: usize = 64;

impl ProjectionIndex {
    fn build(centroids: &[f64], dim: usize) -> Option<Self> {
        let n = centroids.len() / dim;
        if n < INDEX_MIN_CELLS || dim < INDEX_MIN_DIM {
            return None;
        }
        let mut x = DMatrix::from_row_slice(n, dim, centroids);
        for j in 0..dim {
            let mean = x.column(j).mean();
            x.column_mut(j).add_scalar_mut(-mean);
        }
        let eig = SymmetricEigen::new(x.transpose() * &x);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let axes = INDEX_AXES.min(dim);
        let mut basis = Vec::with_capacity(axes * dim);
        for &c in &order[..axes] {
            basis.extend(eig.eigenvectors.column(c).iter());
        }
        let mut ix = Self {
            dim,
            axes,
            basis,
            proj: Vec::with_capacity(n * axes),
        };
        for i in 0..n {
            let p = ix.project(&centroids[i * dim..(i + 1) * dim]);
            ix.proj.extend(p);
        }
        Some(ix)
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        self.basis
            .chunks_exact(self.dim)
            .map(|axis| axis.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Exact k-nearest: cells are visited by increasing lower bound and the
    /// walk stops once the bound exceeds the current k-th distance.
    fn knn(&self, centroids: &[f64], v: &[f64], k: usize) -> Vec<usize> {
        let n = centroids.len() / self.dim;
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let q = self.project(v);
        let mut bounds: Vec<(f64, usize)> = self
            .proj
            .chunks_exact(self.axes)
            .enumerate()
            .map(|(i, p)| (sq_dist(p, &q), i))
            .collect();
        let by_bound = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let head = (8 * k).min(n);
        if head < n {
            bounds.select_nth_unstable_by(head, by_bound);
        }
        bounds[..head].sort_unstable_by(by_bound);
        let mut sorted_tail = head == n;
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        let mut pos = 0;
        while pos < n {
            if pos == head && !sorted_tail {
                bounds[head..].sort_unstable_by(by_bound);
                sorted_tail = true;
            }
            let (lb, i) = bounds[pos];
            pos += 1;
            let bound = if heap.len() < k {
                f64::INFINITY
            } else {
                heap.peek().map_or(f64::INFINITY, |w: &Candidate| w.0)
            };
            // slack absorbs rounding in the projections
            if lb * (1.0 - 1e-9) - 1e-9 > bound {
                break;
            }
            if let Some(d) = sq_dist_bounded(&centroids[i * self.dim..(i + 1) * self.dim], v, bound)
            {
                let cand = Candidate(d, i);
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("full heap") {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        heap.into_sorted_vec().into_iter().map(|c| c.1).collect()
    }
}

fn bmu(centroids: &[f64], dim: usize, v: &[f64]) -> usize {
    knn(centroids, dim, v, 1)[0]
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn quantization_error<V: AsRef<[f64]> + Sync>(centroids: &[f64], dim: usize, samples: &[V]) -> f64 {
    let d: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let s = s.as_ref();
            let b = bmu(centroids, dim, s);
            sq_dist(&centroids[b * dim..(b + 1) * dim], s).sqrt()
        })
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Online Kohonen training. Deterministic for a given sample order and seed.
pub fn train_sofm<V: AsRef<[f64]> + Sync>(samples: &[V], params: &SofmParams) -> Result<Codebook> {
    let SofmParams {
        rows,
        cols,
        epochs,
        seed,
        ..
    } = *params;
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if rows < 2 || cols < 2 || epochs == 0 {
        return Err(Error::InvalidParameter(format!(
            "map must be at least 2x2 with one epoch, got {rows}x{cols}, {epochs} epochs"
        )));
    }
    let dim = samples[0].as_ref().len();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty training vectors".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: s.as_ref().len(),
        });
    }
    let cells = rows * cols;
    let mut meta = TrainingMeta {
        epochs,
        seed,
        n_samples: samples.len(),
        lr_start: params.lr_start,
        lr_end: params.lr_end,
        radius_start: params.radius_start.unwrap_or(rows.max(cols) as f64 / 2.0),
        radius_end: params.radius_end,
        ..Default::default()
    };
    if samples.len() < cells {
        meta.warnings.push(format!(
            "{} training samples for {cells} cells; initial centroids repeat",
            samples.len()
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<usize> = if samples.len() >= cells {
        rand::seq::index::sample(&mut rng, samples.len(), cells).into_vec()
    } else {
        (0..cells)
            .map(|_| rand::Rng::random_range(&mut rng, 0..samples.len()))
            .collect()
    };
    let mut centroids: Vec<f64> = init
        .iter()
        .flat_map(|&i| samples[i].as_ref().iter().copied())
        .collect();

    let total = (epochs * samples.len()).max(2) as f64;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0usize;
    let parallel = cells * dim >= PARALLEL_WORK;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let x = samples[si].as_ref();
            let t = step as f64 / (total - 1.0);
            let lr = meta.lr_start + (meta.lr_end - meta.lr_start) * t;
            let sigma = meta.radius_start + (meta.radius_end - meta.radius_start) * t;
            let two_s2 = 2.0 * sigma * sigma;
            let reach2 = -two_s2 * NEIGHBOURHOOD_CUTOFF.ln();
            let b = bmu(&centroids, dim, x);
            let (br, bc) = ((b / cols) as f64, (b % cols) as f64);
            let update = |(i, c): (usize, &mut [f64])| {
                let (r, k) = ((i / cols) as f64, (i % cols) as f64);
                let g2 = (r - br).powi(2) + (k - bc).powi(2);
                if g2 > reach2 {
                    return;
                }
                let a = lr * (-g2 / two_s2).exp();
                for (cj, xj) in c.iter_mut().zip(x) {
                    *cj += a * (xj - *cj);
                }
            };
            if parallel {
                centroids
                    .par_chunks_exact_mut(dim)
                    .enumerate()
                    .for_each(update);
            } else {
                centroids.chunks_exact_mut(dim).enumerate().for_each(update);
            }
            step += 1;
        }
        meta.quantization_error
            .push(quantization_error(&centroids, dim, samples));
    }
    let mut cb = Codebook::from_centroids(rows, cols, dim, centroids)?;
    cb.meta = meta;
    Ok(cb)
}

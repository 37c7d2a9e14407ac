//! Connected ink components and their outer boundaries.
//!
//! Components use 8-connectivity. Boundaries are traced with the Moore
//! neighbourhood, starting at the first ink pixel of the component in raster
//! order. The walk stops when it is about to repeat its first move, which also
//! closes one-pixel-wide strokes that are walked out and back.

use serde::{Deserialize, Serialize};

use crate::image::BinaryImage;

/// Moore neighbourhood, clockwise in image coordinates (y grows downward),
/// starting at west.
pub const MOORE: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Pixels in discovery order; the first one is the raster-first pixel.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
}

impl Component {
    pub fn start(&self) -> (usize, usize) {
        self.pixels[0]
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self.pixels.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| {
            (sx + x as f64, sy + y as f64)
        });
        (sx / n, sy / n)
    }

    /// The component alone, cropped to its bounding box.
    pub fn mask(&self) -> BinaryImage {
        let mut out = BinaryImage::blank(self.bbox.w, self.bbox.h).expect("non-empty bbox");
        for &(x, y) in &self.pixels {
            out.set(x - self.bbox.x, y - self.bbox.y, true);
        }
        out
    }
}

/// 8-connected components, ordered by their raster-first pixel.
pub fn connected_components(img: &BinaryImage) -> Vec<Component> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !img.get(x, y) || seen[y * w + x] {
                continue;
            }
            seen[y * w + x] = true;
            stack.push((x, y));
            let mut pixels = Vec::new();
            let (mut x0, mut y0, mut x1, mut y1) = (x, y, x, y);
            while let Some((px, py)) = stack.pop() {
                pixels.push((px, py));
                x0 = x0.min(px);
                x1 = x1.max(px);
                y0 = y0.min(py);
                y1 = y1.max(py);
                for (dx, dy) in MOORE {
                    let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                    if img.get_signed(nx, ny) {
                        let idx = ny as usize * w + nx as usize;
                        if !seen[idx] {
                            seen[idx] = true;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            out.push(Component {
                pixels,
                bbox: BBox {
                    x: x0,
                    y: y0,
                    w: x1 - x0 + 1,
                    h: y1 - y0 + 1,
                },
            });
        }
    }
    out
}

fn direction_index(dx: i64, dy: i64) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack pixel is a Moore neighbour")
}

/// Outer boundary of the component containing `start`, which must be the
/// component's raster-first pixel (so its west neighbour is background).
///
/// Returned points are pixel coordinates in walk order; the start pixel is
/// first and is not repeated at the end. Thin strokes visit pixels twice.
pub fn trace_outer(img: &BinaryImage, start: (usize, usize)) -> Vec<(i64, i64)> {
    let s = (start.0 as i64, start.1 as i64);
    let mut contour = vec![s];
    let (mut p, mut back) = (s, 0usize);
    let mut first_move = None;
    // Each boundary pixel can be entered from at most 8 directions.
    let limit = 8 * img.width() * img.height() + 8;
    for _ in 0..limit {
        let mut next = None;
        for i in 1..=8 {
            let d = (back + i) % 8;
            let q = (p.0 + MOORE[d].0, p.1 + MOORE[d].1);
            if img.get_signed(q.0, q.1) {
                let prev = (back + i - 1) % 8;
                let b = (p.0 + MOORE[prev].0, p.1 + MOORE[prev].1);
                next = Some((q, direction_index(b.0 - q.0, b.1 - q.1)));
                break;
            }
        }
        let Some(state) = next else {
            // isolated pixel
            return contour;
        };
        match first_move {
            None => first_move = Some(state),
            Some(first) if first == state => {
                if contour.len() > 1 && contour.last() == Some(&s) {
                    contour.pop();
                }
                return contour;
            }
            Some(_) => {}
        }
        (p, back) = state;
        contour.push(p);
    }
    contour
}

/// One outer contour per component, in component order.
pub fn outer_contours(img: &BinaryImage) -> Vec<Vec<(i64, i64)>> {
    connected_components(img)
        .iter()
        .map(|c| trace_outer(img, c.start()))
        .collect()
}

/// Twice the signed area in math orientation (y up); positive means
/// counter-clockwise.
pub fn signed_area2(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = points[i];
            let (x1, y1) = points[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum()
}

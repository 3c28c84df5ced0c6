//! Simple polygons and pixel-center rasterization.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A simple (non-self-intersecting) closed polygon in pixel coordinates.
///
/// The ring is stored open: the edge from the last vertex back to the first
/// is implicit. A duplicated closing vertex in the input is stripped.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    points: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(mut points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() >= 2 && points.first() == points.last() {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::validation(format!(
                "polygon needs at least 3 distinct vertices, got {}",
                points.len()
            )));
        }
        for p in &points {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::validation("non-finite polygon coordinate".to_string()));
            }
        }
        let n = points.len();
        for i in 0..n {
            if points[i] == points[(i + 1) % n] {
                return Err(Error::validation(format!(
                    "zero-length polygon edge at vertex {i}"
                )));
            }
        }
        let poly = Polygon { points };
        if !poly.is_simple() {
            return Err(Error::validation("self-intersecting polygon".to_string()));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle helper.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// (x_min, y_min, x_max, y_max) of the vertex set.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            b.0 = b.0.min(p[0]);
            b.1 = b.1.min(p[1]);
            b.2 = b.2.max(p[0]);
            b.3 = b.3.max(p[1]);
        }
        b
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.points.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            acc += a[0] * b[1] - b[0] * a[1];
        }
        acc.abs() / 2.0
    }

    fn is_simple(&self) -> bool {
        let n = self.points.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // skip adjacent edges (they share a vertex by construction)
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                let (c, d) = (self.points[j], self.points[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0) != (o2 > 0.0)) && ((o3 > 0.0) != (o4 > 0.0)) && o1 != 0.0 && o2 != 0.0 && o3 != 0.0 && o4 != 0.0
    {
        return true;
    }
    // collinear touching counts as an intersection for non-adjacent edges
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Rasterizes a polygon to a binary grid: a pixel is 1 iff its center lies
/// inside under the even-odd rule.
///
/// Scanline fill: for each row, the crossings of polygon edges with the
/// horizontal line through the pixel centers are sorted and the spans between
/// even/odd pairs are filled half-open (`x_start ≤ center < x_end`).
/// Self-intersecting input is rejected at `Polygon` construction.
pub fn rasterize_polygon(polygon: &Polygon, width: u32, height: u32) -> Result<Grid> {
    let mut grid = Grid::zeros(width, height)?;
    let pts = polygon.points();
    let n = pts.len();
    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for y in 0..height {
        let yc = y as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            if (a[1] <= yc) != (b[1] <= yc) {
                crossings.push(a[0] + (yc - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            let (start, end) = (pair[0], pair[1]);
            for x in 0..width {
                let xc = x as f64 + 0.5;
                if xc >= start && xc < end {
                    grid.set(x, y, 1.0);
                }
            }
        }
    }
    Ok(grid)
}

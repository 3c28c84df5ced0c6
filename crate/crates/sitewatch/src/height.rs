//! Building height from shadow geometry and sun metadata.
//!
//! The estimate is `height = shadow_length × tan(sun elevation)`, with the
//! viewing geometry assumed near-nadir (no satellite off-nadir correction).
//! Shadow length is measured by casting rays from the footprint boundary in
//! the anti-solar direction and taking the median over rays, which is robust
//! to ragged segmentation edges. The NIR-threshold baseline is also provided.

use serde::{Deserialize, Serialize};

use crate::annotations::{rasterize_polygon, Polygon};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::raster::{ChannelKind, RasterImage, SunMetadata};

/// Default storey height in meters; configurable everywhere it is used.
pub const DEFAULT_FLOOR_HEIGHT_M: f64 = 3.0;

/// How a height estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightMethod {
    ShadowMask,
    NirThreshold,
}

/// A per-building height estimate, serialized into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightEstimate {
    pub footprint_id: usize,
    pub shadow_length_m: f64,
    pub height_m: f64,
    pub floors: u32,
    pub method: HeightMethod,
}

/// Result of a shadow-length measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowLength {
    pub meters: f64,
    /// Number of boundary rays that were cast.
    pub rays: usize,
    /// Set when no ray found any shadow; `meters` is 0 in that case.
    pub no_shadow: bool,
}

/// Tangent of an angle in degrees, exact at the 45° pivot.
///
/// `tan(45°.to_radians())` misses 1.0 by one ulp because π/4 is not
/// representable; pinning the pivot keeps `length == height` identities exact
/// at 45°, the same convention degree-based trig tables use.
fn tan_deg(deg: f64) -> f64 {
    if deg == 45.0 {
        1.0
    } else {
        deg.to_radians().tan()
    }
}

/// Measures the shadow length in meters cast by a footprint.
///
/// From every footprint boundary pixel on the shadow side, a ray is walked in
/// the anti-solar direction (azimuth + 180°) at half-pixel steps, starting at
/// the footprint edge. A ray ends at the first run of ≥ 2 consecutive
/// non-shadow samples, so single-pixel mask holes do not cut the measurement
/// short. The per-ray length is the distance to the last shadow sample; the
/// result is the median over rays, scaled by the ground resolution.
pub fn shadow_length(
    shadow: &Grid,
    footprint: &Polygon,
    sun: &SunMetadata,
    resolution_m_per_px: f64,
) -> Result<ShadowLength> {
    if !resolution_m_per_px.is_finite() || resolution_m_per_px <= 0.0 {
        return Err(Error::invalid(format!(
            "resolution must be positive, got {resolution_m_per_px}"
        )));
    }
    let (w, h) = (shadow.width(), shadow.height());
    let (fx0, fy0, fx1, fy1) = footprint.bounding_box();
    if fx0 < 0.0 || fy0 < 0.0 || fx1 > w as f64 || fy1 > h as f64 {
        return Err(Error::invalid(format!(
            "footprint exceeds shadow mask bounds {w}x{h}"
        )));
    }
    let fp = rasterize_polygon(footprint, w, h)?;
    // anti-solar direction; image rows grow southward, so north is −y
    let theta = (sun.azimuth_deg() + 180.0).to_radians();
    let (dx, dy) = (theta.sin(), -theta.cos());

    let mut lengths: Vec<f64> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !fp.is_set(x, y) {
                continue;
            }
            // shadow-side boundary: the next pixel along the ray leaves the footprint
            let nx = x as f64 + 0.5 + dx;
            let ny = y as f64 + 0.5 + dy;
            if sample(&fp, nx, ny) == Some(true) {
                continue;
            }
            lengths.push(ray_length(shadow, &fp, x, y, dx, dy));
        }
    }
    if lengths.is_empty() {
        return Err(Error::invalid(
            "footprint rasterizes to no shadow-side boundary pixels".to_string(),
        ));
    }
    lengths.sort_by(f64::total_cmp);
    let median_px = median_of_sorted(&lengths);
    Ok(ShadowLength {
        meters: median_px * resolution_m_per_px,
        rays: lengths.len(),
        no_shadow: lengths.iter().all(|&l| l == 0.0),
    })
}

/// Value of the mask at a continuous position, or None outside the grid.
fn sample(grid: &Grid, x: f64, y: f64) -> Option<bool> {
    if x < 0.0 || y < 0.0 {
        return None;
    }
    let (xi, yi) = (x.floor() as u32, y.floor() as u32);
    if xi >= grid.width() || yi >= grid.height() {
        return None;
    }
    Some(grid.is_set(xi, yi))
}

/// Shadow run length in pixels along one ray, measured from the footprint edge.
fn ray_length(shadow: &Grid, fp: &Grid, x: u32, y: u32, dx: f64, dy: f64) -> f64 {
    const STEP: f64 = 0.5;
    let max_steps = 4 * (shadow.width() + shadow.height()) as usize;
    let (mut px, mut py) = (x as f64 + 0.5, y as f64 + 0.5);
    // leave the footprint first
    let mut step = 0usize;
    loop {
        px += dx * STEP;
        py += dy * STEP;
        step += 1;
        match sample(fp, px, py) {
            Some(true) if step < max_steps => continue,
            Some(true) => return 0.0,
            _ => break,
        }
    }
    // gap counts consecutive non-shadow *pixels* (each pixel holds two
    // half-pixel samples), so a one-pixel mask hole does not end the run
    let mut last_shadow = 0usize;
    let mut gap_px = 0usize;
    let mut prev_pixel: Option<(u32, u32)> = None;
    let mut i = 0usize;
    loop {
        i += 1;
        if px < 0.0 || py < 0.0 {
            break;
        }
        let pixel = (px.floor() as u32, py.floor() as u32);
        if pixel.0 >= shadow.width() || pixel.1 >= shadow.height() {
            break;
        }
        if shadow.is_set(pixel.0, pixel.1) {
            last_shadow = i;
            gap_px = 0;
        } else if prev_pixel != Some(pixel) {
            gap_px += 1;
            if gap_px >= 2 {
                break;
            }
        }
        prev_pixel = Some(pixel);
        if i >= max_steps {
            break;
        }
        px += dx * STEP;
        py += dy * STEP;
    }
    last_shadow as f64 * STEP
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// `height = shadow_length × tan(elevation)`; exact at 45°.
pub fn height_from_shadow(shadow_length_m: f64, sun: &SunMetadata) -> f64 {
    shadow_length_m * tan_deg(sun.elevation_deg())
}

/// Floor count: height over storey height, rounded half-up, at least 0.
pub fn floors_from_height(height_m: f64, floor_height_m: f64) -> u32 {
    if height_m <= 0.0 || floor_height_m <= 0.0 {
        return 0;
    }
    (height_m / floor_height_m).round() as u32
}

/// The NIR-threshold shadow baseline: shadows are NIR-dark, so a pixel is
/// marked iff its NIR value is ≤ `threshold`. Errors when the image has no
/// NIR channel.
pub fn nir_shadow_baseline(image: &RasterImage, threshold: f64) -> Result<Grid> {
    let nir = image
        .channel(ChannelKind::Nir)
        .ok_or_else(|| Error::invalid("image has no NIR channel".to_string()))?;
    Grid::from_fn(nir.width(), nir.height(), |x, y| {
        if nir.get(x, y) <= threshold {
            1.0
        } else {
            0.0
        }
    })
}

/// Composes shadow measurement, the tangent formula and the floor count into
/// a report entry.
pub fn estimate_height(
    shadow: &Grid,
    footprint: &Polygon,
    footprint_id: usize,
    sun: &SunMetadata,
    resolution_m_per_px: f64,
    floor_height_m: f64,
) -> Result<HeightEstimate> {
    let length = shadow_length(shadow, footprint, sun, resolution_m_per_px)?;
    let height_m = height_from_shadow(length.meters, sun);
    Ok(HeightEstimate {
        footprint_id,
        shadow_length_m: length.meters,
        height_m,
        floors: floors_from_height(height_m, floor_height_m),
        method: HeightMethod::ShadowMask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Building rows `[b_y0, b_y1)` across columns `[x0, x1)`, shadow
    /// directly north of it for `shadow_px` rows.
    fn north_shadow_scene(
        w: u32,
        h: u32,
        x0: u32,
        x1: u32,
        b_y0: u32,
        b_y1: u32,
        shadow_px: u32,
    ) -> (Grid, Polygon) {
        let shadow = Grid::from_fn(w, h, |x, y| {
            if x >= x0 && x < x1 && y + shadow_px >= b_y0 && y < b_y0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let fp = Polygon::rect(x0 as f64, b_y0 as f64, x1 as f64, b_y1 as f64).unwrap();
        (shadow, fp)
    }

    #[test]
    fn measures_rectangular_shadow_exactly() {
        // 10 px building, 20 px shadow due north, sun from the south
        let (shadow, fp) = north_shadow_scene(40, 40, 15, 25, 20, 30, 20);
        let sun = SunMetadata::new(180.0, 45.0).unwrap();
        let m = shadow_length(&shadow, &fp, &sun, 0.5).unwrap();
        assert_eq!(m.meters, 10.0);
        assert!(!m.no_shadow);
        assert_eq!(m.rays, 10);
        let m1 = shadow_length(&shadow, &fp, &sun, 1.0).unwrap();
        assert_eq!(m1.meters, 20.0);
    }

    #[test]
    fn empty_shadow_reports_zero_with_flag() {
        let shadow = Grid::zeros(30, 30).unwrap();
        let fp = Polygon::rect(10.0, 10.0, 20.0, 20.0).unwrap();
        let sun = SunMetadata::new(180.0, 45.0).unwrap();
        let m = shadow_length(&shadow, &fp, &sun, 0.5).unwrap();
        assert_eq!(m.meters, 0.0);
        assert!(m.no_shadow);
    }

    #[test]
    fn single_pixel_hole_is_bridged() {
        let (mut shadow, fp) = north_shadow_scene(40, 40, 15, 25, 20, 30, 20);
        for x in 15..25 {
            shadow.set(x, 10, 0.0); // one-row hole in the middle of the shadow
        }
        let sun = SunMetadata::new(180.0, 45.0).unwrap();
        let m = shadow_length(&shadow, &fp, &sun, 0.5).unwrap();
        assert_eq!(m.meters, 10.0, "one-pixel holes must not cut the run");
    }

    #[test]
    fn eastward_shadow_follows_azimuth() {
        // sun in the west (270°) → shadow to the east (+x)
        let shadow = Grid::from_fn(40, 40, |x, y| {
            if (15..25).contains(&y) && (25..33).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let fp = Polygon::rect(15.0, 15.0, 25.0, 25.0).unwrap();
        let sun = SunMetadata::new(270.0, 45.0).unwrap();
        let m = shadow_length(&shadow, &fp, &sun, 1.0).unwrap();
        assert_eq!(m.meters, 8.0);
    }

    #[test]
    fn height_formula_examples() {
        let sun45 = SunMetadata::new(180.0, 45.0).unwrap();
        assert_eq!(height_from_shadow(12.0, &sun45), 12.0);
        assert_eq!(height_from_shadow(0.0, &sun45), 0.0);
        let sun30 = SunMetadata::new(180.0, 30.0).unwrap();
        assert!((height_from_shadow(17.3205, &sun30) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn floors_examples() {
        assert_eq!(floors_from_height(0.0, 3.0), 0);
        assert_eq!(floors_from_height(30.0, 3.0), 10);
        assert_eq!(floors_from_height(10.5, 3.0), 4, "3.5 rounds half-up");
        assert_eq!(floors_from_height(-1.0, 3.0), 0);
    }

    #[test]
    fn nir_baseline_examples() {
        let nir = Grid::from_fn(10, 10, |x, _| if x < 3 { 0.1 } else { 0.8 }).unwrap();
        let image = RasterImage::new(vec![ChannelKind::Nir], vec![nir], 1.0, None).unwrap();
        let all = nir_shadow_baseline(&image, 1.0).unwrap();
        assert!(all.values().iter().all(|&v| v == 1.0));
        let none = nir_shadow_baseline(&image, 0.0).unwrap();
        assert!(none.values().iter().all(|&v| v == 0.0));
        let strip = nir_shadow_baseline(&image, 0.3).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(strip.is_set(x, y), x < 3);
            }
        }
        let rgb = RasterImage::new(
            vec![ChannelKind::Red],
            vec![Grid::filled(4, 4, 0.5).unwrap()],
            1.0,
            None,
        )
        .unwrap();
        assert!(nir_shadow_baseline(&rgb, 0.5).is_err());
    }

    #[test]
    fn end_to_end_height_recovery() {
        // construct a shadow of length H / tan(θ) and recover H
        for &elev in &[15.0, 30.0, 45.0, 60.0] {
            let target_h = 9.0;
            let res = 0.5;
            let sun = SunMetadata::new(180.0, elev).unwrap();
            let len_px = (target_h / super::tan_deg(elev) / res).round() as u32;
            let (shadow, fp) = north_shadow_scene(60, 90, 25, 35, 70, 80, len_px);
            let est = estimate_height(&shadow, &fp, 0, &sun, res, 3.0).unwrap();
            let quantum = res * super::tan_deg(elev);
            assert!(
                (est.height_m - target_h).abs() <= quantum + 1e-9,
                "elevation {elev}: {} vs {target_h}",
                est.height_m
            );
        }
    }

    proptest! {
        #[test]
        fn height_monotone_in_length_and_elevation(
            l1 in 0.0f64..50.0,
            dl in 0.1f64..20.0,
            e1 in 1.0f64..88.0,
            de in 0.1f64..1.9,
        ) {
            let s1 = SunMetadata::new(0.0, e1).unwrap();
            let s2 = SunMetadata::new(0.0, e1 + de).unwrap();
            prop_assert!(height_from_shadow(l1 + dl, &s1) > height_from_shadow(l1, &s1));
            prop_assert!(height_from_shadow(l1 + dl, &s2) > height_from_shadow(l1 + dl, &s1));
            // homogeneous of degree 1 in length
            let scaled = height_from_shadow(2.0 * (l1 + dl), &s1);
            prop_assert!((scaled - 2.0 * height_from_shadow(l1 + dl, &s1)).abs() < 1e-9);
        }

        #[test]
        fn floors_error_bound(height in 0.0f64..120.0, floor_h in 2.0f64..4.5) {
            let floors = floors_from_height(height, floor_h);
            prop_assert!((floors as f64 * floor_h - height).abs() <= floor_h / 2.0 + 1e-9);
        }
    }
}

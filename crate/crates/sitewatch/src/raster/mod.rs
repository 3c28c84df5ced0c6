//! Scene ingestion and scene-space geometry: tiling with overlap, resolution
//! degradation, and stitching per-tile predictions back together.
//!
//! All operations are pure functions of their inputs; every type is immutable
//! after construction and safe to share read-only across threads.

mod io;

pub use io::{load_grid_png, load_image, save_grid_png, save_image, write_rgb_png, GrayDepth};
pub(crate) use io::write_atomic;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Channel kinds the pipeline understands, in sidecar order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Red,
    Green,
    Blue,
    Nir,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Red => "red",
            ChannelKind::Green => "green",
            ChannelKind::Blue => "blue",
            ChannelKind::Nir => "nir",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "red" => Ok(ChannelKind::Red),
            "green" => Ok(ChannelKind::Green),
            "blue" => Ok(ChannelKind::Blue),
            "nir" => Ok(ChannelKind::Nir),
            other => Err(Error::parse(format!(
                "unknown channel kind {other:?}, expected red/green/blue/nir"
            ))),
        }
    }
}

/// Sun position at acquisition time.
///
/// Elevation is strictly inside (0, 90): a sun on the horizon casts an
/// infinite shadow and a sun at zenith casts none, so both are rejected when
/// the sidecar is parsed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SunMetadata {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl SunMetadata {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() || !(0.0..360.0).contains(&azimuth_deg) {
            return Err(Error::validation(format!(
                "sun azimuth must be in [0,360), got {azimuth_deg}"
            )));
        }
        if !elevation_deg.is_finite() || elevation_deg <= 0.0 || elevation_deg >= 90.0 {
            return Err(Error::validation(format!(
                "sun elevation must be strictly inside (0,90), got {elevation_deg}"
            )));
        }
        Ok(SunMetadata {
            azimuth_deg,
            elevation_deg,
        })
    }

    /// Degrees clockwise from north.
    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    /// Degrees above the horizon.
    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }
}

/// A multi-channel scene with ground resolution and optional sun metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: Vec<ChannelKind>,
    planes: Vec<Grid>,
    resolution_m_per_px: f64,
    sun: Option<SunMetadata>,
}

impl RasterImage {
    pub fn new(
        channels: Vec<ChannelKind>,
        planes: Vec<Grid>,
        resolution_m_per_px: f64,
        sun: Option<SunMetadata>,
    ) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::validation("image needs at least one channel plane".to_string()));
        }
        if channels.len() != planes.len() {
            return Err(Error::validation(format!(
                "{} channel kinds for {} planes",
                channels.len(),
                planes.len()
            )));
        }
        let (width, height) = (planes[0].width(), planes[0].height());
        for p in &planes[1..] {
            if p.width() != width || p.height() != height {
                return Err(Error::validation("channel planes differ in size".to_string()));
            }
        }
        if !resolution_m_per_px.is_finite() || resolution_m_per_px <= 0.0 {
            return Err(Error::validation(format!(
                "resolution must be positive, got {resolution_m_per_px}"
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            planes,
            resolution_m_per_px,
            sun,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> &[ChannelKind] {
        &self.channels
    }

    pub fn planes(&self) -> &[Grid] {
        &self.planes
    }

    pub fn resolution_m_per_px(&self) -> f64 {
        self.resolution_m_per_px
    }

    pub fn sun(&self) -> Option<&SunMetadata> {
        self.sun.as_ref()
    }

    /// The plane for a channel kind, if the image carries it.
    pub fn channel(&self, kind: ChannelKind) -> Option<&Grid> {
        self.channels
            .iter()
            .position(|&c| c == kind)
            .map(|i| &self.planes[i])
    }
}

/// A full-size crop of a parent scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    /// Pixel offset of the tile's top-left corner in the parent scene.
    pub origin: (u32, u32),
    pub image: RasterImage,
    pub parent_id: String,
}

/// Cuts a scene into `tile_size`-square tiles with the given overlap.
///
/// Tiles step by `tile_size − overlap`; the last row/column is shifted inward
/// so every tile is full size and no pixel is synthesized. Tiles cover every
/// scene pixel at least once and are returned in row-major order.
pub fn tile_scene(
    scene: &RasterImage,
    parent_id: &str,
    tile_size: u32,
    overlap: u32,
) -> Result<Vec<Tile>> {
    if tile_size == 0 {
        return Err(Error::invalid("tile_size must be positive".to_string()));
    }
    if tile_size > scene.width() || tile_size > scene.height() {
        return Err(Error::invalid(format!(
            "tile_size {tile_size} exceeds scene {}x{}",
            scene.width(),
            scene.height()
        )));
    }
    if overlap >= tile_size {
        return Err(Error::invalid(format!(
            "overlap {overlap} must be smaller than tile_size {tile_size}"
        )));
    }
    let xs = axis_origins(scene.width(), tile_size, tile_size - overlap);
    let ys = axis_origins(scene.height(), tile_size, tile_size - overlap);
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            tiles.push(Tile {
                origin: (x, y),
                image: crop(scene, x, y, tile_size, tile_size),
                parent_id: parent_id.to_string(),
            });
        }
    }
    Ok(tiles)
}

/// Stride origins along one axis, last origin clamped inward to `dim - size`.
fn axis_origins(dim: u32, size: u32, stride: u32) -> Vec<u32> {
    let mut origins = Vec::new();
    let mut pos = 0u32;
    loop {
        if pos + size >= dim {
            let last = dim - size;
            if origins.last() != Some(&last) {
                origins.push(last);
            }
            break;
        }
        origins.push(pos);
        pos += stride;
    }
    origins
}

fn crop(scene: &RasterImage, x0: u32, y0: u32, w: u32, h: u32) -> RasterImage {
    let planes = scene
        .planes()
        .iter()
        .map(|p| {
            Grid::from_fn(w, h, |x, y| p.get(x0 + x, y0 + y)).expect("crop stays in [0,1]")
        })
        .collect();
    RasterImage::new(
        scene.channels().to_vec(),
        planes,
        scene.resolution_m_per_px(),
        scene.sun().copied(),
    )
    .expect("crop preserves image invariants")
}

/// Downsamples an image to a coarser ground resolution with an area-average
/// (box) filter. Upsampling is not supported.
///
/// Output dimensions are `round(dim × source_res / target_res)`, at least 1.
/// Each output pixel averages the source rectangle it covers, with fractional
/// edge weights, so constants are preserved exactly and the mean is preserved
/// whenever the dimensions divide evenly.
pub fn degrade_resolution(image: &RasterImage, target_resolution: f64) -> Result<RasterImage> {
    if !target_resolution.is_finite() || target_resolution <= 0.0 {
        return Err(Error::invalid(format!(
            "target resolution must be positive, got {target_resolution}"
        )));
    }
    let src_res = image.resolution_m_per_px();
    if target_resolution < src_res {
        return Err(Error::invalid(format!(
            "target resolution {target_resolution} is finer than source {src_res}; upsampling is not supported"
        )));
    }
    let scale = src_res / target_resolution;
    let out_w = ((image.width() as f64 * scale).round() as u32).max(1);
    let out_h = ((image.height() as f64 * scale).round() as u32).max(1);
    let planes = image
        .planes()
        .iter()
        .map(|p| box_filter(p, out_w, out_h))
        .collect::<Result<Vec<_>>>()?;
    RasterImage::new(
        image.channels().to_vec(),
        planes,
        target_resolution,
        image.sun().copied(),
    )
}

/// Area-average resampling of a bare grid to the given dimensions; the grid
/// analogue of [`degrade_resolution`] for probability planes.
pub fn downsample_grid(src: &Grid, out_w: u32, out_h: u32) -> Result<Grid> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("downsample target must be at least 1x1".to_string()));
    }
    if out_w > src.width() || out_h > src.height() {
        return Err(Error::invalid(format!(
            "downsample target {out_w}x{out_h} exceeds source {}x{}; upsampling is not supported",
            src.width(),
            src.height()
        )));
    }
    box_filter(src, out_w, out_h)
}

fn box_filter(src: &Grid, out_w: u32, out_h: u32) -> Result<Grid> {
    let sx = src.width() as f64 / out_w as f64;
    let sy = src.height() as f64 / out_h as f64;
    Grid::from_fn(out_w, out_h, |ox, oy| {
        let x_start = ox as f64 * sx;
        let x_end = (ox + 1) as f64 * sx;
        let y_start = oy as f64 * sy;
        let y_end = (oy + 1) as f64 * sy;
        let mut acc = 0.0;
        let mut weight = 0.0;
        let yi0 = x_floor(y_start);
        let yi1 = (x_ceil(y_end)).min(src.height());
        let xi0 = x_floor(x_start);
        let xi1 = (x_ceil(x_end)).min(src.width());
        for yi in yi0..yi1 {
            let wy = overlap_1d(yi as f64, y_start, y_end);
            if wy == 0.0 {
                continue;
            }
            for xi in xi0..xi1 {
                let wx = overlap_1d(xi as f64, x_start, x_end);
                if wx == 0.0 {
                    continue;
                }
                acc += src.get(xi, yi) * wx * wy;
                weight += wx * wy;
            }
        }
        // clamp guards against rounding a hair past 1.0
        (acc / weight).clamp(0.0, 1.0)
    })
}

fn x_floor(v: f64) -> u32 {
    v.floor().max(0.0) as u32
}

fn x_ceil(v: f64) -> u32 {
    v.ceil().max(0.0) as u32
}

/// Length of the overlap of pixel `[i, i+1)` with `[start, end)`.
fn overlap_1d(i: f64, start: f64, end: f64) -> f64 {
    (end.min(i + 1.0) - start.max(i)).max(0.0)
}

/// A stitched scene-space probability grid plus the coverage mask marking
/// which pixels were covered by at least one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct Stitched {
    pub grid: Grid,
    pub coverage: Grid,
}

/// Merges per-tile probability grids back into scene space.
///
/// Overlapping tiles are blended with the arithmetic mean. Pixels covered by
/// no tile are 0 in the output and 0 in the coverage mask.
pub fn stitch_probabilities(
    tiles: &[((u32, u32), Grid)],
    scene_size: (u32, u32),
) -> Result<Stitched> {
    let (w, h) = scene_size;
    let mut sum = vec![0.0f64; (w as usize) * (h as usize)];
    let mut count = vec![0u32; (w as usize) * (h as usize)];
    for (i, ((ox, oy), grid)) in tiles.iter().enumerate() {
        if ox.checked_add(grid.width()).is_none_or(|x| x > w)
            || oy.checked_add(grid.height()).is_none_or(|y| y > h)
        {
            return Err(Error::invalid(format!(
                "tile {i} at ({ox},{oy}) size {}x{} exceeds scene {w}x{h}",
                grid.width(),
                grid.height()
            )));
        }
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                let idx = ((oy + y) as usize) * (w as usize) + (ox + x) as usize;
                sum[idx] += grid.get(x, y);
                count[idx] += 1;
            }
        }
    }
    let values = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64).clamp(0.0, 1.0) })
        .collect();
    let coverage = count.iter().map(|&c| if c == 0 { 0.0 } else { 1.0 }).collect();
    Ok(Stitched {
        grid: Grid::from_values(w, h, values)?,
        coverage: Grid::from_values(w, h, coverage)?,
    })
}

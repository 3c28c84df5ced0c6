//! PNG ingestion with the `<name>.meta.json` sidecar, and grayscale grid I/O.
//!
//! Channel values are normalized to [0,1] regardless of source bit depth
//! (8-bit scaled by 255, 16-bit by 65535).

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

use super::{ChannelKind, RasterImage, SunMetadata};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    resolution_m_per_px: f64,
    sun_azimuth_deg: Option<f64>,
    sun_elevation_deg: Option<f64>,
    channels: Vec<String>,
}

fn sidecar_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("meta.json")
}

/// Loads a PNG scene plus its `<name>.meta.json` sidecar.
///
/// The PNG may be 8- or 16-bit with 1–4 channels; the sidecar's channel list
/// must match the PNG channel count. A missing sidecar is an error.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let meta_path = sidecar_path(path);
    if !meta_path.exists() {
        return Err(Error::validation(format!(
            "missing sidecar metadata file {}",
            meta_path.display()
        )));
    }
    let meta: Sidecar = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::parse(format!("{}: {e}", meta_path.display())))?;
    let channels = meta
        .channels
        .iter()
        .map(|s| ChannelKind::from_name(s))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context(meta_path.display().to_string()))?;
    let sun = match (meta.sun_azimuth_deg, meta.sun_elevation_deg) {
        (Some(az), Some(el)) => Some(SunMetadata::new(az, el)?),
        (None, None) => None,
        _ => {
            return Err(Error::validation(format!(
                "{}: sun azimuth and elevation must both be present or both null",
                meta_path.display()
            )))
        }
    };
    let img = image::open(path)?;
    let planes = decode_planes(&img)?;
    if planes.len() != channels.len() {
        return Err(Error::validation(format!(
            "{}: sidecar lists {} channels but PNG has {}",
            path.display(),
            channels.len(),
            planes.len()
        )));
    }
    RasterImage::new(channels, planes, meta.resolution_m_per_px, sun)
}

fn decode_planes(img: &DynamicImage) -> Result<Vec<Grid>> {
    let (w, h) = (img.width(), img.height());
    let (samples, max): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 255.0),
        DynamicImage::ImageLumaA8(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 255.0),
        DynamicImage::ImageRgb8(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 255.0),
        DynamicImage::ImageRgba8(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 255.0),
        DynamicImage::ImageLuma16(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 65535.0),
        DynamicImage::ImageLumaA16(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 65535.0),
        DynamicImage::ImageRgb16(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 65535.0),
        DynamicImage::ImageRgba16(b) => (b.as_raw().iter().map(|&v| v as f64).collect(), 65535.0),
        other => {
            return Err(Error::validation(format!(
                "unsupported PNG color type {:?}",
                other.color()
            )))
        }
    };
    let n_channels = samples.len() / (w as usize * h as usize);
    let mut planes = Vec::with_capacity(n_channels);
    for c in 0..n_channels {
        let values = samples[c..]
            .iter()
            .step_by(n_channels)
            .map(|&v| v / max)
            .collect();
        planes.push(Grid::from_values(w, h, values)?);
    }
    Ok(planes)
}

/// Bit depth for grayscale grid PNGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrayDepth {
    Eight,
    Sixteen,
}

/// Writes an image's planes as an interleaved 8-bit PNG plus its sidecar.
///
/// Only 1-, 3-, and 4-channel layouts map onto PNG color types.
pub fn save_image(path: &Path, image: &RasterImage) -> Result<()> {
    let (w, h) = (image.width(), image.height());
    let n = image.planes().len();
    let color = match n {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        4 => ExtendedColorType::Rgba8,
        _ => {
            return Err(Error::invalid(format!(
                "cannot encode a {n}-channel image as PNG (need 1, 3 or 4 channels)"
            )))
        }
    };
    let mut buf = vec![0u8; (w as usize) * (h as usize) * n];
    for (c, plane) in image.planes().iter().enumerate() {
        for (i, &v) in plane.values().iter().enumerate() {
            buf[i * n + c] = (v * 255.0).round() as u8;
        }
    }
    write_png_atomic(path, &buf, w, h, color)?;
    let meta = Sidecar {
        resolution_m_per_px: image.resolution_m_per_px(),
        sun_azimuth_deg: image.sun().map(|s| s.azimuth_deg()),
        sun_elevation_deg: image.sun().map(|s| s.elevation_deg()),
        channels: image.channels().iter().map(|c| c.name().to_string()).collect(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::parse(e.to_string()))?;
    write_atomic(&sidecar_path(path), &json)
}

/// Loads a single-channel PNG as a grid; used for mask and probability files.
pub fn load_grid_png(path: &Path) -> Result<Grid> {
    let img = image::open(path)?;
    let planes = decode_planes(&img)?;
    if planes.len() != 1 {
        return Err(Error::validation(format!(
            "{}: expected a single-channel grayscale PNG, got {} channels",
            path.display(),
            planes.len()
        )));
    }
    Ok(planes.into_iter().next().unwrap())
}

/// Writes a grid as a grayscale PNG at the requested bit depth.
pub fn save_grid_png(path: &Path, grid: &Grid, depth: GrayDepth) -> Result<()> {
    let (w, h) = (grid.width(), grid.height());
    match depth {
        GrayDepth::Eight => {
            let buf: Vec<u8> = grid.values().iter().map(|&v| (v * 255.0).round() as u8).collect();
            write_png_atomic(path, &buf, w, h, ExtendedColorType::L8)
        }
        GrayDepth::Sixteen => {
            let mut buf = Vec::with_capacity(grid.values().len() * 2);
            for &v in grid.values() {
                let q = (v * 65535.0).round() as u16;
                buf.extend_from_slice(&q.to_ne_bytes());
            }
            write_png_atomic(path, &buf, w, h, ExtendedColorType::L16)
        }
    }
}

/// Writes interleaved RGB bytes as a PNG; used for overlay rendering.
pub fn write_rgb_png(path: &Path, rgb: &[u8], width: u32, height: u32) -> Result<()> {
    if rgb.len() != (width as usize) * (height as usize) * 3 {
        return Err(Error::invalid(format!(
            "rgb buffer length {} does not match {width}x{height}x3",
            rgb.len()
        )));
    }
    write_png_atomic(path, rgb, width, height, ExtendedColorType::Rgb8)
}

fn write_png_atomic(
    path: &Path,
    buf: &[u8],
    width: u32,
    height: u32,
    color: ExtendedColorType,
) -> Result<()> {
    let mut bytes = Vec::new();
    PngEncoder::new(Cursor::new(&mut bytes)).write_image(buf, width, height, color)?;
    write_atomic(path, &bytes)
}

/// Write-temp-then-rename so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    fs::write(tmp.path(), bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ChannelKind;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn image_roundtrip_with_sidecar() {
        let dir = tmpdir();
        let path = dir.path().join("scene.png");
        let plane = Grid::from_fn(5, 4, |x, y| ((x + 2 * y) % 5) as f64 / 4.0).unwrap();
        let img = RasterImage::new(
            vec![ChannelKind::Red, ChannelKind::Green, ChannelKind::Blue],
            vec![plane.clone(), plane.clone(), plane],
            0.5,
            Some(SunMetadata::new(135.0, 40.0).unwrap()),
        )
        .unwrap();
        save_image(&path, &img).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.channels(), img.channels());
        assert_eq!(back.resolution_m_per_px(), 0.5);
        assert_eq!(back.sun(), img.sun());
        for (a, b) in back.planes()[0].values().iter().zip(img.planes()[0].values()) {
            assert!((a - b).abs() < 1.0 / 255.0);
        }
    }

    #[test]
    fn missing_sidecar_is_an_error() {
        let dir = tmpdir();
        let path = dir.path().join("scene.png");
        let img = RasterImage::new(
            vec![ChannelKind::Red],
            vec![Grid::filled(2, 2, 0.5).unwrap()],
            1.0,
            None,
        )
        .unwrap();
        save_image(&path, &img).unwrap();
        fs::remove_file(sidecar_path(&path)).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().contains("sidecar"), "{err}");
    }

    #[test]
    fn half_specified_sun_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("scene.png");
        let img = RasterImage::new(
            vec![ChannelKind::Red],
            vec![Grid::filled(2, 2, 0.5).unwrap()],
            1.0,
            None,
        )
        .unwrap();
        save_image(&path, &img).unwrap();
        let meta = r#"{"resolution_m_per_px":1.0,"sun_azimuth_deg":120.0,"sun_elevation_deg":null,"channels":["red"]}"#;
        fs::write(sidecar_path(&path), meta).unwrap();
        assert!(load_image(&path).is_err());
    }

    #[test]
    fn channel_count_mismatch_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("scene.png");
        let img = RasterImage::new(
            vec![ChannelKind::Red],
            vec![Grid::filled(2, 2, 0.5).unwrap()],
            1.0,
            None,
        )
        .unwrap();
        save_image(&path, &img).unwrap();
        let meta = r#"{"resolution_m_per_px":1.0,"sun_azimuth_deg":null,"sun_elevation_deg":null,"channels":["red","green"]}"#;
        fs::write(sidecar_path(&path), meta).unwrap();
        assert!(load_image(&path).is_err());
    }

    #[test]
    fn sixteen_bit_grid_roundtrip_is_near_exact() {
        let dir = tmpdir();
        let path = dir.path().join("mask.png");
        let grid = Grid::from_fn(7, 3, |x, y| ((x * y) % 7) as f64 / 6.0).unwrap();
        save_grid_png(&path, &grid, GrayDepth::Sixteen).unwrap();
        let back = load_grid_png(&path).unwrap();
        for (a, b) in back.values().iter().zip(grid.values()) {
            assert!((a - b).abs() < 1.0 / 65535.0);
        }
    }

    #[test]
    fn binary_grid_roundtrips_exactly() {
        let dir = tmpdir();
        let path = dir.path().join("mask.png");
        let grid = Grid::from_fn(9, 9, |x, y| if (x + y) % 2 == 0 { 1.0 } else { 0.0 }).unwrap();
        save_grid_png(&path, &grid, GrayDepth::Eight).unwrap();
        assert_eq!(load_grid_png(&path).unwrap(), grid);
    }
}

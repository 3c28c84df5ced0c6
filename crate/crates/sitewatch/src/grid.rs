//! Unit-interval raster planes shared across the pipeline.

use crate::error::{Error, Result};

/// A `width × height` plane of values in `[0, 1]`, stored row-major.
///
/// One type covers the three raster payloads the pipeline moves around:
/// image channel planes, model probability grids, and binary masks (the
/// special case where every value is exactly 0 or 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl Grid {
    /// All-zero grid. Dimensions must be at least 1×1.
    pub fn zeros(width: u32, height: u32) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Constant-valued grid.
    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self> {
        check_dims(width, height)?;
        check_value(value)?;
        Ok(Grid {
            width,
            height,
            values: vec![value; (width as usize) * (height as usize)],
        })
    }

    /// Builds a grid from row-major values, validating length and range.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = (width as usize) * (height as usize);
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "grid of {width}x{height} needs {expected} values, got {}",
                values.len()
            )));
        }
        for &v in &values {
            check_value(v)?;
        }
        Ok(Grid {
            width,
            height,
            values,
        })
    }

    /// Builds a grid by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        let mut values = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                check_value(v)?;
                values.push(v);
            }
        }
        Ok(Grid {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize) * (self.width as usize) + (x as usize)
    }

    /// Value at `(x, y)`. Panics on out-of-range coordinates.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[self.idx(x, y)]
    }

    /// Sets the value at `(x, y)`. Panics on out-of-range coordinates or an
    /// out-of-domain value.
    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: f64) {
        assert!(
            value.is_finite() && (0.0..=1.0).contains(&value),
            "grid value out of [0,1]: {value}"
        );
        let i = self.idx(x, y);
        self.values[i] = value;
    }

    pub fn same_dims(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of pixels with value ≥ 0.5; the "set" count of a binary mask.
    pub fn count_set(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 0.5).count()
    }

    /// True when the pixel counts as set under the ≥ 0.5 convention.
    #[inline]
    pub fn is_set(&self, x: u32, y: u32) -> bool {
        self.get(x, y) >= 0.5
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "grid dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

fn check_value(v: f64) -> Result<()> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("grid value out of [0,1]: {v}")));
    }
    Ok(())
}

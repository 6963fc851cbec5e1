//! Row-major 2-D grids and the border rule shared by every windowed operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Raster {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config(format!(
                "raster dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::Length {
                expected: height * width,
                found: data.len(),
            });
        }
        Ok(Raster {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Raster {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Fails unless `other` has the same height and width.
    pub fn check_same_dims<U>(&self, other: &Raster<U>, context: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                context: context.to_string(),
                expected_h: self.height,
                expected_w: self.width,
                found_h: other.height,
                found_w: other.width,
            });
        }
        Ok(())
    }
}

impl<T: Copy> Raster<T> {
    /// Value at a possibly out-of-range coordinate, mirrored about the edge
    /// pixel (`d c b | a b c d | c b a`).
    #[inline]
    pub fn reflected(&self, row: isize, col: isize) -> T {
        let r = reflect_index(row, self.height);
        let c = reflect_index(col, self.width);
        self.data[r * self.width + c]
    }

    /// Copies the `window`x`window` neighbourhood of (row, col) into `buf`
    /// in row-major order, using reflect padding.
    pub fn window_into(&self, row: usize, col: usize, window: usize, buf: &mut Vec<T>) {
        buf.clear();
        let half = (window / 2) as isize;
        for dr in -half..=half {
            for dc in -half..=half {
                buf.push(self.reflected(row as isize + dr, col as isize + dc));
            }
        }
    }
}

/// Mirror index without repeating the edge sample; extents of one collapse to 0.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

pub type RealRaster = Raster<f64>;
pub type BoolRaster = Raster<bool>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_index_mirrors_without_edge_repeat() {
        let got: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-1, 1), 0);
        assert_eq!(reflect_index(5, 1), 0);
    }

    #[test]
    fn window_at_corner_uses_reflection() {
        let r = Raster::from_fn(3, 3, |r, c| (r * 3 + c) as f64);
        let mut buf = Vec::new();
        r.window_into(0, 0, 3, &mut buf);
        assert_eq!(buf, vec![4.0, 3.0, 4.0, 1.0, 0.0, 1.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Raster::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::<f64>::from_vec(0, 2, vec![]).is_err());
    }
}

//! 8-bit slices and maximum-intensity projections for display.

use serde::{Deserialize, Serialize};

use ridgetrace_core::volume::NormalizedVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    /// The two in-plane axes, as (columns, rows).
    fn plane(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

/// Display window over normalized intensity: `lo` maps to 0, `hi` to 255.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major grayscale.
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SliceError {
    #[error("index {index} is outside 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("window must have lo < hi, both finite")]
    BadWindow,
    #[error("projection range {0}..={1} is empty")]
    EmptyRange(usize, usize),
}

fn map(w: &Window) -> Result<impl Fn(f64) -> u8 + '_, SliceError> {
    if !(w.lo.is_finite() && w.hi.is_finite() && w.lo < w.hi) {
        return Err(SliceError::BadWindow);
    }
    Ok(move |v: f64| (((v - w.lo) / (w.hi - w.lo)).clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Maximum over `first..=last` along `axis`; a single index gives a slice.
pub fn project(v: &NormalizedVolume, axis: Axis, first: usize, last: usize, w: &Window) -> Result<Image, SliceError> {
    let dims = v.dims();
    let len = dims[axis.index()];
    for i in [first, last] {
        if i >= len {
            return Err(SliceError::IndexOutOfRange { index: i, len });
        }
    }
    if first > last {
        return Err(SliceError::EmptyRange(first, last));
    }
    let to_u8 = map(w)?;
    let (cu, cv) = axis.plane();
    let (width, height) = (dims[cu], dims[cv]);
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let mut best = f64::NEG_INFINITY;
            for k in first..=last {
                let mut at = [0usize; 3];
                at[cu] = c;
                at[cv] = r;
                at[axis.index()] = k;
                best = best.max(v.get(at[0], at[1], at[2]));
            }
            pixels.push(to_u8(best));
        }
    }
    Ok(Image { width, height, pixels })
}

pub fn slice(v: &NormalizedVolume, axis: Axis, index: usize, w: &Window) -> Result<Image, SliceError> {
    project(v, axis, index, index, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ridgetrace_core::volume::{normalize, ScalarVolume};

    fn ramp() -> NormalizedVolume {
        normalize(&ScalarVolume::from_fn([4, 3, 2], [1.0; 3], |x, y, z| (x + 4 * y + 12 * z) as f64).unwrap())
    }

    #[test]
    fn slice_shapes_and_layout() {
        let v = ramp();
        let z = slice(&v, Axis::Z, 1, &Window::default()).unwrap();
        assert_eq!((z.width, z.height), (4, 3));
        assert_eq!(z.pixels[0], (12.0 / 23.0 * 255.0f64).round() as u8);
        let x = slice(&v, Axis::X, 3, &Window::default()).unwrap();
        assert_eq!((x.width, x.height), (3, 2));
        assert_eq!(*x.pixels.last().unwrap(), 255);
    }

    #[test]
    fn out_of_range_and_bad_windows() {
        let v = ramp();
        assert_eq!(slice(&v, Axis::Z, 2, &Window::default()), Err(SliceError::IndexOutOfRange { index: 2, len: 2 }));
        assert_eq!(slice(&v, Axis::Z, 0, &Window { lo: 0.5, hi: 0.5 }), Err(SliceError::BadWindow));
        assert_eq!(project(&v, Axis::Y, 2, 1, &Window::default()), Err(SliceError::EmptyRange(2, 1)));
    }

    #[test]
    fn window_saturates() {
        let v = ramp();
        let img = slice(&v, Axis::Z, 0, &Window { lo: 0.0, hi: 0.25 }).unwrap();
        assert_eq!(*img.pixels.last().unwrap(), 255);
        assert_eq!(img.pixels[0], 0);
    }
}

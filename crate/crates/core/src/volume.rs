//! Scalar volumes, the median + Gaussian denoising chain, normalization and
//! trilinear sampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VolumeError {
    #[error("volume dimensions must be positive, got {0:?}")]
    ZeroDims([usize; 3]),
    #[error("voxel spacing must be finite and strictly positive, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("volume declares {expected} samples but holds {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("non-finite sample at linear index {0}")]
    NonFinite(usize),
}

/// A dense 3D scalar field on a regular grid, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: [usize; 3],
    spacing: Vec3,
    values: Vec<f64>,
    range: (f64, f64),
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], spacing: Vec3, values: Vec<f64>) -> Result<Self, VolumeError> {
        if dims.contains(&0) {
            return Err(VolumeError::ZeroDims(dims));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VolumeError::BadSpacing(spacing));
        }
        let expected = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or(VolumeError::ZeroDims(dims))?;
        if values.len() != expected {
            return Err(VolumeError::SizeMismatch { expected, actual: values.len() });
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(VolumeError::NonFinite(i));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Self { dims, spacing, values, range: (lo, hi) })
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: Vec3,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, VolumeError> {
        let mut values = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    values.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, spacing, values)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `(min, max)` of the stored samples.
    pub fn value_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index(x, y, z)]
    }

    /// Returns a copy with a different spacing; values are untouched.
    pub fn with_spacing(&self, spacing: Vec3) -> Result<Self, VolumeError> {
        Self::new(self.dims, spacing, self.values.clone())
    }
}

/// Radii (in voxels) of the denoising filters. A radius of 0 disables the stage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterParams {
    pub median_radius: usize,
    pub gaussian_radius: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { median_radius: 2, gaussian_radius: 2 }
    }
}

/// Median filter followed by a separable Gaussian blur.
///
/// The median uses a cubic window of half-width `median_radius`; the blur uses
/// `sigma = gaussian_radius / 2` truncated at `3 sigma`. Both replicate edge
/// voxels at the boundary and work in voxel space, ignoring spacing.
pub fn preprocess(v: &ScalarVolume, p: &FilterParams) -> ScalarVolume {
    let mut values = if p.median_radius > 0 {
        median_filter(v, p.median_radius)
    } else {
        v.values.clone()
    };
    if p.gaussian_radius > 0 {
        let sigma = p.gaussian_radius as f64 / 2.0;
        gaussian_blur(&mut values, v.dims, sigma);
    }
    ScalarVolume::new(v.dims, v.spacing, values).expect("filters preserve shape and finiteness")
}

/// Cubic-window median with clamped (replicated) borders.
pub fn median_filter(v: &ScalarVolume, radius: usize) -> Vec<f64> {
    let [nx, ny, nz] = v.dims;
    let r = radius as isize;
    let window = (2 * radius + 1).pow(3);
    let mid = window / 2;
    let mut out = vec![0.0; v.len()];
    let plane = nx * ny;
    for_each_plane(&mut out, plane, |z, slab| {
        let mut buf = Vec::with_capacity(window);
        for y in 0..ny {
            for x in 0..nx {
                buf.clear();
                for dz in -r..=r {
                    let zz = clamp_index(z as isize + dz, nz);
                    for dy in -r..=r {
                        let yy = clamp_index(y as isize + dy, ny);
                        let row = nx * (yy + ny * zz);
                        for dx in -r..=r {
                            let xx = clamp_index(x as isize + dx, nx);
                            buf.push(v.values[row + xx]);
                        }
                    }
                }
                let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
                slab[x + nx * y] = *m;
            }
        }
    });
    out
}

/// Normalized 1D Gaussian taps for `sigma`, truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let half = libm::ceil(3.0 * sigma) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// In-place separable Gaussian blur with replicated borders.
pub fn gaussian_blur(values: &mut [f64], dims: [usize; 3], sigma: f64) {
    let kernel = gaussian_kernel(sigma);
    if kernel.len() == 1 {
        return;
    }
    let half = (kernel.len() / 2) as isize;
    let [nx, ny, _] = dims;
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let src = values.to_vec();
        let stride = strides[axis];
        let plane = nx * ny;
        for_each_plane(values, plane, |z, slab| {
            for y in 0..ny {
                for x in 0..nx {
                    let coord = [x, y, z][axis] as isize;
                    let base = x + nx * (y + ny * z) - coord as usize * stride;
                    let mut acc = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        let c = clamp_index(coord + k as isize - half, n);
                        acc += w * src[base + c * stride];
                    }
                    slab[x + nx * y] = acc;
                }
            }
        });
    }
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Runs `f(z, plane_slice)` for every z-plane of `out`, in parallel when the
/// `parallel` feature is enabled.
fn for_each_plane<F>(out: &mut [f64], plane: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(plane).enumerate().for_each(|(z, s)| f(z, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(plane).enumerate().for_each(|(z, s)| f(z, s));
    }
}

/// A volume affinely rescaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedVolume {
    inner: ScalarVolume,
    degenerate: bool,
}

impl NormalizedVolume {
    pub fn dims(&self) -> [usize; 3] {
        self.inner.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.inner.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.inner.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.inner.get(x, y, z)
    }

    /// True when the source was constant and every sample was mapped to 0.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn as_scalar(&self) -> &ScalarVolume {
        &self.inner
    }

    pub fn into_scalar(self) -> ScalarVolume {
        self.inner
    }

    /// Trilinear interpolation at a continuous voxel coordinate, clamped to
    /// the grid.
    pub fn sample_trilinear(&self, p: Vec3) -> f64 {
        sample_trilinear(&self.inner, p)
    }
}

/// Rescales `v` so its minimum maps to 0 and maximum to 1. A constant volume
/// maps to all zeros and is flagged degenerate.
pub fn normalize(v: &ScalarVolume) -> NormalizedVolume {
    let (lo, hi) = v.range;
    if hi <= lo {
        let inner = ScalarVolume {
            dims: v.dims,
            spacing: v.spacing,
            values: vec![0.0; v.len()],
            range: (0.0, 0.0),
        };
        return NormalizedVolume { inner, degenerate: true };
    }
    let span = hi - lo;
    let values: Vec<f64> = v.values.iter().map(|&x| ((x - lo) / span).clamp(0.0, 1.0)).collect();
    let inner = ScalarVolume::new(v.dims, v.spacing, values).expect("rescale keeps shape");
    NormalizedVolume { inner, degenerate: false }
}

/// Trilinear interpolation of the 8 voxels around `p` (voxel coordinates),
/// with `p` clamped into the grid.
pub fn sample_trilinear(v: &ScalarVolume, p: Vec3) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let n = v.dims[a];
        let c = p[a].clamp(0.0, (n - 1) as f64);
        let f = libm::floor(c);
        let mut i = f as usize;
        let mut t = c - f;
        if i + 1 >= n {
            // on the upper face: use the last cell with t = 1 (or a single plane)
            if n == 1 {
                t = 0.0;
            } else {
                i = n - 2;
                t = c - i as f64;
            }
        }
        base[a] = i;
        frac[a] = t;
    }
    let step = |a: usize| usize::from(v.dims[a] > 1);
    let (x0, y0, z0) = (base[0], base[1], base[2]);
    let (x1, y1, z1) = (x0 + step(0), y0 + step(1), z0 + step(2));
    let [tx, ty, tz] = frac;
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c00 = lerp(v.get(x0, y0, z0), v.get(x1, y0, z0), tx);
    let c10 = lerp(v.get(x0, y1, z0), v.get(x1, y1, z0), tx);
    let c01 = lerp(v.get(x0, y0, z1), v.get(x1, y0, z1), tx);
    let c11 = lerp(v.get(x0, y1, z1), v.get(x1, y1, z1), tx);
    lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz)
}

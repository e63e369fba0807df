//! Image grids, mirror-boundary helpers and Gaussian smoothing.

use crate::error::{Error, Result};

/// Row-major 2D grid. `GrayImage`, `LabelField` and `EdgeMap` are all built on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    /// Adds a one-pixel border; each border pixel copies the pixel one step
    /// inside the original boundary (for a 1-pixel-wide axis, the pixel itself).
    pub fn mirror_expand(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let src = |i: usize, n: usize| -> usize {
            if i == 0 {
                if n > 1 {
                    1
                } else {
                    0
                }
            } else if i == n + 1 {
                if n > 1 {
                    n - 2
                } else {
                    0
                }
            } else {
                i - 1
            }
        };
        let mut data = Vec::with_capacity((w + 2) * (h + 2));
        for yy in 0..h + 2 {
            let row = src(yy, h) * w;
            for xx in 0..w + 2 {
                data.push(self.data[row + src(xx, w)]);
            }
        }
        Grid {
            width: w + 2,
            height: h + 2,
            data,
        }
    }

    /// Removes the one-pixel border added by [`Grid::mirror_expand`].
    pub fn mirror_shrink(&self) -> Result<Self> {
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 {
            return Err(Error::ImageTooSmall {
                width: w,
                height: h,
            });
        }
        let data = (1..h - 1)
            .flat_map(|y| self.data[y * w + 1..y * w + w - 1].iter().copied())
            .collect();
        Ok(Grid {
            width: w - 2,
            height: h - 2,
            data,
        })
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// The observation: intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage(Grid<f64>);

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_grid(Grid::new(width, height, data)?)
    }

    pub fn from_grid(grid: Grid<f64>) -> Result<Self> {
        if let Some((index, &value)) = grid
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::IntensityOutOfRange { index, value });
        }
        Ok(GrayImage(grid))
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.0
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub fn mirror_expand(img: &GrayImage) -> GrayImage {
    // Copies existing in-range pixels, so the intensity invariant carries over.
    GrayImage(img.0.mirror_expand())
}

pub fn mirror_shrink(img: &GrayImage) -> Result<GrayImage> {
    Ok(GrayImage(img.0.mirror_shrink()?))
}

/// Normalized square Gaussian mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    /// Side length is the smallest odd integer not below `6 * sigma`.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let mut size = (6.0 * sigma).ceil().max(1.0) as usize;
        if size % 2 == 0 {
            size += 1;
        }
        Self::with_size(sigma, size)
    }

    /// Kernel with an explicit odd side length.
    pub fn with_size(sigma: f64, size: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        if size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        let r = (size / 2) as isize;
        let two_var = 2.0 * sigma * sigma;
        let mut weights = Vec::with_capacity(size * size);
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                weights.push((-d2 / two_var).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(GaussianKernel {
            size,
            sigma,
            weights,
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Row-major `size * size` weights.
    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the center.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.weights[((dy + r) as usize) * self.size + (dx + r) as usize]
    }
}

pub fn gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(sigma)
}

/// Dense 2D convolution with mirror padding, no clamping of the result.
/// Padding is built by applying [`Grid::mirror_expand`] once per kernel radius step.
pub fn convolve_mirror(grid: &Grid<f64>, kernel: &GaussianKernel) -> Grid<f64> {
    let r = kernel.radius();
    let mut padded = grid.clone();
    for _ in 0..r {
        padded = padded.mirror_expand();
    }
    let (w, h) = grid.dims();
    let pw = padded.width();
    let size = kernel.size();
    let kw = kernel.weights();
    let pd = padded.data();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..size {
                let row = &pd[(y + ky) * pw + x..(y + ky) * pw + x + size];
                let krow = &kw[ky * size..(ky + 1) * size];
                acc += row.iter().zip(krow).map(|(p, k)| p * k).sum::<f64>();
            }
            out.push(acc);
        }
    }
    Grid {
        width: w,
        height: h,
        data: out,
    }
}

/// Gaussian blur with mirror boundaries; result clamped to the input's range.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = GaussianKernel::new(sigma)?;
    Ok(blur_with_kernel(img, &kernel))
}

pub fn blur_with_kernel(img: &GrayImage, kernel: &GaussianKernel) -> GrayImage {
    let (lo, hi) = img.min_max();
    let mut out = convolve_mirror(img.grid(), kernel);
    out.data_mut().iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    GrayImage(out)
}

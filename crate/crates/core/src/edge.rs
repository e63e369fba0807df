//! Binary edge maps: built-in Canny detector or an external P5 file.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{gaussian_blur, GrayImage, Grid};
use crate::io::{read_pgm, save_bool_mask};

/// Gradient magnitudes below this are treated as flat (intensity units per pixel).
const MIN_GRADIENT: f64 = 1e-9;
/// Relative tolerance for magnitude comparisons in non-maximum suppression.
const TIE_TOLERANCE: f64 = 1e-9;

/// `true` marks an edge pixel (`z_i = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap(Grid<bool>);

impl EdgeMap {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        Ok(EdgeMap(Grid::new(width, height, mask)?))
    }

    pub fn from_grid(grid: Grid<bool>) -> Self {
        EdgeMap(grid)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        Ok(EdgeMap(Grid::filled(width, height, value)?))
    }

    #[inline]
    pub fn grid(&self) -> &Grid<bool> {
        &self.0
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        self.0.data()
    }

    #[inline]
    pub fn is_edge(&self, i: usize) -> bool {
        self.0.data()[i]
    }

    pub fn count(&self) -> usize {
        self.mask().iter().filter(|&&b| b).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_bool_mask(&self.0, path)
    }
}

/// Loads a P5 edge map (value >= 128 is an edge) that must be `width x height`.
pub fn load_edge_map(path: impl AsRef<Path>, width: usize, height: usize) -> Result<EdgeMap> {
    let pgm = read_pgm(path)?;
    if (pgm.width, pgm.height) != (width, height) {
        return Err(Error::EdgeMapDimensionMismatch {
            expected: (width, height),
            found: (pgm.width, pgm.height),
        });
    }
    EdgeMap::new(
        width,
        height,
        pgm.pixels.into_iter().map(|v| v >= 128).collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.0,
            low: 0.1,
            high: 0.3,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "canny sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !((0.0..1.0).contains(&self.low) && self.high > 0.0 && self.high <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "canny thresholds out of range: low={} high={}",
                self.low, self.high
            )));
        }
        if self.low >= self.high {
            return Err(Error::InvalidConfig(format!(
                "canny threshold ordering violated: low={} >= high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Intermediate Canny products, exposed for inspection.
#[derive(Clone, Debug)]
pub struct CannyStages {
    pub magnitude: Grid<f64>,
    /// Magnitude where the pixel survived non-maximum suppression, else 0.
    pub suppressed: Grid<f64>,
}

/// Central differences; the missing neighbor at a border mirrors the inner one.
fn gradients(s: &Grid<f64>) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = s.dims();
    let prev = |i: usize, n: usize| if i > 0 { i - 1 } else { 1.min(n - 1) };
    let next = |i: usize, n: usize| if i + 1 < n { i + 1 } else { n.saturating_sub(2) };
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            gx.push(0.5 * (s.get(next(x, w), y) - s.get(prev(x, w), y)));
            gy.push(0.5 * (s.get(x, next(y, h)) - s.get(x, prev(y, h))));
        }
    }
    (gx, gy)
}

/// Quantizes the gradient direction to 0/45/90/135 degrees and returns the
/// neighbor offsets `(backward, forward)` along it. Image y points down.
fn direction_offsets(gx: f64, gy: f64) -> ((isize, isize), (isize, isize)) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        ((-1, 0), (1, 0))
    } else if angle < 67.5 {
        ((-1, -1), (1, 1))
    } else if angle < 112.5 {
        ((0, -1), (0, 1))
    } else {
        ((1, -1), (-1, 1))
    }
}

pub fn canny_stages(img: &GrayImage, sigma: f64) -> Result<CannyStages> {
    let smooth = gaussian_blur(img, sigma)?;
    let grid = smooth.grid();
    let (w, h) = grid.dims();
    let (gx, gy) = gradients(grid);
    let mag: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| {
            let m = a.hypot(*b);
            if m < MIN_GRADIENT {
                0.0
            } else {
                m
            }
        })
        .collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    let eps = TIE_TOLERANCE * peak;

    let at = |x: usize, y: usize, d: (isize, isize)| -> f64 {
        let (nx, ny) = (x as isize + d.0, y as isize + d.1);
        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
            0.0
        } else {
            mag[ny as usize * w + nx as usize]
        }
    };

    let mut suppressed = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let (back, fwd) = direction_offsets(gx[i], gy[i]);
            // A plateau of equal magnitudes along the gradient keeps only its
            // first pixel, so a symmetric step yields a one-pixel line.
            if m > at(x, y, back) + eps && m >= at(x, y, fwd) - eps {
                suppressed[i] = m;
            }
        }
    }

    Ok(CannyStages {
        magnitude: Grid::new(w, h, mag)?,
        suppressed: Grid::new(w, h, suppressed)?,
    })
}

/// Double-threshold hysteresis with thresholds relative to the largest
/// suppressed magnitude; weak pixels join through 8-connectivity.
pub fn hysteresis(suppressed: &Grid<f64>, low: f64, high: f64) -> EdgeMap {
    let (w, h) = suppressed.dims();
    let mag = suppressed.data();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    let mut out = vec![false; w * h];
    if peak <= 0.0 {
        return EdgeMap(Grid::new(w, h, out).expect("dims from existing grid"));
    }
    let (lo, hi) = (low * peak, high * peak);
    let weak = |i: usize| mag[i] > 0.0 && mag[i] >= lo;
    let mut stack = Vec::new();
    for seed in 0..w * h {
        if out[seed] || !(mag[seed] > 0.0 && mag[seed] >= hi) {
            continue;
        }
        out[seed] = true;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !out[j] && weak(j) {
                        out[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    EdgeMap(Grid::new(w, h, out).expect("dims from existing grid"))
}

pub fn canny_edges(img: &GrayImage, sigma: f64, low: f64, high: f64) -> Result<EdgeMap> {
    CannyParams { sigma, low, high }.validate()?;
    let stages = canny_stages(img, sigma)?;
    Ok(hysteresis(&stages.suppressed, low, high))
}

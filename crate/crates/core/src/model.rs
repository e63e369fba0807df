//! Label configurations and per-class Gaussian parameters.

use crate::error::{Error, Result};
use crate::image::Grid;

/// Lower bound on every class standard deviation, in intensity units.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// A labeling `x` of the pixel grid with classes `0..k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelField {
    grid: Grid<usize>,
    k: usize,
}

impl LabelField {
    pub fn new(width: usize, height: usize, labels: Vec<usize>, k: usize) -> Result<Self> {
        Self::from_grid(Grid::new(width, height, labels)?, k)
    }

    pub fn from_grid(grid: Grid<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if let Some((index, &label)) = grid.data().iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::LabelOutOfRange { index, label, k });
        }
        Ok(LabelField { grid, k })
    }

    pub fn uniform(width: usize, height: usize, label: usize, k: usize) -> Result<Self> {
        Self::new(width, height, vec![label; width * height], k)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn grid(&self) -> &Grid<usize> {
        &self.grid
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[usize] {
        self.grid.data()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.grid.get(x, y)
    }

    /// Caller keeps `label < k`.
    #[inline]
    pub(crate) fn set_index(&mut self, i: usize, label: usize) {
        debug_assert!(label < self.k);
        self.grid.data_mut()[i] = label;
    }

    /// Applies a relabeling `perm[old] = new`; `perm` must be a permutation of `0..k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(Error::ClassCountMismatch(format!(
                "permutation has {} entries for k = {}",
                perm.len(),
                self.k
            )));
        }
        Self::from_grid(self.grid.map(|l| perm[l]), self.k)
    }

    /// Number of 4-connected regions of equal label.
    pub fn count_components(&self) -> usize {
        let (w, h) = self.dims();
        let labels = self.data();
        let mut seen = vec![false; labels.len()];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..labels.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                let l = labels[i];
                let mut visit = |j: usize| {
                    if !seen[j] && labels[j] == l {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
        }
        count
    }
}

/// Gaussian parameters `(mu_l, sigma_l)` for each class `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassParams {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl ClassParams {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.len() != sigma.len() {
            return Err(Error::ClassCountMismatch(format!(
                "{} means and {} standard deviations",
                mu.len(),
                sigma.len()
            )));
        }
        if let Some(m) = mu.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig(format!("class mean {m} is not finite")));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s >= SIGMA_FLOOR)) {
            return Err(Error::InvalidConfig(format!(
                "class sigma {s} is below the floor {SIGMA_FLOOR}"
            )));
        }
        Ok(ClassParams { mu, sigma })
    }

    /// Like [`ClassParams::new`] but raises each sigma to [`SIGMA_FLOOR`].
    pub fn floored(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let sigma = sigma
            .into_iter()
            .map(|s| if s.is_nan() { s } else { s.max(SIGMA_FLOOR) })
            .collect();
        Self::new(mu, sigma)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.mu.len()
    }

    #[inline]
    pub fn mu(&self, l: usize) -> f64 {
        self.mu[l]
    }

    #[inline]
    pub fn sigma(&self, l: usize) -> f64 {
        self.sigma[l]
    }

    pub fn mus(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// Rows reordered so that new class `perm[l]` gets old class `l`'s parameters.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k() {
            return Err(Error::ClassCountMismatch(format!(
                "permutation has {} entries for k = {}",
                perm.len(),
                self.k()
            )));
        }
        let mut mu = vec![0.0; self.k()];
        let mut sigma = vec![0.0; self.k()];
        for (old, &new) in perm.iter().enumerate() {
            mu[new] = self.mu[old];
            sigma[new] = self.sigma[old];
        }
        Self::new(mu, sigma)
    }
}

//! Rectangular cell-centered grids with inclusion masks, plus the scalar and
//! vector fields stored on them.
//!
//! Cells are addressed by a flat index in row-major order with the *last*
//! axis fastest. The cell with multi-index `(i_0, .., i_{n-1})` has center
//! `origin[d] + (i_d + 0.5) * h`. Lebesgue measure of a cell set is
//! `count * h^n`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("shape mismatch: field has {got} entries, grid expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("mask selects no cells")]
    EmptyMask,
    #[error("point {0:?} lies outside the grid box")]
    OutOfDomain(Vec<f64>),
}

/// A uniform rectangular grid of cells in `R^n` with a per-cell inclusion
/// mask describing the open set the computation lives on.
#[derive(Debug, Clone)]
pub struct GridDomain {
    dims: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    mask: Vec<bool>,
}

impl GridDomain {
    pub fn new(
        dims: Vec<usize>,
        origin: Vec<f64>,
        h: f64,
        mask: Vec<bool>,
    ) -> Result<Self, GridError> {
        if h <= 0.0 || !h.is_finite() {
            return Err(GridError::BadSpacing(h));
        }
        if origin.len() != dims.len() {
            return Err(GridError::ShapeMismatch {
                expected: dims.len(),
                got: origin.len(),
            });
        }
        let count: usize = dims.iter().product();
        if mask.len() != count {
            return Err(GridError::ShapeMismatch {
                expected: count,
                got: mask.len(),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(GridError::EmptyMask);
        }
        Ok(GridDomain {
            dims,
            origin,
            h,
            mask,
        })
    }

    /// Fully masked box `[origin, origin + dims*h]`.
    pub fn rect(dims: &[usize], origin: &[f64], h: f64) -> Result<Self, GridError> {
        let count = dims.iter().product();
        GridDomain::new(dims.to_vec(), origin.to_vec(), h, vec![true; count])
    }

    /// Fully masked box `[lo, hi]^n` with `cells` cells per axis.
    pub fn cube(n: usize, lo: f64, hi: f64, cells: usize) -> Result<Self, GridError> {
        let h = (hi - lo) / cells as f64;
        GridDomain::rect(&vec![cells; n], &vec![lo; n], h)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of cells, masked or not.
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.n() as i32)
    }

    pub fn is_masked(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn masked_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.mask[i])
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.n());
        let mut idx = 0;
        for (d, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.dims[d]);
            idx = idx * self.dims[d] + i;
        }
        idx
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let n = self.n();
        let mut out = vec![0; n];
        for d in (0..n).rev() {
            out[d] = idx % self.dims[d];
            idx /= self.dims[d];
        }
        out
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.multi(idx)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.origin[d] + (i as f64 + 0.5) * self.h)
            .collect()
    }

    /// In-grid neighbor along `axis` shifted by `step`; `None` when the shift
    /// leaves the index box.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let mut m = self.multi(idx);
        let i = m[axis] as isize + step;
        if i < 0 || i as usize >= self.dims[axis] {
            return None;
        }
        m[axis] = i as usize;
        Some(self.index(&m))
    }

    /// Neighbor shifted by a full offset vector, masked cells only.
    pub fn masked_offset(&self, idx: usize, offset: &[isize]) -> Option<usize> {
        let mut m = self.multi(idx);
        for (d, &s) in offset.iter().enumerate() {
            let i = m[d] as isize + s;
            if i < 0 || i as usize >= self.dims[d] {
                return None;
            }
            m[d] = i as usize;
        }
        let j = self.index(&m);
        if self.mask[j] {
            Some(j)
        } else {
            None
        }
    }

    /// Masked cell with all 2n axis neighbors masked.
    pub fn is_interior(&self, idx: usize) -> bool {
        if !self.mask[idx] {
            return false;
        }
        for axis in 0..self.n() {
            for step in [-1, 1] {
                match self.neighbor(idx, axis, step) {
                    Some(j) if self.mask[j] => {}
                    _ => return false,
                }
            }
        }
        true
    }

    /// Masked cells that touch the complement; these carry Dirichlet data in
    /// the solvers.
    pub fn boundary_cells(&self) -> Vec<usize> {
        self.masked_cells().filter(|&i| !self.is_interior(i)).collect()
    }

    /// Flat index of the masked cell whose center is nearest to `y`.
    pub fn nearest_cell(&self, y: &[f64]) -> Result<usize, GridError> {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for i in self.masked_cells() {
            let c = self.center(i);
            let d: f64 = c.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best.ok_or_else(|| GridError::OutOfDomain(y.to_vec()))
    }

    /// Euclidean distance from `y` to the boundary of the masked region
    /// (exact for full rectangular masks, conservative otherwise).
    pub fn boundary_distance(&self, y: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for (dd, &cells) in self.dims.iter().enumerate() {
            let lo = self.origin[dd];
            let hi = self.origin[dd] + cells as f64 * self.h;
            d = d.min(y[dd] - lo).min(hi - y[dd]);
        }
        if self.mask.iter().all(|&m| m) {
            return d.max(0.0);
        }
        // general masks: distance to the nearest unmasked cell, minus half a
        // cell for its near face
        for i in 0..self.len() {
            if !self.mask[i] {
                let c = self.center(i);
                let dist = c
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d = d.min(dist - 0.5 * self.h);
            }
        }
        d.max(0.0)
    }
}

/// Real-valued function sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridDomain) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &GridDomain, v: f64) -> Self {
        ScalarField {
            values: vec![v; grid.len()],
        }
    }

    pub fn from_fn(grid: &GridDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        ScalarField { values }
    }

    pub fn from_values(grid: &GridDomain, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(ScalarField { values })
    }

    /// Crate-internal constructor for values produced cell-by-cell.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise combination of two fields.
    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len());
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs_over(&self, cells: &[usize]) -> f64 {
        cells.iter().fold(0.0, |m, &i| m.max(self.values[i].abs()))
    }

    pub fn max_abs_masked(&self, grid: &GridDomain) -> f64 {
        grid.masked_cells()
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }
}

/// `R^n`-valued function sampled at cell centers, components interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    n: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &GridDomain) -> Self {
        VectorField {
            n: grid.n(),
            values: vec![0.0; grid.n() * grid.len()],
        }
    }

    pub fn from_fn(grid: &GridDomain, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * grid.len());
        for i in 0..grid.len() {
            let v = f(&grid.center(i));
            assert_eq!(v.len(), n);
            values.extend_from_slice(&v);
        }
        VectorField { n, values }
    }

    pub fn from_values(grid: &GridDomain, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n() * grid.len() {
            return Err(GridError::ShapeMismatch {
                expected: grid.n() * grid.len(),
                got: values.len(),
            });
        }
        Ok(VectorField {
            n: grid.n(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        self.values.len() / self.n
    }

    #[inline]
    pub fn get(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.n..(idx + 1) * self.n]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: &[f64]) {
        self.values[idx * self.n..(idx + 1) * self.n].copy_from_slice(v);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cellwise map producing a scalar field (e.g. a pointwise norm).
    pub fn map_to_scalar(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let values = (0..self.cell_count()).map(|i| f(self.get(i))).collect();
        ScalarField { values }
    }

    pub fn scale_cellwise(&self, s: &ScalarField) -> VectorField {
        assert_eq!(self.cell_count(), s.len());
        let mut out = self.clone();
        for i in 0..self.cell_count() {
            let f = s.get(i);
            for c in 0..self.n {
                out.values[i * self.n + c] *= f;
            }
        }
        out
    }
}

//! Grid-sampled symmetric nonnegative definite form fields `Q(x)` together
//! with their cellwise square roots.

use crate::grid::{GridDomain, ScalarField, VectorField};
use crate::linalg::{self, SymMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("form sample at cell {cell} is invalid: {source}")]
    InvalidForm {
        cell: usize,
        source: linalg::LinalgError,
    },
    #[error("expected {expected} matrix entries per cell, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// The degenerate principal part: one symmetric nonnegative `n x n` matrix
/// per grid cell, stored row-major with stride `n^2`, plus the cellwise
/// square root computed once at construction.
#[derive(Debug, Clone)]
pub struct QuadraticFormField {
    n: usize,
    mats: Vec<f64>,
    sqrts: Vec<f64>,
}

impl QuadraticFormField {
    /// Builds from a per-cell matrix callback; every masked cell is
    /// validated (symmetry and nonnegativity) and its square root cached.
    pub fn from_fn(
        grid: &GridDomain,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self, FormError> {
        let n = grid.n();
        let stride = n * n;
        let mut mats = vec![0.0; stride * grid.len()];
        let mut sqrts = vec![0.0; stride * grid.len()];
        for idx in 0..grid.len() {
            let entries = f(&grid.center(idx));
            if entries.len() != stride {
                return Err(FormError::ShapeMismatch {
                    expected: stride,
                    got: entries.len(),
                });
            }
            mats[idx * stride..(idx + 1) * stride].copy_from_slice(&entries);
            if grid.is_masked(idx) {
                let sym = SymMatrix::from_rows(n, &entries)
                    .map_err(|source| FormError::InvalidForm { cell: idx, source })?;
                let root =
                    linalg::matrix_sqrt(&sym).map_err(|source| FormError::InvalidForm {
                        cell: idx,
                        source,
                    })?;
                for i in 0..n {
                    for j in 0..n {
                        sqrts[idx * stride + i * n + j] = root.matrix()[(i, j)];
                    }
                }
            }
        }
        Ok(QuadraticFormField { n, mats, sqrts })
    }

    pub fn identity(grid: &GridDomain) -> Self {
        let n = grid.n();
        Self::from_fn(grid, |_| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0;
            }
            m
        })
        .expect("identity form is valid")
    }

    /// Constant diagonal form.
    pub fn scaled(grid: &GridDomain, diag: &[f64]) -> Result<Self, FormError> {
        let n = grid.n();
        let d = diag.to_vec();
        Self::from_fn(grid, move |_| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = d[i % d.len()];
            }
            m
        })
    }

    /// Grushin-type field: identity except the last axis, which carries the
    /// weight `|x_1|^(2*alpha)` and so vanishes on the hyperplane `x_1 = 0`.
    pub fn grushin(grid: &GridDomain, alpha: f64) -> Self {
        let n = grid.n();
        Self::from_fn(grid, move |x| {
            let mut m = vec![0.0; n * n];
            for i in 0..n - 1 {
                m[i * n + i] = 1.0;
            }
            m[(n - 1) * n + (n - 1)] = x[0].abs().powf(2.0 * alpha);
            m
        })
        .expect("grushin form is valid")
    }

    /// Scalar-weighted isotropic form `w(x) * I` (used by the p-Laplacian
    /// fixed point).
    pub fn from_scalar_weight(grid: &GridDomain, w: &ScalarField) -> Result<Self, FormError> {
        let n = grid.n();
        let stride = n * n;
        let mut mats = vec![0.0; stride * grid.len()];
        let mut sqrts = vec![0.0; stride * grid.len()];
        for idx in 0..grid.len() {
            let v = w.get(idx);
            if v < 0.0 && grid.is_masked(idx) {
                return Err(FormError::InvalidForm {
                    cell: idx,
                    source: linalg::LinalgError::NotNonnegDefinite(v),
                });
            }
            for i in 0..n {
                mats[idx * stride + i * n + i] = v;
                sqrts[idx * stride + i * n + i] = v.max(0.0).sqrt();
            }
        }
        Ok(QuadraticFormField { n, mats, sqrts })
    }

    /// Builds from raw per-cell matrix entries (stride `n^2`, row-major),
    /// the layout used by the binary field format.
    pub fn from_cell_entries(grid: &GridDomain, entries: Vec<f64>) -> Result<Self, FormError> {
        let n = grid.n();
        let stride = n * n;
        if entries.len() != stride * grid.len() {
            return Err(FormError::ShapeMismatch {
                expected: stride * grid.len(),
                got: entries.len(),
            });
        }
        let mut mats = vec![0.0; stride * grid.len()];
        let mut sqrts = vec![0.0; stride * grid.len()];
        for idx in 0..grid.len() {
            let sl = &entries[idx * stride..(idx + 1) * stride];
            mats[idx * stride..(idx + 1) * stride].copy_from_slice(sl);
            if grid.is_masked(idx) {
                let sym = SymMatrix::from_rows(n, sl)
                    .map_err(|source| FormError::InvalidForm { cell: idx, source })?;
                let root =
                    linalg::matrix_sqrt(&sym).map_err(|source| FormError::InvalidForm {
                        cell: idx,
                        source,
                    })?;
                for i in 0..n {
                    for j in 0..n {
                        sqrts[idx * stride + i * n + j] = root.matrix()[(i, j)];
                    }
                }
            }
        }
        Ok(QuadraticFormField { n, mats, sqrts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entries(&self, idx: usize) -> &[f64] {
        let s = self.n * self.n;
        &self.mats[idx * s..(idx + 1) * s]
    }

    #[inline]
    pub fn sqrt_entries(&self, idx: usize) -> &[f64] {
        let s = self.n * self.n;
        &self.sqrts[idx * s..(idx + 1) * s]
    }

    pub fn sym(&self, idx: usize) -> SymMatrix {
        SymMatrix::from_rows(self.n, self.entries(idx)).expect("validated at construction")
    }

    /// `⟨Q(x) v, v⟩` at one cell.
    #[inline]
    pub fn quad(&self, idx: usize, v: &[f64]) -> f64 {
        let n = self.n;
        let m = self.entries(idx);
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += m[i * n + j] * v[j];
            }
            acc += row * v[i];
        }
        acc
    }

    /// `Q(x) v` at one cell.
    pub fn apply(&self, idx: usize, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = self.entries(idx);
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += m[i * n + j] * v[j];
            }
            out[i] = row;
        }
    }

    /// `sqrt(Q(x)) v` at one cell.
    pub fn sqrt_apply(&self, idx: usize, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = self.sqrt_entries(idx);
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += m[i * n + j] * v[j];
            }
            out[i] = row;
        }
    }

    /// `|sqrt(Q(x)) v|` at one cell; equals `sqrt(⟨Qv,v⟩)` up to rounding
    /// but is evaluated through the cached root for cellwise exactness.
    #[inline]
    pub fn sqrt_len(&self, idx: usize, v: &[f64]) -> f64 {
        let n = self.n;
        let m = self.sqrt_entries(idx);
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += m[i * n + j] * v[j];
            }
            acc += row * row;
        }
        acc.sqrt()
    }

    /// Cellwise `|sqrt(Q) g|` for a vector field.
    pub fn sqrt_len_field(&self, g: &VectorField) -> ScalarField {
        let mut out = Vec::with_capacity(g.cell_count());
        for i in 0..g.cell_count() {
            out.push(self.sqrt_len(i, g.get(i)));
        }
        ScalarField::from_raw(out)
    }

    /// Midpoint sample for the edge between two cells: the average of the
    /// endpoint matrices (second-order accurate for smooth fields).
    pub fn edge_matrix(&self, a: usize, b: usize) -> Vec<f64> {
        self.entries(a)
            .iter()
            .zip(self.entries(b))
            .map(|(x, y)| 0.5 * (x + y))
            .collect()
    }

    pub fn max_abs(&self, grid: &GridDomain) -> f64 {
        let s = self.n * self.n;
        grid.masked_cells().fold(0.0f64, |acc, i| {
            self.mats[i * s..(i + 1) * s]
                .iter()
                .fold(acc, |a, &v| a.max(v.abs()))
        })
    }

    /// Pointwise PSD order `self <= other` on masked cells, checked on a
    /// deterministic sphere sample.
    pub fn dominated_by(&self, other: &QuadraticFormField, grid: &GridDomain) -> bool {
        let dirs = linalg::sphere_points(self.n, 32);
        for i in grid.masked_cells() {
            for d in &dirs {
                if self.quad(i, d) > other.quad(i, d) + 1e-12 {
                    return false;
                }
            }
        }
        true
    }
}

//! Pointwise symmetric-matrix machinery: square roots, kernel bases,
//! equivalence maps between comparable forms, and subunit decompositions.
//!
//! All operations are pure functions of value inputs and safe to call
//! concurrently. Dimensions are expected to stay small (n ≲ 16).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Eigenvalues in `[-TOL_PSD_DEFAULT, 0)` are clamped to zero before taking
/// square roots; grid-sampled forms accumulate rounding at this level.
pub const TOL_PSD_DEFAULT: f64 = 1e-10;

/// Relative singular-value threshold for numerical kernels.
pub const TOL_RANK_DEFAULT: f64 = 1e-8;

/// Default number of deterministic sphere samples for predicate checks.
pub const SPHERE_SAMPLES_DEFAULT: usize = 256;

/// Condition numbers of the invertible block beyond this are flagged in
/// equivalence-map results.
pub const COND_FLAG_THRESHOLD: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {dev:.3e}")]
    NotSymmetric { i: usize, j: usize, dev: f64 },
    #[error("matrix is not nonnegative definite: eigenvalue {0:.6e}")]
    NotNonnegDefinite(f64),
    #[error("kernels differ: dim ker Q = {dim_q}, dim ker H = {dim_h}, alignment gap {gap:.3e}")]
    KernelsDiffer { dim_q: usize, dim_h: usize, gap: f64 },
    #[error("equivalence with constant {c} violated at a sampled direction: ratio {ratio:.6e}")]
    EquivalenceViolated { c: f64, ratio: f64 },
    #[error("vector is not subunit for the form: {0}")]
    NotSubunit(String),
    #[error("equivalence constant must satisfy C >= 1, got {0}")]
    InvalidConstant(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Symmetric nonnegative definite matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates symmetry (`1e-12` relative) and nonnegativity within
    /// `tol_psd`.
    pub fn new(m: DMatrix<f64>, tol_psd: f64) -> Result<Self, LinalgError> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let dev = (m[(i, j)] - m[(j, i)]).abs();
                if dev > 1e-12 * scale.max(1.0) {
                    return Err(LinalgError::NotSymmetric { i, j, dev });
                }
            }
        }
        // symmetrize exactly so downstream eigensolves see a bitwise
        // symmetric matrix
        let mut s = m.clone();
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        let min_eig = sym_eigen(&s).0.first().copied().unwrap_or(0.0);
        if min_eig < -tol_psd * scale.max(1.0) {
            return Err(LinalgError::NotNonnegDefinite(min_eig));
        }
        Ok(SymMatrix { m: s })
    }

    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        SymMatrix::new(DMatrix::from_row_slice(n, n, entries), TOL_PSD_DEFAULT)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self, LinalgError> {
        SymMatrix::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(d)),
            TOL_PSD_DEFAULT,
        )
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn quad(&self, xi: &[f64]) -> f64 {
        let v = DVector::from_row_slice(xi);
        (&self.m * &v).dot(&v)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.m * DVector::from_row_slice(v)).as_slice().to_vec()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// Vector field value at one point, subunit with respect to a form:
/// `(t·ξ)² ≤ ⟨Qξ,ξ⟩` for all ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct SubunitVector {
    pub t: Vec<f64>,
}

impl SubunitVector {
    /// Checks the subunit predicate against `q` before wrapping.
    pub fn new(q: &SymMatrix, t: Vec<f64>) -> Result<Self, LinalgError> {
        if is_subunit(q, &t, SPHERE_SAMPLES_DEFAULT) {
            Ok(SubunitVector { t })
        } else {
            Err(LinalgError::NotSubunit(format!(
                "subunit test failed for t = {:?}",
                t
            )))
        }
    }
}

/// Symmetric eigendecomposition with deterministic ordering: eigenvalues
/// ascending (stable sort), eigenvectors re-orthonormalized by Gram-Schmidt
/// in index order so degenerate clusters come out reproducibly.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    // Gram-Schmidt in index order
    for k in 0..n {
        let mut col = vecs.column(k).clone_owned();
        for j in 0..k {
            let prev = vecs.column(j);
            let dot = col.dot(&prev);
            col -= prev * dot;
        }
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        // fix an overall sign: largest-magnitude entry positive
        let mut piv = 0;
        for i in 0..n {
            if col[i].abs() > col[piv].abs() {
                piv = i;
            }
        }
        if col[piv] < 0.0 {
            col = -col;
        }
        vecs.set_column(k, &col);
    }
    (vals, vecs)
}

/// Unique symmetric nonnegative square root. Eigenvalues in
/// `[-tol_psd, 0)` are clamped to zero; anything lower is rejected.
pub fn matrix_sqrt(q: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let n = q.n();
    let scale = q.max_abs().max(1.0);
    let (vals, vecs) = sym_eigen(&q.m);
    let mut d = DMatrix::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        if l < -TOL_PSD_DEFAULT * scale {
            return Err(LinalgError::NotNonnegDefinite(l));
        }
        d[(i, i)] = l.max(0.0).sqrt();
    }
    let r = &vecs * d * vecs.transpose();
    let mut s = r.clone();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = 0.5 * (r[(i, j)] + r[(j, i)]);
        }
    }
    Ok(SymMatrix { m: s })
}

/// Orthonormal basis of the numerical kernel: eigenvectors whose eigenvalue
/// lies below `tol_rank * max(lambda_max, tol_rank)`.
pub fn kernel_basis(q: &SymMatrix, tol_rank: f64) -> Result<Vec<Vec<f64>>, LinalgError> {
    let (vals, vecs) = sym_eigen(&q.m);
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = tol_rank * lmax.max(tol_rank);
    let mut out = Vec::new();
    for (i, &l) in vals.iter().enumerate() {
        if l <= cutoff {
            out.push(vecs.column(i).as_slice().to_vec());
        }
    }
    Ok(out)
}

/// Numerical rank with the same threshold convention as [`kernel_basis`].
pub fn numerical_rank(q: &SymMatrix, tol_rank: f64) -> usize {
    q.n() - kernel_basis(q, tol_rank).map(|k| k.len()).unwrap_or(0)
}

/// Result of the equivalence-map construction.
#[derive(Debug, Clone)]
pub struct EquivalenceMap {
    /// Invertible matrix with `M^T H M = Q`, `sqrt(H) M = sqrt(Q)`.
    pub m: DMatrix<f64>,
    /// Condition number of the invertible block of `Q`.
    pub condition: f64,
    /// Set when `condition` exceeds [`COND_FLAG_THRESHOLD`]; the map is still
    /// returned but downstream reports should carry the flag.
    pub ill_conditioned: bool,
}

/// Builds the invertible matrix `M` with `Q = M^T H M` and
/// `sqrt(Q) = sqrt(H) M = M^T sqrt(H)` for two forms comparable with
/// constant `C`, following the block construction: invertible case
/// `M = sqrt(H)^{-1} sqrt(Q)`, singular case via a common-kernel
/// block diagonalization.
pub fn equivalence_map(
    q: &SymMatrix,
    h: &SymMatrix,
    c: f64,
) -> Result<EquivalenceMap, LinalgError> {
    if c < 1.0 {
        return Err(LinalgError::InvalidConstant(c));
    }
    let n = q.n();
    if h.n() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "Q is {}x{} but H is {}x{}",
            n,
            n,
            h.n(),
            h.n()
        )));
    }

    // kernels must agree as subspaces
    let kq = kernel_basis(q, TOL_RANK_DEFAULT)?;
    let kh = kernel_basis(h, TOL_RANK_DEFAULT)?;
    let gap = projector_gap(n, &kq, &kh);
    if kq.len() != kh.len() || gap > 1e-7 {
        return Err(LinalgError::KernelsDiffer {
            dim_q: kq.len(),
            dim_h: kh.len(),
            gap,
        });
    }

    // spot-check the two-sided comparison on a deterministic sphere sample
    for xi in sphere_points(n, SPHERE_SAMPLES_DEFAULT) {
        let qv = q.quad(&xi);
        let hv = h.quad(&xi);
        let scale = qv.abs().max(hv.abs()).max(1e-300);
        let slack = 1e-9 * scale.max(1.0);
        if hv < qv / c - slack || hv > c * qv + slack {
            let ratio = if qv.abs() > 0.0 { hv / qv } else { f64::INFINITY };
            return Err(LinalgError::EquivalenceViolated { c, ratio });
        }
    }

    let k = kq.len();
    if k == n {
        return Ok(EquivalenceMap {
            m: DMatrix::identity(n, n),
            condition: 1.0,
            ill_conditioned: false,
        });
    }

    // Orthonormal basis: kernel vectors first, then the range eigenvectors
    // of H. Rows of O express coordinates in that basis.
    let (hvals, hvecs) = sym_eigen(&h.m);
    let lmax = hvals.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = TOL_RANK_DEFAULT * lmax.max(TOL_RANK_DEFAULT);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for (i, &l) in hvals.iter().enumerate() {
        if l <= cutoff {
            basis.push(hvecs.column(i).clone_owned());
        }
    }
    for (i, &l) in hvals.iter().enumerate() {
        if l > cutoff {
            basis.push(hvecs.column(i).clone_owned());
        }
    }
    let mut o = DMatrix::zeros(n, n);
    for (r, v) in basis.iter().enumerate() {
        for j in 0..n {
            o[(r, j)] = v[j];
        }
    }

    let nr = n - k;
    let restrict = |a: &DMatrix<f64>| -> DMatrix<f64> {
        let mut b = DMatrix::zeros(nr, nr);
        for i in 0..nr {
            for j in 0..nr {
                let vi = basis[k + i].clone();
                let vj = basis[k + j].clone();
                b[(i, j)] = (a * vj).dot(&vi);
            }
        }
        // symmetrize the projected block
        let bt = b.transpose();
        0.5 * (b + bt)
    };
    let q1 = restrict(&q.m);
    let h1 = restrict(&h.m);

    let (q1_vals, _) = sym_eigen(&q1);
    let lmin = q1_vals.first().copied().unwrap_or(0.0).max(1e-300);
    let lmax1 = q1_vals.last().copied().unwrap_or(0.0).max(1e-300);
    let condition = lmax1 / lmin;

    // invertible-case construction on the common range
    let sqrt_h1 = sym_pow(&h1, 0.5);
    let inv_sqrt_h1 = sym_pow(&h1, -0.5);
    let sqrt_q1 = {
        let s = sym_pow(&q1, 0.5);
        s
    };
    let _ = sqrt_h1;
    let m1 = inv_sqrt_h1 * sqrt_q1;

    let mut block = DMatrix::identity(n, n);
    for i in 0..nr {
        for j in 0..nr {
            block[(k + i, k + j)] = m1[(i, j)];
        }
    }
    let m = o.transpose() * block * o;
    Ok(EquivalenceMap {
        m,
        condition,
        ill_conditioned: condition > COND_FLAG_THRESHOLD,
    })
}

/// Frobenius gap between the orthogonal projectors onto two subspaces given
/// by orthonormal spanning sets; zero iff the subspaces coincide.
fn projector_gap(n: usize, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let proj = |vs: &[Vec<f64>]| -> DMatrix<f64> {
        let mut p = DMatrix::zeros(n, n);
        for v in vs {
            let dv = DVector::from_row_slice(v);
            p += &dv * dv.transpose();
        }
        p
    };
    (proj(a) - proj(b)).norm()
}

/// Symmetric power via eigendecomposition; negative powers treat eigenvalues
/// below the rank cutoff as zero.
fn sym_pow(a: &DMatrix<f64>, pow: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(a);
    let n = a.nrows();
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = TOL_RANK_DEFAULT * lmax.max(TOL_RANK_DEFAULT);
    let mut d = DMatrix::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        d[(i, i)] = if l > cutoff {
            l.powf(pow)
        } else if pow >= 0.0 {
            l.max(0.0).powf(pow)
        } else {
            0.0
        };
    }
    &vecs * d * vecs.transpose()
}

/// Pseudoinverse of `sqrt(Q)` vanishing on the kernel (the projection-style
/// construction used for subunit decompositions).
pub fn pseudo_sqrt_inverse(q: &SymMatrix, tol_rank: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(&q.m);
    let n = q.n();
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = tol_rank * lmax.max(tol_rank);
    let mut d = DMatrix::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        d[(i, i)] = if l > cutoff { 1.0 / l.sqrt() } else { 0.0 };
    }
    &vecs * d * vecs.transpose()
}

/// Variant acting as the identity on the kernel; `sqrt(Q) * N` is then the
/// orthogonal projection onto the range.
pub fn range_completion_inverse(q: &SymMatrix, tol_rank: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(&q.m);
    let n = q.n();
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = tol_rank * lmax.max(tol_rank);
    let mut d = DMatrix::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        d[(i, i)] = if l > cutoff { 1.0 / l.sqrt() } else { 1.0 };
    }
    &vecs * d * vecs.transpose()
}

/// Writes a subunit vector as `T = sqrt(Q) V` with `|V| <= 1`.
///
/// `V = N T` where `N` is the pseudoinverse of `sqrt(Q)`; a component of `T`
/// in the kernel of `Q` contradicts subunitness and is rejected.
pub fn subunit_decompose(q: &SymMatrix, t: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = q.n();
    if t.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "vector has {} entries for an {}x{} form",
            t.len(),
            n,
            n
        )));
    }
    let tnorm: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    for kv in kernel_basis(q, TOL_RANK_DEFAULT)? {
        let dot: f64 = kv.iter().zip(t).map(|(a, b)| a * b).sum();
        if dot.abs() > 1e-7 * (1.0 + tnorm) {
            return Err(LinalgError::NotSubunit(format!(
                "kernel component of magnitude {:.3e}",
                dot.abs()
            )));
        }
    }
    let nmat = pseudo_sqrt_inverse(q, TOL_RANK_DEFAULT);
    let v = nmat * DVector::from_row_slice(t);
    let vnorm = v.norm();
    if vnorm > 1.0 + 1e-10 {
        return Err(LinalgError::NotSubunit(format!(
            "decomposed length |V| = {:.12} exceeds 1",
            vnorm
        )));
    }
    Ok(v.as_slice().to_vec())
}

/// Subunit predicate: `(t·ξ)² ≤ ⟨Qξ,ξ⟩` on a deterministic sphere sample
/// (axis directions first), together with orthogonality to the kernel and
/// the decomposed-length test `|N t| ≤ 1`.
pub fn is_subunit(q: &SymMatrix, t: &[f64], nsamples: usize) -> bool {
    let n = q.n();
    if t.len() != n {
        return false;
    }
    let tnorm: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tnorm == 0.0 {
        return true;
    }
    for xi in sphere_points(n, nsamples) {
        let dot: f64 = t.iter().zip(&xi).map(|(a, b)| a * b).sum();
        let qv = q.quad(&xi);
        if dot * dot > qv * (1.0 + 1e-10) + 1e-14 * tnorm * tnorm {
            return false;
        }
    }
    match kernel_basis(q, TOL_RANK_DEFAULT) {
        Ok(kvs) => {
            for kv in kvs {
                let dot: f64 = kv.iter().zip(t).map(|(a, b)| a * b).sum();
                if dot.abs() > 1e-7 * (1.0 + tnorm) {
                    return false;
                }
            }
        }
        Err(_) => return false,
    }
    let nmat = pseudo_sqrt_inverse(q, TOL_RANK_DEFAULT);
    let v = nmat * DVector::from_row_slice(t);
    v.norm() <= 1.0 + 1e-10
}

/// Deterministic low-discrepancy points on the unit sphere. The 2n signed
/// axis directions come first so diagonal forms are probed exactly; the rest
/// are Halton-driven Gaussian directions, normalized.
pub fn sphere_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 17] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59];
    let mut pts = Vec::with_capacity(count);
    for d in 0..n {
        for sign in [1.0, -1.0] {
            if pts.len() >= count {
                return pts;
            }
            let mut e = vec![0.0; n];
            e[d] = sign;
            pts.push(e);
        }
    }
    let mut i = 1usize;
    while pts.len() < count {
        let mut v = vec![0.0; n];
        let pairs = n.div_ceil(2);
        for pair in 0..pairs {
            let u1 = halton(i as u64, PRIMES[2 * pair]);
            let u2 = halton(i as u64, PRIMES[2 * pair + 1]);
            let r = (-2.0 * u1.max(1e-16).ln()).sqrt();
            let a = 2.0 * std::f64::consts::PI * u2;
            v[2 * pair] = r * a.cos();
            if 2 * pair + 1 < n {
                v[2 * pair + 1] = r * a.sin();
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            pts.push(v);
        }
        i += 1;
    }
    pts
}

/// Radical-inverse (van der Corput / Halton) value of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymMatrix {
        // O diag(l) O^T with exact zeros outside the leading `rank` block, so
        // the kernel is numerically unambiguous
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let o = a.qr().q();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..rank {
            d[(i, i)] = rng.gen_range(0.3..3.0);
        }
        let q = &o * d * o.transpose();
        let qs = 0.5 * (&q + q.transpose());
        SymMatrix::new(qs, TOL_PSD_DEFAULT).unwrap()
    }

    #[test]
    fn sqrt_identity() {
        let q = SymMatrix::identity(3);
        let r = matrix_sqrt(&q).unwrap();
        assert!((r.matrix() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn sqrt_diagonal() {
        let q = SymMatrix::diagonal(&[4.0, 0.0]).unwrap();
        let r = matrix_sqrt(&q).unwrap();
        assert!((r.matrix()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(r.matrix()[(1, 1)].abs() < 1e-14);
    }

    #[test]
    fn sqrt_random_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_psd(&mut rng, 5, 5);
        let r = matrix_sqrt(&q).unwrap();
        let resid = (r.matrix() * r.matrix() - q.matrix()).norm();
        assert!(resid <= 1e-10 * (1.0 + q.max_abs()), "resid = {resid:e}");
    }

    #[test]
    fn sqrt_rejects_negative() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = SymMatrix::new(m, TOL_PSD_DEFAULT).unwrap_err();
        assert!(matches!(err, LinalgError::NotNonnegDefinite(_)));
    }

    #[test]
    fn kernel_full_rank_empty() {
        let q = SymMatrix::identity(2);
        assert!(kernel_basis(&q, TOL_RANK_DEFAULT).unwrap().is_empty());
    }

    #[test]
    fn kernel_axis() {
        let q = SymMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let k = kernel_basis(&q, TOL_RANK_DEFAULT).unwrap();
        assert_eq!(k.len(), 1);
        assert!((k[0][1].abs() - 1.0).abs() < 1e-12);
        assert!(k[0][0].abs() < 1e-12);
    }

    #[test]
    fn kernel_rank_one() {
        // vv^T for a random unit v has a 2-dimensional kernel orthogonal to v
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v = [0.0; 3];
        for x in &mut v {
            *x = rng.gen_range(-1.0..1.0);
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        let m = DMatrix::from_fn(3, 3, |i, j| v[i] * v[j]);
        let q = SymMatrix::new(m, TOL_PSD_DEFAULT).unwrap();
        let k = kernel_basis(&q, TOL_RANK_DEFAULT).unwrap();
        assert_eq!(k.len(), 2);
        for kv in &k {
            let dot: f64 = kv.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-9);
            let qk: f64 = q.apply(kv).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(qk < TOL_RANK_DEFAULT * 10.0);
        }
    }

    fn check_equivalence_posts(q: &SymMatrix, h: &SymMatrix, c: f64, m: &DMatrix<f64>) {
        let n = q.n();
        let scale = q.max_abs().max(h.max_abs()).max(1.0);
        let back = m.transpose() * h.matrix() * m;
        assert!(
            (back - q.matrix()).norm() <= 1e-9 * scale,
            "M^T H M != Q"
        );
        let sq = matrix_sqrt(q).unwrap();
        let sh = matrix_sqrt(h).unwrap();
        assert!(
            (sh.matrix() * m - sq.matrix()).norm() <= 1e-9 * scale.sqrt().max(1.0),
            "sqrt(H) M != sqrt(Q)"
        );
        for xi in sphere_points(n, 64) {
            let mtxi = m.transpose() * DVector::from_row_slice(&xi);
            let len = mtxi.norm();
            assert!(len >= 1.0 / c.sqrt() - 1e-9 && len <= c.sqrt() + 1e-9);
        }
    }

    #[test]
    fn equivalence_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_psd(&mut rng, 4, 4);
        let em = equivalence_map(&q, &q, 1.0).unwrap();
        assert!((em.m.clone() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-7);
        check_equivalence_posts(&q, &q, 1.0, &em.m);
    }

    #[test]
    fn equivalence_scaled_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_psd(&mut rng, 3, 2);
        let h = SymMatrix::new(q.matrix() * 4.0, TOL_PSD_DEFAULT).unwrap();
        let em = equivalence_map(&q, &h, 4.0).unwrap();
        check_equivalence_posts(&q, &h, 4.0, &em.m);
        // acts as 1/2 on the range, identity on the kernel
        for kv in kernel_basis(&q, TOL_RANK_DEFAULT).unwrap() {
            let mk = &em.m * DVector::from_row_slice(&kv);
            assert!((mk - DVector::from_row_slice(&kv)).norm() < 1e-7);
        }
    }

    #[test]
    fn equivalence_block_example() {
        let q = SymMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let h = SymMatrix::diagonal(&[2.0, 0.0]).unwrap();
        let em = equivalence_map(&q, &h, 2.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 / 2.0_f64.sqrt(), 0.0, 0.0, 1.0]);
        assert!((em.m.clone() - expected).norm() < 1e-12);
        check_equivalence_posts(&q, &h, 2.0, &em.m);
    }

    #[test]
    fn equivalence_detects_kernel_mismatch() {
        let q = SymMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let h = SymMatrix::identity(2);
        let err = equivalence_map(&q, &h, 100.0).unwrap_err();
        assert!(matches!(err, LinalgError::KernelsDiffer { .. }));
    }

    #[test]
    fn equivalence_detects_violation() {
        let q = SymMatrix::diagonal(&[1.0, 1.0]).unwrap();
        let h = SymMatrix::diagonal(&[9.0, 1.0]).unwrap();
        let err = equivalence_map(&q, &h, 2.0).unwrap_err();
        assert!(matches!(err, LinalgError::EquivalenceViolated { .. }));
    }

    #[test]
    fn subunit_decompose_identity() {
        let q = SymMatrix::identity(2);
        let v = subunit_decompose(&q, &[1.0, 0.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn subunit_decompose_degenerate() {
        let q = SymMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let v = subunit_decompose(&q, &[0.5, 0.0]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-10 && v[1].abs() < 1e-12);
        let err = subunit_decompose(&q, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, LinalgError::NotSubunit(_)));
    }

    #[test]
    fn is_subunit_examples() {
        let q = SymMatrix::identity(2);
        assert!(is_subunit(&q, &[0.0, 0.0], 64));
        assert!(!is_subunit(&q, &[1.1, 0.0], 64));
        // Grushin sample at x1 = 0.3
        let g = SymMatrix::diagonal(&[1.0, 0.09]).unwrap();
        assert!(is_subunit(&g, &[0.0, 0.3], 256));
        assert!(!is_subunit(&g, &[0.0, 0.31], 256));
    }

    #[test]
    fn sphere_points_are_unit() {
        for n in [1usize, 2, 3, 5] {
            let pts = sphere_points(n, 64);
            assert_eq!(pts.len(), 64);
            for p in pts {
                let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decompose_roundtrip_on_range() {
        // decompose(Q, sqrt(Q) V) reproduces the range component of V
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let q = random_psd(&mut rng, 4, 3);
            let sq = matrix_sqrt(&q).unwrap();
            let mut v: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1.0 {
                for x in &mut v {
                    *x /= norm;
                }
            }
            let t = sq.apply(&v);
            let v2 = subunit_decompose(&q, &t).unwrap();
            let t2 = sq.apply(&v2);
            let diff: f64 = t
                .iter()
                .zip(&t2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-8, "sqrt(Q)V' differs from sqrt(Q)V by {diff:e}");
        }
    }
}

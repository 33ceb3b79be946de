//! Householder reflections, modified Householder projections and their chains.
//!
//! A reflection about the hyperplane orthogonal to `u` maps `x` to
//! `x - 2<x, u>u`; a modified reflection (projection) with scalar `tau` maps
//! `x` to `x - tau <x, p>p`. Chains are applied in index order: entry 0 acts
//! on the input first, so the materialized matrix of `[v0, v1, ..., vn]` is
//! `H(vn) ... H(v1) H(v0)`.
//!
//! Unit vectors are stored as free raw parameters and normalized on use.
//! Everything here is pure and `f64`.

use thiserror::Error;

/// Raw vectors with a norm below this are rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Projection scalars closer than this to 1 are treated as singular.
pub const SINGULAR_TAU_TOL: f64 = 1e-9;
/// Tolerance used by [`decompose_rotation`] to accept an input as a rotation.
pub const ROTATION_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HouseholderError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate vector: norm {norm:e} is below {DEGENERATE_NORM:e}")]
    Degenerate { norm: f64 },
    #[error("a rotation needs a nonempty chain of even length, got {len}")]
    NotEvenChain { len: usize },
    #[error("projection entry {index} has tau = {tau} and is not invertible")]
    NonInvertible { index: usize, tau: f64 },
    #[error("not a rotation: orthogonality error {orthogonality:e}, determinant {determinant}")]
    NotARotation { orthogonality: f64, determinant: f64 },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

pub type Result<T> = std::result::Result<T, HouseholderError>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Writes `raw / |raw|` into `out` and returns `|raw|`.
#[inline]
pub fn normalize_into(raw: &[f64], out: &mut [f64]) -> Result<f64> {
    let n = norm(raw);
    if !(n >= DEGENERATE_NORM) {
        return Err(HouseholderError::Degenerate { norm: n });
    }
    for (o, r) in out.iter_mut().zip(raw) {
        *o = r / n;
    }
    Ok(n)
}

/// In-place reflection by an already normalized axis.
#[inline]
pub fn reflect_in_place(unit: &[f64], x: &mut [f64]) {
    let c = 2.0 * dot(x, unit);
    for (xi, ui) in x.iter_mut().zip(unit) {
        *xi -= c * ui;
    }
}

/// In-place modified reflection by an already normalized axis.
#[inline]
pub fn project_in_place(unit: &[f64], tau: f64, x: &mut [f64]) {
    let c = tau * dot(x, unit);
    for (xi, pi) in x.iter_mut().zip(unit) {
        *xi -= c * pi;
    }
}

/// A direction in `R^k`, stored unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    raw: Vec<f64>,
}

impl UnitVector {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(HouseholderError::ZeroDimension);
        }
        let n = norm(&raw);
        if !(n >= DEGENERATE_NORM) {
            return Err(HouseholderError::Degenerate { norm: n });
        }
        Ok(Self { raw })
    }

    /// The `i`-th standard basis vector of `R^k`.
    pub fn basis(k: usize, i: usize) -> Self {
        let mut raw = vec![0.0; k];
        raw[i] = 1.0;
        Self { raw }
    }

    pub fn dim(&self) -> usize {
        self.raw.len()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn normalized(&self) -> Vec<f64> {
        let n = norm(&self.raw);
        self.raw.iter().map(|r| r / n).collect()
    }
}

/// An ordered sequence of reflections.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionChain {
    dim: usize,
    vectors: Vec<UnitVector>,
}

impl ReflectionChain {
    pub fn new(dim: usize, vectors: Vec<UnitVector>) -> Result<Self> {
        if dim == 0 {
            return Err(HouseholderError::ZeroDimension);
        }
        for v in &vectors {
            check_dim(dim, v.dim())?;
        }
        Ok(Self { dim, vectors })
    }

    /// Builds a chain from raw rows, each of length `dim`.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let vectors = rows
            .iter()
            .map(|r| UnitVector::new(r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[UnitVector] {
        &self.vectors
    }

    /// This chain followed by `next` (this one is applied first).
    pub fn then(&self, next: &ReflectionChain) -> Result<ReflectionChain> {
        check_dim(self.dim, next.dim)?;
        let mut vectors = self.vectors.clone();
        vectors.extend(next.vectors.iter().cloned());
        Ok(ReflectionChain { dim: self.dim, vectors })
    }
}

/// One modified Householder factor `I - tau p p^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEntry {
    pub axis: UnitVector,
    pub tau: f64,
}

/// An ordered sequence of modified reflections; empty means identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionChain {
    dim: usize,
    entries: Vec<ProjectionEntry>,
}

impl ProjectionChain {
    pub fn new(dim: usize, entries: Vec<ProjectionEntry>) -> Result<Self> {
        if dim == 0 {
            return Err(HouseholderError::ZeroDimension);
        }
        for e in &entries {
            check_dim(dim, e.axis.dim())?;
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn from_pairs(dim: usize, pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        let entries = pairs
            .iter()
            .map(|(axis, tau)| {
                Ok(ProjectionEntry { axis: UnitVector::new(axis.clone())?, tau: *tau })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ProjectionEntry] {
        &self.entries
    }
}

/// Dense row-major `k x k` matrix. Only used for checks and decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_row_major(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(HouseholderError::ZeroDimension);
        }
        check_dim(k * k, data.len())?;
        Ok(Self { k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let mut data = Vec::with_capacity(k * k);
        for r in rows {
            check_dim(k, r.len())?;
            data.extend_from_slice(r);
        }
        Self::from_row_major(k, data)
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Self { k, data }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.k + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.k + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.k).map(|r| self.get(r, col)).collect()
    }

    pub fn transpose(&self) -> Self {
        let k = self.k;
        let mut out = Self::identity(k);
        for i in 0..k {
            for j in 0..k {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> Result<SquareMatrix> {
        check_dim(self.k, rhs.k)?;
        let k = self.k;
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for l in 0..k {
                let a = self.get(i, l);
                for j in 0..k {
                    data[i * k + j] += a * rhs.get(l, j);
                }
            }
        }
        Ok(SquareMatrix { k, data })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.k, x.len())?;
        Ok((0..self.k)
            .map(|i| dot(&self.data[i * self.k..(i + 1) * self.k], x))
            .collect())
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let k = self.k;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))
                .unwrap_or(col);
            if a[pivot * k + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..k {
                    a.swap(pivot * k + j, col * k + j);
                }
                det = -det;
            }
            let p = a[col * k + col];
            det *= p;
            for i in col + 1..k {
                let f = a[i * k + col] / p;
                if f != 0.0 {
                    for j in col..k {
                        a[i * k + j] -= f * a[col * k + j];
                    }
                }
            }
        }
        det
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_distance(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `|Q^T Q - I|` under the entrywise max norm.
    pub fn orthogonality_error(&self) -> f64 {
        let qtq = self.transpose().matmul(self).expect("same dimension");
        qtq.max_abs_distance(&Self::identity(self.k))
    }

    fn orthogonality_error_frobenius(&self) -> f64 {
        let qtq = self.transpose().matmul(self).expect("same dimension");
        qtq.frobenius_distance(&Self::identity(self.k))
    }
}

#[inline]
fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(HouseholderError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// `x - 2<x, u>u` for the normalized `u`.
pub fn reflect(u: &UnitVector, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(u.dim(), x.len())?;
    let mut unit = vec![0.0; u.dim()];
    normalize_into(u.raw(), &mut unit)?;
    let mut out = x.to_vec();
    reflect_in_place(&unit, &mut out);
    Ok(out)
}

/// `x - tau <x, p>p` for the normalized `p`.
pub fn project(p: &UnitVector, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(p.dim(), x.len())?;
    let mut unit = vec![0.0; p.dim()];
    normalize_into(p.raw(), &mut unit)?;
    let mut out = x.to_vec();
    project_in_place(&unit, tau, &mut out);
    Ok(out)
}

/// Applies the chain's reflections in index order.
pub fn apply_rotation_chain(chain: &ReflectionChain, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(chain.dim(), x.len())?;
    chain.vectors().iter().try_fold(x.to_vec(), |acc, u| reflect(u, &acc))
}

/// Applies the chain's modified reflections in index order.
pub fn apply_projection_chain(chain: &ProjectionChain, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(chain.dim(), x.len())?;
    chain
        .entries()
        .iter()
        .try_fold(x.to_vec(), |acc, e| project(&e.axis, e.tau, &acc))
}

fn materialize_with<F>(k: usize, apply: F) -> Result<SquareMatrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut m = SquareMatrix::identity(k);
    for col in 0..k {
        let mut e = vec![0.0; k];
        e[col] = 1.0;
        let image = apply(&e)?;
        for (row, v) in image.into_iter().enumerate() {
            m.set(row, col, v);
        }
    }
    Ok(m)
}

/// The matrix `H(u_last) ... H(u_first)` acting like [`apply_rotation_chain`].
pub fn materialize_rotation(chain: &ReflectionChain) -> Result<SquareMatrix> {
    if chain.is_empty() || chain.len() % 2 != 0 {
        return Err(HouseholderError::NotEvenChain { len: chain.len() });
    }
    materialize_with(chain.dim(), |e| apply_rotation_chain(chain, e))
}

/// The matrix acting like [`apply_projection_chain`].
pub fn materialize_projection(chain: &ProjectionChain) -> Result<SquareMatrix> {
    materialize_with(chain.dim(), |e| apply_projection_chain(chain, e))
}

/// Reverses the chain; since each reflection is an involution the result
/// materializes to the transpose of the input.
pub fn invert_rotation_chain(chain: &ReflectionChain) -> ReflectionChain {
    ReflectionChain {
        dim: chain.dim,
        vectors: chain.vectors.iter().rev().cloned().collect(),
    }
}

/// Reverses the chain and maps each `tau` to `tau / (tau - 1)`.
pub fn invert_projection_chain(chain: &ProjectionChain) -> Result<ProjectionChain> {
    let mut entries = Vec::with_capacity(chain.len());
    for (index, e) in chain.entries().iter().enumerate().rev() {
        if (e.tau - 1.0).abs() <= SINGULAR_TAU_TOL {
            return Err(HouseholderError::NonInvertible { index, tau: e.tau });
        }
        entries.push(ProjectionEntry { axis: e.axis.clone(), tau: e.tau / (e.tau - 1.0) });
    }
    Ok(ProjectionChain { dim: chain.dim, entries })
}

/// Factors a rotation into exactly `2 * floor(k / 2)` reflections.
///
/// Householder QR triangularizes `Q` with reflections `v_1 .. v_c` chosen so
/// the first `k - 1` diagonal entries become `+1`; the orthogonal triangular
/// remainder is `diag(1, .., 1, s)`. When `s = -1` a reflection about `e_k`
/// clears it. Then `Q = H(v_1) ... H(v_c')`, so the chain applies `v_c'`
/// first. Short factorizations are padded with repeated pairs.
pub fn decompose_rotation(q: &SquareMatrix) -> Result<ReflectionChain> {
    let k = q.dim();
    let orthogonality = q.orthogonality_error_frobenius();
    let determinant = q.determinant();
    if !(orthogonality < ROTATION_TOL) || !((determinant - 1.0).abs() < ROTATION_TOL) {
        return Err(HouseholderError::NotARotation { orthogonality, determinant });
    }

    let mut a = q.clone();
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k.saturating_sub(1) {
        let x: Vec<f64> = (j..k).map(|i| a.get(i, j)).collect();
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        if tail_sq == 0.0 && x[0] >= 0.0 {
            continue;
        }
        let alpha = (x[0] * x[0] + tail_sq).sqrt();
        // v = x - alpha e_1, with the first entry rewritten to avoid cancellation.
        let mut v = vec![0.0; k];
        v[j] = if x[0] <= 0.0 { x[0] - alpha } else { -tail_sq / (x[0] + alpha) };
        v[j + 1..].copy_from_slice(&x[1..]);
        let vn = norm(&v);
        if vn < DEGENERATE_NORM {
            continue;
        }
        v.iter_mut().for_each(|vi| *vi /= vn);
        for col in 0..k {
            let c = 2.0 * (j..k).map(|i| v[i] * a.get(i, col)).sum::<f64>();
            for i in j..k {
                a.set(i, col, a.get(i, col) - c * v[i]);
            }
        }
        factors.push(v);
    }
    if a.get(k - 1, k - 1) < 0.0 {
        let mut e = vec![0.0; k];
        e[k - 1] = 1.0;
        factors.push(e);
    }

    let target = 2 * (k / 2);
    debug_assert!(factors.len() % 2 == 0 && factors.len() <= target);
    let mut vectors: Vec<UnitVector> =
        factors.into_iter().rev().map(|raw| UnitVector { raw }).collect();
    while vectors.len() < target {
        let pad = UnitVector::basis(k, 0);
        vectors.push(pad.clone());
        vectors.push(pad);
    }
    ReflectionChain::new(k, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn uv(v: &[f64]) -> UnitVector {
        UnitVector::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn quarter_turn() -> ReflectionChain {
        ReflectionChain::new(2, vec![uv(&[1.0, 0.0]), uv(&[H, H])]).unwrap()
    }

    #[test]
    fn reflect_examples() {
        close(&reflect(&uv(&[1.0, 0.0]), &[3.0, 4.0]).unwrap(), &[-3.0, 4.0], 1e-15);
        close(&reflect(&uv(&[0.6, 0.8]), &[1.0, 0.0]).unwrap(), &[0.28, -0.96], 1e-15);
        let x = [1.5, -2.0, 0.25];
        let u = uv(&[-3.0, 4.0, -0.5]);
        close(&reflect(&u, &[-3.0, 4.0, -0.5]).unwrap(), &[3.0, -4.0, 0.5], 1e-14);
        close(&reflect(&u, &reflect(&u, &x).unwrap()).unwrap(), &x, 1e-12);
    }

    #[test]
    fn reflect_errors() {
        assert!(matches!(
            reflect(&uv(&[1.0, 0.0]), &[1.0, 2.0, 3.0]),
            Err(HouseholderError::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(UnitVector::new(vec![0.0, 1e-13]), Err(HouseholderError::Degenerate { .. })));
        assert!(UnitVector::new(vec![]).is_err());
    }

    #[test]
    fn project_examples() {
        let p = uv(&[0.3, -1.2]);
        let x = [2.0, 5.0];
        close(&project(&p, 0.0, &x).unwrap(), &x, 0.0);
        close(&project(&p, 2.0, &x).unwrap(), &reflect(&p, &x).unwrap(), 1e-15);
        close(&project(&uv(&[1.0, 0.0]), 1.0, &[3.0, 4.0]).unwrap(), &[0.0, 4.0], 0.0);
    }

    #[test]
    fn rotation_chain_examples() {
        let c = quarter_turn();
        close(&apply_rotation_chain(&c, &[1.0, 0.0]).unwrap(), &[0.0, 1.0], 1e-15);
        close(&apply_rotation_chain(&c, &[0.0, 1.0]).unwrap(), &[-1.0, 0.0], 1e-15);
        let u = uv(&[0.2, -0.7, 1.1]);
        let same = ReflectionChain::new(3, vec![u.clone(), u]).unwrap();
        let x = [1.0, 2.0, 3.0];
        close(&apply_rotation_chain(&same, &x).unwrap(), &x, 1e-14);
        assert!(apply_rotation_chain(&c, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn projection_chain_examples() {
        let empty = ProjectionChain::identity(2);
        assert_eq!(apply_projection_chain(&empty, &[5.0, 6.0]).unwrap(), vec![5.0, 6.0]);
        let one = ProjectionChain::from_pairs(2, &[(vec![1.0, 0.0], 2.0)]).unwrap();
        close(&apply_projection_chain(&one, &[3.0, 4.0]).unwrap(), &[-3.0, 4.0], 0.0);
        let two = ProjectionChain::from_pairs(2, &[(vec![1.0, 0.0], 0.5), (vec![0.0, 1.0], 0.5)])
            .unwrap();
        close(&apply_projection_chain(&two, &[2.0, 2.0]).unwrap(), &[1.0, 1.0], 0.0);
    }

    #[test]
    fn materialize_rotation_examples() {
        let m = materialize_rotation(&quarter_turn()).unwrap();
        close(m.as_slice(), &[0.0, -1.0, 1.0, 0.0], 1e-15);
        let u = uv(&[0.5, 0.5, -0.1, 2.0]);
        let same = ReflectionChain::new(4, vec![u.clone(), u]).unwrap();
        let id = materialize_rotation(&same).unwrap();
        assert!(id.max_abs_distance(&SquareMatrix::identity(4)) < 1e-14);
        let odd = ReflectionChain::new(2, vec![uv(&[1.0, 0.0])]).unwrap();
        assert_eq!(materialize_rotation(&odd), Err(HouseholderError::NotEvenChain { len: 1 }));
        let empty = ReflectionChain::new(2, vec![]).unwrap();
        assert!(materialize_rotation(&empty).is_err());
    }

    #[test]
    fn materialize_projection_examples() {
        let tau = 0.37;
        let m = materialize_projection(&ProjectionChain::from_pairs(2, &[(vec![1.0, 0.0], tau)]).unwrap())
            .unwrap();
        close(m.as_slice(), &[1.0 - tau, 0.0, 0.0, 1.0], 1e-15);
        assert_eq!(materialize_projection(&ProjectionChain::identity(3)).unwrap(), SquareMatrix::identity(3));
        let m = materialize_projection(&ProjectionChain::from_pairs(2, &[(vec![0.6, 0.8], 0.5)]).unwrap())
            .unwrap();
        close(m.as_slice(), &[0.82, -0.24, -0.24, 0.68], 1e-15);
        let chain = ProjectionChain::from_pairs(
            3,
            &[(vec![1.0, 2.0, 0.5], 0.3), (vec![-1.0, 0.1, 0.9], -1.7), (vec![0.2, 0.2, 1.0], 2.4)],
        )
        .unwrap();
        let det = materialize_projection(&chain).unwrap().determinant();
        assert!((det - 0.7 * 2.7 * -1.4).abs() < 1e-9, "{det}");
    }

    #[test]
    fn invert_rotation_examples() {
        let inv = invert_rotation_chain(&quarter_turn());
        assert_eq!(inv.vectors()[0], uv(&[H, H]));
        assert_eq!(inv.vectors()[1], uv(&[1.0, 0.0]));
        let m = materialize_rotation(&inv).unwrap();
        close(m.as_slice(), &[0.0, 1.0, -1.0, 0.0], 1e-15);
        let x = [0.3, -2.0];
        let back = apply_rotation_chain(&inv, &apply_rotation_chain(&quarter_turn(), &x).unwrap()).unwrap();
        close(&back, &x, 1e-15);
    }

    #[test]
    fn invert_projection_examples() {
        let p = vec![0.6, 0.8];
        let inv = invert_projection_chain(&ProjectionChain::from_pairs(2, &[(p.clone(), 2.0)]).unwrap())
            .unwrap();
        assert_eq!(inv.entries()[0].tau, 2.0);
        let inv = invert_projection_chain(&ProjectionChain::from_pairs(2, &[(p.clone(), 0.5)]).unwrap())
            .unwrap();
        assert_eq!(inv.entries()[0].tau, -1.0);
        assert_eq!(
            invert_projection_chain(&ProjectionChain::from_pairs(2, &[(p, 1.0)]).unwrap()),
            Err(HouseholderError::NonInvertible { index: 0, tau: 1.0 })
        );
    }

    #[test]
    fn decompose_identity_pads() {
        let chain = decompose_rotation(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(chain.len(), 2);
        let m = materialize_rotation(&chain).unwrap();
        assert!(m.max_abs_distance(&SquareMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn decompose_quarter_turn() {
        let q = SquareMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let chain = decompose_rotation(&q).unwrap();
        assert_eq!(chain.len(), 2);
        assert!(materialize_rotation(&chain).unwrap().frobenius_distance(&q) < 1e-10);
    }

    #[test]
    fn decompose_rejects_reflections_and_non_orthogonal() {
        let flip = SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(decompose_rotation(&flip), Err(HouseholderError::NotARotation { .. })));
        let shear = SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(decompose_rotation(&shear), Err(HouseholderError::NotARotation { .. })));
    }

    #[test]
    fn decompose_half_turns_and_permutations() {
        // -I in even dimension and a cyclic permutation in odd dimension
        let mut neg = SquareMatrix::identity(4);
        for i in 0..4 {
            neg.set(i, i, -1.0);
        }
        let chain = decompose_rotation(&neg).unwrap();
        assert_eq!(chain.len(), 4);
        assert!(materialize_rotation(&chain).unwrap().frobenius_distance(&neg) < 1e-12);

        let cyc = SquareMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let chain = decompose_rotation(&cyc).unwrap();
        assert_eq!(chain.len(), 2);
        assert!(materialize_rotation(&chain).unwrap().frobenius_distance(&cyc) < 1e-12);
    }

    #[test]
    fn determinant_matches_hand_values() {
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![0.0, 3.0, 1.0], vec![1.0, 0.0, 1.0]])
            .unwrap();
        assert!((m.determinant() - 7.0).abs() < 1e-12);
        let swap = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(swap.determinant(), -1.0);
    }
}

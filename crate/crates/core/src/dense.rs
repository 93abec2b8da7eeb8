//! Brute-force dense reference for small tensors: unfolding, TTM, TTM
//! chains, a one-sided Jacobi SVD and a plain HOOI loop. It shares no index
//! arithmetic or linear algebra with the sparse engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{CoreTensor, TuckerModel};
use crate::tensor::SparseTensor;

/// Size limits for densification and for the SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseCaps {
    pub max_elems: usize,
    pub max_matrix_dim: usize,
}

impl Default for DenseCaps {
    fn default() -> Self {
        DenseCaps {
            max_elems: 10_000_000,
            max_matrix_dim: 2000,
        }
    }
}

impl DenseCaps {
    pub const ENV: &'static str = "TUCKER_DENSE_CAP";

    /// Reads `TUCKER_DENSE_CAP` as `elems` or `elems,dim`.
    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV) {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("{} must be `elems` or `elems,dim`, got {s:?}", Self::ENV));
        let mut caps = Self::default();
        let mut parts = s.split(',').map(str::trim);
        caps.max_elems = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if let Some(p) = parts.next() {
            caps.max_matrix_dim = p.parse().map_err(|_| bad())?;
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(caps)
    }

    fn check_elems(&self, dims: &[usize]) -> Result<usize> {
        let mut n: usize = 1;
        for &d in dims {
            n = n.checked_mul(d).ok_or(Error::CapExceeded {
                requested: usize::MAX,
                cap: self.max_elems,
            })?;
        }
        if n > self.max_elems {
            return Err(Error::CapExceeded {
                requested: n,
                cap: self.max_elems,
            });
        }
        Ok(n)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.values[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn from_columns(rows: usize, cols: &[Vec<f64>]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |M^T M - I|`
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul(self).expect("square Gram");
        let mut worst: f64 = 0.0;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_major(self.rows, self.cols, self.values.clone())
    }
}

impl From<&Matrix> for DenseMatrix {
    fn from(m: &Matrix) -> Self {
        DenseMatrix {
            rows: m.rows(),
            cols: m.cols(),
            values: m.as_slice().to_vec(),
        }
    }
}

/// Dense tensor with the first mode varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        DenseTensor { dims, values: vec![0.0; n] }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.dims.len());
        let mut acc = 1;
        for &d in &self.dims {
            s.push(acc);
            acc *= d;
        }
        s
    }

    pub fn index_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut pos: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&d| {
                let i = pos % d;
                pos /= d;
                i
            })
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.index_of(idx)]
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

pub fn densify(t: &SparseTensor, caps: &DenseCaps) -> Result<DenseTensor> {
    caps.check_elems(t.dims())?;
    let mut d = DenseTensor::zeros(t.dims().to_vec());
    for e in t.elements() {
        let pos = d.index_of(&e.coords);
        d.values[pos] += e.value;
    }
    Ok(d)
}

/// Column of the mode-`n` unfolding holding a cell: the other modes in
/// ascending order, lower modes varying fastest.
fn column_of(idx: &[usize], dims: &[usize], n: usize) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for j in 0..dims.len() {
        if j != n {
            col += idx[j] * stride;
            stride *= dims[j];
        }
    }
    col
}

fn check_mode(n: usize, order: usize) -> Result<()> {
    if n >= order {
        return Err(Error::ModeOutOfRange { mode: n + 1, order });
    }
    Ok(())
}

/// `L_n x prod_{j != n} L_j` unfolding.
pub fn dense_unfold(d: &DenseTensor, n: usize) -> Result<DenseMatrix> {
    check_mode(n, d.dims.len())?;
    let cols = d.values.len() / d.dims[n].max(1);
    let mut m = DenseMatrix::zeros(d.dims[n], cols);
    for pos in 0..d.values.len() {
        let idx = d.multi_index(pos);
        m.set(idx[n], column_of(&idx, &d.dims, n), d.values[pos]);
    }
    Ok(m)
}

/// Inverse of [`dense_unfold`] for a tensor of shape `dims`.
pub fn refold(m: &DenseMatrix, n: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_mode(n, dims.len())?;
    let mut d = DenseTensor::zeros(dims.to_vec());
    if m.rows != dims[n] || m.rows * m.cols != d.values.len() {
        return Err(Error::Shape(format!("{}x{} matrix does not refold to {dims:?} along mode {}", m.rows, m.cols, n + 1)));
    }
    for pos in 0..d.values.len() {
        let idx = d.multi_index(pos);
        d.values[pos] = m.get(idx[n], column_of(&idx, dims, n));
    }
    Ok(d)
}

/// `T x_n A` with `A` of shape `K x L_n`.
pub fn dense_ttm(d: &DenseTensor, n: usize, a: &DenseMatrix) -> Result<DenseTensor> {
    check_mode(n, d.dims.len())?;
    if a.cols != d.dims[n] {
        return Err(Error::Shape(format!(
            "TTM along mode {} needs {} columns, matrix has {}",
            n + 1,
            d.dims[n],
            a.cols
        )));
    }
    let product = a.mul(&dense_unfold(d, n)?)?;
    let mut dims = d.dims.clone();
    dims[n] = a.rows;
    refold(&product, n, &dims)
}

/// `T x_j F_j^T` for every mode `j != skip`, in ascending order. Pass
/// `skip >= N` to multiply along every mode.
pub fn dense_ttm_chain(d: &DenseTensor, skip: usize, factors: &[DenseMatrix]) -> Result<DenseTensor> {
    if factors.len() != d.dims.len() {
        return Err(Error::Shape(format!("{} factors for a {}-mode tensor", factors.len(), d.dims.len())));
    }
    let mut out = d.clone();
    for (j, f) in factors.iter().enumerate() {
        if j != skip {
            out = dense_ttm(&out, j, &f.transpose())?;
        }
    }
    Ok(out)
}

/// Dense `Z^(n)` of a sparse tensor.
pub fn dense_penultimate(t: &SparseTensor, factors: &[DenseMatrix], n: usize, caps: &DenseCaps) -> Result<DenseMatrix> {
    let d = densify(t, caps)?;
    dense_unfold(&dense_ttm_chain(&d, n, factors)?, n)
}

/// Thin SVD `M = U diag(s) V^T` with `r = min(rows, cols)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit_or_complement(candidate: Option<Vec<f64>>, basis: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut tries = candidate.into_iter().chain((0..len).map(|i| {
        let mut e = vec![0.0; len];
        e[i] = 1.0;
        e
    }));
    loop {
        let mut v = tries.next().expect("basis already spans the space");
        for _ in 0..2 {
            for b in basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// One-sided Jacobi SVD.
pub fn dense_svd(m: &DenseMatrix, caps: &DenseCaps) -> Result<DenseSvd> {
    let biggest = m.rows.max(m.cols);
    if biggest > caps.max_matrix_dim {
        return Err(Error::CapExceeded {
            requested: biggest,
            cap: caps.max_matrix_dim,
        });
    }
    if m.rows < m.cols {
        let t = jacobi(&m.transpose());
        return Ok(DenseSvd { u: t.v, s: t.s, v: t.u });
    }
    let out = jacobi(m);
    if cfg!(debug_assertions) {
        let tol = 1e-10 * m.frobenius().max(f64::MIN_POSITIVE);
        let mut us = out.u.clone();
        for i in 0..us.rows {
            for j in 0..us.cols {
                us.values[i * us.cols + j] *= out.s[j];
            }
        }
        let rebuilt = us.mul(&out.v.transpose())?;
        let residual = DenseMatrix {
            rows: m.rows,
            cols: m.cols,
            values: rebuilt.values.iter().zip(&m.values).map(|(a, b)| a - b).collect(),
        };
        assert!(residual.frobenius() <= tol || m.frobenius() == 0.0, "Jacobi reconstruction residual");
        assert!(out.u.orthonormality_error() < 1e-10, "Jacobi U not orthonormal");
    }
    Ok(out)
}

/// Tall or square input.
fn jacobi(m: &DenseMatrix) -> DenseSvd {
    let (rows, cols) = (m.rows, m.cols);
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols_of in [&mut a, &mut v] {
                    let (lo, hi) = cols_of.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (xp, yq) = (*x, *y);
                        *x = c * xp - s * yq;
                        *y = s * xp + c * yq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let top = norms.iter().copied().fold(0.0, f64::max);
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut s = Vec::with_capacity(cols);
    let mut vs = Vec::with_capacity(cols);
    for &j in &order {
        let sigma = norms[j];
        let candidate = (sigma > 1e-13 * top && sigma > 0.0).then(|| a[j].iter().map(|x| x / sigma).collect());
        let unit = unit_or_complement(candidate, &us, rows);
        us.push(unit);
        s.push(sigma);
        vs.push(v[j].clone());
    }
    DenseSvd {
        u: DenseMatrix::from_columns(rows, &us),
        s,
        v: DenseMatrix::from_columns(cols, &vs),
    }
}

/// Leading `k` left singular vectors, completed with orthonormal complement
/// vectors when `k` exceeds the thin SVD's width.
pub fn leading_left(svd: &DenseSvd, k: usize) -> DenseMatrix {
    let rows = svd.u.rows;
    let mut cols: Vec<Vec<f64>> = (0..k.min(svd.u.cols)).map(|j| svd.u.column(j)).collect();
    while cols.len() < k {
        let next = unit_or_complement(None, &cols, rows);
        cols.push(next);
    }
    DenseMatrix::from_columns(rows, &cols)
}

/// Flips each column so its first entry of magnitude above `1e-12` is positive.
pub fn canonicalize_signs(m: &mut DenseMatrix) {
    for j in 0..m.cols {
        if let Some(i) = (0..m.rows).find(|&i| m.get(i, j).abs() > 1e-12) {
            if m.get(i, j) < 0.0 {
                for r in 0..m.rows {
                    let v = m.get(r, j);
                    m.set(r, j, -v);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHooiResult {
    pub factors: Vec<DenseMatrix>,
    pub core: DenseTensor,
    pub fit_history: Vec<f64>,
    /// `[invocation][mode]`, leading `K_n` values.
    pub singular_values: Vec<Vec<Vec<f64>>>,
}

impl DenseHooiResult {
    pub fn to_model(&self) -> TuckerModel {
        TuckerModel::new(
            CoreTensor::new(self.core.dims.clone(), self.core.values.clone()),
            self.factors.iter().map(DenseMatrix::to_matrix).collect(),
        )
    }

    pub fn final_fit(&self) -> f64 {
        self.fit_history.last().copied().unwrap_or(1.0)
    }
}

fn dense_fit(t_norm2: f64, core: &DenseTensor) -> f64 {
    if t_norm2 == 0.0 {
        return 0.0;
    }
    (t_norm2 - core.norm_squared()).max(0.0).sqrt() / t_norm2.sqrt()
}

/// HOOI with dense primitives, sequential factor updates, fit recorded
/// after every invocation.
pub fn dense_hooi(
    t: &DenseTensor,
    core: &[usize],
    init: &[DenseMatrix],
    invocations: usize,
    caps: &DenseCaps,
) -> Result<DenseHooiResult> {
    if core.len() != t.dims.len() || init.len() != t.dims.len() {
        return Err(Error::Shape("core lengths, factors and tensor order differ".into()));
    }
    for (n, f) in init.iter().enumerate() {
        if f.rows != t.dims[n] || f.cols != core[n] {
            return Err(Error::Shape(format!("initial factor {} is {}x{}", n + 1, f.rows, f.cols)));
        }
    }
    let t_norm2 = t.norm_squared();
    let mut factors = init.to_vec();
    let mut fit_history = Vec::with_capacity(invocations);
    let mut singular_values = Vec::with_capacity(invocations);
    for _ in 0..invocations {
        let mut per_mode = Vec::with_capacity(core.len());
        for n in 0..core.len() {
            let z = dense_unfold(&dense_ttm_chain(t, n, &factors)?, n)?;
            let svd = dense_svd(&z, caps)?;
            factors[n] = leading_left(&svd, core[n]);
            per_mode.push((0..core[n]).map(|j| svd.s.get(j).copied().unwrap_or(0.0)).collect());
        }
        singular_values.push(per_mode);
        let g = dense_ttm_chain(t, usize::MAX, &factors)?;
        fit_history.push(dense_fit(t_norm2, &g));
    }
    let core = dense_ttm_chain(t, usize::MAX, &factors)?;
    Ok(DenseHooiResult {
        factors,
        core,
        fit_history,
        singular_values,
    })
}

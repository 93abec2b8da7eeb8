//! Coordinate-format sparse tensors, slices, unfolding index arithmetic and
//! the per-element Kronecker contribution.
//!
//! All in-memory indices (modes, coordinates, slice indices, element ids) are
//! zero-based. The `.tns` reader and the report writers translate to the
//! one-based convention used in files.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One nonzero: zero-based coordinates and a finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub coords: Vec<usize>,
    pub value: f64,
}

impl Element {
    pub fn new(coords: Vec<usize>, value: f64) -> Self {
        Element { coords, value }
    }
}

/// Identifies the slice of all elements whose coordinate along `mode` equals `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SliceIndex {
    pub mode: usize,
    pub index: usize,
}

/// Sparse tensor in coordinate format.
///
/// Element ids are positions in ingestion order. Coordinates are stored flat,
/// `order` entries per element.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    dims: Vec<usize>,
    coords: Vec<u32>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Builds a tensor, merging duplicate coordinates by summation. The merged
    /// element keeps the id of the first occurrence.
    pub fn new(dims: Vec<usize>, elements: impl IntoIterator<Item = Element>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape(format!(
                "a tensor needs at least 2 modes, got {}",
                dims.len()
            )));
        }
        if let Some(m) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("mode {} has length 0", m + 1)));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Shape("mode length exceeds u32 range".into()));
        }
        let order = dims.len();
        let mut coords: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
        for (i, e) in elements.into_iter().enumerate() {
            if e.coords.len() != order {
                return Err(Error::Shape(format!(
                    "element {i} has {} coordinates, expected {order}",
                    e.coords.len()
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::Domain {
                    line: i + 1,
                    message: format!("non-finite value {}", e.value),
                });
            }
            for (m, (&c, &d)) in e.coords.iter().zip(&dims).enumerate() {
                if c >= d {
                    return Err(Error::Domain {
                        line: i + 1,
                        message: format!("coordinate {} exceeds mode {} length {d}", c + 1, m + 1),
                    });
                }
            }
            let key: Vec<u32> = e.coords.iter().map(|&c| c as u32).collect();
            match seen.get(&key) {
                Some(&id) => values[id] += e.value,
                None => {
                    seen.insert(key.clone(), values.len());
                    coords.extend_from_slice(&key);
                    values.push(e.value);
                }
            }
        }
        Ok(SparseTensor {
            dims,
            coords,
            values,
        })
    }

    /// Builds a tensor whose dims are the per-mode coordinate maxima.
    pub fn from_elements(elements: Vec<Element>) -> Result<Self> {
        let order = elements
            .first()
            .map(|e| e.coords.len())
            .ok_or_else(|| Error::Shape("cannot infer dims of an empty tensor".into()))?;
        let mut dims = vec![0usize; order];
        for e in &elements {
            for (d, &c) in dims.iter_mut().zip(&e.coords) {
                *d = (*d).max(c + 1);
            }
        }
        SparseTensor::new(dims, elements)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn coords(&self, id: usize) -> &[u32] {
        let n = self.order();
        &self.coords[id * n..(id + 1) * n]
    }

    pub fn coord(&self, id: usize, mode: usize) -> usize {
        self.coords[id * self.order() + mode] as usize
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn element(&self, id: usize) -> Element {
        Element {
            coords: self.coords(id).iter().map(|&c| c as usize).collect(),
            value: self.values[id],
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.nnz()).map(|id| self.element(id))
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode: mode + 1,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Groups element ids by their coordinate along `mode`.
    pub fn slices(&self, mode: usize) -> Result<SliceMap> {
        self.check_mode(mode)?;
        let len = self.dims[mode];
        let mut counts = vec![0usize; len];
        for id in 0..self.nnz() {
            counts[self.coord(id, mode)] += 1;
        }
        let mut start = vec![0usize; len + 1];
        for l in 0..len {
            start[l + 1] = start[l] + counts[l];
        }
        let mut fill = start.clone();
        let mut elems = vec![0u32; self.nnz()];
        for id in 0..self.nnz() {
            let l = self.coord(id, mode);
            elems[fill[l]] = id as u32;
            fill[l] += 1;
        }
        let mut slice_ids = Vec::new();
        let mut offsets = vec![0usize];
        for l in 0..len {
            if counts[l] > 0 {
                slice_ids.push(l as u32);
                offsets.push(start[l + 1]);
            }
        }
        Ok(SliceMap {
            mode,
            len,
            slice_ids,
            offsets,
            elems,
        })
    }
}

/// Nonempty slices of one mode. Element ids within a slice are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceMap {
    mode: usize,
    len: usize,
    slice_ids: Vec<u32>,
    offsets: Vec<usize>,
    elems: Vec<u32>,
}

impl SliceMap {
    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Mode length, counting empty slices.
    pub fn mode_len(&self) -> usize {
        self.len
    }

    pub fn nonempty_count(&self) -> usize {
        self.slice_ids.len()
    }

    /// Slice index of the `k`-th nonempty slice.
    pub fn slice_index(&self, k: usize) -> usize {
        self.slice_ids[k] as usize
    }

    pub fn members(&self, k: usize) -> &[u32] {
        &self.elems[self.offsets[k]..self.offsets[k + 1]]
    }

    /// `(slice index, element ids)` for every nonempty slice, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[u32])> + '_ {
        (0..self.nonempty_count()).map(move |k| (self.slice_index(k), self.members(k)))
    }

    pub fn get(&self, index: usize) -> Option<&[u32]> {
        self.slice_ids
            .binary_search(&(index as u32))
            .ok()
            .map(|k| self.members(k))
    }
}

/// Column of the mode-`mode` unfolding that holds the element at `coords`
/// (zero-based). Lower-numbered modes vary fastest.
pub fn unfolding_column(coords: &[usize], mode: usize, dims: &[usize]) -> usize {
    let mut column = 0;
    let mut stride = 1;
    for (j, (&c, &d)) in coords.iter().zip(dims).enumerate() {
        if j == mode {
            continue;
        }
        column += c * stride;
        stride *= d;
    }
    column
}

/// Inverse of [`unfolding_column`]: the coordinates of the fiber at `column`,
/// with `row` placed at position `mode`.
pub fn unfolding_coords(row: usize, column: usize, mode: usize, dims: &[usize]) -> Vec<usize> {
    let mut rest = column;
    dims.iter()
        .enumerate()
        .map(|(j, &d)| {
            if j == mode {
                row
            } else {
                let c = rest % d;
                rest /= d;
                c
            }
        })
        .collect()
}

/// Product of the factor widths of every mode except `skip_mode`.
pub fn contribution_width(factors: &[Matrix], skip_mode: usize) -> usize {
    factors
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != skip_mode)
        .map(|(_, f)| f.cols())
        .product()
}

/// Writes `value · (F_j[c_j, :] ⊗ ...)` over the kept modes into `out`.
/// The first kept mode varies fastest.
pub fn kron_contribution_into<C: Copy + Into<u64>>(
    coords: &[C],
    value: f64,
    skip_mode: usize,
    factors: &[Matrix],
    out: &mut [f64],
) {
    let mut filled = 1;
    out[0] = value;
    for (j, (f, &c)) in factors.iter().zip(coords).enumerate() {
        if j == skip_mode {
            continue;
        }
        let row = f.row(c.into() as usize);
        let width = row.len();
        // Expand in place, highest block first so unread entries are not clobbered.
        for k in (0..width).rev() {
            let r = row[k];
            for i in (0..filled).rev() {
                out[k * filled + i] = out[i] * r;
            }
        }
        filled *= width;
    }
    debug_assert_eq!(filled, out.len());
}

/// Contribution of element `e` to row `e.coords[skip_mode]` of the mode-`skip_mode`
/// penultimate matrix.
pub fn kron_contribution(e: &Element, skip_mode: usize, factors: &[Matrix]) -> Result<Vec<f64>> {
    if e.coords.len() != factors.len() {
        return Err(Error::Shape(format!(
            "element has {} coordinates but {} factors were given",
            e.coords.len(),
            factors.len()
        )));
    }
    if skip_mode >= factors.len() {
        return Err(Error::ModeOutOfRange {
            mode: skip_mode + 1,
            order: factors.len(),
        });
    }
    for (j, (f, &c)) in factors.iter().zip(&e.coords).enumerate() {
        if j != skip_mode && c >= f.rows() {
            return Err(Error::Shape(format!(
                "coordinate {} exceeds factor {} with {} rows",
                c + 1,
                j + 1,
                f.rows()
            )));
        }
    }
    let mut out = vec![0.0; contribution_width(factors, skip_mode)];
    let coords: Vec<u64> = e.coords.iter().map(|&c| c as u64).collect();
    kron_contribution_into(&coords, e.value, skip_mode, factors, &mut out);
    Ok(out)
}

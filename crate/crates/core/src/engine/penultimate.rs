//! Per-rank local copies of the penultimate matrix Z^(n), with empty rows
//! left out.

use super::exec::Executor;
use super::transfer::FactorAvailability;
use crate::error::{Error, Result};
use crate::layout::ModeLayout;
use crate::linalg::Matrix;
use crate::schemes::DistributionScheme;
use crate::tensor::{contribution_width, kron_contribution_into, SparseTensor};

/// One rank's truncated share of Z^(n).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPenultimate {
    pub rank: usize,
    pub mode: usize,
    /// `R_n^p x Khat_n`; row `i` belongs to slice `row_slices[i]`.
    pub rows: Matrix,
    pub row_slices: Vec<u32>,
}

impl LocalPenultimate {
    /// Scatters the local rows into a full `L_n x Khat_n` matrix.
    pub fn expand(&self, mode_len: usize) -> Matrix {
        let mut full = Matrix::zeros(mode_len, self.rows.cols());
        for (i, &l) in self.row_slices.iter().enumerate() {
            full.row_mut(l as usize).copy_from_slice(self.rows.row(i));
        }
        full
    }
}

/// Builds every rank's local penultimate for `mode` from scratch.
pub fn build_local_penultimates(
    t: &SparseTensor,
    scheme: &DistributionScheme,
    factors: &[Matrix],
    mode: usize,
) -> Result<Vec<LocalPenultimate>> {
    scheme.validate(t)?;
    check_factors(t, factors, mode)?;
    let layout = ModeLayout::new(t, scheme, mode)?;
    build_from_layout(t, &layout, factors, None, &Executor::serial())
}

pub(crate) fn check_factors(t: &SparseTensor, factors: &[Matrix], mode: usize) -> Result<()> {
    t.check_mode(mode)?;
    if factors.len() != t.order() {
        return Err(Error::Shape(format!(
            "{} factors for a {}-mode tensor",
            factors.len(),
            t.order()
        )));
    }
    for (j, (f, &len)) in factors.iter().zip(t.dims()).enumerate() {
        if j != mode && f.rows() != len {
            return Err(Error::Shape(format!(
                "factor {} has {} rows, mode length is {len}",
                j + 1,
                f.rows()
            )));
        }
    }
    Ok(())
}

pub(crate) fn build_from_layout(
    t: &SparseTensor,
    layout: &ModeLayout,
    factors: &[Matrix],
    availability: Option<&FactorAvailability>,
    exec: &Executor,
) -> Result<Vec<LocalPenultimate>> {
    let mode = layout.mode;
    let width = contribution_width(factors, mode);
    let built = exec.map(layout.ranks, |rank| -> Result<LocalPenultimate> {
        let rows = &layout.per_rank[rank];
        let mut local = Matrix::zeros(rows.len(), width);
        let mut buf = vec![0.0; width];
        for i in 0..rows.len() {
            for &e in rows.row_elements(i) {
                let e = e as usize;
                let coords = t.coords(e);
                if let Some(avail) = availability {
                    avail.check(rank, mode, coords)?;
                }
                kron_contribution_into(coords, t.value(e), mode, factors, &mut buf);
                for (acc, v) in local.row_mut(i).iter_mut().zip(&buf) {
                    *acc += v;
                }
            }
        }
        Ok(LocalPenultimate {
            rank,
            mode,
            rows: local,
            row_slices: rows.row_slices.clone(),
        })
    });
    built.into_iter().collect()
}

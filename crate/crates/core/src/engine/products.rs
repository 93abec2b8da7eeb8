//! The two matrix-vector products the Lanczos method asks for, answered from
//! the distributed local copies.

use super::exec::Executor;
use super::ledger::{Component, MessageLedger};
use super::ownership::RowOwnership;
use super::penultimate::LocalPenultimate;

/// `xout = Z · xin`. Every non-owner sharer of a row sends its partial sum
/// (one unit) to the owner. The result is indexed by slice and only
/// populated at owned rows.
pub fn oracle_matvec_x(
    locals: &[LocalPenultimate],
    ownership: &RowOwnership,
    xin: &[f64],
    ledger: &mut MessageLedger,
    exec: &Executor,
) -> Vec<f64> {
    let partial = exec.map(locals.len(), |p| {
        let z = &locals[p].rows;
        (0..z.rows())
            .map(|i| crate::linalg::dot(z.row(i), xin))
            .collect::<Vec<f64>>()
    });
    let mut xout = vec![0.0; ownership.mode_len()];
    for (p, (local, values)) in locals.iter().zip(&partial).enumerate() {
        for (&l, v) in local.row_slices.iter().zip(values) {
            let l = l as usize;
            if ownership.owner(l) != Some(p) {
                ledger.send(ownership.mode, Component::SvdX, p, 1);
            }
            xout[l] += v;
        }
    }
    xout
}

/// `yout = yin · Z`. Each owner sends `yin(l)` (one unit) to every other
/// sharer; the closing all-reduce of the partial answers is not charged.
pub fn oracle_matvec_y(
    locals: &[LocalPenultimate],
    ownership: &RowOwnership,
    yin: &[f64],
    ledger: &mut MessageLedger,
    exec: &Executor,
) -> Vec<f64> {
    for &l in ownership.owned_rows() {
        let l = l as usize;
        let owner = ownership.owner(l).expect("nonempty slice has an owner");
        let others = ownership.sharers(l).len() as u64 - 1;
        if others > 0 {
            ledger.send(ownership.mode, Component::SvdY, owner, others);
        }
    }
    let width = locals.first().map_or(0, |z| z.rows.cols());
    let partial = exec.map(locals.len(), |p| {
        let local = &locals[p];
        let mut out = vec![0.0; width];
        for (i, &l) in local.row_slices.iter().enumerate() {
            crate::linalg::axpy(yin[l as usize], local.rows.row(i), &mut out);
        }
        out
    });
    let mut yout = vec![0.0; width];
    for part in &partial {
        crate::linalg::axpy(1.0, part, &mut yout);
    }
    yout
}

//! Lite: a two-stage slice-to-rank assignment along one mode.
//!
//! Stage 1 walks the nonempty slices in increasing size order and deals them
//! out round-robin while every rank stays within the limit `ceil(nnz/P)`.
//! The first slice that would push its rank over the limit ends stage 1;
//! stage 2 then fills the ranks to the limit in order, splitting each
//! remaining slice over a run of contiguous ranks.

use super::{Policy, PolicyMode};
use crate::error::Result;
use crate::tensor::SparseTensor;

/// What happened while building a lite policy; used by behavioral checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LiteTrace {
    pub limit: usize,
    /// Slices in processing order (ascending size, ties by slice index).
    pub order: Vec<usize>,
    /// Number of slices placed whole by the round-robin stage.
    pub stage1_slices: usize,
    /// Stage-1 steps where the receiving rank was not among the least loaded.
    pub least_loaded_violations: usize,
    /// Ranks each stage-2 slice ended up on, in processing order.
    pub stage2_sharers: Vec<(usize, Vec<usize>)>,
}

pub fn lite_distribute(t: &SparseTensor, mode: usize, ranks: usize) -> Result<Policy> {
    lite_distribute_traced(t, mode, ranks).map(|(p, _)| p)
}

pub fn lite_distribute_traced(
    t: &SparseTensor,
    mode: usize,
    ranks: usize,
) -> Result<(Policy, LiteTrace)> {
    let slices = t.slices(mode)?;
    if ranks == 0 {
        return Policy::new(PolicyMode::Mode(mode), ranks, vec![]).map(|p| (p, LiteTrace::default()));
    }
    let nnz = t.nnz();
    let limit = nnz.div_ceil(ranks);

    let mut order: Vec<usize> = (0..slices.nonempty_count()).collect();
    order.sort_by_key(|&k| (slices.members(k).len(), slices.slice_index(k)));

    let mut assignment = vec![0u32; nnz];
    let mut loads = vec![0usize; ranks];
    let mut trace = LiteTrace {
        limit,
        order: order.iter().map(|&k| slices.slice_index(k)).collect(),
        ..LiteTrace::default()
    };

    // Stage 1: round-robin while the limit holds.
    let mut t_idx = 0;
    let mut p = 0;
    while t_idx < order.len() {
        let members = slices.members(order[t_idx]);
        if loads[p] + members.len() > limit {
            break;
        }
        if loads.iter().any(|&h| h < loads[p]) {
            trace.least_loaded_violations += 1;
        }
        for &e in members {
            assignment[e as usize] = p as u32;
        }
        loads[p] += members.len();
        t_idx += 1;
        p = (p + 1) % ranks;
    }
    trace.stage1_slices = t_idx;

    // Stage 2: fill ranks to the limit, splitting slices across contiguous ranks.
    let mut p = 0;
    let mut taken = 0; // elements of the current slice already placed
    let mut sharers: Vec<usize> = Vec::new();
    while p < ranks && t_idx < order.len() {
        let k = order[t_idx];
        let members = slices.members(k);
        let remaining = &members[taken..];
        let gap = limit - loads[p];
        if remaining.len() <= gap {
            for &e in remaining {
                assignment[e as usize] = p as u32;
            }
            loads[p] += remaining.len();
            if !remaining.is_empty() {
                sharers.push(p);
            }
            trace
                .stage2_sharers
                .push((slices.slice_index(k), std::mem::take(&mut sharers)));
            t_idx += 1;
            taken = 0;
        } else {
            // Ascending element id within the slice.
            for &e in &remaining[..gap] {
                assignment[e as usize] = p as u32;
            }
            loads[p] += gap;
            if gap > 0 {
                sharers.push(p);
            }
            taken += gap;
            p += 1;
        }
    }
    debug_assert_eq!(t_idx, order.len(), "ranks * limit >= nnz leaves no slice unplaced");

    let policy = Policy::new(PolicyMode::Mode(mode), ranks, assignment)?;
    Ok((policy, trace))
}

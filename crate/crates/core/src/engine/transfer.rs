//! Factor-row transfer after each mode's SVD, and the per-rank record of
//! which factor rows a rank currently holds.

use super::ledger::{Component, MessageLedger};
use super::ownership::RowOwnership;
use crate::error::{Error, Result};
use crate::layout::ModeLayout;
use crate::schemes::DistributionScheme;
use crate::tensor::SparseTensor;

/// Ranks that need each nonempty row of factor `mode` for later TTMs.
///
/// Uni-policy: the sharers of the slice. Multi-policy: every rank owning an
/// element of the slice under some other mode's policy.
pub fn row_requirers(t: &SparseTensor, scheme: &DistributionScheme, layout: &ModeLayout) -> Vec<Vec<u32>> {
    if scheme.is_uni_policy() {
        return layout.sharers.clone();
    }
    let mode = layout.mode;
    layout
        .slices
        .iter()
        .map(|(_, members)| {
            let mut ranks: Vec<u32> = Vec::new();
            for j in (0..t.order()).filter(|&j| j != mode) {
                let policy = scheme.policy(j);
                ranks.extend(members.iter().map(|&e| policy.rank_of(e as usize) as u32));
            }
            ranks.sort_unstable();
            ranks.dedup();
            ranks
        })
        .collect()
}

/// Which ranks hold the current version of each factor row. Before the first
/// transfer of a mode every rank holds every row (the bootstrap broadcast).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorAvailability {
    holders: Vec<Option<Vec<Vec<u32>>>>,
}

impl FactorAvailability {
    pub fn replicated(order: usize) -> Self {
        FactorAvailability {
            holders: vec![None; order],
        }
    }

    pub fn holds(&self, rank: usize, mode: usize, row: usize) -> bool {
        match &self.holders[mode] {
            None => true,
            Some(rows) => rows[row].binary_search(&(rank as u32)).is_ok(),
        }
    }

    /// Rows of factor `mode` held by `rank`.
    pub fn rows_held(&self, rank: usize, mode: usize, mode_len: usize) -> Vec<usize> {
        (0..mode_len).filter(|&l| self.holds(rank, mode, l)).collect()
    }

    /// Errors unless `rank` holds every factor row an element at `coords`
    /// needs when building the penultimate for `skip_mode`.
    pub(crate) fn check(&self, rank: usize, skip_mode: usize, coords: &[u32]) -> Result<()> {
        for (j, &c) in coords.iter().enumerate() {
            if j != skip_mode && !self.holds(rank, j, c as usize) {
                return Err(Error::MissingFactorRow {
                    rank,
                    mode: j + 1,
                    row: c as usize + 1,
                });
            }
        }
        Ok(())
    }
}

/// Sends each freshly computed row of factor `mode` from its owner to every
/// other rank that needs it, `core_len` units per row.
pub fn transfer_factor_rows(
    ownership: &RowOwnership,
    requirers: &[Vec<u32>],
    core_len: usize,
    availability: &mut FactorAvailability,
    ledger: &mut MessageLedger,
) -> u64 {
    let mode = ownership.mode;
    let mut rows = vec![Vec::new(); ownership.mode_len()];
    let mut units = 0u64;
    for (k, &l) in ownership.owned_rows().iter().enumerate() {
        let l = l as usize;
        let owner = ownership.owner(l).expect("nonempty slice has an owner") as u32;
        let mut holders = requirers[k].clone();
        let receivers = holders.iter().filter(|&&r| r != owner).count() as u64;
        if receivers > 0 {
            ledger.send(mode, Component::FactorTransfer, owner as usize, receivers * core_len as u64);
            units += receivers * core_len as u64;
        }
        if let Err(pos) = holders.binary_search(&owner) {
            holders.insert(pos, owner);
        }
        rows[l] = holders;
    }
    ledger.record_transfer(mode);
    availability.holders[mode] = Some(rows);
    units
}

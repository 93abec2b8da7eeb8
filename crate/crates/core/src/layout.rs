//! Sharing structure of a scheme along one mode: which rows each rank holds,
//! which elements feed each row, and which ranks share each slice.

use crate::error::Result;
use crate::schemes::DistributionScheme;
use crate::tensor::{SliceMap, SparseTensor};

/// Rows of one rank's local penultimate matrix and the elements feeding them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankRows {
    /// Slice index of each local row, strictly increasing.
    pub row_slices: Vec<u32>,
    offsets: Vec<usize>,
    elems: Vec<u32>,
}

impl RankRows {
    pub fn len(&self) -> usize {
        self.row_slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_slices.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.elems.len()
    }

    /// Element ids (ascending) feeding local row `i`.
    pub fn row_elements(&self, i: usize) -> &[u32] {
        &self.elems[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn local_row(&self, slice: usize) -> Option<usize> {
        self.row_slices.binary_search(&(slice as u32)).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    pub mode: usize,
    pub ranks: usize,
    pub slices: SliceMap,
    pub per_rank: Vec<RankRows>,
    /// Ranks sharing each nonempty slice (indexed like `slices`), ascending.
    pub sharers: Vec<Vec<u32>>,
}

impl ModeLayout {
    pub fn new(t: &SparseTensor, scheme: &DistributionScheme, mode: usize) -> Result<Self> {
        let slices = t.slices(mode)?;
        let policy = scheme.policy(mode);
        let ranks = scheme.ranks();
        let mut per_rank = vec![
            RankRows {
                row_slices: Vec::new(),
                offsets: vec![0],
                elems: Vec::new(),
            };
            ranks
        ];
        let mut sharers = Vec::with_capacity(slices.nonempty_count());
        for (l, members) in slices.iter() {
            let mut here: Vec<u32> = Vec::new();
            for &e in members {
                let p = policy.rank_of(e as usize);
                let rows = &mut per_rank[p];
                if rows.row_slices.last() != Some(&(l as u32)) {
                    if !rows.row_slices.is_empty() {
                        rows.offsets.push(rows.elems.len());
                    }
                    rows.row_slices.push(l as u32);
                    here.push(p as u32);
                }
                rows.elems.push(e);
            }
            here.sort_unstable();
            sharers.push(here);
        }
        for rows in &mut per_rank {
            if !rows.row_slices.is_empty() {
                rows.offsets.push(rows.elems.len());
            }
        }
        Ok(ModeLayout {
            mode,
            ranks,
            slices,
            per_rank,
            sharers,
        })
    }

    pub fn nonempty_count(&self) -> usize {
        self.slices.nonempty_count()
    }

    pub fn mode_len(&self) -> usize {
        self.slices.mode_len()
    }

    /// Σ_p R_n^p
    pub fn rsum(&self) -> usize {
        self.per_rank.iter().map(RankRows::len).sum()
    }

    /// max_p R_n^p
    pub fn rmax(&self) -> usize {
        self.per_rank.iter().map(RankRows::len).max().unwrap_or(0)
    }

    /// max_p |E_n^p|
    pub fn emax(&self) -> usize {
        self.per_rank.iter().map(RankRows::element_count).max().unwrap_or(0)
    }
}

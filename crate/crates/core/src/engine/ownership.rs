use crate::layout::ModeLayout;

/// Row-index mapping: which sharer owns each nonempty slice's row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOwnership {
    pub mode: usize,
    mode_len: usize,
    /// Indexed by slice index; `None` for empty slices.
    owner: Vec<Option<u32>>,
    sharers: Vec<Vec<u32>>,
    slice_ids: Vec<u32>,
}

impl RowOwnership {
    pub fn owner(&self, slice: usize) -> Option<usize> {
        self.owner[slice].map(|r| r as usize)
    }

    /// Sharers of a slice; empty for empty slices.
    pub fn sharers(&self, slice: usize) -> &[u32] {
        match self.slice_ids.binary_search(&(slice as u32)) {
            Ok(k) => &self.sharers[k],
            Err(_) => &[],
        }
    }

    pub fn mode_len(&self) -> usize {
        self.mode_len
    }

    /// Nonempty slice indices, ascending.
    pub fn owned_rows(&self) -> &[u32] {
        &self.slice_ids
    }

    /// Number of rows each rank owns.
    pub fn owned_counts(&self, ranks: usize) -> Vec<usize> {
        let mut counts = vec![0; ranks];
        for r in self.owner.iter().flatten() {
            counts[*r as usize] += 1;
        }
        counts
    }
}

/// Scans slices in ascending order and hands each row to the sharer that owns
/// the fewest rows so far (ties to the lowest rank).
pub fn assign_row_owners(layout: &ModeLayout) -> RowOwnership {
    let mut owned = vec![0usize; layout.ranks];
    let mut owner = vec![None; layout.mode_len()];
    let mut slice_ids = Vec::with_capacity(layout.nonempty_count());
    for (k, (l, _)) in layout.slices.iter().enumerate() {
        let pick = *layout.sharers[k]
            .iter()
            .min_by_key(|&&r| (owned[r as usize], r))
            .expect("nonempty slice has a sharer");
        owned[pick as usize] += 1;
        owner[l] = Some(pick);
        slice_ids.push(l as u32);
    }
    RowOwnership {
        mode: layout.mode,
        mode_len: layout.mode_len(),
        owner,
        sharers: layout.sharers.clone(),
        slice_ids,
    }
}

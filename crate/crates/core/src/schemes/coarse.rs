//! Coarse-G: whole slices in a seeded random order, cut into contiguous
//! blocks of roughly nnz/P elements.

use rand::seq::SliceRandom;

use super::{Policy, PolicyMode};
use crate::error::Result;
use crate::rng::{seeded, Stream};
use crate::tensor::SparseTensor;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CoarseVariant {
    /// Contiguous blocks of the permuted slice order.
    #[default]
    Contiguous,
    /// Each slice of the permuted order goes to the least-loaded rank.
    BestFit,
}

pub fn coarse_distribute(
    t: &SparseTensor,
    mode: usize,
    ranks: usize,
    seed: u64,
    variant: CoarseVariant,
) -> Result<Policy> {
    let slices = t.slices(mode)?;
    if ranks == 0 {
        return Policy::new(PolicyMode::Mode(mode), ranks, vec![]);
    }
    let mut order: Vec<usize> = (0..slices.nonempty_count()).collect();
    order.shuffle(&mut seeded(seed, Stream::Coarse, mode as u64));

    let mut assignment = vec![0u32; t.nnz()];
    let mut place = |k: usize, rank: usize| {
        for &e in slices.members(k) {
            assignment[e as usize] = rank as u32;
        }
    };

    match variant {
        CoarseVariant::Contiguous => {
            let target = t.nnz() as f64 / ranks as f64;
            let mut block = 0usize;
            let mut block_len = 0usize;
            let mut prefix = 0usize;
            for (pos, &k) in order.iter().enumerate() {
                let size = slices.members(k).len();
                if block_len > 0 && block + 1 < ranks {
                    let boundary = target * (block + 1) as f64;
                    let before = (prefix as f64 - boundary).abs();
                    let after = ((prefix + size) as f64 - boundary).abs();
                    let remaining = order.len() - pos;
                    if before <= after || remaining <= ranks - block - 1 {
                        block += 1;
                        block_len = 0;
                    }
                }
                place(k, block);
                block_len += size;
                prefix += size;
            }
        }
        CoarseVariant::BestFit => {
            let mut loads = vec![0usize; ranks];
            for &k in &order {
                let (rank, _) = loads
                    .iter()
                    .enumerate()
                    .min_by_key(|(r, &l)| (l, *r))
                    .expect("ranks >= 1");
                place(k, rank);
                loads[rank] += slices.members(k).len();
            }
        }
    }
    Policy::new(PolicyMode::Mode(mode), ranks, assignment)
}

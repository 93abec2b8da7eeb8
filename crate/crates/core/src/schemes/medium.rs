//! Medium-G: a q_1 x ... x q_N processor grid laid over the tensor after a
//! seeded random permutation of every mode's indices.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DistributionScheme, Policy, PolicyMode, SchemeKind};
use crate::error::{Error, Result};
use crate::rng::{seeded, Stream};
use crate::tensor::SparseTensor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    q: Vec<usize>,
}

impl GridShape {
    pub fn new(q: Vec<usize>) -> Result<Self> {
        if q.is_empty() || q.iter().any(|&x| x == 0) {
            return Err(Error::Config(format!("invalid grid {q:?}")));
        }
        Ok(GridShape { q })
    }

    pub fn dims(&self) -> &[usize] {
        &self.q
    }

    pub fn ranks(&self) -> usize {
        self.q.iter().product()
    }

    /// Rank of a grid cell; the first mode varies fastest.
    pub fn rank_of(&self, cell: &[usize]) -> usize {
        let mut rank = 0;
        let mut stride = 1;
        for (&c, &q) in cell.iter().zip(&self.q) {
            rank += c * stride;
            stride *= q;
        }
        rank
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.q.iter().map(|q| q.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        while n % d == 0 {
            out.push(d);
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Splits `ranks` over the modes: primes largest first, each to the mode with
/// the largest current `L_n / q_n` (ties to the lowest mode).
pub fn grid_factorize(ranks: usize, dims: &[usize]) -> Result<GridShape> {
    if ranks == 0 {
        return Err(Error::Config("rank count must be at least 1".into()));
    }
    let mut q = vec![1usize; dims.len()];
    let mut primes = prime_factors(ranks);
    primes.reverse();
    for prime in primes {
        let mut best = 0;
        for n in 1..dims.len() {
            // L_n / q_n > L_best / q_best, compared without division.
            if dims[n] * q[best] > dims[best] * q[n] {
                best = n;
            }
        }
        q[best] *= prime;
    }
    GridShape::new(q)
}

/// Medium-G policy and its grid.
pub fn medium_policy(t: &SparseTensor, ranks: usize, seed: u64) -> Result<(Policy, GridShape)> {
    let grid = grid_factorize(ranks, t.dims())?;
    let perms: Vec<Vec<usize>> = t
        .dims()
        .iter()
        .enumerate()
        .map(|(n, &len)| {
            let mut p: Vec<usize> = (0..len).collect();
            p.shuffle(&mut seeded(seed, Stream::Medium, n as u64));
            p
        })
        .collect();
    let mut cell = vec![0usize; t.order()];
    let assignment = (0..t.nnz())
        .map(|id| {
            for (n, c) in cell.iter_mut().enumerate() {
                let permuted = perms[n][t.coord(id, n)];
                *c = permuted * grid.dims()[n] / t.dims()[n];
            }
            grid.rank_of(&cell) as u32
        })
        .collect();
    Ok((Policy::new(PolicyMode::Uniform, ranks, assignment)?, grid))
}

pub fn medium_distribute(t: &SparseTensor, ranks: usize, seed: u64) -> Result<DistributionScheme> {
    let (policy, grid) = medium_policy(t, ranks, seed)?;
    Ok(DistributionScheme::uni(SchemeKind::Medium, policy, seed, Some(grid)))
}

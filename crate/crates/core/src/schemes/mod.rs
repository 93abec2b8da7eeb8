//! Distribution policies: element-to-rank assignments, one per mode
//! (multi-policy) or one shared by all modes (uni-policy).

mod coarse;
mod io;
mod lite;
mod medium;

pub use coarse::{coarse_distribute, CoarseVariant};
pub use io::{load_external_policy, read_policies, write_policies};
pub use lite::{lite_distribute, lite_distribute_traced, LiteTrace};
pub use medium::{grid_factorize, medium_distribute, medium_policy, GridShape};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SparseTensor;

/// Which mode a policy was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyMode {
    Mode(usize),
    Uniform,
}

/// Total assignment of element ids to ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub mode: PolicyMode,
    ranks: usize,
    assignment: Vec<u32>,
}

impl Policy {
    pub fn new(mode: PolicyMode, ranks: usize, assignment: Vec<u32>) -> Result<Self> {
        if ranks == 0 {
            return Err(Error::Config("rank count must be at least 1".into()));
        }
        if let Some((i, &r)) = assignment
            .iter()
            .enumerate()
            .find(|(_, &r)| r as usize >= ranks)
        {
            return Err(Error::RankOutOfRange {
                rank: r as u64,
                ranks,
                line: i + 1,
            });
        }
        Ok(Policy {
            mode,
            ranks,
            assignment,
        })
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn rank_of(&self, element: usize) -> usize {
        self.assignment[element] as usize
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Element count per rank.
    pub fn loads(&self) -> Vec<usize> {
        let mut loads = vec![0usize; self.ranks];
        for &r in &self.assignment {
            loads[r as usize] += 1;
        }
        loads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Lite,
    Coarse,
    Medium,
    External,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Lite => "lite",
            SchemeKind::Coarse => "coarse",
            SchemeKind::Medium => "medium",
            SchemeKind::External => "external",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lite" => Ok(SchemeKind::Lite),
            "coarse" => Ok(SchemeKind::Coarse),
            "medium" => Ok(SchemeKind::Medium),
            "external" => Ok(SchemeKind::External),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete distribution of the tensor: N per-mode policies, or one shared policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionScheme {
    pub kind: SchemeKind,
    policies: Vec<Policy>,
    ranks: usize,
    pub seed: u64,
    pub grid: Option<GridShape>,
}

impl DistributionScheme {
    /// Lite along every mode.
    pub fn lite(t: &SparseTensor, ranks: usize) -> Result<Self> {
        let policies = (0..t.order())
            .map(|mode| lite_distribute(t, mode, ranks))
            .collect::<Result<Vec<_>>>()?;
        Self::multi(SchemeKind::Lite, policies, ranks, 0)
    }

    /// Coarse-G along every mode.
    pub fn coarse(t: &SparseTensor, ranks: usize, seed: u64, variant: CoarseVariant) -> Result<Self> {
        let policies = (0..t.order())
            .map(|mode| coarse_distribute(t, mode, ranks, seed, variant))
            .collect::<Result<Vec<_>>>()?;
        Self::multi(SchemeKind::Coarse, policies, ranks, seed)
    }

    pub fn medium(t: &SparseTensor, ranks: usize, seed: u64) -> Result<Self> {
        medium_distribute(t, ranks, seed)
    }

    /// Everything on rank 0.
    pub fn single_rank(t: &SparseTensor) -> Self {
        DistributionScheme {
            kind: SchemeKind::External,
            policies: vec![Policy {
                mode: PolicyMode::Uniform,
                ranks: 1,
                assignment: vec![0; t.nnz()],
            }],
            ranks: 1,
            seed: 0,
            grid: None,
        }
    }

    pub fn build(kind: SchemeKind, t: &SparseTensor, ranks: usize, seed: u64) -> Result<Self> {
        match kind {
            SchemeKind::Lite => Self::lite(t, ranks),
            SchemeKind::Coarse => Self::coarse(t, ranks, seed, CoarseVariant::Contiguous),
            SchemeKind::Medium => Self::medium(t, ranks, seed),
            SchemeKind::External => Err(Error::Config(
                "the external scheme needs a policy file".into(),
            )),
        }
    }

    pub(crate) fn multi(kind: SchemeKind, policies: Vec<Policy>, ranks: usize, seed: u64) -> Result<Self> {
        for (n, p) in policies.iter().enumerate() {
            if p.mode != PolicyMode::Mode(n) || p.ranks != ranks {
                return Err(Error::Config(format!(
                    "policy {} does not match mode {} with {ranks} ranks",
                    n + 1,
                    n + 1
                )));
            }
        }
        Ok(DistributionScheme {
            kind,
            policies,
            ranks,
            seed,
            grid: None,
        })
    }

    pub(crate) fn uni(kind: SchemeKind, policy: Policy, seed: u64, grid: Option<GridShape>) -> Self {
        DistributionScheme {
            kind,
            ranks: policy.ranks,
            policies: vec![Policy {
                mode: PolicyMode::Uniform,
                ..policy
            }],
            seed,
            grid,
        }
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    pub fn is_uni_policy(&self) -> bool {
        self.policies.len() == 1 && self.policies[0].mode == PolicyMode::Uniform
    }

    /// The policy governing computation along `mode`.
    pub fn policy(&self, mode: usize) -> &Policy {
        if self.is_uni_policy() {
            &self.policies[0]
        } else {
            &self.policies[mode]
        }
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    /// Checks that the scheme covers `t`: one policy per mode or one shared,
    /// each assigning every element.
    pub fn validate(&self, t: &SparseTensor) -> Result<()> {
        if !self.is_uni_policy() && self.policies.len() != t.order() {
            return Err(Error::Config(format!(
                "multi-policy scheme has {} policies for a {}-mode tensor",
                self.policies.len(),
                t.order()
            )));
        }
        for p in &self.policies {
            if p.len() != t.nnz() {
                return Err(Error::PolicyLength {
                    expected: t.nnz(),
                    found: p.len(),
                });
            }
        }
        Ok(())
    }
}

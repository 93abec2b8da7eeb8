//! Policy text files.
//!
//! One line per element: `elemId rank`, both zero-based. A multi-policy file
//! starts each section with `# mode: n` (one-based). Files for externally
//! computed policies may also list a bare `rank` per line in element order.

use std::io::{BufRead, Write};

use super::{DistributionScheme, Policy, PolicyMode, SchemeKind};
use crate::error::{Error, Result};
use crate::tensor::SparseTensor;

pub fn write_policies<W: Write>(policies: &[Policy], mut out: W) -> std::io::Result<()> {
    for p in policies {
        if let PolicyMode::Mode(n) = p.mode {
            writeln!(out, "# mode: {}", n + 1)?;
        }
        for (id, r) in p.assignment().iter().enumerate() {
            writeln!(out, "{id} {r}")?;
        }
    }
    Ok(())
}

struct Section {
    mode: PolicyMode,
    ranks: Vec<Option<u32>>,
    sequential: usize,
}

/// Reads every section of a policy file. `nnz` fixes the expected length.
pub fn read_policies<R: BufRead>(reader: R, nnz: usize, ranks: usize) -> Result<Vec<Policy>> {
    let mut sections: Vec<Section> = Vec::new();
    let new_section = |mode| Section {
        mode,
        ranks: vec![None; nnz],
        sequential: 0,
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(m) = comment.trim().strip_prefix("mode:") {
                let m = m.trim();
                let mode = if m == "uniform" {
                    PolicyMode::Uniform
                } else {
                    let n: usize = m.parse().ok().filter(|&n| n >= 1).ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: format!("invalid mode header {m:?}"),
                    })?;
                    PolicyMode::Mode(n - 1)
                };
                sections.push(new_section(mode));
            }
            continue;
        }
        if sections.is_empty() {
            sections.push(new_section(PolicyMode::Uniform));
        }
        let section = sections.last_mut().expect("section exists");
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_u64 = |f: &str| {
            f.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid integer {f:?}"),
            })
        };
        let (id, rank) = match fields.as_slice() {
            [r] => {
                let id = section.sequential;
                section.sequential += 1;
                (id as u64, parse_u64(r)?)
            }
            [id, r] => (parse_u64(id)?, parse_u64(r)?),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected `elemId rank` or `rank`, got {} fields", fields.len()),
                })
            }
        };
        if rank as usize >= ranks {
            return Err(Error::RankOutOfRange {
                rank,
                ranks,
                line: lineno,
            });
        }
        let slot = section.ranks.get_mut(id as usize).ok_or(Error::PolicyLength {
            expected: nnz,
            found: id as usize + 1,
        })?;
        if slot.is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("element {id} assigned twice"),
            });
        }
        *slot = Some(rank as u32);
    }
    if sections.is_empty() {
        sections.push(new_section(PolicyMode::Uniform));
    }
    sections
        .into_iter()
        .map(|s| {
            let found = s.ranks.iter().filter(|r| r.is_some()).count();
            if found != nnz {
                return Err(Error::PolicyLength {
                    expected: nnz,
                    found,
                });
            }
            Policy::new(s.mode, ranks, s.ranks.into_iter().map(|r| r.expect("checked")).collect())
        })
        .collect()
}

/// Wraps externally computed policies: one shared policy gives a
/// uni-policy scheme, one `# mode:` section per mode a multi-policy one.
pub fn load_external_policy<R: BufRead>(reader: R, t: &SparseTensor, ranks: usize) -> Result<DistributionScheme> {
    let mut policies = read_policies(reader, t.nnz(), ranks)?;
    if policies.len() == 1 && policies[0].mode == PolicyMode::Uniform {
        let policy = policies.pop().expect("one policy");
        return Ok(DistributionScheme::uni(SchemeKind::External, policy, 0, None));
    }
    if policies.len() != t.order() {
        return Err(Error::Config(format!(
            "a policy file must hold one shared policy or one per mode ({}), found {}",
            t.order(),
            policies.len()
        )));
    }
    policies.sort_by_key(|p| match p.mode {
        PolicyMode::Mode(n) => n,
        PolicyMode::Uniform => usize::MAX,
    });
    DistributionScheme::multi(SchemeKind::External, policies, ranks, 0)
}

//! FROSTT `.tns` coordinate text format.
//!
//! Each data line holds N one-based integer coordinates followed by a real
//! value. Lines starting with `#` are comments, except an optional
//! `# dims: d1 d2 ... dN` header that fixes the mode lengths.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Element, SparseTensor};

pub fn ingest_tns<R: BufRead>(reader: R) -> Result<SparseTensor> {
    let mut dims: Option<Vec<usize>> = None;
    let mut order: Option<usize> = None;
    let mut elements = Vec::new();
    let mut lines = Vec::new();

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
            if let Some(spec) = comment.trim().strip_prefix("dims:") {
                dims = Some(parse_dims(spec, lineno)?);
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least 2 coordinates and a value, got {} fields", fields.len()),
            });
        }
        let n = fields.len() - 1;
        match order {
            None => order = Some(n),
            Some(o) if o != n => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {o} coordinates, got {n}"),
                })
            }
            _ => {}
        }
        let mut coords = Vec::with_capacity(n);
        for f in &fields[..n] {
            let c: i64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid coordinate {f:?}"),
            })?;
            if c < 1 {
                return Err(Error::Domain {
                    line: lineno,
                    message: format!("coordinate {c} is below 1"),
                });
            }
            coords.push((c - 1) as usize);
        }
        let value: f64 = fields[n].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid value {:?}", fields[n]),
        })?;
        if !value.is_finite() {
            return Err(Error::Domain {
                line: lineno,
                message: format!("non-finite value {}", fields[n]),
            });
        }
        elements.push(Element::new(coords, value));
        lines.push(lineno);
    }

    let dims = match dims {
        Some(d) => {
            if let Some(o) = order {
                if o != d.len() {
                    return Err(Error::Parse {
                        line: lines[0],
                        message: format!("dims header has {} modes but data has {o}", d.len()),
                    });
                }
            }
            for (e, &line) in elements.iter().zip(&lines) {
                for (m, (&c, &len)) in e.coords.iter().zip(&d).enumerate() {
                    if c >= len {
                        return Err(Error::Domain {
                            line,
                            message: format!(
                                "coordinate {} exceeds declared length {len} of mode {}",
                                c + 1,
                                m + 1
                            ),
                        });
                    }
                }
            }
            d
        }
        None => {
            let order = order.ok_or(Error::Parse {
                line: 0,
                message: "no data lines and no dims header".into(),
            })?;
            let mut d = vec![0usize; order];
            for e in &elements {
                for (dm, &c) in d.iter_mut().zip(&e.coords) {
                    *dm = (*dm).max(c + 1);
                }
            }
            d
        }
    };
    SparseTensor::new(dims, elements)
}

fn parse_dims(spec: &str, line: usize) -> Result<Vec<usize>> {
    let dims = spec
        .split_whitespace()
        .map(|f| {
            f.parse::<usize>().ok().filter(|&d| d >= 1).ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid mode length {f:?} in dims header"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.len() < 2 {
        return Err(Error::Parse {
            line,
            message: "dims header needs at least 2 modes".into(),
        });
    }
    Ok(dims)
}

pub fn read_tns_file(path: &Path) -> Result<SparseTensor> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_tns(std::io::BufReader::new(file))
}

/// Writes the tensor with a dims header, one element per line.
pub fn write_tns<W: Write>(t: &SparseTensor, mut out: W) -> std::io::Result<()> {
    let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "# dims: {}", dims.join(" "))?;
    for id in 0..t.nnz() {
        for c in t.coords(id) {
            write!(out, "{} ", c + 1)?;
        }
        writeln!(out, "{}", t.value(id))?;
    }
    Ok(())
}

//! Text format for transition kernels.
//!
//! ```text
//! noisy-ergodic-kernel
//! schema_version 1
//! K 4
//! domain circle
//! boundaries 0.0000000000000000e0 2.5000000000000000e-1 ...
//! nnz 4
//! 0 1 1.0000000000000000e0
//! ```
//!
//! `domain none` omits the `boundaries` line. Probabilities carry 17
//! significant digits, so every `f64` survives a write and reload exactly.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use noisy_ergodic::{DomainKind, Kernel, Partition};

use crate::failure::Failure;

pub const MAGIC: &str = "noisy-ergodic-kernel";
pub const SCHEMA_VERSION: u32 = 1;

pub fn write_kernel(p: &Kernel) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "schema_version {SCHEMA_VERSION}").unwrap();
    writeln!(out, "K {}", p.size()).unwrap();
    match p.partition() {
        Some(part) => {
            writeln!(out, "domain {}", part.domain().as_str()).unwrap();
            let b: Vec<String> = part.boundaries().iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "boundaries {}", b.join(" ")).unwrap();
        }
        None => writeln!(out, "domain none").unwrap(),
    }
    writeln!(out, "nnz {}", p.nnz()).unwrap();
    for i in 0..p.size() {
        for (j, v) in p.row_entries(i) {
            writeln!(out, "{i} {j} {v:.16e}").unwrap();
        }
    }
    out
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Failure {
    Failure::Kernel(format!("line {line}: {msg}"))
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str), Failure> {
    let (n, line) = lines.next().ok_or_else(|| Failure::Kernel(format!("missing `{key}` header")))?;
    match line.split_once(' ') {
        Some((k, rest)) if k == key => Ok((n, rest.trim())),
        _ if line == key => Ok((n, "")),
        _ => Err(bad(n, format!("expected `{key}`, found `{line}`"))),
    }
}

fn number<T: std::str::FromStr>(n: usize, field: &str, s: &str) -> Result<T, Failure> {
    s.parse().map_err(|_| bad(n, format!("{field}: cannot parse `{s}`")))
}

pub fn read_kernel(text: &str) -> Result<Kernel, Failure> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (n, magic) = lines.next().ok_or_else(|| Failure::Kernel("empty kernel file".into()))?;
    if magic != MAGIC {
        return Err(bad(n, format!("expected `{MAGIC}`")));
    }
    let (n, v) = header(&mut lines, "schema_version")?;
    let version: u32 = number(n, "schema_version", v)?;
    if version != SCHEMA_VERSION {
        return Err(bad(n, format!("unsupported schema_version {version}")));
    }
    let (n, v) = header(&mut lines, "K")?;
    let k: usize = number(n, "K", v)?;
    if k == 0 {
        return Err(bad(n, "K must be positive"));
    }
    let (n, v) = header(&mut lines, "domain")?;
    let partition = if v == "none" {
        None
    } else {
        let domain: DomainKind = v.parse().map_err(|_| bad(n, format!("unknown domain `{v}`")))?;
        let (n, v) = header(&mut lines, "boundaries")?;
        let b = v
            .split_whitespace()
            .map(|s| number::<f64>(n, "boundaries", s))
            .collect::<Result<Vec<_>, _>>()?;
        if b.len() != k + 1 {
            return Err(bad(n, format!("expected {} boundaries, found {}", k + 1, b.len())));
        }
        Some(Partition::from_boundaries(domain, b).map_err(|e| bad(n, e))?)
    };
    let (n, v) = header(&mut lines, "nnz")?;
    let nnz: usize = number(n, "nnz", v)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut seen = 0;
    for (n, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [i, j, v] = fields[..] else {
            return Err(bad(n, "expected `row col probability`"));
        };
        let i: usize = number(n, "row", i)?;
        let j: usize = number(n, "col", j)?;
        let v: f64 = number(n, "probability", v)?;
        if i >= k {
            return Err(bad(n, format!("row {i} out of range for K = {k}")));
        }
        rows[i].push((j, v));
        seen += 1;
    }
    if seen != nnz {
        return Err(Failure::Kernel(format!("header declares {nnz} entries, found {seen}")));
    }
    let kernel = Kernel::from_sparse_rows(k, rows)?;
    match partition {
        Some(p) => Ok(kernel.with_partition(p)?),
        None => Ok(kernel),
    }
}

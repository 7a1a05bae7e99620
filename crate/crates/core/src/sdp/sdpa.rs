//! Sparse SDPA (`.dat-s`) export and a small reader for the same format.
//!
//! Our equality-form problem `⟨Aₖ, X⟩ = bₖ, X ⪰ 0` is SDPA's dual form
//! `max ⟨F₀, Y⟩ s.t. ⟨Fₖ, Y⟩ = cₖ, Y ⪰ 0`, so row `k` becomes `Fₖ` and its
//! right-hand side becomes `cₖ`. Free scalars are lowered to one diagonal
//! block of size `2·nfree` (SDPA negative size), the k-th free value being
//! `Y[2k] − Y[2k+1]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Scalar, SdpProblem};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// SDPA block/entry coordinates (1-based) for a scalar with coefficient `c`.
fn sdpa_entries(p: &SdpProblem, s: Scalar, c: f64) -> Vec<(usize, usize, usize, f64)> {
    match s {
        Scalar::Entry { block, i, j } => {
            let v = if i == j { c } else { c / 2.0 };
            vec![(block + 1, i + 1, j + 1, v)]
        }
        Scalar::Free(k) => {
            let blk = p.blocks.len() + 1;
            vec![(blk, 2 * k + 1, 2 * k + 1, c), (blk, 2 * k + 2, 2 * k + 2, -c)]
        }
    }
}

/// Deterministic sparse SDPA text.
pub fn export_sdpa(p: &SdpProblem) -> Result<String> {
    p.validate()?;
    let mut out = String::new();
    let nblocks = p.blocks.len() + usize::from(!p.free.is_empty());
    writeln!(out, "{}", p.rows.len()).unwrap();
    writeln!(out, "{nblocks}").unwrap();
    let mut sizes: Vec<String> = p.blocks.iter().map(|b| b.size.to_string()).collect();
    if !p.free.is_empty() {
        sizes.push(format!("-{}", 2 * p.free.len()));
    }
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let rhs: Vec<String> = p.rows.iter().map(|r| num(r.rhs)).collect();
    writeln!(out, "{}", rhs.join(" ")).unwrap();
    let mut emit = |k: usize, terms: &[(Scalar, f64)]| {
        let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for &(s, c) in terms {
            for (blk, i, j, v) in sdpa_entries(p, s, c) {
                *acc.entry((blk, i, j)).or_insert(0.0) += v;
            }
        }
        for ((blk, i, j), v) in acc {
            if v != 0.0 {
                writeln!(out, "{k} {blk} {i} {j} {}", num(v)).unwrap();
            }
        }
    };
    emit(0, &p.objective);
    for (k, row) in p.rows.iter().enumerate() {
        emit(k + 1, &row.terms);
    }
    Ok(out)
}

/// Parsed contents of a sparse SDPA file.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaFile {
    pub m: usize,
    /// Negative sizes denote diagonal blocks.
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    /// `(matrix index k, block, i, j, value)`, 1-based, `k = 0` is `F₀`.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

fn fields(line: &str) -> Vec<&str> {
    line.split(|ch: char| ch.is_whitespace() || ",(){}".contains(ch))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Reads sparse SDPA text; comment lines start with `"` or `*`.
pub fn read_sdpa(text: &str) -> Result<SdpaFile> {
    let bad = |msg: String| Error::MalformedSdp(format!("SDPA input: {msg}"));
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('"') && !l.trim_start().starts_with('*'));
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}")));
    let m: usize = fields(next("m")?)
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad m".into()))?;
    let nb: usize = fields(next("nblocks")?)
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad nblocks".into()))?;
    let block_sizes = fields(next("block sizes")?)
        .iter()
        .map(|s| s.parse::<i64>().map_err(|_| bad(format!("bad block size `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if block_sizes.len() != nb {
        return Err(bad(format!("{} block sizes for {nb} blocks", block_sizes.len())));
    }
    let c = fields(next("objective vector")?)
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if c.len() != m {
        return Err(bad(format!("{} objective entries for m = {m}", c.len())));
    }
    let mut entries = Vec::new();
    for line in lines {
        let f = fields(line);
        if f.is_empty() {
            continue;
        }
        if f.len() != 5 {
            return Err(bad(format!("entry line `{line}`")));
        }
        let ints = f[..4]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| bad(format!("entry line `{line}`"))))
            .collect::<Result<Vec<_>>>()?;
        let v: f64 = f[4].parse().map_err(|_| bad(format!("entry line `{line}`")))?;
        let (k, blk, i, j) = (ints[0], ints[1], ints[2], ints[3]);
        if k > m || blk == 0 || blk > nb {
            return Err(bad(format!("entry index out of range in `{line}`")));
        }
        let size = block_sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > size || j > size {
            return Err(bad(format!("entry index out of range in `{line}`")));
        }
        entries.push((k, blk, i, j, v));
    }
    Ok(SdpaFile {
        m,
        block_sizes,
        c,
        entries,
    })
}

/// Writes an [`SdpaFile`] back out in the layout [`export_sdpa`] uses.
pub fn write_sdpa(f: &SdpaFile) -> String {
    let mut out = String::new();
    writeln!(out, "{}", f.m).unwrap();
    writeln!(out, "{}", f.block_sizes.len()).unwrap();
    let sizes: Vec<String> = f.block_sizes.iter().map(|s| s.to_string()).collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let c: Vec<String> = f.c.iter().map(|&v| num(v)).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();
    for &(k, blk, i, j, v) in &f.entries {
        writeln!(out, "{k} {blk} {i} {j} {}", num(v)).unwrap();
    }
    out
}

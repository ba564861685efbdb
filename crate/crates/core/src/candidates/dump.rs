//! Labeled candidate dump: binary ("IERC") and CSV.
//!
//! Binary layout, little-endian: magic `IERC`, version u32, count u64, then per
//! record three u32 vertex indices, IER f32, reference distance f32, label u8.
//! Unset IER or distance is stored as NaN and an unset label as 255.

use std::io::{BufRead, Read, Write};

use super::{CandidateTriangle, Label};
use crate::{Error, Result};

pub const DUMP_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"IERC";
const UNLABELED: u8 = 255;
const CSV_HEADER: &str = "v0,v1,v2,ier,dist_to_ref,label";

fn label_byte(l: Option<Label>) -> u8 {
    l.map_or(UNLABELED, |l| l as u8)
}

fn opt_f32(x: Option<f64>) -> f32 {
    x.map_or(f32::NAN, |v| v as f32)
}

fn from_f32(x: f32) -> Option<f64> {
    (!x.is_nan()).then_some(x as f64)
}

fn byte_label(b: u8, record: u64) -> Result<Option<Label>> {
    match b {
        UNLABELED => Ok(None),
        _ => Label::from_index(b as usize)
            .map(Some)
            .ok_or_else(|| Error::invalid(format!("record {record}: invalid label {b}"))),
    }
}

/// Writes the binary dump. Values are narrowed to `f32`.
pub fn write_candidates<W: Write>(mut w: W, candidates: &[CandidateTriangle]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(candidates.len() as u64).to_le_bytes())?;
    let mut rec = [0u8; 21];
    for c in candidates {
        for (k, v) in c.verts.iter().enumerate() {
            rec[4 * k..4 * k + 4].copy_from_slice(&v.to_le_bytes());
        }
        rec[12..16].copy_from_slice(&opt_f32(c.ier).to_le_bytes());
        rec[16..20].copy_from_slice(&opt_f32(c.dist_to_ref).to_le_bytes());
        rec[20] = label_byte(c.label);
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a binary dump. `longest_edge` is not stored and comes back as NaN.
pub fn read_candidates<R: Read>(mut r: R) -> Result<Vec<CandidateTriangle>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[0..4] != MAGIC {
        return Err(Error::BadMagic {
            expected: "IERC".into(),
            found: String::from_utf8_lossy(&head[0..4]).into_owned(),
        });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != DUMP_VERSION {
        return Err(Error::BadVersion {
            expected: DUMP_VERSION,
            found: version,
        });
    }
    let count = u64::from_le_bytes(head[8..16].try_into().unwrap());
    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; 21];
    for i in 0..count {
        r.read_exact(&mut rec).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::invalid(format!("dump truncated at record {i} of {count}")),
            _ => e.into(),
        })?;
        let u = |k: usize| u32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
        out.push(CandidateTriangle {
            verts: [u(0), u(1), u(2)],
            longest_edge: f64::NAN,
            ier: from_f32(f(12)),
            dist_to_ref: from_f32(f(16)),
            label: byte_label(rec[20], i)?,
        });
    }
    Ok(out)
}

fn csv_f32(x: f32) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Writes the CSV form: the same values as the binary dump, one row each.
pub fn write_candidates_csv<W: Write>(mut w: W, candidates: &[CandidateTriangle]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in candidates {
        let label = c.label.map_or(String::new(), |l| (l as u8).to_string());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            c.verts[0],
            c.verts[1],
            c.verts[2],
            csv_f32(opt_f32(c.ier)),
            csv_f32(opt_f32(c.dist_to_ref)),
            label
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV form.
pub fn read_candidates_csv<R: BufRead>(r: R) -> Result<Vec<CandidateTriangle>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |m: String| Error::parse("<csv>", i + 1, m);
        if i == 0 {
            if line.trim() != CSV_HEADER {
                return Err(bad(format!("expected header `{CSV_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", cols.len())));
        }
        let idx = |s: &str| s.parse::<u32>().map_err(|e| bad(format!("bad index `{s}`: {e}")));
        let val = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f32>().map(|v| Some(v as f64)).map_err(|e| bad(format!("bad value `{s}`: {e}")))
        };
        let label = if cols[5].is_empty() {
            None
        } else {
            let b = cols[5].parse::<u8>().map_err(|e| bad(format!("bad label: {e}")))?;
            byte_label(b, i as u64).map_err(|e| bad(e.to_string()))?
        };
        out.push(CandidateTriangle {
            verts: [idx(cols[0])?, idx(cols[1])?, idx(cols[2])?],
            longest_edge: f64::NAN,
            ier: val(cols[3])?,
            dist_to_ref: val(cols[4])?,
            label,
        });
    }
    Ok(out)
}

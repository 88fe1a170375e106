//! PQR file parsing and coordinate normalization.
//!
//! PQR is the PDB-like format produced by pdb2pqr: ATOM/HETATM records whose
//! last five whitespace-separated fields are x, y, z, charge, radius. Only
//! those fields matter here; everything else on the line is ignored.

use crate::{Error, Result};
use std::io::BufRead;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub pos: [f64; 3],
    pub charge: f64,
    pub radius: f64,
}

pub fn parse_pqr(path: &Path) -> Result<Vec<Atom>> {
    let file = std::fs::File::open(path)?;
    parse_pqr_reader(std::io::BufReader::new(file))
}

pub fn parse_pqr_reader<R: BufRead>(reader: R) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let mut tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first() {
            Some(&"ATOM") | Some(&"HETATM") => {}
            _ => continue,
        }
        if tokens.len() < 6 {
            return Err(Error::Pqr(format!(
                "line {lineno}: record has {} fields, need at least 6",
                tokens.len()
            )));
        }
        let tail = tokens.split_off(tokens.len() - 5);
        let mut vals = [0.0f64; 5];
        for (v, tok) in vals.iter_mut().zip(&tail) {
            *v = tok.parse().map_err(|_| {
                Error::Pqr(format!("line {lineno}: bad numeric field `{tok}`"))
            })?;
        }
        if !(vals[4] > 0.0) {
            return Err(Error::Pqr(format!(
                "line {lineno}: non-positive radius {}",
                vals[4]
            )));
        }
        atoms.push(Atom {
            pos: [vals[0], vals[1], vals[2]],
            charge: vals[3],
            radius: vals[4],
        });
    }
    if atoms.is_empty() {
        return Err(Error::Pqr("no ATOM/HETATM records found".into()));
    }
    Ok(atoms)
}

/// Rescales atom coordinates and radii so the molecule fits inside the unit
/// box with the given margin: after the transform,
/// max over atoms of (|pos|_inf + radius) = 1 - margin.
pub fn scale_to_box(atoms: &[Atom], margin: f64) -> Vec<Atom> {
    assert!(!atoms.is_empty() && margin < 1.0);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for a in atoms {
        for k in 0..3 {
            lo[k] = lo[k].min(a.pos[k] - a.radius);
            hi[k] = hi[k].max(a.pos[k] + a.radius);
        }
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    let mut half = 0.0f64;
    for k in 0..3 {
        half = half.max(0.5 * (hi[k] - lo[k]));
    }
    let scale = (1.0 - margin) / half;
    atoms
        .iter()
        .map(|a| Atom {
            pos: [
                (a.pos[0] - center[0]) * scale,
                (a.pos[1] - center[1]) * scale,
                (a.pos[2] - center[2]) * scale,
            ],
            charge: a.charge,
            radius: a.radius * scale,
        })
        .collect()
}

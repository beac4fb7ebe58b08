//! Extended-XYZ reading and writing.
//!
//! Each frame is an atom-count line, a `key=value` comment line and one
//! `symbol x y z` line per atom. Recognized keys are `Lattice`, `pbc` and
//! `energy`; everything else on the comment line, and any column after `z`,
//! is ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Cell, Configuration, LabeledDataset, SpeciesTable};
use crate::error::{Error, Result};

/// A frame before species ids are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub symbols: Vec<String>,
    pub positions: Vec<[f64; 3]>,
    pub cell: Cell,
    pub energy: Option<f64>,
}

/// Split a comment line into `key=value` pairs, honoring double quotes.
fn parse_comment(line: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut chars = line.trim().chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.peek() != Some(&'=') {
            // bare token, e.g. a free-text comment word
            out.push((key, String::new()));
            continue;
        }
        chars.next();
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            let mut closed = false;
            for c in chars.by_ref() {
                if c == '"' {
                    closed = true;
                    break;
                }
                value.push(c);
            }
            if !closed {
                return Err(Error::Format(format!("unterminated quote for key `{key}`")));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        out.push((key, value));
    }
    Ok(out)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("cannot parse {what} `{s}`")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "T" | "t" | "True" | "true" | "1" => Ok(true),
        "F" | "f" | "False" | "false" | "0" => Ok(false),
        _ => Err(Error::Format(format!("cannot parse pbc flag `{s}`"))),
    }
}

/// Parse all frames of an extended-XYZ document.
pub fn parse_frames(text: &str) -> Result<Vec<RawFrame>> {
    let mut lines = text.lines().enumerate().peekable();
    let mut frames = Vec::new();
    loop {
        // skip blank separators between frames
        while lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.next();
        }
        let Some((lineno, count_line)) = lines.next() else {
            break;
        };
        let n: usize = count_line
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("line {}: expected atom count", lineno + 1)))?;
        let (_, comment) = lines
            .next()
            .ok_or_else(|| Error::Format("missing comment line".into()))?;

        let mut cell = Cell::vacuum();
        let mut energy = None;
        let mut pbc_given = None;
        for (key, value) in parse_comment(comment)? {
            match key.as_str() {
                "Lattice" => {
                    let v: Vec<f64> = value
                        .split_whitespace()
                        .map(|x| parse_f64(x, "lattice component"))
                        .collect::<Result<_>>()?;
                    if v.len() != 9 {
                        return Err(Error::Format(format!("Lattice needs 9 numbers, got {}", v.len())));
                    }
                    for i in 0..3 {
                        cell.vectors[i] = [v[3 * i], v[3 * i + 1], v[3 * i + 2]];
                    }
                }
                "pbc" => {
                    let v: Vec<bool> = value.split_whitespace().map(parse_bool).collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(Error::Format("pbc needs 3 flags".into()));
                    }
                    pbc_given = Some([v[0], v[1], v[2]]);
                }
                "energy" => energy = Some(parse_f64(&value, "energy")?),
                _ => {}
            }
        }
        // a lattice without explicit pbc is periodic, as in the usual convention
        cell.pbc = match pbc_given {
            Some(p) => p,
            None if cell.vectors != [[0.0; 3]; 3] => [true; 3],
            None => [false; 3],
        };

        let mut symbols = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        for _ in 0..n {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| Error::Format(format!("frame {} truncated", frames.len())))?;
            let mut it = line.split_whitespace();
            let sym = it
                .next()
                .ok_or_else(|| Error::Format(format!("line {}: empty atom line", lno + 1)))?;
            let mut p = [0.0; 3];
            for x in &mut p {
                let tok = it
                    .next()
                    .ok_or_else(|| Error::Format(format!("line {}: expected x y z", lno + 1)))?;
                *x = parse_f64(tok, "coordinate")?;
            }
            symbols.push(sym.to_string());
            positions.push(p);
        }
        frames.push(RawFrame {
            symbols,
            positions,
            cell,
            energy,
        });
    }
    Ok(frames)
}

/// Assign species ids. With no table, one is built from the sorted symbols.
pub fn frames_to_dataset(
    frames: Vec<RawFrame>,
    table: Option<&SpeciesTable>,
    provenance: impl Into<String>,
) -> Result<LabeledDataset> {
    let table = match table {
        Some(t) => t.clone(),
        None => SpeciesTable::from_symbols(frames.iter().flat_map(|f| f.symbols.iter())),
    };
    let configs = frames
        .into_iter()
        .map(|f| {
            let species = f
                .symbols
                .iter()
                .map(|s| table.id(s).ok_or_else(|| Error::UnknownSymbol(s.clone())))
                .collect::<Result<Vec<_>>>()?;
            Ok(Configuration::new(f.positions, species, f.cell, f.energy))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_configurations(configs, table, provenance)
}

pub fn parse_dataset(text: &str, table: Option<&SpeciesTable>) -> Result<LabeledDataset> {
    frames_to_dataset(parse_frames(text)?, table, "")
}

pub fn read_extxyz(path: impl AsRef<Path>, table: Option<&SpeciesTable>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    frames_to_dataset(parse_frames(&text)?, table, path.display().to_string())
}

/// Render a dataset as extended XYZ; floats use shortest round-trip form.
pub fn to_extxyz_string(ds: &LabeledDataset) -> String {
    let table = ds.species();
    let mut out = String::new();
    for c in ds.configurations() {
        let _ = writeln!(out, "{}", c.n_atoms());
        let mut comment = Vec::new();
        if c.cell.is_periodic() || c.cell.vectors != [[0.0; 3]; 3] {
            let l: Vec<String> = c.cell.vectors.iter().flatten().map(|x| format!("{x:?}")).collect();
            comment.push(format!("Lattice=\"{}\"", l.join(" ")));
        }
        let pbc: Vec<&str> = c.cell.pbc.iter().map(|&p| if p { "T" } else { "F" }).collect();
        comment.push(format!("pbc=\"{}\"", pbc.join(" ")));
        if let Some(e) = c.energy {
            comment.push(format!("energy={e:?}"));
        }
        comment.push("Properties=species:S:1:pos:R:3".into());
        let _ = writeln!(out, "{}", comment.join(" "));
        for (s, p) in c.species.iter().zip(&c.positions) {
            let sym = table.symbol(*s).unwrap_or("X");
            let _ = writeln!(out, "{sym} {:?} {:?} {:?}", p[0], p[1], p[2]);
        }
    }
    out
}

pub fn write_extxyz(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_extxyz_string(ds)).map_err(|e| Error::io(path, e))
}

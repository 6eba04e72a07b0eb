//! Plain-text law files.
//!
//! ```text
//! # comment
//! d=3
//! r=1
//! alphabet=0,1
//! kind=ball
//! 0,1,1,1 0.5
//! 1,0,0,0 0.5
//! ```
//!
//! Atoms list the coloring in breadth-first vertex order. Extra `key=value`
//! headers are kept and returned to the caller.

use crate::alphabet::ColorAlphabet;
use crate::entropy::fmt17;
use crate::error::{Error, Result};
use crate::law::LocalLaw;
use crate::scalar::Real;
use crate::shape::{BallShape, ShapeKind};
use std::collections::{BTreeMap, HashSet};

/// Header block of a line-oriented file: `key=value` pairs with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct Headers {
    pub values: BTreeMap<String, (usize, String)>,
}

impl Headers {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse { line: 0, msg: format!("missing header {key}=") })
    }

    pub fn parse_usize(&self, key: &str) -> Result<usize> {
        let line = self.values.get(key).map(|(l, _)| *l).unwrap_or(0);
        self.require(key)?
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("{key} is not a non-negative integer") })
    }
}

/// Split a file into headers and body lines `(line_number, text)`, dropping comments.
pub fn split_lines(text: &str) -> Result<(Headers, Vec<(usize, String)>)> {
    let mut headers = Headers::default();
    let mut body = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            if !k.contains(char::is_whitespace) && !k.contains(',') {
                let k = k.trim().to_string();
                if headers.values.contains_key(&k) {
                    return Err(Error::Parse { line: line_no, msg: format!("repeated header {k}") });
                }
                headers.values.insert(k, (line_no, v.trim().to_string()));
                continue;
            }
        }
        body.push((line_no, line.to_string()));
    }
    Ok((headers, body))
}

pub fn parse_alphabet(headers: &Headers) -> Result<ColorAlphabet> {
    let line = headers.values.get("alphabet").map(|(l, _)| *l).unwrap_or(0);
    let syms: Vec<&str> = headers.require("alphabet")?.split(',').collect();
    ColorAlphabet::new(&syms).map_err(|e| Error::Parse { line, msg: e.to_string() })
}

pub fn parse_prob<T: Real>(s: &str, line: usize) -> Result<T> {
    let x: f64 = s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") })?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Parse { line, msg: format!("probability {s} is not a finite non-negative number") });
    }
    Ok(T::lit(x))
}

/// Parse comma-separated color symbols.
pub fn parse_coloring(s: &str, alphabet: &ColorAlphabet, line: usize) -> Result<Vec<u8>> {
    s.split(',')
        .map(|sym| {
            alphabet
                .index_of(sym.trim())
                .ok_or_else(|| Error::Parse { line, msg: format!("unknown color {sym:?}") })
        })
        .collect()
}

pub fn format_coloring(colors: &[u8], alphabet: &ColorAlphabet) -> String {
    colors.iter().map(|&c| alphabet.symbol(c)).collect::<Vec<_>>().join(",")
}

/// Parse a law file. Returns the law and all headers (including unknown ones).
pub fn parse_law<T: Real>(text: &str) -> Result<(LocalLaw<T>, Headers)> {
    let (headers, body) = split_lines(text)?;
    let d = headers.parse_usize("d")?;
    let r = headers.parse_usize("r")?;
    let alphabet = parse_alphabet(&headers)?;
    let kind_line = headers.values.get("kind").map(|(l, _)| *l).unwrap_or(0);
    let kind = match headers.get("kind").unwrap_or("ball") {
        "ball" => ShapeKind::Ball,
        "edge" => ShapeKind::Edge,
        other => return Err(Error::Parse { line: kind_line, msg: format!("kind must be ball or edge, got {other}") }),
    };
    let shape = BallShape::new(d, r, kind).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    let mut seen = HashSet::new();
    let mut atoms = Vec::with_capacity(body.len());
    for (line, text) in body {
        let mut parts = text.split_whitespace();
        let (Some(col), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse { line, msg: "expected `<coloring> <probability>`".into() });
        };
        let colors = parse_coloring(col, &alphabet, line)?;
        if colors.len() != shape.len() {
            return Err(Error::Parse {
                line,
                msg: format!("coloring has {} entries, shape has {} vertices", colors.len(), shape.len()),
            });
        }
        if !seen.insert(colors.clone()) {
            return Err(Error::Parse { line, msg: "repeated coloring".into() });
        }
        atoms.push((colors, parse_prob::<T>(p, line)?));
    }
    let law = LocalLaw::from_atoms(shape, alphabet, atoms)?;
    Ok((law, headers))
}

/// Serialize a law; probabilities carry 17 significant digits so parsing is exact.
pub fn write_law<T: Real>(law: &LocalLaw<T>, extra_headers: &[(&str, String)]) -> String {
    let mut s = format!(
        "d={}\nr={}\nalphabet={}\nkind={}\n",
        law.d(),
        law.r(),
        law.alphabet().symbols().join(","),
        law.kind().as_str()
    );
    for (k, v) in extra_headers {
        s.push_str(&format!("{k}={v}\n"));
    }
    for (c, p) in law.atoms() {
        s.push_str(&format!("{} {}\n", format_coloring(&c, law.alphabet()), fmt17(p.to_f64_lossy())));
    }
    s
}

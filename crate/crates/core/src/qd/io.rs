//! Line-oriented text format for archives.
//!
//! ```text
//! #hte-archive 1
//! @layer top
//! @dims 2 6 9
//! @bounds -1.3:1.3 -1.3:1.3
//! @resolution 100 100
//! top,0,-0.02,0.41,-0.12,011111,0.41,-0.12,0.3,63,63,62,0.5,...
//! ```
//!
//! `@dims` gives the descriptor, outcome and genotype lengths. Any other
//! `@key value` line is kept verbatim as metadata. Elite lines are
//! `layer, id, fitness, bd..., mask, outcome..., genotype...` with the mask
//! written as six binary digits or `-` when absent. Floats use the shortest
//! decimal that parses back to the same value.

use std::fmt::Write as _;

use thiserror::Error;

use crate::gait::ContactMask;
use crate::scalar::Real;

use super::{Elite, Genotype};

pub const MAGIC: &str = "#hte-archive 1";

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing header field `{0}`")]
    Missing(&'static str),
}

fn perr(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

/// Parsed archive file: header fields plus elites in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveFile<T> {
    pub layer: String,
    pub bd_dim: usize,
    pub outcome_dim: usize,
    pub genotype_dim: usize,
    /// Extra `@key value` lines in order.
    pub meta: Vec<(String, String)>,
    pub elites: Vec<Elite<T>>,
}

impl<T: Real> ArchiveFile<T> {
    pub fn new(layer: &str, bd_dim: usize, outcome_dim: usize, genotype_dim: usize) -> Self {
        Self { layer: layer.to_string(), bd_dim, outcome_dim, genotype_dim, meta: Vec::new(), elites: Vec::new() }
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "@layer {}", self.layer).unwrap();
        writeln!(s, "@dims {} {} {}", self.bd_dim, self.outcome_dim, self.genotype_dim).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "@{k} {v}").unwrap();
        }
        for e in &self.elites {
            write_elite(&mut s, &self.layer, e);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut layer = None;
        let mut dims = None;
        let mut meta = Vec::new();
        let mut elites = Vec::new();
        let mut seen_magic = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if line == MAGIC {
                    seen_magic = true;
                } else if n == 0 {
                    return Err(perr(line_no, format!("unknown format `#{rest}`")));
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix('@') {
                let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
                match key {
                    "layer" => layer = Some(value.trim().to_string()),
                    "dims" => {
                        let v: Vec<usize> = value
                            .split_whitespace()
                            .map(|x| x.parse().map_err(|_| perr(line_no, "bad @dims")))
                            .collect::<Result<_, _>>()?;
                        if v.len() != 3 {
                            return Err(perr(line_no, "@dims needs three numbers"));
                        }
                        dims = Some((v[0], v[1], v[2]));
                    }
                    _ => meta.push((key.to_string(), value.trim().to_string())),
                }
                continue;
            }
            let (b, o, g) = dims.ok_or(FormatError::Missing("dims"))?;
            let layer_name = layer.as_deref().ok_or(FormatError::Missing("layer"))?;
            elites.push(parse_elite(line, line_no, layer_name, b, o, g)?);
        }
        if !seen_magic {
            return Err(perr(1, "missing archive magic line"));
        }
        let (bd_dim, outcome_dim, genotype_dim) = dims.ok_or(FormatError::Missing("dims"))?;
        Ok(Self { layer: layer.ok_or(FormatError::Missing("layer"))?, bd_dim, outcome_dim, genotype_dim, meta, elites })
    }
}

fn write_elite<T: Real>(s: &mut String, layer: &str, e: &Elite<T>) {
    write!(s, "{layer},{},{}", e.id, e.fitness).unwrap();
    for v in &e.bd {
        write!(s, ",{v}").unwrap();
    }
    match e.mask {
        Some(m) => write!(s, ",{m}").unwrap(),
        None => s.push_str(",-"),
    }
    for v in e.outcome.iter().chain(&e.genotype.0) {
        write!(s, ",{v}").unwrap();
    }
    s.push('\n');
}

fn parse_elite<T: Real>(
    line: &str,
    line_no: usize,
    layer: &str,
    bd_dim: usize,
    outcome_dim: usize,
    genotype_dim: usize,
) -> Result<Elite<T>, FormatError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let expected = 3 + bd_dim + 1 + outcome_dim + genotype_dim;
    if fields.len() != expected {
        return Err(perr(line_no, format!("expected {expected} fields, found {}", fields.len())));
    }
    if fields[0] != layer {
        return Err(perr(line_no, format!("layer `{}` does not match header `{layer}`", fields[0])));
    }
    let id: u64 = fields[1].parse().map_err(|_| perr(line_no, "bad elite id"))?;
    let num = |s: &str| s.parse::<T>().map_err(|_| perr(line_no, format!("bad number `{s}`")));
    let fitness = num(fields[2])?;
    let mut at = 3;
    let bd = fields[at..at + bd_dim].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
    at += bd_dim;
    let mask = match fields[at] {
        "-" => None,
        m => Some(m.parse::<ContactMask>().map_err(|e| perr(line_no, e))?),
    };
    at += 1;
    let outcome = fields[at..at + outcome_dim].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
    at += outcome_dim;
    let genotype = fields[at..].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(Elite { id, genotype: Genotype(genotype), bd, mask, fitness, outcome })
}

/// Formats a list of floats separated by `sep`.
pub fn join<T: Real>(values: &[T], sep: &str) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

/// `lo:hi` pairs separated by spaces.
pub fn format_bounds<T: Real>(bounds: &[(T, T)]) -> String {
    bounds.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect::<Vec<_>>().join(" ")
}

pub fn parse_bounds<T: Real>(s: &str) -> Result<Vec<(T, T)>, String> {
    s.split_whitespace()
        .map(|pair| {
            let (lo, hi) = pair.split_once(':').ok_or_else(|| format!("bad bounds `{pair}`"))?;
            let lo = lo.parse::<T>().map_err(|_| format!("bad bound `{lo}`"))?;
            let hi = hi.parse::<T>().map_err(|_| format!("bad bound `{hi}`"))?;
            Ok((lo, hi))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ArchiveFile<f64> {
        let mut f = ArchiveFile::new("middle", 3, 1, 2);
        f.set_meta("l", "0.05");
        f.set_meta("bounds", format_bounds(&[(-1.0, 1.0), (-1.0, 1.0), (-3.5, 3.5)]));
        f.elites.push(Elite {
            id: 4,
            genotype: Genotype(vec![0.1, 1.0 / 3.0]),
            bd: vec![0.1 + 0.2, -1e-300, std::f64::consts::PI],
            mask: Some(ContactMask::new(0b101101).unwrap()),
            fitness: -0.0,
            outcome: vec![7.0],
        });
        f.elites.push(Elite {
            id: 9,
            genotype: Genotype(vec![0.0, 1.0]),
            bd: vec![0.5, 0.5, 0.5],
            mask: None,
            fitness: -2.5,
            outcome: vec![f64::MIN_POSITIVE],
        });
        f
    }

    #[test]
    fn roundtrip_is_exact() {
        let f = sample();
        let text = f.to_text();
        let back = ArchiveFile::<f64>::parse(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.meta("l"), Some("0.05"));
        assert!(text.contains("middle,4,-0,0.30000000000000004,"));
    }

    #[test]
    fn rejects_bad_lines() {
        let text = sample().to_text();
        let broken = text.replace(",101101,", ",10110,");
        assert!(ArchiveFile::<f64>::parse(&broken).is_err());
        let short = text.replace(",-2.5,", ",");
        assert!(ArchiveFile::<f64>::parse(&short).is_err());
        assert!(ArchiveFile::<f64>::parse("@layer x\n").is_err());
    }

    #[test]
    fn bounds_roundtrip() {
        let b = vec![(-1.25, 1.25), (0.0, 0.6)];
        assert_eq!(parse_bounds::<f64>(&format_bounds(&b)).unwrap(), b);
    }

    proptest! {
        #[test]
        fn floats_survive_the_text_format(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            let mut f = ArchiveFile::new("bottom", 1, 0, 1);
            f.elites.push(Elite::new(Genotype(vec![v]), vec![v], v));
            let back = ArchiveFile::<f64>::parse(&f.to_text()).unwrap();
            prop_assert_eq!(back.elites[0].fitness.to_bits(), v.to_bits());
        }
    }
}

//! Archive files and the repertoire manifest.
//!
//! A trained hierarchy is a directory holding `bottom.txt`, `middle.txt`,
//! `top.txt` and `manifest.txt`. Flat repertoires are a single archive file.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::gait::LegDescriptor;
use crate::qd::io::{format_bounds, parse_bounds, ArchiveFile, FormatError};
use crate::qd::{Archive, Elite, GridArchive, ThresholdArchive};
use crate::util::sha256_hex;

use super::{FlatRepertoire, FlatVariant, Hbr, HbrBounds, HbrConfig, Layer, MiddleBank, BOTTOM_L, MIDDLE_L};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), StoreError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_layer_file(path: &Path) -> Result<ArchiveFile<f64>, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ArchiveFile::parse(&text).map_err(|source| StoreError::Format { path: path.to_path_buf(), source })
}

fn invalid(msg: impl Into<String>) -> StoreError {
    StoreError::Invalid(msg.into())
}

fn meta_f64(f: &ArchiveFile<f64>, key: &str) -> Result<f64, StoreError> {
    f.meta(key)
        .ok_or_else(|| invalid(format!("{} archive lacks @{key}", f.layer)))?
        .parse()
        .map_err(|_| invalid(format!("bad @{key} in {} archive", f.layer)))
}

fn meta_bounds(f: &ArchiveFile<f64>) -> Result<Vec<(f64, f64)>, StoreError> {
    let s = f.meta("bounds").ok_or_else(|| invalid(format!("{} archive lacks @bounds", f.layer)))?;
    parse_bounds(s).map_err(invalid)
}

fn expect_layer(f: &ArchiveFile<f64>, layer: &str) -> Result<(), StoreError> {
    if f.layer != layer {
        return Err(invalid(format!("expected a {layer} archive, found {}", f.layer)));
    }
    Ok(())
}

fn file_of<'a, I>(layer: &str, bd: usize, outcome: usize, genotype: usize, elites: I) -> ArchiveFile<f64>
where
    I: Iterator<Item = &'a Elite<f64>>,
{
    let mut f = ArchiveFile::new(layer, bd, outcome, genotype);
    f.elites.extend(elites.cloned());
    f
}

/// Provenance stamped into every layer file.
#[derive(Debug, Clone, PartialEq)]
pub struct Stamp {
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    fn apply(&self, f: &mut ArchiveFile<f64>) {
        f.set_meta("seed", self.seed.to_string());
        f.set_meta("config_hash", self.config_hash.clone());
    }
}

pub fn bottom_file(a: &ThresholdArchive<f64>, stamp: &Stamp) -> ArchiveFile<f64> {
    let mut f = file_of(Layer::Bottom.name(), 3, 3, 6, a.iter());
    f.set_meta("bounds", format_bounds(a.bounds()));
    f.set_meta("l", a.l().to_string());
    stamp.apply(&mut f);
    f
}

pub fn middle_file(b: &MiddleBank, stamp: &Stamp) -> ArchiveFile<f64> {
    let mut f = file_of(Layer::Middle.name(), 3, 9, 18, b.iter());
    f.set_meta("bounds", format_bounds(b.bounds()));
    f.set_meta("l", b.l().to_string());
    stamp.apply(&mut f);
    f
}

pub fn top_file(t: &GridArchive<f64>, stamp: &Stamp) -> ArchiveFile<f64> {
    let mut f = file_of(Layer::Top.name(), 2, 6, 9, t.iter());
    f.set_meta("bounds", format_bounds(t.bounds()));
    f.set_meta("resolution", res_string(t.resolution()));
    stamp.apply(&mut f);
    f
}

fn res_string(r: &[usize]) -> String {
    r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_res(f: &ArchiveFile<f64>) -> Result<Vec<usize>, StoreError> {
    f.meta("resolution")
        .ok_or_else(|| invalid(format!("{} archive lacks @resolution", f.layer)))?
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| invalid("bad @resolution")))
        .collect()
}

pub fn bottom_from(f: &ArchiveFile<f64>) -> Result<ThresholdArchive<f64>, StoreError> {
    expect_layer(f, Layer::Bottom.name())?;
    let bounds = meta_bounds(f)?;
    if bounds != LegDescriptor::<f64>::bounds().to_vec() {
        return Err(invalid("bottom archive bounds do not match the leg geometry"));
    }
    let mut a = ThresholdArchive::new(meta_f64(f, "l").unwrap_or(BOTTOM_L), bounds);
    for e in &f.elites {
        a.restore(e.clone());
    }
    Ok(a)
}

pub fn middle_from(f: &ArchiveFile<f64>) -> Result<MiddleBank, StoreError> {
    expect_layer(f, Layer::Middle.name())?;
    let bounds = meta_bounds(f)?;
    if bounds.len() != 3 {
        return Err(invalid("middle archive needs three bounds"));
    }
    let mut b = MiddleBank::new(meta_f64(f, "l").unwrap_or(MIDDLE_L), bounds);
    for e in &f.elites {
        if e.mask.is_none() {
            return Err(invalid(format!("middle elite {} has no contact mask", e.id)));
        }
        b.restore(e.clone());
    }
    Ok(b)
}

fn grid_from(f: &ArchiveFile<f64>, dims: usize) -> Result<GridArchive<f64>, StoreError> {
    let bounds = meta_bounds(f)?;
    let res = parse_res(f)?;
    if bounds.len() != dims || res.len() != dims {
        return Err(invalid(format!("{} archive geometry has the wrong dimension", f.layer)));
    }
    let mut g = GridArchive::new(bounds, res);
    for e in &f.elites {
        if !g.insert_with_id(e.clone()).accepted() {
            return Err(invalid(format!("{} elite {} collides with another elite", f.layer, e.id)));
        }
    }
    Ok(g)
}

pub fn top_from(f: &ArchiveFile<f64>) -> Result<GridArchive<f64>, StoreError> {
    expect_layer(f, Layer::Top.name())?;
    grid_from(f, 2)
}

pub fn flat_file(r: &FlatRepertoire, stamp: &Stamp) -> ArchiveFile<f64> {
    let mut f = file_of(r.variant.name(), r.variant.bd_dim(), 3, 36, r.archive.iter());
    f.set_meta("bounds", format_bounds(r.archive.bounds()));
    f.set_meta("resolution", res_string(r.archive.resolution()));
    f.set_meta("b_top", r.b_top.to_string());
    stamp.apply(&mut f);
    f
}

pub fn flat_from(f: &ArchiveFile<f64>) -> Result<FlatRepertoire, StoreError> {
    let variant = FlatVariant::parse(&f.layer).ok_or_else(|| invalid(format!("`{}` is not a flat archive", f.layer)))?;
    let archive = grid_from(f, variant.bd_dim())?;
    Ok(FlatRepertoire { variant, b_top: meta_f64(f, "b_top")?, archive })
}

impl FlatRepertoire {
    pub fn save(&self, path: &Path, stamp: &Stamp) -> Result<(), StoreError> {
        write_text(path, &flat_file(self, stamp).to_text())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        flat_from(&load_layer_file(path)?)
    }
}

pub fn layer_path(dir: &Path, layer: Layer) -> PathBuf {
    dir.join(format!("{}.txt", layer.name()))
}

/// Manifest text for a saved hierarchy.
pub fn manifest(cfg: &HbrConfig, stamp: &Stamp, bounds: &HbrBounds, hashes: &[(Layer, String)]) -> String {
    let mut s = String::from("format=hte-hbr 1\n");
    s += &format!("seed={}\nconfig_hash={}\n", stamp.seed, stamp.config_hash);
    s += &cfg.canonical();
    s += &format!("middle_bounds={}\n", format_bounds(&bounds.middle));
    let res = super::TOP_RESOLUTION;
    s += &format!("b_top={}\nbottom_l={BOTTOM_L}\nmiddle_l={MIDDLE_L}\ntop_resolution={res} {res}\n", bounds.b_top);
    for (layer, h) in hashes {
        s += &format!("{}_sha256={h}\n", layer.name());
    }
    s
}

impl Hbr {
    /// Writes the three layer files and the manifest into `dir`.
    pub fn save(&self, dir: &Path, cfg: &HbrConfig, seed: u64) -> Result<(), StoreError> {
        let stamp = Stamp { seed, config_hash: cfg.hash() };
        let files = [
            (Layer::Bottom, bottom_file(&self.bottom, &stamp)),
            (Layer::Middle, middle_file(&self.middle, &stamp)),
            (Layer::Top, top_file(&self.top, &stamp)),
        ];
        let mut hashes = Vec::new();
        for (layer, f) in &files {
            let text = f.to_text();
            write_text(&layer_path(dir, *layer), &text)?;
            hashes.push((*layer, sha256_hex(text.as_bytes())));
        }
        write_text(&dir.join(MANIFEST), &manifest(cfg, &stamp, &self.bounds, &hashes))
    }

    /// Loads a hierarchy from its three layer files.
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let bottom = bottom_from(&load_layer_file(&layer_path(dir, Layer::Bottom))?)?;
        let middle = middle_from(&load_layer_file(&layer_path(dir, Layer::Middle))?)?;
        let top = top_from(&load_layer_file(&layer_path(dir, Layer::Top))?)?;
        if bottom.is_empty() || middle.is_empty() {
            return Err(invalid("hierarchy has an empty lower layer"));
        }
        let mb = middle.bounds();
        let tb = top.bounds();
        let bounds = HbrBounds { middle: [mb[0], mb[1], mb[2]], b_top: tb[0].1 };
        Ok(Hbr::assemble(bounds, bottom, middle, top))
    }

    /// Content hash over the three layer files as they would be saved.
    pub fn content_hash(&self, cfg: &HbrConfig, seed: u64) -> String {
        let stamp = Stamp { seed, config_hash: cfg.hash() };
        let mut text = bottom_file(&self.bottom, &stamp).to_text();
        text += &middle_file(&self.middle, &stamp).to_text();
        text += &top_file(&self.top, &stamp).to_text();
        sha256_hex(text.as_bytes())
    }
}

//! Training commands: single layers into a hierarchy directory, whole
//! hierarchies, and flat repertoires.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::hbr::store::{bottom_file, bottom_from, layer_path, manifest, middle_file, middle_from, top_file, write_text, MANIFEST};
use crate::hbr::{
    default_bounds, load_layer_file, train_bottom, train_hbr, train_middle, train_top, FlatRepertoire, FlatVariant, Hbr, HbrConfig, HbrError,
    Layer, Stamp, StoreError,
};
use crate::qd::{metrics, Archive, ArchiveMetrics, EvolutionConfig, RunStats};
use crate::util::sha256_hex;

use super::config::{ConfigError, KvConfig};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing dependency archive: {0}")]
    Dependency(StoreError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Hbr(#[from] HbrError),
}

/// Hierarchy budgets from `population`, `eta_m` and
/// `{bottom,middle,top}.{generations,mutation_rate}`; unset keys keep the
/// desk values.
pub fn hbr_config_from_kv(c: &mut KvConfig) -> Result<HbrConfig, ConfigError> {
    let mut cfg = HbrConfig::desk();
    cfg.population = c.take_or("population", cfg.population)?;
    cfg.eta_m = c.take_or("eta_m", cfg.eta_m)?;
    for (name, s) in [("bottom", &mut cfg.bottom), ("middle", &mut cfg.middle), ("top", &mut cfg.top)] {
        s.generations = c.take_or(&format!("{name}.generations"), s.generations)?;
        s.mutation_rate = c.take_or(&format!("{name}.mutation_rate"), s.mutation_rate)?;
    }
    cfg.validate().map_err(ConfigError::Invalid)?;
    Ok(cfg)
}

/// Flat repertoire budget from `population`, `eta_m`, `generations` and
/// `mutation_rate`.
pub fn flat_config_from_kv(c: &mut KvConfig, seed: u64) -> Result<EvolutionConfig, ConfigError> {
    let mut cfg = flat_default(seed);
    cfg.population = c.take_or("population", cfg.population)?;
    cfg.eta_m = c.take_or("eta_m", cfg.eta_m)?;
    cfg.generations = c.take_or("generations", cfg.generations)?;
    cfg.mutation_rate = c.take_or("mutation_rate", cfg.mutation_rate)?;
    cfg.validate().map_err(ConfigError::Invalid)?;
    Ok(cfg)
}

pub fn flat_default(seed: u64) -> EvolutionConfig {
    EvolutionConfig::new(200, 2000, 0.14, seed)
}

fn flat_hash(cfg: &EvolutionConfig) -> String {
    let text = format!("population={}\neta_m={}\ngenerations={}\nmutation_rate={}\n", cfg.population, cfg.eta_m, cfg.generations, cfg.mutation_rate);
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// What a training command reports.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub label: String,
    pub stats: RunStats,
    pub metrics: ArchiveMetrics,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.metrics;
        write!(
            f,
            "{}: evaluations={} size={} coverage={:.4} effective_size={} mean_fitness={:.6} qd_score={:.3}",
            self.label, self.stats.evaluations, m.size, m.coverage, m.effective_size, m.mean_fitness, m.qd_score
        )
    }
}

fn dependency<T>(r: Result<T, StoreError>) -> Result<T, TrainError> {
    r.map_err(TrainError::Dependency)
}

/// Trains one layer into `dir`, reading the layers below it from the same
/// directory. Training the top layer also writes the manifest, so the
/// directory then loads as a hierarchy.
pub fn train_layer(layer: Layer, cfg: &HbrConfig, seed: u64, dir: &Path) -> Result<TrainSummary, TrainError> {
    let bounds = default_bounds();
    let stamp = Stamp { seed, config_hash: cfg.hash() };
    let (stats, m) = match layer {
        Layer::Bottom => {
            let (a, stats) = train_bottom(cfg, seed);
            write_text(&layer_path(dir, layer), &bottom_file(&a, &stamp).to_text())?;
            (stats, metrics(&a, None, 0.0, None))
        }
        Layer::Middle => {
            let bottom = dependency(load_layer_file(&layer_path(dir, Layer::Bottom)).and_then(|f| bottom_from(&f)))?;
            if bottom.is_empty() {
                return Err(HbrError::EmptyLayer("bottom").into());
            }
            let (bank, stats) = train_middle(cfg, seed, &bottom, &bounds);
            write_text(&layer_path(dir, layer), &middle_file(&bank, &stamp).to_text())?;
            (stats, metrics(&bank, None, 0.0, None))
        }
        Layer::Top => {
            let bottom = dependency(load_layer_file(&layer_path(dir, Layer::Bottom)).and_then(|f| bottom_from(&f)))?;
            let middle = dependency(load_layer_file(&layer_path(dir, Layer::Middle)).and_then(|f| middle_from(&f)))?;
            if middle.is_empty() {
                return Err(HbrError::EmptyLayer("middle").into());
            }
            let (top, stats) = train_top(cfg, seed, &middle, &bounds);
            write_text(&layer_path(dir, layer), &top_file(&top, &stamp).to_text())?;
            let hbr = Hbr::assemble(bounds, bottom, middle, top);
            write_manifest(&hbr, cfg, &stamp, dir)?;
            (stats, hbr.top_metrics())
        }
    };
    Ok(TrainSummary { label: layer.name().to_string(), stats, metrics: m })
}

fn write_manifest(hbr: &Hbr, cfg: &HbrConfig, stamp: &Stamp, dir: &Path) -> Result<(), StoreError> {
    let hashes: Vec<(Layer, String)> = [Layer::Bottom, Layer::Middle, Layer::Top]
        .iter()
        .map(|&l| {
            let text = match l {
                Layer::Bottom => bottom_file(&hbr.bottom, stamp).to_text(),
                Layer::Middle => middle_file(&hbr.middle, stamp).to_text(),
                Layer::Top => top_file(&hbr.top, stamp).to_text(),
            };
            (l, sha256_hex(text.as_bytes()))
        })
        .collect();
    write_text(&dir.join(MANIFEST), &manifest(cfg, stamp, &hbr.bounds, &hashes))
}

/// Trains all three layers and saves the hierarchy.
pub fn train_hierarchy(cfg: &HbrConfig, seed: u64, dir: &Path) -> Result<(Hbr, Vec<TrainSummary>), TrainError> {
    let (hbr, report) = train_hbr(cfg, seed, &default_bounds())?;
    hbr.save(dir, cfg, seed)?;
    let summaries = vec![
        TrainSummary { label: "bottom".into(), stats: report.bottom, metrics: metrics(&hbr.bottom, None, 0.0, None) },
        TrainSummary { label: "middle".into(), stats: report.middle, metrics: metrics(&hbr.middle, None, 0.0, None) },
        TrainSummary { label: "top".into(), stats: report.top, metrics: hbr.top_metrics() },
    ];
    Ok((hbr, summaries))
}

pub fn train_flat(variant: FlatVariant, cfg: &EvolutionConfig, path: &Path) -> Result<(FlatRepertoire, TrainSummary), TrainError> {
    let (rep, stats) = FlatRepertoire::train(variant, cfg, &default_bounds());
    rep.save(path, &Stamp { seed: cfg.seed, config_hash: flat_hash(cfg) })?;
    let m = rep.metrics();
    Ok((rep, TrainSummary { label: variant.name().to_string(), stats, metrics: m }))
}

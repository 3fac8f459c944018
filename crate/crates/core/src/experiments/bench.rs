//! Per-action planning time of each variant on the same maze.

use std::fmt::Write as _;

use crate::gait::DamageScenario;
use crate::hbr::SkillLibrary;
use crate::planner::{action_candidates, run_episode, EpisodeConfig, Maze, Variant};
use crate::util::{derive_seed, tag};

use super::config::{ConfigError, KvConfig};
use super::suite::episode_from_kv;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub repertoire: u64,
    pub damage: DamageScenario,
    pub episodes: usize,
    pub episode: EpisodeConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut episode = EpisodeConfig { max_actions: 10, timing: true, ..EpisodeConfig::default() };
        episode.plan.full_archive = true;
        Self {
            seed: 1,
            variants: vec![Variant::Hte, Variant::Rte2d, Variant::Rte8d],
            repertoire: 1,
            damage: DamageScenario::blocked(&[0]).expect("valid leg"),
            episodes: 2,
            episode,
        }
    }
}

impl BenchConfig {
    pub fn from_kv(mut c: KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let seed = c.take_or("seed", d.seed)?;
        let variants = c.take_list("variants", |s| Variant::parse(s).ok_or_else(|| format!("unknown variant `{s}`")))?.unwrap_or(d.variants);
        let repertoire = c.take_or("repertoire", d.repertoire)?;
        let damage = match c.take_str("damage") {
            Some(s) => DamageScenario::parse_label(&s).map_err(ConfigError::Invalid)?,
            None => d.damage,
        };
        let episodes = c.take_or("episodes", d.episodes)?;
        // bench defaults differ from battery defaults
        for (k, v) in [("max_actions", "10"), ("timing", "true"), ("full_archive", "true")] {
            if !c.contains(k) {
                c.set(k, v);
            }
        }
        let episode = episode_from_kv(&mut c)?;
        c.finish()?;
        if episodes == 0 || variants.is_empty() {
            return Err(ConfigError::Invalid("episodes and variants must be non-empty".into()));
        }
        episode.plan.validate().map_err(ConfigError::Invalid)?;
        Ok(Self { seed, variants, repertoire, damage, episodes, episode })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: Variant,
    /// Candidate actions per plan.
    pub action_set: usize,
    pub actions: usize,
    pub mean_plan_ms: f64,
}

pub fn bench_plan<'a>(cfg: &BenchConfig, library: &dyn Fn(Variant) -> Option<&'a dyn SkillLibrary>, maze: &Maze) -> Result<Vec<BenchRow>, String> {
    let mut rows = Vec::new();
    for &v in &cfg.variants {
        let lib = library(v).ok_or_else(|| format!("no repertoire for {}", v.name()))?;
        let (mut total_ms, mut actions) = (0.0, 0);
        let mut action_set = 0;
        for k in 0..cfg.episodes {
            let seed = derive_seed(cfg.seed, &[tag("bench"), tag(v.name()), k as u64]);
            action_set = action_candidates(lib, &cfg.episode.plan, seed).len();
            let ep = run_episode(lib, v, &cfg.damage, maze, &cfg.episode, seed);
            total_ms += ep.steps.iter().map(|s| s.plan_ms).sum::<f64>();
            actions += ep.actions();
        }
        rows.push(BenchRow { variant: v, action_set, actions, mean_plan_ms: if actions == 0 { 0.0 } else { total_ms / actions as f64 } });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("variant,action_set,actions,mean_plan_ms\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.3}", r.variant.name(), r.action_set, r.actions, r.mean_plan_ms);
    }
    s
}

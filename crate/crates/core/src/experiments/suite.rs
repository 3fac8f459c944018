//! Damage batteries: per-episode seeding, resumable execution over log
//! files, and aggregate statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::gait::{DamageScenario, MIDDLE_LEGS, NUM_LEGS};
use crate::hbr::{FlatRepertoire, Hbr, SkillLibrary, StoreError};
use crate::planner::{parse_log, run_episode, EpisodeConfig, LogSummary, Maze, Variant};
use crate::util::{derive_seed, tag};

use super::config::{ConfigError, KvConfig};
use super::stats::{bonferroni, median, percentile, rank_sum};

/// Six single blocked legs and both middle legs blocked together.
pub fn standard_damages() -> Vec<DamageScenario> {
    (0..NUM_LEGS)
        .map(|l| DamageScenario::blocked(&[l]).expect("valid leg"))
        .chain([DamageScenario::blocked(&MIDDLE_LEGS).expect("valid legs")])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub damages: Vec<DamageScenario>,
    /// Training seeds of the repertoires.
    pub repertoires: Vec<u64>,
    pub replications: usize,
    pub episode: EpisodeConfig,
    /// Maze file; the canonical maze when absent.
    pub maze: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            variants: Variant::ALL.to_vec(),
            damages: standard_damages(),
            repertoires: vec![1, 2, 3, 4],
            replications: 10,
            episode: EpisodeConfig::default(),
            maze: None,
        }
    }
}

impl SuiteConfig {
    /// Reads suite keys; planner and GP keys are shared with [`episode_from_kv`].
    pub fn from_kv(mut c: KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let seed = c.take_or("seed", d.seed)?;
        let variants = c.take_list("variants", |s| Variant::parse(s).ok_or_else(|| format!("unknown variant `{s}`")))?.unwrap_or(d.variants);
        let damages = c.take_list("damages", DamageScenario::parse_label)?.unwrap_or(d.damages);
        let repertoires = c.take_list("repertoires", |s| s.parse::<u64>().map_err(|e| e.to_string()))?.unwrap_or(d.repertoires);
        let replications = c.take_or("replications", d.replications)?;
        let maze = c.take_str("maze").map(PathBuf::from);
        let episode = episode_from_kv(&mut c)?;
        c.finish()?;
        let s = Self { seed, variants, damages, repertoires, replications, episode, maze };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.variants.is_empty() || self.damages.is_empty() || self.repertoires.is_empty() {
            return bad("variants, damages and repertoires must be non-empty");
        }
        if self.episode.max_actions == 0 {
            return bad("max_actions must be at least 1");
        }
        self.episode.plan.validate().map_err(ConfigError::Invalid)
    }

    pub fn load_maze(&self) -> Result<Maze, SuiteError> {
        match &self.maze {
            None => Ok(crate::planner::canonical_maze()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| SuiteError::Io(p.clone(), e.to_string()))?;
                Maze::parse(&text).map_err(|e| SuiteError::Config(ConfigError::Invalid(format!("{}: {e}", p.display()))))
            }
        }
    }

    /// Every episode of the battery in a fixed order.
    pub fn episodes(&self) -> Vec<EpisodeKey> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for damage in &self.damages {
                for &repertoire in &self.repertoires {
                    for replication in 0..self.replications {
                        out.push(EpisodeKey { variant, damage: *damage, repertoire, replication });
                    }
                }
            }
        }
        out
    }
}

/// Planner, GP and episode keys: `max_actions`, `beta`, `roots`,
/// `iterations`, `max_depth`, `uct_c`, `discount`, `action_set_size`,
/// `full_archive`, `collision_penalty`, `action_cost`, `goal_bonus`,
/// `best_mask_planning`, `timing`.
pub fn episode_from_kv(c: &mut KvConfig) -> Result<EpisodeConfig, ConfigError> {
    let mut e = EpisodeConfig::default();
    e.max_actions = c.take_or("max_actions", e.max_actions)?;
    e.beta = c.take_or("beta", e.beta)?;
    e.best_mask_planning = c.take_or("best_mask_planning", e.best_mask_planning)?;
    e.timing = c.take_or("timing", e.timing)?;
    let p = &mut e.plan;
    p.roots = c.take_or("roots", p.roots)?;
    p.iterations = c.take_or("iterations", p.iterations)?;
    p.max_depth = c.take_or("max_depth", p.max_depth)?;
    p.uct_c = c.take_or("uct_c", p.uct_c)?;
    p.discount = c.take_or("discount", p.discount)?;
    p.action_set_size = c.take_or("action_set_size", p.action_set_size)?;
    p.full_archive = c.take_or("full_archive", p.full_archive)?;
    p.collision_penalty = c.take_or("collision_penalty", p.collision_penalty)?;
    p.action_cost = c.take_or("action_cost", p.action_cost)?;
    p.goal_bonus = c.take_or("goal_bonus", p.goal_bonus)?;
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeKey {
    pub variant: Variant,
    pub damage: DamageScenario,
    pub repertoire: u64,
    pub replication: usize,
}

impl EpisodeKey {
    pub fn seed(&self, suite_seed: u64) -> u64 {
        derive_seed(suite_seed, &[tag(self.variant.name()), tag(&self.damage.label()), self.repertoire, self.replication as u64])
    }

    pub fn log_path(&self, out: &Path) -> PathBuf {
        out.join("logs")
            .join(self.variant.name())
            .join(self.damage.label())
            .join(format!("rep{}-{:03}.log", self.repertoire, self.replication))
    }
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}: {1}")]
    Io(PathBuf, String),
    #[error("missing archive {0}: {1}")]
    Archive(PathBuf, StoreError),
    #[error("{0}: {1}")]
    Log(PathBuf, String),
}

/// Conventional archive locations inside an archive directory.
pub fn hbr_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("hbr-{seed}"))
}

pub fn flat_path(dir: &Path, name: &str, seed: u64) -> PathBuf {
    dir.join(format!("{name}-{seed}.txt"))
}

/// Repertoires of one training seed; only those a suite needs are loaded.
#[derive(Default)]
pub struct Repertoires {
    pub hbr: Option<Hbr>,
    pub flat2d: Option<FlatRepertoire>,
    pub flat8d: Option<FlatRepertoire>,
}

impl Repertoires {
    pub fn load(dir: &Path, seed: u64, variants: &[Variant]) -> Result<Self, SuiteError> {
        let mut r = Self::default();
        if variants.iter().any(|v| v.hierarchical()) {
            let p = hbr_dir(dir, seed);
            r.hbr = Some(Hbr::load(&p).map_err(|e| SuiteError::Archive(p, e))?);
        }
        for (v, name, slot) in [(Variant::Rte2d, "flat2d", &mut r.flat2d), (Variant::Rte8d, "flat8d", &mut r.flat8d)] {
            if variants.contains(&v) {
                let p = flat_path(dir, name, seed);
                *slot = Some(FlatRepertoire::load(&p).map_err(|e| SuiteError::Archive(p, e))?);
            }
        }
        Ok(r)
    }

    pub fn library(&self, variant: Variant) -> Option<&dyn SkillLibrary> {
        match variant {
            Variant::Hte | Variant::HteRandom | Variant::HtePerfect => self.hbr.as_ref().map(|h| h as &dyn SkillLibrary),
            Variant::Rte2d => self.flat2d.as_ref().map(|f| f as &dyn SkillLibrary),
            Variant::Rte8d => self.flat8d.as_ref().map(|f| f as &dyn SkillLibrary),
        }
    }
}

/// Repertoires of several training seeds.
#[derive(Default)]
pub struct RepertoireSet {
    pub sets: Vec<(u64, Repertoires)>,
}

impl RepertoireSet {
    pub fn load(dir: &Path, seeds: &[u64], variants: &[Variant]) -> Result<Self, SuiteError> {
        let sets = seeds.iter().map(|&s| Repertoires::load(dir, s, variants).map(|r| (s, r))).collect::<Result<_, _>>()?;
        Ok(Self { sets })
    }

    pub fn library(&self, seed: u64, variant: Variant) -> Option<&dyn SkillLibrary> {
        self.sets.iter().find(|(s, _)| *s == seed).and_then(|(_, r)| r.library(variant))
    }
}

/// Stop requests shared with a signal handler, plus an optional cap on
/// newly run episodes.
#[derive(Debug, Default)]
pub struct RunControl {
    pub stop: AtomicBool,
    pub max_new: Option<usize>,
    started: AtomicUsize,
}

impl RunControl {
    pub fn with_budget(max_new: Option<usize>) -> Self {
        Self { max_new, ..Self::default() }
    }

    fn admit(&self) -> bool {
        if self.stop.load(Ordering::SeqCst) {
            return false;
        }
        let k = self.started.fetch_add(1, Ordering::SeqCst);
        self.max_new.map_or(true, |m| k < m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub total: usize,
    /// Episodes whose complete logs already existed.
    pub reused: usize,
    pub ran: usize,
}

impl RunOutcome {
    pub fn complete(&self) -> bool {
        self.reused + self.ran == self.total
    }
}

/// A complete log for `key`, if one exists on disk.
fn existing(path: &Path, key: &EpisodeKey, seed: u64) -> Option<LogSummary> {
    let text = fs::read_to_string(path).ok()?;
    let log = parse_log(&text).ok()?;
    (log.complete && log.seed == seed && log.variant == key.variant.name() && log.damage == key.damage.label()).then_some(log)
}

fn write_atomic(path: &Path, text: &str) -> Result<(), SuiteError> {
    let io = |e: std::io::Error| SuiteError::Io(path.to_path_buf(), e.to_string());
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Runs every episode without a complete log. Episodes run in parallel;
/// each writes its GP state and then its log when it finishes.
pub fn run_suite<'a>(
    suite: &SuiteConfig,
    library: &(dyn Fn(u64, Variant) -> Option<&'a dyn SkillLibrary> + Sync),
    maze: &Maze,
    out: &Path,
    control: &RunControl,
) -> Result<RunOutcome, SuiteError> {
    let keys = suite.episodes();
    let pending: Vec<&EpisodeKey> = keys.iter().filter(|k| existing(&k.log_path(out), k, k.seed(suite.seed)).is_none()).collect();
    let reused = keys.len() - pending.len();
    for k in &pending {
        if library(k.repertoire, k.variant).is_none() {
            return Err(SuiteError::Config(ConfigError::Invalid(format!("no {} repertoire for seed {}", k.variant.name(), k.repertoire))));
        }
    }
    let ran = AtomicUsize::new(0);
    pending.par_iter().try_for_each(|k| -> Result<(), SuiteError> {
        if !control.admit() {
            return Ok(());
        }
        let lib = library(k.repertoire, k.variant).expect("checked above");
        let seed = k.seed(suite.seed);
        let ep = run_episode(lib, k.variant, &k.damage, maze, &suite.episode, seed);
        let path = k.log_path(out);
        write_atomic(&path.with_extension("gp"), &ep.gp.to_text())?;
        write_atomic(&path, &ep.to_log())?;
        ran.fetch_add(1, Ordering::SeqCst);
        Ok(())
    })?;
    Ok(RunOutcome { total: keys.len(), reused, ran: ran.into_inner() })
}

/// Result of one completed episode as read back from its log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub key: EpisodeKey,
    pub actions: usize,
    pub success: bool,
    pub mean_plan_ms: f64,
}

/// Reads every log of the suite; fails if any is missing or incomplete.
pub fn collect(suite: &SuiteConfig, out: &Path) -> Result<Vec<EpisodeResult>, SuiteError> {
    suite
        .episodes()
        .into_iter()
        .map(|key| {
            let path = key.log_path(out);
            let log = existing(&path, &key, key.seed(suite.seed)).ok_or_else(|| SuiteError::Log(path.clone(), "missing or incomplete log".into()))?;
            Ok(EpisodeResult { key, actions: log.actions, success: log.success, mean_plan_ms: log.mean_plan_ms() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub variant: Variant,
    /// `None` pools every damage.
    pub damage: Option<DamageScenario>,
    pub episodes: usize,
    pub median: usize,
    pub p25: usize,
    pub p75: usize,
    pub failure_fraction: f64,
    pub mean_plan_ms: f64,
}

impl GroupStats {
    fn new(variant: Variant, damage: Option<DamageScenario>, rs: &[&EpisodeResult]) -> Option<Self> {
        let actions: Vec<usize> = rs.iter().map(|r| r.actions).collect();
        let n = rs.len();
        Some(Self {
            variant,
            damage,
            episodes: n,
            median: median(&actions)?,
            p25: percentile(&actions, 25.0)?,
            p75: percentile(&actions, 75.0)?,
            failure_fraction: rs.iter().filter(|r| !r.success).count() as f64 / n as f64,
            mean_plan_ms: rs.iter().map(|r| r.mean_plan_ms * r.actions as f64).sum::<f64>() / (rs.iter().map(|r| r.actions).sum::<usize>().max(1)) as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTest {
    pub a: Variant,
    pub b: Variant,
    pub u: f64,
    pub p: f64,
    pub p_bonferroni: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub groups: Vec<GroupStats>,
    /// Pairwise rank-sum tests on pooled action counts.
    pub tests: Vec<PairTest>,
}

impl StatsReport {
    pub fn new(variants: &[Variant], damages: &[DamageScenario], results: &[EpisodeResult]) -> Self {
        let mut groups = Vec::new();
        for &v in variants {
            for d in damages {
                let rs: Vec<&EpisodeResult> = results.iter().filter(|r| r.key.variant == v && r.key.damage == *d).collect();
                groups.extend(GroupStats::new(v, Some(*d), &rs));
            }
            let rs: Vec<&EpisodeResult> = results.iter().filter(|r| r.key.variant == v).collect();
            groups.extend(GroupStats::new(v, None, &rs));
        }
        let pooled = |v: Variant| -> Vec<f64> { results.iter().filter(|r| r.key.variant == v).map(|r| r.actions as f64).collect() };
        let mut tests = Vec::new();
        for (i, &a) in variants.iter().enumerate() {
            for &b in &variants[i + 1..] {
                let r = rank_sum(&pooled(a), &pooled(b));
                tests.push(PairTest { a, b, u: r.u, p: r.p, p_bonferroni: 0.0 });
            }
        }
        let m = tests.len();
        for t in &mut tests {
            t.p_bonferroni = bonferroni(t.p, m);
        }
        Self { groups, tests }
    }

    pub fn pooled(&self, v: Variant) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.variant == v && g.damage.is_none())
    }

    pub fn test(&self, a: Variant, b: Variant) -> Option<&PairTest> {
        self.tests.iter().find(|t| (t.a, t.b) == (a, b) || (t.a, t.b) == (b, a))
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("variant,damage,episodes,median,p25,p75,failure_fraction,mean_plan_ms\n");
        for g in &self.groups {
            let d = g.damage.map_or("all".to_string(), |d| d.label());
            let _ = writeln!(s, "{},{},{},{},{},{},{:.4},{:.3}", g.variant.name(), d, g.episodes, g.median, g.p25, g.p75, g.failure_fraction, g.mean_plan_ms);
        }
        s
    }

    pub fn ranksum_csv(&self) -> String {
        let mut s = String::from("a,b,u,p,p_bonferroni\n");
        for t in &self.tests {
            let _ = writeln!(s, "{},{},{},{:.6e},{:.6e}", t.a.name(), t.b.name(), t.u, t.p, t.p_bonferroni);
        }
        s
    }
}

/// Writes `summary.csv` and `ranksum.csv` into `out`.
pub fn write_report(report: &StatsReport, out: &Path) -> Result<(), SuiteError> {
    write_atomic(&out.join("summary.csv"), &report.summary_csv())?;
    write_atomic(&out.join("ranksum.csv"), &report.ranksum_csv())
}

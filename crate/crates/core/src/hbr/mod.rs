//! Three-layer hierarchical behavioural repertoire and the flat baselines.
//!
//! Bottom: single-leg controllers in a threshold archive over
//! (height, swing, duty). Middle: 1 s gaits that pick six bottom entries,
//! stored per contact mask over the (x, y, yaw) displacement. Top: 3 s skills
//! chaining three middle gaits, on a 100×100 grid over (x, y).
//!
//! Upper genotypes are coordinates in the normalised descriptor space of the
//! layer below; they are decoded by nearest-descriptor lookup.

mod bank;
mod eval;
mod flat;
pub mod store;

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gait::{simulate_gait, ContactMask, DamageScenario, LegGenotype, NUM_LEGS};
use crate::qd::{
    map_elites, metrics, Archive, ArchiveMetrics, EvolutionConfig, Genotype, GridArchive, Projection,
    RunStats, ThresholdArchive,
};
use crate::se2::{wrap_angle, Pose2};
use crate::util::{derive_seed, sha256_hex, tag};

pub use bank::MiddleBank;
pub use eval::{decode_legs, BottomEval, MiddleEval, TopEval};
pub use flat::{FlatEval, FlatRepertoire, FlatVariant};
pub use store::{load_layer_file, Stamp, StoreError};

pub const BOTTOM_L: f64 = 0.01;
pub const MIDDLE_L: f64 = 0.05;
pub const TOP_RESOLUTION: usize = 100;
/// Gaits chained by one top-layer skill.
pub const SEGMENTS: usize = 3;
pub const SEGMENT_DURATION: f64 = 1.0;
pub const SKILL_DURATION: f64 = 3.0;
/// A masked lookup falls back to the whole bank beyond this many `l`.
pub const FALLBACK_FACTOR: f64 = 3.0;
/// Random gaits sampled to size the descriptor bounds.
pub const PILOT_SAMPLES: usize = 10_000;
pub const PILOT_SEED: u64 = 0;
/// Bounds are this much wider than the largest pilot displacement.
pub const PILOT_MARGIN: f64 = 1.1;

/// Orientation error against the circular arc through the start and end
/// points: 0 for a perfect arc, down to `-pi`.
pub fn arc_fitness(p: &Pose2<f64>) -> f64 {
    -wrap_angle(p.yaw - 2.0 * p.y.atan2(p.x)).abs()
}

pub(crate) fn pose_of(v: &[f64]) -> Pose2<f64> {
    Pose2 { x: v[0], y: v[1], yaw: v[2] }
}

#[derive(Debug, Error)]
pub enum HbrError {
    #[error("{0} layer ended empty")]
    EmptyLayer(&'static str),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Descriptor bounds of the middle and top layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbrBounds {
    /// x, y and yaw of a 1 s gait.
    pub middle: [(f64, f64); 3],
    /// Half width of the square top grid.
    pub b_top: f64,
}

impl HbrBounds {
    pub fn top(&self) -> Vec<(f64, f64)> {
        vec![(-self.b_top, self.b_top); 2]
    }

    pub fn projection(&self) -> Projection<f64> {
        Projection::square(self.b_top, TOP_RESOLUTION)
    }
}

/// Summary of the random-gait pilot that sizes the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotReport {
    pub samples: usize,
    /// Largest |x|, |y| over 1 s.
    pub max_1s: [f64; 2],
    /// Largest |x|, |y| over 3 s.
    pub max_3s: [f64; 2],
    pub median_3s_distance: f64,
    pub distinct_masks: usize,
    pub bounds: HbrBounds,
}

/// Simulates `samples` uniform random flat gaits.
pub fn pilot(samples: usize, seed: u64) -> PilotReport {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genomes: Vec<Vec<f64>> = (0..samples).map(|_| (0..6 * NUM_LEGS).map(|_| rng.gen()).collect()).collect();
    let mut max_1s = [0.0f64; 2];
    let mut max_3s = [0.0f64; 2];
    let mut dists = Vec::with_capacity(samples);
    let mut masks = [false; 64];
    for g in &genomes {
        let legs = decode_legs(g);
        let out = simulate_gait(&legs, &DamageScenario::none(), SKILL_DURATION).expect("whole periods");
        let one = out.trajectory[crate::gait::STEPS_PER_PERIOD];
        max_1s = [max_1s[0].max(one.x.abs()), max_1s[1].max(one.y.abs())];
        let d = out.displacement;
        max_3s = [max_3s[0].max(d.x.abs()), max_3s[1].max(d.y.abs())];
        dists.push(d.translation_norm());
        masks[out.mask.index()] = true;
    }
    dists.sort_by(f64::total_cmp);
    let half_1s = PILOT_MARGIN * max_1s[0].max(max_1s[1]);
    let pi = std::f64::consts::PI;
    PilotReport {
        samples,
        max_1s,
        max_3s,
        median_3s_distance: dists.get(samples / 2).copied().unwrap_or(0.0),
        distinct_masks: masks.iter().filter(|&&m| m).count(),
        bounds: HbrBounds {
            middle: [(-half_1s, half_1s), (-half_1s, half_1s), (-pi, pi)],
            b_top: PILOT_MARGIN * max_3s[0].max(max_3s[1]),
        },
    }
}

/// Bounds from the standard pilot, computed once per process.
pub fn default_bounds() -> HbrBounds {
    static BOUNDS: OnceLock<HbrBounds> = OnceLock::new();
    *BOUNDS.get_or_init(|| pilot(PILOT_SAMPLES, PILOT_SEED).bounds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSchedule {
    pub generations: usize,
    pub mutation_rate: f64,
}

/// Budgets of the three layers.
#[derive(Debug, Clone, PartialEq)]
pub struct HbrConfig {
    pub population: usize,
    pub eta_m: f64,
    pub bottom: LayerSchedule,
    pub middle: LayerSchedule,
    pub top: LayerSchedule,
}

impl Default for HbrConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl HbrConfig {
    /// Reduced budgets that train in seconds.
    pub fn desk() -> Self {
        Self {
            population: 200,
            eta_m: 10.0,
            bottom: LayerSchedule { generations: 300, mutation_rate: 0.17 },
            middle: LayerSchedule { generations: 600, mutation_rate: 0.11 },
            top: LayerSchedule { generations: 400, mutation_rate: 0.14 },
        }
    }

    /// The original budgets.
    pub fn full() -> Self {
        let mut c = Self::desk();
        c.bottom.generations = 5001;
        c.middle.generations = 30_000;
        c.top.generations = 20_000;
        c
    }

    pub fn schedule(&self, layer: Layer) -> LayerSchedule {
        match layer {
            Layer::Bottom => self.bottom,
            Layer::Middle => self.middle,
            Layer::Top => self.top,
        }
    }

    pub fn evolution(&self, layer: Layer, seed: u64) -> EvolutionConfig {
        let s = self.schedule(layer);
        EvolutionConfig {
            population: self.population,
            generations: s.generations,
            mutation_rate: s.mutation_rate,
            eta_m: self.eta_m,
            seed: derive_seed(seed, &[tag(layer.name())]),
        }
    }

    pub fn total_evaluations(&self) -> usize {
        [Layer::Bottom, Layer::Middle, Layer::Top]
            .iter()
            .map(|&l| self.population * (self.schedule(l).generations + 1))
            .sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        for layer in [Layer::Bottom, Layer::Middle, Layer::Top] {
            self.evolution(layer, 0).validate().map_err(|e| format!("{} layer: {e}", layer.name()))?;
        }
        Ok(())
    }

    /// Canonical `key=value` text; its hash identifies the configuration.
    pub fn canonical(&self) -> String {
        let mut s = format!("population={}\neta_m={}\n", self.population, self.eta_m);
        for layer in [Layer::Bottom, Layer::Middle, Layer::Top] {
            let sch = self.schedule(layer);
            s += &format!("{0}.generations={1}\n{0}.mutation_rate={2}\n", layer.name(), sch.generations, sch.mutation_rate);
        }
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())[..16].to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Bottom,
    Middle,
    Top,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Layer::Bottom => "bottom",
            Layer::Middle => "middle",
            Layer::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bottom" => Some(Layer::Bottom),
            "middle" => Some(Layer::Middle),
            "top" => Some(Layer::Top),
            _ => None,
        }
    }
}

pub fn new_bottom_archive() -> ThresholdArchive<f64> {
    ThresholdArchive::new(BOTTOM_L, crate::gait::LegDescriptor::bounds().to_vec())
}

pub fn new_middle_bank(bounds: &HbrBounds) -> MiddleBank {
    MiddleBank::new(MIDDLE_L, bounds.middle.to_vec())
}

pub fn new_top_archive(bounds: &HbrBounds) -> GridArchive<f64> {
    GridArchive::new(bounds.top(), vec![TOP_RESOLUTION; 2])
}

pub fn train_bottom(cfg: &HbrConfig, seed: u64) -> (ThresholdArchive<f64>, RunStats) {
    let mut a = new_bottom_archive();
    let stats = map_elites(&BottomEval, &cfg.evolution(Layer::Bottom, seed), &mut a);
    (a, stats)
}

pub fn train_middle(cfg: &HbrConfig, seed: u64, bottom: &ThresholdArchive<f64>, bounds: &HbrBounds) -> (MiddleBank, RunStats) {
    let mut bank = new_middle_bank(bounds);
    let stats = map_elites(&MiddleEval { bottom }, &cfg.evolution(Layer::Middle, seed), &mut bank);
    (bank, stats)
}

pub fn train_top(cfg: &HbrConfig, seed: u64, middle: &MiddleBank, bounds: &HbrBounds) -> (GridArchive<f64>, RunStats) {
    let mut top = new_top_archive(bounds);
    let stats = map_elites(&TopEval { middle }, &cfg.evolution(Layer::Top, seed), &mut top);
    (top, stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub bottom: RunStats,
    pub middle: RunStats,
    pub top: RunStats,
}

/// Trains the three layers bottom-up.
pub fn train_hbr(cfg: &HbrConfig, seed: u64, bounds: &HbrBounds) -> Result<(Hbr, TrainReport), HbrError> {
    let (bottom, sb) = train_bottom(cfg, seed);
    if bottom.is_empty() {
        return Err(HbrError::EmptyLayer("bottom"));
    }
    let (middle, sm) = train_middle(cfg, seed, &bottom, bounds);
    if middle.is_empty() {
        return Err(HbrError::EmptyLayer("middle"));
    }
    let (top, st) = train_top(cfg, seed, &middle, bounds);
    if top.is_empty() {
        return Err(HbrError::EmptyLayer("top"));
    }
    let hbr = Hbr::assemble(*bounds, bottom, middle, top);
    Ok((hbr, TrainReport { bottom: sb, middle: sm, top: st }))
}

/// How a skill picks the middle gait of each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskChoice {
    /// Whatever the skill used in training (the unrestricted nearest gait).
    Training,
    /// One contact mask for the whole skill.
    Same(ContactMask),
    PerSegment([ContactMask; SEGMENTS]),
}

/// Result of running a skill from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    /// Final pose in the start-of-skill body frame.
    pub displacement: Pose2<f64>,
    /// Body poses at every control step in the start frame, starting with the identity.
    pub trajectory: Vec<Pose2<f64>>,
    /// Contact mask measured in each segment.
    pub realized: Vec<ContactMask>,
    /// Masked lookups that had to fall back to the whole bank.
    pub fallbacks: usize,
}

impl Execution {
    /// Realised masks all equal `mask`.
    pub fn realizes(&self, mask: ContactMask) -> bool {
        self.realized.iter().all(|&m| m == mask)
    }
}

/// A trained, immutable hierarchy.
#[derive(Debug, Clone)]
pub struct Hbr {
    pub bounds: HbrBounds,
    pub bottom: ThresholdArchive<f64>,
    pub middle: MiddleBank,
    pub top: GridArchive<f64>,
    /// Decoded leg controllers of every middle elite, by bank position.
    middle_legs: Vec<[LegGenotype<f64>; NUM_LEGS]>,
}

impl Hbr {
    pub fn assemble(bounds: HbrBounds, bottom: ThresholdArchive<f64>, middle: MiddleBank, top: GridArchive<f64>) -> Self {
        let middle_legs = (0..middle.len())
            .map(|p| eval::resolve_legs(&bottom, &middle.get(p).genotype.0).expect("bottom layer is not empty"))
            .collect();
        Self { bounds, bottom, middle, top, middle_legs }
    }

    pub fn middle_legs(&self, pos: usize) -> &[LegGenotype<f64>; NUM_LEGS] {
        &self.middle_legs[pos]
    }

    /// Training-time contact masks of the three segments of a top elite.
    pub fn training_masks(&self, slot: usize) -> [ContactMask; SEGMENTS] {
        let o = &self.top.get(slot).outcome;
        std::array::from_fn(|k| ContactMask::from_index(o[3 + k] as usize))
    }

    /// Middle gait for a normalised query, honouring `mask` when it has an
    /// entry within the fallback radius; the flag reports a fallback.
    pub fn resolve(&self, q: &[f64], mask: Option<ContactMask>) -> (usize, bool) {
        if let Some(m) = mask {
            if let Some((pos, d)) = self.middle.nearest(q, Some(m)) {
                if d <= FALLBACK_FACTOR * self.middle.l() {
                    return (pos, false);
                }
            }
        }
        let (pos, _) = self.middle.nearest(q, None).expect("middle layer is not empty");
        (pos, mask.is_some())
    }

    pub fn execute_skill(&self, slot: usize, choice: MaskChoice, damage: &DamageScenario) -> Execution {
        let genes = &self.top.get(slot).genotype.0;
        let training = self.training_masks(slot);
        let mut pose = Pose2::identity();
        let mut trajectory = Vec::with_capacity(SEGMENTS * crate::gait::STEPS_PER_PERIOD + 1);
        trajectory.push(pose);
        let mut realized = Vec::with_capacity(SEGMENTS);
        let mut fallbacks = 0;
        for (k, q) in genes.chunks_exact(3).enumerate() {
            let (pos, fell_back) = match choice {
                MaskChoice::Training => (self.resolve(q, Some(training[k])).0, false),
                MaskChoice::Same(m) => self.resolve(q, Some(m)),
                MaskChoice::PerSegment(ms) => self.resolve(q, Some(ms[k])),
            };
            fallbacks += fell_back as usize;
            let out = simulate_gait(&self.middle_legs[pos], damage, SEGMENT_DURATION).expect("one period");
            trajectory.extend(out.trajectory[1..].iter().map(|p| pose.compose(p)));
            pose = pose.compose(&out.displacement);
            realized.push(out.mask);
        }
        Execution { displacement: pose, trajectory, realized, fallbacks }
    }

    pub fn top_metrics(&self) -> ArchiveMetrics {
        metrics(&self.top, Some(self.top.capacity()), -std::f64::consts::PI, Some(&self.bounds.projection()))
    }

    /// Re-derives every stored descriptor from genotypes. Returns the first
    /// mismatch found.
    pub fn verify(&self) -> Result<(), String> {
        for p in 0..self.middle.len() {
            let e = self.middle.get(p);
            let ev = MiddleEval { bottom: &self.bottom }.run(&Genotype(e.genotype.0.clone())).map_err(|e| e.to_string())?;
            if ev.bd != e.bd || ev.mask != e.mask {
                return Err(format!("middle elite {} does not reproduce its descriptor", e.id));
            }
        }
        for s in 0..self.top.len() {
            let e = self.top.get(s);
            let ev = TopEval { middle: &self.middle }.run(&e.genotype).map_err(|e| e.to_string())?;
            if ev.bd != e.bd || ev.outcome != e.outcome {
                return Err(format!("top elite {} does not reproduce its descriptor", e.id));
            }
            if self.top.cell_of(&e.bd) != self.top.cell_of_slot(s) {
                return Err(format!("top elite {} is in the wrong cell", e.id));
            }
        }
        Ok(())
    }

    /// Prior displacement of a top elite.
    pub fn prior(&self, slot: usize) -> Pose2<f64> {
        pose_of(&self.top.get(slot).outcome)
    }
}

/// Skills the planner can choose from.
pub trait SkillLibrary: Sync {
    fn skill_count(&self) -> usize;
    /// Grid cell, for deterministic tie breaking.
    fn skill_cell(&self, i: usize) -> usize;
    /// Displacement recorded in the archive.
    fn skill_prior(&self, i: usize) -> Pose2<f64>;
    /// Leg usage recorded in the archive, if it is part of the descriptor.
    fn skill_contacts(&self, i: usize) -> Option<ContactMask>;
    /// Half width of the (x, y) descriptor space.
    fn b_top(&self) -> f64;
    /// Whether executions accept a contact mask.
    fn has_secondary(&self) -> bool;
    fn execute(&self, i: usize, mask: Option<ContactMask>, damage: &DamageScenario) -> Execution;
}

impl SkillLibrary for Hbr {
    fn skill_count(&self) -> usize {
        self.top.len()
    }

    fn skill_cell(&self, i: usize) -> usize {
        self.top.cell_of_slot(i)
    }

    fn skill_prior(&self, i: usize) -> Pose2<f64> {
        self.prior(i)
    }

    fn skill_contacts(&self, _i: usize) -> Option<ContactMask> {
        None
    }

    fn b_top(&self) -> f64 {
        self.bounds.b_top
    }

    fn has_secondary(&self) -> bool {
        true
    }

    fn execute(&self, i: usize, mask: Option<ContactMask>, damage: &DamageScenario) -> Execution {
        let choice = mask.map_or(MaskChoice::Training, MaskChoice::Same);
        self.execute_skill(i, choice, damage)
    }
}

#[cfg(test)]
mod tests;

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gait::{ContactMask, DamageScenario};
use crate::gp::{epsilon, GpBank, GpParams, DEFAULT_BETA};
use crate::hbr::SkillLibrary;
use crate::se2::Pose2;
use crate::util::{derive_seed, tag};

use super::maze::Maze;
use super::mcts::{all_masks, farthest_point_subset, mcts_plan, ActionSet, MaskModel, PlanConfig};

pub const MAX_ACTIONS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Hte,
    HteRandom,
    HtePerfect,
    Rte2d,
    Rte8d,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Hte, Variant::HteRandom, Variant::HtePerfect, Variant::Rte2d, Variant::Rte8d];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hte => "hte",
            Variant::HteRandom => "hte-random",
            Variant::HtePerfect => "hte-perfect",
            Variant::Rte2d => "rte-2d",
            Variant::Rte8d => "rte-8d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Runs on a hierarchy (as opposed to a flat repertoire).
    pub fn hierarchical(self) -> bool {
        matches!(self, Variant::Hte | Variant::HteRandom | Variant::HtePerfect)
    }

    pub fn mask_model(self, damage: &DamageScenario) -> MaskModel {
        match self {
            Variant::Hte | Variant::HteRandom => MaskModel::Marginal,
            Variant::HtePerfect => MaskModel::Fixed(damage.functional_mask()),
            Variant::Rte2d => MaskModel::Fixed(ContactMask::from_index(0)),
            Variant::Rte8d => MaskModel::Contacts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub plan: PlanConfig,
    pub max_actions: usize,
    pub beta: f64,
    pub gp: GpParams,
    /// HTE plans with each skill's best mask instead of the mask average.
    pub best_mask_planning: bool,
    /// Record wall-clock planning time; off keeps logs reproducible.
    pub timing: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { plan: PlanConfig::default(), max_actions: MAX_ACTIONS, beta: DEFAULT_BETA, gp: GpParams::default(), best_mask_planning: false, timing: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub skill: usize,
    pub skill_cell: usize,
    pub mask: Option<ContactMask>,
    pub planned: Pose2<f64>,
    pub observed: Pose2<f64>,
    pub eps: f64,
    pub plan_ms: f64,
    pub collided: bool,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub variant: Variant,
    pub damage: DamageScenario,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub success: bool,
    pub final_pose: Pose2<f64>,
    /// Plans where every candidate hit a wall at once.
    pub warnings: usize,
    /// Masked lookups that fell back to the whole middle layer.
    pub fallbacks: usize,
    pub gp: GpBank,
}

impl Episode {
    pub fn actions(&self) -> usize {
        self.steps.len()
    }

    pub fn collisions(&self) -> usize {
        self.steps.iter().filter(|s| s.collided).count()
    }

    pub fn mean_plan_ms(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.plan_ms).sum::<f64>() / self.steps.len() as f64
    }

    /// Header comments, one line per action, and a summary footer.
    pub fn to_log(&self) -> String {
        let mut s = format!("# variant={} damage={} seed={}\n", self.variant.name(), self.damage.label(), self.seed);
        s += "# step,skill_cell,mask,planned_dx,planned_dy,obs_dx,obs_dy,obs_dyaw,eps,plan_ms\n";
        for r in &self.steps {
            let mask = r.mask.map_or("-".to_string(), |m| m.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.step, r.skill_cell, mask, r.planned.x, r.planned.y, r.observed.x, r.observed.y, r.observed.yaw, r.eps, r.plan_ms
            );
        }
        let _ = writeln!(
            s,
            "# actions={} success={} collisions={} warnings={} fallbacks={}",
            self.actions(),
            self.success as u8,
            self.collisions(),
            self.warnings,
            self.fallbacks
        );
        s
    }
}

/// One parsed log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub skill_cell: usize,
    pub mask: Option<ContactMask>,
    pub planned: [f64; 2],
    pub observed: Pose2<f64>,
    pub eps: f64,
    pub plan_ms: f64,
}

/// Summary fields of a log footer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogSummary {
    pub variant: String,
    pub damage: String,
    pub seed: u64,
    pub actions: usize,
    pub success: bool,
    pub complete: bool,
    pub entries: Vec<LogEntry>,
}

impl LogSummary {
    pub fn mean_plan_ms(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|e| e.plan_ms).sum::<f64>() / self.entries.len() as f64
    }
}

pub fn parse_log(text: &str) -> Result<LogSummary, String> {
    let mut out = LogSummary::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for kv in rest.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else { continue };
                let bad = || format!("line {}: bad {k}", i + 1);
                match k {
                    "variant" => out.variant = v.to_string(),
                    "damage" => out.damage = v.to_string(),
                    "seed" => out.seed = v.parse().map_err(|_| bad())?,
                    "actions" => {
                        out.actions = v.parse().map_err(|_| bad())?;
                        out.complete = true;
                    }
                    "success" => out.success = v == "1",
                    _ => {}
                }
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(format!("line {}: expected 10 fields", i + 1));
        }
        let num = |k: usize| f[k].trim().parse::<f64>().map_err(|_| format!("line {}: bad field {}", i + 1, k + 1));
        let int = |k: usize| f[k].trim().parse::<usize>().map_err(|_| format!("line {}: bad field {}", i + 1, k + 1));
        let mask = match f[2].trim() {
            "-" => None,
            m => Some(m.parse::<ContactMask>().map_err(|_| format!("line {}: bad mask", i + 1))?),
        };
        out.entries.push(LogEntry {
            step: int(0)?,
            skill_cell: int(1)?,
            mask,
            planned: [num(3)?, num(4)?],
            observed: Pose2 { x: num(5)?, y: num(6)?, yaw: num(7)? },
            eps: num(8)?,
            plan_ms: num(9)?,
        });
    }
    if out.complete && out.actions != out.entries.len() {
        return Err(format!("footer reports {} actions but the log has {}", out.actions, out.entries.len()));
    }
    Ok(out)
}

/// Runs a skill from `state`, stopping at the first wall contact.
/// Returns the body-frame displacement actually achieved and whether the
/// skill was cut short.
pub fn execute_in_maze<L: SkillLibrary + ?Sized>(
    lib: &L,
    maze: &Maze,
    state: &Pose2<f64>,
    skill: usize,
    mask: Option<ContactMask>,
    damage: &DamageScenario,
) -> (Pose2<f64>, bool, usize, Vec<Pose2<f64>>) {
    let exec = lib.execute(skill, mask, damage);
    let world: Vec<Pose2<f64>> = exec.trajectory.iter().map(|p| state.compose(p)).collect();
    match maze.truncate(&world) {
        None => (exec.displacement, false, exec.fallbacks, world),
        Some(cut) => {
            let end = *cut.last().unwrap();
            (state.between(&end), true, exec.fallbacks, cut)
        }
    }
}

/// Skills offered to the planner for a whole episode.
pub fn action_candidates<L: SkillLibrary + ?Sized>(lib: &L, cfg: &PlanConfig, seed: u64) -> Vec<usize> {
    if cfg.full_archive {
        return (0..lib.skill_count()).collect();
    }
    let pts: Vec<[f64; 2]> = (0..lib.skill_count()).map(|i| lib.skill_prior(i)).map(|p| [p.x, p.y]).collect();
    farthest_point_subset(&pts, cfg.action_set_size, derive_seed(seed, &[tag("actions")]))
}

pub fn run_episode<L: SkillLibrary + ?Sized>(lib: &L, variant: Variant, damage: &DamageScenario, maze: &Maze, cfg: &EpisodeConfig, seed: u64) -> Episode {
    assert_eq!(variant.hierarchical(), lib.has_secondary(), "variant {} does not match the skill library", variant.name());
    let candidates = action_candidates(lib, &cfg.plan, seed);
    let model = match variant {
        Variant::Hte if cfg.best_mask_planning => MaskModel::Best,
        _ => variant.mask_model(damage),
    };
    let masks = all_masks();
    let mut mask_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag("mask")]));
    let mut gp = GpBank::with_params(lib.b_top(), cfg.gp.clone());
    let mut state = maze.start;
    let mut steps = Vec::new();
    let (mut warnings, mut fallbacks) = (0, 0);
    while !maze.at_goal(&state) && steps.len() < cfg.max_actions {
        let step = steps.len();
        let t0 = Instant::now();
        let actions = ActionSet::build(lib, &candidates, &gp, model);
        let plan = mcts_plan(maze, &cfg.plan, &actions, &state, seed, step as u64);
        let plan_ms = if cfg.timing { t0.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        warnings += plan.all_colliding as usize;
        let prior = lib.skill_prior(plan.skill);
        let bd = [prior.x, prior.y];
        let mask = match variant {
            Variant::Hte => Some(gp.ucb_select_mask(bd, prior, &prior, cfg.beta, &masks)),
            Variant::HteRandom => Some(ContactMask::from_index(mask_rng.gen_range(0..64))),
            Variant::HtePerfect => Some(damage.functional_mask()),
            Variant::Rte2d | Variant::Rte8d => None,
        };
        let (observed, collided, fb, _) = execute_in_maze(lib, maze, &state, plan.skill, mask, damage);
        fallbacks += fb;
        let input_mask = match variant {
            Variant::Rte2d => ContactMask::from_index(0),
            Variant::Rte8d => lib.skill_contacts(plan.skill).unwrap_or(ContactMask::from_index(0)),
            _ => mask.expect("hierarchical variants choose a mask"),
        };
        gp.update(bd, input_mask, prior, observed).expect("simulated displacements are finite");
        steps.push(StepRecord {
            step,
            skill: plan.skill,
            skill_cell: lib.skill_cell(plan.skill),
            mask,
            planned: plan.predicted,
            observed,
            eps: epsilon(&observed, &prior),
            plan_ms,
            collided,
        });
        state = state.compose(&observed);
    }
    Episode { variant, damage: damage.clone(), seed, success: maze.at_goal(&state), final_pose: state, steps, warnings, fallbacks, gp }
}

/// Re-executes a logged action sequence from the maze start and returns
/// the observations it produces.
pub fn replay<L: SkillLibrary + ?Sized>(lib: &L, maze: &Maze, damage: &DamageScenario, entries: &[LogEntry]) -> Result<Vec<Pose2<f64>>, String> {
    let mut state = maze.start;
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let skill = (0..lib.skill_count()).find(|&i| lib.skill_cell(i) == e.skill_cell).ok_or_else(|| format!("no skill in cell {}", e.skill_cell))?;
        let (obs, _, _, _) = execute_in_maze(lib, maze, &state, skill, e.mask, damage);
        out.push(obs);
        state = state.compose(&obs);
    }
    Ok(out)
}

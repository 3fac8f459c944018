use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::gait::ContactMask;
use crate::gp::GpBank;
use crate::hbr::SkillLibrary;
use crate::se2::Pose2;
use crate::util::derive_seed;

use super::maze::{Maze, CELL};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub roots: usize,
    pub iterations: usize,
    pub uct_c: f64,
    pub max_depth: usize,
    pub discount: f64,
    pub action_set_size: usize,
    /// Plan over every skill instead of a subsample.
    pub full_archive: bool,
    pub action_cost: f64,
    pub collision_penalty: f64,
    pub goal_bonus: f64,
    /// Spacing of collision checks along planned motions.
    pub sweep_step: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            roots: 32,
            iterations: 100,
            uct_c: 1.4,
            max_depth: 6,
            discount: 0.9,
            action_set_size: 64,
            full_archive: false,
            action_cost: 0.05,
            collision_penalty: 1.0,
            goal_bonus: 10.0,
            sweep_step: 0.05,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.roots > 0
            && self.iterations > 0
            && self.max_depth > 0
            && self.action_set_size > 0
            && self.uct_c >= 0.0
            && self.discount > 0.0
            && self.discount <= 1.0
            && self.sweep_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err("planner settings must be positive (discount in (0, 1])".into())
        }
    }
}

/// How the predicted displacement of a skill treats the contact mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskModel {
    /// One mask for every skill.
    Fixed(ContactMask),
    /// The contact bits stored with each skill.
    Contacts,
    /// The mask predicted to match the archived outcome best.
    Best,
    /// Average over all masks.
    Marginal,
}

/// Predicted body-frame displacement of a skill.
pub fn predicted_delta<L: SkillLibrary + ?Sized>(lib: &L, gp: &GpBank, model: MaskModel, skill: usize) -> Pose2<f64> {
    let prior = lib.skill_prior(skill);
    if gp.is_empty() {
        return prior;
    }
    let bd = [prior.x, prior.y];
    match model {
        MaskModel::Fixed(m) => gp.mean(bd, m, prior),
        MaskModel::Contacts => gp.mean(bd, lib.skill_contacts(skill).unwrap_or(ContactMask::from_index(0)), prior),
        MaskModel::Best => gp.best_mask(bd, prior, &prior, &all_masks()).1,
        MaskModel::Marginal => gp.marginal_mean(bd, prior),
    }
}

pub fn all_masks() -> [ContactMask; 64] {
    std::array::from_fn(ContactMask::from_index)
}

/// `k` points spread by farthest-point selection from a seeded first pick.
/// Ties go to the lowest index.
pub fn farthest_point_subset(points: &[[f64; 2]], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut near: Vec<f64> = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let c = points[*chosen.last().unwrap()];
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            near[i] = near[i].min(d);
            if near[i] > best.1 {
                best = (i, near[i]);
            }
        }
        chosen.push(best.0);
    }
    chosen
}

/// Result of applying a predicted displacement from a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: Pose2<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// Length of motion lost to a collision.
    pub cut: f64,
}

impl Outcome {
    pub fn collided(&self) -> bool {
        self.cut > 0.0
    }
}

pub fn simulate_step(maze: &Maze, cfg: &PlanConfig, s: &Pose2<f64>, s_dist: f64, delta: &Pose2<f64>) -> Outcome {
    let target = s.compose(delta);
    let (next, cut) = match maze.sweep(s, delta, cfg.sweep_step) {
        None => (target, 0.0),
        Some(t) => {
            let tw = delta.log();
            let p = s.compose(&Pose2::exp(tw, t));
            (p, ((1.0 - t) * tw[0].hypot(tw[1])).max(f64::MIN_POSITIVE))
        }
    };
    let mut reward = (s_dist - maze.distance(&next)) / CELL - cfg.action_cost;
    if cut > 0.0 {
        reward -= cfg.collision_penalty;
    }
    let terminal = maze.at_goal(&next);
    if terminal {
        reward += cfg.goal_bonus;
    }
    Outcome { next, reward, terminal, cut }
}

/// Candidate actions for one plan with their predicted displacements.
#[derive(Debug, Clone)]
pub struct ActionSet {
    pub skills: Vec<usize>,
    pub cells: Vec<usize>,
    pub deltas: Vec<Pose2<f64>>,
}

impl ActionSet {
    pub fn build<L: SkillLibrary + ?Sized>(lib: &L, skills: &[usize], gp: &GpBank, model: MaskModel) -> Self {
        let deltas = if skills.len() > 256 {
            skills.par_iter().map(|&i| predicted_delta(lib, gp, model, i)).collect()
        } else {
            skills.iter().map(|&i| predicted_delta(lib, gp, model, i)).collect()
        };
        Self { skills: skills.to_vec(), cells: skills.iter().map(|&i| lib.skill_cell(i)).collect(), deltas }
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Index into the action set.
    pub action: usize,
    pub skill: usize,
    pub predicted: Pose2<f64>,
    pub visits: u64,
    pub mean_value: f64,
    /// Every action collides straight away; the least-cut one was taken.
    pub all_colliding: bool,
}

struct Node {
    state: Pose2<f64>,
    dist: f64,
    terminal: bool,
    depth: usize,
    visits: u64,
    value: f64,
    reward: f64,
    children: Vec<(u32, u32)>,
    untried: Option<Vec<u32>>,
}

impl Node {
    fn new(state: Pose2<f64>, dist: f64, terminal: bool, depth: usize, reward: f64) -> Self {
        Self { state, dist, terminal, depth, visits: 0, value: 0.0, reward, children: Vec::new(), untried: None }
    }
}

/// Root statistics of one tree: per action (visits, summed return).
fn run_root(maze: &Maze, cfg: &PlanConfig, actions: &ActionSet, root: &Pose2<f64>, first: &[Outcome], order: &[u32], seed: u64) -> Vec<(u64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_act = actions.len() as u32;
    let mut nodes = vec![Node::new(*root, maze.distance(root), false, 0, 0.0)];
    nodes[0].untried = Some(order.to_vec());
    let mut path = Vec::with_capacity(cfg.max_depth + 1);
    for _ in 0..cfg.iterations {
        path.clear();
        let mut at = 0usize;
        path.push(at);
        loop {
            let node = &nodes[at];
            if node.terminal || node.depth >= cfg.max_depth {
                break;
            }
            let untried = nodes[at].untried.get_or_insert_with(|| (0..n_act).collect());
            if !untried.is_empty() {
                let a = if at == 0 {
                    untried.pop().unwrap()
                } else {
                    let k = rng.gen_range(0..untried.len());
                    untried.swap_remove(k)
                };
                let out = if at == 0 {
                    first[a as usize]
                } else {
                    let n = &nodes[at];
                    simulate_step(maze, cfg, &n.state, n.dist, &actions.deltas[a as usize])
                };
                let depth = nodes[at].depth + 1;
                let child = nodes.len();
                nodes.push(Node::new(out.next, maze.distance(&out.next), out.terminal, depth, out.reward));
                nodes[at].children.push((a, child as u32));
                path.push(child);
                break;
            }
            let ln_n = (nodes[at].visits.max(1) as f64).ln();
            let mut best = (f64::NEG_INFINITY, 0usize);
            for &(_, c) in &nodes[at].children {
                let ch = &nodes[c as usize];
                let q = ch.value / ch.visits as f64;
                let score = q + cfg.uct_c * (ln_n / ch.visits as f64).sqrt();
                if score > best.0 {
                    best = (score, c as usize);
                }
            }
            at = best.1;
            path.push(at);
        }
        let mut g = 0.0;
        for &n in path.iter().rev() {
            let node = &mut nodes[n];
            g = node.reward + cfg.discount * g;
            node.visits += 1;
            node.value += g;
        }
    }
    let mut stats = vec![(0u64, 0.0); actions.len()];
    for &(a, c) in &nodes[0].children {
        let ch = &nodes[c as usize];
        stats[a as usize] = (ch.visits, ch.value);
    }
    stats
}

/// Parallel-root UCT from `state`. Root actions are expanded best
/// immediate reward first; deeper expansions are random.
pub fn mcts_plan(maze: &Maze, cfg: &PlanConfig, actions: &ActionSet, state: &Pose2<f64>, seed: u64, step: u64) -> Plan {
    assert!(!actions.is_empty(), "empty action set");
    let d0 = maze.distance(state);
    let first: Vec<Outcome> = actions.deltas.iter().map(|d| simulate_step(maze, cfg, state, d0, d)).collect();
    let mut order: Vec<u32> = (0..actions.len() as u32).collect();
    // ascending, so popping from the back yields the best first
    order.sort_by(|&a, &b| {
        let (ra, rb) = (first[a as usize].reward, first[b as usize].reward);
        ra.total_cmp(&rb).then(actions.cells[b as usize].cmp(&actions.cells[a as usize]))
    });
    let per_root: Vec<Vec<(u64, f64)>> = (0..cfg.roots)
        .into_par_iter()
        .map(|r| run_root(maze, cfg, actions, state, &first, &order, derive_seed(seed, &[step, r as u64])))
        .collect();
    let mut merged = vec![(0u64, 0.0); actions.len()];
    for stats in &per_root {
        for (m, s) in merged.iter_mut().zip(stats) {
            m.0 += s.0;
            m.1 += s.1;
        }
    }
    let all_colliding = first.iter().all(|o| o.collided());
    let action = if all_colliding {
        (0..actions.len())
            .min_by(|&a, &b| first[a].cut.total_cmp(&first[b].cut).then(actions.cells[a].cmp(&actions.cells[b])))
            .unwrap()
    } else {
        let mean = |a: usize| if merged[a].0 == 0 { f64::NEG_INFINITY } else { merged[a].1 / merged[a].0 as f64 };
        (0..actions.len())
            .max_by(|&a, &b| {
                merged[a].0.cmp(&merged[b].0).then(mean(a).total_cmp(&mean(b))).then(actions.cells[b].cmp(&actions.cells[a]))
            })
            .unwrap()
    };
    let (visits, value) = merged[action];
    Plan {
        action,
        skill: actions.skills[action],
        predicted: actions.deltas[action],
        visits,
        mean_value: if visits == 0 { 0.0 } else { value / visits as f64 },
        all_colliding,
    }
}

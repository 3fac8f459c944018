use super::*;
use crate::gait::{ContactMask, DamageScenario};
use crate::gp::GpBank;
use crate::hbr::{Execution, SkillLibrary};
use crate::se2::Pose2;
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line skills on a polar grid; damage halves every motion.
struct Fan {
    skills: Vec<Pose2<f64>>,
}

impl Fan {
    fn new() -> Self {
        let mut skills = Vec::new();
        for r in [0.3, 0.6, 0.9, 1.2] {
            for k in 0..24 {
                let a = k as f64 * std::f64::consts::TAU / 24.0;
                skills.push(Pose2::new(r * a.cos(), r * a.sin(), 0.1 * a.sin()));
            }
        }
        Self { skills }
    }
}

impl SkillLibrary for Fan {
    fn skill_count(&self) -> usize {
        self.skills.len()
    }
    fn skill_cell(&self, i: usize) -> usize {
        i
    }
    fn skill_prior(&self, i: usize) -> Pose2<f64> {
        self.skills[i]
    }
    fn skill_contacts(&self, _i: usize) -> Option<ContactMask> {
        None
    }
    fn b_top(&self) -> f64 {
        1.3
    }
    fn has_secondary(&self) -> bool {
        false
    }
    fn execute(&self, i: usize, _mask: Option<ContactMask>, damage: &DamageScenario) -> Execution {
        let s = if damage.is_intact() { 1.0 } else { 0.5 };
        let d = self.skills[i];
        let trajectory: Vec<Pose2<f64>> = (0..=300).map(|k| k as f64 / 300.0).map(|t| Pose2::new(s * t * d.x, s * t * d.y, s * t * d.yaw)).collect();
        Execution { displacement: *trajectory.last().unwrap(), trajectory, realized: vec![], fallbacks: 0 }
    }
}

fn open_maze() -> Maze {
    Maze::parse("#########\n#.......#\n#.S...G.#\n#.......#\n#########\n").unwrap()
}

#[test]
fn maze_errors() {
    assert_eq!(Maze::parse("###\n#S#\n###\n").unwrap_err(), MazeError::Marker('G'));
    assert_eq!(Maze::parse("").unwrap_err(), MazeError::Empty);
    assert!(matches!(Maze::parse("####\n#SG\n####\n"), Err(MazeError::Ragged { .. })));
    assert!(matches!(Maze::parse("#####\n#SxG#\n#####\n"), Err(MazeError::BadChar { ch: 'x', .. })));
    assert_eq!(Maze::parse("#####\n#SSG#\n#####\n").unwrap_err(), MazeError::Marker('S'));
    assert_eq!(Maze::parse("#####\n#S#G#\n#####\n").unwrap_err(), MazeError::Unreachable);
}

#[test]
fn adjacent_goal_is_one_cell_away() {
    let m = Maze::parse(".....\n.....\n.SG..\n.....\n.....\n").unwrap();
    assert_abs_diff_eq!(m.distance(&m.start), 1.0, epsilon = 0.1);
    assert_eq!(m.distance(&Pose2::new(m.goal[0], m.goal[1], 0.0)), 0.0);
}

#[test]
fn canonical_maze_routes_left_then_down() {
    let m = canonical_maze();
    assert!(m.distance(&m.start).is_finite());
    // follow the field downhill from the start
    let f = &m.field;
    let (mut i, mut j) = ((m.start.x / f.h) as usize, (m.start.y / f.h) as usize);
    let mut path = vec![f.node(i, j)];
    while f.at(i, j) > m.goal_radius {
        let mut best = (f.at(i, j), i, j);
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
            let (a, b) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
            if a < f.nx && b < f.ny && f.at(a, b) < best.0 {
                best = (f.at(a, b), a, b);
            }
        }
        assert!(best.1 != i || best.2 != j, "stuck on the field");
        (i, j) = (best.1, best.2);
        path.push(f.node(i, j));
    }
    // the inner arm spans y in [3, 4] from the right wall to x = 3
    let through: Vec<&[f64; 2]> = path.iter().filter(|p| p[1] > 3.0 && p[1] < 4.0).collect();
    assert!(!through.is_empty() && through.iter().all(|p| p[0] < 3.0));
    assert!(path.iter().any(|p| p[0] < 3.0 && p[1] > 4.0), "goes left along the top first");
    assert!(m.start.x - 3.0 >= 3.0 && m.start.y - m.goal[1] >= 3.0);
}

#[test]
fn field_is_consistent() {
    let m = canonical_maze();
    let f = &m.field;
    for j in 0..f.ny {
        for i in 0..f.nx {
            let d = f.at(i, j);
            if !d.is_finite() {
                assert!(m.collides(f.node(i, j)));
                continue;
            }
            for (di, dj) in [(1i64, 0i64), (0, 1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a < f.nx as i64 && b < f.ny as i64 {
                    let e = f.at(a as usize, b as usize);
                    if e.is_finite() {
                        assert!((d - e).abs() <= f.h + 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn collision_boundaries() {
    let m = open_maze();
    // the wall cell row y in [0, 1], floor starts at y = 1
    let far = [Pose2::new(4.5, 2.5, 0.0), Pose2::new(5.0, 2.5, 0.0)];
    assert_eq!(m.collide(&far), None);
    let inside = Pose2::new(4.5, 1.0 + 0.35 - 1e-9, 0.0);
    assert_eq!(m.collide(&[far[0], inside]), Some(1));
    let outside = Pose2::new(4.5, 1.0 + 0.35 + 1e-9, 0.0);
    assert_eq!(m.collide(&[outside]), None);
    // convex corner at the free end of the inner arm, (3, 4)
    let c = canonical_maze();
    let near = std::f64::consts::FRAC_1_SQRT_2 * (0.35 - 1e-9);
    let clear = std::f64::consts::FRAC_1_SQRT_2 * (0.35 + 1e-9);
    assert!(c.collides([3.0 - near, 4.0 + near]));
    assert!(!c.collides([3.0 - clear, 4.0 + clear]));
}

fn seg_dist(p: [f64; 2], s: &Segment) -> f64 {
    let (dx, dy) = (s.b[0] - s.a[0], s.b[1] - s.a[1]);
    let t = (((p[0] - s.a[0]) * dx + (p[1] - s.a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (p[0] - s.a[0] - t * dx).hypot(p[1] - s.a[1] - t * dy)
}

#[test]
fn collision_matches_supersampled_oracle() {
    let m = canonical_maze();
    let segs = m.wall_segments();
    let clearance = |p: [f64; 2]| {
        if m.is_wall(p[0].floor() as i64, p[1].floor() as i64) {
            return 0.0;
        }
        segs.iter().map(|s| seg_dist(p, s)).fold(f64::INFINITY, f64::min)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut agree = 0;
    for _ in 0..1000 {
        let mut p = Pose2::new(rng.gen_range(1.0..7.0), rng.gen_range(1.0..6.0), rng.gen_range(-3.0..3.0));
        let v = rng.gen_range(0.0..0.02);
        let w = rng.gen_range(-0.05..0.05);
        let traj: Vec<Pose2<f64>> = (0..100)
            .map(|_| {
                let q = p;
                p = p.compose(&Pose2::new(v, 0.0, w));
                q
            })
            .collect();
        let fast = m.collide(&traj).is_some();
        let mut min_c = f64::INFINITY;
        for k in 0..traj.len() {
            let next = traj.get(k + 1).unwrap_or(&traj[k]);
            for s in 0..10 {
                let t = s as f64 / 10.0;
                let q = [traj[k].x + t * (next.x - traj[k].x), traj[k].y + t * (next.y - traj[k].y)];
                min_c = min_c.min(clearance(q));
            }
        }
        let dense = min_c < m.robot_radius;
        if fast == dense {
            agree += 1;
        } else {
            assert!((min_c - m.robot_radius).abs() < 1e-3, "disagreement far from the boundary: {min_c}");
        }
    }
    assert!(agree >= 990, "{agree} of 1000 agree");
}

#[test]
fn truncation_stops_at_contact() {
    let m = open_maze();
    let traj: Vec<Pose2<f64>> = (0..=300).map(|k| Pose2::new(4.5, 2.5 - k as f64 * 0.01, 0.0)).collect();
    let cut = m.truncate(&traj).unwrap();
    let end = cut.last().unwrap();
    assert!(!m.collides([end.x, end.y]));
    assert_abs_diff_eq!(end.y, 1.35, epsilon = 1e-6);
    assert!(m.truncate(&traj[..50]).is_none());
}

#[test]
fn greedy_plan_heads_for_goal() {
    let lib = Fan::new();
    let m = open_maze();
    let gp = GpBank::new(lib.b_top());
    let all: Vec<usize> = (0..lib.skill_count()).collect();
    let actions = ActionSet::build(&lib, &all, &gp, MaskModel::Fixed(ContactMask::from_index(0)));
    let p = mcts_plan(&m, &PlanConfig::default(), &actions, &m.start, 3, 0);
    assert!(lib.skill_prior(p.skill).x > 0.0);
    let one = PlanConfig { roots: 1, iterations: 1, ..PlanConfig::default() };
    let a = mcts_plan(&m, &one, &actions, &m.start, 3, 0);
    let b = mcts_plan(&m, &one, &actions, &m.start, 99, 5);
    assert_eq!(a, b);
    // the single expansion is the best immediate reward: the longest step towards the goal
    assert_abs_diff_eq!(lib.skill_prior(a.skill).x, 1.2, epsilon = 1e-12);
}

#[test]
fn plans_are_deterministic_across_threads() {
    let lib = Fan::new();
    let m = canonical_maze();
    let mut gp = GpBank::new(lib.b_top());
    gp.update([0.6, 0.0], ContactMask::from_index(0), lib.skill_prior(24), Pose2::new(0.3, 0.0, 0.0)).unwrap();
    let all: Vec<usize> = (0..lib.skill_count()).collect();
    let actions = ActionSet::build(&lib, &all, &gp, MaskModel::Fixed(ContactMask::from_index(0)));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| mcts_plan(&m, &PlanConfig::default(), &actions, &m.start, 17, 2))
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn colliding_everywhere_is_flagged() {
    let lib = Fan { skills: vec![Pose2::new(1.0, 0.0, 0.0), Pose2::new(0.0, 1.0, 0.0), Pose2::new(0.0, -0.9, 0.0)] };
    let m = Maze::parse("###\n#S#\n#G#\n###\n").unwrap();
    let gp = GpBank::new(lib.b_top());
    let actions = ActionSet::build(&lib, &[0, 1], &gp, MaskModel::Fixed(ContactMask::from_index(0)));
    let p = mcts_plan(&m, &PlanConfig::default(), &actions, &m.start, 1, 0);
    assert!(p.all_colliding);
}

#[test]
fn farthest_points() {
    let pts: Vec<[f64; 2]> = (0..100).map(|i| [(i % 10) as f64, (i / 10) as f64]).collect();
    let a = farthest_point_subset(&pts, 10, 4);
    assert_eq!(a, farthest_point_subset(&pts, 10, 4));
    let mut b = a.clone();
    b.sort();
    b.dedup();
    assert_eq!(b.len(), 10);
    assert_eq!(farthest_point_subset(&pts, 200, 4), (0..100).collect::<Vec<_>>());
    // the second pick is a corner far from the first
    assert!(farthest_point_subset(&pts, 2, 4).len() == 2);
}

#[test]
fn start_at_goal_takes_no_actions() {
    let lib = Fan::new();
    let mut m = open_maze();
    m.goal = [m.start.x + 0.2, m.start.y];
    let e = run_episode(&lib, Variant::Rte2d, &DamageScenario::none(), &m, &EpisodeConfig::default(), 1);
    assert_eq!(e.actions(), 0);
    assert!(e.success);
}

#[test]
fn episodes_reach_goal_and_replay() {
    let lib = Fan::new();
    let m = canonical_maze();
    let damage = DamageScenario::blocked(&[2]).unwrap();
    let cfg = EpisodeConfig::default();
    let e = run_episode(&lib, Variant::Rte2d, &damage, &m, &cfg, 8);
    assert!(e.success, "{}", e.to_log());
    assert!(e.actions() >= (m.distance(&m.start) / 1.2).ceil() as usize);
    let again = run_episode(&lib, Variant::Rte2d, &damage, &m, &cfg, 8);
    assert_eq!(e.to_log(), again.to_log());
    let log = parse_log(&e.to_log()).unwrap();
    assert_eq!(log.entries.len(), e.actions());
    assert!(log.success && log.complete);
    let obs = replay(&lib, &m, &damage, &log.entries).unwrap();
    for (o, r) in obs.iter().zip(&log.entries) {
        assert_eq!(o.x.to_bits(), r.observed.x.to_bits());
        assert_eq!(o.y.to_bits(), r.observed.y.to_bits());
        assert_eq!(o.yaw.to_bits(), r.observed.yaw.to_bits());
    }
    // nothing in the episode ends up inside a wall
    let mut s = m.start;
    for r in &e.steps {
        let (_, _, _, traj) = execute_in_maze(&lib, &m, &s, r.skill, r.mask, &damage);
        for p in &traj {
            assert!(m.clearance([p.x, p.y], 1.0) >= m.robot_radius - 1e-6);
        }
        s = s.compose(&r.observed);
    }
}

#[test]
fn log_parse_errors() {
    assert!(parse_log("1,2,3\n").is_err());
    assert!(parse_log("0,1,xx,0,0,0,0,0,1,0\n").is_err());
    let ok = parse_log("# variant=rte-2d damage=none seed=3\n0,5,-,0.1,0.2,0.1,0.2,0,1,0\n").unwrap();
    assert!(!ok.complete);
    assert_eq!(ok.seed, 3);
}

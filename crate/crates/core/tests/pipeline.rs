//! End-to-end checks on a desk-budget hierarchy.

use std::sync::OnceLock;

use hte_core::gait::DamageScenario;
use hte_core::hbr::{default_bounds, train_hbr, Hbr, HbrConfig, MaskChoice};
use hte_core::planner::{canonical_maze, run_episode, EpisodeConfig, Variant};
use hte_core::qd::Archive;

fn hbr() -> &'static Hbr {
    static H: OnceLock<Hbr> = OnceLock::new();
    H.get_or_init(|| train_hbr(&HbrConfig::desk(), 1, &default_bounds()).expect("trains").0)
}

#[test]
fn undamaged_robot_solves_the_maze_quickly() {
    let maze = canonical_maze();
    let cfg = EpisodeConfig::default();
    let actions: Vec<usize> = (0..20).map(|k| run_episode(hbr(), Variant::Hte, &DamageScenario::none(), &maze, &cfg, 1000 + k)).filter(|e| e.success).map(|e| e.actions()).collect();
    let quick = actions.iter().filter(|&&a| a <= 25).count();
    assert!(quick >= 18, "{quick}/20 within 25 actions: {actions:?}");
}

#[test]
fn successful_episodes_respect_the_distance_bound() {
    let maze = canonical_maze();
    let cfg = EpisodeConfig { max_actions: 40, ..EpisodeConfig::default() };
    let damages = [DamageScenario::none(), DamageScenario::blocked(&[2]).unwrap(), DamageScenario::blocked(&[1, 4]).unwrap()];
    let mut episodes = Vec::new();
    for (i, d) in damages.iter().enumerate() {
        for v in [Variant::Hte, Variant::HteRandom, Variant::HtePerfect] {
            episodes.push(run_episode(hbr(), v, d, &maze, &cfg, 7 + i as u64));
        }
    }
    let range = episodes.iter().flat_map(|e| &e.steps).map(|s| s.observed.x.hypot(s.observed.y)).fold(0.0, f64::max);
    assert!(range > 0.0);
    let bound = (maze.distance(&maze.start) / range).ceil() as usize;
    assert!(bound >= 1);
    let done: Vec<usize> = episodes.iter().filter(|e| e.success).map(|e| e.actions()).collect();
    assert!(!done.is_empty());
    assert!(done.iter().all(|&a| a >= bound), "bound {bound}, actions {done:?}");
}

#[test]
fn training_masks_replay_exactly() {
    let h = hbr();
    for slot in 0..h.top.len() {
        let training = h.training_masks(slot);
        let e = h.execute_skill(slot, MaskChoice::PerSegment(training), &DamageScenario::none());
        assert_eq!(e.realized, training.to_vec(), "slot {slot}");
        let bd = &h.top.get(slot).bd;
        assert!((e.displacement.x - bd[0]).abs() <= 1e-6 && (e.displacement.y - bd[1]).abs() <= 1e-6, "slot {slot}");
    }
}

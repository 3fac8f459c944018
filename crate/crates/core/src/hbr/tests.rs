use std::sync::OnceLock;

use super::*;
use crate::gait::{simulate_gait, LegGenotype};
use crate::qd::{Elite, Evaluator, InsertOutcome};

fn small_config() -> HbrConfig {
    let mut c = HbrConfig::desk();
    c.population = 100;
    c.bottom.generations = 30;
    c.middle.generations = 60;
    c.top.generations = 40;
    c
}

fn small() -> &'static Hbr {
    static HBR: OnceLock<Hbr> = OnceLock::new();
    HBR.get_or_init(|| train_hbr(&small_config(), 7, &default_bounds()).unwrap().0)
}

fn walker() -> [LegGenotype<f64>; 6] {
    std::array::from_fn(|i| LegGenotype::from_slice(&[0.8, 0.1 * i as f64, 0.5, 0.9, 0.5 * (i % 2) as f64, 0.5]))
}

/// A one-gait hierarchy built around the given legs.
fn single_gait(legs: [LegGenotype<f64>; 6]) -> (ThresholdArchive<f64>, MiddleBank) {
    let mut bottom = new_bottom_archive();
    let mut bank = new_middle_bank(&default_bounds());
    let mut genes = Vec::new();
    for leg in &legs {
        let (bd, f) = crate::gait::simulate_leg(leg);
        let mut e = Elite::new(Genotype(leg.to_array().to_vec()), bd.to_array().to_vec(), f);
        e.outcome = e.bd.clone();
        bottom.insert(e);
        genes.extend(crate::qd::normalize_all(&bd.to_array(), &crate::gait::LegDescriptor::bounds()));
    }
    // decoding the exact descriptors picks the same controllers back
    let ev = MiddleEval { bottom: &bottom }.run(&Genotype(genes.clone())).unwrap();
    let mut e = Elite::new(Genotype(genes), ev.bd, ev.fitness);
    e.mask = ev.mask;
    e.outcome = ev.outcome;
    assert_eq!(bank.insert(e), InsertOutcome::Added);
    (bottom, bank)
}

#[test]
fn arc_fitness_of_simple_paths() {
    assert_eq!(arc_fitness(&Pose2::new(0.7, 0.0, 0.0)), 0.0);
    let (x, y) = (0.4, 0.3);
    assert!(arc_fitness(&Pose2::new(x, y, 2.0 * f64::atan2(y, x))).abs() < 1e-15);
    assert_eq!(arc_fitness(&Pose2::identity()), 0.0);
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let p = Pose2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-4.0..4.0));
        let f = arc_fitness(&p);
        assert!((-std::f64::consts::PI..=0.0).contains(&f));
    }
}

#[test]
fn nearest_in_one_dimension() {
    let mut a = ThresholdArchive::new(0.01, vec![(0.0, 1.0)]);
    a.insert(Elite::new(Genotype(vec![]), vec![0.0], 0.0));
    a.insert(Elite::new(Genotype(vec![]), vec![1.0], 0.0));
    assert_eq!(a.nearest(&[0.4]).unwrap().0, 0);
    assert_eq!(a.nearest(&[1.0]), Some((1, 0.0)));
}

#[test]
fn chaining_one_gait_matches_a_long_simulation() {
    let (bottom, bank) = single_gait(walker());
    // controllers with equal descriptors collapse onto one bottom entry
    let legs = *Hbr::assemble(default_bounds(), bottom, bank.clone(), new_top_archive(&default_bounds())).middle_legs(0);
    let ev = TopEval { middle: &bank }.run(&Genotype(vec![0.3; 9])).unwrap();
    let direct = simulate_gait(&legs, &DamageScenario::none(), 3.0).unwrap().displacement;
    assert!((ev.bd[0] - direct.x).abs() < 1e-9);
    assert!((ev.bd[1] - direct.y).abs() < 1e-9);
    assert!(wrap_angle(ev.outcome[2] - direct.yaw).abs() < 1e-9);
    assert!(direct.translation_norm() > 0.05, "walker should move");
}

#[test]
fn idle_legs_give_an_idle_skill() {
    let (_, bank) = single_gait([LegGenotype::default(); 6]);
    let ev = TopEval { middle: &bank }.run(&Genotype(vec![0.9; 9])).unwrap();
    assert_eq!(ev.bd, vec![0.0, 0.0]);
    assert_eq!(ev.fitness, 0.0);
}

#[test]
fn lookups_on_empty_layers_fail() {
    let bottom = new_bottom_archive();
    assert!(MiddleEval { bottom: &bottom }.evaluate(&Genotype(vec![0.5; 18])).is_err());
    let bank = new_middle_bank(&default_bounds());
    assert!(TopEval { middle: &bank }.evaluate(&Genotype(vec![0.5; 9])).is_err());
}

#[test]
fn pilot_is_deterministic_and_sizes_bounds() {
    let a = pilot(500, 3);
    assert_eq!(a, pilot(500, 3));
    assert!(a.bounds.b_top > a.max_3s[0] && a.bounds.b_top > a.max_3s[1]);
    assert!(a.bounds.middle[0].1 > 0.0);
    let d = default_bounds();
    assert!(d.b_top > 0.5 && d.b_top < 3.0, "b_top {}", d.b_top);
}

#[test]
fn trained_layers_are_populated_and_consistent() {
    let h = small();
    assert!(!h.bottom.is_empty() && !h.middle.is_empty() && !h.top.is_empty());
    h.verify().unwrap();
    for p in 0..h.middle.len() {
        assert_eq!(h.middle.get(p).mask, Some(h.middle.mask_of(p)));
    }
    for s in 0..h.top.len() {
        let e = h.top.get(s);
        assert_eq!(e.outcome.len(), 6);
        assert!((-std::f64::consts::PI..=0.0).contains(&e.fitness));
    }
}

#[test]
fn replay_reproduces_recorded_outcomes() {
    let h = small();
    for s in (0..h.top.len()).step_by(7) {
        let ex = h.execute_skill(s, MaskChoice::Training, &DamageScenario::none());
        let prior = h.prior(s);
        assert!((ex.displacement.x - prior.x).abs() <= 1e-6);
        assert!((ex.displacement.y - prior.y).abs() <= 1e-6);
        assert!(wrap_angle(ex.displacement.yaw - prior.yaw).abs() <= 1e-6);
        assert_eq!(ex.realized, h.training_masks(s).to_vec());
        assert_eq!(ex.fallbacks, 0);
        assert_eq!(ex.trajectory.len(), 301);
        assert_eq!(*ex.trajectory.last().unwrap(), ex.displacement);
    }
}

#[test]
fn blocked_legs_never_touch_the_ground() {
    let h = small();
    for leg in 0..6 {
        let damage = DamageScenario::blocked(&[leg]).unwrap();
        for s in (0..h.top.len()).step_by(11) {
            let ex = h.execute_skill(s, MaskChoice::Same(ContactMask::from_index(63)), &damage);
            assert!(ex.realized.iter().all(|m| !m.leg(leg)));
            let again = h.execute_skill(s, MaskChoice::Same(ContactMask::from_index(63)), &damage);
            assert_eq!(ex, again);
        }
    }
}

#[test]
fn same_seed_same_hierarchy() {
    let cfg = small_config();
    let (a, _) = train_hbr(&cfg, 7, &default_bounds()).unwrap();
    assert_eq!(a.content_hash(&cfg, 7), small().content_hash(&cfg, 7));
    let (b, _) = train_hbr(&cfg, 8, &default_bounds()).unwrap();
    assert_ne!(b.content_hash(&cfg, 8), a.content_hash(&cfg, 7));
}

#[test]
fn save_and_load_roundtrip() {
    let h = small();
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    h.save(dir.path(), &cfg, 7).unwrap();
    let back = Hbr::load(dir.path()).unwrap();
    assert_eq!(back.content_hash(&cfg, 7), h.content_hash(&cfg, 7));
    assert_eq!(back.bounds, h.bounds);
    back.verify().unwrap();
    let manifest = std::fs::read_to_string(dir.path().join(store::MANIFEST)).unwrap();
    assert!(manifest.contains(&format!("config_hash={}", cfg.hash())));
    assert!(manifest.contains("top_sha256="));
}

#[test]
fn flat_variants_share_the_simulation() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let g = Genotype((0..36).map(|_| rng.gen()).collect::<Vec<f64>>());
        let a = FlatEval { variant: FlatVariant::D2 }.evaluate(&g).unwrap();
        let b = FlatEval { variant: FlatVariant::D8 }.evaluate(&g).unwrap();
        assert_eq!(a.bd[..2], b.bd[..2]);
        assert_eq!(b.bd.len(), 8);
        assert_eq!(a.fitness, b.fitness);
    }
    let zero = FlatEval { variant: FlatVariant::D8 }.evaluate(&Genotype(vec![0.0; 36])).unwrap();
    assert_eq!(zero.bd[..2], [0.0, 0.0]);
    assert_eq!(FlatVariant::D8.new_archive(1.0).capacity(), 640_000);
}

#[test]
fn flat_roundtrip_and_replay() {
    let bounds = default_bounds();
    let cfg = EvolutionConfig::new(50, 5, 0.14, 3);
    let (r, _) = FlatRepertoire::train(FlatVariant::D8, &cfg, &bounds);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat8d.txt");
    r.save(&path, &Stamp { seed: 3, config_hash: "x".into() }).unwrap();
    let back = FlatRepertoire::load(&path).unwrap();
    assert_eq!(back.archive.len(), r.archive.len());
    let m = back.metrics();
    assert!(m.effective_size <= m.size);
    for i in 0..back.skill_count() {
        let ex = back.execute(i, None, &DamageScenario::none());
        let p = back.skill_prior(i);
        assert_eq!((ex.displacement.x, ex.displacement.y), (p.x, p.y));
    }
}

use thiserror::Error;

use crate::scalar::Real;
use crate::se2::Pose2;

use super::leg::{foot_position, LegTrack};
use super::{
    ContactMask, DamageScenario, GaitOutcome, LegGenotype, DT, NUM_LEGS, PERIOD, STEPS_PER_PERIOD,
};

#[derive(Debug, Error, PartialEq)]
pub enum GaitError {
    #[error("gait duration must be a positive whole number of periods, got {0}")]
    BadDuration(f64),
}

/// A ground contact: where the body point is and how fast it has to move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<T> {
    pub position: [T; 2],
    pub velocity: [T; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit<T> {
    /// Body twist `(vx, vy, omega)` at the body origin.
    pub twist: [T; 3],
    /// Sum of squared velocity errors over the anchors.
    pub residual: T,
    /// Fewer than two anchors: the twist is zero.
    pub degenerate: bool,
}

/// Least-squares planar twist reproducing the anchor velocities.
///
/// A body point `p` moves at `v + omega * (-p.y, p.x)`; the fit minimises the
/// summed squared difference to the required velocities and is exact whenever
/// they come from a single rigid motion.
pub fn rigid_fit<T: Real>(anchors: &[Anchor<T>]) -> RigidFit<T> {
    if anchors.len() < 2 {
        return RigidFit { twist: [T::zero(); 3], residual: T::zero(), degenerate: true };
    }
    let n = T::from_count(anchors.len());
    let mut c = [T::zero(); 2];
    let mut u = [T::zero(); 2];
    for a in anchors {
        c[0] += a.position[0];
        c[1] += a.position[1];
        u[0] += a.velocity[0];
        u[1] += a.velocity[1];
    }
    c = [c[0] / n, c[1] / n];
    u = [u[0] / n, u[1] / n];
    let mut cross = T::zero();
    let mut spread = T::zero();
    for a in anchors {
        let r = [a.position[0] - c[0], a.position[1] - c[1]];
        let w = [a.velocity[0] - u[0], a.velocity[1] - u[1]];
        cross += r[0] * w[1] - r[1] * w[0];
        spread += r[0] * r[0] + r[1] * r[1];
    }
    let omega = if spread > T::zero() { cross / spread } else { T::zero() };
    let twist = [u[0] + omega * c[1], u[1] - omega * c[0], omega];
    let residual = anchors
        .iter()
        .map(|a| {
            let ex = twist[0] - omega * a.position[1] - a.velocity[0];
            let ey = twist[1] + omega * a.position[0] - a.velocity[1];
            ex * ex + ey * ey
        })
        .fold(T::zero(), |s, e| s + e);
    RigidFit { twist, residual, degenerate: false }
}

/// Simulates the six legs together for `duration` seconds.
pub fn simulate_gait<T: Real>(
    legs: &[LegGenotype<T>; NUM_LEGS],
    damage: &DamageScenario,
    duration: T,
) -> Result<GaitOutcome<T>, GaitError> {
    let periods = (duration / T::lit(PERIOD)).round();
    if !(duration > T::zero())
        || (duration / T::lit(PERIOD) - periods).abs() > T::lit(1e-9)
        || periods < T::one()
    {
        return Err(GaitError::BadDuration(duration.as_f64()));
    }
    let periods = periods.to_usize().unwrap_or(0);
    let dt = T::lit(DT);

    let tracks: Vec<LegTrack<T>> = legs.iter().map(LegTrack::new).collect();
    let feet: Vec<Vec<[T; 2]>> = tracks
        .iter()
        .enumerate()
        .map(|(i, tr)| tr.hip.iter().map(|&h| foot_position(i, h)).collect())
        .collect();

    // one period of body twists and stance counts; every later period repeats it
    let mut twists = Vec::with_capacity(STEPS_PER_PERIOD);
    let mut stance_steps = [0usize; NUM_LEGS];
    let mut anchors = Vec::with_capacity(NUM_LEGS);
    for j in 0..STEPS_PER_PERIOD {
        anchors.clear();
        let next = (j + 1) % STEPS_PER_PERIOD;
        for i in 0..NUM_LEGS {
            if damage.is_disabled(i) || tracks[i].lift[j] >= T::zero() {
                continue;
            }
            stance_steps[i] += 1;
            let p = feet[i][j];
            let q = feet[i][next];
            anchors.push(Anchor {
                position: p,
                velocity: [-(q[0] - p[0]) / dt, -(q[1] - p[1]) / dt],
            });
        }
        twists.push(rigid_fit(&anchors).twist);
    }

    let steps = periods * STEPS_PER_PERIOD;
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut pose = Pose2::identity();
    trajectory.push(pose);
    for k in 0..steps {
        pose = pose.compose(&Pose2::exp(twists[k % STEPS_PER_PERIOD], dt));
        trajectory.push(pose);
    }

    let denom = T::from_count(STEPS_PER_PERIOD);
    let contact_fractions: [T; NUM_LEGS] =
        std::array::from_fn(|i| T::from_count(stance_steps[i]) / denom);
    Ok(GaitOutcome {
        displacement: pose,
        mask: ContactMask::from_contacts(&contact_fractions),
        contact_fractions,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::super::mirror_leg;
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_legs(rng: &mut ChaCha8Rng) -> [LegGenotype<f64>; 6] {
        std::array::from_fn(|_| {
            let v: [f64; 6] = std::array::from_fn(|_| rng.gen());
            LegGenotype::from_slice(&v)
        })
    }

    /// Velocity of a body point under a twist, written out independently.
    fn point_velocity(twist: [f64; 3], p: [f64; 2]) -> [f64; 2] {
        [twist[0] - twist[2] * p[1], twist[1] + twist[2] * p[0]]
    }

    #[test]
    fn pure_translation() {
        let anchors: Vec<_> = [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]]
            .iter()
            .map(|&p| Anchor { position: p, velocity: [1.0, 0.0] })
            .collect();
        let fit = rigid_fit(&anchors);
        assert_abs_diff_eq!(fit.twist[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.twist[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.twist[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn recovers_synthetic_twist() {
        let truth = [0.3, -0.1, 0.2];
        let anchors: Vec<_> = [[1.0, 0.0], [-0.5, 0.8], [-0.4, -1.1]]
            .iter()
            .map(|&p| Anchor { position: p, velocity: point_velocity(truth, p) })
            .collect();
        let fit = rigid_fit(&anchors);
        for k in 0..3 {
            assert_abs_diff_eq!(fit.twist[k], truth[k], epsilon = 1e-9);
        }
        assert!(fit.residual < 1e-20);
    }

    #[test]
    fn too_few_anchors_is_flagged() {
        let fit = rigid_fit(&[Anchor { position: [1.0, 0.0], velocity: [3.0, 1.0] }]);
        assert!(fit.degenerate);
        assert_eq!(fit.twist, [0.0; 3]);
        assert!(rigid_fit::<f64>(&[]).degenerate);
    }

    #[test]
    fn inconsistent_velocities_minimise_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let anchors: Vec<_> = (0..4)
                .map(|_| Anchor {
                    position: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                    velocity: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                })
                .collect();
            let fit = rigid_fit(&anchors);
            assert!(fit.residual >= 0.0);
            let cost = |t: [f64; 3]| -> f64 {
                anchors
                    .iter()
                    .map(|a| {
                        let v = point_velocity(t, a.position);
                        (v[0] - a.velocity[0]).powi(2) + (v[1] - a.velocity[1]).powi(2)
                    })
                    .sum()
            };
            assert_abs_diff_eq!(cost(fit.twist), fit.residual, epsilon = 1e-12);
            for _ in 0..100 {
                let t = [
                    fit.twist[0] + rng.gen_range(-0.1..0.1),
                    fit.twist[1] + rng.gen_range(-0.1..0.1),
                    fit.twist[2] + rng.gen_range(-0.1..0.1),
                ];
                assert!(cost(t) >= fit.residual - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_durations() {
        let legs = [LegGenotype::<f64>::default(); 6];
        let d = DamageScenario::none();
        assert!(simulate_gait(&legs, &d, 0.0).is_err());
        assert!(simulate_gait(&legs, &d, -1.0).is_err());
        assert!(simulate_gait(&legs, &d, 1.5).is_err());
        assert!(simulate_gait(&legs, &d, 2.0).is_ok());
    }

    #[test]
    fn idle_gait_stays_put() {
        let legs = [LegGenotype::<f64>::default(); 6];
        let out = simulate_gait(&legs, &DamageScenario::none(), 1.0).unwrap();
        assert_eq!(out.displacement, Pose2::identity());
        for f in out.contact_fractions {
            assert!(f == 0.0 || f == 1.0);
        }
        assert_eq!(out.mask, ContactMask::from_contacts(&out.contact_fractions));
        assert_eq!(out.trajectory.len(), 101);
    }

    #[test]
    fn mirrored_gait_mirrors_displacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let legs = random_legs(&mut rng);
            let mirrored: [LegGenotype<f64>; 6] = std::array::from_fn(|i| legs[mirror_leg(i)]);
            let a = simulate_gait(&legs, &DamageScenario::none(), 1.0).unwrap();
            let b = simulate_gait(&mirrored, &DamageScenario::none(), 1.0).unwrap();
            assert_abs_diff_eq!(a.displacement.x, b.displacement.x, epsilon = 1e-6);
            assert_abs_diff_eq!(a.displacement.y, -b.displacement.y, epsilon = 1e-6);
            assert_abs_diff_eq!(a.displacement.yaw, -b.displacement.yaw, epsilon = 1e-6);
            assert_eq!(a.mask.mirrored(), b.mask);
        }
    }

    #[test]
    fn disabled_leg_never_touches_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for leg in 0..6 {
            let legs = random_legs(&mut rng);
            let d = DamageScenario::blocked(&[leg]).unwrap();
            let out = simulate_gait(&legs, &d, 1.0).unwrap();
            assert_eq!(out.contact_fractions[leg], 0.0);
            assert!(!out.mask.leg(leg));
            let r = DamageScenario::new(&[], &[leg]).unwrap();
            assert_eq!(simulate_gait(&legs, &r, 1.0).unwrap(), out);
        }
    }

    #[test]
    fn long_gait_composes_periods() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let legs = random_legs(&mut rng);
            let one = simulate_gait(&legs, &DamageScenario::none(), 1.0).unwrap().displacement;
            let three = simulate_gait(&legs, &DamageScenario::none(), 3.0).unwrap().displacement;
            let composed = one.compose(&one).compose(&one);
            assert_abs_diff_eq!(three.x, composed.x, epsilon = 1e-9);
            assert_abs_diff_eq!(three.y, composed.y, epsilon = 1e-9);
            assert_abs_diff_eq!(three.yaw, composed.yaw, epsilon = 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let legs = random_legs(&mut rng);
        let d = DamageScenario::blocked(&[2]).unwrap();
        assert_eq!(simulate_gait(&legs, &d, 3.0).unwrap(), simulate_gait(&legs, &d, 3.0).unwrap());
    }

    #[test]
    fn generic_over_f32() {
        let legs = [LegGenotype::<f32>::from_slice(&[0.8, 0.1, 0.5, 0.9, 0.35, 0.5]); 6];
        let out = simulate_gait(&legs, &DamageScenario::none(), 1.0f32).unwrap();
        assert!(out.displacement.x.is_finite());
    }
}

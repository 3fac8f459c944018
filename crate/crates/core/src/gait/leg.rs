use crate::scalar::Real;

use super::{
    hip_sign, wave, LegDescriptor, LegGenotype, DT, JOINT_SCALE, LINK_LENGTH, MOUNT_ANGLES_DEG,
    MOUNT_RADIUS, STEPS_PER_PERIOD,
};

/// Joint commands of one leg sampled on the control grid over one period.
pub(crate) struct LegTrack<T> {
    pub hip: Vec<T>,
    pub lift: Vec<T>,
}

impl<T: Real> LegTrack<T> {
    pub fn new(g: &LegGenotype<T>) -> Self {
        let scale = T::lit(JOINT_SCALE);
        let dt = T::lit(DT);
        let mut hip = Vec::with_capacity(STEPS_PER_PERIOD);
        let mut lift = Vec::with_capacity(STEPS_PER_PERIOD);
        for k in 0..STEPS_PER_PERIOD {
            let t = T::from_count(k) * dt;
            hip.push(scale * wave(t, g.a1, g.p1, g.d1));
            lift.push(scale * wave(t, g.a2, g.p2, g.d2));
        }
        Self { hip, lift }
    }
}

/// Foot position in the body frame for a given hip angle.
pub fn foot_position<T: Real>(leg: usize, hip_angle: T) -> [T; 2] {
    let phi = T::lit(MOUNT_ANGLES_DEG[leg].to_radians());
    let r = T::lit(MOUNT_RADIUS);
    let l = T::lit(LINK_LENGTH);
    let (ms, mc) = phi.sin_cos();
    let (fs, fc) = (phi + hip_sign::<T>(leg) * hip_angle).sin_cos();
    [r * mc + l * fc, r * ms + l * fs]
}

/// Foot height for a lift angle; the foot rests on the ground when the lift
/// command is not positive.
pub(crate) fn foot_height<T: Real>(lift_angle: T) -> T {
    if lift_angle > T::zero() {
        T::lit(LINK_LENGTH) * (T::one() - lift_angle.cos())
    } else {
        T::zero()
    }
}

/// Runs one leg for one period and measures its descriptor and energy fitness.
///
/// The fitness is the negated mean of `|hip| + 2|lift|` (the lift command
/// drives two joints), so it is never positive.
pub fn simulate_leg<T: Real>(g: &LegGenotype<T>) -> (LegDescriptor<T>, T) {
    let track = LegTrack::new(g);
    let mut height = T::zero();
    let mut min_hip = T::infinity();
    let mut max_hip = T::neg_infinity();
    let mut effort = T::zero();
    let two = T::lit(2.0);
    for (&hip, &lift) in track.hip.iter().zip(&track.lift) {
        height = height.max(foot_height(lift));
        min_hip = min_hip.min(hip);
        max_hip = max_hip.max(hip);
        effort += hip.abs() + two * lift.abs();
    }
    let desc = LegDescriptor {
        height,
        swing: T::lit(LINK_LENGTH) * (max_hip - min_hip),
        duty: g.d2,
    };
    (desc, -effort / T::from_count(STEPS_PER_PERIOD))
}

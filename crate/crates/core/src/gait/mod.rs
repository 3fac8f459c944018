//! Deterministic planar surrogate of an 18-DoF hexapod.
//!
//! Each leg is driven open loop by two periodic commands: a hip swing about
//! the vertical axis and a lift command shared by the two distal joints, which
//! keeps the foot vertical. A foot touches the ground while its lift command
//! is negative. Stance feet are pinned to the ground and the body follows the
//! least-squares rigid motion that keeps them pinned.

mod body;
mod leg;
mod wave;

use std::fmt;

use crate::scalar::Real;
use crate::se2::Pose2;

pub use body::{rigid_fit, simulate_gait, Anchor, GaitError, RigidFit};
pub use leg::{foot_position, simulate_leg};
pub use wave::wave;

pub const NUM_LEGS: usize = 6;
/// Control period of every periodic command, seconds.
pub const PERIOD: f64 = 1.0;
/// Control step, seconds.
pub const DT: f64 = 0.01;
pub const STEPS_PER_PERIOD: usize = 100;
/// Width of the moving average applied to the square waves, seconds.
pub const SMOOTHING_WIDTH: f64 = 0.1;
/// Radius of the hexagonal ring carrying the hip mounts.
pub const MOUNT_RADIUS: f64 = 1.0;
/// Leg link length.
pub const LINK_LENGTH: f64 = 0.6;
/// Full-scale joint deflection, radians.
pub const JOINT_SCALE: f64 = std::f64::consts::PI / 8.0;
/// A leg counts as used when it is on the ground more than this fraction of the time.
pub const CONTACT_THRESHOLD: f64 = 0.30;

/// Mount angles of the legs: front, middle and rear on the left, then the
/// same on the right.
pub const MOUNT_ANGLES_DEG: [f64; NUM_LEGS] = [30.0, 90.0, 150.0, -30.0, -90.0, -150.0];
/// Indices of the two middle legs.
pub const MIDDLE_LEGS: [usize; 2] = [1, 4];

/// Left/right counterpart of a leg.
pub const fn mirror_leg(leg: usize) -> usize {
    (leg + 3) % NUM_LEGS
}

/// Hips on the right side turn the opposite way for the same command.
pub(crate) fn hip_sign<T: Real>(leg: usize) -> T {
    if leg < 3 {
        T::one()
    } else {
        -T::one()
    }
}

/// Six open-loop parameters of one leg, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegGenotype<T> {
    /// Hip amplitude scale.
    pub a1: T,
    /// Hip phase, fraction of the period.
    pub p1: T,
    /// Hip duty cycle.
    pub d1: T,
    /// Lift amplitude scale.
    pub a2: T,
    /// Lift phase.
    pub p2: T,
    /// Lift duty cycle.
    pub d2: T,
}

impl<T: Real> LegGenotype<T> {
    /// Reads six consecutive values; values are clamped into `[0, 1]`.
    pub fn from_slice(v: &[T]) -> Self {
        assert!(v.len() >= 6, "a leg genotype needs six values");
        let c = |x: T| x.max(T::zero()).min(T::one());
        Self { a1: c(v[0]), p1: c(v[1]), d1: c(v[2]), a2: c(v[3]), p2: c(v[4]), d2: c(v[5]) }
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.a1, self.p1, self.d1, self.a2, self.p2, self.d2]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|&x| x >= T::zero() && x <= T::one())
    }
}

/// Behaviour of a single leg over one period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegDescriptor<T> {
    /// Peak foot lift.
    pub height: T,
    /// Peak-to-peak arc excursion of the foot.
    pub swing: T,
    /// Lift duty cycle (the `d2` gene).
    pub duty: T,
}

impl<T: Real> LegDescriptor<T> {
    pub fn to_array(&self) -> [T; 3] {
        [self.height, self.swing, self.duty]
    }

    /// Normalisation bounds: the lift never exceeds the link length and the
    /// arc never exceeds twice of it.
    pub fn bounds() -> [(T, T); 3] {
        let l = T::lit(LINK_LENGTH);
        [(T::zero(), l), (T::zero(), l + l), (T::zero(), T::one())]
    }
}

/// Six-bit leg usage pattern; bit `i` set means leg `i` is on the ground more
/// than [`CONTACT_THRESHOLD`] of the time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ContactMask(u8);

impl ContactMask {
    pub const COUNT: usize = 64;
    pub const NONE: ContactMask = ContactMask(0);
    pub const ALL: ContactMask = ContactMask(0b11_1111);

    pub fn new(bits: u8) -> Option<Self> {
        (bits < 64).then_some(Self(bits))
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < 64, "mask index out of range");
        Self(i as u8)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn leg(self, leg: usize) -> bool {
        self.0 >> leg & 1 == 1
    }

    pub fn with_leg(self, leg: usize, on: bool) -> Self {
        if on {
            Self(self.0 | 1 << leg)
        } else {
            Self(self.0 & !(1 << leg))
        }
    }

    pub fn from_contacts<T: Real>(fractions: &[T; NUM_LEGS]) -> Self {
        let thr = T::lit(CONTACT_THRESHOLD);
        let bits = fractions
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &f)| if f > thr { acc | 1 << i } else { acc });
        Self(bits)
    }

    /// Bit values as `0.0`/`1.0`, leg 0 first.
    pub fn to_unit<T: Real>(self) -> [T; NUM_LEGS] {
        std::array::from_fn(|i| if self.leg(i) { T::one() } else { T::zero() })
    }

    pub fn all() -> impl Iterator<Item = ContactMask> {
        (0..64u8).map(ContactMask)
    }

    pub fn count_ones(self) -> u32 {
        self.0.count_ones()
    }

    pub fn mirrored(self) -> Self {
        (0..NUM_LEGS).fold(Self(0), |m, i| m.with_leg(mirror_leg(i), self.leg(i)))
    }
}

/// Bits are printed leg 5 first, like a binary literal.
impl fmt::Display for ContactMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06b}", self.0)
    }
}

impl std::str::FromStr for ContactMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.len() != 6 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(format!("invalid contact mask `{s}`"));
        }
        Ok(Self(u8::from_str_radix(s, 2).map_err(|e| e.to_string())?))
    }
}

/// Legs that provide no traction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DamageScenario {
    blocked: u8,
    removed: u8,
}

impl DamageScenario {
    pub fn none() -> Self {
        Self::default()
    }

    /// Fails when a leg is listed twice, an index is out of range, or no leg remains.
    pub fn new(blocked: &[usize], removed: &[usize]) -> Result<Self, String> {
        let mut b = 0u8;
        let mut r = 0u8;
        for &i in blocked {
            if i >= NUM_LEGS {
                return Err(format!("leg index {i} out of range"));
            }
            b |= 1 << i;
        }
        for &i in removed {
            if i >= NUM_LEGS {
                return Err(format!("leg index {i} out of range"));
            }
            r |= 1 << i;
        }
        if b & r != 0 {
            return Err("a leg cannot be both blocked and removed".into());
        }
        if (b | r).count_ones() as usize >= NUM_LEGS {
            return Err("at least one leg must remain functional".into());
        }
        Ok(Self { blocked: b, removed: r })
    }

    pub fn blocked(legs: &[usize]) -> Result<Self, String> {
        Self::new(legs, &[])
    }

    pub fn is_disabled(&self, leg: usize) -> bool {
        (self.blocked | self.removed) >> leg & 1 == 1
    }

    pub fn disabled_legs(&self) -> Vec<usize> {
        (0..NUM_LEGS).filter(|&i| self.is_disabled(i)).collect()
    }

    pub fn blocked_legs(&self) -> Vec<usize> {
        (0..NUM_LEGS).filter(|&i| self.blocked >> i & 1 == 1).collect()
    }

    pub fn removed_legs(&self) -> Vec<usize> {
        (0..NUM_LEGS).filter(|&i| self.removed >> i & 1 == 1).collect()
    }

    pub fn is_intact(&self) -> bool {
        self.blocked | self.removed == 0
    }

    /// Mask using every functional leg and none of the disabled ones.
    pub fn functional_mask(&self) -> ContactMask {
        ContactMask(!(self.blocked | self.removed) & 0b11_1111)
    }

    /// Short label such as `b1` or `b1+b4`, `intact` when undamaged.
    pub fn label(&self) -> String {
        if self.is_intact() {
            return "intact".into();
        }
        let mut parts: Vec<String> = self.blocked_legs().iter().map(|i| format!("b{i}")).collect();
        parts.extend(self.removed_legs().iter().map(|i| format!("r{i}")));
        parts.join("+")
    }

    pub fn parse_label(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "intact" || s.is_empty() {
            return Ok(Self::none());
        }
        let mut blocked = Vec::new();
        let mut removed = Vec::new();
        for part in s.split('+') {
            let (kind, idx) = part.split_at(1);
            let leg: usize = idx.parse().map_err(|_| format!("invalid damage `{part}`"))?;
            match kind {
                "b" => blocked.push(leg),
                "r" => removed.push(leg),
                _ => return Err(format!("invalid damage `{part}`")),
            }
        }
        Self::new(&blocked, &removed)
    }
}

/// Result of a whole-body gait simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitOutcome<T> {
    /// Final pose relative to the start-of-gait body frame.
    pub displacement: Pose2<T>,
    /// Fraction of the control steps each foot spent in stance.
    pub contact_fractions: [T; NUM_LEGS],
    pub mask: ContactMask,
    /// Body poses at every control step, starting with the identity.
    pub trajectory: Vec<Pose2<T>>,
}

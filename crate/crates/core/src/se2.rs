//! Planar rigid motions.

use crate::scalar::Real;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut w = a - two_pi * ((a + pi) / two_pi).floor();
    // floor maps the interval to [-pi, pi); fold the lower end over
    if w <= -pi {
        w += two_pi;
    }
    if w > pi {
        w -= two_pi;
    }
    w
}

/// Planar pose (or relative displacement): position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub yaw: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, yaw: T) -> Self {
        Self { x, y, yaw: wrap_angle(yaw) }
    }

    pub fn identity() -> Self {
        Self { x: T::zero(), y: T::zero(), yaw: T::zero() }
    }

    /// `self ∘ rhs`: `rhs` is expressed in the frame of `self`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let (s, c) = self.yaw.sin_cos();
        Self {
            x: self.x + c * rhs.x - s * rhs.y,
            y: self.y + s * rhs.x + c * rhs.y,
            yaw: wrap_angle(self.yaw + rhs.yaw),
        }
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.yaw.sin_cos();
        Self {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            yaw: wrap_angle(-self.yaw),
        }
    }

    /// Displacement taking `self` to `other`, expressed in the frame of `self`.
    pub fn between(&self, other: &Self) -> Self {
        self.inverse().compose(other)
    }

    /// Rotates a body-frame vector into the parent frame.
    pub fn rotate(&self, v: [T; 2]) -> [T; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    /// Exponential map of a constant body twist `(vx, vy, omega)` held for `dt`.
    pub fn exp(twist: [T; 3], dt: T) -> Self {
        let [vx, vy, w] = twist;
        let th = w * dt;
        let (a, b) = if th.abs() < T::lit(1e-9) {
            // second order series of sin(th)/th and (1 - cos(th))/th
            (T::one() - th * th / T::lit(6.0), th / T::lit(2.0))
        } else {
            (th.sin() / th, (T::one() - th.cos()) / th)
        };
        let (ux, uy) = (vx * dt, vy * dt);
        Self { x: a * ux - b * uy, y: b * ux + a * uy, yaw: wrap_angle(th) }
    }

    /// Constant body twist whose exponential over unit time is `self`.
    pub fn log(&self) -> [T; 3] {
        let th = self.yaw;
        let (a, b) = if th.abs() < T::lit(1e-9) {
            (T::one() - th * th / T::lit(6.0), th / T::lit(2.0))
        } else {
            (th.sin() / th, (T::one() - th.cos()) / th)
        };
        let det = a * a + b * b;
        [(a * self.x + b * self.y) / det, (a * self.y - b * self.x) / det, th]
    }

    pub fn translation_norm(&self) -> T {
        self.x.hypot(self.y)
    }

    /// Reflection across the body x axis.
    pub fn mirrored(&self) -> Self {
        Self { x: self.x, y: -self.y, yaw: wrap_angle(-self.yaw) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn log_inverts_exp() {
        for tw in [[0.3, -0.2, 0.0], [0.5, 0.1, 1.3], [-0.4, 0.6, -2.9], [0.2, 0.0, 1e-12]] {
            let p = Pose2::exp(tw, 1.0);
            let back = p.log();
            for k in 0..3 {
                assert_abs_diff_eq!(back[k], tw[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI + 0.1), -PI + 0.1, epsilon = 1e-12);
        for i in -100..100 {
            let w = wrap_angle(i as f64 * 0.37);
            assert!(w > -PI && w <= PI);
        }
    }

    #[test]
    fn compose_inverse_roundtrip() {
        let a = Pose2::new(1.0, -2.0, 0.7);
        let b = Pose2::new(-0.3, 0.4, -2.1);
        let ab = a.compose(&b);
        let back = a.between(&ab);
        assert_abs_diff_eq!(back.x, b.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, b.y, epsilon = 1e-12);
        assert_abs_diff_eq!(back.yaw, b.yaw, epsilon = 1e-12);
        let id = a.compose(&a.inverse());
        assert_abs_diff_eq!(id.translation_norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_matches_fine_integration() {
        let twist = [0.3, -0.1, 0.8];
        let direct = Pose2::exp(twist, 1.0);
        let mut p = Pose2::<f64>::identity();
        let n = 100_000;
        for _ in 0..n {
            p = p.compose(&Pose2::exp(twist, 1.0 / n as f64));
        }
        assert_abs_diff_eq!(p.x, direct.x, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, direct.y, epsilon = 1e-9);
        assert_abs_diff_eq!(p.yaw, direct.yaw, epsilon = 1e-9);
    }

    #[test]
    fn generic_over_f32() {
        let p = Pose2::<f32>::new(1.0, 0.0, 0.5).compose(&Pose2::new(1.0, 0.0, 0.0));
        assert!((p.x - (1.0 + 0.5f32.cos())).abs() < 1e-6);
    }
}

use crate::scalar::Real;

use super::SMOOTHING_WIDTH;

/// Time spent high in `[0, u]` by a unit-period square wave that is high for
/// the first `duty` of each period. Valid for negative `u`.
fn high_time<T: Real>(u: T, duty: T) -> T {
    let k = u.floor();
    k * duty + (u - k).min(duty)
}

/// Integral of the ±1 square wave (duty `duty`, phase `phase`) over `[t0, t1]`.
fn square_integral<T: Real>(t0: T, t1: T, phase: T, duty: T) -> T {
    let two = T::lit(2.0);
    two * (high_time(t1 - phase, duty) - high_time(t0 - phase, duty)) - (t1 - t0)
}

/// Periodic joint command: a ±1 square wave of period 1 s, high for the
/// fraction `duty` of the period, delayed by `phase` periods and smoothed by a
/// centred moving average of width [`SMOOTHING_WIDTH`], scaled by `amplitude`.
///
/// The result always lies in `[-amplitude, amplitude]`.
pub fn wave<T: Real>(t: T, amplitude: T, phase: T, duty: T) -> T {
    let half = T::lit(SMOOTHING_WIDTH * 0.5);
    let width = half + half;
    let avg = square_integral(t - half, t + half, phase, duty) / width;
    amplitude * avg.max(-T::one()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_amplitude_is_silent() {
        for k in 0..200 {
            assert_eq!(wave(k as f64 * 0.013, 0.0, 0.3, 0.7), 0.0);
        }
    }

    #[test]
    fn period_one_on_control_grid() {
        for k in 0..100 {
            let t = k as f64 * 0.01;
            for &(a, p, d) in &[(1.0, 0.0, 0.5), (0.4, 0.77, 0.1), (0.9, 0.33, 0.95)] {
                assert_abs_diff_eq!(wave(t + 1.0, a, p, d), wave(t, a, p, d), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn balanced_duty_has_zero_mean() {
        // midpoint quadrature of the smoothed wave on the 0.01 s grid
        let n = 100;
        let mean: f64 = (0..n).map(|k| wave(k as f64 / n as f64, 1.0, 0.0, 0.5)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn bounded_by_amplitude() {
        for k in 0..1000 {
            let t = k as f64 * 0.0037;
            let a = (k % 7) as f64 / 6.0;
            let v = wave(t, a, (k % 11) as f64 / 10.0, (k % 13) as f64 / 12.0);
            assert!(v.abs() <= a + 1e-15);
        }
    }

    #[test]
    fn plateau_reaches_full_scale() {
        // high from 0 to 0.5: the interior is untouched by the smoothing window
        assert_abs_diff_eq!(wave(0.25, 1.0, 0.0, 0.5), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wave(0.75, 1.0, 0.0, 0.5), -1.0, epsilon = 1e-12);
        // centred on the rising edge the window averages to zero
        assert_abs_diff_eq!(wave(0.0, 1.0, 0.0, 0.5), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn extreme_duties() {
        assert_abs_diff_eq!(wave(0.3, 0.5, 0.2, 0.0), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(wave(0.3, 0.5, 0.2, 1.0), 0.5, epsilon = 1e-12);
    }
}

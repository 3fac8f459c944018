use rand::Rng;

use crate::scalar::Real;

use super::Genotype;

/// Bounded polynomial mutation on `[0, 1]`.
///
/// Each gene is perturbed independently with probability `rate`; the
/// perturbation follows the polynomial distribution with index `eta` and is
/// folded so that it never leaves the unit interval.
pub fn polynomial_mutate<T: Real, R: Rng>(g: &Genotype<T>, rate: f64, eta: f64, rng: &mut R) -> Genotype<T> {
    debug_assert!((0.0..=1.0).contains(&rate) && eta > 0.0);
    let pow = 1.0 / (eta + 1.0);
    let values = g
        .0
        .iter()
        .map(|&x| {
            if rate <= 0.0 || !rng.gen_bool(rate) {
                return x;
            }
            let xf = x.as_f64();
            let u: f64 = rng.gen();
            let dq = if u < 0.5 {
                let xy = 1.0 - xf;
                let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
                val.powf(pow) - 1.0
            } else {
                let xy = xf;
                let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
                1.0 - val.powf(pow)
            };
            T::lit((xf + dq).clamp(0.0, 1.0))
        })
        .collect();
    Genotype(values)
}

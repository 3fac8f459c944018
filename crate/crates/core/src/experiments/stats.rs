//! Percentiles and the Wilcoxon–Mann–Whitney rank-sum test.

/// Nearest-rank percentile: the smallest sample with at least `p`% of the
/// data at or below it. Always an element of `data`.
pub fn percentile<T: Copy + PartialOrd>(data: &[T], p: f64) -> Option<T> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable samples"));
    let rank = (p / 100.0 * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

pub fn median<T: Copy + PartialOrd>(data: &[T]) -> Option<T> {
    percentile(data, 50.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Mann–Whitney U of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Largest pooled sample size for which the exact null distribution is
/// enumerated.
pub const EXACT_LIMIT: usize = 60;

/// Midranks of the pooled sample, doubled so that they are integers.
fn doubled_ranks(a: &[f64], b: &[f64]) -> Vec<(u64, bool)> {
    let mut all: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::with_capacity(all.len());
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean; doubled that is i+j+2
        for item in &all[i..=j] {
            out.push(((i + j + 2) as u64, item.1));
        }
        i = j + 1;
    }
    out
}

/// Two-sided rank-sum test. Exact (ties handled by midranks) when the pooled
/// size is at most [`EXACT_LIMIT`], normal approximation with tie and
/// continuity correction otherwise.
pub fn rank_sum(a: &[f64], b: &[f64]) -> RankSum {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return RankSum { u: 0.0, p: 1.0, exact: true };
    }
    let n = na + nb;
    let ranks = doubled_ranks(a, b);
    let t: u64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let u = t as f64 / 2.0 - (na * (na + 1)) as f64 / 2.0;
    // doubled expected rank sum of the first sample
    let mean2 = (na * (n + 1)) as u64;
    let dev = t.abs_diff(mean2);
    if n <= EXACT_LIMIT {
        let p = exact_two_sided(&ranks, na, mean2, dev);
        return RankSum { u, p, exact: true };
    }
    let ties: f64 = {
        let mut c = 0.0;
        let mut i = 0;
        while i < ranks.len() {
            let mut j = i;
            while j + 1 < ranks.len() && ranks[j + 1].0 == ranks[i].0 {
                j += 1;
            }
            let k = (j - i + 1) as f64;
            c += k * k * k - k;
            i = j + 1;
        }
        c
    };
    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let var = naf * nbf / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return RankSum { u, p: 1.0, exact: false };
    }
    let z = ((dev as f64 / 2.0) - 0.5).max(0.0) / var.sqrt();
    RankSum { u, p: (2.0 * normal_sf(z)).min(1.0), exact: false }
}

/// P(|T − mean| ≥ dev) under random assignment of `na` of the ranks to the
/// first sample, by dynamic programming over doubled rank sums.
fn exact_two_sided(ranks: &[(u64, bool)], na: usize, mean2: u64, dev: u64) -> f64 {
    let max_sum: usize = ranks.iter().map(|r| r.0 as usize).sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    let mut reach = 0usize;
    for &(r, _) in ranks {
        let r = r as usize;
        reach += r;
        for k in (1..=na).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=reach).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: f64 = ways[na].iter().sum();
    let tail: f64 = ways[na].iter().enumerate().filter(|(s, _)| (*s as u64).abs_diff(mean2) >= dev).map(|(_, w)| w).sum();
    (tail / total).min(1.0)
}

/// Upper tail of the standard normal distribution.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, relative error < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07 + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons.max(1) as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive permutation test on |U − E[U]| with midranks.
    fn permutation_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = pooled.len();
        let na = a.len();
        let mut sorted: Vec<f64> = pooled.clone();
        sorted.sort_by(|x, y| x.total_cmp(y));
        let rank_of = |x: f64| {
            let first = sorted.iter().position(|&y| y == x).unwrap();
            let last = sorted.iter().rposition(|&y| y == x).unwrap();
            (first + last + 2) as f64 / 2.0
        };
        let r: Vec<f64> = pooled.iter().map(|&x| rank_of(x)).collect();
        let mean = na as f64 * (n + 1) as f64 / 2.0;
        let obs = (r[..na].iter().sum::<f64>() - mean).abs();
        let (mut hit, mut total) = (0u64, 0u64);
        for bits in 0u32..(1 << n) {
            if bits.count_ones() as usize != na {
                continue;
            }
            let s: f64 = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| r[i]).sum();
            total += 1;
            if (s - mean).abs() >= obs - 1e-9 {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn nearest_rank_examples() {
        let d = [15.0, 20.0, 35.0, 40.0, 50.0];
        assert_eq!(percentile(&d, 30.0), Some(20.0));
        assert_eq!(percentile(&d, 40.0), Some(20.0));
        assert_eq!(percentile(&d, 50.0), Some(35.0));
        assert_eq!(percentile(&d, 100.0), Some(50.0));
        assert_eq!(percentile(&d, 0.0), Some(15.0));
        assert_eq!(median(&[3, 1, 2, 4]), Some(2));
        assert_eq!(percentile::<f64>(&[], 50.0), None);
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let a = [3.0, 5.0, 5.0, 9.0, 12.0];
        assert_eq!(rank_sum(&a, &a).p, 1.0);
        let big: Vec<f64> = (0..80).map(|i| (i % 17) as f64).collect();
        let r = rank_sum(&big, &big);
        assert!(!r.exact);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn separated_samples_exact_value() {
        // all of a below all of b: one extreme arrangement at each end out of C(8,4) = 70
        let r = rank_sum(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(r.u, 0.0);
        assert!((r.p - 2.0 / 70.0).abs() < 1e-12);
    }

    #[test]
    fn normal_approximation_is_close_to_exact() {
        let a: Vec<f64> = (0..30).map(|i| (i * 7 % 31) as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| (i * 11 % 37) as f64 + 3.5).collect();
        let exact = rank_sum(&a, &b);
        assert!(exact.exact);
        let mut a2 = a.clone();
        a2.push(100.0);
        a2.push(-100.0);
        let approx = rank_sum(&a2, &b);
        assert!(!approx.exact);
        assert!((exact.p - approx.p).abs() < 0.05, "{} vs {}", exact.p, approx.p);
    }

    #[test]
    fn normal_tail_values() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_sf(1.959_963_985) - 0.025).abs() < 1e-6);
        assert!((normal_sf(-1.0) - 0.841_344_746).abs() < 1e-6);
    }

    #[test]
    fn bonferroni_caps_at_one() {
        assert_eq!(bonferroni(0.01, 3), 0.03);
        assert_eq!(bonferroni(0.5, 3), 1.0);
    }

    proptest! {
        #[test]
        fn percentile_is_a_member(v in prop::collection::vec(0u32..50, 1..40), p in 0.0f64..100.0) {
            let x = percentile(&v, p).unwrap();
            prop_assert!(v.contains(&x));
        }

        #[test]
        fn matches_permutation_oracle(
            a in prop::collection::vec(0u8..12, 1..=8),
            b in prop::collection::vec(0u8..12, 1..=8),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = rank_sum(&a, &b);
            prop_assert!((0.0..=1.0).contains(&r.p));
            prop_assert!((r.p - permutation_p(&a, &b)).abs() <= 0.01);
        }
    }
}

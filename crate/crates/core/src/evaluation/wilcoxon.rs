use libm::erfc;

use crate::error::{Error, Result};

/// Largest number of nonzero differences for which p is computed exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    /// Null distribution counted over all 2^n sign patterns.
    Exact,
    /// Normal approximation with continuity and tie correction.
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    /// W, the sum of ranks of positive differences.
    pub statistic: f64,
    pub n_effective: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub significant: bool,
    pub method: PValueMethod,
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped, absolute differences are ranked with
/// average ranks for ties, and `p < alpha` counts as significant. The exact
/// null distribution is used up to [`EXACT_MAX_N`] pairs.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alpha: f64) -> Result<SignificanceResult> {
    wilcoxon_signed_rank_with(x, y, alpha, None)
}

/// [`wilcoxon_signed_rank`] with the p-value method forced when `Some`.
pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    method: Option<PValueMethod>,
) -> Result<SignificanceResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::NotApplicable);
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = diffs.len();

    // Ranks are stored doubled so tied averages stay integral.
    let mut doubled = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && diffs[end + 1].abs() == diffs[start].abs() {
            end += 1;
        }
        for r in &mut doubled[start..=end] {
            *r = (start + end + 2) as u64;
        }
        tie_sizes.push(end - start + 1);
        start = end + 1;
    }
    let w_doubled: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let method = method.unwrap_or(if n <= EXACT_MAX_N {
        PValueMethod::Exact
    } else {
        PValueMethod::NormalApproximation
    });
    let p_value = match method {
        PValueMethod::Exact => exact_p(&doubled, w_doubled),
        PValueMethod::NormalApproximation => normal_p(n, &tie_sizes, w_doubled as f64 / 2.0),
    };
    Ok(SignificanceResult {
        statistic: w_doubled as f64 / 2.0,
        n_effective: n,
        p_value,
        significant: p_value < alpha,
        method,
    })
}

/// Counts sign patterns by their (doubled) positive-rank sum.
fn exact_p(doubled: &[u64], w_doubled: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let patterns = 2f64.powi(doubled.len() as i32);
    let w = w_doubled as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / patterns;
    let upper: f64 = counts[w..].iter().sum::<f64>() / patterns;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(n: usize, tie_sizes: &[usize], w: f64) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Sign-pattern enumeration over explicit average ranks.
    fn enumerate_p(diffs: &[f64]) -> (f64, f64) {
        let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        let n = nz.len();
        let ranks: Vec<f64> = nz
            .iter()
            .map(|d| {
                let below = nz.iter().filter(|e| e.abs() < d.abs()).count() as f64;
                let equal = nz.iter().filter(|e| e.abs() == d.abs()).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect();
        let w: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= w + 1e-9 {
                le += 1;
            }
            if s >= w - 1e-9 {
                ge += 1;
            }
        }
        let total = (1u64 << n) as f64;
        (w, (2.0 * (le as f64 / total).min(ge as f64 / total)).min(1.0))
    }

    #[test]
    fn statistic_with_ties() {
        let y = [0.0; 6];
        let x = [-2.0, -1.0, 1.0, 3.0, 4.0, 5.0];
        let res = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
        assert_eq!(res.statistic, 16.5);
        assert_eq!(res.n_effective, 6);
        assert_eq!(res.method, PValueMethod::Exact);
        let (w, p) = enumerate_p(&x);
        assert_eq!(w, 16.5);
        assert!((res.p_value - p).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_not_applicable() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(wilcoxon_signed_rank(&x, &x, 0.05), Err(Error::NotApplicable)));
        assert!(matches!(wilcoxon_signed_rank(&x, &x[..2], 0.05), Err(Error::LengthMismatch(3, 2))));
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.random_range(1..=12);
            // Coarse grid values so ties and zeros show up.
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64 * 0.5).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64 * 0.5).collect();
            let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            match wilcoxon_signed_rank(&x, &y, 0.05) {
                Ok(res) => {
                    let (w, p) = enumerate_p(&diffs);
                    assert_eq!(res.statistic, w);
                    assert!((res.p_value - p).abs() < 1e-9);
                }
                Err(Error::NotApplicable) => assert!(diffs.iter().all(|d| *d == 0.0)),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn swapping_samples_mirrors_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [3, 8, 12, 20, 30] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
            let b = wilcoxon_signed_rank(&y, &x, 0.05).unwrap();
            let t = (a.n_effective * (a.n_effective + 1)) as f64 / 2.0;
            assert_eq!(b.statistic, t - a.statistic);
            assert!((a.p_value - b.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_approximation_tracks_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let x: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = (0..25).map(|_| rng.random_range(0.1..1.1)).collect();
            let approx = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
            assert_eq!(approx.method, PValueMethod::NormalApproximation);
            let exact = wilcoxon_signed_rank_with(&x, &y, 0.05, Some(PValueMethod::Exact)).unwrap();
            assert!((approx.p_value - exact.p_value).abs() < 0.01, "{} vs {}", approx.p_value, exact.p_value);
        }
    }

    #[test]
    fn clear_shift_is_significant() {
        let x: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 * 0.01).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.013).collect();
        let res = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
        assert_eq!(res.statistic, 55.0);
        assert!((res.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert!(res.significant);
    }
}

//! Two-sample tests and Benjamini–Hochberg adjustment.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Welch's unequal-variance t-test, two-sided.
///
/// One constant sample is allowed (the other carries the variance); two
/// constant samples give [`Error::DegenerateVariance`].
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("welch_t needs at least two observations per sample"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult { statistic: t, p })
}

/// Mann–Whitney U for sample `a`, normal approximation with tie and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("mann_whitney_u needs non-empty samples"));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let mut all: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += all[i..=j].iter().filter(|x| x.1).count() as f64 * avg_rank;
        i = j + 1;
    }
    let (f1, f2, fnn) = (n1 as f64, n2 as f64, n as f64);
    let u = rank_sum_a - f1 * (f1 + 1.0) / 2.0;
    let mu = f1 * f2 / 2.0;
    let var = if n > 1 { f1 * f2 / 12.0 * ((fnn + 1.0) - tie_term / (fnn * (fnn - 1.0))) } else { 0.0 };
    if var <= 0.0 {
        return Ok(TestResult { statistic: u, p: 1.0 });
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(TestResult { statistic: u, p: (2.0 * normal_sf(z)).min(1.0) })
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::PValueRange(bad));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].total_cmp(&pvals[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &idx) in order.iter().enumerate().rev() {
        let rank = (pos + 1) as f64;
        let v = (pvals[idx] * m as f64) / rank;
        running = running.min(v);
        adjusted[idx] = running.min(1.0).max(pvals[idx]);
    }
    Ok(adjusted)
}

/// Sample skewness (biased moment estimator); 0 for constant samples.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return 0.0;
    }
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Student-t survival function by Simpson quadrature of the density,
    /// independent of the library CDF.
    fn t_sf_quadrature(t: f64, df: f64) -> f64 {
        use statrs::function::gamma::ln_gamma;
        let lc = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
        let dens = |x: f64| (lc - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        // substitute x = t + u/(1-u) on [0,1)
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = t + u / (1.0 - u);
            dens(x) / ((1.0 - u) * (1.0 - u))
        };
        let steps = 200_000;
        let h = 1.0 / steps as f64;
        let mut s = f(0.0) + f(1.0 - 1e-12);
        for k in 1..steps {
            let u = k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(u);
        }
        s * h / 3.0
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.5];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn welch_separated_samples_against_quadrature() {
        let a = [0.0, 0.0, 0.1, -0.1];
        let b = [10.0, 10.0, 10.1, 9.9];
        let r = welch_t(&a, &b).unwrap();
        assert!(r.p < 1e-4);
        // df = 6 for equal variances and sizes
        let oracle = 2.0 * t_sf_quadrature(r.statistic.abs(), 6.0);
        assert!(oracle < 1e-4);
        assert!((r.p - oracle).abs() < 1e-3 * oracle.max(1e-12), "{} vs {}", r.p, oracle);
        // and a moderate value where quadrature is easy to trust
        let r = welch_t(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.5]).unwrap();
        let (ma, va) = mean_var(&[0.0, 1.0, 2.0, 3.0]);
        let (mb, vb) = mean_var(&[1.0, 2.0, 3.0, 4.5]);
        let (sa, sb) = (va / 4.0, vb / 4.0);
        let df = (sa + sb).powi(2) / (sa * sa / 3.0 + sb * sb / 3.0);
        assert!(((ma - mb) / (sa + sb).sqrt() - r.statistic).abs() < 1e-12);
        let oracle = 2.0 * t_sf_quadrature(r.statistic.abs(), df);
        assert!((r.p - oracle).abs() < 1e-6, "{} vs {}", r.p, oracle);
    }

    #[test]
    fn welch_antisymmetric() {
        let a = [0.3, 1.2, -0.4, 2.2, 0.9];
        let b = [1.0, 2.1, 1.7, 3.3];
        let ab = welch_t(&a, &b).unwrap();
        let ba = welch_t(&b, &a).unwrap();
        assert_eq!(ab.statistic, -ba.statistic);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn welch_degenerate() {
        assert!(matches!(welch_t(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateVariance)));
        // one constant sample is fine
        assert!(welch_t(&[1.0, 1.0, 1.0], &[2.0, 2.5, 3.0]).is_ok());
    }

    fn choose_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..(1 << n)).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
    }

    #[test]
    fn mann_whitney_separated_against_exact_enumeration() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [6.0, 7.0, 8.0, 9.0, 10.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        // brute-force U: count pairs with a > b
        let u_brute: f64 = a.iter().flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else { 0.0 })).sum();
        assert_eq!(r.statistic, u_brute);
        assert_eq!(r.statistic, 0.0);
        // exact null distribution of the rank sum
        let observed = 15.0;
        let subsets = choose_subsets(10, 5);
        let total = subsets.len() as f64;
        let extreme = subsets
            .iter()
            .filter(|s| {
                let rs: f64 = s.iter().map(|&i| (i + 1) as f64).sum();
                let u = rs - 15.0;
                (u - 12.5).abs() >= (observed - 15.0 - 12.5f64).abs()
            })
            .count() as f64;
        let exact_p = extreme / total;
        assert!(exact_p < 0.05);
        assert!(r.p < 0.05);
    }

    #[test]
    fn mann_whitney_identity_and_symmetry() {
        let a = [0.1, 0.5, 0.3, 0.9];
        assert!((mann_whitney_u(&a, &a).unwrap().p - 1.0).abs() < 1e-12);
        let b = [0.2, 0.8, 1.5];
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        assert_eq!(ab.statistic + ba.statistic, 12.0);
        assert!((ab.p - ba.p).abs() < 1e-15);
    }

    #[test]
    fn bh_hand_trace() {
        assert_eq!(bh_adjust(&[0.01, 0.02, 0.03, 0.5]).unwrap(), vec![0.04, 0.04, 0.04, 0.5]);
        assert_eq!(bh_adjust(&[1.0]).unwrap(), vec![1.0]);
        assert!(bh_adjust(&[0.2, 0.2, 0.2]).unwrap().iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert!(matches!(bh_adjust(&[0.1, 1.5]), Err(Error::PValueRange(_))));
    }

    proptest! {
        #[test]
        fn bh_permutation_invariant_and_monotone(
            p in proptest::collection::vec(0.0f64..=1.0, 1..30),
            seed in any::<u64>()
        ) {
            let adj = bh_adjust(&p).unwrap();
            let mut perm: Vec<usize> = (0..p.len()).collect();
            let mut s = seed;
            for i in (1..perm.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let adj_perm = bh_adjust(&permuted).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(adj_perm[k], adj[i]);
            }
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, raw) in adj.iter().zip(&p) {
                prop_assert!(*a >= *raw && *a <= 1.0);
            }
        }
    }
}

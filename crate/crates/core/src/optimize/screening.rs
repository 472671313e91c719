//! Hypothesis-guided mode: single-target screening, then fixed-cardinality
//! combinations ranked by their mean single score and solved in full.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve, InterventionProblem, Solution};
use crate::error::{Error, Result};

/// Largest number of k-subsets ranked exhaustively.
pub const SUBSET_CAP: usize = 200_000;
/// Pool size used when the full enumeration exceeds [`SUBSET_CAP`].
pub const TOP_SINGLES: usize = 30;
const STORED_SUBSETS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSubset {
    pub subset: Vec<String>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub candidates: Vec<String>,
    pub single_scores: Vec<f64>,
    pub single_alphas: Vec<f64>,
    /// Sorted by descending mean score; at most the first 1000 are stored.
    pub ranked_subsets: Vec<RankedSubset>,
    pub n_subsets_ranked: usize,
    /// Candidates the subsets were drawn from.
    pub pool: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwo {
    pub screening: ScreeningReport,
    pub finalists: Vec<RankedSubset>,
    pub finalist_scores: Vec<f64>,
    pub best: Solution,
}

fn check_z(p: &InterventionProblem, z: &[usize]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::invalid("screening set is empty"));
    }
    if let Some(&bad) = z.iter().find(|i| !p.candidates().contains(i)) {
        return Err(Error::invalid(format!("{} is not a candidate", p.names().get(bad).map_or("?", |s| s.as_str()))));
    }
    Ok(())
}

/// Unregularized single-node solves: `[m] = {i}` for each `i ∈ z`.
pub fn screen_single_targets(p: &InterventionProblem, z: &[usize]) -> Result<ScreeningReport> {
    check_z(p, z)?;
    let sols: Vec<Solution> = z.par_iter().map(|&i| solve(&p.with_actionable(&[i])?, 0.0, None)).collect::<Result<_>>()?;
    let single_alphas = z
        .iter()
        .zip(&sols)
        .map(|(&i, s)| s.alpha[p.candidates().iter().position(|&c| c == i).expect("checked candidate")])
        .collect();
    Ok(ScreeningReport {
        candidates: z.iter().map(|&i| p.names()[i].clone()).collect(),
        single_scores: sols.iter().map(|s| s.transition_pct).collect(),
        single_alphas,
        ranked_subsets: Vec::new(),
        n_subsets_ranked: 0,
        pool: Vec::new(),
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    c
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Rank k-subsets of `z` by mean single score, solve the `top_m` best with
/// `λ = 0` restricted to each subset, and keep the highest transition percentage.
pub fn prioritize_and_solve(p: &InterventionProblem, z: &[usize], k: usize, top_m: usize) -> Result<StageTwo> {
    if k == 0 || top_m == 0 {
        return Err(Error::invalid("k and top_m must be positive"));
    }
    if k > z.len() {
        return Err(Error::TooFew { requested: k, available: z.len() });
    }
    let mut screening = screen_single_targets(p, z)?;
    let s = &screening.single_scores;
    let mut by_score: Vec<usize> = (0..z.len()).collect();
    by_score.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut pool: Vec<usize> = if binomial(z.len(), k) as f64 <= SUBSET_CAP as f64 {
        (0..z.len()).collect()
    } else {
        by_score[..TOP_SINGLES.min(z.len()).max(k)].to_vec()
    };
    while pool.len() > k && binomial(pool.len(), k) > SUBSET_CAP as u128 {
        pool.pop();
    }
    pool.sort_unstable();
    let mut ranked: Vec<(Vec<usize>, f64)> = Vec::new();
    for_each_subset(pool.len(), k, |idx| {
        let members: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
        let mean = members.iter().map(|&i| s[i]).sum::<f64>() / k as f64;
        ranked.push((members, mean));
    });
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let name = |i: usize| p.names()[z[i]].clone();
    let to_ranked = |(m, v): &(Vec<usize>, f64)| RankedSubset { subset: m.iter().map(|&i| name(i)).collect(), mean_score: *v };
    let finalists: Vec<&(Vec<usize>, f64)> = ranked.iter().take(top_m).collect();
    let sols: Vec<Solution> = finalists
        .par_iter()
        .map(|(m, _)| {
            let nodes: Vec<usize> = m.iter().map(|&i| z[i]).collect();
            solve(&p.with_actionable(&nodes)?, 0.0, None)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (j, sol) in sols.iter().enumerate() {
        if sol.transition_pct > sols[best].transition_pct {
            best = j;
        }
    }
    screening.n_subsets_ranked = ranked.len();
    screening.pool = pool.iter().map(|&i| name(i)).collect();
    screening.ranked_subsets = ranked.iter().take(STORED_SUBSETS).map(to_ranked).collect();
    Ok(StageTwo {
        finalists: finalists.iter().map(|r| to_ranked(r)).collect(),
        finalist_scores: sols.iter().map(|s| s.transition_pct).collect(),
        best: sols[best].clone(),
        screening,
    })
}

//! Per-pair privacy loss replayed on an actual complete-graph walk.
//!
//! For an observer `v`, the walk up to its last visit splits into cycles that
//! end at each of `v`'s visits. Cycles longer than `n` are cut into pieces of
//! `n` steps (the observer is granted a free look every `n` steps). A piece of
//! length `m` aggregates `m` Gaussian contributions, so a contribution inside
//! it is `eps0 / sqrt(m)`-DP, and subsampling over which users the piece
//! contains gives `subsample_amplify(eps0 / sqrt(m), n, m)`. The pieces
//! containing `u` are then composed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{advanced_epsilon, heterogeneous_advanced, subsample_amplify, WindowCheck};
use crate::error::{invalid, Result};
use crate::walk::{TopologyKind, WalkTrace};

/// Square matrix indexed by `(u, v)`: loss of `u`'s data as seen by observer
/// `v`. The diagonal is NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLossMatrix {
    n: usize,
    epsilon: Vec<f64>,
    /// Total delta of each entry.
    delta: Vec<f64>,
    pub outside_validity: bool,
}

impl PairLossMatrix {
    fn zeros(n: usize) -> Self {
        let mut epsilon = vec![0.0; n * n];
        for i in 0..n {
            epsilon[i * n + i] = f64::NAN;
        }
        Self {
            n,
            epsilon,
            delta: vec![0.0; n * n],
            outside_validity: false,
        }
    }

    /// Builds a matrix from row-major entries; the diagonal is overwritten with NaN.
    pub fn from_entries(n: usize, mut epsilon: Vec<f64>) -> Result<Self> {
        if epsilon.len() != n * n {
            return Err(invalid(format!(
                "expected {} entries, got {}",
                n * n,
                epsilon.len()
            )));
        }
        for i in 0..n {
            epsilon[i * n + i] = f64::NAN;
        }
        Ok(Self {
            n,
            epsilon,
            delta: vec![0.0; n * n],
            outside_validity: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry for 1-based users `u` (data owner) and `v` (observer).
    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.epsilon[(u as usize - 1) * self.n + v as usize - 1]
    }

    pub fn delta(&self, u: u32, v: u32) -> f64 {
        self.delta[(u as usize - 1) * self.n + v as usize - 1]
    }

    /// Off-diagonal entries in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.epsilon
            .iter()
            .enumerate()
            .filter(move |(i, _)| i / n != i % n)
            .map(|(_, &e)| e)
    }

    /// Entrywise sum with another matrix of the same size.
    pub fn add(&self, other: &PairLossMatrix) -> Result<PairLossMatrix> {
        if self.n != other.n {
            return Err(invalid("matrix sizes differ"));
        }
        let mut out = self.clone();
        for i in 0..self.epsilon.len() {
            out.epsilon[i] += other.epsilon[i];
            out.delta[i] += other.delta[i];
        }
        out.outside_validity |= other.outside_validity;
        Ok(out)
    }

    /// `u,v,epsilon` rows with 0-based users, diagonal omitted.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["u", "v", "epsilon"])?;
        for u in 0..self.n {
            for v in 0..self.n {
                if u != v {
                    wr.write_record([
                        u.to_string(),
                        v.to_string(),
                        self.epsilon[u * self.n + v].to_string(),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn require_complete(walk: &WalkTrace) -> Result<()> {
    if walk.topology.kind != TopologyKind::Complete {
        return Err(invalid("empirical accounting needs a complete-graph walk"));
    }
    Ok(())
}

/// Visit positions of every user, in walk order.
fn visits_by_user(walk: &WalkTrace) -> Vec<Vec<usize>> {
    let mut visits = vec![Vec::new(); walk.n()];
    for (i, &u) in walk.steps().iter().enumerate() {
        visits[u as usize - 1].push(i);
    }
    visits
}

/// Empirical loss of Gaussian summation for every ordered pair. Each
/// perturbation is `(eps0, delta0)`-DP; an entry's delta is
/// `(pieces containing u) * delta0 + delta'`. Pieces are composed with the
/// tighter of simple and advanced composition.
pub fn empirical_pair_loss_sum(
    walk: &WalkTrace,
    eps0: f64,
    delta0: f64,
    delta_prime: f64,
    check: WindowCheck,
) -> Result<PairLossMatrix> {
    require_complete(walk)?;
    if !(eps0 > 0.0) || !(delta_prime > 0.0 && delta_prime < 1.0) || !(delta0 >= 0.0) {
        return Err(invalid("need eps0 > 0, delta0 >= 0 and delta' in (0, 1)"));
    }
    let outside = check.resolve(
        "empirical summation loss",
        (eps0 > 1.0).then(|| format!("needs eps0 <= 1, got {eps0}")),
    )?;
    let n = walk.n();
    let steps = walk.steps();
    let visits = visits_by_user(walk);
    let nf = n as f64;
    // piece loss depends only on its length
    let piece_eps: Vec<f64> = (0..=n)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                subsample_amplify(eps0 / (m as f64).sqrt(), nf, m as u64)
            }
        })
        .collect();

    let columns: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|vi| {
            let v = vi as u32 + 1;
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            let mut drift = vec![0.0; n];
            let mut count = vec![0u64; n];
            let mut seen = vec![usize::MAX; n];
            let mut start = 0usize;
            let mut piece_id = 0usize;
            for &visit in &visits[vi] {
                let end = visit + 1;
                let mut s = start;
                while s < end {
                    let e = (s + n).min(end);
                    let eps = piece_eps[e - s];
                    for &u in &steps[s..e] {
                        let ui = u as usize - 1;
                        if u != v && seen[ui] != piece_id {
                            seen[ui] = piece_id;
                            sum[ui] += eps;
                            sq[ui] += eps * eps;
                            drift[ui] += eps * eps.exp_m1();
                            count[ui] += 1;
                        }
                    }
                    piece_id += 1;
                    s = e;
                }
                start = end;
            }
            let ln = (1.0 / delta_prime).ln();
            let eps: Vec<f64> = (0..n)
                .map(|ui| {
                    if ui == vi {
                        f64::NAN
                    } else if count[ui] == 0 {
                        0.0
                    } else {
                        sum[ui].min((2.0 * ln * sq[ui]).sqrt() + drift[ui])
                    }
                })
                .collect();
            let delta: Vec<f64> = (0..n)
                .map(|ui| {
                    if count[ui] == 0 {
                        0.0
                    } else {
                        count[ui] as f64 * delta0 + delta_prime
                    }
                })
                .collect();
            (eps, delta)
        })
        .collect();

    let mut m = PairLossMatrix::zeros(n);
    for (vi, (eps, delta)) in columns.into_iter().enumerate() {
        for ui in 0..n {
            m.epsilon[ui * n + vi] = eps[ui];
            m.delta[ui * n + vi] = delta[ui];
        }
    }
    m.outside_validity = outside;
    Ok(m)
}

/// How spotted contributions are composed.
pub use crate::accountant::SpottedMode;

/// Number of `u`'s contributions directly preceded or followed by one of
/// `v`'s, as a row-major `(u, v)` count matrix.
pub fn spotted_counts(walk: &WalkTrace) -> Vec<u64> {
    let n = walk.n();
    let steps = walk.steps();
    let mut counts = vec![0u64; n * n];
    for (i, &u) in steps.iter().enumerate() {
        let prev = (i > 0).then(|| steps[i - 1]);
        let next = steps.get(i + 1).copied();
        let ui = u as usize - 1;
        if let Some(p) = prev.filter(|&p| p != u) {
            counts[ui * n + p as usize - 1] += 1;
        }
        if let Some(x) = next.filter(|&x| x != u && Some(x) != prev) {
            counts[ui * n + x as usize - 1] += 1;
        }
    }
    counts
}

/// Loss from spotted contributions: each one costs the full `eps0`.
pub fn empirical_pair_loss_spotted(
    walk: &WalkTrace,
    eps0: f64,
    delta_prime: f64,
    mode: SpottedMode,
) -> Result<PairLossMatrix> {
    require_complete(walk)?;
    let n = walk.n();
    let counts = spotted_counts(walk);
    let eps = counts
        .iter()
        .map(|&c| match (c, mode) {
            (0, _) => 0.0,
            (c, SpottedMode::Simple) => c as f64 * eps0,
            (c, SpottedMode::Advanced) => {
                (c as f64 * eps0).min(advanced_epsilon(eps0, c as f64, delta_prime))
            }
        })
        .collect();
    PairLossMatrix::from_entries(n, eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Statistics over all finite off-diagonal entries of the matrices.
pub fn empirical_summary(matrices: &[PairLossMatrix]) -> Result<LossSummary> {
    let first = matrices
        .first()
        .ok_or_else(|| invalid("no matrices to summarize"))?;
    if matrices.iter().any(|m| m.n != first.n) {
        return Err(invalid("matrices have different sizes"));
    }
    let (mut sum, mut min, mut max, mut count) = (0.0, f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for e in matrices
        .iter()
        .flat_map(|m| m.off_diagonal())
        .filter(|e| e.is_finite())
    {
        sum += e;
        min = min.min(e);
        max = max.max(e);
        count += 1;
    }
    if count == 0 {
        return Err(invalid("no off-diagonal entries to summarize"));
    }
    Ok(LossSummary {
        mean: sum / count as f64,
        min,
        max,
        count,
    })
}

/// Reference per-pair loss obtained by listing every piece explicitly; slow
/// but straightforward, kept for cross-checking.
pub fn pair_loss_reference(walk: &WalkTrace, u: u32, v: u32, eps0: f64, delta_prime: f64) -> f64 {
    let n = walk.n();
    let steps = walk.steps();
    let last = match steps.iter().rposition(|&x| x == v) {
        Some(i) => i,
        None => return 0.0,
    };
    let mut pieces = Vec::new();
    let mut cur: Vec<u32> = Vec::new();
    for &x in &steps[..=last] {
        cur.push(x);
        if x == v || cur.len() == n {
            pieces.push(std::mem::take(&mut cur));
        }
    }
    let eps: Vec<f64> = pieces
        .iter()
        .filter(|p| p.contains(&u))
        .map(|p| subsample_amplify(eps0 / (p.len() as f64).sqrt(), n as f64, p.len() as u64))
        .collect();
    if eps.is_empty() {
        return 0.0;
    }
    eps.iter()
        .sum::<f64>()
        .min(heterogeneous_advanced(&eps, delta_prime))
}

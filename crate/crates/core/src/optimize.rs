//! Revenue-optimal rank-based auctions.
//!
//! The revenue of weights `w` is `sum_k (w[k] - w[k+1]) P_k = sum_k w[k] m_k`
//! with marginal revenues `m_k = P_k - P_{k-1}`. Optimal weights iron the
//! multi-unit revenue curve `P` to its concave hull and cut ranks whose ironed
//! marginal revenue is negative. Any feasible target can be implemented by a
//! random sequence of iron-by-rank and rank-reserve operations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{PositionWeights, WEIGHT_TOL};
use crate::{Error, Result};

/// Ironed marginal revenues below this are treated as negative.
const RESERVE_TOL: f64 = -1e-12;

/// Per-agent revenues `P_0..=P_n` of the `k`-unit auctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MultiUnitRevenueCurve {
    p: Vec<f64>,
}

impl MultiUnitRevenueCurve {
    /// Requires `n >= 2`, `P_0 = P_n = 0` and non-negative entries.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 3 {
            return Err(Error::Domain(format!("revenue curve needs n + 1 >= 3 points, got {}", p.len())));
        }
        if p[0] != 0.0 || p[p.len() - 1] != 0.0 {
            return Err(Error::Domain("P_0 and P_n must be zero".into()));
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < -WEIGHT_TOL) {
            return Err(Error::Domain(format!("multi-unit revenues must be non-negative, got {x}")));
        }
        Ok(Self { p })
    }

    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

impl TryFrom<Vec<f64>> for MultiUnitRevenueCurve {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<MultiUnitRevenueCurve> for Vec<f64> {
    fn from(c: MultiUnitRevenueCurve) -> Self {
        c.p
    }
}

/// Concave hull of a multi-unit revenue curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IronedRevenueCurve {
    /// Hull values `Pbar_0..=Pbar_n`.
    pub pbar: Vec<f64>,
    /// Hull vertices in increasing order; collinear points are kept.
    pub vertices: Vec<usize>,
    /// Index ranges `[a, b]` between consecutive vertices with `b - a >= 2`,
    /// where the hull lies strictly above `P`.
    pub intervals: Vec<(usize, usize)>,
}

impl IronedRevenueCurve {
    /// Ironed marginal revenues `mbar[k] = Pbar_k - Pbar_{k-1}`, at index `k - 1`.
    pub fn marginal(&self) -> Vec<f64> {
        self.pbar.windows(2).map(|p| p[1] - p[0]).collect()
    }
}

/// Upper concave envelope of the points `(k, P_k)` by the monotone chain.
pub fn concave_hull(p: &MultiUnitRevenueCurve) -> IronedRevenueCurve {
    let p = &p.p;
    let mut hull: Vec<usize> = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // pop b when it lies strictly below the chord from a to k
            let cross = (b - a) as f64 * (p[k] - p[a]) - (p[b] - p[a]) * (k - a) as f64;
            if cross > 1e-14 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut pbar = p.clone();
    let mut intervals = Vec::new();
    for seg in hull.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b - a >= 2 {
            intervals.push((a, b));
            let slope = (p[b] - p[a]) / (b - a) as f64;
            for (k, v) in pbar.iter_mut().enumerate().take(b).skip(a + 1) {
                *v = p[a] + slope * (k - a) as f64;
            }
        }
    }
    IronedRevenueCurve { pbar, vertices: hull, intervals }
}

/// `sum_k (w[k] - w[k+1]) P_k`.
pub fn revenue_of_weights(w: &PositionWeights, p: &MultiUnitRevenueCurve) -> Result<f64> {
    check_n(w.n(), p.n())?;
    Ok((1..=w.n()).map(|k| (w.get(k) - w.get(k + 1)) * p.p[k]).sum())
}

fn check_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Domain(format!("mismatched n: {a} vs {b}")));
    }
    Ok(())
}

/// Replaces `w[lo..=hi]` (1-indexed) with their mean.
pub fn apply_iron(w: &PositionWeights, lo: usize, hi: usize) -> Result<PositionWeights> {
    if lo < 1 || lo > hi || hi > w.n() {
        return Err(Error::Domain(format!("iron interval [{lo}, {hi}] invalid for n = {}", w.n())));
    }
    let mut v = w.as_slice().to_vec();
    iron_in_place(&mut v, lo, hi);
    PositionWeights::new(v)
}

/// Zeroes `w[k+1..=n]`, rejecting every rank below `k`.
pub fn apply_reserve(w: &PositionWeights, k: usize) -> Result<PositionWeights> {
    if k > w.n() {
        return Err(Error::Domain(format!("reserve rank {k} exceeds n = {}", w.n())));
    }
    let mut v = w.as_slice().to_vec();
    v[k..].fill(0.0);
    PositionWeights::new(v)
}

fn iron_in_place(v: &mut [f64], lo: usize, hi: usize) {
    let mean = v[lo - 1..hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
    v[lo - 1..hi].fill(mean);
}

/// Revenue-optimal weights feasible for `env`: average `env` over the hull's
/// ironed intervals, then zero every position with negative ironed marginal revenue.
pub fn optimal_rank_based(env: &PositionWeights, p: &MultiUnitRevenueCurve) -> Result<PositionWeights> {
    check_n(env.n(), p.n())?;
    let hull = concave_hull(p);
    let mut v = env.as_slice().to_vec();
    for &(a, b) in &hull.intervals {
        iron_in_place(&mut v, a + 1, b);
    }
    for (vk, m) in v.iter_mut().zip(hull.marginal()) {
        if m < RESERVE_TOL {
            *vk = 0.0;
        }
    }
    PositionWeights::new(v)
}

/// Optimal weights subject to the strict-monotonicity floor
/// `w[k] - w[k+1] >= epsw[k] - epsw[k+1]`.
///
/// With `y = env - epsw`, the marginals `d_k = yhat[k] - yhat[k+1]` of the
/// remaining weights solve the linear program
/// `max sum_k d_k P_k` s.t. `sum_j d_j min(j, k) <= Y_k` for all `k`, `d >= 0`,
/// i.e. the best monotone `yhat` whose cumulative weights stay below those of
/// `y`. The result is `yhat + epsw`. Optimal `d` vanishes strictly inside the
/// hull's ironed intervals, so the floor is met with equality there.
pub fn optimal_strict(
    env: &PositionWeights,
    epsw: &PositionWeights,
    p: &MultiUnitRevenueCurve,
) -> Result<PositionWeights> {
    check_n(env.n(), p.n())?;
    check_n(env.n(), epsw.n())?;
    if !epsw.is_feasible_for(env)? {
        return Err(Error::Infeasible("strictness weights are not feasible for the environment".into()));
    }
    let n = env.n();
    let cap: Vec<f64> = env
        .cumulative()
        .as_slice()
        .iter()
        .zip(epsw.cumulative().as_slice())
        .skip(1)
        .map(|(w, e)| (w - e).max(0.0))
        .collect();
    let a: Vec<Vec<f64>> = (1..=n).map(|k| (1..=n).map(|j| j.min(k) as f64).collect()).collect();
    let d = simplex_max(&p.p[1..], &a, &cap)?;
    let mut v = vec![0.0; n];
    let mut acc = 0.0;
    for k in (1..=n).rev() {
        acc += d[k - 1];
        v[k - 1] = acc + epsw.get(k);
    }
    PositionWeights::new(v)
}

/// Dense simplex for `max c.x` s.t. `A x <= b`, `x >= 0` with `b >= 0`, using
/// Bland's rule so degenerate pivots cannot cycle.
fn simplex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    const EPS: f64 = 1e-12;
    let (m, nv) = (a.len(), c.len());
    let width = nv + m + 1;
    let mut t: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(r, (row, &rhs))| {
            let mut line = vec![0.0; width];
            line[..nv].copy_from_slice(row);
            line[nv + r] = 1.0;
            line[width - 1] = rhs;
            line
        })
        .collect();
    let mut obj: Vec<f64> = c.iter().map(|x| -x).chain(std::iter::repeat_n(0.0, m + 1)).collect();
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    for _ in 0..10_000 {
        let Some(col) = (0..width - 1).find(|&j| obj[j] < -EPS) else {
            let mut x = vec![0.0; nv];
            for (r, &bv) in basis.iter().enumerate() {
                if bv < nv {
                    x[bv] = t[r][width - 1].max(0.0);
                }
            }
            return Ok(x);
        };
        let mut pivot: Option<(usize, f64)> = None;
        for (r, row) in t.iter().enumerate() {
            if row[col] > EPS {
                let ratio = row[width - 1] / row[col];
                let better = match pivot {
                    None => true,
                    Some((pr, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[r] < basis[pr]),
                };
                if better {
                    pivot = Some((r, ratio));
                }
            }
        }
        let (pr, _) = pivot.ok_or_else(|| Error::Unsupported("linear program is unbounded".into()))?;
        let pv = t[pr][col];
        t[pr].iter_mut().for_each(|x| *x /= pv);
        let prow = t[pr].clone();
        for (r, row) in t.iter_mut().enumerate() {
            if r != pr && row[col] != 0.0 {
                let f = row[col];
                row.iter_mut().zip(&prow).for_each(|(x, p)| *x -= f * p);
            }
        }
        let f = obj[col];
        obj.iter_mut().zip(&prow).for_each(|(x, p)| *x -= f * p);
        basis[pr] = col;
    }
    Err(Error::Unsupported("simplex iteration limit reached".into()))
}

/// A rank-based transformation of position weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RankOperation {
    /// Assign ranks `lo..=hi` to positions `lo..=hi` uniformly at random.
    Iron { lo: usize, hi: usize, prob: f64 },
    /// Reject every agent ranked below `k`.
    Reserve { k: usize, prob: f64 },
}

impl RankOperation {
    pub fn prob(&self) -> f64 {
        match self {
            RankOperation::Iron { prob, .. } | RankOperation::Reserve { prob, .. } => *prob,
        }
    }

    fn apply(&self, v: &mut [f64]) {
        match *self {
            RankOperation::Iron { lo, hi, .. } => iron_in_place(v, lo, hi),
            RankOperation::Reserve { k, .. } => v[k..].fill(0.0),
        }
    }
}

/// One randomized step: pick `first` with its probability, otherwise `second`.
/// `None` stands for leaving the weights unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionStep {
    pub first: Option<RankOperation>,
    pub second: Option<RankOperation>,
    /// Probability of `first`.
    pub alpha: f64,
}

fn matched_prefix(v: &[f64], target: &[f64]) -> usize {
    let mut acc = 0.0;
    let mut i = 0;
    for (k, (a, b)) in v.iter().zip(target).enumerate() {
        acc += a - b;
        if acc.abs() > 1e-10 {
            break;
        }
        i = k + 1;
    }
    i
}

/// The randomized steps that turn `env` into `target` in expectation.
///
/// Each step fixes the first unmatched position `i + 1`: it finds the
/// largest `i'` whose average `A = (Y_{i'} - Y_i) / (i' - i)` still reaches
/// `target[i+1]` and mixes ironing `i+1..=i'` with ironing `i+1..=i'+1`, or
/// when `i' = n` mixes ironing `i+1..=n` with a reserve at `i`.
pub fn decomposition_plan(env: &PositionWeights, target: &PositionWeights) -> Result<Vec<DecompositionStep>> {
    check_n(env.n(), target.n())?;
    if !target.is_feasible_for(env)? {
        return Err(Error::Infeasible("target weights are not feasible for the environment".into()));
    }
    let n = env.n();
    let goal = target.as_slice();
    let mut y = env.as_slice().to_vec();
    let mut steps = Vec::new();
    let mut i = matched_prefix(&y, goal);
    while i < n {
        let want = goal[i];
        let mut cum = vec![0.0; n + 1];
        for k in 0..n {
            cum[k + 1] = cum[k] + y[k];
        }
        let avg = |ip: usize| (cum[ip] - cum[i]) / (ip - i) as f64;
        let ip = (i + 1..=n).rev().find(|&ip| avg(ip) >= want - 1e-12).unwrap_or(i + 1);
        let iron = |hi: usize, prob: f64| (hi > i + 1).then_some(RankOperation::Iron { lo: i + 1, hi, prob });
        let step = if ip < n {
            let (a, b) = (avg(ip), avg(ip + 1));
            let alpha = if a - b > 0.0 { ((want - b) / (a - b)).clamp(0.0, 1.0) } else { 1.0 };
            DecompositionStep { first: iron(ip, alpha), second: iron(ip + 1, 1.0 - alpha), alpha }
        } else {
            let a = avg(n);
            let alpha = if a > 0.0 { (want / a).clamp(0.0, 1.0) } else { 0.0 };
            DecompositionStep {
                first: iron(n, alpha),
                second: Some(RankOperation::Reserve { k: i, prob: 1.0 - alpha }),
                alpha,
            }
        };
        let mut with_first = y.clone();
        let mut with_second = y.clone();
        if let Some(op) = &step.first {
            op.apply(&mut with_first);
        }
        if let Some(op) = &step.second {
            op.apply(&mut with_second);
        }
        for (k, v) in y.iter_mut().enumerate() {
            *v = step.alpha * with_first[k] + (1.0 - step.alpha) * with_second[k];
        }
        let next = matched_prefix(&y, goal);
        assert!(next > i, "decomposition failed to advance past position {i}");
        i = next;
        steps.push(step);
    }
    Ok(steps)
}

/// One random realization of the decomposition: the realized weights and
/// the operations applied, in order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub weights: PositionWeights,
    pub operations: Vec<RankOperation>,
}

/// Samples one run of the decomposition. Over the randomness of `rng` the
/// realized weights average to `target`, and every realization is feasible for `env`.
pub fn decompose_to_weights_sampler<R: Rng + ?Sized>(
    env: &PositionWeights,
    target: &PositionWeights,
    rng: &mut R,
) -> Result<Decomposition> {
    let plan = decomposition_plan(env, target)?;
    Ok(sample_plan(env, &plan, rng))
}

/// Realizes a precomputed plan; steps are drawn independently.
pub fn sample_plan<R: Rng + ?Sized>(env: &PositionWeights, plan: &[DecompositionStep], rng: &mut R) -> Decomposition {
    let mut v = env.as_slice().to_vec();
    let mut operations = Vec::new();
    for step in plan {
        let chosen = if rng.random::<f64>() < step.alpha { &step.first } else { &step.second };
        if let Some(op) = chosen {
            op.apply(&mut v);
            operations.push(op.clone());
        }
    }
    let weights = PositionWeights::new(v).expect("rank operations preserve valid weights");
    Decomposition { weights, operations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{is_feasible, uniform_stair};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn curve(p: &[f64]) -> MultiUnitRevenueCurve {
        MultiUnitRevenueCurve::new(p.to_vec()).unwrap()
    }

    fn weights(w: &[f64]) -> PositionWeights {
        PositionWeights::new(w.to_vec()).unwrap()
    }

    fn close_vec(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    /// Upper envelope as the max over every chord through two points.
    fn brute_envelope(p: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|k| {
                let mut best = p[k];
                for a in 0..=k {
                    for b in k..p.len() {
                        if a < b {
                            best = best.max(p[a] + (p[b] - p[a]) * (k - a) as f64 / (b - a) as f64);
                        }
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn hull_examples() {
        let h = concave_hull(&curve(&[0.0, 0.3, 0.4, 0.3, 0.0]));
        close_vec(&h.pbar, &[0.0, 0.3, 0.4, 0.3, 0.0], 0.0);
        assert!(h.intervals.is_empty());
        let h = concave_hull(&curve(&[0.0, 0.1, 0.4, 0.0]));
        close_vec(&h.pbar, &[0.0, 0.2, 0.4, 0.0], 1e-15);
        assert_eq!(h.intervals, vec![(0, 2)]);
        let h = concave_hull(&curve(&[0.0; 5]));
        close_vec(&h.pbar, &[0.0; 5], 0.0);
        assert!(h.intervals.is_empty());
    }

    #[test]
    fn collinear_points_are_not_ironed() {
        let h = concave_hull(&curve(&[0.0, 0.1, 0.2, 0.0]));
        assert!(h.intervals.is_empty());
        assert_eq!(h.vertices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn optimal_examples() {
        let env = weights(&[1.0, 0.5, 0.0]);
        let p = curve(&[0.0, 0.1, 0.4, 0.0]);
        close_vec(optimal_rank_based(&env, &p).unwrap().as_slice(), &[0.75, 0.75, 0.0], 1e-15);
        let concave = curve(&[0.0, 0.3, 0.4, 0.4, 0.45, 0.0]);
        let env = weights(&[1.0, 0.8, 0.5, 0.5, 0.1]);
        // the last marginal is negative, so position 5 is cut
        close_vec(optimal_rank_based(&env, &concave).unwrap().as_slice(), &[1.0, 0.8, 0.5, 0.5, 0.0], 0.0);
        let nothing = curve(&[0.0, 0.0, 0.0]);
        let env = weights(&[1.0, 1.0]);
        let w = optimal_rank_based(&env, &nothing).unwrap();
        assert_eq!(revenue_of_weights(&w, &nothing).unwrap(), 0.0);
        let peaked = curve(&[0.0, 0.3, 0.1, 0.0]);
        close_vec(optimal_rank_based(&weights(&[1.0, 1.0, 1.0]), &peaked).unwrap().as_slice(), &[1.0, 0.0, 0.0], 0.0);
    }

    #[test]
    fn revenue_examples() {
        let p = curve(&[0.0, 0.1, 0.4, 0.0]);
        assert_eq!(revenue_of_weights(&weights(&[0.0; 3]), &p).unwrap(), 0.0);
        assert!((revenue_of_weights(&weights(&[1.0, 1.0, 0.0]), &p).unwrap() - 0.4).abs() < 1e-15);
        assert!((revenue_of_weights(&uniform_stair(3).unwrap(), &p).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn iron_and_reserve() {
        let w = weights(&[1.0, 0.6, 0.2, 0.1]);
        assert_eq!(apply_iron(&w, 2, 2).unwrap(), w);
        close_vec(apply_iron(&w, 1, 4).unwrap().as_slice(), &[0.475; 4], 1e-15);
        assert_eq!(apply_reserve(&w, 2).unwrap().as_slice(), &[1.0, 0.6, 0.0, 0.0]);
        assert!(apply_iron(&w, 3, 2).is_err());
        assert!(apply_reserve(&w, 5).is_err());
    }

    #[test]
    fn strict_reduces_without_floor() {
        let env = weights(&[1.0, 0.7, 0.4, 0.0]);
        let p = curve(&[0.0, 0.2, 0.3, 0.35, 0.0]);
        let zero = weights(&[0.0; 4]);
        let strict = optimal_strict(&env, &zero, &p).unwrap();
        let plain = optimal_rank_based(&env, &p).unwrap();
        close_vec(strict.as_slice(), plain.as_slice(), 1e-12);
    }

    #[test]
    fn strict_with_concave_curve_keeps_env_above_reserve() {
        let env = weights(&[1.0, 0.8, 0.3, 0.1]);
        let epsw: Vec<f64> = uniform_stair(4).unwrap().as_slice().iter().map(|x| 0.05 * x).collect();
        let p = curve(&[0.0, 0.2, 0.3, 0.35, 0.0]);
        let out = optimal_strict(&env, &weights(&epsw), &p).unwrap();
        // P_4 = 0.35 > P_n = 0 so the last marginal is negative and position 4 is cut
        close_vec(out.as_slice(), &[1.0, 0.8, 0.3, 0.0], 1e-12);
    }

    #[test]
    fn strict_matches_grid_search() {
        let env = weights(&[1.0, 1.0, 1.0, 0.0]);
        let epsw: Vec<f64> = uniform_stair(4).unwrap().as_slice().iter().map(|x| 0.1 * x).collect();
        let epsw = weights(&epsw);
        let p = curve(&[0.0, 0.05, 0.3, 0.2, 0.0]);
        let out = optimal_strict(&env, &epsw, &p).unwrap();
        assert!(is_feasible(&out, &env).unwrap());
        for k in 1..=4 {
            let floor = epsw.get(k) - epsw.get(k + 1);
            assert!(out.get(k) - out.get(k + 1) >= floor - 1e-12);
        }
        // ironed at position 2 of the hull interval [1, 3]: the floor binds
        let hull = concave_hull(&p);
        assert_eq!(hull.intervals, vec![(0, 2)]);
        assert!((out.get(1) - out.get(2) - (epsw.get(1) - epsw.get(2))).abs() < 1e-12);

        let best = revenue_of_weights(&out, &p).unwrap();
        let steps = 60;
        let mut grid_best = f64::NEG_INFINITY;
        let cum_env = env.cumulative();
        for a in 0..=steps {
            for b in 0..=a {
                for c in 0..=b {
                    for d in 0..=c {
                        let v = [a, b, c, d].map(|s| s as f64 / steps as f64);
                        let ok_floor = (0..4).all(|k| {
                            let next = if k == 3 { 0.0 } else { v[k + 1] };
                            v[k] - next >= epsw.get(k + 1) - epsw.get(k + 2) - 1e-12
                        });
                        let mut acc = 0.0;
                        let ok_cum = (0..4).all(|k| {
                            acc += v[k];
                            acc <= cum_env.as_slice()[k + 1] + 1e-12
                        });
                        if ok_floor && ok_cum {
                            let w = PositionWeights::new(v.to_vec()).unwrap();
                            grid_best = grid_best.max(revenue_of_weights(&w, &p).unwrap());
                        }
                    }
                }
            }
        }
        assert!(best >= grid_best - 1e-12, "{best} < {grid_best}");
        assert!(best - grid_best <= 0.3 / steps as f64, "{best} vs {grid_best}");
    }

    #[test]
    fn strict_rejects_infeasible_floor() {
        let env = weights(&[1.0, 0.0, 0.0]);
        let epsw = weights(&[1.0, 1.0, 0.0]);
        let p = curve(&[0.0, 0.1, 0.2, 0.0]);
        assert!(matches!(optimal_strict(&env, &epsw, &p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn decomposition_examples() {
        let env = weights(&[1.0, 0.8, 0.3]);
        assert!(decomposition_plan(&env, &env).unwrap().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let same = decompose_to_weights_sampler(&env, &env, &mut rng).unwrap();
        assert_eq!(same.weights, env);
        assert!(same.operations.is_empty());

        let env = weights(&[1.0, 1.0, 0.0]);
        let target = weights(&[1.0, 0.5, 0.5]);
        let plan = decomposition_plan(&env, &target).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].alpha, 1.0);
        assert_eq!(plan[0].first, Some(RankOperation::Iron { lo: 2, hi: 3, prob: 1.0 }));
        let d = decompose_to_weights_sampler(&env, &target, &mut rng).unwrap();
        assert_eq!(d.weights, target);
        assert_eq!(d.operations.len(), 1);

        assert!(matches!(
            decomposition_plan(&weights(&[1.0, 0.0, 0.0]), &weights(&[1.0, 1.0, 0.0])),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn operation_log_json() {
        let ops = vec![RankOperation::Iron { lo: 2, hi: 3, prob: 0.25 }, RankOperation::Reserve { k: 1, prob: 0.75 }];
        let s = serde_json::to_string(&ops).unwrap();
        assert_eq!(s, r#"[{"op":"iron","lo":2,"hi":3,"prob":0.25},{"op":"reserve","k":1,"prob":0.75}]"#);
    }

    fn random_weights(n: usize) -> impl Strategy<Value = PositionWeights> {
        proptest::collection::vec(0.0f64..=1.0, n).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            PositionWeights::new(v).unwrap()
        })
    }

    fn random_curve(n: usize) -> impl Strategy<Value = MultiUnitRevenueCurve> {
        proptest::collection::vec(0.0f64..1.0, n - 1).prop_map(move |inner| {
            let mut p = vec![0.0];
            p.extend(inner);
            p.push(0.0);
            MultiUnitRevenueCurve::new(p).unwrap()
        })
    }

    proptest! {
        #[test]
        fn hull_matches_brute_force(p in (2usize..=12).prop_flat_map(random_curve)) {
            let h = concave_hull(&p);
            let brute = brute_envelope(p.as_slice());
            for (a, b) in h.pbar.iter().zip(&brute) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for &v in &h.vertices {
                prop_assert_eq!(h.pbar[v], p.as_slice()[v]);
            }
            let m = h.marginal();
            prop_assert!(m.windows(2).all(|s| s[1] <= s[0] + 1e-12));
        }

        #[test]
        fn iron_and_reserve_stay_feasible(
            (w, lo, hi, k) in (2usize..=8).prop_flat_map(|n| (random_weights(n), 1..=n, 1..=n, 0..=n))
        ) {
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            prop_assert!(is_feasible(&apply_iron(&w, lo, hi).unwrap(), &w).unwrap());
            prop_assert!(is_feasible(&apply_reserve(&w, k).unwrap(), &w).unwrap());
        }

        #[test]
        fn optimal_is_feasible_and_reserves_only_negative(
            (env, p) in (2usize..=8).prop_flat_map(|n| (random_weights(n), random_curve(n)))
        ) {
            let w = optimal_rank_based(&env, &p).unwrap();
            prop_assert!(is_feasible(&w, &env).unwrap());
        }

        #[test]
        fn every_realization_and_prefix_is_feasible(
            (env, t, seed) in (2usize..=8).prop_flat_map(|n| (random_weights(n), random_weights(n), any::<u64>()))
        ) {
            // shrink the candidate target into the feasible set by a rank reserve and ironing
            let target = optimal_rank_based(&env, &MultiUnitRevenueCurve::new({
                let mut p = vec![0.0];
                p.extend(t.as_slice()[..t.n() - 1].iter().copied());
                p.push(0.0);
                p
            }).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = decompose_to_weights_sampler(&env, &target, &mut rng).unwrap();
            prop_assert!(is_feasible(&d.weights, &env).unwrap());
            let mut v = env.clone();
            for op in &d.operations {
                v = match *op {
                    RankOperation::Iron { lo, hi, .. } => apply_iron(&v, lo, hi).unwrap(),
                    RankOperation::Reserve { k, .. } => apply_reserve(&v, k).unwrap(),
                };
                prop_assert!(is_feasible(&v, &env).unwrap());
            }
        }
    }
}

//! Allocation rules of rank-based auctions in quantile space.
//!
//! A rank-based auction with `n` agents is described by its position weights
//! `w[1] >= ... >= w[n]`, the probability that the agent ranked `k` is served.
//! Its allocation rule `x(q)` is the mixture of the highest-`k`-bids-win rules
//! `x_k(q)` with the marginal weights `wbar[k] = w[k] - w[k+1]` as mixing
//! probabilities. All rules are independent of the value distribution.
//!
//! Binomial coefficients and powers of `q` are evaluated in log space so that
//! slopes for `n` in the hundreds neither overflow nor underflow.

use serde::{Deserialize, Serialize};

use crate::numeric::{ln_choose, ln_pow};
use crate::{Error, Result};

/// Absolute tolerance used when validating weight vectors.
pub const WEIGHT_TOL: f64 = 1e-12;

fn check_quantile(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("quantile {q} outside [0, 1]")))
    }
}

/// Position weights of a position environment or rank-based auction.
///
/// Index `k - 1` holds `w[k]`, the service probability of the agent with the
/// `k`-th highest bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositionWeights {
    w: Vec<f64>,
}

impl PositionWeights {
    /// Validates `1 >= w[1] >= ... >= w[n] >= 0` (to [`WEIGHT_TOL`]) with `n >= 2`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::InvalidWeights(format!("need at least 2 positions, got {}", w.len())));
        }
        for (k, &wk) in w.iter().enumerate() {
            if !wk.is_finite() || !(-WEIGHT_TOL..=1.0 + WEIGHT_TOL).contains(&wk) {
                return Err(Error::InvalidWeights(format!("w[{}] = {wk} outside [0, 1]", k + 1)));
            }
            if k > 0 && wk > w[k - 1] + WEIGHT_TOL {
                return Err(Error::InvalidWeights(format!(
                    "weights must be non-increasing: w[{}] = {} < w[{}] = {wk}",
                    k,
                    w[k - 1],
                    k + 1
                )));
            }
        }
        let w = w.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        Ok(Self { w })
    }

    /// Weights of the `k`-unit environment: `k` ones followed by zeros.
    pub fn multi_unit(k: usize, n: usize) -> Result<Self> {
        if k > n {
            return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
        }
        Self::new((1..=n).map(|j| if j <= k { 1.0 } else { 0.0 }).collect())
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// `w[k]` for `k` in `1..=n`; zero for `k = n + 1`.
    pub fn get(&self, k: usize) -> f64 {
        assert!(k >= 1, "positions are 1-indexed");
        self.w.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn marginal(&self) -> MarginalWeights {
        let n = self.n();
        let mut wbar = Vec::with_capacity(n + 1);
        wbar.push(1.0 - self.w[0]);
        for k in 1..=n {
            wbar.push(self.get(k) - self.get(k + 1));
        }
        MarginalWeights { wbar }
    }

    pub fn cumulative(&self) -> CumulativeWeights {
        let mut cum = Vec::with_capacity(self.n() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for &wk in &self.w {
            acc += wk;
            cum.push(acc);
        }
        CumulativeWeights { cum }
    }

    /// Whether these weights are implementable by a rank-based auction in `env`:
    /// every prefix sum is at most the corresponding prefix sum of `env`.
    pub fn is_feasible_for(&self, env: &PositionWeights) -> Result<bool> {
        if self.n() != env.n() {
            return Err(Error::Domain(format!("mismatched n: {} vs {}", self.n(), env.n())));
        }
        let a = self.cumulative();
        let b = env.cumulative();
        Ok(a.cum.iter().zip(&b.cum).all(|(x, y)| *x <= *y + WEIGHT_TOL))
    }
}

impl TryFrom<Vec<f64>> for PositionWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<PositionWeights> for Vec<f64> {
    fn from(p: PositionWeights) -> Self {
        p.w
    }
}

/// Marginal weights `wbar[0..=n]`, a probability distribution over unit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalWeights {
    wbar: Vec<f64>,
}

impl MarginalWeights {
    /// Validates non-negativity and unit total mass.
    pub fn new(wbar: Vec<f64>) -> Result<Self> {
        if wbar.len() < 3 {
            return Err(Error::InvalidWeights("marginal weights need n + 1 >= 3 entries".into()));
        }
        if let Some((k, x)) = wbar.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < -WEIGHT_TOL) {
            return Err(Error::InvalidWeights(format!("wbar[{k}] = {x} is negative")));
        }
        let total: f64 = wbar.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("marginal weights sum to {total}, expected 1")));
        }
        Ok(Self { wbar })
    }

    pub fn n(&self) -> usize {
        self.wbar.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.wbar
    }

    /// Inverse of [`PositionWeights::marginal`]: `w[k] = sum_{j >= k} wbar[j]`.
    pub fn to_weights(&self) -> Result<PositionWeights> {
        let n = self.n();
        let mut w = vec![0.0; n];
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            acc += self.wbar[k];
            w[k - 1] = acc;
        }
        PositionWeights::new(w)
    }
}

/// Cumulative position weights `W[0..=n]` with `W[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeWeights {
    cum: Vec<f64>,
}

impl CumulativeWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.cum
    }
}

/// Allocation rule of a rank-based auction, stored as marginal weights over the
/// multi-unit basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRule {
    marginal: MarginalWeights,
    pub label: String,
}

impl AllocationRule {
    pub fn new(marginal: MarginalWeights, label: impl Into<String>) -> Self {
        Self { marginal, label: label.into() }
    }

    pub fn from_weights(w: &PositionWeights, label: impl Into<String>) -> Self {
        Self::new(w.marginal(), label)
    }

    /// The highest-`k`-bids-win rule with `n` agents.
    pub fn multi_unit(k: usize, n: usize) -> Result<Self> {
        Ok(Self::from_weights(&PositionWeights::multi_unit(k, n)?, format!("{k}-unit")))
    }

    pub fn n(&self) -> usize {
        self.marginal.n()
    }

    pub fn marginal(&self) -> &MarginalWeights {
        &self.marginal
    }

    pub fn weights(&self) -> PositionWeights {
        self.marginal.to_weights().expect("marginal weights always map to valid position weights")
    }

    /// True when no interior multi-unit component is present, i.e. `x' == 0`.
    pub fn is_constant(&self) -> bool {
        let n = self.n();
        !self.marginal.wbar[1..n].iter().any(|&m| m > 0.0)
    }

    /// `x(q)` via the direct rank expansion
    /// `sum_j w[j] C(n-1, j-1) (1-q)^(j-1) q^(n-j)`.
    pub fn value(&self, q: f64) -> f64 {
        let n = self.n();
        let (lq, l1q) = (q.ln(), (1.0 - q).ln());
        let mut w = 0.0;
        let mut total = 0.0;
        for j in (1..=n).rev() {
            w += self.marginal.wbar[j];
            if w <= 0.0 {
                continue;
            }
            let ln_term = ln_choose(n - 1, j - 1) + ln_pow(l1q, j - 1) + ln_pow(lq, n - j);
            total += w * ln_term.exp();
        }
        total.clamp(0.0, 1.0)
    }

    /// `x(q)` via the basis expansion `sum_k wbar[k] x_k(q)`.
    pub fn value_basis(&self, q: f64) -> f64 {
        let n = self.n();
        self.marginal
            .wbar
            .iter()
            .enumerate()
            .filter(|(_, m)| **m != 0.0)
            .map(|(k, m)| m * multi_unit_value(k, n, q))
            .sum()
    }

    /// `ln x'(q)`, `-inf` where the slope vanishes.
    pub fn ln_deriv(&self, q: f64) -> f64 {
        let n = self.n();
        let (lq, l1q) = (q.ln(), (1.0 - q).ln());
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for k in 1..n {
            let m = self.marginal.wbar[k];
            if m <= 0.0 {
                continue;
            }
            let t = m.ln() + ln_deriv_coef(k, n) + ln_pow(lq, n - k - 1) + ln_pow(l1q, k - 1);
            if t == f64::NEG_INFINITY {
                continue;
            }
            if t > max {
                acc = acc * (max - t).exp() + 1.0;
                max = t;
            } else {
                acc += (t - max).exp();
            }
        }
        if max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            max + acc.ln()
        }
    }

    /// `x'(q)`.
    pub fn deriv(&self, q: f64) -> f64 {
        self.ln_deriv(q).exp()
    }

    /// `(1 - eps) * self + eps * other`.
    pub fn mix(&self, other: &AllocationRule, eps: f64) -> Result<AllocationRule> {
        mix(self, other, eps)
    }
}

#[inline]
fn ln_deriv_coef(k: usize, n: usize) -> f64 {
    ((n - 1) as f64).ln() + ln_choose(n - 2, k - 1)
}

fn multi_unit_value(k: usize, n: usize, q: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k >= n {
        return 1.0;
    }
    let (lq, l1q) = (q.ln(), (1.0 - q).ln());
    let term = |i: usize| (ln_choose(n - 1, i) + ln_pow(lq, n - 1 - i) + ln_pow(l1q, i)).exp();
    // At most k-1 of the other n-1 agents have higher quantiles; sum the shorter tail.
    let v = if k <= n / 2 {
        (0..k).map(term).sum::<f64>()
    } else {
        1.0 - (k..n).map(term).sum::<f64>()
    };
    v.clamp(0.0, 1.0)
}

/// `x_k(q)`, the probability that an agent at quantile `q` is among the top `k` of `n`.
pub fn multiunit_alloc(k: usize, n: usize, q: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::Domain(format!("need 0 <= k <= n with n >= 1, got k = {k}, n = {n}")));
    }
    check_quantile(q)?;
    Ok(multi_unit_value(k, n, q))
}

/// `x'_k(q) = (n-1) C(n-2, k-1) q^(n-k-1) (1-q)^(k-1)`; zero for `k = 0` and `k = n`.
pub fn multiunit_alloc_deriv(k: usize, n: usize, q: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::Domain(format!("need 0 <= k <= n with n >= 1, got k = {k}, n = {n}")));
    }
    check_quantile(q)?;
    if k == 0 || k == n {
        return Ok(0.0);
    }
    let ln = ln_deriv_coef(k, n) + ln_pow(q.ln(), n - k - 1) + ln_pow((1.0 - q).ln(), k - 1);
    Ok(ln.exp())
}

pub fn position_alloc(rule: &AllocationRule, q: f64) -> Result<f64> {
    check_quantile(q)?;
    Ok(rule.value(q))
}

pub fn position_alloc_deriv(rule: &AllocationRule, q: f64) -> Result<f64> {
    check_quantile(q)?;
    Ok(rule.deriv(q))
}

pub fn marginal_weights(w: &PositionWeights) -> MarginalWeights {
    w.marginal()
}

pub fn cumulative_weights(w: &PositionWeights) -> CumulativeWeights {
    w.cumulative()
}

pub fn is_feasible(target: &PositionWeights, env: &PositionWeights) -> Result<bool> {
    target.is_feasible_for(env)
}

/// The eps-convex combination `(1 - eps) a + eps b` of two rules.
pub fn mix(a: &AllocationRule, b: &AllocationRule, eps: f64) -> Result<AllocationRule> {
    if a.n() != b.n() {
        return Err(Error::Domain(format!("cannot mix rules with n = {} and n = {}", a.n(), b.n())));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("mixture weight {eps} outside [0, 1]")));
    }
    let wbar = a
        .marginal
        .wbar
        .iter()
        .zip(&b.marginal.wbar)
        .map(|(x, y)| (1.0 - eps) * x + eps * y)
        .collect();
    Ok(AllocationRule {
        marginal: MarginalWeights { wbar },
        label: format!("(1-{eps})*{} + {eps}*{}", a.label, b.label),
    })
}

/// Uniform-stair weights `w[k] = (n-k)/(n-1)`, whose allocation rule is `x(q) = q`.
pub fn uniform_stair(n: usize) -> Result<PositionWeights> {
    if n < 2 {
        return Err(Error::Domain(format!("uniform stair needs n >= 2, got {n}")));
    }
    PositionWeights::new((1..=n).map(|k| (n - k) as f64 / (n - 1) as f64).collect())
}

/// Universal B-test weights: `w[1] = 1`, `w[k] = 1/2` for `1 < k < n`, `w[n] = 0`.
pub fn universal_b(n: usize) -> Result<PositionWeights> {
    if n < 2 {
        return Err(Error::Domain(format!("universal B test needs n >= 2, got {n}")));
    }
    PositionWeights::new(
        (1..=n)
            .map(|k| match k {
                1 => 1.0,
                k if k == n => 0.0,
                _ => 0.5,
            })
            .collect(),
    )
}

/// Bracket on `sup_q x'_k(q)`.
///
/// The bracket is asymptotic in `min(k-1, n-k)`; for small `n` the true
/// supremum can leave it by up to about 12%. Interior `k` gets `[1/sqrt(2 pi), 1/sqrt(pi)] * (n-1)/sqrt(min(k-1, n-k))`;
/// `k = 1` and `k = n - 1` attain `n - 1` at an endpoint and `k in {0, n}` are flat.
pub fn max_slope_bound(k: usize, n: usize) -> Result<(f64, f64)> {
    if n < 2 || k > n {
        return Err(Error::Domain(format!("need n >= 2 and k <= n, got k = {k}, n = {n}")));
    }
    if k == 0 || k == n {
        return Ok((0.0, 0.0));
    }
    let top = (n - 1) as f64;
    if k == 1 || k == n - 1 {
        return Ok((top, top));
    }
    let m = ((k - 1).min(n - k) as f64).sqrt();
    let pi = std::f64::consts::PI;
    Ok((top / (2.0 * pi).sqrt() / m, top / pi.sqrt() / m))
}

//! Value distributions, equilibrium bids and exact expected revenue.
//!
//! Everything is computed on a uniform quantile grid `q_j = j / G` with the
//! composite trapezoid rule. Bids of a rank-based auction follow from the
//! allocation rule alone: the all-pay bid is `b(q) = int_0^q v(r) x'(r) dr` and
//! the first-price bid divides it by `x(q)`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::alloc::{AllocationRule, PositionWeights};
use crate::numeric::{bisect_increasing, ln_choose, ln_pow, trapezoid_unit, unit_grid};
use crate::{Error, Result};

/// Default number of quantile grid cells.
pub const DEFAULT_GRID: usize = 10_000;

/// Configuration form of a value distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistSpec {
    /// `{"beta": [a, b]}`
    Beta([f64; 2]),
    /// `{"uniform": []}`
    Uniform([f64; 0]),
    /// `{"table": "path"}`, a two-column `(quantile, value)` file.
    Table(PathBuf),
}

impl DistSpec {
    pub fn build(&self) -> Result<ValueDistribution> {
        match self {
            DistSpec::Beta([a, b]) => ValueDistribution::beta(*a, *b),
            DistSpec::Uniform(_) => Ok(ValueDistribution::uniform()),
            DistSpec::Table(path) => ValueDistribution::from_table_file(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Uniform,
    Beta22,
    Beta { a: f64, b: f64, ln_b: f64 },
    Table { q: Vec<f64>, v: Vec<f64> },
}

/// An agent value distribution on `[0, 1]`, accessed mainly through its quantile function.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution {
    kind: Kind,
    pub label: String,
}

impl ValueDistribution {
    pub fn uniform() -> Self {
        Self { kind: Kind::Uniform, label: "uniform".into() }
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("beta parameters must be positive, got ({a}, {b})")));
        }
        let kind = if a == 1.0 && b == 1.0 {
            Kind::Uniform
        } else if a == 2.0 && b == 2.0 {
            Kind::Beta22
        } else {
            Kind::Beta { a, b, ln_b: ln_beta(a, b) }
        };
        Ok(Self { kind, label: format!("beta({a},{b})") })
    }

    /// Piecewise-linear quantile function through `(q[j], v[j])`.
    ///
    /// Quantiles must run from 0 to 1 strictly increasing and values must be
    /// non-decreasing within `[0, 1]`.
    pub fn from_table(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if q.len() != v.len() || q.len() < 2 {
            return Err(Error::Parse("quantile table needs at least two (q, v) rows".into()));
        }
        if q[0] != 0.0 || q[q.len() - 1] != 1.0 {
            return Err(Error::Parse("quantile table must start at q = 0 and end at q = 1".into()));
        }
        if q.windows(2).any(|p| p[1].partial_cmp(&p[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::Parse("quantile column must be strictly increasing".into()));
        }
        if v.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::Parse("value column must be non-decreasing".into()));
        }
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Parse("values must lie in [0, 1]".into()));
        }
        Ok(Self { kind: Kind::Table { q, v }, label: "table".into() })
    }

    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let (q, v) = crate::io::parse_two_columns(&text)?;
        let mut d = Self::from_table(q, v)?;
        d.label = format!("table:{}", path.display());
        Ok(d)
    }

    /// `v(q) = F^{-1}(q)`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Uniform => q,
            Kind::Beta22 => {
                if q == 0.0 || q == 1.0 {
                    return q;
                }
                bisect_increasing(|v| v * v * (3.0 - 2.0 * v), q, 0.0, 1.0, 1e-12)
            }
            Kind::Beta { a, b, .. } => {
                if q == 0.0 || q == 1.0 {
                    return q;
                }
                bisect_increasing(|v| beta_reg(*a, *b, v), q, 0.0, 1.0, 1e-12)
            }
            Kind::Table { q: qs, v } => {
                let j = qs.partition_point(|x| *x <= q).clamp(1, qs.len() - 1);
                let t = (q - qs[j - 1]) / (qs[j] - qs[j - 1]);
                v[j - 1] + t * (v[j] - v[j - 1])
            }
        }
    }

    /// `F(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if let Kind::Table { .. } = &self.kind {
            return self.table_cdf(t);
        }
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Uniform => t,
            Kind::Beta22 => t * t * (3.0 - 2.0 * t),
            Kind::Beta { a, b, .. } => beta_reg(*a, *b, t),
            Kind::Table { .. } => unreachable!(),
        }
    }

    fn table_cdf(&self, t: f64) -> f64 {
        let Kind::Table { q, v } = &self.kind else { unreachable!() };
        // sup { q : v(q) <= t }
        let j = v.partition_point(|x| *x <= t);
        if j == 0 {
            return 0.0;
        }
        if j == v.len() {
            return 1.0;
        }
        let (v0, v1) = (v[j - 1], v[j]);
        q[j - 1] + (t - v0) / (v1 - v0) * (q[j] - q[j - 1])
    }

    /// `f(t)`; zero outside the support.
    pub fn pdf(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match &self.kind {
            Kind::Uniform => 1.0,
            Kind::Beta22 => 6.0 * t * (1.0 - t),
            Kind::Beta { a, b, ln_b } => {
                (ln_pow_f(t.ln(), a - 1.0) + ln_pow_f((1.0 - t).ln(), b - 1.0) - ln_b).exp()
            }
            Kind::Table { q, v } => {
                let j = v.partition_point(|x| *x <= t);
                if j == 0 || j == v.len() {
                    return 0.0;
                }
                (q[j] - q[j - 1]) / (v[j] - v[j - 1])
            }
        }
    }

    /// Values `v(j / g)` for `j = 0..=g`.
    pub fn quantile_grid(&self, g: usize) -> Vec<f64> {
        unit_grid(g).map(|q| self.quantile(q)).collect()
    }
}

fn ln_pow_f(ln_base: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * ln_base
    }
}

/// `R(q) = v(q) (1 - q)`.
pub fn revenue_curve(dist: &ValueDistribution, q: f64) -> f64 {
    dist.quantile(q) * (1.0 - q)
}

/// Payment format of an auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BidFormat {
    AllPay,
    FirstPrice,
}

impl std::str::FromStr for BidFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-pay" | "allpay" => Ok(BidFormat::AllPay),
            "first-price" | "firstprice" => Ok(BidFormat::FirstPrice),
            other => Err(Error::Parse(format!("unknown bid format {other:?}"))),
        }
    }
}

/// Equilibrium bids on the grid `j / G`, `j = 0..=G`.
#[derive(Debug, Clone)]
pub struct BidCurve {
    pub bids: Vec<f64>,
    pub format: BidFormat,
    pub rule: AllocationRule,
}

impl BidCurve {
    pub fn grid_size(&self) -> usize {
        self.bids.len() - 1
    }

    /// Bid at quantile `q` by linear interpolation between grid points.
    pub fn eval(&self, q: f64) -> f64 {
        let g = self.grid_size();
        let s = q.clamp(0.0, 1.0) * g as f64;
        let j = (s.floor() as usize).min(g - 1);
        let t = s - j as f64;
        self.bids[j] + t * (self.bids[j + 1] - self.bids[j])
    }

    /// Two-column `quantile,bid` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "quantile,bid")?;
        let g = self.grid_size();
        for (j, b) in self.bids.iter().enumerate() {
            writeln!(out, "{},{}", j as f64 / g as f64, b)?;
        }
        Ok(())
    }
}

fn check_grid(g: usize) -> Result<()> {
    if g < 2 {
        return Err(Error::Domain(format!("grid size must be at least 2, got {g}")));
    }
    Ok(())
}

fn check_rule(rule: &AllocationRule) -> Result<()> {
    if rule.is_constant() {
        return Err(Error::DegenerateIncumbent(format!(
            "allocation rule {:?} is constant, so bids carry no information",
            rule.label
        )));
    }
    Ok(())
}

/// All-pay bids from precomputed grid values of `v`.
///
/// `b(q) = int_0^q v dx` by the trapezoid rule in the measure `dx`: each cell
/// contributes `(x(q_j) - x(q_{j-1})) * (v(q_{j-1}) + v(q_j)) / 2`. Using exact
/// increments of `x` keeps `b / x` a weighted average of values, so the
/// first-price bids derived from it are monotone even where `x` is tiny.
pub(crate) fn allpay_bids_from_values(values: &[f64], rule: &AllocationRule) -> Vec<f64> {
    let g = values.len() - 1;
    let mut x_prev = rule.value(0.0);
    let mut bids = Vec::with_capacity(g + 1);
    bids.push(0.0);
    let mut acc = 0.0;
    for (j, (q, pair)) in unit_grid(g).skip(1).zip(values.windows(2)).enumerate() {
        let x = if j + 1 == g { rule.value(1.0) } else { rule.value(q) };
        acc += (x - x_prev).max(0.0) * 0.5 * (pair[0] + pair[1]);
        bids.push(acc);
        x_prev = x;
    }
    bids
}

/// First-price bids `b_ap / x`. Quantiles that are never served (`x <= 1e-9`)
/// get the bid at the lowest served grid quantile, which keeps the curve
/// monotone; they never win, so this only matters for plotting.
pub(crate) fn firstprice_from_allpay(allpay: &[f64], rule: &AllocationRule) -> Vec<f64> {
    let g = allpay.len() - 1;
    let x: Vec<f64> = unit_grid(g).map(|q| rule.value(q)).collect();
    let floor = x.iter().position(|xi| *xi > 1e-9).map_or(0.0, |j| allpay[j] / x[j]);
    allpay
        .iter()
        .zip(&x)
        .map(|(b, xi)| if *xi > 1e-9 { b / xi } else { floor })
        .collect()
}

/// All-pay equilibrium bids `b(q) = int_0^q v(r) x'(r) dr`.
pub fn equilibrium_bid_allpay(dist: &ValueDistribution, rule: &AllocationRule, grid_size: usize) -> Result<BidCurve> {
    check_grid(grid_size)?;
    check_rule(rule)?;
    let values = dist.quantile_grid(grid_size);
    Ok(BidCurve { bids: allpay_bids_from_values(&values, rule), format: BidFormat::AllPay, rule: rule.clone() })
}

/// First-price equilibrium bids `b_ap(q) / x(q)`.
pub fn equilibrium_bid_firstprice(
    dist: &ValueDistribution,
    rule: &AllocationRule,
    grid_size: usize,
) -> Result<BidCurve> {
    check_grid(grid_size)?;
    check_rule(rule)?;
    let values = dist.quantile_grid(grid_size);
    let ap = allpay_bids_from_values(&values, rule);
    Ok(BidCurve { bids: firstprice_from_allpay(&ap, rule), format: BidFormat::FirstPrice, rule: rule.clone() })
}

pub fn equilibrium_bids(
    dist: &ValueDistribution,
    rule: &AllocationRule,
    grid_size: usize,
    format: BidFormat,
) -> Result<BidCurve> {
    match format {
        BidFormat::AllPay => equilibrium_bid_allpay(dist, rule, grid_size),
        BidFormat::FirstPrice => equilibrium_bid_firstprice(dist, rule, grid_size),
    }
}

pub(crate) fn revenue_from_values(values: &[f64], rule: &AllocationRule) -> f64 {
    let g = values.len() - 1;
    let integrand: Vec<f64> = unit_grid(g).zip(values).map(|(q, v)| v * (1.0 - q) * rule.deriv(q)).collect();
    values[0] * rule.value(0.0) + trapezoid_unit(&integrand)
}

/// Per-agent expected revenue `R(0) x(0) + int R(q) x'(q) dq`.
pub fn expected_revenue(dist: &ValueDistribution, rule: &AllocationRule, grid_size: usize) -> Result<f64> {
    check_grid(grid_size)?;
    Ok(revenue_from_values(&dist.quantile_grid(grid_size), rule))
}

/// The same revenue integrated by parts, `-int x(q) dR(q)`, as a midpoint Stieltjes sum.
///
/// This form never differentiates `R`, which is singular at `q = 0` for Beta(2, 2).
pub fn expected_revenue_by_parts(dist: &ValueDistribution, rule: &AllocationRule, grid_size: usize) -> Result<f64> {
    check_grid(grid_size)?;
    let g = grid_size;
    let h = 1.0 / g as f64;
    let r: Vec<f64> = unit_grid(g).map(|q| revenue_curve(dist, q)).collect();
    Ok((0..g).map(|j| rule.value((j as f64 + 0.5) * h) * (r[j] - r[j + 1])).sum())
}

/// `(P_0, ..., P_n)` for the `k`-unit auctions with `n` agents.
pub fn multiunit_revenues(dist: &ValueDistribution, n: usize, grid_size: usize) -> Result<Vec<f64>> {
    check_grid(grid_size)?;
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2 agents, got {n}")));
    }
    let values = dist.quantile_grid(grid_size);
    Ok(multiunit_revenues_from_values(&values, n))
}

pub(crate) fn multiunit_revenues_from_values(values: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    for (k, pk) in p.iter_mut().enumerate().take(n).skip(1) {
        let rule = AllocationRule::multi_unit(k, n).expect("k < n");
        *pk = revenue_from_values(values, &rule);
    }
    p
}

/// `vbar = E[v(q)]`.
pub fn mean_value(dist: &ValueDistribution, grid_size: usize) -> Result<f64> {
    check_grid(grid_size)?;
    Ok(trapezoid_unit(&dist.quantile_grid(grid_size)))
}

/// `V_k`, the expected `k`-th highest of `n` values, weighting `v(q)` by the
/// Beta(n-k+1, k) density of that order statistic's quantile.
pub fn order_statistic_value(dist: &ValueDistribution, k: usize, n: usize, grid_size: usize) -> Result<f64> {
    check_grid(grid_size)?;
    if n == 0 || k == 0 || k > n {
        return Err(Error::Domain(format!("order statistic needs 1 <= k <= n, got k = {k}, n = {n}")));
    }
    Ok(order_statistic_from_values(&dist.quantile_grid(grid_size), k, n))
}

fn order_statistic_from_values(values: &[f64], k: usize, n: usize) -> f64 {
    let g = values.len() - 1;
    let ln_c = (n as f64).ln() + ln_choose(n - 1, k - 1);
    let integrand: Vec<f64> = unit_grid(g)
        .zip(values)
        .map(|(q, v)| v * (ln_c + ln_pow(q.ln(), n - k) + ln_pow((1.0 - q).ln(), k - 1)).exp())
        .collect();
    trapezoid_unit(&integrand)
}

/// Per-agent welfare `(1/n) sum_k w[k] V_k`.
pub fn expected_welfare(dist: &ValueDistribution, w: &PositionWeights, grid_size: usize) -> Result<f64> {
    check_grid(grid_size)?;
    let values = dist.quantile_grid(grid_size);
    let n = w.n();
    Ok((1..=n).map(|k| w.get(k) * order_statistic_from_values(&values, k, n)).sum::<f64>() / n as f64)
}

/// Welfare from the mean value and multi-unit revenues:
/// `w[1] vbar - sum_{k<n} (w[1] - w[k+1]) P_k / k`.
pub fn welfare_from_revenues(w: &PositionWeights, vbar: f64, p: &[f64]) -> Result<f64> {
    let n = w.n();
    if p.len() != n + 1 {
        return Err(Error::Domain(format!("expected {} multi-unit revenues, got {}", n + 1, p.len())));
    }
    let w1 = w.get(1);
    Ok(w1 * vbar - (1..n).map(|k| (w1 - w.get(k + 1)) * p[k] / k as f64).sum::<f64>())
}

/// Values recovered from a bid curve by the first-order conditions, using
/// central differences for `b'`: `v = b'/x'` for all-pay and
/// `v = b + x b'/x'` for first-price. Diagnostic only; `NaN` where `x' = 0`.
pub fn infer_values(curve: &BidCurve) -> Vec<f64> {
    let g = curve.grid_size();
    let h = 1.0 / g as f64;
    (0..=g)
        .map(|j| {
            let q = j as f64 * h;
            let (lo, hi) = (j.saturating_sub(1), (j + 1).min(g));
            let slope = (curve.bids[hi] - curve.bids[lo]) / ((hi - lo) as f64 * h);
            let xp = curve.rule.deriv(q);
            if xp <= 0.0 {
                return f64::NAN;
            }
            match curve.format {
                BidFormat::AllPay => slope / xp,
                BidFormat::FirstPrice => curve.bids[j] + curve.rule.value(q) * slope / xp,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{uniform_stair, universal_b};

    const G: usize = DEFAULT_GRID;

    fn beta22() -> ValueDistribution {
        ValueDistribution::beta(2.0, 2.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn beta22_quantile_inverts_cdf() {
        let d = beta22();
        close(d.quantile(0.5), 0.5, 1e-12);
        for t in [0.01, 0.2, 0.5, 0.77, 0.99] {
            close(d.quantile(d.cdf(t)), t, 1e-10);
        }
        let general = ValueDistribution::beta(2.0, 3.0).unwrap();
        for t in [0.1, 0.4, 0.8] {
            close(general.quantile(general.cdf(t)), t, 1e-10);
        }
        close(general.pdf(0.5), 12.0 * 0.5 * 0.25, 1e-12);
    }

    #[test]
    fn revenue_curve_examples() {
        close(revenue_curve(&ValueDistribution::uniform(), 0.5), 0.25, 0.0);
        close(revenue_curve(&beta22(), 1.0), 0.0, 0.0);
        close(revenue_curve(&beta22(), 0.5), 0.25, 1e-12);
    }

    #[test]
    fn allpay_bid_examples() {
        let rule = AllocationRule::multi_unit(1, 2).unwrap();
        let b = equilibrium_bid_allpay(&beta22(), &rule, G).unwrap();
        close(b.bids[G], 0.5, 1e-6);
        let u = equilibrium_bid_allpay(&ValueDistribution::uniform(), &rule, G).unwrap();
        close(u.eval(0.5), 0.125, 1e-10);
        assert_eq!(u.bids[0], 0.0);
    }

    #[test]
    fn constant_rule_is_degenerate() {
        let rule = AllocationRule::multi_unit(3, 3).unwrap();
        assert!(matches!(equilibrium_bid_allpay(&beta22(), &rule, G), Err(Error::DegenerateIncumbent(_))));
        assert!(matches!(equilibrium_bid_firstprice(&beta22(), &rule, G), Err(Error::DegenerateIncumbent(_))));
    }

    #[test]
    fn firstprice_bid_examples() {
        let rule = AllocationRule::multi_unit(1, 2).unwrap();
        let u = ValueDistribution::uniform();
        let fp = equilibrium_bid_firstprice(&u, &rule, G).unwrap();
        close(fp.eval(0.5), 0.25, 1e-10);
        close(fp.bids[G], 0.5, 1e-10);
        let ap = equilibrium_bid_allpay(&u, &rule, G).unwrap();
        for j in 0..=G {
            let x = rule.value(j as f64 / G as f64);
            if x > 1e-9 {
                close(x * fp.bids[j], ap.bids[j], 1e-12);
            }
        }
    }

    #[test]
    fn bids_monotone_and_capped() {
        let d = beta22();
        for n in [2, 3, 5, 8] {
            for k in 1..n {
                let rule = AllocationRule::multi_unit(k, n).unwrap();
                let ap = equilibrium_bid_allpay(&d, &rule, 2_000).unwrap();
                assert!(ap.bids.windows(2).all(|p| p[1] >= p[0]));
                assert!(ap.bids[2_000] <= rule.value(1.0) * d.quantile(1.0) + 1e-12);
                let fp = equilibrium_bid_firstprice(&d, &rule, 2_000).unwrap();
                if let Some(j) = (1..fp.bids.len()).find(|&j| fp.bids[j] < fp.bids[j - 1] - 1e-12) {
                    panic!("fp bids not monotone n={n} k={k} at {j}: {} > {}", fp.bids[j - 1], fp.bids[j]);
                }
            }
        }
    }

    #[test]
    fn allpay_bids_respect_endpoint_slope_bounds() {
        let d = beta22();
        let g = 10_000;
        let delta = 0.05;
        let jd = (delta * g as f64) as usize;
        for n in [3, 5, 8] {
            for k in 1..n {
                let rule = AllocationRule::multi_unit(k, n).unwrap();
                let b = equilibrium_bid_allpay(&d, &rule, g).unwrap();
                let sup_lo = (0..=jd).map(|j| rule.deriv(j as f64 / g as f64)).fold(0.0, f64::max);
                let sup_hi = (g - jd..=g).map(|j| rule.deriv(j as f64 / g as f64)).fold(0.0, f64::max);
                assert!(b.bids[jd] <= delta * sup_lo + 1e-12);
                assert!(b.bids[g] - b.bids[g - jd] <= delta * sup_hi + 1e-12);
            }
        }
    }

    #[test]
    fn two_agent_revenue_matches_oracle() {
        let p = multiunit_revenues(&beta22(), 2, G).unwrap();
        assert_eq!(p[0], 0.0);
        assert_eq!(p[2], 0.0);
        close(p[1], 13.0 / 70.0, 1e-6);
    }

    #[test]
    fn multiunit_revenue_oracles() {
        let p = multiunit_revenues(&beta22(), 3, G).unwrap();
        close(p[1], 1.0 / 6.0, 1e-6);
        close(p[2], 0.2047619047619048, 1e-6);
        let p = multiunit_revenues(&beta22(), 4, G).unwrap();
        for (got, want) in p.iter().zip([0.0, 0.14320679320679322, 0.2135864135864136, 0.20034965034965035, 0.0]) {
            close(*got, want, 1e-6);
        }
        // uniform, n = 3: second-highest of three uniforms is 1/2, so P_1 = 1/6
        let u = multiunit_revenues(&ValueDistribution::uniform(), 3, G).unwrap();
        close(u[1], 1.0 / 6.0, 1e-7);
    }

    #[test]
    fn trivial_rules_raise_nothing() {
        for k in [0, 4] {
            let rule = AllocationRule::multi_unit(k, 4).unwrap();
            assert_eq!(expected_revenue(&beta22(), &rule, G).unwrap(), 0.0);
        }
    }

    #[test]
    fn mixture_revenue_is_linear() {
        let d = beta22();
        let w = universal_b(5).unwrap();
        let rule = AllocationRule::from_weights(&w, "b");
        let p = multiunit_revenues(&d, 5, G).unwrap();
        let lin: f64 = rule.marginal().as_slice().iter().zip(&p).map(|(m, pk)| m * pk).sum();
        close(expected_revenue(&d, &rule, G).unwrap(), lin, 1e-10);
    }

    #[test]
    fn revenue_forms_agree() {
        let d = beta22();
        for n in [2, 4, 8] {
            for k in 1..n {
                let rule = AllocationRule::multi_unit(k, n).unwrap();
                let a = expected_revenue(&d, &rule, G).unwrap();
                let b = expected_revenue_by_parts(&d, &rule, G).unwrap();
                close(a, b, 1e-6);
            }
        }
    }

    #[test]
    fn order_statistics_and_mean() {
        let d = beta22();
        close(mean_value(&d, G).unwrap(), 0.5, 1e-7);
        close(order_statistic_value(&d, 1, 1, G).unwrap(), mean_value(&d, G).unwrap(), 1e-15);
        close(order_statistic_value(&d, 2, 2, G).unwrap(), 13.0 / 35.0, 1e-6);
        let v: Vec<f64> = (1..=4).map(|k| order_statistic_value(&d, k, 4, G).unwrap()).collect();
        for (got, want) in v.iter().zip([524.0 / 715.0, 2867.0 / 5005.0, 2138.0 / 5005.0, 191.0 / 715.0]) {
            close(*got, want, 1e-6);
        }
        assert!(v.windows(2).all(|p| p[1] < p[0]));
        close(v.iter().sum::<f64>() / 4.0, mean_value(&d, G).unwrap(), 1e-8);
        let p = multiunit_revenues(&d, 4, G).unwrap();
        for k in 1..4 {
            close(4.0 * p[k], k as f64 * v[k], 1e-10);
        }
        assert!(matches!(order_statistic_value(&d, 0, 3, G), Err(Error::Domain(_))));
    }

    #[test]
    fn welfare_forms_agree() {
        let d = beta22();
        for n in [3, 4, 7] {
            let w = uniform_stair(n).unwrap();
            let direct = expected_welfare(&d, &w, G).unwrap();
            let p = multiunit_revenues(&d, n, G).unwrap();
            let via = welfare_from_revenues(&w, mean_value(&d, G).unwrap(), &p).unwrap();
            close(direct, via, 1e-8);
        }
        let w = uniform_stair(3).unwrap();
        close(expected_welfare(&d, &w, G).unwrap(), 0.3142857142857143, 1e-6);
        let ones = PositionWeights::new(vec![1.0; 3]).unwrap();
        close(expected_welfare(&d, &ones, G).unwrap(), 0.5, 1e-6);
        let zeros = PositionWeights::new(vec![0.0; 3]).unwrap();
        assert_eq!(expected_welfare(&d, &zeros, G).unwrap(), 0.0);
    }

    #[test]
    fn grid_doubling_is_stable() {
        let d = beta22();
        let rule = AllocationRule::multi_unit(2, 5).unwrap();
        let a = expected_revenue(&d, &rule, G).unwrap();
        let b = expected_revenue(&d, &rule, 2 * G).unwrap();
        close(a, b, 1e-6);
    }

    #[test]
    fn table_distribution() {
        let d = ValueDistribution::from_table(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 1.0]).unwrap();
        close(d.quantile(0.25), 0.125, 1e-15);
        close(d.cdf(0.625), 0.75, 1e-15);
        close(d.pdf(0.1), 2.0, 1e-15);
        assert!(ValueDistribution::from_table(vec![0.0, 1.0], vec![0.5, 0.2]).is_err());
        assert!(ValueDistribution::from_table(vec![0.0, 0.7], vec![0.0, 0.2]).is_err());
        let id = ValueDistribution::from_table(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let rule = AllocationRule::multi_unit(1, 3).unwrap();
        close(
            expected_revenue(&id, &rule, G).unwrap(),
            expected_revenue(&ValueDistribution::uniform(), &rule, G).unwrap(),
            1e-15,
        );
    }

    #[test]
    fn dist_spec_json() {
        let s: DistSpec = serde_json::from_str(r#"{"beta":[2,2]}"#).unwrap();
        assert_eq!(s, DistSpec::Beta([2.0, 2.0]));
        let s: DistSpec = serde_json::from_str(r#"{"uniform":[]}"#).unwrap();
        assert_eq!(s.build().unwrap(), ValueDistribution::uniform());
        assert_eq!(serde_json::to_string(&DistSpec::Uniform([])).unwrap(), r#"{"uniform":[]}"#);
    }

    #[test]
    fn inferred_values_recover_quantile() {
        let d = beta22();
        let rule = AllocationRule::multi_unit(2, 4).unwrap();
        for format in [BidFormat::AllPay, BidFormat::FirstPrice] {
            let curve = equilibrium_bids(&d, &rule, G, format).unwrap();
            let v = infer_values(&curve);
            for j in [2_000, 5_000, 8_000] {
                close(v[j], d.quantile(j as f64 / G as f64), 1e-4);
            }
        }
    }
}

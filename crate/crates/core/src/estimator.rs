//! Counterfactual revenue estimators built from equilibrium bids.
//!
//! Given `N` sorted bids `b_1 <= ... <= b_N` from an incumbent rank-based
//! auction with allocation rule `x`, the revenue of another rank-based auction
//! `y` is estimated by the weighted order statistic
//!
//! ```text
//! P_y = sum_{i=l}^{N-l} [Z((i-1)/N) - Z(i/N)] b_i + Z(1 - l/N) b_N,
//! Z(q) = (1 - q) y'(q) / x'(q),
//! ```
//!
//! where `l / N` is the truncation that discards extreme quantiles. The
//! coefficients depend only on `(x, y, N, config)`, so they are computed once
//! in [`EstimatorWeights`] and applied to any number of samples.

use serde::{Deserialize, Serialize};

use crate::alloc::{AllocationRule, PositionWeights};
use crate::equilibrium::BidFormat;
use crate::numeric::simpson;
use crate::{Error, Result};

/// Default grid resolution for the suprema in [`rxy`] and the bound calculators.
pub const BOUND_GRID: usize = 10_000;

/// A sorted sample of equilibrium bids.
#[derive(Debug, Clone, PartialEq)]
pub struct BidSample {
    bids: Vec<f64>,
    pub format: BidFormat,
}

impl BidSample {
    /// Sorts `bids` (stable for ties) and checks `N >= 2` and non-negativity.
    pub fn new(mut bids: Vec<f64>, format: BidFormat) -> Result<Self> {
        if bids.len() < 2 {
            return Err(Error::SampleTooSmall { samples: bids.len(), l: 0 });
        }
        if let Some(b) = bids.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::Domain(format!("bids must be finite and non-negative, got {b}")));
        }
        bids.sort_by(f64::total_cmp);
        Ok(Self { bids, format })
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }
}

/// Estimator options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Discard extreme quantiles. When false the sum runs over all samples.
    pub truncate: bool,
    /// Fixed truncation fraction in `[0, 1/2]` instead of the default rule.
    pub delta_override: Option<f64>,
    /// Simpson panels per sample cell for the first-price coefficients.
    pub cells_per_sample: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { truncate: true, delta_override: None, cells_per_sample: 2 }
    }
}

impl EstimatorConfig {
    pub fn untruncated() -> Self {
        Self { truncate: false, ..Self::default() }
    }
}

/// Truncation fraction and its realization as a sample index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// `max(25 ln ln N, n) / N`, clamped to `[n/N, 1/2]`.
    pub delta: f64,
    /// `ceil(delta * N)`; the estimator sums over `l..=N-l`.
    pub l: usize,
}

/// `delta_N = max(25 ln ln N, n) / N` and `l = ceil(delta_N N)`.
///
/// `ln ln N` is floored at zero for `N < e`. Fails when `2 l >= N`.
pub fn truncation_param(big_n: usize, n: usize) -> Result<Truncation> {
    if big_n < 2 || n < 2 {
        return Err(Error::Domain(format!("need N >= 2 and n >= 2, got N = {big_n}, n = {n}")));
    }
    let nf = big_n as f64;
    let m = (25.0 * nf.ln().ln().max(0.0)).max(n as f64);
    if 2 * n >= big_n {
        return Err(Error::SampleTooSmall { samples: big_n, l: n });
    }
    let delta = (m / nf).clamp(n as f64 / nf, 0.5);
    let l = ceil_index(delta, big_n);
    if 2 * l >= big_n {
        return Err(Error::SampleTooSmall { samples: big_n, l });
    }
    Ok(Truncation { delta, l })
}

/// `ceil(delta * N)` without spurious round-up from representation error.
fn ceil_index(delta: f64, big_n: usize) -> usize {
    let s = delta * big_n as f64;
    if (s - s.round()).abs() < 1e-9 {
        s.round() as usize
    } else {
        s.ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kernel {
    Revenue(AllocationRule),
    MeanValue,
}

/// The weight kernel `Z(q) = (1 - q) y'(q) / x'(q)`, or `1 / x'(q)` for the mean value.
#[derive(Debug, Clone, PartialEq)]
pub struct ZFunction {
    incumbent: AllocationRule,
    kernel: Kernel,
}

impl ZFunction {
    /// Kernel for the revenue of `counterfactual` from bids in `incumbent`.
    pub fn revenue(incumbent: &AllocationRule, counterfactual: &AllocationRule) -> Result<Self> {
        if incumbent.n() != counterfactual.n() {
            return Err(Error::Domain(format!(
                "incumbent has n = {} but counterfactual has n = {}",
                incumbent.n(),
                counterfactual.n()
            )));
        }
        check_incumbent(incumbent)?;
        Ok(Self { incumbent: incumbent.clone(), kernel: Kernel::Revenue(counterfactual.clone()) })
    }

    /// Kernel `1 / x'(q)` for the mean value.
    pub fn mean_value(incumbent: &AllocationRule) -> Result<Self> {
        check_incumbent(incumbent)?;
        Ok(Self { incumbent: incumbent.clone(), kernel: Kernel::MeanValue })
    }

    pub fn incumbent(&self) -> &AllocationRule {
        &self.incumbent
    }

    pub fn counterfactual(&self) -> Option<&AllocationRule> {
        match &self.kernel {
            Kernel::Revenue(y) => Some(y),
            Kernel::MeanValue => None,
        }
    }

    pub fn n(&self) -> usize {
        self.incumbent.n()
    }

    /// `Z(q)`, or `None` where `x'(q) = 0`.
    fn try_value(&self, q: f64) -> Option<f64> {
        let lx = self.incumbent.ln_deriv(q);
        if lx == f64::NEG_INFINITY {
            return None;
        }
        let ln_num = match &self.kernel {
            Kernel::Revenue(y) => (1.0 - q).ln() + y.ln_deriv(q),
            Kernel::MeanValue => 0.0,
        };
        Some((ln_num - lx).exp())
    }

    /// `Z(q)`; errors where the incumbent's slope vanishes.
    pub fn value(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("quantile {q} outside [0, 1]")));
        }
        self.try_value(q).ok_or(Error::Singular { q })
    }

    /// `Z(q) x'(q)`: `(1 - q) y'(q)`, or `1` for the mean value.
    fn z_times_slope(&self, q: f64) -> f64 {
        match &self.kernel {
            Kernel::Revenue(y) => (1.0 - q) * y.deriv(q),
            Kernel::MeanValue => 1.0,
        }
    }
}

fn check_incumbent(x: &AllocationRule) -> Result<()> {
    if x.is_constant() {
        return Err(Error::DegenerateIncumbent(format!("incumbent {:?} has a constant allocation rule", x.label)));
    }
    Ok(())
}

/// `Z(q) = (1 - q) y'(q) / x'(q)`.
pub fn z_value(zf: &ZFunction, q: f64) -> Result<f64> {
    zf.value(q)
}

/// Precomputed estimator coefficients for a fixed kernel, sample size and configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorWeights {
    coef: Vec<f64>,
    delta_used: f64,
    l: usize,
    format: BidFormat,
}

impl EstimatorWeights {
    pub fn new(zf: &ZFunction, big_n: usize, format: BidFormat, cfg: &EstimatorConfig) -> Result<Self> {
        let (delta_used, l) = resolve_truncation(big_n, zf.n(), cfg)?;
        let nf = big_n as f64;
        let shift = 0.5 / nf;
        // Z at j / N for j = l-1 ..= N-l. Only the untruncated sum touches the
        // endpoint q = 0, where a vanishing x' is evaluated half a cell inside.
        let z_at = |j: usize| -> Result<f64> {
            let q = j as f64 / nf;
            match zf.try_value(q) {
                Some(z) => Ok(z),
                None if j == 0 && !cfg.truncate => zf.value(shift),
                None => Err(Error::Singular { q }),
            }
        };
        let z: Vec<f64> = (l - 1..=big_n - l).map(z_at).collect::<Result<_>>()?;
        let zj = |j: usize| z[j + 1 - l];
        let mut coef = vec![0.0; big_n];
        match format {
            BidFormat::AllPay => {
                for i in l..=big_n - l {
                    coef[i - 1] = zj(i - 1) - zj(i);
                }
                coef[big_n - 1] += zj(big_n - l);
            }
            BidFormat::FirstPrice => {
                let x = &zf.incumbent;
                let x_at = |j: usize| x.value(j as f64 / nf);
                let mut zx_prev = zj(l - 1) * x_at(l - 1);
                for i in l..=big_n - l {
                    let zx = zj(i) * x_at(i);
                    let a = (i - 1) as f64 / nf;
                    let b = i as f64 / nf;
                    let slope_term = match zf.kernel {
                        Kernel::MeanValue => b - a,
                        Kernel::Revenue(_) => simpson(|q| zf.z_times_slope(q), a, b, cfg.cells_per_sample),
                    };
                    coef[i - 1] = zx_prev - zx + slope_term;
                    zx_prev = zx;
                }
                coef[big_n - 1] += zj(big_n - l) * x.value(1.0);
            }
        }
        Ok(Self { coef, delta_used, l, format })
    }

    pub fn sample_size(&self) -> usize {
        self.coef.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn l_index(&self) -> usize {
        self.l
    }

    pub fn delta_used(&self) -> f64 {
        self.delta_used
    }

    pub fn format(&self) -> BidFormat {
        self.format
    }

    /// `sum_i coef[i] * bids[i]` over a sorted bid vector of matching length.
    pub fn apply(&self, sorted_bids: &[f64]) -> f64 {
        debug_assert_eq!(sorted_bids.len(), self.coef.len());
        self.coef.iter().zip(sorted_bids).map(|(c, b)| c * b).sum()
    }

    pub fn estimate(&self, sample: &BidSample) -> Result<f64> {
        if sample.len() != self.coef.len() {
            return Err(Error::Domain(format!(
                "weights built for N = {} applied to {} bids",
                self.coef.len(),
                sample.len()
            )));
        }
        if sample.format != self.format {
            return Err(Error::Domain(format!("weights built for {:?} bids, got {:?}", self.format, sample.format)));
        }
        Ok(self.apply(&sample.bids))
    }

    /// Linear combination `sum_j c_j * weights_j` of weights sharing `N`, `l` and format.
    pub fn combine(terms: &[(f64, &EstimatorWeights)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| Error::Domain("empty combination".into()))?;
        let mut coef = vec![0.0; first.coef.len()];
        for (c, w) in terms {
            if w.coef.len() != coef.len() || w.l != first.l || w.format != first.format {
                return Err(Error::Domain("combined estimator weights must share N, l and format".into()));
            }
            for (acc, wi) in coef.iter_mut().zip(&w.coef) {
                *acc += c * wi;
            }
        }
        Ok(Self { coef, delta_used: first.delta_used, l: first.l, format: first.format })
    }
}

fn resolve_truncation(big_n: usize, n: usize, cfg: &EstimatorConfig) -> Result<(f64, usize)> {
    if big_n < 2 {
        return Err(Error::SampleTooSmall { samples: big_n, l: 0 });
    }
    if !cfg.truncate {
        return Ok((0.0, 1));
    }
    let l = match cfg.delta_override {
        Some(d) => {
            if !(0.0..=0.5).contains(&d) {
                return Err(Error::Domain(format!("delta override {d} outside [0, 1/2]")));
            }
            ceil_index(d, big_n).max(1)
        }
        None => truncation_param(big_n, n)?.l,
    };
    if 2 * l >= big_n {
        return Err(Error::SampleTooSmall { samples: big_n, l });
    }
    Ok((l as f64 / big_n as f64, l))
}

/// Theoretical error bounds reported next to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub simple: f64,
    pub general: f64,
    pub rank: Option<f64>,
}

/// An estimate with its truncation and error-bound diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    /// Realized truncation `l / N`, or 0 for the untruncated estimator.
    pub delta: f64,
    pub l_index: usize,
    /// Last index of the moderate range, `N - l`.
    #[serde(skip)]
    pub upper_index: usize,
    pub bounds: Bounds,
}

/// `16 n^2 ln N / sqrt(N)`.
pub fn error_bound_simple(n: usize, big_n: usize) -> f64 {
    let nf = big_n as f64;
    16.0 * (n * n) as f64 * nf.ln() / nf.sqrt()
}

/// `28 n^2 ln N / sqrt(N)`.
pub fn error_bound_fp(n: usize, big_n: usize) -> f64 {
    let nf = big_n as f64;
    28.0 * (n * n) as f64 * nf.ln() / nf.sqrt()
}

fn moderate_grid(delta: f64, grid: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = (delta, 1.0 - delta);
    (0..=grid).map(move |j| lo + (hi - lo) * j as f64 / grid as f64)
}

/// `R_xy = sup y' * max{1, ln sup_{y' >= 1} x'/y', ln sup y'/x'}` with suprema
/// over `grid + 1` points of the moderate range `[delta, 1 - delta]`.
pub fn rxy(x: &AllocationRule, y: &AllocationRule, delta: f64, grid: usize) -> f64 {
    let mut sup_y = 0.0f64;
    let mut ln_x_over_y = f64::NEG_INFINITY;
    let mut ln_y_over_x = f64::NEG_INFINITY;
    for q in moderate_grid(delta, grid) {
        let (lx, ly) = (x.ln_deriv(q), y.ln_deriv(q));
        sup_y = sup_y.max(ly.exp());
        if ly >= 0.0 {
            ln_x_over_y = ln_x_over_y.max(lx - ly);
        }
        if ly > f64::NEG_INFINITY {
            ln_y_over_x = ln_y_over_x.max(ly - lx);
        }
    }
    sup_y * 1f64.max(ln_x_over_y).max(ln_y_over_x)
}

/// `80 R_xy / sqrt(N)`.
pub fn error_bound_general(x: &AllocationRule, y: &AllocationRule, big_n: usize, delta: f64, grid: usize) -> f64 {
    80.0 * rxy(x, y, delta, grid) / (big_n as f64).sqrt()
}

/// `80 n ln(sup_q n y'/x') / sqrt(N)` over the moderate range.
pub fn error_bound_rank(x: &AllocationRule, y: &AllocationRule, big_n: usize, delta: f64, grid: usize) -> f64 {
    let n = x.n() as f64;
    let sup = moderate_grid(delta, grid)
        .map(|q| y.ln_deriv(q) - x.ln_deriv(q))
        .fold(f64::NEG_INFINITY, f64::max);
    80.0 * n * (n.ln() + sup) / (big_n as f64).sqrt()
}

/// Mean-value bounds: `8 n^2 ln N / sqrt(N)` and
/// `40 n / sqrt(N) * max{1, ln sup x', ln sup 1/x'}` over the moderate range.
fn mean_value_bounds(x: &AllocationRule, big_n: usize, delta: f64, grid: usize) -> Bounds {
    let n = x.n() as f64;
    let nf = big_n as f64;
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for q in moderate_grid(delta, grid) {
        let l = x.ln_deriv(q);
        hi = hi.max(l);
        lo = lo.min(l);
    }
    Bounds {
        simple: 8.0 * n * n * nf.ln() / nf.sqrt(),
        general: 40.0 * n / nf.sqrt() * 1f64.max(hi).max(-lo),
        rank: None,
    }
}

fn bound_delta(w: &EstimatorWeights) -> f64 {
    if w.delta_used > 0.0 {
        w.delta_used
    } else {
        w.l as f64 / w.coef.len() as f64
    }
}

fn revenue_bounds(zf: &ZFunction, w: &EstimatorWeights) -> Bounds {
    let big_n = w.coef.len();
    let x = &zf.incumbent;
    let Kernel::Revenue(y) = &zf.kernel else {
        return mean_value_bounds(x, big_n, bound_delta(w), BOUND_GRID);
    };
    let d = bound_delta(w);
    Bounds {
        simple: match w.format {
            BidFormat::AllPay => error_bound_simple(x.n(), big_n),
            BidFormat::FirstPrice => error_bound_fp(x.n(), big_n),
        },
        general: error_bound_general(x, y, big_n, d, BOUND_GRID),
        rank: Some(error_bound_rank(x, y, big_n, d, BOUND_GRID)),
    }
}

fn estimate(sample: &BidSample, zf: &ZFunction, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    let w = EstimatorWeights::new(zf, sample.len(), sample.format, cfg)?;
    Ok(EstimateResult {
        value: w.apply(&sample.bids),
        delta: w.delta_used,
        l_index: w.l,
        upper_index: sample.len() - w.l,
        bounds: revenue_bounds(zf, &w),
    })
}

fn require_format(sample: &BidSample, format: BidFormat) -> Result<()> {
    if sample.format != format {
        return Err(Error::Domain(format!("expected {format:?} bids, got {:?}", sample.format)));
    }
    Ok(())
}

/// Revenue of `zf`'s counterfactual from all-pay bids.
pub fn estimate_revenue_allpay(sample: &BidSample, zf: &ZFunction, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    require_format(sample, BidFormat::AllPay)?;
    estimate(sample, zf, cfg)
}

/// Revenue of `zf`'s counterfactual from first-price bids.
///
/// The coefficient of `b_i` is `int -Z'(q) x(q) dq` over `[(i-1)/N, i/N]`,
/// integrated by parts as `Z(a) x(a) - Z(b) x(b) + int (1 - q) y'(q) dq`. The
/// top bid also carries `Z(1 - l/N) x(1)`.
pub fn estimate_revenue_firstprice(
    sample: &BidSample,
    zf: &ZFunction,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    require_format(sample, BidFormat::FirstPrice)?;
    estimate(sample, zf, cfg)
}

/// Revenue estimate dispatching on the sample's bid format.
pub fn estimate_revenue(sample: &BidSample, zf: &ZFunction, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    estimate(sample, zf, cfg)
}

/// Mean value `E[v]` from bids, using the kernel `1 / x'(q)`.
pub fn estimate_mean_value(
    sample: &BidSample,
    incumbent: &AllocationRule,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    estimate(sample, &ZFunction::mean_value(incumbent)?, cfg)
}

/// Per-agent welfare of `target` as
/// `w[1] vbar - sum_{k<n} (w[1] - w[k+1]) P_k / k`, each term estimated from
/// the same sample. Bounds are the matching combination of the per-term bounds.
pub fn estimate_welfare(
    sample: &BidSample,
    incumbent: &AllocationRule,
    target: &PositionWeights,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    let n = incumbent.n();
    if target.n() != n {
        return Err(Error::Domain(format!("target has n = {} but incumbent has n = {n}", target.n())));
    }
    let big_n = sample.len();
    let w1 = target.get(1);
    let mean_zf = ZFunction::mean_value(incumbent)?;
    let mean_w = EstimatorWeights::new(&mean_zf, big_n, sample.format, cfg)?;
    let mean_b = revenue_bounds(&mean_zf, &mean_w);
    let mut parts = vec![(w1, mean_w.clone())];
    let mut bounds = Bounds { simple: w1 * mean_b.simple, general: w1 * mean_b.general, rank: None };
    let mut rank = w1 * mean_b.general;
    for k in 1..n {
        let c = (w1 - target.get(k + 1)) / k as f64;
        if c == 0.0 {
            continue;
        }
        let zf = ZFunction::revenue(incumbent, &AllocationRule::multi_unit(k, n)?)?;
        let w = EstimatorWeights::new(&zf, big_n, sample.format, cfg)?;
        let b = revenue_bounds(&zf, &w);
        bounds.simple += c.abs() * b.simple;
        bounds.general += c.abs() * b.general;
        rank += c.abs() * b.rank.unwrap_or(b.general);
        parts.push((-c, w));
    }
    bounds.rank = Some(rank);
    let refs: Vec<(f64, &EstimatorWeights)> = parts.iter().map(|(c, w)| (*c, w)).collect();
    let combined = EstimatorWeights::combine(&refs)?;
    Ok(EstimateResult {
        value: combined.estimate(sample)?,
        delta: combined.delta_used,
        l_index: combined.l,
        upper_index: big_n - combined.l,
        bounds,
    })
}

/// Classifier `1{P_{y1} > alpha P_{y2}}`; an exact tie returns false.
pub fn compare_revenues(
    sample: &BidSample,
    incumbent: &AllocationRule,
    y1: &AllocationRule,
    y2: &AllocationRule,
    alpha: f64,
    cfg: &EstimatorConfig,
) -> Result<bool> {
    let big_n = sample.len();
    let w1 = EstimatorWeights::new(&ZFunction::revenue(incumbent, y1)?, big_n, sample.format, cfg)?;
    let w2 = EstimatorWeights::new(&ZFunction::revenue(incumbent, y2)?, big_n, sample.format, cfg)?;
    Ok(w1.estimate(sample)? > alpha * w2.estimate(sample)?)
}

//! Monte Carlo harness: sample equilibrium bids of an incumbent auction,
//! estimate a counterfactual revenue, and aggregate the error over replications.
//!
//! Replication `r` draws from `ChaCha8Rng` seeded with the design seed on
//! stream `r`, so results are bit-identical for any number of worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{uniform_stair, universal_b, AllocationRule, PositionWeights};
use crate::equilibrium::{
    equilibrium_bids, expected_revenue, BidCurve, BidFormat, DistSpec, ValueDistribution, DEFAULT_GRID,
};
use crate::estimator::{error_bound_simple, BidSample, EstimatorConfig, EstimatorWeights, ZFunction};
use crate::{Error, Result};

/// An auction named independently of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuctionSpec {
    /// The `k`-unit auction.
    Units(usize),
    /// The `(n - j)`-unit auction.
    UnitsFromTop(usize),
    UniformStair,
    UniversalB,
    /// Explicit position weights; their length must equal `n`.
    Weights(Vec<f64>),
}

impl AuctionSpec {
    pub fn weights(&self, n: usize) -> Result<PositionWeights> {
        match self {
            AuctionSpec::Units(k) => PositionWeights::multi_unit(*k, n),
            AuctionSpec::UnitsFromTop(j) => {
                if *j > n {
                    return Err(Error::Domain(format!("cannot take {j} units from the top of n = {n}")));
                }
                PositionWeights::multi_unit(n - j, n)
            }
            AuctionSpec::UniformStair => uniform_stair(n),
            AuctionSpec::UniversalB => universal_b(n),
            AuctionSpec::Weights(w) => {
                if w.len() != n {
                    return Err(Error::Domain(format!("{} weights given for n = {n}", w.len())));
                }
                PositionWeights::new(w.clone())
            }
        }
    }

    pub fn rule(&self, n: usize) -> Result<AllocationRule> {
        Ok(AllocationRule::from_weights(&self.weights(n)?, self.label()))
    }

    pub fn label(&self) -> String {
        match self {
            AuctionSpec::Units(k) => format!("{k}-unit"),
            AuctionSpec::UnitsFromTop(j) => format!("(n-{j})-unit"),
            AuctionSpec::UniformStair => "uniform-stair".into(),
            AuctionSpec::UniversalB => "universal-b".into(),
            AuctionSpec::Weights(_) => "weights".into(),
        }
    }
}

/// Aggregate reported by a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Mean of `|Phat - P|`.
    Mad,
    /// Median of `|Phat - P|`.
    MedianAd,
    /// Median of `|Phat - P| / P`.
    RelativeMedianAd,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Mad => "mad",
            Metric::MedianAd => "median-ad",
            Metric::RelativeMedianAd => "relative-median-ad",
        })
    }
}

/// How bids are drawn from an equilibrium bid curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// With replacement from the grid bids.
    GridResample,
    /// Uniform quantiles mapped through the interpolated curve.
    Quantile,
}

fn default_replications() -> usize {
    8000
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

fn default_true() -> bool {
    true
}

fn default_format() -> BidFormat {
    BidFormat::AllPay
}

fn default_metric() -> Metric {
    Metric::Mad
}

fn default_sampling() -> Sampling {
    Sampling::GridResample
}

/// One Monte Carlo experiment: bids come from `C = (1 - eps) A + eps B`, or
/// from `A` itself when `eps` is absent, and the estimated revenue is that of `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub label: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub dist: DistSpec,
    pub auction_a: AuctionSpec,
    pub auction_b: AuctionSpec,
    #[serde(default)]
    pub eps: Option<f64>,
    /// Counterfactual auction; defaults to `auction_b`.
    #[serde(default)]
    pub target: Option<AuctionSpec>,
    #[serde(default = "default_format")]
    pub format: BidFormat,
    #[serde(default = "default_true")]
    pub truncate: bool,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
    /// Keep the per-replication estimates in the result.
    #[serde(default)]
    pub dump_estimates: bool,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.eps {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Domain(format!("eps must lie in [0, 1], got {eps}")));
            }
        }
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        if self.n < 2 || self.big_n < 2 {
            return Err(Error::Domain(format!("need n >= 2 and N >= 2, got n = {}, N = {}", self.n, self.big_n)));
        }
        Ok(())
    }

    /// Allocation rule of the auction generating the bids.
    pub fn incumbent(&self) -> Result<AllocationRule> {
        let a = self.auction_a.rule(self.n)?;
        match self.eps {
            Some(eps) => a.mix(&self.auction_b.rule(self.n)?, eps),
            None => Ok(a),
        }
    }

    pub fn counterfactual(&self) -> Result<AllocationRule> {
        self.target.as_ref().unwrap_or(&self.auction_b).rule(self.n)
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        if self.truncate {
            EstimatorConfig::default()
        } else {
            EstimatorConfig::untruncated()
        }
    }

    /// The same design with another number of agents and sample size.
    pub fn with_size(mut self, n: usize, big_n: usize) -> Self {
        self.n = n;
        self.big_n = big_n;
        self
    }
}

/// Outcome of [`run_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub label: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub eps: Option<f64>,
    pub metric: Metric,
    /// Mean of the estimates.
    pub estimate_mean: f64,
    /// Counterfactual revenue by quadrature.
    pub true_value: f64,
    pub mad: f64,
    pub median_ad: f64,
    /// The requested metric.
    pub value: f64,
    /// `sqrt(N) * mad`.
    pub normalized_mad: f64,
    /// `sqrt(N) * value`.
    pub normalized: f64,
    /// `16 n^2 ln N / sqrt(N)`.
    pub bound: f64,
    /// `mad / bound`.
    pub ratio_to_bound: f64,
    pub replications: usize,
    pub seed: u64,
    /// How replication seeds derive from `seed`.
    pub rng: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<f64>>,
}

/// `N` sorted bids drawn from `curve`.
pub fn sample_bids<R: Rng + ?Sized>(curve: &BidCurve, big_n: usize, rng: &mut R, mode: Sampling) -> Result<BidSample> {
    let mut out = vec![0.0; big_n];
    draw_sorted(curve, rng, mode, &mut out);
    BidSample::new(out, curve.format)
}

fn draw_sorted<R: Rng + ?Sized>(curve: &BidCurve, rng: &mut R, mode: Sampling, out: &mut [f64]) {
    match mode {
        Sampling::GridResample => {
            let g = curve.grid_size() as u32;
            let mut idx: Vec<u32> = (0..out.len()).map(|_| rng.random_range(0..=g)).collect();
            idx.sort_unstable();
            for (o, i) in out.iter_mut().zip(idx) {
                *o = curve.bids[i as usize];
            }
        }
        Sampling::Quantile => {
            for o in out.iter_mut() {
                *o = curve.eval(rng.random::<f64>());
            }
        }
    }
    // equilibrium bids are monotone, so this only repairs rounding
    if out.windows(2).any(|w| w[1] < w[0]) {
        out.sort_by(f64::total_cmp);
    }
}

fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs every replication of `spec` and aggregates the estimation error.
pub fn run_design(spec: &DesignSpec) -> Result<SimulationResult> {
    let wrap = |e: Error| Error::Design { label: spec.label.clone(), source: Box::new(e) };
    spec.validate().map_err(wrap)?;
    run_inner(spec).map_err(wrap)
}

fn run_inner(spec: &DesignSpec) -> Result<SimulationResult> {
    let dist = spec.dist.build()?;
    let incumbent = spec.incumbent()?;
    let target = spec.counterfactual()?;
    let curve = equilibrium_bids(&dist, &incumbent, spec.grid_size, spec.format)?;
    let truth = expected_revenue(&dist, &target, spec.grid_size)?;
    let zf = ZFunction::revenue(&incumbent, &target)?;
    let weights = EstimatorWeights::new(&zf, spec.big_n, spec.format, &spec.estimator_config())?;

    let estimates: Vec<f64> = (0..spec.replications)
        .into_par_iter()
        .map_init(
            || vec![0.0; spec.big_n],
            |buf, rep| {
                let mut rng = replication_rng(spec.seed, rep);
                draw_sorted(&curve, &mut rng, spec.sampling, buf);
                weights.apply(buf)
            },
        )
        .collect();

    let reps = estimates.len() as f64;
    let mut errors: Vec<f64> = estimates.iter().map(|e| (e - truth).abs()).collect();
    let mad = errors.iter().sum::<f64>() / reps;
    let median_ad = median(&mut errors);
    let value = match spec.metric {
        Metric::Mad => mad,
        Metric::MedianAd => median_ad,
        Metric::RelativeMedianAd => median_ad / truth,
    };
    let root = (spec.big_n as f64).sqrt();
    let bound = error_bound_simple(spec.n, spec.big_n);
    Ok(SimulationResult {
        label: spec.label.clone(),
        n: spec.n,
        big_n: spec.big_n,
        eps: spec.eps,
        metric: spec.metric,
        estimate_mean: estimates.iter().sum::<f64>() / reps,
        true_value: truth,
        mad,
        median_ad,
        value,
        normalized_mad: root * mad,
        normalized: root * value,
        bound,
        ratio_to_bound: mad / bound,
        replications: spec.replications,
        seed: spec.seed,
        rng: "chacha8: seed_from_u64(seed), stream = replication index".into(),
        estimates: spec.dump_estimates.then_some(estimates),
    })
}

fn design(label: &str, a: AuctionSpec, b: AuctionSpec, eps: Option<f64>, truncate: bool) -> DesignSpec {
    DesignSpec {
        label: label.into(),
        n: 4,
        big_n: 1000,
        dist: DistSpec::Beta([2.0, 2.0]),
        auction_a: a,
        auction_b: b,
        eps,
        target: None,
        format: BidFormat::AllPay,
        truncate,
        replications: default_replications(),
        seed: 0,
        grid_size: DEFAULT_GRID,
        metric: Metric::Mad,
        sampling: Sampling::GridResample,
        dump_estimates: false,
    }
}

/// The four reference designs with Beta(2, 2) values, all-pay bids and
/// `eps = 0.001` where a mixture is used. Designs 1 to 3 use the untruncated
/// estimator; design 4 comes in both variants at `n = 5`, `N = 10^5`.
pub fn builtin_designs() -> Vec<DesignSpec> {
    let eps = Some(0.001);
    let mut d4t = design("design-4-truncated", AuctionSpec::UnitsFromTop(1), AuctionSpec::Units(1), None, true)
        .with_size(5, 100_000);
    d4t.replications = 500;
    let mut d4u = d4t.clone();
    d4u.label = "design-4-untruncated".into();
    d4u.truncate = false;
    vec![
        design("design-1", AuctionSpec::Units(1), AuctionSpec::UniformStair, eps, false),
        design("design-2", AuctionSpec::UniformStair, AuctionSpec::Units(1), eps, false),
        design("design-3", AuctionSpec::UnitsFromTop(1), AuctionSpec::Units(1), eps, false),
        d4t,
        d4u,
    ]
}

/// Looks up a built-in design by its number (`"2"`) or label (`"design-4-truncated"`).
/// `"4"` selects the truncated variant.
pub fn builtin_design(name: &str) -> Option<DesignSpec> {
    let label = match name {
        "1" | "2" | "3" => format!("design-{name}"),
        "4" => "design-4-truncated".into(),
        other => other.to_string(),
    };
    builtin_designs().into_iter().find(|d| d.label == label)
}

/// Runs `base` at each `eps`, reporting the relative median absolute error.
pub fn epsilon_sweep(base: &DesignSpec, eps_list: &[f64]) -> Result<Vec<SimulationResult>> {
    eps_list
        .iter()
        .map(|&eps| {
            let mut spec = base.clone();
            spec.eps = Some(eps);
            spec.metric = Metric::RelativeMedianAd;
            run_design(&spec)
        })
        .collect()
}

/// One CSV row of a results table.
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    design: &'a str,
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    eps: Option<f64>,
    metric: String,
    value: f64,
    normalized: f64,
    bound: f64,
    ratio: f64,
}

/// Writes results as CSV with columns `design,n,N,eps,metric,value,normalized,bound,ratio`.
pub fn write_csv<W: Write>(results: &[SimulationResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(CsvRow {
            design: &r.label,
            n: r.n,
            big_n: r.big_n,
            eps: r.eps,
            metric: r.metric.to_string(),
            value: r.value,
            normalized: r.normalized,
            bound: r.bound,
            ratio: r.ratio_to_bound,
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Monte Carlo estimate of the optimal revenue from `n` agents with at most
/// `k` units: serve the top `k` agents with positive virtual value
/// `phi(v) = v - (1 - F(v)) / f(v)` and collect the sum of their virtual values.
/// Returns the total revenue and its standard error.
pub fn myerson_optimal_revenue<R: Rng + ?Sized>(
    dist: &ValueDistribution,
    k: usize,
    n: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if k > n || n == 0 {
        return Err(Error::Domain(format!("need k <= n and n >= 1, got k = {k}, n = {n}")));
    }
    if mc_samples < 2 {
        return Err(Error::Domain("need at least two Monte Carlo samples".into()));
    }
    if k == 0 {
        return Ok((0.0, 0.0));
    }
    let mut phi = vec![0.0; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..mc_samples {
        for p in phi.iter_mut() {
            let q: f64 = rng.random();
            let v = dist.quantile(q);
            let f = dist.pdf(v);
            *p = if f > 0.0 {
                v - (1.0 - q) / f
            } else if q == 0.0 {
                f64::NEG_INFINITY
            } else {
                return Err(Error::Unsupported(format!("{}: density vanishes at v = {v}", dist.label)));
            };
        }
        phi.sort_by(|a, b| b.total_cmp(a));
        let r: f64 = phi.iter().take(k).filter(|p| **p > 0.0).sum();
        sum += r;
        sum_sq += r * r;
    }
    let m = mc_samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok((mean, (var / m).sqrt()))
}

/// A test of `P_{b1} > alpha P_{b2}` from bids in `incumbent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub dist: DistSpec,
    pub incumbent: AuctionSpec,
    pub b1: AuctionSpec,
    pub b2: AuctionSpec,
    pub alpha: f64,
    #[serde(default = "default_format")]
    pub format: BidFormat,
    #[serde(default = "default_true")]
    pub truncate: bool,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
}

/// Outcome of [`classifier_error_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResult {
    /// True gap `P_{b1} - alpha P_{b2}`.
    pub gap: f64,
    /// Whether `P_{b1} > alpha P_{b2}` holds.
    pub truth: bool,
    pub error_rate: f64,
    pub replications: usize,
}

/// Fraction of replications in which the estimated comparison disagrees
/// with the sign of the true gap. A zero gap is rejected.
pub fn classifier_error_rate(spec: &ClassifierSpec) -> Result<ClassifierResult> {
    if spec.replications == 0 {
        return Err(Error::Domain("replications must be at least 1".into()));
    }
    let dist = spec.dist.build()?;
    let x = spec.incumbent.rule(spec.n)?;
    let y1 = spec.b1.rule(spec.n)?;
    let y2 = spec.b2.rule(spec.n)?;
    let gap = expected_revenue(&dist, &y1, spec.grid_size)? - spec.alpha * expected_revenue(&dist, &y2, spec.grid_size)?;
    if gap.abs() <= 1e-12 {
        return Err(Error::Domain("the compared revenues coincide; the classifier needs a nonzero gap".into()));
    }
    let truth = gap > 0.0;
    let cfg = if spec.truncate { EstimatorConfig::default() } else { EstimatorConfig::untruncated() };
    let curve = equilibrium_bids(&dist, &x, spec.grid_size, spec.format)?;
    let w1 = EstimatorWeights::new(&ZFunction::revenue(&x, &y1)?, spec.big_n, spec.format, &cfg)?;
    let w2 = EstimatorWeights::new(&ZFunction::revenue(&x, &y2)?, spec.big_n, spec.format, &cfg)?;
    let wrong = (0..spec.replications)
        .into_par_iter()
        .map_init(
            || vec![0.0; spec.big_n],
            |buf, rep| {
                let mut rng = replication_rng(spec.seed, rep);
                draw_sorted(&curve, &mut rng, spec.sampling, buf);
                usize::from((w1.apply(buf) > spec.alpha * w2.apply(buf)) != truth)
            },
        )
        .sum::<usize>();
    Ok(ClassifierResult {
        gap,
        truth,
        error_rate: wrong as f64 / spec.replications as f64,
        replications: spec.replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{equilibrium_bid_allpay, multiunit_revenues};

    fn quick(mut d: DesignSpec, reps: usize) -> DesignSpec {
        d.replications = reps;
        d
    }

    #[test]
    fn auction_specs() {
        assert_eq!(AuctionSpec::UnitsFromTop(1).weights(4).unwrap().as_slice(), &[1.0, 1.0, 1.0, 0.0]);
        assert_eq!(AuctionSpec::Units(1).weights(3).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert!(AuctionSpec::Weights(vec![1.0, 0.5]).weights(3).is_err());
        let json = r#"[{"units":2},{"units_from_top":1},"uniform_stair","universal_b",{"weights":[1.0,0.0]}]"#;
        let specs: Vec<AuctionSpec> = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&specs).unwrap(), json);
    }

    #[test]
    fn design_json_round_trip() {
        let d = builtin_design("2").unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains(r#""N":1000"#));
        assert_eq!(serde_json::from_str::<DesignSpec>(&s).unwrap(), d);
        let minimal = r#"{"label":"x","n":3,"N":50,"dist":{"uniform":[]},"auction_a":{"units":1},"auction_b":"uniform_stair"}"#;
        let d: DesignSpec = serde_json::from_str(minimal).unwrap();
        assert_eq!(d.replications, 8000);
        assert_eq!(d.grid_size, DEFAULT_GRID);
        assert!(d.truncate && d.eps.is_none());
    }

    #[test]
    fn validation() {
        let mut d = builtin_design("1").unwrap();
        d.eps = Some(1.5);
        assert!(matches!(run_design(&d), Err(Error::Design { .. })));
        d.eps = Some(0.1);
        d.replications = 0;
        assert!(run_design(&d).is_err());
    }

    #[test]
    fn builtin_catalogue() {
        let all = builtin_designs();
        assert_eq!(all.len(), 5);
        let d3 = builtin_design("3").unwrap();
        assert_eq!(d3.auction_a, AuctionSpec::UnitsFromTop(1));
        assert_eq!(d3.auction_b, AuctionSpec::Units(1));
        assert!(all.iter().filter(|d| d.label.starts_with("design-4")).all(|d| d.eps.is_none()));
    }

    #[test]
    fn design_4_is_design_3_without_mixing() {
        let mut d3 = quick(builtin_design("3").unwrap().with_size(4, 500), 50);
        d3.eps = Some(0.0);
        d3.truncate = true;
        let mut d4 = quick(builtin_design("4").unwrap().with_size(4, 500), 50);
        d4.label = d3.label.clone();
        let (a, b) = (run_design(&d3).unwrap(), run_design(&d4).unwrap());
        assert_eq!(a.mad, b.mad);
        assert_eq!(a.true_value, b.true_value);
    }

    #[test]
    fn grid_resample_covers_grid() {
        let dist = ValueDistribution::beta(2.0, 2.0).unwrap();
        let curve = equilibrium_bid_allpay(&dist, &AllocationRule::multi_unit(1, 3).unwrap(), 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_bids(&curve, 20_000, &mut rng, Sampling::GridResample).unwrap();
        assert!(s.bids().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.bids().iter().all(|b| curve.bids.contains(b)));
        let q = sample_bids(&curve, 100, &mut rng, Sampling::Quantile).unwrap();
        assert!(q.bids().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constant_curve_gives_constant_bids() {
        let dist = ValueDistribution::uniform();
        let mut curve = equilibrium_bid_allpay(&dist, &AllocationRule::multi_unit(1, 2).unwrap(), 10).unwrap();
        curve.bids.fill(0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [Sampling::GridResample, Sampling::Quantile] {
            assert!(sample_bids(&curve, 30, &mut rng, mode).unwrap().bids().iter().all(|b| *b == 0.25));
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let d = quick(builtin_design("2").unwrap().with_size(4, 200), 64);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_design(&d).unwrap());
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_design(&d).unwrap());
        assert_eq!(one, four);
        assert_eq!(one.normalized_mad, (200f64).sqrt() * one.mad);
    }

    #[test]
    fn sweep_metric() {
        let d = quick(builtin_design("2").unwrap().with_size(4, 200), 20);
        let rows = epsilon_sweep(&d, &[0.001, 0.01, 0.1, 0.5]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.metric == Metric::RelativeMedianAd));
        assert!((rows[0].value - rows[0].median_ad / rows[0].true_value).abs() < 1e-15);
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("design,n,N,eps,metric,value,normalized,bound,ratio\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn myerson_uniform_single_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (v, se) = myerson_optimal_revenue(&ValueDistribution::uniform(), 1, 2, 200_000, &mut rng).unwrap();
        assert!((v - 5.0 / 12.0).abs() < 4.0 * se, "{v} +- {se}");
        assert_eq!(myerson_optimal_revenue(&ValueDistribution::uniform(), 0, 2, 10, &mut rng).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn myerson_all_units_posts_monopoly_price() {
        let dist = ValueDistribution::beta(2.0, 2.0).unwrap();
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (v, se) = myerson_optimal_revenue(&dist, n, n, 200_000, &mut rng).unwrap();
        let best = (0..=10_000).map(|j| crate::equilibrium::revenue_curve(&dist, j as f64 / 1e4)).fold(0.0, f64::max);
        assert!((v - n as f64 * best).abs() < 4.0 * se, "{v} vs {}", n as f64 * best);
    }

    #[test]
    fn classifier_rejects_zero_gap() {
        let spec = ClassifierSpec {
            n: 3,
            big_n: 100,
            dist: DistSpec::Beta([2.0, 2.0]),
            incumbent: AuctionSpec::UniformStair,
            b1: AuctionSpec::Units(1),
            b2: AuctionSpec::Units(1),
            alpha: 1.0,
            format: BidFormat::AllPay,
            truncate: false,
            replications: 10,
            seed: 0,
            grid_size: 1000,
            sampling: Sampling::GridResample,
        };
        assert!(classifier_error_rate(&spec).is_err());
        let p = multiunit_revenues(&ValueDistribution::beta(2.0, 2.0).unwrap(), 3, 1000).unwrap();
        let spec = ClassifierSpec { b1: AuctionSpec::Units(2), ..spec };
        let r = classifier_error_rate(&spec).unwrap();
        assert!((r.gap - (p[2] - p[1])).abs() < 1e-9);
        assert!(r.truth);
    }
}

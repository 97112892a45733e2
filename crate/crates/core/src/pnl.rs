//! Profit-and-loss distribution at a future grid date, per claim and for the
//! whole portfolio, from one set of scenarios.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::exec;
use crate::lsm::TrainedPolicy;
use crate::market::StepCoeffs;
use crate::math::exp;
use crate::pricer::Walker;
use crate::rng::{fill_normals, Domain, Streams};

struct PathScratch<'a> {
    walker: Walker<'a>,
    alive: Vec<bool>,
    before: Vec<bool>,
    payoff: Vec<f64>,
}

impl<'a> PathScratch<'a> {
    fn new(policy: &'a TrainedPolicy) -> Self {
        let k = policy.portfolio().len();
        PathScratch {
            walker: Walker::new(policy),
            alive: vec![true; k],
            before: vec![true; k],
            payoff: vec![0.0; k],
        }
    }
}

/// Walk the policy along `history` (states at dates `0..=n`) and write each
/// claim's date-`n` value into `out`.
fn values_along(
    policy: &TrainedPolicy,
    history: &[f64],
    n: usize,
    s: &mut PathScratch<'_>,
    out: &mut [f64],
) {
    let portfolio = policy.portfolio();
    let grid = portfolio.grid();
    let d = portfolio.params().n_assets();
    let r = portfolio.params().rate();
    let t_n = grid.time(n);
    let k = portfolio.len();
    s.alive.iter_mut().for_each(|a| *a = true);
    for m in 1..=n {
        s.before.copy_from_slice(&s.alive);
        let remaining =
            s.walker
                .decide(m, &history[m * d..(m + 1) * d], &mut s.alive, &mut s.payoff);
        for kk in 0..k {
            if s.before[kk] && !s.alive[kk] {
                out[kk] = s.payoff[kk] * exp(r * (t_n - grid.time(m)));
            }
        }
        if remaining == 0 {
            return;
        }
    }
    let cont = s.walker.continuation(n, &history[n * d..(n + 1) * d]);
    for kk in 0..k {
        if s.alive[kk] {
            out[kk] = cont[kk];
        }
    }
}

/// Value at date `n` of every claim held along one path: the interpolated
/// continuation value while alive, the payoff accrued at the short rate once
/// the policy has exercised (decisions at dates `1..=n` included).
/// `history` holds the states at dates `0..=n`, row-major.
pub fn horizon_values(policy: &TrainedPolicy, history: &[f64], n: usize) -> Result<Vec<f64>> {
    let portfolio = policy.portfolio();
    let d = portfolio.params().n_assets();
    let last = portfolio.grid().last();
    ensure!(
        n >= 1,
        "date 0 is valued by the baseline price, not by the policy"
    );
    ensure!(n <= last, "horizon {n} beyond the last date {last}");
    ensure!(
        n == last || policy.interpolator(n).is_some(),
        "no interpolator at date {n}"
    );
    ensure!(
        history.len() == (n + 1) * d,
        "history must hold {} states of width {d}",
        n + 1
    );
    let mut out = vec![0.0; portfolio.len()];
    values_along(policy, history, n, &mut PathScratch::new(policy), &mut out);
    Ok(out)
}

/// [`horizon_values`] for claim `k`.
pub fn horizon_value(policy: &TrainedPolicy, history: &[f64], n: usize, k: usize) -> Result<f64> {
    ensure!(k < policy.portfolio().len(), "claim index {k} out of range");
    Ok(horizon_values(policy, history, n)?[k])
}

/// A column of the distribution: one claim or the whole portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Asset(usize),
    Portfolio,
}

/// Pathwise `D(0, t) V_t - V_0` for every claim and for their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlDistribution {
    horizon: usize,
    time: f64,
    labels: Vec<String>,
    baseline: Vec<f64>,
    n_paths: usize,
    seed: u64,
    /// Path-major: `k` claim values then the portfolio value.
    samples: Vec<f64>,
    sorted: Vec<Vec<f64>>,
}

impl PnlDistribution {
    fn from_samples(
        horizon: usize,
        time: f64,
        labels: Vec<String>,
        baseline: Vec<f64>,
        n_paths: usize,
        seed: u64,
        samples: Vec<f64>,
    ) -> Self {
        let width = labels.len() + 1;
        let sorted = (0..width)
            .map(|c| {
                let mut col: Vec<f64> = samples.iter().skip(c).step_by(width).copied().collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect();
        PnlDistribution {
            horizon,
            time,
            labels,
            baseline,
            n_paths,
            seed,
            samples,
            sorted,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn n_assets(&self) -> usize {
        self.labels.len()
    }

    fn column(&self, series: Series) -> usize {
        match series {
            Series::Asset(k) => k,
            Series::Portfolio => self.labels.len(),
        }
    }

    /// P&L of `series` on path `j`.
    pub fn sample(&self, j: usize, series: Series) -> f64 {
        self.samples[j * (self.labels.len() + 1) + self.column(series)]
    }

    /// Samples of `series` in path order.
    pub fn samples(&self, series: Series) -> Vec<f64> {
        let width = self.labels.len() + 1;
        self.samples
            .iter()
            .skip(self.column(series))
            .step_by(width)
            .copied()
            .collect()
    }

    pub fn sorted(&self, series: Series) -> &[f64] {
        &self.sorted[self.column(series)]
    }

    pub fn quantile(&self, series: Series, p: f64) -> Result<f64> {
        ensure!(
            self.column(series) <= self.labels.len(),
            "series {series:?} out of range"
        );
        quantile_sorted(self.sorted(series), p)
    }

    /// Value-at-Risk at level `p`: the negated `1 - p` quantile.
    pub fn value_at_risk(&self, series: Series, p: f64) -> Result<f64> {
        Ok(-self.quantile(series, 1.0 - p)?)
    }
}

/// Empirical quantile of sorted data: linear interpolation between order
/// statistics at the 1-based rank `p (L + 1)`, clamped to the extremes.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    ensure!(
        p > 0.0 && p < 1.0,
        "quantile level must lie in (0, 1), got {p}"
    );
    ensure!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let h = p * (n + 1) as f64;
    if h <= 1.0 {
        return Ok(sorted[0]);
    }
    if h >= n as f64 {
        return Ok(sorted[n - 1]);
    }
    let lo = libm::floor(h) as usize;
    let frac = h - lo as f64;
    Ok(sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]))
}

/// Simulate `n_paths` fresh scenarios to grid date `n` and value every claim
/// there. `baseline` holds the date-0 prices `V^k(t_0)`.
pub fn build_pnl(
    policy: &TrainedPolicy,
    baseline: &[f64],
    n: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PnlDistribution> {
    let portfolio = policy.portfolio();
    let grid = portfolio.grid();
    let params = portfolio.params();
    let (d, k, last) = (params.n_assets(), portfolio.len(), grid.last());
    ensure!(
        baseline.len() == k,
        "baseline has {} prices for {k} claims",
        baseline.len()
    );
    ensure!(n <= last, "horizon {n} beyond the last date {last}");
    ensure!(
        n == 0 || n == last || policy.interpolator(n).is_some(),
        "no interpolator at date {n}"
    );
    ensure!(n_paths >= 1, "at least one scenario is required");
    let labels: Vec<String> = portfolio
        .instruments()
        .iter()
        .map(|i| String::from(i.label()))
        .collect();
    let width = k + 1;
    let mut samples = vec![0.0; n_paths * width];
    if n > 0 {
        let coeffs: Vec<StepCoeffs> = (0..n).map(|m| params.step_coeffs(grid.dt(m))).collect();
        let df = exp(-params.rate() * grid.time(n));
        let streams = Streams::new(seed, Domain::Pnl);
        exec::fill_rows(
            &mut samples,
            width,
            || {
                (
                    PathScratch::new(policy),
                    vec![0.0; (n + 1) * d],
                    vec![0.0; d],
                    vec![0.0; k],
                )
            },
            |(scratch, history, z, values), j, row| {
                let mut rng = streams.stream(j as u64);
                history[..d].copy_from_slice(params.spots());
                for (m, c) in coeffs.iter().enumerate() {
                    fill_normals(&mut rng, z);
                    let (done, rest) = history.split_at_mut((m + 1) * d);
                    c.apply(&done[m * d..], z, &mut rest[..d]);
                }
                values_along(policy, history, n, scratch, values);
                let mut total = 0.0;
                for kk in 0..k {
                    row[kk] = df * values[kk] - baseline[kk];
                    total += row[kk];
                }
                row[k] = total;
            },
        );
    }
    Ok(PnlDistribution::from_samples(
        n,
        grid.time(n),
        labels,
        baseline.to_vec(),
        n_paths,
        seed,
        samples,
    ))
}

/// Step CDF of one series: sorted values with probabilities `i / L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub label: String,
    pub rows: Vec<(f64, f64)>,
}

/// One CDF table per claim, then one for the portfolio.
pub fn export_cdf(dist: &PnlDistribution) -> Vec<CdfTable> {
    let n = dist.n_paths as f64;
    let mut series: Vec<(String, Series)> = dist
        .labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.clone(), Series::Asset(k)))
        .collect();
    series.push((String::from("portfolio"), Series::Portfolio));
    series
        .into_iter()
        .map(|(label, s)| CdfTable {
            label,
            rows: dist
                .sorted(s)
                .iter()
                .enumerate()
                .map(|(i, &x)| (x, (i + 1) as f64 / n))
                .collect(),
        })
        .collect()
}

//! Forward pricing with the trained interpolators as the exercise policy.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::exec;
use crate::lsm::TrainedPolicy;
use crate::market::StepCoeffs;
use crate::math::{exp, mean_stderr};
use crate::nn::EvalScratch;
use crate::rng::{fill_normals, Domain, Streams};

/// Policy prices with Monte Carlo errors and the pathwise cash flows behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub labels: Vec<String>,
    pub prices: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// `exercise_histogram[k][n]`: paths on which claim `k` stopped at date `n`.
    pub exercise_histogram: Vec<Vec<u64>>,
    /// Discounted cash flows, path-major `(path, claim)`.
    pub cash_flows: Vec<f64>,
}

impl PricingResult {
    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    /// Discounted cash flow of claim `k` on path `j`.
    pub fn cash_flow(&self, j: usize, k: usize) -> f64 {
        self.cash_flows[j * self.prices.len() + k]
    }
}

/// Exercise decisions of the policy along one path.
pub(crate) struct Walker<'a> {
    policy: &'a TrainedPolicy,
    scratch: EvalScratch,
    cont: Vec<f64>,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(policy: &'a TrainedPolicy) -> Self {
        Walker {
            policy,
            scratch: policy.scratch(),
            cont: vec![0.0; policy.portfolio().len()],
        }
    }

    /// Decide at date `m` for every claim still alive. Exercised claims get
    /// their payoff written to `payoff` and are marked dead. Returns the
    /// number of claims still alive afterwards.
    #[inline]
    pub(crate) fn decide(
        &mut self,
        m: usize,
        state: &[f64],
        alive: &mut [bool],
        payoff: &mut [f64],
    ) -> usize {
        let portfolio = self.policy.portfolio();
        let last = portfolio.grid().last();
        let mut have_cont = false;
        let mut remaining = 0;
        for (k, inst) in portfolio.instruments().iter().enumerate() {
            if !alive[k] {
                continue;
            }
            if m == last {
                payoff[k] = inst.intrinsic(state);
                alive[k] = false;
                continue;
            }
            if portfolio.exercisable(m, k) {
                let i = inst.intrinsic(state);
                // continuation is floored at 0, so a zero payoff never stops
                if i > 0.0 {
                    if !have_cont {
                        self.policy
                            .continuation(m, state, &mut self.scratch, &mut self.cont);
                        have_cont = true;
                    }
                    if i > self.cont[k] {
                        payoff[k] = i;
                        alive[k] = false;
                        continue;
                    }
                }
            }
            remaining += 1;
        }
        remaining
    }

    /// Floored continuation values at interior date `m`.
    pub(crate) fn continuation(&mut self, m: usize, state: &[f64]) -> &[f64] {
        self.policy
            .continuation(m, state, &mut self.scratch, &mut self.cont);
        &self.cont
    }
}

/// Price every claim of the policy's portfolio on `n_paths` fresh paths:
/// stop at the first exercisable date where the payoff beats the
/// continuation value, otherwise collect the payoff at maturity.
pub fn price_with_policy(
    policy: &TrainedPolicy,
    n_paths: usize,
    seed: u64,
) -> Result<PricingResult> {
    ensure!(n_paths >= 1, "at least one pricing path is required");
    let portfolio = policy.portfolio();
    let grid = portfolio.grid();
    let params = portfolio.params();
    let (d, k, last) = (params.n_assets(), portfolio.len(), grid.last());
    for m in 1..last {
        ensure!(
            !portfolio.any_exercisable(m) || policy.interpolator(m).is_some(),
            "no interpolator for exercisable date {m}"
        );
    }
    let coeffs: Vec<StepCoeffs> = (0..last).map(|n| params.step_coeffs(grid.dt(n))).collect();
    let disc: Vec<f64> = grid
        .dates()
        .iter()
        .map(|&t| exp(-params.rate() * t))
        .collect();
    let streams = Streams::new(seed, Domain::Pricing);

    // per path: k discounted cash flows, then k stopping dates
    let mut rows = vec![0.0; n_paths * 2 * k];
    exec::fill_rows(
        &mut rows,
        2 * k,
        || {
            (
                Walker::new(policy),
                vec![0.0; d],
                vec![0.0; d],
                vec![true; k],
                vec![true; k],
                vec![0.0; k],
            )
        },
        |(walker, state, z, alive, before, payoff), j, row| {
            let mut rng = streams.stream(j as u64);
            state.copy_from_slice(params.spots());
            alive.iter_mut().for_each(|a| *a = true);
            for (n, c) in coeffs.iter().enumerate() {
                let m = n + 1;
                fill_normals(&mut rng, z);
                c.apply_in_place(state, z);
                before.copy_from_slice(alive);
                let remaining = walker.decide(m, state, alive, payoff);
                for kk in 0..k {
                    if before[kk] && !alive[kk] {
                        row[kk] = payoff[kk] * disc[m];
                        row[k + kk] = m as f64;
                    }
                }
                if remaining == 0 {
                    break;
                }
            }
        },
    );

    let mut prices = Vec::with_capacity(k);
    let mut stderrs = Vec::with_capacity(k);
    let mut hist = vec![vec![0u64; last + 1]; k];
    let mut cash_flows = Vec::with_capacity(n_paths * k);
    for row in rows.chunks(2 * k) {
        cash_flows.extend_from_slice(&row[..k]);
        for kk in 0..k {
            hist[kk][row[k + kk] as usize] += 1;
        }
    }
    let mut column = vec![0.0; n_paths];
    for kk in 0..k {
        for j in 0..n_paths {
            column[j] = cash_flows[j * k + kk];
        }
        let (mean, se) = mean_stderr(&column);
        prices.push(mean);
        stderrs.push(se);
    }
    Ok(PricingResult {
        labels: portfolio
            .instruments()
            .iter()
            .map(|i| String::from(i.label()))
            .collect(),
        prices,
        stderrs,
        n_paths,
        seed,
        exercise_histogram: hist,
        cash_flows,
    })
}

/// Backward (high-biased) value at inception: the discounted mean over fresh
/// one-step paths of each claim's value at date 1 under the first
/// interpolator. No error estimate is attached.
pub fn backward_estimate(policy: &TrainedPolicy, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    ensure!(n_paths >= 1, "at least one path is required");
    let portfolio = policy.portfolio();
    let grid = portfolio.grid();
    let params = portfolio.params();
    let (d, k, last) = (params.n_assets(), portfolio.len(), grid.last());
    let coeffs = params.step_coeffs(grid.dt(0));
    let df = exp(-params.rate() * grid.time(1));
    let streams = Streams::new(seed, Domain::Backward);
    let mut rows = vec![0.0; n_paths * k];
    exec::fill_rows(
        &mut rows,
        k,
        || (Walker::new(policy), vec![0.0; d], vec![0.0; d]),
        |(walker, state, z), j, row| {
            let mut rng = streams.stream(j as u64);
            fill_normals(&mut rng, z);
            coeffs.apply(params.spots(), z, state);
            if last == 1 {
                for (kk, inst) in portfolio.instruments().iter().enumerate() {
                    row[kk] = inst.intrinsic(state);
                }
            } else {
                let cont = walker.continuation(1, state);
                for (kk, inst) in portfolio.instruments().iter().enumerate() {
                    row[kk] = if portfolio.exercisable(1, kk) {
                        cont[kk].max(inst.intrinsic(state))
                    } else {
                        cont[kk]
                    };
                }
            }
        },
    );
    let mut out = vec![0.0; k];
    for row in rows.chunks(k) {
        for kk in 0..k {
            out[kk] += row[kk];
        }
    }
    Ok(out.into_iter().map(|s| df * s / n_paths as f64).collect())
}

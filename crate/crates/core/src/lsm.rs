//! Backward induction: regression targets from inner one-step fans, one
//! multi-output network per interior grid date.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::exec;
use crate::instruments::{Portfolio, RegressionSet};
use crate::market::{self, spawn_inner_fan, InnerFan, PathSet};
use crate::math::exp;
use crate::nn::{Dataset, EvalScratch, Interpolator, TrainConfig};
use crate::rng::Domain;

#[derive(Debug, Clone, PartialEq)]
pub struct LsmConfig {
    /// Outer training paths `J`.
    pub outer_paths: usize,
    /// Inner one-step paths `M` per outer point.
    pub inner_paths: usize,
    pub train: TrainConfig,
    pub seed: u64,
    /// Draw new outer paths for every date instead of reusing one set.
    pub fresh_paths_per_date: bool,
    /// Start each date's fit from the next date's network.
    pub warm_start: bool,
}

impl Default for LsmConfig {
    fn default() -> Self {
        LsmConfig {
            outer_paths: 50_000,
            inner_paths: 16,
            train: TrainConfig::default(),
            seed: 0,
            fresh_paths_per_date: false,
            warm_start: true,
        }
    }
}

impl LsmConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.outer_paths >= 1, "outer_paths must be >= 1");
        ensure!(self.inner_paths >= 1, "inner_paths must be >= 1");
        self.train.validate()
    }
}

/// Fit statistics for one date.
#[derive(Debug, Clone, PartialEq)]
pub struct DateDiagnostics {
    pub date_index: usize,
    pub samples: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Continuation-value interpolators for dates `1..N`, plus the portfolio they
/// were trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    portfolio: Portfolio,
    interpolators: Vec<Option<Interpolator>>,
    diagnostics: Vec<DateDiagnostics>,
    seed: u64,
}

impl TrainedPolicy {
    /// Assemble a policy, e.g. after loading it from disk.
    pub fn from_parts(
        portfolio: Portfolio,
        interpolators: Vec<(usize, Interpolator)>,
        diagnostics: Vec<DateDiagnostics>,
        seed: u64,
    ) -> Result<Self> {
        let last = portfolio.grid().last();
        let (d, k) = (portfolio.params().n_assets(), portfolio.len());
        let mut slots: Vec<Option<Interpolator>> = vec![None; last + 1];
        for (n, interp) in interpolators {
            ensure!(
                n >= 1 && n < last,
                "interpolator date {n} is not an interior date of 0..{last}"
            );
            ensure!(
                interp.n_inputs() == d && interp.n_outputs() == k,
                "interpolator at date {n} maps {} -> {}, portfolio needs {d} -> {k}",
                interp.n_inputs(),
                interp.n_outputs()
            );
            ensure!(slots[n].is_none(), "two interpolators for date {n}");
            slots[n] = Some(interp);
        }
        for (n, slot) in slots.iter().enumerate().take(last).skip(1) {
            ensure!(slot.is_some(), "missing interpolator for interior date {n}");
        }
        Ok(TrainedPolicy {
            portfolio,
            interpolators: slots,
            diagnostics,
            seed,
        })
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.portfolio
    }
    pub fn diagnostics(&self) -> &[DateDiagnostics] {
        &self.diagnostics
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn interpolator(&self, n: usize) -> Option<&Interpolator> {
        self.interpolators.get(n).and_then(Option::as_ref)
    }

    /// `(date, interpolator)` pairs in date order.
    pub fn interpolators(&self) -> impl Iterator<Item = (usize, &Interpolator)> {
        self.interpolators
            .iter()
            .enumerate()
            .filter_map(|(n, i)| i.as_ref().map(|i| (n, i)))
    }

    /// Scratch buffers able to evaluate any of this policy's interpolators.
    pub fn scratch(&self) -> EvalScratch {
        match self.interpolators().next() {
            Some((_, i)) => i.scratch(),
            None => crate::nn::Network::zeros(vec![1, 1], Default::default())
                .and_then(|n| Interpolator::new(n, vec![0.0], vec![1.0], vec![0.0], vec![1.0]))
                .map(|i| i.scratch())
                .expect("trivial interpolator"),
        }
    }

    /// Continuation values at interior date `n`, floored at zero.
    #[inline]
    pub fn continuation(
        &self,
        n: usize,
        state: &[f64],
        scratch: &mut EvalScratch,
        out: &mut [f64],
    ) {
        let interp = self.interpolators[n]
            .as_ref()
            .expect("interior date has an interpolator");
        interp.evaluate_with(state, scratch, out);
        for c in out.iter_mut() {
            *c = c.max(0.0);
        }
    }
}

/// What values the claims at the next date: the payoff at maturity or the
/// interpolator trained for that date.
#[derive(Debug, Clone, Copy)]
pub enum Next<'a> {
    Terminal,
    Network(&'a Interpolator),
}

/// Payoffs at maturity, `states` row-major with one row per path.
pub fn terminal_values(portfolio: &Portfolio, states: &[f64]) -> Result<Vec<f64>> {
    let d = portfolio.params().n_assets();
    ensure!(
        states.len() % d == 0,
        "state buffer is not a multiple of {d} assets"
    );
    Ok(states
        .chunks(d)
        .flat_map(|s| {
            portfolio
                .instruments()
                .iter()
                .map(move |inst| inst.intrinsic(s))
        })
        .collect())
}

/// Value at date `date` of each claim, not exercised before, in `state`:
/// `max(intrinsic, continuation)` where exercisable, the continuation
/// otherwise, the payoff at maturity.
pub fn one_step_value(
    portfolio: &Portfolio,
    date: usize,
    state: &[f64],
    next: Next<'_>,
) -> Result<Vec<f64>> {
    let last = portfolio.grid().last();
    ensure!(
        date >= 1 && date <= last,
        "date index {date} outside 1..={last}"
    );
    ensure!(
        state.len() == portfolio.params().n_assets(),
        "state width mismatch"
    );
    let mut out = vec![0.0; portfolio.len()];
    match next {
        Next::Terminal => {
            ensure!(
                date == last,
                "terminal values requested at interior date {date}"
            );
            fill_one_step(portfolio, date, state, None, &mut out);
        }
        Next::Network(interp) => {
            ensure!(date < last, "a network cannot value claims at maturity");
            ensure!(
                interp.n_inputs() == state.len() && interp.n_outputs() == portfolio.len(),
                "interpolator shape mismatch"
            );
            let mut s = interp.scratch();
            fill_one_step(portfolio, date, state, Some((interp, &mut s)), &mut out);
        }
    }
    Ok(out)
}

#[inline]
fn fill_one_step(
    portfolio: &Portfolio,
    date: usize,
    state: &[f64],
    next: Option<(&Interpolator, &mut EvalScratch)>,
    out: &mut [f64],
) {
    match next {
        None => {
            for (k, inst) in portfolio.instruments().iter().enumerate() {
                out[k] = inst.intrinsic(state);
            }
        }
        Some((interp, scratch)) => {
            interp.evaluate_with(state, scratch, out);
            for (k, inst) in portfolio.instruments().iter().enumerate() {
                let cont = out[k].max(0.0);
                out[k] = if portfolio.exercisable(date, k) {
                    cont.max(inst.intrinsic(state))
                } else {
                    cont
                };
            }
        }
    }
}

/// Inputs are the outer states at date `n`; targets are the discounted inner
/// averages of [`one_step_value`] at `n + 1`.
pub fn regression_targets(
    portfolio: &Portfolio,
    outer: &PathSet,
    n: usize,
    fan: &InnerFan,
    next: Next<'_>,
) -> Result<Dataset> {
    let d = portfolio.params().n_assets();
    let k = portfolio.len();
    let grid = portfolio.grid();
    ensure!(
        outer.grid() == grid,
        "path set and portfolio use different grids"
    );
    ensure!(
        outer.n_assets() == d && fan.n_assets() == d,
        "asset count mismatch"
    );
    ensure!(
        fan.date_index() == n && fan.n_outer() == outer.n_paths(),
        "fan was not spawned from these outer points at date {n}"
    );
    let last = grid.last();
    match next {
        Next::Terminal => ensure!(n + 1 == last, "terminal payoff only values date {last}"),
        Next::Network(i) => {
            ensure!(n + 1 < last, "no network values the maturity date");
            ensure!(
                i.n_inputs() == d && i.n_outputs() == k,
                "interpolator shape mismatch"
            );
        }
    }
    let df = exp(-portfolio.params().rate() * grid.dt(n));
    let m_count = fan.m_count();
    let n_paths = outer.n_paths();

    let mut targets = vec![0.0; n_paths * k];
    let interp = match next {
        Next::Network(i) => Some(i),
        Next::Terminal => None,
    };
    exec::fill_rows(
        &mut targets,
        k,
        || (interp.map(|i| i.scratch()), vec![0.0; k]),
        |(scratch, buf), j, row| {
            row.iter_mut().for_each(|v| *v = 0.0);
            for m in 0..m_count {
                let s = fan.state(j, m);
                let nx = interp.zip(scratch.as_mut());
                fill_one_step(portfolio, n + 1, s, nx, buf);
                for kk in 0..k {
                    row[kk] += buf[kk];
                }
            }
            for v in row.iter_mut() {
                *v *= df / m_count as f64;
            }
        },
    );

    let mut inputs = Vec::with_capacity(n_paths * d);
    for j in 0..n_paths {
        inputs.extend_from_slice(outer.state(j, n));
    }
    let mut data = Dataset::new(inputs, targets, d, k)?;
    let masked = portfolio
        .instruments()
        .iter()
        .enumerate()
        .any(|(kk, inst)| {
            inst.regression() == RegressionSet::InTheMoney && portfolio.exercisable(n, kk)
        });
    if masked {
        let mut w = vec![1.0; n_paths * k];
        for j in 0..n_paths {
            let s = outer.state(j, n);
            for (kk, inst) in portfolio.instruments().iter().enumerate() {
                if inst.regression() == RegressionSet::InTheMoney
                    && portfolio.exercisable(n, kk)
                    && inst.intrinsic(s) <= 0.0
                {
                    w[j * k + kk] = 0.0;
                }
            }
        }
        data = data.with_weights(w)?;
    }
    Ok(data)
}

/// Train interpolators from the last interior date down to date 1.
pub fn train_policy(portfolio: &Portfolio, cfg: &LsmConfig) -> Result<TrainedPolicy> {
    cfg.validate()?;
    let grid = portfolio.grid();
    let params = portfolio.params();
    let last = grid.last();
    let shared = if cfg.fresh_paths_per_date || last < 2 {
        None
    } else {
        Some(market::simulate_paths(
            params,
            grid,
            cfg.outer_paths,
            cfg.seed,
        )?)
    };

    let mut interpolators: Vec<(usize, Interpolator)> = Vec::new();
    let mut diagnostics = Vec::new();
    for n in (1..last).rev() {
        let fresh;
        let outer = match &shared {
            Some(p) => p,
            None => {
                fresh = market::simulate_paths_in(
                    params,
                    grid,
                    cfg.outer_paths,
                    cfg.seed,
                    Domain::FreshOuter(n),
                )?;
                &fresh
            }
        };
        let fan = spawn_inner_fan(outer, n, cfg.inner_paths, params, cfg.seed)?;
        let next = match interpolators.last() {
            Some((_, i)) => Next::Network(i),
            None => Next::Terminal,
        };
        let data = regression_targets(portfolio, outer, n, &fan, next)?;
        drop(fan);
        let mut tc = cfg.train.clone();
        tc.seed = cfg.train.seed.wrapping_add(n as u64);
        let warm = if cfg.warm_start {
            interpolators.last().map(|(_, i)| i.network())
        } else {
            None
        };
        let (interp, outcome) =
            Interpolator::fit(&data, params.spots(), warm, &tc).map_err(|e| e.at_date(n))?;
        diagnostics.push(DateDiagnostics {
            date_index: n,
            samples: data.len(),
            initial_loss: outcome.initial_loss,
            final_loss: outcome.final_loss,
            epochs: outcome.epochs,
        });
        interpolators.push((n, interp));
    }
    interpolators.reverse();
    diagnostics.reverse();
    TrainedPolicy::from_parts(portfolio.clone(), interpolators, diagnostics, cfg.seed)
}

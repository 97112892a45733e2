//! Published reference cases: the American put priced on coarse to fine
//! exercise schedules (with extrapolation to continuous exercise) and the
//! three-year Bermudan call on the maximum of 2 or 3 assets.

use std::path::Path;

use anyhow::Result;
use lsmnet_core::instruments::every;
use lsmnet_core::oracles::{binomial_put, extrapolate_dt_zero, ExerciseSchedule};
use lsmnet_core::{
    lsm, pricer, Instrument, LsmConfig, ModelParams, Portfolio, TimeGrid, TrainConfig,
    TrainedPolicy,
};

use crate::config::BenchmarkSection;
use crate::report::{num, open_csv, Provenance};

pub const PUT_STRIKE: f64 = 100.0;
pub const PUT_RATE: f64 = 0.05;
pub const PUT_VOL: f64 = 0.2;
pub const PUT_MATURITY: f64 = 1.0;

/// Exercise schedules of the put series: label and dates per year.
pub const PUT_SCHEDULES: [(&str, usize); 4] = [("2M", 6), ("1M", 12), ("2W", 26), ("1W", 52)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutCase {
    pub spot: f64,
    pub dividend: f64,
    /// Published prices per schedule, in [`PUT_SCHEDULES`] order.
    pub published: [f64; 4],
    pub published_extrapolated: f64,
    pub published_continuous: f64,
}

pub const PUT_SERIES: [PutCase; 4] = [
    PutCase {
        spot: 90.0,
        dividend: 0.0,
        published: [11.340, 11.416, 11.454, 11.472],
        published_extrapolated: 11.489,
        published_continuous: 11.490,
    },
    PutCase {
        spot: 100.0,
        dividend: 0.0,
        published: [5.997, 6.041, 6.066, 6.075],
        published_extrapolated: 6.086,
        published_continuous: 6.089,
    },
    PutCase {
        spot: 110.0,
        dividend: 0.0,
        published: [2.936, 2.958, 2.972, 2.978],
        published_extrapolated: 2.983,
        published_continuous: 2.985,
    },
    PutCase {
        spot: 90.0,
        dividend: 0.03,
        published: [12.309, 12.348, 12.370, 12.377],
        published_extrapolated: 12.387,
        published_continuous: 12.384,
    },
];

pub fn put_case(spot: f64, dividend: f64) -> Option<&'static PutCase> {
    PUT_SERIES
        .iter()
        .find(|c| c.spot == spot && c.dividend == dividend)
}

pub const MAX_CALL_STRIKE: f64 = 100.0;
pub const MAX_CALL_RATE: f64 = 0.05;
pub const MAX_CALL_DIVIDEND: f64 = 0.10;
pub const MAX_CALL_VOL: f64 = 0.2;
pub const MAX_CALL_MATURITY: f64 = 3.0;
pub const MAX_CALL_DATES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxCallRow {
    pub assets: usize,
    pub spot: f64,
    pub published: f64,
    /// 95% interval of the reference values.
    pub ci: (f64, f64),
}

pub const MAX_CALL_ROWS: [MaxCallRow; 6] = [
    MaxCallRow {
        assets: 2,
        spot: 90.0,
        published: 8.071,
        ci: (8.060, 8.081),
    },
    MaxCallRow {
        assets: 2,
        spot: 100.0,
        published: 13.901,
        ci: (13.880, 13.910),
    },
    MaxCallRow {
        assets: 2,
        spot: 110.0,
        published: 21.345,
        ci: (21.336, 21.354),
    },
    MaxCallRow {
        assets: 3,
        spot: 90.0,
        published: 11.275,
        ci: (11.276, 11.290),
    },
    MaxCallRow {
        assets: 3,
        spot: 100.0,
        published: 18.683,
        ci: (18.673, 18.699),
    },
    MaxCallRow {
        assets: 3,
        spot: 110.0,
        published: 27.562,
        ci: (27.545, 27.591),
    },
];

pub fn max_call_row(assets: usize, spot: f64) -> Option<&'static MaxCallRow> {
    MAX_CALL_ROWS
        .iter()
        .find(|r| r.assets == assets && r.spot == spot)
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub outer_paths: usize,
    pub inner_paths: usize,
    pub pricing_paths: usize,
    pub tree_steps: usize,
    /// Training seed; pricing uses `seed + 1`.
    pub seed: u64,
    pub train: TrainConfig,
}

impl BenchSettings {
    pub fn from_section(b: &BenchmarkSection) -> Self {
        BenchSettings {
            outer_paths: b.outer_paths,
            inner_paths: b.inner_paths,
            pricing_paths: b.pricing_paths,
            tree_steps: b.tree_steps,
            seed: b.seed,
            train: b.train.to_train_config(b.seed),
        }
    }

    fn lsm(&self) -> LsmConfig {
        LsmConfig {
            outer_paths: self.outer_paths,
            inner_paths: self.inner_paths,
            train: self.train.clone(),
            seed: self.seed,
            ..LsmConfig::default()
        }
    }

    pub fn pricing_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self::from_section(&BenchmarkSection::default())
    }
}

pub fn put_portfolio(case: &PutCase, per_year: usize) -> Result<Portfolio> {
    let steps = per_year * PUT_MATURITY as usize;
    let grid = TimeGrid::uniform(PUT_MATURITY, steps)?;
    let params = ModelParams::uniform(1, PUT_RATE, case.dividend, PUT_VOL, case.spot)?;
    let put =
        Instrument::american_put(format!("put_{per_year}py"), PUT_STRIKE, 0, every(1, steps))?;
    Ok(Portfolio::new(vec![put], grid, params)?)
}

pub fn put_policy(
    case: &PutCase,
    per_year: usize,
    settings: &BenchSettings,
) -> Result<TrainedPolicy> {
    Ok(lsm::train_policy(
        &put_portfolio(case, per_year)?,
        &settings.lsm(),
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PutRow {
    pub label: &'static str,
    pub dt: f64,
    pub price: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
    pub published: f64,
    /// Lattice price of the same Bermudan schedule.
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PutSeries {
    pub case: PutCase,
    pub rows: Vec<PutRow>,
    pub extrapolated: f64,
    /// Lattice price with exercise at every step.
    pub oracle: f64,
}

/// Lattice steps for a schedule: at least `steps`, a multiple of the number
/// of exercise dates so every date lands on a level.
fn lattice_steps(steps: usize, per_year: usize) -> usize {
    steps.div_ceil(per_year) * per_year
}

pub fn bermudan_put_oracle(case: &PutCase, per_year: usize, tree_steps: usize) -> Result<f64> {
    let dates = (1..=per_year)
        .map(|i| PUT_MATURITY * i as f64 / per_year as f64)
        .collect();
    let steps = lattice_steps(tree_steps, per_year);
    let r = binomial_put(
        case.spot,
        PUT_STRIKE,
        PUT_RATE,
        case.dividend,
        PUT_VOL,
        PUT_MATURITY,
        steps,
        &ExerciseSchedule::Dates(dates),
    )?;
    Ok(r.price)
}

pub fn american_put_oracle(case: &PutCase, tree_steps: usize) -> Result<f64> {
    let r = binomial_put(
        case.spot,
        PUT_STRIKE,
        PUT_RATE,
        case.dividend,
        PUT_VOL,
        PUT_MATURITY,
        tree_steps,
        &ExerciseSchedule::Continuous,
    )?;
    Ok(r.price)
}

/// Price one schedule of the series with a freshly trained policy.
pub fn put_row(case: &PutCase, schedule: usize, settings: &BenchSettings) -> Result<PutRow> {
    let per_year = PUT_SCHEDULES[schedule].1;
    let policy = put_policy(case, per_year, settings)?;
    put_row_with(case, schedule, &policy, settings)
}

pub fn put_row_with(
    case: &PutCase,
    schedule: usize,
    policy: &TrainedPolicy,
    settings: &BenchSettings,
) -> Result<PutRow> {
    let (label, per_year) = PUT_SCHEDULES[schedule];
    let res = pricer::price_with_policy(policy, settings.pricing_paths, settings.pricing_seed())?;
    Ok(PutRow {
        label,
        dt: 1.0 / per_year as f64,
        price: res.prices[0],
        stderr: res.stderrs[0],
        paths: res.n_paths,
        seed: res.seed,
        published: case.published[schedule],
        oracle: bermudan_put_oracle(case, per_year, settings.tree_steps)?,
    })
}

pub fn finish_series(
    case: &PutCase,
    rows: Vec<PutRow>,
    settings: &BenchSettings,
) -> Result<PutSeries> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.dt, r.price)).collect();
    Ok(PutSeries {
        case: *case,
        extrapolated: extrapolate_dt_zero(&points)?,
        oracle: american_put_oracle(case, settings.tree_steps)?,
        rows,
    })
}

pub fn put_series(case: &PutCase, settings: &BenchSettings) -> Result<PutSeries> {
    let rows = (0..PUT_SCHEDULES.len())
        .map(|i| put_row(case, i, settings))
        .collect::<Result<Vec<_>>>()?;
    finish_series(case, rows, settings)
}

pub fn max_call_portfolio(row: &MaxCallRow) -> Result<Portfolio> {
    let grid = TimeGrid::uniform(MAX_CALL_MATURITY, MAX_CALL_DATES)?;
    let params = ModelParams::uniform(
        row.assets,
        MAX_CALL_RATE,
        MAX_CALL_DIVIDEND,
        MAX_CALL_VOL,
        row.spot,
    )?;
    let label = format!("max_call_{}x{}", row.assets, row.spot);
    let call = Instrument::call_on_max(
        label,
        MAX_CALL_STRIKE,
        (0..row.assets).collect(),
        every(1, MAX_CALL_DATES),
    )?;
    Ok(Portfolio::new(vec![call], grid, params)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxCallResult {
    pub row: MaxCallRow,
    pub price: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
    /// Backward (high-biased) estimate.
    pub backward: f64,
}

impl MaxCallResult {
    /// Within three standard errors of the reference interval.
    pub fn pass(&self) -> bool {
        self.price >= self.row.ci.0 - 3.0 * self.stderr
            && self.price <= self.row.ci.1 + 3.0 * self.stderr
    }
}

pub fn max_call(row: &MaxCallRow, settings: &BenchSettings) -> Result<MaxCallResult> {
    let policy = lsm::train_policy(&max_call_portfolio(row)?, &settings.lsm())?;
    let res = pricer::price_with_policy(&policy, settings.pricing_paths, settings.pricing_seed())?;
    let backward = pricer::backward_estimate(
        &policy,
        settings.pricing_paths,
        settings.seed.wrapping_add(2),
    )?;
    Ok(MaxCallResult {
        row: *row,
        price: res.prices[0],
        stderr: res.stderrs[0],
        paths: res.n_paths,
        seed: res.seed,
        backward: backward[0],
    })
}

pub fn write_put_csv(path: &Path, prov: &Provenance, series: &[PutSeries]) -> Result<()> {
    let mut w = open_csv(path, prov)?;
    w.write_record([
        "label",
        "price",
        "stderr",
        "paths",
        "seed",
        "spot",
        "dividend",
        "dt",
        "published",
        "oracle",
    ])?;
    for s in series {
        for r in &s.rows {
            w.write_record([
                r.label.to_string(),
                num(r.price),
                num(r.stderr),
                r.paths.to_string(),
                r.seed.to_string(),
                num(s.case.spot),
                num(s.case.dividend),
                num(r.dt),
                num(r.published),
                num(r.oracle),
            ])?;
        }
        w.write_record([
            "0".to_string(),
            num(s.extrapolated),
            String::new(),
            String::new(),
            String::new(),
            num(s.case.spot),
            num(s.case.dividend),
            num(0.0),
            num(s.case.published_extrapolated),
            num(s.oracle),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_max_call_csv(path: &Path, prov: &Provenance, rows: &[MaxCallResult]) -> Result<()> {
    let mut w = open_csv(path, prov)?;
    w.write_record([
        "label",
        "price",
        "stderr",
        "paths",
        "seed",
        "assets",
        "spot",
        "backward",
        "published",
        "ci_low",
        "ci_high",
        "pass",
    ])?;
    for r in rows {
        w.write_record([
            format!("max_call_{}x{}", r.row.assets, r.row.spot),
            num(r.price),
            num(r.stderr),
            r.paths.to_string(),
            r.seed.to_string(),
            r.row.assets.to_string(),
            num(r.row.spot),
            num(r.backward),
            num(r.row.published),
            num(r.row.ci.0),
            num(r.row.ci.1),
            r.pass().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

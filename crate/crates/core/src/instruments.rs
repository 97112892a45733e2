//! Payoffs, exercise schedules and the portfolio container.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ensure, Error, Result};
use crate::market::{ModelParams, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionType {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    /// `(K - S_x)^+`, exercisable on its schedule.
    AmericanPut,
    /// `(min_i S_i - K)^+`, at maturity only.
    EuropeanCallOnMin,
    /// `(max_i S_i - K)^+`, exercisable on its schedule.
    BermudanCallOnMax,
    /// Single-asset vanilla at maturity; used for validation against closed forms.
    EuropeanVanilla(OptionType),
}

impl PayoffKind {
    pub fn is_european(self) -> bool {
        matches!(
            self,
            PayoffKind::EuropeanCallOnMin | PayoffKind::EuropeanVanilla(_)
        )
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            PayoffKind::AmericanPut | PayoffKind::EuropeanVanilla(_) => n == 1,
            PayoffKind::EuropeanCallOnMin | PayoffKind::BermudanCallOnMax => n >= 2,
        }
    }
}

/// Which outer paths enter the regression for an instrument's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressionSet {
    #[default]
    AllPaths,
    /// Only paths where the instrument's intrinsic value is positive.
    InTheMoney,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    label: String,
    kind: PayoffKind,
    strike: f64,
    underlyings: Vec<usize>,
    exercise_dates: Vec<usize>,
    regression: RegressionSet,
}

impl Instrument {
    /// `exercise_dates` are grid indices, strictly increasing, never 0; the
    /// last one must be the maturity index (checked by [`Portfolio::new`]).
    pub fn new(
        label: impl Into<String>,
        kind: PayoffKind,
        strike: f64,
        underlyings: Vec<usize>,
        exercise_dates: Vec<usize>,
    ) -> Result<Self> {
        let label = label.into();
        ensure!(
            strike.is_finite() && strike > 0.0,
            "{label}: strike must be > 0, got {strike}"
        );
        ensure!(
            kind.arity_ok(underlyings.len()),
            "{label}: {kind:?} cannot be written on {} underlyings",
            underlyings.len()
        );
        ensure!(
            !exercise_dates.is_empty(),
            "{label}: exercise schedule is empty"
        );
        ensure!(
            exercise_dates[0] > 0,
            "{label}: exercise at the valuation date is not supported"
        );
        ensure!(
            exercise_dates.windows(2).all(|w| w[1] > w[0]),
            "{label}: exercise dates must increase strictly"
        );
        ensure!(
            !kind.is_european() || exercise_dates.len() == 1,
            "{label}: European instruments exercise at maturity only"
        );
        Ok(Instrument {
            label,
            kind,
            strike,
            underlyings,
            exercise_dates,
            regression: RegressionSet::AllPaths,
        })
    }

    pub fn american_put(
        label: impl Into<String>,
        strike: f64,
        underlying: usize,
        schedule: Vec<usize>,
    ) -> Result<Self> {
        Self::new(
            label,
            PayoffKind::AmericanPut,
            strike,
            alloc::vec![underlying],
            schedule,
        )
    }

    pub fn call_on_min(
        label: impl Into<String>,
        strike: f64,
        underlyings: Vec<usize>,
        maturity: usize,
    ) -> Result<Self> {
        Self::new(
            label,
            PayoffKind::EuropeanCallOnMin,
            strike,
            underlyings,
            alloc::vec![maturity],
        )
    }

    pub fn call_on_max(
        label: impl Into<String>,
        strike: f64,
        underlyings: Vec<usize>,
        schedule: Vec<usize>,
    ) -> Result<Self> {
        Self::new(
            label,
            PayoffKind::BermudanCallOnMax,
            strike,
            underlyings,
            schedule,
        )
    }

    pub fn european(
        label: impl Into<String>,
        kind: OptionType,
        strike: f64,
        underlying: usize,
        maturity: usize,
    ) -> Result<Self> {
        Self::new(
            label,
            PayoffKind::EuropeanVanilla(kind),
            strike,
            alloc::vec![underlying],
            alloc::vec![maturity],
        )
    }

    pub fn with_regression(mut self, set: RegressionSet) -> Self {
        self.regression = set;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn kind(&self) -> PayoffKind {
        self.kind
    }
    pub fn strike(&self) -> f64 {
        self.strike
    }
    pub fn underlyings(&self) -> &[usize] {
        &self.underlyings
    }
    pub fn exercise_dates(&self) -> &[usize] {
        &self.exercise_dates
    }
    pub fn regression(&self) -> RegressionSet {
        self.regression
    }

    /// Exercise value for a full model state. Indexes `state` without checks.
    #[inline]
    pub fn intrinsic(&self, state: &[f64]) -> f64 {
        let k = self.strike;
        let v = match self.kind {
            PayoffKind::AmericanPut | PayoffKind::EuropeanVanilla(OptionType::Put) => {
                k - state[self.underlyings[0]]
            }
            PayoffKind::EuropeanVanilla(OptionType::Call) => state[self.underlyings[0]] - k,
            PayoffKind::EuropeanCallOnMin => {
                self.underlyings
                    .iter()
                    .map(|&i| state[i])
                    .fold(f64::INFINITY, f64::min)
                    - k
            }
            PayoffKind::BermudanCallOnMax => {
                self.underlyings
                    .iter()
                    .map(|&i| state[i])
                    .fold(f64::NEG_INFINITY, f64::max)
                    - k
            }
        };
        v.max(0.0)
    }

    pub fn is_exercisable(&self, date_index: usize) -> bool {
        self.exercise_dates.binary_search(&date_index).is_ok()
    }
}

/// Checked form of [`Instrument::intrinsic`].
pub fn intrinsic_value(inst: &Instrument, state: &[f64]) -> Result<f64> {
    ensure!(
        inst.underlyings.iter().all(|&i| i < state.len()),
        "{}: state of width {} does not cover underlyings {:?}",
        inst.label,
        state.len(),
        inst.underlyings
    );
    Ok(inst.intrinsic(state))
}

pub fn is_exercisable(inst: &Instrument, date_index: usize) -> bool {
    inst.is_exercisable(date_index)
}

/// Grid indices `step, 2 step, ..., last` (the maturity is always included).
pub fn every(step: usize, last: usize) -> Vec<usize> {
    let step = step.max(1);
    let mut dates: Vec<usize> = (1..=last).filter(|n| n % step == 0).collect();
    if dates.last() != Some(&last) {
        dates.push(last);
    }
    dates
}

/// Instruments sharing one model and one date grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    instruments: Vec<Instrument>,
    grid: TimeGrid,
    params: ModelParams,
    /// `(date, instrument)` exercise flags.
    exercisable: Vec<bool>,
}

impl Portfolio {
    pub fn new(instruments: Vec<Instrument>, grid: TimeGrid, params: ModelParams) -> Result<Self> {
        ensure!(
            !instruments.is_empty(),
            "a portfolio needs at least one instrument"
        );
        let last = grid.last();
        let d = params.n_assets();
        for inst in &instruments {
            ensure!(
                inst.underlyings.iter().all(|&i| i < d),
                "{}: underlying index out of range for {d} assets",
                inst.label
            );
            ensure!(
                inst.exercise_dates.last() == Some(&last),
                "{}: the last exercise date must be the maturity index {last}",
                inst.label
            );
        }
        let k = instruments.len();
        let mut exercisable = alloc::vec![false; (last + 1) * k];
        for (idx, inst) in instruments.iter().enumerate() {
            for &n in &inst.exercise_dates {
                exercisable[n * k + idx] = true;
            }
        }
        Ok(Portfolio {
            instruments,
            grid,
            params,
            exercisable,
        })
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn len(&self) -> usize {
        self.instruments.len()
    }
    pub fn is_empty(&self) -> bool {
        self.instruments.is_empty()
    }

    #[inline]
    pub fn exercisable(&self, n: usize, k: usize) -> bool {
        self.exercisable[n * self.instruments.len() + k]
    }

    /// True when some instrument may be exercised at date `n`.
    pub fn any_exercisable(&self, n: usize) -> bool {
        let k = self.instruments.len();
        self.exercisable[n * k..(n + 1) * k].iter().any(|&b| b)
    }

    /// Same model and grid, a single instrument.
    pub fn single(&self, k: usize) -> Result<Portfolio> {
        let inst =
            self.instruments.get(k).cloned().ok_or_else(|| {
                Error::contract(alloc::format!("instrument index {k} out of range"))
            })?;
        Portfolio::new(alloc::vec![inst], self.grid.clone(), self.params.clone())
    }
}

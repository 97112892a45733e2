//! Uncorrelated multi-asset geometric Brownian motion on a date grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::exec;
use crate::math::{exp, sqrt};
use crate::rng::{fill_normals, Domain, Streams};

/// Risk-neutral GBM parameters, one entry per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    rate: f64,
    dividends: Vec<f64>,
    vols: Vec<f64>,
    spots: Vec<f64>,
}

impl ModelParams {
    pub fn new(rate: f64, dividends: Vec<f64>, vols: Vec<f64>, spots: Vec<f64>) -> Result<Self> {
        let d = spots.len();
        ensure!(d >= 1, "at least one asset is required");
        ensure!(
            dividends.len() == d && vols.len() == d,
            "parameter arrays must share one length (spots {}, dividends {}, vols {})",
            d,
            dividends.len(),
            vols.len()
        );
        ensure!(rate.is_finite(), "rate must be finite");
        for i in 0..d {
            ensure!(
                vols[i].is_finite() && vols[i] >= 0.0,
                "vol[{i}] must be >= 0, got {}",
                vols[i]
            );
            ensure!(dividends[i].is_finite(), "dividend[{i}] must be finite");
            ensure!(
                spots[i].is_finite() && spots[i] > 0.0,
                "spot[{i}] must be > 0, got {}",
                spots[i]
            );
        }
        Ok(ModelParams {
            rate,
            dividends,
            vols,
            spots,
        })
    }

    /// `n` identical assets.
    pub fn uniform(n: usize, rate: f64, dividend: f64, vol: f64, spot: f64) -> Result<Self> {
        Self::new(rate, vec![dividend; n], vec![vol; n], vec![spot; n])
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
    pub fn dividends(&self) -> &[f64] {
        &self.dividends
    }
    pub fn vols(&self) -> &[f64] {
        &self.vols
    }
    pub fn spots(&self) -> &[f64] {
        &self.spots
    }
    pub fn n_assets(&self) -> usize {
        self.spots.len()
    }

    /// Log-drift and diffusion coefficients for a step of length `dt`.
    pub fn step_coeffs(&self, dt: f64) -> StepCoeffs {
        let drift = (0..self.n_assets())
            .map(|i| (self.rate - self.dividends[i] - 0.5 * self.vols[i] * self.vols[i]) * dt)
            .collect();
        let diffusion = self.vols.iter().map(|s| s * sqrt(dt)).collect();
        StepCoeffs { drift, diffusion }
    }
}

/// Precomputed per-asset coefficients of one GBM step.
#[derive(Debug, Clone)]
pub struct StepCoeffs {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl StepCoeffs {
    #[inline]
    pub fn apply(&self, state: &[f64], z: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = state[i] * exp(self.drift[i] + self.diffusion[i] * z[i]);
        }
    }

    #[inline]
    pub fn apply_in_place(&self, state: &mut [f64], z: &[f64]) {
        for i in 0..state.len() {
            state[i] *= exp(self.drift[i] + self.diffusion[i] * z[i]);
        }
    }
}

/// Simulation dates `0 = t_0 < t_1 < ... < t_N = T`, in years.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    dates: Vec<f64>,
}

impl TimeGrid {
    pub fn new(dates: Vec<f64>) -> Result<Self> {
        ensure!(dates.len() >= 2, "a grid needs at least two dates");
        ensure!(
            dates[0] == 0.0,
            "the first grid date must be 0, got {}",
            dates[0]
        );
        for w in dates.windows(2) {
            ensure!(
                w[1].is_finite() && w[1] > w[0],
                "grid dates must increase strictly ({} then {})",
                w[0],
                w[1]
            );
        }
        Ok(TimeGrid { dates })
    }

    /// `steps` equal intervals up to `maturity`.
    pub fn uniform(maturity: f64, steps: usize) -> Result<Self> {
        ensure!(steps >= 1, "a grid needs at least one step");
        ensure!(
            maturity.is_finite() && maturity > 0.0,
            "maturity must be > 0"
        );
        let dates = (0..=steps)
            .map(|n| {
                if n == steps {
                    maturity
                } else {
                    maturity * n as f64 / steps as f64
                }
            })
            .collect();
        Self::new(dates)
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    /// Index of the last date, `N`.
    pub fn last(&self) -> usize {
        self.dates.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        self.dates[self.last()]
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dates[n]
    }

    /// Length of the step from date `n` to date `n + 1`.
    pub fn dt(&self, n: usize) -> f64 {
        self.dates[n + 1] - self.dates[n]
    }

    /// Index of the grid date within `tol` of `t`.
    pub fn find(&self, t: f64, tol: f64) -> Option<usize> {
        self.dates.iter().position(|&d| (d - t).abs() <= tol)
    }
}

/// One GBM step for every asset:
/// `S_i * exp((r - delta_i - sigma_i^2 / 2) dt + sigma_i sqrt(dt) z_i)`.
pub fn gbm_step(state: &[f64], dt: f64, params: &ModelParams, z: &[f64]) -> Result<Vec<f64>> {
    let d = params.n_assets();
    ensure!(
        state.len() == d,
        "state has {} entries, model has {d} assets",
        state.len()
    );
    ensure!(
        z.len() == d,
        "normal vector has {} entries, model has {d} assets",
        z.len()
    );
    ensure!(dt > 0.0, "step length must be > 0, got {dt}");
    ensure!(state.iter().all(|&s| s > 0.0), "prices must be > 0");
    let mut out = vec![0.0; d];
    params.step_coeffs(dt).apply(state, z, &mut out);
    Ok(out)
}

/// Flat-rate discount factor `exp(-r (t2 - t1))`.
pub fn discount(t1: f64, t2: f64, r: f64) -> Result<f64> {
    ensure!(t2 >= t1, "discounting backwards in time ({t1} -> {t2})");
    Ok(exp(-r * (t2 - t1)))
}

/// Outer scenario matrix, laid out path-major: `(path, date, asset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    values: Vec<f64>,
    n_paths: usize,
    n_assets: usize,
    grid: TimeGrid,
    seed: u64,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn n_assets(&self) -> usize {
        self.n_assets
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Prices of every asset on path `j` at date `n`.
    #[inline]
    pub fn state(&self, j: usize, n: usize) -> &[f64] {
        let dates = self.grid.dates.len();
        let start = (j * dates + n) * self.n_assets;
        &self.values[start..start + self.n_assets]
    }

    #[inline]
    pub fn price(&self, j: usize, n: usize, i: usize) -> f64 {
        self.state(j, n)[i]
    }
}

/// Simulate `n_paths` paths over the whole grid from the model spots.
pub fn simulate_paths(
    params: &ModelParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    simulate_paths_in(params, grid, n_paths, seed, Domain::OuterPaths)
}

pub(crate) fn simulate_paths_in(
    params: &ModelParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    domain: Domain,
) -> Result<PathSet> {
    ensure!(n_paths >= 1, "at least one path is required");
    let d = params.n_assets();
    let dates = grid.dates.len();
    let coeffs: Vec<StepCoeffs> = (0..grid.last())
        .map(|n| params.step_coeffs(grid.dt(n)))
        .collect();
    let streams = Streams::new(seed, domain);
    let mut values = vec![0.0; n_paths * dates * d];
    exec::fill_rows(
        &mut values,
        dates * d,
        || vec![0.0; d],
        |z, j, row| {
            let mut rng = streams.stream(j as u64);
            row[..d].copy_from_slice(params.spots());
            for (n, c) in coeffs.iter().enumerate() {
                fill_normals(&mut rng, z);
                let (done, rest) = row.split_at_mut((n + 1) * d);
                c.apply(&done[n * d..], z, &mut rest[..d]);
            }
        },
    );
    Ok(PathSet {
        values,
        n_paths,
        n_assets: d,
        grid: grid.clone(),
        seed,
    })
}

/// `M` one-step continuations of every outer point at one date, laid out
/// `(outer path, inner index, asset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFan {
    values: Vec<f64>,
    n_outer: usize,
    m_count: usize,
    n_assets: usize,
    date_index: usize,
}

impl InnerFan {
    pub fn n_outer(&self) -> usize {
        self.n_outer
    }
    pub fn m_count(&self) -> usize {
        self.m_count
    }
    pub fn n_assets(&self) -> usize {
        self.n_assets
    }
    /// Date the fan starts from; its points live at `date_index + 1`.
    pub fn date_index(&self) -> usize {
        self.date_index
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn state(&self, j: usize, m: usize) -> &[f64] {
        let start = (j * self.m_count + m) * self.n_assets;
        &self.values[start..start + self.n_assets]
    }

    /// All inner points of outer path `j`, `m_count * n_assets` values.
    #[inline]
    pub fn fan_of(&self, j: usize) -> &[f64] {
        let w = self.m_count * self.n_assets;
        &self.values[j * w..(j + 1) * w]
    }
}

/// Launch `m_count` one-step trajectories from every outer point at date `n`
/// to date `n + 1`.
pub fn spawn_inner_fan(
    outer: &PathSet,
    n: usize,
    m_count: usize,
    params: &ModelParams,
    seed: u64,
) -> Result<InnerFan> {
    ensure!(
        n < outer.grid.last(),
        "fan date index {n} must be below the last date {}",
        outer.grid.last()
    );
    ensure!(m_count >= 1, "inner path count must be >= 1");
    ensure!(
        outer.n_assets == params.n_assets(),
        "path set has {} assets, model has {}",
        outer.n_assets,
        params.n_assets()
    );
    let d = params.n_assets();
    let coeffs = params.step_coeffs(outer.grid.dt(n));
    let streams = Streams::new(seed, Domain::InnerFan(n));
    let mut values = vec![0.0; outer.n_paths * m_count * d];
    exec::fill_rows(
        &mut values,
        m_count * d,
        || vec![0.0; d],
        |z, j, row| {
            let mut rng = streams.stream(j as u64);
            let from = outer.state(j, n);
            for slot in row.chunks_mut(d) {
                fill_normals(&mut rng, z);
                coeffs.apply(from, z, slot);
            }
        },
    );
    Ok(InnerFan {
        values,
        n_outer: outer.n_paths,
        m_count,
        n_assets: d,
        date_index: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_vol_step_is_pure_drift() {
        let p = ModelParams::new(0.05, vec![0.03], vec![0.0], vec![1.0]).unwrap();
        let out = gbm_step(&[1.0], 1.0, &p, &[0.0]).unwrap();
        assert!(close(out[0], 0.02f64.exp(), 1e-15));
        assert!(close(out[0], 1.0202, 1e-4));
    }

    #[test]
    fn one_sigma_step_matches_hand_value() {
        // 100 * exp((0.05 - 0.02) * 0.25 + 0.2 * 0.5 * 1) = 100 * exp(0.1075)
        let p = ModelParams::new(0.05, vec![0.0], vec![0.2], vec![100.0]).unwrap();
        let out = gbm_step(&[100.0], 0.25, &p, &[1.0]).unwrap();
        assert!(close(out[0], 111.349_086_074_653_61, 1e-9), "{}", out[0]);
    }

    #[test]
    fn identical_assets_with_r_equal_delta_move_together_down() {
        let p = ModelParams::uniform(3, 0.04, 0.04, 0.2, 1.0).unwrap();
        let out = gbm_step(&[1.0, 1.0, 1.0], 0.5, &p, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(out[1], out[2]);
        assert!(out[0] < 1.0);
    }

    #[test]
    fn step_rejects_dimension_mismatch() {
        let p = ModelParams::uniform(2, 0.05, 0.0, 0.2, 1.0).unwrap();
        assert!(gbm_step(&[1.0], 0.1, &p, &[0.0, 0.0]).is_err());
        assert!(gbm_step(&[1.0, 1.0], 0.1, &p, &[0.0]).is_err());
        assert!(gbm_step(&[1.0, 1.0], 0.0, &p, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn model_and_grid_validation() {
        assert!(ModelParams::new(0.05, vec![0.0], vec![-0.1], vec![1.0]).is_err());
        assert!(ModelParams::new(0.05, vec![0.0, 0.0], vec![0.1], vec![1.0]).is_err());
        assert!(ModelParams::new(0.05, vec![], vec![], vec![]).is_err());
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.5]).is_err());
        let g = TimeGrid::uniform(1.0, 12).unwrap();
        assert_eq!(g.last(), 12);
        assert_eq!(g.maturity(), 1.0);
        assert_eq!(g.find(0.5, 1e-9), Some(6));
        assert_eq!(g.find(0.51, 1e-9), None);
    }

    #[test]
    fn discount_properties() {
        assert_eq!(discount(0.0, 0.0, 0.05).unwrap(), 1.0);
        assert!(close(
            discount(0.0, 1.0, 0.05).unwrap(),
            0.951_229_424_500_714,
            1e-15
        ));
        let a = discount(0.0, 0.5, 0.05).unwrap() * discount(0.5, 1.0, 0.05).unwrap();
        assert!(close(a, discount(0.0, 1.0, 0.05).unwrap(), 1e-15));
        assert!(discount(1.0, 0.5, 0.05).is_err());
    }

    #[test]
    fn single_deterministic_path() {
        let p = ModelParams::new(0.05, vec![0.01], vec![0.0], vec![2.0]).unwrap();
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let ps = simulate_paths(&p, &g, 1, 9).unwrap();
        for n in 0..=4 {
            let expected = 2.0 * (0.04 * g.time(n)).exp();
            assert!(close(ps.price(0, n, 0), expected, 1e-14));
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = ModelParams::uniform(2, 0.05, 0.01, 0.3, 1.0).unwrap();
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let a = simulate_paths(&p, &g, 100, 3).unwrap();
        let b = simulate_paths(&p, &g, 100, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(&p, &g, 100, 4).unwrap();
        assert_ne!(a.values(), c.values());
        // A prefix of paths does not depend on the total count.
        let small = simulate_paths(&p, &g, 10, 3).unwrap();
        assert_eq!(small.state(9, 5), a.state(9, 5));
    }

    #[test]
    fn fan_zero_vol_is_drift_of_outer_point() {
        let p = ModelParams::new(0.05, vec![0.0], vec![0.0], vec![1.0]).unwrap();
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let outer = simulate_paths(&p, &g, 3, 1).unwrap();
        let fan = spawn_inner_fan(&outer, 1, 1, &p, 2).unwrap();
        for j in 0..3 {
            assert!(close(
                fan.state(j, 0)[0],
                outer.price(j, 1, 0) * (0.05f64 * 0.5).exp(),
                1e-14
            ));
        }
        assert!(spawn_inner_fan(&outer, 2, 1, &p, 2).is_err());
        assert!(spawn_inner_fan(&outer, 0, 0, &p, 2).is_err());
    }

    #[test]
    fn fan_is_deterministic() {
        let p = ModelParams::uniform(2, 0.05, 0.0, 0.2, 1.0).unwrap();
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        let outer = simulate_paths(&p, &g, 20, 1).unwrap();
        let a = spawn_inner_fan(&outer, 1, 8, &p, 5).unwrap();
        let b = spawn_inner_fan(&outer, 1, 8, &p, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_increment_moments() {
        let (r, q, s) = (0.05, 0.02, 0.25);
        let p = ModelParams::new(r, vec![q], vec![s], vec![1.0]).unwrap();
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let n = 100_000;
        let ps = simulate_paths(&p, &g, n, 11).unwrap();
        let dt = 0.25;
        let incs: Vec<f64> = (0..n)
            .map(|j| ln(ps.price(j, 2, 0) / ps.price(j, 1, 0)))
            .collect();
        let mean = incs.iter().sum::<f64>() / n as f64;
        let var = incs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let mu = (r - q - 0.5 * s * s) * dt;
        let v = s * s * dt;
        assert!((mean - mu).abs() < 3.0 * (v / n as f64).sqrt());
        // Var of the sample variance for normal data is 2 v^2 / (n - 1).
        assert!((var - v).abs() < 3.0 * (2.0 * v * v / (n - 1) as f64).sqrt());
    }
}

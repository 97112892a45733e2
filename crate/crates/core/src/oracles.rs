//! Reference prices that share no code with the neural pricing stack:
//! lattice, closed forms, brute-force Monte Carlo, and the small-step
//! extrapolation used for Bermudan series.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::exec;
use crate::instruments::OptionType;
use crate::market::ModelParams;
use crate::math::{exp, ln, mean_stderr, norm_cdf, sqrt};
use crate::rng::{fill_normals, Domain, Streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Binomial,
    ClosedForm,
    MonteCarlo,
    Extrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub price: f64,
    pub method: Method,
    /// Tree steps or Monte Carlo paths.
    pub resolution: usize,
    pub stderr: Option<f64>,
}

/// When the lattice may exercise early.
#[derive(Debug, Clone, PartialEq)]
pub enum ExerciseSchedule {
    /// Every tree level.
    Continuous,
    /// Only the levels nearest to these times (years).
    Dates(Vec<f64>),
}

/// Black-Scholes-Merton price with continuous dividend yield.
pub fn black_scholes(s0: f64, k: f64, r: f64, q: f64, sigma: f64, t: f64, kind: OptionType) -> f64 {
    let fwd_s = s0 * exp(-q * t);
    let fwd_k = k * exp(-r * t);
    let sd = sigma * sqrt(t);
    if sd <= 0.0 {
        return match kind {
            OptionType::Call => (fwd_s - fwd_k).max(0.0),
            OptionType::Put => (fwd_k - fwd_s).max(0.0),
        };
    }
    let d1 = (ln(fwd_s / fwd_k) + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match kind {
        OptionType::Call => fwd_s * norm_cdf(d1) - fwd_k * norm_cdf(d2),
        OptionType::Put => fwd_k * norm_cdf(-d2) - fwd_s * norm_cdf(-d1),
    }
}

/// Put on a recombining `u = exp(sigma sqrt(dt))` lattice. The last step is
/// valued with the closed form European put, which removes the odd-even
/// oscillation of the plain lattice.
pub fn binomial_put(
    s0: f64,
    k: f64,
    r: f64,
    q: f64,
    sigma: f64,
    t: f64,
    steps: usize,
    schedule: &ExerciseSchedule,
) -> Result<OracleResult> {
    ensure!(steps >= 1, "tree_steps must be >= 1");
    ensure!(
        s0 > 0.0 && k > 0.0 && t > 0.0 && sigma >= 0.0,
        "invalid put parameters"
    );
    let dt = t / steps as f64;
    let mut exercise = vec![false; steps + 1];
    match schedule {
        ExerciseSchedule::Continuous => exercise.iter_mut().for_each(|e| *e = true),
        ExerciseSchedule::Dates(dates) => {
            for &d in dates {
                ensure!(
                    d > 0.0 && d <= t + 1e-12,
                    "exercise date {d} outside (0, {t}]"
                );
                let level = libm::round(d / dt) as usize;
                exercise[level.clamp(1, steps)] = true;
            }
        }
    }
    exercise[steps] = true;

    if sigma == 0.0 {
        // deterministic forward path
        let best = (0..=steps)
            .filter(|&i| exercise[i])
            .map(|i| {
                let ti = dt * i as f64;
                exp(-r * ti) * (k - s0 * exp((r - q) * ti)).max(0.0)
            })
            .fold(0.0, f64::max);
        return Ok(OracleResult {
            price: best,
            method: Method::Binomial,
            resolution: steps,
            stderr: None,
        });
    }

    let u = exp(sigma * sqrt(dt));
    let d = 1.0 / u;
    let p = (exp((r - q) * dt) - d) / (u - d);
    ensure!(
        p > 0.0 && p < 1.0,
        "tree too coarse: risk-neutral probability {p} outside (0, 1)"
    );
    let disc = exp(-r * dt);
    let (pu, pd) = (disc * p, disc * (1.0 - p));

    let level = steps - 1;
    let mut values: Vec<f64> = (0..=level)
        .map(|j| {
            let s = s0 * libm::pow(u, level as f64 - 2.0 * j as f64);
            let cont = black_scholes(s, k, r, q, sigma, dt, OptionType::Put);
            if exercise[level] {
                cont.max(k - s)
            } else {
                cont
            }
        })
        .collect();
    for i in (0..level).rev() {
        let top = s0 * libm::pow(u, i as f64);
        let mut s = top;
        let d2 = d * d;
        for j in 0..=i {
            let cont = pu * values[j] + pd * values[j + 1];
            values[j] = if exercise[i] { cont.max(k - s) } else { cont };
            s *= d2;
        }
        values.truncate(i + 1);
    }
    Ok(OracleResult {
        price: values[0],
        method: Method::Binomial,
        resolution: steps,
        stderr: None,
    })
}

/// Standard bivariate normal CDF `P(X < a, Y < b)` with correlation `rho`
/// (Genz's adaptation of the Drezner-Wesolowsky method, ~1e-15 accuracy).
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    bvn_upper(-a, -b, rho)
}

fn bvn_upper(dh: f64, dk: f64, r: f64) -> f64 {
    use core::f64::consts::TAU;
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return if dk == f64::NEG_INFINITY {
            1.0
        } else {
            norm_cdf(-dk)
        };
    }
    if dk == f64::NEG_INFINITY {
        return norm_cdf(-dh);
    }
    if r == 0.0 {
        return norm_cdf(-dh) * norm_cdf(-dk);
    }
    const W6: [f64; 3] = [
        0.171_324_492_379_170_5,
        0.360_761_573_048_138_4,
        0.467_913_934_572_690_4,
    ];
    const X6: [f64; 3] = [
        0.932_469_514_203_152_2,
        0.661_209_386_466_264_7,
        0.238_619_186_083_197,
    ];
    const W12: [f64; 6] = [
        0.047_175_336_386_511_77,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
    ];
    const X12: [f64; 6] = [
        0.981_560_634_246_719_1,
        0.904_117_256_370_475,
        0.769_902_674_194_305,
        0.587_317_954_286_617_1,
        0.367_831_498_998_180_2,
        0.125_233_408_511_469_2,
    ];
    const W20: [f64; 10] = [
        0.017_614_007_139_152_12,
        0.040_601_429_800_386_94,
        0.062_672_048_334_109_06,
        0.083_276_741_576_704_75,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ];
    const X20: [f64; 10] = [
        0.993_128_599_185_094_9,
        0.963_971_927_277_913_8,
        0.912_234_428_251_325_9,
        0.839_116_971_822_218_8,
        0.746_331_906_460_150_8,
        0.636_053_680_726_515,
        0.510_867_001_950_827_1,
        0.373_706_088_715_419_6,
        0.227_785_851_141_645_1,
        0.076_526_521_133_497_33,
    ];
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&W6, &X6)
    } else if r.abs() < 0.75 {
        (&W12, &X12)
    } else {
        (&W20, &X20)
    };
    // nodes 1 - x and 1 + x on (0, 2)
    let nodes = || {
        w.iter()
            .zip(x)
            .flat_map(|(&wi, &xi)| [(wi, 1.0 - xi), (wi, 1.0 + xi)])
    };

    let (h, mut k) = (dh, dk);
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = libm::asin(r) / 2.0;
        for (wi, xi) in nodes() {
            let sn = libm::sin(asr * xi);
            bvn += wi * exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        bvn = bvn * asr / TAU + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = sqrt(as_);
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * exp(asr)
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = sqrt(bs);
                let sp = sqrt(TAU) * norm_cdf(-b / a);
                bvn -= exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut sum = 0.0;
            for (wi, xi) in nodes() {
                let xs = (a * xi) * (a * xi);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = sqrt(1.0 - xs);
                    let ep = exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                    sum += wi * exp(asr) * (sp - ep);
                }
            }
            bvn = (a * sum - bvn) / TAU;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// European call on the minimum of two lognormal assets (Stulz), `k >= 0`.
#[allow(clippy::too_many_arguments)]
pub fn call_on_min_closed_form(
    s1: f64,
    s2: f64,
    k: f64,
    r: f64,
    q1: f64,
    q2: f64,
    v1: f64,
    v2: f64,
    rho: f64,
    t: f64,
) -> f64 {
    let (b1, b2) = (r - q1, r - q2);
    let st = sqrt(t);
    let sigma = sqrt(v1 * v1 + v2 * v2 - 2.0 * rho * v1 * v2);
    let y1 = (ln(s1 / k) + (b1 + 0.5 * v1 * v1) * t) / (v1 * st);
    let y2 = (ln(s2 / k) + (b2 + 0.5 * v2 * v2) * t) / (v2 * st);
    let d = (ln(s1 / s2) + (b1 - b2 + 0.5 * sigma * sigma) * t) / (sigma * st);
    let rho1 = (v1 - rho * v2) / sigma;
    let rho2 = (v2 - rho * v1) / sigma;
    let strike_leg = if k == 0.0 {
        0.0
    } else {
        k * exp(-r * t) * bivariate_normal_cdf(y1 - v1 * st, y2 - v2 * st, rho)
    };
    s1 * exp(-q1 * t) * bivariate_normal_cdf(y1, -d, -rho1)
        + s2 * exp(-q2 * t) * bivariate_normal_cdf(y2, d - sigma * st, -rho2)
        - strike_leg
}

/// Brute-force Monte Carlo for any payoff of the terminal state, one step
/// from the model spots to `t`.
pub fn dense_mc_european<F>(
    payoff: F,
    params: &ModelParams,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<OracleResult>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    ensure!(n_paths >= 2, "at least two paths are required");
    ensure!(t > 0.0, "maturity must be > 0");
    let d = params.n_assets();
    let r = params.rate();
    let drift: Vec<f64> = (0..d)
        .map(|i| {
            let v = params.vols()[i];
            (r - params.dividends()[i] - 0.5 * v * v) * t
        })
        .collect();
    let diffusion: Vec<f64> = params.vols().iter().map(|v| v * sqrt(t)).collect();
    let df = exp(-params.rate() * t);
    let streams = Streams::new(seed, Domain::DenseMc);
    let mut values = vec![0.0; n_paths];
    exec::fill_rows(
        &mut values,
        1,
        || (vec![0.0; d], vec![0.0; d]),
        |(z, s), j, slot| {
            let mut rng = streams.stream(j as u64);
            fill_normals(&mut rng, z);
            for i in 0..d {
                s[i] = params.spots()[i] * exp(drift[i] + diffusion[i] * z[i]);
            }
            slot[0] = df * payoff(s);
        },
    );
    let (mean, se) = mean_stderr(&values);
    Ok(OracleResult {
        price: mean,
        method: Method::MonteCarlo,
        resolution: n_paths,
        stderr: Some(se),
    })
}

/// Ordinary least-squares intercept of `(dt, price)` points: the price at
/// `dt = 0`.
pub fn extrapolate_dt_zero(points: &[(f64, f64)]) -> Result<f64> {
    ensure!(points.len() >= 2, "need at least two points");
    ensure!(
        points.iter().any(|p| p.0 != points[0].0),
        "need at least two distinct step sizes"
    );
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(my - sxy / sxx * mx)
}

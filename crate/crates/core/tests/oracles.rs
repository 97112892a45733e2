use lsmnet_core::instruments::OptionType;
use lsmnet_core::oracles::{
    binomial_put, black_scholes, call_on_min_closed_form, dense_mc_european, extrapolate_dt_zero,
    ExerciseSchedule,
};
use lsmnet_core::ModelParams;

fn put(s0: f64, q: f64, steps: usize, schedule: &ExerciseSchedule) -> f64 {
    binomial_put(s0, 100.0, 0.05, q, 0.2, 1.0, steps, schedule)
        .unwrap()
        .price
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn american_put_reference_values() {
    let p = put(100.0, 0.0, 20_000, &ExerciseSchedule::Continuous);
    assert!((p - 6.089).abs() <= 0.002, "{p}");
    let p = put(90.0, 0.03, 20_000, &ExerciseSchedule::Continuous);
    assert!((p - 12.384).abs() <= 0.003, "{p}");
}

#[test]
fn lattice_refinement_converges() {
    for &(s0, q) in &[(100.0, 0.0), (90.0, 0.0), (110.0, 0.0), (90.0, 0.03)] {
        let prices: Vec<f64> = [1000, 2000, 4000, 8000, 16000]
            .iter()
            .map(|&n| put(s0, q, n, &ExerciseSchedule::Continuous))
            .collect();
        let diffs: Vec<f64> = prices.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in diffs.windows(2) {
            assert!(w[1] < w[0], "s0 {s0} q {q}: {diffs:?}");
        }
    }
}

#[test]
fn bermudan_put_is_below_american() {
    let american = put(100.0, 0.0, 5200, &ExerciseSchedule::Continuous);
    let mut last = 0.0;
    for per_year in [6, 12, 26, 52] {
        let dates = (1..=per_year).map(|i| i as f64 / per_year as f64).collect();
        let b = put(100.0, 0.0, 5200, &ExerciseSchedule::Dates(dates));
        assert!(b <= american && b > last, "{per_year}: {b} vs {american}");
        last = b;
    }
    let european = black_scholes(100.0, 100.0, 0.05, 0.0, 0.2, 1.0, OptionType::Put);
    let only_maturity = put(100.0, 0.0, 5200, &ExerciseSchedule::Dates(vec![1.0]));
    assert!((only_maturity - european).abs() < 1e-3);
}

#[test]
fn black_scholes_put_against_quadrature() {
    let (s0, k, r, v, t): (f64, f64, f64, f64, f64) = (100.0, 100.0, 0.05, 0.2, 1.0);
    let mu = (r - 0.5 * v * v) * t;
    let sd = v * f64::sqrt(t);
    let z_star = ((k / s0).ln() - mu) / sd;
    let integral = simpson(
        |z| (k - s0 * (mu + sd * z).exp()) * norm_pdf(z),
        -12.0,
        z_star,
        200_000,
    );
    let quad = (-r * t).exp() * integral;
    let bs = black_scholes(s0, k, r, 0.0, v, t, OptionType::Put);
    assert!((bs - quad).abs() < 1e-9, "{bs} vs {quad}");
    assert!((bs - 5.573_526_022_256_971).abs() < 1e-12);
}

#[test]
fn call_on_min_limits() {
    // zero strike: expected discounted minimum, against brute force
    let params = ModelParams::new(0.05, vec![0.03, 0.03], vec![0.2, 0.2], vec![1.0, 1.0]).unwrap();
    let closed = call_on_min_closed_form(1.0, 1.0, 0.0, 0.05, 0.03, 0.03, 0.2, 0.2, 0.0, 1.0);
    let mc = dense_mc_european(|s| s[0].min(s[1]), &params, 1.0, 10_000_000, 11).unwrap();
    let se = mc.stderr.unwrap();
    assert!(
        (closed - mc.price).abs() < 3.0 * se,
        "{closed} vs {} ± {se}",
        mc.price
    );

    // second asset certain to finish far above the first
    let degenerate =
        call_on_min_closed_form(100.0, 1e9, 95.0, 0.05, 0.01, 0.0, 0.3, 1e-8, 0.0, 2.0);
    let bs = black_scholes(100.0, 95.0, 0.05, 0.01, 0.3, 2.0, OptionType::Call);
    assert!((degenerate - bs).abs() < 1e-9, "{degenerate} vs {bs}");

    let a = call_on_min_closed_form(1.1, 0.95, 0.9, 0.04, 0.01, 0.02, 0.25, 0.15, 0.3, 1.5);
    let b = call_on_min_closed_form(0.95, 1.1, 0.9, 0.04, 0.02, 0.01, 0.15, 0.25, 0.3, 1.5);
    assert!((a - b).abs() < 1e-13);
}

#[test]
fn call_on_min_one_year_value() {
    // unit spots, strike 0.9, 3% dividends, 20% vols, uncorrelated
    let c = call_on_min_closed_form(1.0, 1.0, 0.9, 0.05, 0.03, 0.03, 0.2, 0.2, 0.0, 1.0);
    assert!((c - 0.058_758).abs() < 5e-6, "{c}");
}

#[test]
fn dense_mc_examples() {
    let params = ModelParams::uniform(1, 0.05, 0.0, 0.2, 100.0).unwrap();
    let mc = dense_mc_european(|s| (s[0] - 100.0).max(0.0), &params, 1.0, 1_000_000, 3).unwrap();
    let bs = black_scholes(100.0, 100.0, 0.05, 0.0, 0.2, 1.0, OptionType::Call);
    assert!((mc.price - bs).abs() < 3.0 * mc.stderr.unwrap());

    let c = dense_mc_european(|_| 2.5, &params, 1.0, 1000, 3).unwrap();
    assert_eq!(c.price, 2.5 * (-0.05f64).exp());
    assert_eq!(c.stderr, Some(0.0));
}

#[test]
fn call_on_max_against_quadrature() {
    // P(max < m) = prod_i F_i(m) for independent lognormals
    let (s0, k, r, q, v, t): (f64, f64, f64, f64, f64, f64) = (90.0, 100.0, 0.05, 0.1, 0.2, 3.0);
    let params = ModelParams::uniform(3, r, q, v, s0).unwrap();
    let mu = s0.ln() + (r - q - 0.5 * v * v) * t;
    let sd = v * f64::sqrt(t);
    let cdf = |m: f64| 0.5 * libm::erfc(-((m.ln() - mu) / sd) / std::f64::consts::SQRT_2);
    let tail = simpson(|m| 1.0 - cdf(m).powi(3), k, 2000.0, 400_000);
    let exact = (-r * t).exp() * tail;
    let mc = dense_mc_european(
        |s| (s.iter().cloned().fold(0.0, f64::max) - k).max(0.0),
        &params,
        t,
        2_000_000,
        5,
    )
    .unwrap();
    let se = mc.stderr.unwrap();
    assert!(
        (mc.price - exact).abs() < 3.0 * se,
        "{} ± {se} vs {exact}",
        mc.price
    );
}

#[test]
fn extrapolation_of_published_series() {
    let series = [
        (1.0 / 6.0, 5.997),
        (1.0 / 12.0, 6.041),
        (1.0 / 26.0, 6.066),
        (1.0 / 52.0, 6.075),
    ];
    let at_zero = extrapolate_dt_zero(&series).unwrap();
    assert!((at_zero - 6.086).abs() < 1e-3, "{at_zero}");
    assert!(extrapolate_dt_zero(&[(0.1, 6.0), (0.1, 6.1), (0.1, 6.2)]).is_err());
}

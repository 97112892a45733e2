use lsmnet_core::instruments::{every, OptionType};
use lsmnet_core::lsm::{self, Next};
use lsmnet_core::market::{self, spawn_inner_fan};
use lsmnet_core::nn::{Interpolator, Network};
use lsmnet_core::oracles::black_scholes;
use lsmnet_core::pnl::{self, Series};
use lsmnet_core::pricer;
use lsmnet_core::*;

fn quick_config(outer: usize, seed: u64) -> LsmConfig {
    let mut cfg = LsmConfig {
        outer_paths: outer,
        inner_paths: 16,
        seed,
        ..Default::default()
    };
    cfg.train.seed = seed;
    cfg
}

/// An interpolator whose outputs are the given constants.
fn constant(d: usize, values: &[f64]) -> Interpolator {
    let net = Network::zeros(vec![d, 3, values.len()], Activation::Sigmoid).unwrap();
    Interpolator::new(
        net,
        vec![0.0; d],
        vec![1.0; d],
        values.to_vec(),
        vec![1.0; values.len()],
    )
    .unwrap()
}

fn mixed_portfolio() -> Portfolio {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::new(0.05, vec![0.0, 0.03], vec![0.2, 0.2], vec![1.0, 1.0]).unwrap();
    let put = Instrument::american_put("put", 1.0, 0, every(1, 4)).unwrap();
    let cmin = Instrument::call_on_min("cmin", 0.9, vec![0, 1], 4).unwrap();
    let cmax = Instrument::call_on_max("cmax", 1.0, vec![0, 1], every(2, 4)).unwrap();
    Portfolio::new(vec![put, cmin, cmax], grid, params).unwrap()
}

#[test]
fn terminal_value_examples() {
    let pf = mixed_portfolio();
    assert_eq!(
        lsm::terminal_values(&pf, &[0.8, 1.5]).unwrap(),
        vec![0.19999999999999996, 0.0, 0.5]
    );
    let v = lsm::terminal_values(&pf, &[1.0, 1.0]).unwrap();
    assert!((v[1] - 0.1).abs() < 1e-15 && v[2] == 0.0);
    assert_eq!(lsm::terminal_values(&pf, &[0.9, 0.99]).unwrap()[2], 0.0);
}

#[test]
fn one_step_value_examples() {
    let pf = mixed_portfolio();
    let state = [0.7, 1.2];
    // at maturity the next value is the payoff
    assert_eq!(
        lsm::one_step_value(&pf, 4, &state, Next::Terminal).unwrap(),
        lsm::terminal_values(&pf, &state).unwrap()
    );
    // date 2: the put and the max-call may exercise, the min-call may not
    let c = constant(2, &[0.1, 0.07, 0.05]);
    let v = lsm::one_step_value(&pf, 2, &state, Next::Network(&c)).unwrap();
    assert!((v[0] - 0.3).abs() < 1e-12);
    assert!((v[1] - 0.07).abs() < 1e-12);
    assert!((v[2] - 0.2).abs() < 1e-12);
    // date 1: no max-call exercise, so pure continuation
    let v = lsm::one_step_value(&pf, 1, &[2.0, 2.0], Next::Network(&c)).unwrap();
    assert!((v[1] - 0.07).abs() < 1e-12 && (v[2] - 0.05).abs() < 1e-12);
    assert!(lsm::one_step_value(&pf, 2, &state, Next::Terminal).is_err());
}

#[test]
fn deterministic_targets() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, 0.05, 0.0, 0.0, 100.0).unwrap();
    let put = Instrument::american_put("put", 110.0, 0, every(1, 4)).unwrap();
    let pf = Portfolio::new(vec![put], grid.clone(), params.clone()).unwrap();
    let outer = market::simulate_paths(&params, &grid, 8, 1).unwrap();
    let fan = spawn_inner_fan(&outer, 3, 1, &params, 2).unwrap();
    let data = lsm::regression_targets(&pf, &outer, 3, &fan, Next::Terminal).unwrap();
    let expected = (-0.05 * 0.25f64).exp() * (110.0 - 100.0 * (0.05f64).exp());
    for (&t, x) in data.targets().iter().zip(data.inputs()) {
        assert!((t - expected).abs() < 1e-12);
        assert!((x - 100.0 * (0.05f64 * 0.75).exp()).abs() < 1e-9);
    }

    // far out-of-the-money with no volatility: nothing ever pays
    let call = Instrument::european("call", OptionType::Call, 1e6, 0, 4).unwrap();
    let pf = Portfolio::new(vec![call], grid, params).unwrap();
    let fan = spawn_inner_fan(&outer, 2, 4, pf.params(), 2).unwrap();
    let data =
        lsm::regression_targets(&pf, &outer, 2, &fan, Next::Network(&constant(1, &[0.0]))).unwrap();
    assert!(data.targets().iter().all(|&t| t == 0.0));
}

#[test]
fn large_fan_targets_match_black_scholes() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, 0.05, 0.0, 0.2, 100.0).unwrap();
    let call = Instrument::european("call", OptionType::Call, 100.0, 0, 4).unwrap();
    let pf = Portfolio::new(vec![call], grid.clone(), params.clone()).unwrap();
    let outer = market::simulate_paths(&params, &grid, 6, 3).unwrap();
    let m = 40_000;
    let fan = spawn_inner_fan(&outer, 3, m, &params, 4).unwrap();
    let data = lsm::regression_targets(&pf, &outer, 3, &fan, Next::Terminal).unwrap();
    let df = (-0.05 * 0.25f64).exp();
    for j in 0..6 {
        let s = outer.price(j, 3, 0);
        let payoffs: Vec<f64> = (0..m)
            .map(|i| df * (fan.state(j, i)[0] - 100.0).max(0.0))
            .collect();
        let mean = payoffs.iter().sum::<f64>() / m as f64;
        let sd = (payoffs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
        let bs = black_scholes(s, 100.0, 0.05, 0.0, 0.2, 0.25, OptionType::Call);
        assert!(
            (data.targets()[j] - bs).abs() < 3.0 * sd / (m as f64).sqrt(),
            "path {j}: {} vs {bs}",
            data.targets()[j]
        );
    }
}

#[test]
fn european_call_network_reproduces_black_scholes() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, 0.05, 0.0, 0.2, 100.0).unwrap();
    let call = Instrument::european("call", OptionType::Call, 100.0, 0, 4).unwrap();
    let pf = Portfolio::new(vec![call], grid.clone(), params.clone()).unwrap();
    let policy = lsm::train_policy(&pf, &quick_config(20_000, 5)).unwrap();
    let states = market::simulate_paths(&params, &grid, 2000, 99).unwrap();
    let c1 = policy.interpolator(1).unwrap();
    let mut sq = 0.0;
    for j in 0..2000 {
        let s = states.price(j, 1, 0);
        let bs = black_scholes(s, 100.0, 0.05, 0.0, 0.2, 0.75, OptionType::Call);
        sq += (c1.evaluate(&[s]).unwrap()[0] - bs).powi(2);
    }
    let rms = (sq / 2000.0).sqrt();
    let price = black_scholes(100.0, 100.0, 0.05, 0.0, 0.2, 1.0, OptionType::Call);
    assert!(rms < 0.01 * price, "rms {rms} vs price {price}");

    // policy is irrelevant for a European claim
    let priced = pricer::price_with_policy(&policy, 200_000, 6).unwrap();
    assert!((priced.prices[0] - price).abs() < 3.0 * priced.stderrs[0]);
    let backward = pricer::backward_estimate(&policy, 200_000, 7).unwrap();
    assert!(
        (backward[0] - priced.prices[0]).abs() < 0.02 * price,
        "{} vs {}",
        backward[0],
        priced.prices[0]
    );
}

#[test]
fn zero_volatility_continuation_is_deterministic() {
    let (r, k, s0) = (0.05, 110.0, 100.0);
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, r, 0.0, 0.0, s0).unwrap();
    let put = Instrument::american_put("put", k, 0, every(1, 4)).unwrap();
    let pf = Portfolio::new(vec![put], grid, params).unwrap();
    let policy = lsm::train_policy(&pf, &quick_config(500, 1)).unwrap();
    // backward recursion on the single deterministic path
    let s = |n: usize| s0 * (r * n as f64 / 4.0).exp();
    let df = (-r / 4.0f64).exp();
    let mut next = (k - s(4)).max(0.0);
    for n in (1..4).rev() {
        let cont = df * next;
        let got = policy.interpolator(n).unwrap().evaluate(&[s(n)]).unwrap()[0];
        assert!(
            (got - cont).abs() < 1e-3 * cont,
            "date {n}: {got} vs {cont}"
        );
        next = cont.max(k - s(n));
    }

    // a put struck below the forward never pays
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, r, 0.0, 0.0, s0).unwrap();
    let put = Instrument::american_put("otm", 90.0, 0, every(1, 4)).unwrap();
    let pf = Portfolio::new(vec![put], grid, params).unwrap();
    let policy = lsm::train_policy(&pf, &quick_config(200, 1)).unwrap();
    let res = pricer::price_with_policy(&policy, 10_000, 2).unwrap();
    assert_eq!(res.prices[0], 0.0);
    assert_eq!(res.stderrs[0], 0.0);
    assert_eq!(pricer::backward_estimate(&policy, 1000, 3).unwrap()[0], 0.0);
}

#[test]
fn training_and_pricing_are_reproducible() {
    let pf = mixed_portfolio();
    let a = lsm::train_policy(&pf, &quick_config(2000, 8)).unwrap();
    let b = lsm::train_policy(&pf, &quick_config(2000, 8)).unwrap();
    for ((n, x), (_, y)) in a.interpolators().zip(b.interpolators()) {
        assert_eq!(x, y, "date {n}");
    }
    let pa = pricer::price_with_policy(&a, 20_000, 1).unwrap();
    let pb = pricer::price_with_policy(&b, 20_000, 1).unwrap();
    assert_eq!(pa, pb);
    let c = lsm::train_policy(&pf, &quick_config(2000, 9)).unwrap();
    assert_ne!(a.interpolator(1), c.interpolator(1));
}

#[test]
fn horizon_values_and_pnl_structure() {
    let pf = mixed_portfolio();
    let policy = lsm::train_policy(&pf, &quick_config(4000, 3)).unwrap();
    let baseline = pricer::price_with_policy(&policy, 50_000, 4)
        .unwrap()
        .prices;

    let zero = pnl::build_pnl(&policy, &baseline, 0, 100, 5).unwrap();
    assert!(zero.samples(Series::Portfolio).iter().all(|&x| x == 0.0));

    let dist = pnl::build_pnl(&policy, &baseline, 2, 20_000, 5).unwrap();
    for j in 0..dist.n_paths() {
        let sum = (0..3)
            .map(|k| dist.sample(j, Series::Asset(k)))
            .fold(0.0, |a, b| a + b);
        assert_eq!(sum.to_bits(), dist.sample(j, Series::Portfolio).to_bits());
    }
    let again = pnl::build_pnl(&policy, &baseline, 2, 20_000, 5).unwrap();
    assert_eq!(
        dist.samples(Series::Portfolio),
        again.samples(Series::Portfolio)
    );

    // tower property: discounted horizon value has mean close to the baseline
    for k in 0..3 {
        let xs = dist.samples(Series::Asset(k));
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        assert!(
            mean.abs() < 3.0 * se + 0.01 * baseline[k],
            "claim {k}: mean {mean} se {se}"
        );
    }

    let tables = pnl::export_cdf(&dist);
    assert_eq!(tables.len(), 4);
    assert_eq!(tables[3].label, "portfolio");
    for t in &tables {
        assert!(t
            .rows
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(t.rows.last().unwrap().1, 1.0);
    }
}

#[test]
fn exercised_claims_become_cash() {
    // a put this deep in the money is exercised at the first date
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, 0.05, 0.0, 0.2, 100.0).unwrap();
    let put = Instrument::american_put("deep", 1000.0, 0, every(1, 4)).unwrap();
    let pf = Portfolio::new(vec![put], grid, params).unwrap();
    let policy = lsm::train_policy(&pf, &quick_config(2000, 2)).unwrap();
    let accrued = (1000.0 - 95.0) * (0.05f64 * 0.25).exp();
    for s2 in [50.0, 100.0, 150.0] {
        let v = pnl::horizon_value(&policy, &[100.0, 95.0, s2], 2, 0).unwrap();
        assert!((v - accrued).abs() < 1e-9, "{v} vs {accrued}");
    }
    assert!(pnl::horizon_value(&policy, &[100.0], 0, 0).is_err());

    // the European min-call is never exercised early: always the network value
    let pf = mixed_portfolio();
    let policy = lsm::train_policy(&pf, &quick_config(2000, 2)).unwrap();
    let hist = [1.0, 1.0, 0.5, 1.6, 0.4, 1.9];
    let v = pnl::horizon_value(&policy, &hist, 2, 1).unwrap();
    let c2 = policy
        .interpolator(2)
        .unwrap()
        .evaluate(&[0.4, 1.9])
        .unwrap()[1]
        .max(0.0);
    assert_eq!(v, c2);
}

#[test]
fn zero_volatility_european_pnl_is_flat() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let params = ModelParams::uniform(1, 0.05, 0.0, 0.0, 100.0).unwrap();
    let call = Instrument::european("call", OptionType::Call, 95.0, 0, 4).unwrap();
    let pf = Portfolio::new(vec![call], grid, params).unwrap();
    let policy = lsm::train_policy(&pf, &quick_config(500, 1)).unwrap();
    let baseline = pricer::price_with_policy(&policy, 1000, 2).unwrap().prices;
    let dist = pnl::build_pnl(&policy, &baseline, 2, 1000, 3).unwrap();
    let xs = dist.sorted(Series::Portfolio);
    assert_eq!(xs[0], xs[xs.len() - 1]);
    let exact = 100.0 - 95.0 * (-0.05f64).exp();
    assert!((baseline[0] - exact).abs() < 1e-12);
    assert!(xs[0].abs() < 1e-3 * exact, "{}", xs[0]);
}

#[test]
fn joint_and_separate_training_agree() {
    let pf = mixed_portfolio();
    let joint = lsm::train_policy(&pf, &quick_config(5000, 4)).unwrap();
    let jp = pricer::price_with_policy(&joint, 100_000, 9).unwrap();
    for k in 0..3 {
        let alone = lsm::train_policy(&pf.single(k).unwrap(), &quick_config(5000, 4)).unwrap();
        let sp = pricer::price_with_policy(&alone, 100_000, 9).unwrap();
        let se = (jp.stderrs[k].powi(2) + sp.stderrs[0].powi(2)).sqrt();
        assert!(
            (jp.prices[k] - sp.prices[0]).abs() < 3.0 * se,
            "claim {k}: {} vs {}",
            jp.prices[k],
            sp.prices[0]
        );
    }
}

use std::fs;
use std::path::Path;
use std::process::Command;

use lsmnet::config::{ConfigError, KindSpec};
use lsmnet::persist::{
    load_policy, read_interpolator, read_manifest, save_policy, write_interpolator, PersistError,
};
use lsmnet::run::{cdf_path, prices_path, quantiles_path, POLICY_DIR, STATUS_FILE};
use lsmnet::{parse_config, parse_str, run, Stage};
use lsmnet_core::nn::{Activation, Interpolator, Network};
use lsmnet_core::{lsm, pricer};

const SMALL: &str = r#"
version = 1

[model]
rate = 0.05
dividends = 0.03
vols = [0.2, 0.25]
spots = [1.0, 1.0]

[grid]
maturity = 1.0
steps = 4

[[instruments]]
label = "put"
kind = "american_put"
strike = 1.0
underlyings = [0]

[[instruments]]
label = "min"
kind = "call_on_min"
strike = 0.9
underlyings = [0, 1]

[lsm]
outer_paths = 2000
inner_paths = 8
seed = 5

[lsm.train]
max_epochs = 30

[pricing]
paths = 4000
seed = 6

[pnl]
horizons = [0.25, 0.5]
paths = 3000
seed = 7
cdf_points = 50
write_samples = true

[output]
scale = 100.0
"#;

fn invalid_path(text: &str) -> String {
    match parse_str(text) {
        Err(ConfigError::Invalid { path, .. }) => path,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn minimal_config_takes_defaults() {
    let text = r#"
version = 1
[model]
rate = 0.05
vols = 0.2
spots = [100.0]
[grid]
maturity = 1.0
steps = 12
[[instruments]]
label = "p"
kind = "american_put"
strike = 100.0
underlyings = [0]
"#;
    let cfg = parse_str(text).unwrap();
    assert_eq!(cfg.lsm.inner_paths, 16);
    assert_eq!(cfg.lsm.train.hidden, vec![10, 10]);
    assert_eq!(cfg.pricing.paths, 1_000_000);
    assert_eq!(cfg.pnl.quantiles, vec![0.01, 0.1, 0.5, 0.9, 0.99]);
    assert_eq!(cfg.output.scale, 1.0);
    let p = cfg.model_params().unwrap();
    assert_eq!(p.dividends(), &[0.0]);
    assert_eq!(
        cfg.portfolio().unwrap().instruments()[0].exercise_dates(),
        (1..=12).collect::<Vec<_>>().as_slice()
    );
}

#[test]
fn shipped_portfolio_config_matches_its_description() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/portfolio_1y.toml");
    let cfg = parse_config(&path).unwrap();
    let p = cfg.model_params().unwrap();
    assert_eq!(p.rate(), 0.05);
    assert_eq!(p.dividends(), &[0.03; 3]);
    assert_eq!(p.vols(), &[0.2; 3]);
    assert_eq!(p.spots(), &[1.0; 3]);
    let kinds: Vec<_> = cfg.instruments.iter().map(|i| (i.kind, i.strike)).collect();
    assert_eq!(
        kinds,
        vec![
            (KindSpec::AmericanPut, 1.0),
            (KindSpec::CallOnMin, 0.9),
            (KindSpec::CallOnMax, 1.0)
        ]
    );
    assert_eq!(cfg.horizon_indices().unwrap(), vec![1, 6]);
    for name in ["portfolio_3y.toml", "put.toml"] {
        parse_config(
            &Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("examples")
                .join(name),
        )
        .unwrap();
    }
}

#[test]
fn validation_errors_name_the_field() {
    assert_eq!(
        invalid_path(&SMALL.replace("horizons = [0.25, 0.5]", "horizons = [0.25, 0.3]")),
        "pnl.horizons[1]"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("underlyings = [0, 1]", "underlyings = [0, 2]")),
        "instruments[1].underlyings"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("label = \"min\"", "label = \"put\"")),
        "instruments[1].label"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("vols = [0.2, 0.25]", "vols = [0.2]")),
        "model.vols"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("version = 1", "version = 7")),
        "version"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("outer_paths = 2000", "outer_paths = 0")),
        "lsm.outer_paths"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("cdf_points = 50", "cdf_points = 50\nquantiles = [0.5, 1.0]")),
        "pnl.quantiles[1]"
    );
    assert_eq!(
        invalid_path(&SMALL.replace("underlyings = [0]\n", "underlyings = [0, 1]\n")),
        "instruments[0].kind"
    );

    match parse_str(&SMALL.replace("seed = 6", "seed = 6\nsead = 1")) {
        Err(ConfigError::Syntax(e)) => assert!(e.to_string().contains("sead"), "{e}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_config(Path::new("/nonexistent/lsmnet.toml")),
        Err(ConfigError::Io { .. })
    ));
}

#[test]
fn seed_override_and_hash() {
    let mut cfg = parse_str(SMALL).unwrap();
    let before = cfg.hash();
    assert_eq!(before, parse_str(SMALL).unwrap().hash());
    cfg.override_seed(40);
    assert_eq!((cfg.lsm.seed, cfg.pricing.seed, cfg.pnl.seed), (40, 41, 42));
    assert_ne!(cfg.hash(), before);
    assert_eq!(cfg.seeds_tag(), "lsm=40 pricing=41 pnl=42");
}

#[test]
fn network_text_round_trip_is_bit_exact() {
    let net = Network::init(vec![3, 4, 2], Activation::Tanh, 1.3, 11).unwrap();
    let interp = Interpolator::new(
        net,
        vec![0.1, -2.0, 1e-300],
        vec![3.0, 0.5, 7.0],
        vec![1.0 / 3.0, -0.0],
        vec![2.0, 0.0],
    )
    .unwrap();
    let text = write_interpolator(&interp);
    let back = read_interpolator("x.txt", &text).unwrap();
    assert_eq!(back, interp);
    for (a, b) in back
        .network()
        .params()
        .iter()
        .zip(interp.network().params())
    {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(write_interpolator(&back), text);

    let broken = text.replacen("sizes 3 4 2", "sizes 3 4", 1);
    match read_interpolator("x.txt", &broken) {
        Err(PersistError::Format { file, line, .. }) => {
            assert_eq!(file, "x.txt");
            assert!(line > 0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn saved_policy_reloads_and_prices_identically() {
    let cfg = parse_str(SMALL).unwrap();
    let portfolio = cfg.portfolio().unwrap();
    let policy = lsm::train_policy(&portfolio, &cfg.lsm_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_policy(&policy, dir.path(), &cfg.hash()).unwrap();
    assert_eq!(manifest.labels, vec!["put", "min"]);
    assert_eq!(read_manifest(dir.path()).unwrap(), manifest);

    let loaded = load_policy(dir.path(), &portfolio).unwrap();
    let a = pricer::price_with_policy(&policy, 3000, 1).unwrap();
    let b = pricer::price_with_policy(&loaded, 3000, 1).unwrap();
    assert_eq!(a, b);

    let other = parse_str(&SMALL.replace("strike = 0.9", "strike = 0.95"))
        .unwrap()
        .portfolio()
        .unwrap();
    assert!(matches!(
        load_policy(dir.path(), &other),
        Err(PersistError::PortfolioMismatch { .. })
    ));
}

#[test]
fn staged_run_matches_single_run_and_reruns_are_identical() {
    let cfg = parse_str(SMALL).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    run(Stage::Train, &cfg, &a).unwrap();
    run(Stage::Price, &cfg, &a).unwrap();
    run(Stage::Pnl, &cfg, &a).unwrap();
    run(Stage::All, &cfg, &b).unwrap();
    run(Stage::All, &cfg, &c).unwrap();

    let mut files = vec![prices_path(&a)];
    for n in [1, 2] {
        files.push(quantiles_path(&a, n));
        files.push(cdf_path(&a, n));
        files.push(a.join(format!("samples_n{n:03}.csv")));
    }
    for f in &files {
        let name = f.file_name().unwrap();
        let x = fs::read(f).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name:?}");
        assert_eq!(x, fs::read(c.join(name)).unwrap(), "{name:?}");
    }
    for n in 1..4 {
        let name = format!("net_{n:03}.txt");
        assert_eq!(
            fs::read(a.join(POLICY_DIR).join(&name)).unwrap(),
            fs::read(b.join(POLICY_DIR).join(&name)).unwrap()
        );
    }

    let prices = fs::read_to_string(prices_path(&b)).unwrap();
    let mut lines = prices.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# config_sha256={} seeds=lsm=5 pricing=6 pnl=7", cfg.hash())
    );
    assert_eq!(lines.next().unwrap(), "label,price,stderr,paths,seed");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "put");
    let price: f64 = row[1].parse().unwrap();
    assert!(price > 3.0 && price < 12.0, "scaled put price {price}");
    assert_eq!(&row[3..], &["4000", "6"]);

    let q = fs::read_to_string(quantiles_path(&b, 1)).unwrap();
    let header = q.lines().nth(1).unwrap();
    assert_eq!(header, "series,horizon_years,q0.01,q0.1,q0.5,q0.9,q0.99");
    let series: Vec<&str> = q
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(series, vec!["put", "min", "portfolio"]);
    let cdf = fs::read_to_string(cdf_path(&b, 2)).unwrap();
    assert_eq!(cdf.lines().count(), 2 + 3 * 50);

    let status = fs::read_to_string(b.join(STATUS_FILE)).unwrap();
    assert!(status.starts_with("ok\n"), "{status}");
    assert!(status.contains("completed: train,price,pnl"), "{status}");
}

#[test]
fn price_without_policy_fails_with_status() {
    let cfg = parse_str(SMALL).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(Stage::Price, &cfg, tmp.path()).is_err());
    let status = fs::read_to_string(tmp.path().join(STATUS_FILE)).unwrap();
    assert!(status.starts_with("failed\n"), "{status}");
    assert!(status.contains("command: price"));
}

#[test]
fn binary_reports_config_errors_with_exit_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        SMALL.replace("horizons = [0.25, 0.5]", "horizons = [0.3]"),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lsmnet"))
        .args(["price", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pnl.horizons[0]"), "{err}");
}

#[test]
fn binary_train_then_price() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out_dir = tmp.path().join("o");
    for stage in ["train", "price"] {
        let out = Command::new(env!("CARGO_BIN_EXE_lsmnet"))
            .arg(stage)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .args(["--workers", "2", "--seed", "20", "--paths", "1000"])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let prices = fs::read_to_string(prices_path(&out_dir)).unwrap();
    assert!(
        prices.contains("seeds=lsm=20 pricing=21 pnl=22"),
        "{prices}"
    );
    assert!(
        prices.lines().nth(2).unwrap().ends_with(",1000,21"),
        "{prices}"
    );
}

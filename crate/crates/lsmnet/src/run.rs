//! Stage orchestration: train, price, pnl, benchmark.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lsmnet_core::pnl::{build_pnl, PnlDistribution, Series};
use lsmnet_core::{lsm, pricer, PricingResult, TrainedPolicy};

use crate::benchmark::{self, BenchSettings, PUT_SCHEDULES};
use crate::config::{BenchmarkSection, RunConfig};
use crate::persist;
use crate::report::{self, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Train,
    Price,
    Pnl,
    Benchmark,
    All,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Price => "price",
            Stage::Pnl => "pnl",
            Stage::Benchmark => "benchmark",
            Stage::All => "all",
        }
    }
}

pub const POLICY_DIR: &str = "policy";
pub const STATUS_FILE: &str = "status.txt";

pub fn prices_path(out: &Path) -> PathBuf {
    out.join("prices.csv")
}

pub fn quantiles_path(out: &Path, n: usize) -> PathBuf {
    out.join(format!("quantiles_n{n:03}.csv"))
}

pub fn cdf_path(out: &Path, n: usize) -> PathBuf {
    out.join(format!("cdf_n{n:03}.csv"))
}

pub fn samples_path(out: &Path, n: usize) -> PathBuf {
    out.join(format!("samples_n{n:03}.csv"))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    prov: Provenance,
    done: Vec<&'static str>,
    log: &'a mut dyn io::Write,
}

/// Run `stage` and write its artifacts under `out`. A `status.txt` records
/// the completed stages, and on failure the failing one, so partial output
/// is recognisable.
pub fn run(stage: Stage, cfg: &RunConfig, out: &Path) -> Result<()> {
    run_with_log(stage, cfg, out, &mut io::stdout().lock())
}

/// [`run`] with the human-readable tables written to `log`.
pub fn run_with_log(
    stage: Stage,
    cfg: &RunConfig,
    out: &Path,
    log: &mut dyn io::Write,
) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let status = out.join(STATUS_FILE);
    let _ = fs::remove_file(&status);
    let mut ctx = Ctx {
        cfg,
        out,
        prov: Provenance {
            config_sha256: cfg.hash(),
            seeds: cfg.seeds_tag(),
        },
        done: Vec::new(),
        log,
    };
    let result = dispatch(stage, &mut ctx);
    let mut text = String::new();
    match &result {
        Ok(()) => {
            let _ = writeln!(text, "ok");
        }
        Err(e) => {
            let _ = writeln!(text, "failed");
            let _ = writeln!(text, "error: {e:#}");
        }
    }
    let _ = writeln!(text, "command: {}", stage.name());
    let _ = writeln!(text, "completed: {}", ctx.done.join(","));
    let _ = writeln!(text, "config_sha256: {}", ctx.prov.config_sha256);
    fs::write(&status, text).with_context(|| format!("writing {}", status.display()))?;
    result
}

fn dispatch(stage: Stage, ctx: &mut Ctx) -> Result<()> {
    match stage {
        Stage::Train => {
            train(ctx)?;
        }
        Stage::Price => {
            let policy = load(ctx)?;
            price(ctx, &policy)?;
        }
        Stage::Pnl => {
            let policy = load(ctx)?;
            let baseline = price(ctx, &policy)?;
            pnl(ctx, &policy, &baseline)?;
        }
        Stage::Benchmark => {
            let section = ctx.cfg.benchmark.clone().unwrap_or_default();
            bench(ctx, &section)?;
        }
        Stage::All => {
            let policy = train(ctx)?;
            let baseline = price(ctx, &policy)?;
            pnl(ctx, &policy, &baseline)?;
            if let Some(section) = ctx.cfg.benchmark.clone() {
                bench(ctx, &section)?;
            }
        }
    }
    Ok(())
}

fn train(ctx: &mut Ctx) -> Result<TrainedPolicy> {
    let portfolio = ctx.cfg.portfolio()?;
    let policy = lsm::train_policy(&portfolio, &ctx.cfg.lsm_config()).context("training")?;
    let dir = ctx.out.join(POLICY_DIR);
    persist::save_policy(&policy, &dir, &ctx.prov.config_sha256)?;
    writeln!(
        ctx.log,
        "trained {} interpolators -> {}",
        policy.interpolators().count(),
        dir.display()
    )?;
    writeln!(
        ctx.log,
        "{:>5} {:>8} {:>14} {:>14} {:>7}",
        "date", "samples", "initial_loss", "final_loss", "epochs"
    )?;
    for d in policy.diagnostics() {
        writeln!(
            ctx.log,
            "{:>5} {:>8} {:>14.6e} {:>14.6e} {:>7}",
            d.date_index, d.samples, d.initial_loss, d.final_loss, d.epochs
        )?;
    }
    ctx.done.push("train");
    Ok(policy)
}

fn load(ctx: &Ctx) -> Result<TrainedPolicy> {
    let dir = ctx.out.join(POLICY_DIR);
    if !dir.join(persist::MANIFEST_FILE).exists() {
        bail!(
            "no trained policy in {}; run `train` first (or `all`)",
            dir.display()
        );
    }
    Ok(persist::load_policy(&dir, &ctx.cfg.portfolio()?)?)
}

fn price(ctx: &mut Ctx, policy: &TrainedPolicy) -> Result<Vec<f64>> {
    let cfg = ctx.cfg;
    let res: PricingResult = pricer::price_with_policy(policy, cfg.pricing.paths, cfg.pricing.seed)
        .context("pricing")?;
    let backward = pricer::backward_estimate(
        policy,
        cfg.pricing.paths,
        cfg.pricing.seed.wrapping_add(1_000_003),
    )?;
    report::write_prices(&prices_path(ctx.out), &ctx.prov, &res, cfg.output.scale)?;
    let s = cfg.output.scale;
    writeln!(ctx.log)?;
    writeln!(
        ctx.log,
        "{:<12} {:>14} {:>12} {:>14}",
        "claim", "price", "stderr", "backward"
    )?;
    for k in 0..res.n_assets() {
        writeln!(
            ctx.log,
            "{:<12} {:>14.6} {:>12.6} {:>14.6}",
            res.labels[k],
            s * res.prices[k],
            s * res.stderrs[k],
            s * backward[k]
        )?;
    }
    ctx.done.push("price");
    Ok(res.prices)
}

fn print_quantiles(
    log: &mut dyn io::Write,
    dist: &PnlDistribution,
    probs: &[f64],
    scale: f64,
) -> Result<()> {
    write!(log, "{:<12}", "series")?;
    for p in probs {
        write!(log, " {:>10}", format!("q{p}"))?;
    }
    writeln!(log)?;
    let mut rows: Vec<(String, Series)> = dist
        .labels()
        .iter()
        .enumerate()
        .map(|(k, l)| (l.clone(), Series::Asset(k)))
        .collect();
    rows.insert(0, ("portfolio".into(), Series::Portfolio));
    for (name, series) in rows {
        write!(log, "{name:<12}")?;
        for &p in probs {
            write!(log, " {:>10.4}", scale * dist.quantile(series, p)?)?;
        }
        writeln!(log)?;
    }
    Ok(())
}

fn pnl(ctx: &mut Ctx, policy: &TrainedPolicy, baseline: &[f64]) -> Result<()> {
    let cfg = ctx.cfg;
    for n in cfg.horizon_indices()? {
        let dist = build_pnl(policy, baseline, n, cfg.pnl.paths, cfg.pnl.seed)
            .with_context(|| format!("P&L at date {n}"))?;
        report::write_quantiles(
            &quantiles_path(ctx.out, n),
            &ctx.prov,
            &dist,
            &cfg.pnl.quantiles,
            cfg.output.scale,
        )?;
        report::write_cdf(
            &cdf_path(ctx.out, n),
            &ctx.prov,
            &dist,
            cfg.pnl.cdf_points,
            cfg.output.scale,
        )?;
        if cfg.pnl.write_samples {
            report::write_samples(
                &samples_path(ctx.out, n),
                &ctx.prov,
                &dist,
                cfg.output.scale,
            )?;
        }
        writeln!(ctx.log)?;
        writeln!(
            ctx.log,
            "P&L quantiles at t = {:.6} (date {n})",
            dist.time()
        )?;
        print_quantiles(ctx.log, &dist, &cfg.pnl.quantiles, cfg.output.scale)?;
    }
    ctx.done.push("pnl");
    Ok(())
}

fn bench(ctx: &mut Ctx, section: &BenchmarkSection) -> Result<()> {
    let settings = BenchSettings::from_section(section);
    let mut cases = Vec::new();
    for &spot in &section.put_spots {
        cases.push(benchmark::put_case(spot, 0.0).context("unknown put case")?);
    }
    if section.dividend_put {
        cases.push(benchmark::put_case(90.0, 0.03).expect("published dividend case"));
    }
    let mut series = Vec::new();
    for case in cases {
        let s = benchmark::put_series(case, &settings)?;
        writeln!(ctx.log)?;
        writeln!(
            ctx.log,
            "American put S0={} dividend={}",
            case.spot, case.dividend
        )?;
        writeln!(
            ctx.log,
            "{:<4} {:>10} {:>9} {:>10} {:>10}",
            "dt", "price", "stderr", "published", "lattice"
        )?;
        for (r, (label, _)) in s.rows.iter().zip(PUT_SCHEDULES) {
            writeln!(
                ctx.log,
                "{label:<4} {:>10.4} {:>9.4} {:>10.3} {:>10.4}",
                r.price, r.stderr, r.published, r.oracle
            )?;
        }
        writeln!(
            ctx.log,
            "{:<4} {:>10.4} {:>9} {:>10.3} {:>10.4}",
            "0", s.extrapolated, "", case.published_extrapolated, s.oracle
        )?;
        series.push(s);
    }
    benchmark::write_put_csv(&ctx.out.join("benchmark_put.csv"), &ctx.prov, &series)?;

    let mut rows = Vec::new();
    for &assets in &section.max_call_assets {
        for &spot in &section.max_call_spots {
            let Some(row) = benchmark::max_call_row(assets, spot) else {
                continue;
            };
            rows.push(benchmark::max_call(row, &settings)?);
        }
    }
    if !rows.is_empty() {
        writeln!(ctx.log)?;
        writeln!(ctx.log, "Bermudan max-call")?;
        writeln!(
            ctx.log,
            "{:>6} {:>6} {:>10} {:>9} {:>18} {:>5}",
            "assets", "spot", "price", "stderr", "reference CI", "pass"
        )?;
        for r in &rows {
            writeln!(
                ctx.log,
                "{:>6} {:>6} {:>10.4} {:>9.4} {:>18} {:>5}",
                r.row.assets,
                r.row.spot,
                r.price,
                r.stderr,
                format!("[{:.3}, {:.3}]", r.row.ci.0, r.row.ci.1),
                if r.pass() { "yes" } else { "no" }
            )?;
        }
    }
    benchmark::write_max_call_csv(&ctx.out.join("benchmark_max_call.csv"), &ctx.prov, &rows)?;
    ctx.done.push("benchmark");
    Ok(())
}

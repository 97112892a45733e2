//! CSV outputs. Every file opens with a `#` line carrying the configuration
//! hash and seeds; floats use `{:.16e}` (17 significant digits).

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use lsmnet_core::pnl::{export_cdf, PnlDistribution, Series};
use lsmnet_core::PricingResult;

#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_sha256: String,
    pub seeds: String,
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn open_csv(path: &Path, prov: &Provenance) -> Result<csv::Writer<File>> {
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(
        file,
        "# config_sha256={} seeds={}",
        prov.config_sha256, prov.seeds
    )?;
    Ok(csv::Writer::from_writer(file))
}

fn series_names(dist: &PnlDistribution) -> Vec<(String, Series)> {
    let mut out: Vec<(String, Series)> = dist
        .labels()
        .iter()
        .enumerate()
        .map(|(k, l)| (l.clone(), Series::Asset(k)))
        .collect();
    out.push(("portfolio".to_string(), Series::Portfolio));
    out
}

/// `label,price,stderr,paths,seed`, one row per claim.
pub fn write_prices(path: &Path, prov: &Provenance, res: &PricingResult, scale: f64) -> Result<()> {
    let mut w = open_csv(path, prov)?;
    w.write_record(["label", "price", "stderr", "paths", "seed"])?;
    for k in 0..res.n_assets() {
        w.write_record([
            res.labels[k].clone(),
            num(scale * res.prices[k]),
            num(scale * res.stderrs[k]),
            res.n_paths.to_string(),
            res.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `series,horizon_years,q<p>...`, one row per claim plus the portfolio.
pub fn write_quantiles(
    path: &Path,
    prov: &Provenance,
    dist: &PnlDistribution,
    probs: &[f64],
    scale: f64,
) -> Result<()> {
    let mut w = open_csv(path, prov)?;
    let mut header = vec!["series".to_string(), "horizon_years".to_string()];
    header.extend(probs.iter().map(|p| format!("q{p}")));
    w.write_record(&header)?;
    for (name, series) in series_names(dist) {
        let mut row = vec![name, num(dist.time())];
        for &p in probs {
            row.push(num(scale * dist.quantile(series, p)?));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Step CDF rows `series,pnl,probability` with probabilities `i/L`. With
/// `points > 0` only `points` evenly spaced order statistics are kept per
/// series (always including the largest).
pub fn write_cdf(
    path: &Path,
    prov: &Provenance,
    dist: &PnlDistribution,
    points: usize,
    scale: f64,
) -> Result<()> {
    let mut w = open_csv(path, prov)?;
    w.write_record(["series", "pnl", "probability"])?;
    for table in export_cdf(dist) {
        let n = table.rows.len();
        let ranks: Vec<usize> = if points == 0 || points >= n {
            (1..=n).collect()
        } else {
            (1..=points).map(|r| (r * n).div_ceil(points)).collect()
        };
        for i in ranks {
            let (x, p) = table.rows[i - 1];
            w.write_record([table.label.clone(), num(scale * x), num(p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Raw per-path P&L: `path,<claim labels...>,portfolio`.
pub fn write_samples(
    path: &Path,
    prov: &Provenance,
    dist: &PnlDistribution,
    scale: f64,
) -> Result<()> {
    let mut w = open_csv(path, prov)?;
    let names = series_names(dist);
    let mut header = vec!["path".to_string()];
    header.extend(names.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for j in 0..dist.n_paths() {
        let mut row = vec![j.to_string()];
        row.extend(names.iter().map(|(_, s)| num(scale * dist.sample(j, *s))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

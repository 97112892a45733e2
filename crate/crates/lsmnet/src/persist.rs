//! On-disk form of a trained policy: one text file per interpolator plus a
//! TOML manifest. Floats are written in shortest round-trip form, so a
//! reloaded policy is bit-identical to the one that was saved.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lsmnet_core::instruments::PayoffKind;
use lsmnet_core::lsm::DateDiagnostics;
use lsmnet_core::nn::{Activation, Interpolator, Network};
use lsmnet_core::{Portfolio, TrainedPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::hex;

const NETWORK_MAGIC: &str = "lsmnet-interpolator 1";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Manifest {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(
        "policy at {dir} was trained for portfolio {found}, configuration describes {expected}"
    )]
    PortfolioMismatch {
        dir: PathBuf,
        found: String,
        expected: String,
    },
    #[error("{0}")]
    Policy(#[from] lsmnet_core::Error),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_owned(),
        source,
    }
}

/// SHA-256 of a canonical description of market, grid and instruments.
pub fn portfolio_hash(p: &Portfolio) -> String {
    let mut s = String::new();
    let m = p.params();
    let _ = writeln!(s, "rate {}", m.rate());
    let _ = writeln!(s, "dividends {:?}", m.dividends());
    let _ = writeln!(s, "vols {:?}", m.vols());
    let _ = writeln!(s, "spots {:?}", m.spots());
    let _ = writeln!(s, "grid {:?}", p.grid().dates());
    for inst in p.instruments() {
        let kind = match inst.kind() {
            PayoffKind::AmericanPut => "american_put".to_string(),
            PayoffKind::EuropeanCallOnMin => "call_on_min".to_string(),
            PayoffKind::BermudanCallOnMax => "call_on_max".to_string(),
            PayoffKind::EuropeanVanilla(t) => format!("european_{t:?}").to_lowercase(),
        };
        let _ = writeln!(
            s,
            "instrument {} {kind} {} {:?} {:?} {:?}",
            inst.label(),
            inst.strike(),
            inst.underlyings(),
            inst.exercise_dates(),
            inst.regression()
        );
    }
    hex(&Sha256::digest(s.as_bytes()))
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_interpolator(interp: &Interpolator) -> String {
    let net = interp.network();
    let mut s = String::new();
    let _ = writeln!(s, "{NETWORK_MAGIC}");
    let act = match net.activation() {
        Activation::Sigmoid => "sigmoid",
        Activation::Tanh => "tanh",
    };
    let _ = writeln!(s, "activation {act}");
    let sizes: Vec<String> = net.sizes().iter().map(|x| x.to_string()).collect();
    let _ = writeln!(s, "sizes {}", sizes.join(" "));
    let _ = writeln!(s, "in_shift {}", join(interp.in_shift()));
    let _ = writeln!(s, "in_scale {}", join(interp.in_scale()));
    let _ = writeln!(s, "out_shift {}", join(interp.out_shift()));
    let _ = writeln!(s, "out_scale {}", join(interp.out_scale()));
    for l in 0..net.layers() {
        let (n_in, n_out) = (net.sizes()[l], net.sizes()[l + 1]);
        let _ = writeln!(s, "weights {l} {n_out} {n_in}");
        for row in net.weights(l).chunks(n_in) {
            let _ = writeln!(s, "{}", join(row));
        }
        let _ = writeln!(s, "biases {l}");
        let _ = writeln!(s, "{}", join(net.biases(l)));
    }
    s
}

struct Lines<'a> {
    file: &'a str,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(file: &'a str, text: &'a str) -> Self {
        Lines {
            file,
            inner: text.lines().enumerate().peekable(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> PersistError {
        PersistError::Format {
            file: self.file.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    /// Next non-blank, non-comment line.
    fn next(&mut self) -> Result<&'a str, PersistError> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(t);
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>, PersistError> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`, found `{line}`")));
        }
        Ok(parts.collect())
    }

    fn floats(&self, parts: &[&str], n: usize) -> Result<Vec<f64>, PersistError> {
        if parts.len() != n {
            return Err(self.err(format!("expected {n} numbers, found {}", parts.len())));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number `{p}`")))
            })
            .collect()
    }

    fn usizes(&self, parts: &[&str]) -> Result<Vec<usize>, PersistError> {
        parts
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| self.err(format!("bad integer `{p}`")))
            })
            .collect()
    }
}

pub fn read_interpolator(file: &str, text: &str) -> Result<Interpolator, PersistError> {
    let mut r = Lines::new(file, text);
    if r.next()? != NETWORK_MAGIC {
        return Err(r.err(format!("missing `{NETWORK_MAGIC}` header")));
    }
    let act = r.keyed("activation")?;
    let activation = match act.as_slice() {
        ["sigmoid"] => Activation::Sigmoid,
        ["tanh"] => Activation::Tanh,
        _ => return Err(r.err(format!("unknown activation {act:?}"))),
    };
    let sizes_raw = r.keyed("sizes")?;
    let sizes = r.usizes(&sizes_raw)?;
    if sizes.len() < 2 {
        return Err(r.err("need at least two layer sizes"));
    }
    let (d, k) = (sizes[0], sizes[sizes.len() - 1]);
    let mut vecs = Vec::new();
    for (key, n) in [
        ("in_shift", d),
        ("in_scale", d),
        ("out_shift", k),
        ("out_scale", k),
    ] {
        let parts = r.keyed(key)?;
        vecs.push(r.floats(&parts, n)?);
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let head = r.keyed("weights")?;
        if r.usizes(&head)? != [l, n_out, n_in] {
            return Err(r.err(format!("expected `weights {l} {n_out} {n_in}`")));
        }
        for _ in 0..n_out {
            let row: Vec<&str> = r.next()?.split_whitespace().collect();
            weights.extend(r.floats(&row, n_in)?);
        }
        let head = r.keyed("biases")?;
        if r.usizes(&head)? != [l] {
            return Err(r.err(format!("expected `biases {l}`")));
        }
        let row: Vec<&str> = r.next()?.split_whitespace().collect();
        biases.extend(r.floats(&row, n_out)?);
    }
    if let Ok(extra) = r.next() {
        return Err(r.err(format!("trailing content `{extra}`")));
    }
    weights.extend(biases);
    let net = Network::from_params(sizes, activation, weights).map_err(|e| r.err(e.to_string()))?;
    let out_scale = vecs.pop().unwrap();
    let out_shift = vecs.pop().unwrap();
    let in_scale = vecs.pop().unwrap();
    let in_shift = vecs.pop().unwrap();
    Interpolator::new(net, in_shift, in_scale, out_shift, out_scale)
        .map_err(|e| r.err(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub portfolio_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub labels: Vec<String>,
    pub dates: Vec<DateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateEntry {
    pub index: usize,
    pub file: String,
    pub samples: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

fn network_file(n: usize) -> String {
    format!("net_{n:03}.txt")
}

pub fn save_policy(
    policy: &TrainedPolicy,
    dir: &Path,
    config_sha256: &str,
) -> Result<Manifest, PersistError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let diag = |n: usize| policy.diagnostics().iter().find(|d| d.date_index == n);
    let mut dates = Vec::new();
    for (n, interp) in policy.interpolators() {
        let file = network_file(n);
        let path = dir.join(&file);
        fs::write(&path, write_interpolator(interp)).map_err(io(&path))?;
        let d = diag(n);
        dates.push(DateEntry {
            index: n,
            file,
            samples: d.map_or(0, |d| d.samples),
            initial_loss: d.map_or(f64::NAN, |d| d.initial_loss),
            final_loss: d.map_or(f64::NAN, |d| d.final_loss),
            epochs: d.map_or(0, |d| d.epochs),
        });
    }
    let p = policy.portfolio();
    let manifest = Manifest {
        version: 1,
        portfolio_sha256: portfolio_hash(p),
        config_sha256: config_sha256.to_string(),
        seed: policy.seed(),
        grid: p.grid().dates().to_vec(),
        labels: p
            .instruments()
            .iter()
            .map(|i| i.label().to_string())
            .collect(),
        dates,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).expect("manifest serialises");
    fs::write(&path, text).map_err(io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PersistError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    toml::from_str(&text).map_err(|source| PersistError::Manifest { path, source })
}

/// Load a policy saved by [`save_policy`], checking it belongs to `portfolio`.
pub fn load_policy(dir: &Path, portfolio: &Portfolio) -> Result<TrainedPolicy, PersistError> {
    let manifest = read_manifest(dir)?;
    let expected = portfolio_hash(portfolio);
    if manifest.portfolio_sha256 != expected {
        return Err(PersistError::PortfolioMismatch {
            dir: dir.to_owned(),
            found: manifest.portfolio_sha256,
            expected,
        });
    }
    let mut interps = Vec::new();
    let mut diags = Vec::new();
    for entry in &manifest.dates {
        let path = dir.join(&entry.file);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        interps.push((entry.index, read_interpolator(&entry.file, &text)?));
        diags.push(DateDiagnostics {
            date_index: entry.index,
            samples: entry.samples,
            initial_loss: entry.initial_loss,
            final_loss: entry.final_loss,
            epochs: entry.epochs,
        });
    }
    Ok(TrainedPolicy::from_parts(
        portfolio.clone(),
        interps,
        diags,
        manifest.seed,
    )?)
}

//! Flat key=value configuration files and the value parsers shared with
//! the command-line flags. Flags override file entries.

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::Path;

use coinwalk::{CoinParameters, CoinState, DirectionConvention, Lattice, Topology};

/// Parse an angle given in radians, or as a multiple of π with the `pi:`
/// prefix (`pi:0.5` is π/2).
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let parsed = if let Some(mult) = s.strip_prefix("pi:") {
        mult.parse::<f64>().map(|m| m * std::f64::consts::PI)
    } else {
        s.parse::<f64>()
    };
    parsed.map_err(|_| format!("`{s}` is not an angle (use radians or pi:<multiple>)"))
}

/// Parse a complex amplitude written as `re` or `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let bad = || format!("`{s}` is not a complex number (use re or re,im)");
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
        None => Ok(Complex64::new(s.trim().parse().map_err(|_| bad())?, 0.0)),
    }
}

pub fn parse_topology(s: &str) -> Result<Topology, String> {
    match s {
        "line" => Ok(Topology::Line),
        "cycle" => Ok(Topology::Cycle),
        other => Err(format!("`{other}` is not a topology (line or cycle)")),
    }
}

pub fn parse_convention(s: &str) -> Result<DirectionConvention, String> {
    match s {
        "spatial" => Ok(DirectionConvention::Spatial),
        "local" => Ok(DirectionConvention::Local),
        other => Err(format!("`{other}` is not a convention (spatial or local)")),
    }
}

/// Comma-separated list of plain numbers.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{item}` in `{s}` is not a number"))
        })
        .collect()
}

/// Comma-separated list of angles, each in radians or `pi:` form.
pub fn parse_angle_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|item| parse_angle(item.trim())).collect()
}

/// Comma-separated numbers as a single flag value (clap treats a bare
/// `Vec<f64>` field as a repeated flag instead).
#[derive(Debug, Clone)]
pub struct F64List(pub Vec<f64>);

impl std::str::FromStr for F64List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_f64_list(s).map(F64List)
    }
}

/// Comma-separated angles as a single flag value.
#[derive(Debug, Clone)]
pub struct AngleList(pub Vec<f64>);

impl std::str::FromStr for AngleList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_angle_list(s).map(AngleList)
    }
}

/// Key=value pairs loaded from a config file. Lines starting with `#` and
/// blank lines are skipped.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {} is not key=value: `{line}`", number + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parsed<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>> {
        self.raw(key)
            .map(|raw| parse(raw).map_err(|e| anyhow!("config key `{key}`: {e}")))
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parsed(key, |s| s.parse().map_err(|_| format!("`{s}` is not an integer")))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parsed(key, |s| s.parse().map_err(|_| format!("`{s}` is not a number")))
    }

    pub fn angle(&self, key: &str) -> Result<Option<f64>> {
        self.parsed(key, parse_angle)
    }

    pub fn complex(&self, key: &str) -> Result<Option<Complex64>> {
        self.parsed(key, parse_complex)
    }

    pub fn topology(&self, key: &str) -> Result<Option<Topology>> {
        self.parsed(key, parse_topology)
    }

    pub fn convention(&self, key: &str) -> Result<Option<DirectionConvention>> {
        self.parsed(key, parse_convention)
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parsed(key, parse_f64_list)
    }

    pub fn angle_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parsed(key, parse_angle_list)
    }
}

/// How the initial coin state was specified, for the output header.
#[derive(Debug, Clone)]
pub enum InitialEcho {
    Bloch { theta_b: f64, phi_b: f64 },
    Amplitudes { alpha: Complex64, beta: Complex64 },
}

pub fn build_lattice(
    topology: Topology,
    n_sites: Option<usize>,
    convention: DirectionConvention,
) -> Result<Lattice> {
    let n = n_sites.ok_or_else(|| anyhow!("--n-sites is required"))?;
    Ok(Lattice::new(topology, n, convention)?)
}

pub fn build_coin(rho: Option<f64>, theta: f64, phi: f64) -> Result<CoinParameters> {
    let rho = rho.ok_or_else(|| anyhow!("--rho is required"))?;
    Ok(CoinParameters::new(rho, theta, phi)?)
}

pub fn build_initial(
    theta_b: Option<f64>,
    phi_b: Option<f64>,
    alpha: Option<Complex64>,
    beta: Option<Complex64>,
) -> Result<(CoinState, InitialEcho)> {
    match (alpha, beta) {
        (Some(a), Some(b)) => {
            let state = CoinState::new(a, b)?;
            Ok((state, InitialEcho::Amplitudes { alpha: a, beta: b }))
        }
        (None, None) => {
            let theta_b = theta_b.unwrap_or(0.0);
            let phi_b = phi_b.unwrap_or(0.0);
            Ok((
                coinwalk::bloch_to_coin(theta_b, phi_b),
                InitialEcho::Bloch { theta_b, phi_b },
            ))
        }
        _ => bail!("--alpha and --beta must be given together"),
    }
}

pub fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::Line => "line",
        Topology::Cycle => "cycle",
    }
}

pub fn convention_name(c: DirectionConvention) -> &'static str {
    match c {
        DirectionConvention::Spatial => "spatial",
        DirectionConvention::Local => "local",
    }
}

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ks::{PostQuench, ScfConfig};
use crate::lattice::{Boundary, ChainSpec, PotentialShape, MAX_EXACT_DIM};
use crate::quench::DEFAULT_FD_STEP;

/// Sorted parameter values together with the text they were parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    values: Vec<f64>,
    source: String,
}

impl Grid {
    pub fn single(v: f64) -> Self {
        Grid {
            values: vec![v],
            source: fmt_f64(v),
        }
    }

    /// `count` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        let values = if count == 1 {
            vec![start]
        } else {
            (0..count)
                .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                .collect()
        };
        Grid {
            values,
            source: format!("{}:{}:{}", fmt_f64(start), fmt_f64(stop), count),
        }
    }

    pub fn list(values: &[f64]) -> Self {
        Grid {
            values: values.to_vec(),
            source: values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parse `start:stop:count`, a comma list, or a single number.
    pub fn parse(name: &'static str, text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = |reason: String| Error::InvalidGrid { name, reason };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("`{}` is not a finite number", s.trim())))
        };
        let grid = if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 3 {
                return Err(bad(format!("`{text}` is not start:stop:count")));
            }
            let count: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| bad(format!("count `{}` is not a positive integer", parts[2].trim())))?;
            if count == 0 {
                return Err(bad("count must be at least 1".into()));
            }
            Grid::linspace(num(parts[0])?, num(parts[1])?, count)
        } else if text.is_empty() {
            return Err(bad("grid is empty".into()));
        } else {
            let values = text.split(',').map(num).collect::<Result<Vec<_>>>()?;
            Grid {
                values,
                source: text.to_string(),
            }
        };
        grid.check(name)?;
        Ok(grid)
    }

    fn check(&self, name: &'static str) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidGrid {
                name,
                reason: "grid is empty".into(),
            });
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid {
                name,
                reason: format!("values of `{}` are not strictly increasing", self.source),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Ks,
    Both,
}

impl Method {
    pub fn exact(self) -> bool {
        matches!(self, Method::Exact | Method::Both)
    }

    pub fn ks(self) -> bool {
        matches!(self, Method::Ks | Method::Both)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Ks => "ks",
            Method::Both => "both",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Method::Exact),
            "ks" => Ok(Method::Ks),
            "both" => Ok(Method::Both),
            other => Err(Error::InvalidParameter {
                name: "method",
                reason: format!("expected exact, ks or both, got `{other}`"),
            }),
        }
    }
}

/// How much is computed per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Densities, metric and `⟨w⟩ = Σ δV n`.
    Densities,
    /// Full quench statistics.
    Moments,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Densities => "densities",
            Level::Moments => "moments",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "densities" => Ok(Level::Densities),
            "moments" => Ok(Level::Moments),
            other => Err(Error::InvalidParameter {
                name: "level",
                reason: format!("expected densities or moments, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub sites: Vec<usize>,
    pub shape: PotentialShape,
    pub hopping: f64,
    pub boundary: Boundary,
    pub interaction: Grid,
    pub amplitude: Grid,
    pub beta: Grid,
    pub dv0: f64,
    pub method: Method,
    pub level: Level,
    pub fd_step: f64,
    pub scf: ScfConfig,
    pub post_quench: PostQuench,
    /// Also write `dn_dv0.csv`.
    pub amplitude_response: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "custom".into(),
            sites: vec![2],
            shape: PotentialShape::Linear,
            hopping: 1.0,
            boundary: Boundary::Open,
            interaction: Grid::single(3.0),
            amplitude: Grid::single(2.0),
            beta: Grid::single(1.0),
            dv0: 0.05,
            method: Method::Exact,
            level: Level::Moments,
            fd_step: DEFAULT_FD_STEP,
            scf: ScfConfig::default(),
            post_quench: PostQuench::Relaxed,
            amplitude_response: false,
        }
    }
}

const KEYS: &[&str] = &[
    "name",
    "preset",
    "sites",
    "shape",
    "hopping",
    "boundary",
    "U",
    "v0",
    "beta",
    "dv0",
    "method",
    "level",
    "fd_step",
    "alpha",
    "tol",
    "max_iter",
    "adaptive_mixing",
    "post_quench",
    "dn_dv0",
];

fn parse_num<T: FromStr>(name: &'static str, text: &str) -> Result<T> {
    text.trim().parse().map_err(|_| Error::InvalidParameter {
        name,
        reason: format!("cannot parse `{}`", text.trim()),
    })
}

fn parse_bool(name: &'static str, text: &str) -> Result<bool> {
    match text.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::InvalidParameter {
            name,
            reason: format!("expected true or false, got `{other}`"),
        }),
    }
}

impl ExperimentConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "preset" => {
                let base = super::presets::preset(value)?;
                *self = base;
            }
            "name" => self.name = value.to_string(),
            "sites" => {
                self.sites = value
                    .split(',')
                    .map(|s| parse_num::<usize>("sites", s))
                    .collect::<Result<_>>()?;
            }
            "shape" => {
                self.shape = value.parse()?;
            }
            "hopping" => self.hopping = parse_num("hopping", value)?,
            "boundary" => {
                self.boundary = match value {
                    "open" => Boundary::Open,
                    "periodic" => Boundary::Periodic,
                    other => {
                        return Err(Error::InvalidParameter {
                            name: "boundary",
                            reason: format!("expected open or periodic, got `{other}`"),
                        })
                    }
                }
            }
            "U" => self.interaction = Grid::parse("U", value)?,
            "v0" => self.amplitude = Grid::parse("v0", value)?,
            "beta" => self.beta = Grid::parse("beta", value)?,
            "dv0" => self.dv0 = parse_num("dv0", value)?,
            "method" => self.method = value.parse()?,
            "level" => self.level = value.parse()?,
            "fd_step" => self.fd_step = parse_num("fd_step", value)?,
            "alpha" => self.scf.alpha = parse_num("alpha", value)?,
            "tol" => self.scf.tol = parse_num("tol", value)?,
            "max_iter" => self.scf.max_iter = parse_num("max_iter", value)?,
            "adaptive_mixing" => self.scf.adaptive = parse_bool("adaptive_mixing", value)?,
            "post_quench" => {
                self.post_quench = match value {
                    "relaxed" => PostQuench::Relaxed,
                    "frozen" => PostQuench::Frozen,
                    other => {
                        return Err(Error::InvalidParameter {
                            name: "post_quench",
                            reason: format!("expected relaxed or frozen, got `{other}`"),
                        })
                    }
                }
            }
            "dn_dv0" => self.amplitude_response = parse_bool("dn_dv0", value)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Half-filled chain at one grid point.
    pub fn chain(&self, sites: usize, interaction: f64, amplitude: f64) -> Result<ChainSpec> {
        let mut spec = ChainSpec::half_filled(sites, interaction, self.shape.clone(), amplitude)?;
        spec.hopping = self.hopping;
        spec.boundary = self.boundary;
        spec.validate()?;
        Ok(spec)
    }

    pub fn points(&self) -> usize {
        self.sites.len() * self.interaction.len() * self.amplitude.len() * self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::InvalidGrid {
                name: "sites",
                reason: "no chain lengths given".into(),
            });
        }
        if self.sites.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid {
                name: "sites",
                reason: "chain lengths must be strictly increasing".into(),
            });
        }
        self.interaction.check("U")?;
        self.amplitude.check("v0")?;
        self.beta.check("beta")?;
        if let Some(b) = self.beta.values().iter().find(|b| **b <= 0.0) {
            return Err(Error::InvalidBeta(*b));
        }
        if let Some(u) = self.interaction.values().iter().find(|u| **u < 0.0) {
            return Err(Error::InvalidParameter {
                name: "U",
                reason: format!("interaction must be non-negative, got {u}"),
            });
        }
        if !self.dv0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dv0",
                reason: format!("must be finite, got {}", self.dv0),
            });
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::InvalidStep(self.fd_step));
        }
        self.scf.validate()?;
        for &l in &self.sites {
            let spec = self.chain(l, self.interaction.values()[0], self.amplitude.values()[0])?;
            if self.method.exact() {
                let dim = binomial(l, spec.n_up).saturating_mul(binomial(l, spec.n_down));
                if dim > MAX_EXACT_DIM {
                    return Err(Error::Infeasible(format!(
                        "method={} needs exact diagonalization, which is limited to L <= 8 at half filling \
                         (sector dimension {MAX_EXACT_DIM}); L={l} has dimension {dim}. Use method=ks",
                        self.method
                    )));
                }
            }
        }
        if self.level == Level::Moments && self.sites.len() > 1 {
            return Err(Error::Infeasible(
                "level=moments writes one table per chain length; give a single value for sites".into(),
            ));
        }
        Ok(())
    }

    /// Fully resolved configuration in the input format.
    pub fn resolved(&self) -> String {
        let sites: Vec<String> = self.sites.iter().map(|l| l.to_string()).collect();
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("name", self.name.clone());
        line("sites", sites.join(","));
        line("shape", self.shape.to_string());
        line("hopping", fmt_f64(self.hopping));
        line(
            "boundary",
            match self.boundary {
                Boundary::Open => "open".into(),
                Boundary::Periodic => "periodic".into(),
            },
        );
        line("U", self.interaction.to_string());
        line("v0", self.amplitude.to_string());
        line("beta", self.beta.to_string());
        line("dv0", fmt_f64(self.dv0));
        line("method", self.method.to_string());
        line("level", self.level.to_string());
        line("fd_step", fmt_f64(self.fd_step));
        line("alpha", fmt_f64(self.scf.alpha));
        line("tol", fmt_f64(self.scf.tol));
        line("max_iter", self.scf.max_iter.to_string());
        line("adaptive_mixing", self.scf.adaptive.to_string());
        line(
            "post_quench",
            match self.post_quench {
                PostQuench::Relaxed => "relaxed".into(),
                PostQuench::Frozen => "frozen".into(),
            },
        );
        line("dn_dv0", self.amplitude_response.to_string());
        out
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Parse flat `key = value` text; `#` starts a comment. A `preset` line
/// loads that preset before the remaining lines apply.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut entries = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigSyntax {
                line: k + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::ConfigSyntax {
                line: k + 1,
                message: "missing key before `=`".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    let mut cfg = ExperimentConfig::default();
    if let Some(i) = entries.iter().position(|(k, _)| k == "preset") {
        let (_, name) = entries.remove(i);
        cfg.set("preset", &name)?;
    }
    for (k, v) in &entries {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = Grid::parse("U", "0:10:41").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[40], 10.0);
        assert!((g.values()[1] - 0.25).abs() < 1e-15);
        assert_eq!(Grid::parse("U", "0,2,5,10").unwrap().values(), &[0.0, 2.0, 5.0, 10.0]);
        assert_eq!(Grid::parse("U", "3").unwrap().values(), &[3.0]);
        for bad in ["", "1:2", "0:1:0", "2,1", "1,1", "a", "1:2:x", "nan"] {
            assert!(matches!(Grid::parse("U", bad), Err(Error::InvalidGrid { .. })), "{bad}");
        }
    }

    #[test]
    fn parse_examples() {
        let cfg = parse_config_str("preset = fig1\n").unwrap();
        assert_eq!(cfg, crate::bench::presets::preset("fig1").unwrap());

        let cfg = parse_config_str("# dimer\nU = 0:4:5 # five points\nv0=1\n").unwrap();
        assert_eq!(cfg.interaction.len(), 5);
        assert_eq!(cfg.amplitude.values(), &[1.0]);

        let cfg = parse_config_str("dv0 = 0").unwrap();
        assert_eq!(cfg.dv0, 0.0);
    }

    #[test]
    fn distinct_diagnostics() {
        assert!(matches!(
            parse_config_str("sites = 16\nmethod = exact\nlevel = densities"),
            Err(Error::Infeasible(m)) if m.contains("L <= 8")
        ));
        assert!(matches!(
            parse_config_str("U = 1\nenergy = 3"),
            Err(Error::UnknownKey(k)) if k == "energy"
        ));
        assert!(matches!(
            parse_config_str("U 1"),
            Err(Error::ConfigSyntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config_str("v0 = 3,1"),
            Err(Error::InvalidGrid { name: "v0", .. })
        ));
        assert!(matches!(
            parse_config_str("preset = fig42"),
            Err(Error::UnknownPreset(_))
        ));
        assert!(matches!(
            parse_config_str("alpha = 1.5"),
            Err(Error::InvalidParameter { name: "alpha", .. })
        ));
        assert!(matches!(
            parse_config_str("sites = 2,4\nlevel = moments"),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn resolved_round_trips() {
        for name in crate::bench::presets::PRESETS {
            let cfg = crate::bench::presets::preset(name).unwrap();
            let again = parse_config_str(&cfg.resolved()).unwrap();
            assert_eq!(again.resolved(), cfg.resolved());
        }
    }
}

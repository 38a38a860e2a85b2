//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # simulation study at desk scale
//! mode = simulation-study
//! scenario = center-0.2
//! alpha_grid = 0:1:0.1
//! replicates = 20
//! train_size = 200
//! test_size = 400
//! seed = 1
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SimulationStudy,
    CrossValidation,
    Estimate,
    KrigeMap,
}

impl FromStr for Mode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulation-study" | "study" => Mode::SimulationStudy,
            "cross-validation" | "cv" => Mode::CrossValidation,
            "estimate" => Mode::Estimate,
            "krige-map" => Mode::KrigeMap,
            _ => bail!("unknown mode {s:?}"),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SimulationStudy => "simulation-study",
            Mode::CrossValidation => "cross-validation",
            Mode::Estimate => "estimate",
            Mode::KrigeMap => "krige-map",
        })
    }
}

/// One entry of the α grid: a value (0 meaning ILR) or the ML estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Value(f64),
    Ml,
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Value(a) => write!(f, "{a}"),
            AlphaSpec::Ml => f.write_str("ml"),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| anyhow!("{s:?} is not a number"))
}

/// Comma-separated values, `lo:hi:step` ranges and the `ml` token.
pub fn parse_alpha_grid(s: &str) -> Result<Vec<AlphaSpec>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if item == "ml" {
            out.push(AlphaSpec::Ml);
        } else if let Some((lo, rest)) = item.split_once(':') {
            let (hi, step) = rest
                .split_once(':')
                .ok_or_else(|| anyhow!("range {item:?} must be lo:hi:step"))?;
            let (lo, hi, step) = (parse_f64(lo)?, parse_f64(hi)?, parse_f64(step)?);
            if !(step > 0.0 && hi >= lo) {
                bail!("empty alpha range {item:?}");
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            for k in 0..=n {
                // round to the step's decimal grid so that 0.1·3 prints as 0.3
                let v = lo + k as f64 * step;
                out.push(AlphaSpec::Value((v * 1e10).round() / 1e10));
            }
        } else {
            out.push(AlphaSpec::Value(parse_f64(item)?));
        }
    }
    for a in &out {
        if let AlphaSpec::Value(v) = a {
            if !(v.is_finite() && *v >= 0.0) {
                bail!("alpha values must be finite and non-negative, got {v}");
            }
        }
    }
    if out.is_empty() {
        bail!("empty alpha grid");
    }
    Ok(out)
}

pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_f64)
        .collect()
}

/// Fitted multivariate covariance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// One Whittle–Matérn structure times a coregionalization matrix.
    Proportional,
    /// Nugget plus one Whittle–Matérn structure.
    NuggetMatern,
}

impl FromStr for ModelKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "proportional" => ModelKind::Proportional,
            "nugget-matern" => ModelKind::NuggetMatern,
            _ => bail!("unknown model {s:?} (proportional or nugget-matern)"),
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Proportional => "proportional",
            ModelKind::NuggetMatern => "nugget-matern",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub alpha_grid: Vec<AlphaSpec>,
    /// Extra α-IT metrics reported as `δ_a/σ_a` columns.
    pub metric_alphas: Vec<f64>,
    pub replicates: usize,
    pub train_size: usize,
    /// 0 means every point not in the training set.
    pub test_size: usize,
    pub scenario: Option<String>,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    /// Replace α = 0 by 0.01 on data with zero parts.
    pub substitute_zero_alpha: bool,
    pub alpha_max: f64,
    pub alpha_step: f64,
    /// Cells per side of the prediction grid.
    pub grid_size: usize,
    /// Smoothness of the fitted Matérn structure.
    pub nu: f64,
    /// Number of candidate scales in the profile fit.
    pub scale_grid: usize,
    /// `None` picks proportional for simulation studies, nugget + Matérn otherwise.
    pub model: Option<ModelKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::SimulationStudy,
            alpha_grid: parse_alpha_grid("0:1:0.1").unwrap(),
            metric_alphas: Vec::new(),
            replicates: 20,
            train_size: 200,
            test_size: 400,
            scenario: None,
            input: None,
            out_dir: PathBuf::from("out"),
            seed: 1,
            workers: 0,
            substitute_zero_alpha: false,
            alpha_max: 1.5,
            alpha_step: 0.01,
            grid_size: 100,
            nu: 0.5,
            scale_grid: 20,
            model: None,
        }
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let int = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| anyhow!("{key}: {v:?} is not a non-negative integer"))
        };
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "alpha_grid" | "alpha" => self.alpha_grid = parse_alpha_grid(v)?,
            "metric_alphas" => self.metric_alphas = parse_float_list(v)?,
            "replicates" | "B" => self.replicates = int(v)?,
            "train_size" | "n" => self.train_size = int(v)?,
            "test_size" | "N" => self.test_size = int(v)?,
            "scenario" => self.scenario = Some(v.to_string()),
            "input" => self.input = Some(PathBuf::from(v)),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "seed" => self.seed = v.parse().map_err(|_| anyhow!("seed: {v:?}"))?,
            "workers" => self.workers = int(v)?,
            "substitute_zero_alpha" => {
                self.substitute_zero_alpha = v.parse().map_err(|_| anyhow!("{key}: {v:?}"))?
            }
            "alpha_max" => self.alpha_max = parse_f64(v)?,
            "alpha_step" => self.alpha_step = parse_f64(v)?,
            "grid_size" => self.grid_size = int(v)?,
            "nu" => self.nu = parse_f64(v)?,
            "scale_grid" => self.scale_grid = int(v)?,
            "model" => self.model = Some(v.parse()?),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            cfg.set(k, v).with_context(|| format!("line {}", no + 1))?;
        }
        Ok(cfg)
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.unwrap_or(match self.mode {
            Mode::SimulationStudy => ModelKind::Proportional,
            _ => ModelKind::NuggetMatern,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if self.train_size < 2 {
            bail!("train_size must be at least 2");
        }
        if !(self.alpha_step > 0.0 && self.alpha_max >= self.alpha_step) {
            bail!("alpha_max/alpha_step give an empty ML grid");
        }
        if self.scale_grid < 2 {
            bail!("scale_grid must be at least 2");
        }
        if !(self.nu > 0.0) {
            bail!("nu must be positive");
        }
        Ok(())
    }

    /// Flat text form, re-parseable by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let grid: Vec<String> = self.alpha_grid.iter().map(|a| a.to_string()).collect();
        let metric: Vec<String> = self.metric_alphas.iter().map(|a| a.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("mode", self.mode.to_string());
        kv("alpha_grid", grid.join(","));
        if !metric.is_empty() {
            kv("metric_alphas", metric.join(","));
        }
        kv("replicates", self.replicates.to_string());
        kv("train_size", self.train_size.to_string());
        kv("test_size", self.test_size.to_string());
        if let Some(sc) = &self.scenario {
            kv("scenario", sc.clone());
        }
        if let Some(p) = &self.input {
            kv("input", p.display().to_string());
        }
        kv("out_dir", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        kv("substitute_zero_alpha", self.substitute_zero_alpha.to_string());
        kv("alpha_max", self.alpha_max.to_string());
        kv("alpha_step", self.alpha_step.to_string());
        kv("grid_size", self.grid_size.to_string());
        kv("nu", self.nu.to_string());
        kv("scale_grid", self.scale_grid.to_string());
        if let Some(m) = self.model {
            kv("model", m.to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid_forms() {
        let g = parse_alpha_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], AlphaSpec::Value(0.3));
        assert_eq!(g[10], AlphaSpec::Value(1.0));
        let g = parse_alpha_grid("0.01, ml ,1").unwrap();
        assert_eq!(g, vec![AlphaSpec::Value(0.01), AlphaSpec::Ml, AlphaSpec::Value(1.0)]);
        assert!(parse_alpha_grid("-0.1").is_err());
        assert!(parse_alpha_grid("").is_err());
        assert!(parse_alpha_grid("1:0:0.1").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = ExperimentConfig::parse(
            "mode = cv\n# comment\ninput = data.csv\nalpha_grid = 0.01,ml,1 # trailing\nreplicates=3\nmetric_alphas = 0.2, 0.6\nmodel = proportional\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::CrossValidation);
        assert_eq!(cfg.replicates, 3);
        assert_eq!(cfg.metric_alphas, vec![0.2, 0.6]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn bad_lines_name_the_line() {
        let err = ExperimentConfig::parse("mode = cv\nbogus = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        assert!(ExperimentConfig::parse("just words").is_err());
    }
}

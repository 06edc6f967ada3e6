//! Experiment configuration: preset defaults per (experiment, scale), a flat
//! `key=value` config-file format, and CLI overrides (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use markovopt::estimators::Compensation;

use crate::HarnessError;

pub type Result<T> = std::result::Result<T, HarnessError>;

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig1,
    Fig2,
    Nonconvex,
    Td,
    Custom,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Self::Fig1),
            "fig2" => Ok(Self::Fig2),
            "nonconvex" => Ok(Self::Nonconvex),
            "td" => Ok(Self::Td),
            "custom" => Ok(Self::Custom),
            other => Err(config_err(format!(
                "unknown experiment {other:?} (expected fig1|fig2|nonconvex|td|custom)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Nonconvex => "nonconvex",
            Self::Td => "td",
            Self::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "full" => Ok(Self::Full),
            other => Err(config_err(format!(
                "unknown scale {other:?} (expected desk|full)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Desk => "desk",
            Self::Full => "full",
        }
    }
}

/// Method selector; the SGD-DD gap is resolved per run (auto-wired to the
/// exact mixing time on finite chains).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Mag,
    AdaGrad,
    Sgd,
    SgdMlmc,
    SgdDd,
}

impl MethodName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "MAG" => Ok(Self::Mag),
            "AdaGrad" => Ok(Self::AdaGrad),
            "SGD" => Ok(Self::Sgd),
            "SGD_MLMC" => Ok(Self::SgdMlmc),
            "SGD_DD" => Ok(Self::SgdDd),
            other => Err(config_err(format!(
                "unknown method {other:?} (expected MAG|AdaGrad|SGD|SGD_MLMC|SGD_DD)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mag => "MAG",
            Self::AdaGrad => "AdaGrad",
            Self::Sgd => "SGD",
            Self::SgdMlmc => "SGD_MLMC",
            Self::SgdDd => "SGD_DD",
        }
    }

    pub fn ordinal(&self) -> u64 {
        match self {
            Self::Mag => 0,
            Self::AdaGrad => 1,
            Self::Sgd => 2,
            Self::SgdMlmc => 3,
            Self::SgdDd => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlmcKind {
    Truncated,
    Full,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scale: Scale,
    pub methods: Vec<MethodName>,
    pub seeds: u32,
    pub base_seed: u64,
    pub sample_budget: u64,
    pub record_every: u64,
    pub out: PathBuf,
    /// 0 = one worker per available core (capped by the number of runs).
    pub jobs: usize,
    /// Transition parameter of the two-state chain (fig1).
    pub chain_p: f64,
    /// Sweep values for fig2.
    pub p_list: Vec<f64>,
    pub regression_rows: usize,
    pub dim: usize,
    pub noise_variance: f64,
    pub mlmc: MlmcKind,
    pub mlmc_levels: u32,
    /// Horizon of the full geometric distribution; `None` uses the sample
    /// budget.
    pub mlmc_horizon: Option<u64>,
    pub compensation: Compensation,
    /// AdaGrad scaling; `None` = the method default for the domain.
    pub alpha: Option<f64>,
    pub sgd_c: f64,
    /// SGD-DD gap; `None` = auto-wire to the exact mixing time (finite
    /// chains only).
    pub sgd_dd_gap: Option<u64>,
    /// RandBiMod spectral parameter (nonconvex).
    pub rho: f64,
    pub td_states: usize,
    pub td_features: usize,
    pub td_gamma: f64,
    pub chain_file: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Preset defaults for one (experiment, scale) cell.
    pub fn preset(experiment: Experiment, scale: Scale) -> Self {
        let desk = scale == Scale::Desk;
        let mut config = Self {
            experiment,
            scale,
            methods: match experiment {
                Experiment::Fig1 | Experiment::Nonconvex => vec![
                    MethodName::Mag,
                    MethodName::AdaGrad,
                    MethodName::Sgd,
                    MethodName::SgdMlmc,
                ],
                Experiment::Fig2 => {
                    vec![MethodName::Mag, MethodName::AdaGrad, MethodName::Sgd]
                }
                Experiment::Td | Experiment::Custom => vec![MethodName::Mag],
            },
            seeds: 5,
            base_seed: 42,
            sample_budget: 0,
            record_every: 0,
            out: PathBuf::from(format!("{}_{}.csv", experiment.name(), scale.name())),
            jobs: 0,
            chain_p: if desk { 1e-3 } else { 1e-4 },
            p_list: if desk {
                vec![1e-1, 1e-2, 1e-3]
            } else {
                vec![1e-1, 1e-2, 1e-3, 1e-4]
            },
            regression_rows: if desk { 50 } else { 250 },
            dim: 0,
            noise_variance: 1e-3,
            mlmc: MlmcKind::Truncated,
            mlmc_levels: 5,
            mlmc_horizon: None,
            compensation: Compensation::ExactInverseProbability,
            // The reference experiments left every learning rate untuned:
            // alpha = 1 for the adaptive methods. `alpha=auto` selects the
            // domain-derived theory default instead.
            alpha: match experiment {
                Experiment::Fig1 | Experiment::Fig2 | Experiment::Nonconvex => Some(1.0),
                Experiment::Td | Experiment::Custom => None,
            },
            sgd_c: 1.0,
            sgd_dd_gap: None,
            rho: if desk { 0.99 } else { 0.999 },
            td_states: if desk { 5 } else { 10 },
            td_features: if desk { 3 } else { 5 },
            td_gamma: 0.9,
            chain_file: None,
        };
        match experiment {
            Experiment::Fig1 | Experiment::Fig2 => {
                config.dim = if desk { 20 } else { 100 };
                config.sample_budget = if desk { 500_000 } else { 5_000_000 };
                config.record_every = if desk { 10_000 } else { 50_000 };
            }
            Experiment::Nonconvex => {
                config.dim = if desk { 10 } else { 50 };
                config.sample_budget = if desk { 100_000 } else { 5_000_000 };
                config.record_every = if desk { 10_000 } else { 50_000 };
            }
            Experiment::Td | Experiment::Custom => {
                config.dim = config.td_features;
                config.sample_budget = if desk { 50_000 } else { 1_000_000 };
                config.record_every = if desk { 1_000 } else { 10_000 };
            }
        }
        config
    }

    /// Applies one `key=value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_u64 = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|e| config_err(format!("bad integer for {key}: {e}")))
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|e| config_err(format!("bad integer for {key}: {e}")))
        };
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|e| config_err(format!("bad number for {key}: {e}")))
        };
        match key {
            "experiment" => self.experiment = Experiment::parse(value)?,
            "scale" => self.scale = Scale::parse(value)?,
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(MethodName::parse)
                    .collect::<Result<Vec<_>>>()?;
            }
            "seeds" => self.seeds = parse_u64(value)? as u32,
            "seed" => self.base_seed = parse_u64(value)?,
            "budget" | "sample_budget" => self.sample_budget = parse_u64(value)?,
            "record_every" => self.record_every = parse_u64(value)?,
            "out" => self.out = PathBuf::from(value),
            "jobs" => self.jobs = parse_usize(value)?,
            "p" => self.chain_p = parse_f64(value)?,
            "p_list" => {
                self.p_list = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(parse_f64)
                    .collect::<Result<Vec<_>>>()?;
            }
            "rows" => self.regression_rows = parse_usize(value)?,
            "dim" => self.dim = parse_usize(value)?,
            "noise_var" => self.noise_variance = parse_f64(value)?,
            "mlmc" => {
                self.mlmc = match value {
                    "truncated" => MlmcKind::Truncated,
                    "full" => MlmcKind::Full,
                    other => {
                        return Err(config_err(format!(
                            "unknown mlmc kind {other:?} (expected truncated|full)"
                        )))
                    }
                }
            }
            "mlmc_k" => self.mlmc_levels = parse_u64(value)? as u32,
            "mlmc_horizon" => {
                self.mlmc_horizon = if value == "auto" {
                    None
                } else {
                    Some(parse_u64(value)?)
                }
            }
            "compensation" => {
                self.compensation = match value {
                    "exact" => Compensation::ExactInverseProbability,
                    "paper" => Compensation::PaperPowerOfTwo,
                    other => {
                        return Err(config_err(format!(
                            "unknown compensation {other:?} (expected exact|paper)"
                        )))
                    }
                }
            }
            "alpha" => {
                self.alpha = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(value)?)
                }
            }
            "sgd_c" => self.sgd_c = parse_f64(value)?,
            "sgd_dd_gap" => {
                self.sgd_dd_gap = if value == "auto" {
                    None
                } else {
                    Some(parse_u64(value)?)
                }
            }
            "rho" => self.rho = parse_f64(value)?,
            "td_states" => self.td_states = parse_usize(value)?,
            "td_features" => {
                self.td_features = parse_usize(value)?;
                if matches!(self.experiment, Experiment::Td | Experiment::Custom) {
                    self.dim = self.td_features;
                }
            }
            "td_gamma" => self.td_gamma = parse_f64(value)?,
            "chain_file" => self.chain_file = Some(PathBuf::from(value)),
            other => return Err(config_err(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds < 1 {
            return Err(config_err("seeds must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods must be non-empty"));
        }
        if self.sample_budget == 0 {
            return Err(config_err("sample budget must be positive"));
        }
        if self.record_every > 0 && self.sample_budget < self.record_every {
            return Err(config_err("sample budget must be >= record_every"));
        }
        if self.experiment == Experiment::Fig2 && self.p_list.is_empty() {
            return Err(config_err("fig2 requires a non-empty p_list"));
        }
        for &p in std::iter::once(&self.chain_p).chain(&self.p_list) {
            if !(p > 0.0 && p < 1.0) {
                return Err(config_err(format!(
                    "transition parameter must lie in (0, 1), got {p}"
                )));
            }
        }
        if self.experiment == Experiment::Nonconvex {
            if self.dim == 0 || self.dim % 2 != 0 {
                return Err(config_err("nonconvex dim must be positive and even"));
            }
            if !(self.rho > 0.0 && self.rho < 1.0) {
                return Err(config_err("rho must lie in (0, 1)"));
            }
            if self.methods.contains(&MethodName::SgdDd) && self.sgd_dd_gap.is_none() {
                return Err(config_err(
                    "SGD_DD over the AR(1) stream needs an explicit sgd_dd_gap \
                     (no finite-chain mixing time to wire it to)",
                ));
            }
        }
        if self.experiment == Experiment::Custom && self.chain_file.is_none() {
            return Err(config_err("custom experiment requires chain_file=<path>"));
        }
        if !(self.td_gamma >= 0.0 && self.td_gamma < 1.0) {
            return Err(config_err("td_gamma must lie in [0, 1)"));
        }
        if self.mlmc_levels == 0 || self.mlmc_levels > 62 {
            return Err(config_err("mlmc_k must lie in [1, 62]"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(config_err("alpha must be positive"));
            }
        }
        if !(self.sgd_c > 0.0) {
            return Err(config_err("sgd_c must be positive"));
        }
        Ok(())
    }
}

/// Reads a flat `key=value` config file: one pair per line, `#` comments and
/// blank lines ignored.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_err(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Resolves the final configuration from (in increasing precedence) the
/// preset, the config file, and the CLI pairs.
pub fn resolve_config(
    cli_experiment: Option<&str>,
    cli_scale: Option<&str>,
    config_file: Option<&Path>,
    cli_pairs: &[(String, String)],
) -> Result<ExperimentConfig> {
    let file_pairs = match config_file {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    // The experiment and scale pick the preset, so resolve them first.
    let mut first: BTreeMap<&str, &str> = BTreeMap::new();
    for (k, v) in file_pairs.iter().chain(cli_pairs) {
        if k == "experiment" || k == "scale" {
            first.insert(k, v);
        }
    }
    let experiment = cli_experiment
        .or_else(|| first.get("experiment").copied())
        .ok_or_else(|| config_err("no experiment selected (use --experiment)"))?;
    let scale = cli_scale
        .or_else(|| first.get("scale").copied())
        .unwrap_or("desk");
    let mut config = ExperimentConfig::preset(Experiment::parse(experiment)?, Scale::parse(scale)?);
    for (k, v) in file_pairs.iter().chain(cli_pairs) {
        if k != "experiment" && k != "scale" {
            config.apply(k, v)?;
        }
    }
    Ok(config)
}

/// Documented override keys, shown by `--help`.
pub const CONFIG_KEYS_HELP: &str = "\
Config keys (config file lines and trailing KEY=VALUE overrides; flags win):
  experiment   fig1|fig2|nonconvex|td|custom
  scale        desk|full
  methods      comma list of MAG,AdaGrad,SGD,SGD_MLMC,SGD_DD
  seeds        number of seeds (default 5)
  seed         base seed (default 42; MARKOVOPT_SEED env overrides)
  budget       sample budget per run (alias sample_budget)
  record_every samples between metric records
  out          output CSV path
  jobs         parallel runs (0 = auto)
  p            two-state transition parameter (fig1)
  p_list       comma list of transition parameters (fig2)
  rows         regression rows per state
  dim          problem dimension (even for nonconvex)
  noise_var    regression noise variance
  mlmc         truncated|full level distribution (default truncated)
  mlmc_k       truncation level K (default 5)
  mlmc_horizon full-geometric horizon or `auto` (= budget)
  compensation exact|paper correction multiplier (default exact)
  alpha        AdaGrad scaling; preset defaults: 1 (fig1/fig2/nonconvex,
               untuned), sqrt(2)*R (td/custom); `auto` = domain default
  sgd_c        SGD rate scale c in c/sqrt(t) (default 1)
  sgd_dd_gap   SGD_DD gap or `auto` (= exact mixing time; finite chains only)
  rho          RandBiMod spectral parameter (nonconvex)
  td_states    number of MRP states
  td_features  TD feature dimension
  td_gamma     discount factor
  chain_file   transition-matrix file (custom experiment)";

//! INI-style configuration files.
//!
//! Five sections with snake_case keys; rates are per-annum decimals,
//! volatilities per √year, amounts in currency units:
//!
//! ```ini
//! [market]
//! r = 0.05          # risk-free rate
//! mu1 = 0.10        # market-portfolio drift
//! sigma1 = 0.2      # market-portfolio volatility
//!
//! [collateral]
//! sigma2 = 0.15     # collateral volatility
//! delta = 0.05      # dividend rate
//! rho = 0.9         # correlation with the market portfolio
//!
//! [loan]
//! principal = 90
//! alpha = 0.05      # loan rate
//! v0 = 100          # collateral value at inception
//! horizon = perpetual   # or: finite
//! # maturity = 5        # years, required when horizon = finite
//!
//! [preference]
//! gamma = 0.01      # exponential-utility risk aversion
//!
//! [solver]          # optional; defaults shown in the README
//! nv = 800
//! nt = 2000
//! v_max = auto
//! spacing = uniform     # or: geometric
//! theta = 0.5
//! rannacher_steps = 4
//! omega = 1.4
//! tol = 1e-9
//! max_iter = 10000
//! detection_tol = 1e-7
//!
//! [oracle]          # optional; Monte Carlo / tree controls
//! n_paths = 100000
//! n_steps = 1000
//! seed = 42
//! antithetic = true
//! t_trunc = auto
//! ```
//!
//! Unknown sections or keys are errors, reported with their line number.
//! `#` and `;` start comments.

use std::collections::BTreeMap;

use stockloan_core::{
    CollateralModel, Horizon, LoanTerms, MarketModel, PathConfig, RiskPreference, SolverConfig,
};

/// A configuration problem: the message carries the file/line location.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("market", &["r", "mu1", "sigma1"]),
    ("collateral", &["sigma2", "delta", "rho"]),
    (
        "loan",
        &["principal", "alpha", "v0", "horizon", "maturity"],
    ),
    ("preference", &["gamma"]),
    (
        "solver",
        &[
            "nv",
            "nt",
            "v_max",
            "spacing",
            "theta",
            "rannacher_steps",
            "omega",
            "tol",
            "max_iter",
            "detection_tol",
        ],
    ),
    (
        "oracle",
        &["n_paths", "n_steps", "seed", "antithetic", "t_trunc"],
    ),
];

fn known_key(section: &str, key: &str) -> bool {
    KNOWN_KEYS
        .iter()
        .any(|(s, keys)| *s == section && keys.contains(&key))
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(idx) => &line[..idx],
        None => line,
    }
}

/// Parsed key–value pairs with the location of each entry.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let location = format!("{source}:{}", idx + 1);
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError(format!("{location}: unterminated section header")));
                };
                section = name.trim().to_ascii_lowercase();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == section) {
                    return Err(ConfigError(format!(
                        "{location}: unknown section `[{section}]`"
                    )));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "{location}: expected `key = value`, got `{line}`"
                )));
            };
            if section.is_empty() {
                return Err(ConfigError(format!(
                    "{location}: key outside of any [section]"
                )));
            }
            let key = key.trim().to_ascii_lowercase();
            if !known_key(&section, &key) {
                return Err(ConfigError(format!(
                    "{location}: unknown key `{key}` in [{section}]"
                )));
            }
            entries.insert(
                format!("{section}.{key}"),
                (value.trim().to_string(), location),
            );
        }
        Ok(Self { entries })
    }

    /// Applies a `--set section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let Some((path, value)) = spec.split_once('=') else {
            return Err(ConfigError(format!(
                "--set {spec}: expected section.key=value"
            )));
        };
        let path = path.trim().to_ascii_lowercase();
        let Some((section, key)) = path.split_once('.') else {
            return Err(ConfigError(format!(
                "--set {spec}: expected section.key=value"
            )));
        };
        if !known_key(section, key) {
            return Err(ConfigError(format!(
                "--set {spec}: unknown key `{key}` in [{section}]"
            )));
        }
        self.entries.insert(
            path.clone(),
            (value.trim().to_string(), format!("--set {path}")),
        );
        Ok(())
    }

    fn get(&self, path: &str) -> Option<&(String, String)> {
        self.entries.get(path)
    }

    fn required(&self, path: &str) -> Result<&(String, String), ConfigError> {
        self.get(path).ok_or_else(|| {
            ConfigError(format!(
                "missing required key `{path}` (supply a --config file or --set {path}=...)"
            ))
        })
    }

    fn required_f64(&self, path: &str) -> Result<f64, ConfigError> {
        let (value, location) = self.required(path)?;
        value
            .parse::<f64>()
            .map_err(|e| ConfigError(format!("{location}: bad number `{value}` for {path}: {e}")))
    }

    fn optional_f64(&self, path: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some((value, location)) => value.parse::<f64>().map(Some).map_err(|e| {
                ConfigError(format!("{location}: bad number `{value}` for {path}: {e}"))
            }),
        }
    }

    fn optional_usize(&self, path: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some((value, location)) => value.parse::<usize>().map(Some).map_err(|e| {
                ConfigError(format!("{location}: bad count `{value}` for {path}: {e}"))
            }),
        }
    }

    /// `auto` (or absence) maps to `None`.
    fn auto_f64(&self, path: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some((value, _)) if value.eq_ignore_ascii_case("auto") => Ok(None),
            Some((value, location)) => value.parse::<f64>().map(Some).map_err(|e| {
                ConfigError(format!("{location}: bad number `{value}` for {path}: {e}"))
            }),
        }
    }
}

/// Monte Carlo / tree controls for `oracle-check`.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub paths: PathConfig,
    pub t_trunc: Option<f64>,
}

/// Fully validated model + solver configuration.
#[derive(Debug)]
pub struct LoadedConfig {
    pub market: MarketModel,
    pub collateral: CollateralModel,
    pub loan: LoanTerms,
    pub pref: RiskPreference,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
}

pub fn load_solver(raw: &RawConfig) -> Result<SolverConfig, ConfigError> {
    let defaults = SolverConfig::default();
    let spacing = match raw.get("solver.spacing") {
        None => defaults.geometric_spacing,
        Some((value, location)) => match value.to_ascii_lowercase().as_str() {
            "uniform" => false,
            "geometric" => true,
            other => {
                return Err(ConfigError(format!(
                    "{location}: spacing must be `uniform` or `geometric`, got `{other}`"
                )))
            }
        },
    };
    Ok(SolverConfig {
        nv: raw.optional_usize("solver.nv")?.unwrap_or(defaults.nv),
        nt: raw.optional_usize("solver.nt")?.unwrap_or(defaults.nt),
        v_max: raw.auto_f64("solver.v_max")?,
        geometric_spacing: spacing,
        theta: raw.optional_f64("solver.theta")?.unwrap_or(defaults.theta),
        rannacher_steps: raw
            .optional_usize("solver.rannacher_steps")?
            .unwrap_or(defaults.rannacher_steps),
        omega: raw.optional_f64("solver.omega")?.unwrap_or(defaults.omega),
        tol: raw.optional_f64("solver.tol")?.unwrap_or(defaults.tol),
        max_iter: raw
            .optional_usize("solver.max_iter")?
            .unwrap_or(defaults.max_iter),
        detection_tol: raw
            .optional_f64("solver.detection_tol")?
            .unwrap_or(defaults.detection_tol),
    })
}

pub fn load_oracle(raw: &RawConfig) -> Result<OracleConfig, ConfigError> {
    let defaults = PathConfig::default();
    let antithetic = match raw.get("oracle.antithetic") {
        None => defaults.antithetic,
        Some((value, location)) => match value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            other => {
                return Err(ConfigError(format!(
                    "{location}: antithetic must be true or false, got `{other}`"
                )))
            }
        },
    };
    let seed = match raw.get("oracle.seed") {
        None => defaults.seed,
        Some((value, location)) => value.parse::<u64>().map_err(|e| {
            ConfigError(format!("{location}: bad seed `{value}`: {e}"))
        })?,
    };
    Ok(OracleConfig {
        paths: PathConfig {
            n_paths: raw
                .optional_usize("oracle.n_paths")?
                .unwrap_or(defaults.n_paths),
            n_steps: raw
                .optional_usize("oracle.n_steps")?
                .unwrap_or(defaults.n_steps),
            seed,
            antithetic,
        },
        t_trunc: raw.auto_f64("oracle.t_trunc")?,
    })
}

pub fn load(raw: &RawConfig) -> Result<LoadedConfig, ConfigError> {
    let wrap = |path: &str, e: stockloan_core::Error| {
        let location = raw
            .get(path)
            .map(|(_, loc)| loc.as_str())
            .unwrap_or("config");
        ConfigError(format!("{location}: {e}"))
    };

    let market = MarketModel::new(
        raw.required_f64("market.r")?,
        raw.required_f64("market.mu1")?,
        raw.required_f64("market.sigma1")?,
    )
    .map_err(|e| wrap("market.sigma1", e))?;

    let collateral = CollateralModel::new(
        &market,
        raw.required_f64("collateral.sigma2")?,
        raw.required_f64("collateral.delta")?,
        raw.required_f64("collateral.rho")?,
    )
    .map_err(|e| wrap("collateral.sigma2", e))?;

    let (horizon_value, horizon_location) = raw.required("loan.horizon")?;
    let horizon = match horizon_value.to_ascii_lowercase().as_str() {
        "perpetual" => {
            if let Some((_, location)) = raw.get("loan.maturity") {
                return Err(ConfigError(format!(
                    "{location}: maturity is only valid with horizon = finite"
                )));
            }
            Horizon::Perpetual
        }
        "finite" => Horizon::Finite {
            maturity: raw.required_f64("loan.maturity")?,
        },
        other => {
            return Err(ConfigError(format!(
                "{horizon_location}: horizon must be `perpetual` or `finite`, got `{other}`"
            )))
        }
    };
    let loan = LoanTerms::new(
        raw.required_f64("loan.principal")?,
        raw.required_f64("loan.alpha")?,
        raw.required_f64("loan.v0")?,
        horizon,
    )
    .map_err(|e| wrap("loan.principal", e))?;

    let pref = RiskPreference::new(raw.required_f64("preference.gamma")?)
        .map_err(|e| wrap("preference.gamma", e))?;

    Ok(LoadedConfig {
        market,
        collateral,
        loan,
        pref,
        solver: load_solver(raw)?,
        oracle: load_oracle(raw)?,
    })
}

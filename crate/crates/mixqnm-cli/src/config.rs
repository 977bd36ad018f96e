use std::path::Path;

use mixqnm::amplitude_qnm::{classify, classify_regime, Regime, RegimeRule};
use mixqnm::correlator_qnm::CVec16;
use mixqnm::evolution::{validate_initial, vacuum_state, KeepOrder};
use mixqnm::kernels::Kernels;
use mixqnm::spectral::{ModeParams, SpectralModel};
use mixqnm::volterra_oracle::OracleConfig;
use mixqnm::{c, MixError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A rejected configuration: stable code plus message.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub code: &'static str,
    pub message: String,
}

impl ConfigError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        ConfigError { code, message: message.into() }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: SpectralModel,
    pub params: ParamsSection,
    #[serde(default = "auto")]
    pub regime: String,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub keep: KeepOrder,
    #[serde(default)]
    pub output: OutputSection,
}

fn auto() -> String {
    "auto".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub m: [f64; 2],
    #[serde(default)]
    pub kmag: f64,
    pub beta: Beta,
}

/// A number or the string "inf".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Value(f64),
    Word(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSection {
    Shortcut(String),
    Explicit(ExplicitInitial),
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection::Shortcut("vacuum".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInitial {
    #[serde(default)]
    pub phi0: [f64; 2],
    #[serde(default)]
    pub pi0: [f64; 2],
    /// 16 [re, im] pairs in the order A_k, A_−k, B_k, B_k*; omitted means vacuum.
    #[serde(default)]
    pub d0: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "auto_tmax")]
    pub t_max: TMax,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn auto_tmax() -> TMax {
    TMax::Word("auto".into())
}

fn default_points() -> usize {
    401
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { t_max: auto_tmax(), n_points: default_points() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TMax {
    Value(f64),
    Word(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Per-command default when absent.
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub path: Option<String>,
}

/// Regime request from the config or `--regime`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeChoice {
    Auto,
    NonDegenerate,
    NearlyDegenerate,
    Hierarchy,
}

impl RegimeChoice {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "auto" => Ok(RegimeChoice::Auto),
            "non-degenerate" => Ok(RegimeChoice::NonDegenerate),
            "nearly-degenerate" => Ok(RegimeChoice::NearlyDegenerate),
            "hierarchy" => Ok(RegimeChoice::Hierarchy),
            other => Err(ConfigError::new("config-regime", format!("unknown regime {other:?}; expected auto|non-degenerate|nearly-degenerate|hierarchy"))),
        }
    }

    pub fn resolve(self, model: &SpectralModel, params: &ModeParams) -> mixqnm::Result<Regime> {
        match self {
            RegimeChoice::Auto => classify(model, params, RegimeRule::default()),
            RegimeChoice::NonDegenerate => Ok(Regime::NonDegenerate),
            RegimeChoice::NearlyDegenerate => Ok(Regime::NearlyDegenerate),
            RegimeChoice::Hierarchy => {
                // Force the hierarchy branch and let the splitting pick the variant.
                let k = Kernels::new(model, params).at(params.omega_bar(), false)?;
                let rule = RegimeRule { kappa: f64::INFINITY, hierarchy_ratio: 0.0 };
                match classify_regime(model, params, &k, rule) {
                    Regime::NonDegenerate => Err(MixError::Precondition("hierarchy branch needs a nonzero self-energy".into())),
                    r => Ok(r),
                }
            }
        }
    }
}

/// Fully checked configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: SpectralModel,
    pub params: ModeParams,
    pub regime: RegimeChoice,
    pub phi0: [f64; 2],
    pub pi0: [f64; 2],
    pub d0: CVec16,
    pub t_max: Option<f64>,
    pub n_points: usize,
    pub oracle: OracleConfig,
    pub keep: KeepOrder,
    pub output: OutputSection,
    /// sha256 of the canonical JSON form.
    pub hash: String,
}

fn serde_code(e: &serde_json::Error) -> &'static str {
    use serde_json::error::Category;
    match e.classify() {
        Category::Syntax | Category::Eof => "config-syntax",
        Category::Io => "config-io",
        Category::Data => {
            let msg = e.to_string();
            if msg.starts_with("unknown field") {
                "config-unknown-key"
            } else if msg.starts_with("missing field") {
                "config-missing-field"
            } else if msg.starts_with("unknown variant") {
                "config-variant"
            } else {
                "config-type"
            }
        }
    }
}

pub fn load(path: &Path) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config-io", format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Resolved, ConfigError> {
    let raw: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::new(serde_code(&e), e.to_string()))?;
    resolve(raw)
}

pub fn resolve(raw: RunConfig) -> Result<Resolved, ConfigError> {
    let canonical = serde_json::to_string(&raw).map_err(|e| ConfigError::new("config-type", e.to_string()))?;
    let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));

    raw.model.validate().map_err(|e| ConfigError::new("config-model", e.to_string()))?;
    let beta = match &raw.params.beta {
        Beta::Value(b) => *b,
        Beta::Word(w) if w == "inf" => f64::INFINITY,
        Beta::Word(w) => return Err(ConfigError::new("config-beta", format!("beta must be a number or \"inf\", got {w:?}"))),
    };
    let params = ModeParams { m: raw.params.m, kmag: raw.params.kmag, beta };
    params.validate().map_err(|e| ConfigError::new("config-params", e.to_string()))?;
    let regime = RegimeChoice::parse(&raw.regime)?;

    let (phi0, pi0, d0) = match raw.initial {
        InitialSection::Shortcut(s) if s == "vacuum" => ([0.0; 2], [0.0; 2], vacuum_state()),
        InitialSection::Shortcut(s) => return Err(ConfigError::new("config-initial", format!("unknown initial shortcut {s:?}"))),
        InitialSection::Explicit(e) => {
            let d0 = match e.d0 {
                None => vacuum_state(),
                Some(v) if v.len() == 16 => CVec16::from_iterator(v.iter().map(|p| c(p[0], p[1]))),
                Some(v) => return Err(ConfigError::new("config-initial", format!("d0 needs 16 [re, im] pairs, got {}", v.len()))),
            };
            if e.phi0.iter().chain(&e.pi0).any(|x| !x.is_finite()) {
                return Err(ConfigError::new("config-initial", "phi0 and pi0 must be finite"));
            }
            (e.phi0, e.pi0, d0)
        }
    };
    validate_initial(&d0).map_err(|e| ConfigError::new("config-hermiticity", e.to_string()))?;

    let t_max = match raw.grid.t_max {
        TMax::Value(t) if t.is_finite() && t > 0.0 => Some(t),
        TMax::Value(t) => return Err(ConfigError::new("config-grid", format!("t_max must be positive and finite, got {t}"))),
        TMax::Word(w) if w == "auto" => None,
        TMax::Word(w) => return Err(ConfigError::new("config-grid", format!("t_max must be a number or \"auto\", got {w:?}"))),
    };
    if raw.grid.n_points < 2 {
        return Err(ConfigError::new("config-points", format!("n_points must be at least 2, got {}", raw.grid.n_points)));
    }
    raw.oracle.validate().map_err(|e| ConfigError::new("config-oracle", e.to_string()))?;

    Ok(Resolved {
        model: raw.model,
        params,
        regime,
        phi0,
        pi0,
        d0,
        t_max,
        n_points: raw.grid.n_points,
        oracle: raw.oracle,
        keep: raw.keep,
        output: raw.output,
        hash,
    })
}

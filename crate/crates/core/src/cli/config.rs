//! Experiment configuration (TOML) with strict schema checks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub dp: DpConfig,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub figures: FigureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub matrix_source: MatrixSource,
    /// Ground-truth state; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
}

/// `"random_seeded"` or `{ csv_path = "..." }`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawSource", into = "RawSource")]
pub enum MatrixSource {
    #[default]
    RandomSeeded,
    Csv { csv_path: PathBuf },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSource {
    Name(String),
    Csv(CsvSource),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvSource {
    csv_path: PathBuf,
}

impl TryFrom<RawSource> for MatrixSource {
    type Error = String;

    fn try_from(raw: RawSource) -> Result<Self, String> {
        match raw {
            RawSource::Name(s) if s == "random_seeded" => Ok(Self::RandomSeeded),
            RawSource::Name(s) => Err(format!("unknown matrix_source `{s}`")),
            RawSource::Csv(c) => Ok(Self::Csv { csv_path: c.csv_path }),
        }
    }
}

impl From<MatrixSource> for RawSource {
    fn from(s: MatrixSource) -> Self {
        match s {
            MatrixSource::RandomSeeded => RawSource::Name("random_seeded".into()),
            MatrixSource::Csv { csv_path } => RawSource::Csv(CsvSource { csv_path }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default)]
    pub indices: Vec<usize>,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stealth_coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    ChiSquare,
    GaussianOutput,
    GaussianInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    #[serde(default = "default_mechanism")]
    pub mechanism: MechanismKind,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_r_prime")]
    pub r_prime: u32,
    #[serde(default)]
    pub nu_mean: f64,
    /// Calibrated from `(epsilon, delta)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_sigma: Option<f64>,
    /// Derived from the Gaussian mechanism when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_k: Option<f64>,
    #[serde(default = "default_bound")]
    pub delta_h_bound: f64,
    #[serde(default = "default_scan")]
    pub scan_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_domain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_grid: Option<Vec<f64>>,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            mechanism: default_mechanism(),
            epsilon: 1.0,
            delta: default_delta(),
            r_prime: default_r_prime(),
            nu_mean: 0.0,
            nu_sigma: None,
            input_k: None,
            delta_h_bound: default_bound(),
            scan_count: default_scan(),
            theta_domain: None,
            epsilon_grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeChoice {
    #[default]
    Auto,
    ChiSquare,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub regime: RegimeChoice,
    #[serde(default)]
    pub recalibrate_threshold: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            alpha_grid: None,
            regime: RegimeChoice::Auto,
            recalibrate_threshold: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: 0,
            workers: default_workers(),
        }
    }
}

/// Parameters of the abstract Gaussian-regime experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    #[serde(default = "default_theta0")]
    pub theta_z0: f64,
    #[serde(default = "one")]
    pub sigma_z0: f64,
    #[serde(default = "default_sigma_fig3")]
    pub sigma_z1_fig3: f64,
    #[serde(default = "default_sigma_z1")]
    pub sigma_z1: f64,
    /// `θ_{z,1} = ratio · θ_{z,0}` for fig5/fig6.
    #[serde(default = "default_ratio")]
    pub theta_ratio: f64,
    #[serde(default = "default_fig3_deltas")]
    pub fig3_delta_thetas: Vec<f64>,
    #[serde(default = "default_fig4_deltas")]
    pub fig4_delta_thetas: Vec<f64>,
    #[serde(default = "default_eps_o")]
    pub fig4_epsilon_o: Vec<f64>,
    /// Measurement count used to turn `ε_o` into a total budget.
    #[serde(default = "default_fig_m")]
    pub m: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_nu_grid")]
    pub nu_sigma_grid: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub fig6_alpha: f64,
}

impl Default for FigureConfig {
    fn default() -> Self {
        toml::from_str("").expect("figure defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn default_mechanism() -> MechanismKind {
    MechanismKind::ChiSquare
}
fn default_delta() -> f64 {
    0.1
}
fn default_r_prime() -> u32 {
    crate::mechanism::DEFAULT_R_PRIME
}
fn default_bound() -> f64 {
    0.1
}
fn default_scan() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_trials() -> usize {
    100_000
}
fn default_workers() -> usize {
    1
}
fn default_theta0() -> f64 {
    10.0
}
fn default_sigma_fig3() -> f64 {
    2.0
}
fn default_sigma_z1() -> f64 {
    4.0
}
fn default_ratio() -> f64 {
    1.3
}
fn default_fig3_deltas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 3.0, 5.0]
}
fn default_fig4_deltas() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 5.0]
}
fn default_eps_o() -> Vec<f64> {
    (0..=24).map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / 24.0)).collect()
}
fn default_fig_m() -> usize {
    20
}
fn default_nu_grid() -> Vec<f64> {
    (0..=20).map(|i| 0.5 * i as f64).collect()
}

/// A config problem, reported with the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SchemaError {}

fn bad(key: &str, why: impl std::fmt::Display) -> SchemaError {
    SchemaError(format!("{key}: {why}"))
}

fn check_prob_open(key: &str, v: f64) -> Result<(), SchemaError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(bad(key, format!("{v} must lie in (0, 1)")))
    }
}

fn check_positive(key: &str, v: f64) -> Result<(), SchemaError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("{v} must be positive")))
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                m: 20,
                n: 5,
                sigma: 1.0,
                lambda: 0.0,
                matrix_source: MatrixSource::RandomSeeded,
                state: None,
            },
            attack: AttackConfig {
                indices: vec![3],
                values: vec![4.0],
                stealth_coeffs: None,
            },
            dp: DpConfig::default(),
            test: TestConfig::default(),
            mc: McConfig::default(),
            figures: FigureConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, SchemaError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SchemaError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let MatrixSource::Csv { csv_path } = &mut cfg.model.matrix_source {
            if csv_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv_path = dir.join(&*csv_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization. `mc.workers` is excluded
    /// since outputs do not depend on it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.mc.workers = 1;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let m = &self.model;
        if m.m == 0 {
            return Err(bad("model.m", "must be >= 1"));
        }
        if m.n == 0 {
            return Err(bad("model.n", "must be >= 1"));
        }
        check_positive("model.sigma", m.sigma)?;
        if !(m.lambda >= 0.0 && m.lambda.is_finite()) {
            return Err(bad("model.lambda", format!("{} must be >= 0", m.lambda)));
        }
        if m.lambda == 0.0 && m.m < m.n {
            return Err(bad("model.lambda", "must be > 0 when m < n"));
        }
        if let Some(s) = &m.state {
            if s.len() != m.n {
                return Err(bad("model.state", format!("needs {} entries, got {}", m.n, s.len())));
            }
        }

        let a = &self.attack;
        if a.indices.len() != a.values.len() {
            return Err(bad("attack.values", "must match attack.indices in length"));
        }
        if let Some(&i) = a.indices.iter().find(|&&i| i >= m.m) {
            return Err(bad("attack.indices", format!("index {i} >= model.m = {}", m.m)));
        }
        if let Some(c) = &a.stealth_coeffs {
            if !a.indices.is_empty() {
                return Err(bad("attack.stealth_coeffs", "cannot be combined with attack.indices"));
            }
            if c.len() != m.n {
                return Err(bad("attack.stealth_coeffs", format!("needs {} entries", m.n)));
            }
            if m.lambda != 0.0 {
                return Err(bad("attack.stealth_coeffs", "requires model.lambda = 0"));
            }
        }

        let d = &self.dp;
        check_positive("dp.epsilon", d.epsilon)?;
        check_prob_open("dp.delta", d.delta)?;
        if d.r_prime == 0 {
            return Err(bad("dp.r_prime", "must be >= 1"));
        }
        if !d.nu_mean.is_finite() {
            return Err(bad("dp.nu_mean", "must be finite"));
        }
        if let Some(s) = d.nu_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(bad("dp.nu_sigma", format!("{s} must be >= 0")));
            }
        }
        if let Some(k) = d.input_k {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(bad("dp.input_k", format!("{k} must be >= 0")));
            }
        }
        check_positive("dp.delta_h_bound", d.delta_h_bound)?;
        if d.scan_count == 0 {
            return Err(bad("dp.scan_count", "must be >= 1"));
        }
        if let Some([lo, hi]) = d.theta_domain {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(bad("dp.theta_domain", format!("[{lo}, {hi}] is empty")));
            }
        }
        if let Some(g) = &d.epsilon_grid {
            if g.is_empty() {
                return Err(bad("dp.epsilon_grid", "must not be empty"));
            }
            if let Some(e) = g.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                return Err(bad("dp.epsilon_grid", format!("{e} must be positive")));
            }
        }

        check_prob_open("test.alpha", self.test.alpha)?;
        if let Some(g) = &self.test.alpha_grid {
            if g.is_empty() {
                return Err(bad("test.alpha_grid", "must not be empty"));
            }
            for &v in g {
                check_prob_open("test.alpha_grid", v)?;
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("test.alpha_grid", "must be strictly increasing"));
            }
        }

        if self.mc.trials == 0 {
            return Err(bad("mc.trials", "must be >= 1"));
        }
        if self.mc.workers == 0 {
            return Err(bad("mc.workers", "must be >= 1"));
        }

        let f = &self.figures;
        check_positive("figures.sigma_z0", f.sigma_z0)?;
        check_positive("figures.sigma_z1_fig3", f.sigma_z1_fig3)?;
        check_positive("figures.sigma_z1", f.sigma_z1)?;
        if !f.theta_z0.is_finite() || !f.theta_ratio.is_finite() {
            return Err(bad("figures.theta_z0", "must be finite"));
        }
        check_prob_open("figures.delta", f.delta)?;
        check_prob_open("figures.fig6_alpha", f.fig6_alpha)?;
        if f.m == 0 {
            return Err(bad("figures.m", "must be >= 1"));
        }
        if let Some(e) = f.fig4_epsilon_o.iter().find(|e| !(**e > 0.0)) {
            return Err(bad("figures.fig4_epsilon_o", format!("{e} must be positive")));
        }
        if let Some(s) = f.nu_sigma_grid.iter().find(|s| !(**s >= 0.0)) {
            return Err(bad("figures.nu_sigma_grid", format!("{s} must be >= 0")));
        }
        Ok(())
    }
}

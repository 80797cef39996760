//! Config-driven command-line front end.
//!
//! Every command reads an [`ExperimentConfig`] (or the defaults), writes CSV
//! tables under `--out`, and is deterministic for a fixed `--seed`.
//! Exit codes: 0 success, 1 I/O, 2 schema, 3 numeric failure, 4 failed
//! validation.

pub mod config;
pub mod figures;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;

pub use config::{ExperimentConfig, MechanismKind, RegimeChoice, SchemaError};
pub use figures::Figure;

use crate::detection::{default_alpha_grid, monte_carlo_rates, roc, threshold, TestSpec};
use crate::error::Error;
use crate::estimation::{
    chi_mixture, gaussian_law, residual_law, plugin_residual_law, wls_estimate, wssr, Regime,
    ResidualLaw, DEFAULT_MAX_DENSITY_BOUND,
};
use crate::mechanism::{
    calibrate_nu_sigma, chi_square_release, delta_curve, gaussian_mechanism_sigma,
    gaussian_output_release, input_perturbation_release, Mechanism, NeighborScan,
    NeighborhoodSpec, PrivacyParams,
};
use crate::model::{
    simulate_measurements, stealth_attack, AttackVector, MeasurementModel, StateVector,
};
use crate::rng::SeedStream;
use io::{Measurement, Provenance, Truth};

/// Environment variable that switches releases to fresh, unrecorded entropy.
pub const PRODUCTION_ENV: &str = "DP_RESIDUAL_PRODUCTION";

const STREAM_MODEL: u64 = 0;
const STREAM_MEASUREMENTS: u64 = 1;
const STREAM_RELEASE: u64 = 2;
const STREAM_SCAN: u64 = 3;
const STREAM_FIGURES: u64 = 4;
/// Monte Carlo blocks use streams `MC_STREAMS + b` of a derived seed.
const MC_SEED_SALT: u64 = 0x6d63_5f76_616c_6964;

#[derive(Debug, Parser)]
#[command(name = "dp-residual", version, about = "Differentially private residuals for bad-data detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `mc.workers`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw measurements and write them with a ground-truth sidecar.
    Simulate,
    /// State estimate, WSSR and residual laws for a measurement file.
    Estimate {
        /// Defaults to `<out>/measurements.csv`.
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
    /// Release the WSSR of a measurement file through the configured mechanism.
    Privatize {
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
    /// Neighborhood δ(ε) curve of the chi-square mechanism.
    DeltaCurve,
    /// Analytic ROC curves, clean and privatized.
    Roc,
    /// Monte Carlo check of the analytic Pfa/Pd.
    Validate,
    /// Figure data for the Gaussian-regime experiments.
    Figures {
        #[arg(value_enum)]
        which: Vec<Figure>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Schema(String),
    Numeric(Error),
    Validation(Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Schema(_) => 2,
            Self::Numeric(_) => 3,
            Self::Validation(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(s) => write!(f, "io error: {s}"),
            Self::Schema(s) => write!(f, "config error: {s}"),
            Self::Numeric(e) => write!(f, "numeric failure: {e}"),
            Self::Validation(e) => write!(f, "validation failed: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        Self::Schema(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { .. } => Self::Validation(e),
            Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } | Error::Regime(_) => {
                Self::Schema(e.to_string())
            }
            _ => Self::Numeric(e),
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let production = std::env::var(PRODUCTION_ENV).is_ok_and(|v| v == "1");
    let ctx = Context::new(cli, production)?;
    match &cli.command {
        Command::Simulate => ctx.simulate(),
        Command::Estimate { measurements } => ctx.estimate(measurements.as_deref()),
        Command::Privatize { measurements } => ctx.privatize(measurements.as_deref()),
        Command::DeltaCurve => ctx.delta_curve(),
        Command::Roc => ctx.roc(),
        Command::Validate => ctx.validate(),
        Command::Figures { which } => ctx.figures(which),
    }
}

/// A validated config with CLI overrides applied.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub production: bool,
}

impl Context {
    pub fn new(cli: &Cli, production: bool) -> Result<Self, CliError> {
        let mut cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = cli.seed {
            cfg.mc.seed = s;
        }
        if let Some(w) = cli.workers {
            cfg.mc.workers = w;
        }
        cfg.validate()?;
        Ok(Self {
            cfg,
            out: cli.out.clone(),
            production,
        })
    }

    pub fn from_config(cfg: ExperimentConfig, out: PathBuf) -> Result<Self, CliError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            out,
            production: false,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.mc.seed
    }

    fn prov(&self, schema: &'static str) -> Provenance {
        Provenance {
            schema,
            config_hash: self.cfg.hash(),
            seed: Some(self.seed()),
        }
    }

    pub fn model(&self) -> Result<MeasurementModel, CliError> {
        let m = &self.cfg.model;
        let model = match &m.matrix_source {
            config::MatrixSource::RandomSeeded => MeasurementModel::random(
                m.m,
                m.n,
                m.sigma,
                m.lambda,
                &mut SeedStream::new(self.seed(), STREAM_MODEL),
            )?,
            config::MatrixSource::Csv { csv_path } => {
                let h = io::read_matrix(csv_path)?;
                if h.shape() != (m.m, m.n) {
                    return Err(CliError::Schema(format!(
                        "model.matrix_source: {} is {}x{}, config says {}x{}",
                        csv_path.display(),
                        h.nrows(),
                        h.ncols(),
                        m.m,
                        m.n
                    )));
                }
                MeasurementModel::new(h, m.sigma, m.lambda)?
            }
        };
        Ok(model)
    }

    pub fn state(&self) -> StateVector {
        match &self.cfg.model.state {
            Some(s) => DVector::from_column_slice(s),
            None => DVector::from_element(self.cfg.model.n, 1.0),
        }
    }

    pub fn attack(&self, model: &MeasurementModel) -> Result<AttackVector, CliError> {
        let a = &self.cfg.attack;
        Ok(match &a.stealth_coeffs {
            Some(c) => stealth_attack(model, &DVector::from_column_slice(c))?,
            None => AttackVector::new(model.m(), a.indices.clone(), a.values.clone())?,
        })
    }

    fn regime(&self, model: &MeasurementModel, x: &StateVector) -> Result<Regime, CliError> {
        Ok(match self.cfg.test.regime {
            RegimeChoice::ChiSquare => Regime::ChiSquare,
            RegimeChoice::Gaussian => Regime::Gaussian,
            RegimeChoice::Auto if self.cfg.dp.mechanism == MechanismKind::GaussianOutput => {
                Regime::Gaussian
            }
            RegimeChoice::Auto => {
                let mix = chi_mixture(model, x, &AttackVector::zero(model.m()))?;
                gaussian_law(&mix)?.regime(DEFAULT_MAX_DENSITY_BOUND)
            }
        })
    }

    /// `(H0, H1)` laws of the clean statistic in the configured regime.
    pub fn laws(
        &self,
        model: &MeasurementModel,
        x: &StateVector,
        attack: &AttackVector,
    ) -> Result<(ResidualLaw, ResidualLaw), CliError> {
        let zero = AttackVector::zero(model.m());
        Ok(match self.regime(model, x)? {
            Regime::ChiSquare => (
                residual_law(model, x, &zero)?,
                residual_law(model, x, attack)?,
            ),
            Regime::Gaussian => (
                gaussian_law(&chi_mixture(model, x, &zero)?)?.law,
                gaussian_law(&chi_mixture(model, x, attack)?)?.law,
            ),
        })
    }

    /// Mechanism parameters, calibrating `nu_sigma` or `k` when unset.
    pub fn privacy(&self, model: &MeasurementModel, law0: &ResidualLaw) -> Result<PrivacyParams, CliError> {
        let d = &self.cfg.dp;
        let mechanism = match d.mechanism {
            MechanismKind::ChiSquare => Mechanism::ChiSquare { r_prime: d.r_prime },
            MechanismKind::GaussianOutput => {
                let nu_sigma = match d.nu_sigma {
                    Some(s) => s,
                    None => {
                        let g = ResidualLaw::gaussian(law0.mean(), law0.variance())?;
                        let nb = ResidualLaw::gaussian(law0.mean() + 1.0, law0.variance())?;
                        calibrate_nu_sigma(d.epsilon, d.delta, &g, &nb)?
                    }
                };
                Mechanism::GaussianOutput {
                    nu_mean: d.nu_mean,
                    nu_sigma,
                }
            }
            MechanismKind::GaussianInput => {
                let k = match d.input_k {
                    Some(k) => k,
                    None => {
                        let eps_o = d.epsilon / model.m() as f64;
                        (gaussian_mechanism_sigma(eps_o, d.delta, 1.0)? / model.sigma()).powi(2)
                    }
                };
                Mechanism::GaussianInput { k }
            }
        };
        Ok(PrivacyParams::new(d.epsilon, d.delta, mechanism)?)
    }

    fn test_spec(&self, law0: ResidualLaw, law1: ResidualLaw, alpha: f64) -> Result<TestSpec, CliError> {
        let spec = TestSpec::new(alpha, law0, law1)?;
        Ok(if self.cfg.test.recalibrate_threshold {
            spec.recalibrated()
        } else {
            spec
        })
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn measurements_path(&self, given: Option<&Path>) -> PathBuf {
        given.map_or_else(|| self.out_file("measurements.csv"), Path::to_path_buf)
    }

    pub fn simulate(&self) -> Result<Vec<PathBuf>, CliError> {
        let model = self.model()?;
        let x = self.state();
        let attack = self.attack(&model)?;
        let z = simulate_measurements(
            &model,
            &x,
            &attack,
            &mut SeedStream::new(self.seed(), STREAM_MEASUREMENTS),
        )?;
        let rows: Vec<Measurement> = z
            .iter()
            .enumerate()
            .map(|(index, &z)| Measurement { index, z })
            .collect();
        let meas = self.out_file("measurements.csv");
        io::write_table(&meas, &self.prov("measurements"), &rows)?;
        let truth_path = self.out_file("truth.toml");
        io::write_truth(
            &truth_path,
            &Truth {
                seed: self.seed(),
                config_sha256: self.cfg.hash(),
                x_true: x.iter().copied().collect(),
                attack_indices: attack.support().to_vec(),
                attack_values: attack.values().to_vec(),
            },
        )?;
        let model_path = self.out_file("model.toml");
        io::write_model(&model_path, &model)?;
        Ok(vec![meas, truth_path, model_path, self.out_file("model.csv")])
    }

    fn load_z(&self, model: &MeasurementModel, path: Option<&Path>) -> Result<DVector<f64>, CliError> {
        let path = self.measurements_path(path);
        Ok(DVector::from_vec(io::read_measurements(&path, model.m())?))
    }

    pub fn estimate(&self, measurements: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
        let model = self.model()?;
        let z = self.load_z(&model, measurements)?;
        let x_hat = wls_estimate(&model, &z)?;
        let q = wssr(&model, &z)?;
        let attack = self.attack(&model)?;
        let truth = residual_law(&model, &self.state(), &attack)?;
        let plugin = plugin_residual_law(&model, &z, &attack)?;
        let test = self.test_spec(
            residual_law(&model, &self.state(), &AttackVector::zero(model.m()))?,
            truth,
            self.cfg.test.alpha,
        )?;
        let tau = threshold(&test)?;

        #[derive(serde::Serialize)]
        struct Row {
            index: usize,
            x_hat: f64,
        }
        let rows: Vec<Row> = x_hat
            .iter()
            .enumerate()
            .map(|(index, &x_hat)| Row { index, x_hat })
            .collect();
        let est = self.out_file("estimate.csv");
        io::write_table(&est, &self.prov("estimate"), &rows)?;
        let nc = |l: &ResidualLaw| match *l {
            ResidualLaw::ChiSquare { noncentrality, .. } => noncentrality,
            _ => f64::NAN,
        };
        let summary = self.out_file("summary.csv");
        io::write_summary(
            &summary,
            &self.prov("estimate-summary"),
            &[
                ("wssr", q.to_string()),
                ("dof", (truth.mean() - nc(&truth)).to_string()),
                ("true_noncentrality", nc(&truth).to_string()),
                ("plugin_noncentrality", nc(&plugin).to_string()),
                ("alpha", self.cfg.test.alpha.to_string()),
                ("threshold", tau.to_string()),
                ("reject_h0", (q > tau).to_string()),
            ],
        )?;
        Ok(vec![est, summary])
    }

    pub fn privatize(&self, measurements: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
        let model = self.model()?;
        let z = self.load_z(&model, measurements)?;
        let x_hat = wls_estimate(&model, &z)?;
        let zero = AttackVector::zero(model.m());
        let mut rng = if self.production {
            SeedStream::production()
        } else {
            SeedStream::new(self.seed(), STREAM_RELEASE)
        };
        let chi_law = residual_law(&model, &x_hat, &zero)?;
        let params = self.privacy(&model, &chi_law)?;
        let mut rows: Vec<(&str, String)> = Vec::new();
        let (value, law) = match params.mechanism {
            Mechanism::ChiSquare { .. } => {
                let r = chi_square_release(&chi_law, wssr(&model, &z)?, &params, &mut rng)?;
                (r.value, r.law)
            }
            Mechanism::GaussianOutput { .. } => {
                let g = gaussian_law(&chi_mixture(&model, &x_hat, &zero)?)?.law;
                let r = gaussian_output_release(&g, wssr(&model, &z)?, &params, &mut rng)?;
                (r.value, r.law)
            }
            Mechanism::GaussianInput { .. } => {
                let r = input_perturbation_release(&model, &z, params.epsilon, params.delta, &mut rng)?;
                rows.push(("sigma_w", r.sigma_w.to_string()));
                rows.push(("k", r.k.to_string()));
                let q = wssr(&model, &r.z)? / (1.0 + r.k);
                (q, crate::detection::released_law(&chi_law, &chi_law, Some(&params))?)
            }
        };
        let mut summary = vec![
            ("value", value.to_string()),
            ("mechanism", format!("{:?}", self.cfg.dp.mechanism)),
            ("epsilon", params.epsilon.to_string()),
            ("delta", params.delta.to_string()),
            ("law_mean", law.mean().to_string()),
            ("law_variance", law.variance().to_string()),
        ];
        match params.mechanism {
            Mechanism::ChiSquare { r_prime } => summary.push(("r_prime", r_prime.to_string())),
            Mechanism::GaussianOutput { nu_mean, nu_sigma } => {
                summary.push(("nu_mean", nu_mean.to_string()));
                summary.push(("nu_sigma", nu_sigma.to_string()));
            }
            Mechanism::GaussianInput { .. } => {}
        }
        summary.extend(rows);
        let mut prov = self.prov("release");
        prov.seed = rng.record().map(|r| r.seed);
        let path = self.out_file("release.csv");
        io::write_summary(&path, &prov, &summary)?;
        Ok(vec![path])
    }

    pub fn delta_curve(&self) -> Result<Vec<PathBuf>, CliError> {
        let model = self.model()?;
        let attack = self.attack(&model)?;
        let d = &self.cfg.dp;
        let mut spec = NeighborhoodSpec::new(d.delta_h_bound, d.scan_count)?;
        if let Some([lo, hi]) = d.theta_domain {
            spec = spec.with_theta_domain(lo, hi)?;
        }
        let scan = NeighborScan::new(
            &model,
            &attack,
            &spec,
            &mut SeedStream::new(self.seed(), STREAM_SCAN),
        )?;
        let grid = d
            .epsilon_grid
            .clone()
            .unwrap_or_else(|| (0..=24).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / 24.0)).collect());
        let rows = delta_curve(&scan, d.r_prime, &grid)?;
        let path = self.out_file("delta_curve.csv");
        io::write_table(&path, &self.prov("delta-curve"), &rows)?;
        Ok(vec![path])
    }

    pub fn roc(&self) -> Result<Vec<PathBuf>, CliError> {
        let model = self.model()?;
        let x = self.state();
        let attack = self.attack(&model)?;
        let (law0, law1) = self.laws(&model, &x, &attack)?;
        let params = self.privacy(&model, &law0)?;
        let grid = self.cfg.test.alpha_grid.clone().unwrap_or_else(default_alpha_grid);
        let clean = self.test_spec(law0, law1, self.cfg.test.alpha)?;

        #[derive(serde::Serialize)]
        struct Row {
            alpha: f64,
            pfa: f64,
            pd: f64,
            mechanism: String,
            params: String,
        }
        #[derive(serde::Serialize)]
        struct Summary {
            mechanism: String,
            params: String,
            auroc: f64,
        }
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for (mechanism, spec) in [
            ("none".to_string(), clean),
            (format!("{:?}", self.cfg.dp.mechanism), clean.with_dp(params)),
        ] {
            let desc = describe(&spec);
            let curve = roc(&spec, &grid)?;
            rows.extend(curve.points.iter().map(|p| Row {
                alpha: p.alpha,
                pfa: p.pfa,
                pd: p.pd,
                mechanism: mechanism.clone(),
                params: desc.clone(),
            }));
            summary.push(Summary {
                mechanism,
                params: desc,
                auroc: curve.auroc,
            });
        }
        let roc_path = self.out_file("roc.csv");
        io::write_table(&roc_path, &self.prov("roc"), &rows)?;
        let auroc_path = self.out_file("auroc.csv");
        io::write_table(&auroc_path, &self.prov("auroc"), &summary)?;
        Ok(vec![roc_path, auroc_path])
    }

    pub fn validate(&self) -> Result<Vec<PathBuf>, CliError> {
        let model = self.model()?;
        let x = self.state();
        let attack = self.attack(&model)?;
        let (law0, law1) = self.laws(&model, &x, &attack)?;
        let params = self.privacy(&model, &law0)?;
        let alphas = self
            .cfg
            .test
            .alpha_grid
            .clone()
            .unwrap_or_else(|| vec![self.cfg.test.alpha]);

        #[derive(serde::Serialize)]
        struct Row {
            mechanism: String,
            alpha: f64,
            trials: usize,
            threshold: f64,
            pfa_hat: f64,
            pfa: f64,
            pfa_se: f64,
            pd_hat: f64,
            pd: f64,
            pd_se: f64,
            pass: bool,
        }
        let mut rows = Vec::new();
        let mut failure = None;
        let mc_seed = self.seed() ^ MC_SEED_SALT;
        for (i, &alpha) in alphas.iter().enumerate() {
            let clean = self.test_spec(law0, law1, alpha)?;
            for (j, (mechanism, spec)) in [
                ("none".to_string(), clean),
                (format!("{:?}", self.cfg.dp.mechanism), clean.with_dp(params)),
            ]
            .into_iter()
            .enumerate()
            {
                let seed = mc_seed.wrapping_add((2 * i + j) as u64);
                let r = monte_carlo_rates(&model, &x, &attack, &spec, self.cfg.mc.trials, seed, self.cfg.mc.workers)?;
                let check = r.check(3.0);
                rows.push(Row {
                    mechanism,
                    alpha,
                    trials: r.trials,
                    threshold: r.threshold,
                    pfa_hat: r.pfa_hat,
                    pfa: r.pfa,
                    pfa_se: r.pfa_se,
                    pd_hat: r.pd_hat,
                    pd: r.pd,
                    pd_se: r.pd_se,
                    pass: check.is_ok(),
                });
                if let Err(e) = check {
                    failure.get_or_insert(e);
                }
            }
        }
        let path = self.out_file("validate.csv");
        io::write_table(&path, &self.prov("validate"), &rows)?;
        match failure {
            Some(e) => Err(CliError::Validation(e)),
            None => Ok(vec![path]),
        }
    }

    pub fn figures(&self, which: &[Figure]) -> Result<Vec<PathBuf>, CliError> {
        let all = [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6];
        let which = if which.is_empty() { &all[..] } else { which };
        let f = &self.cfg.figures;
        let mut files = Vec::new();
        for fig in which {
            match fig {
                Figure::Fig3 => {
                    let (points, summary) = figures::fig3(f)?;
                    let p = self.out_file("fig3_roc.csv");
                    io::write_table(&p, &self.prov("fig3-roc"), &points)?;
                    let s = self.out_file("fig3_auroc.csv");
                    io::write_table(&s, &self.prov("fig3-auroc"), &summary)?;
                    files.extend([p, s]);
                }
                Figure::Fig4 => {
                    let p = self.out_file("fig4.csv");
                    io::write_table(&p, &self.prov("fig4"), &figures::fig4(f)?)?;
                    files.push(p);
                }
                Figure::Fig5 => {
                    let p = self.out_file("fig5.csv");
                    io::write_table(&p, &self.prov("fig5"), &figures::fig5(f)?)?;
                    files.push(p);
                }
                Figure::Fig6 => {
                    let seed = self.seed().wrapping_add(STREAM_FIGURES);
                    let rows = figures::fig6(f, self.cfg.mc.trials, seed)?;
                    let p = self.out_file("fig6.csv");
                    io::write_table(&p, &self.prov("fig6"), &rows)?;
                    files.push(p);
                }
            }
        }
        Ok(files)
    }
}

fn describe(spec: &TestSpec) -> String {
    match spec.dp.map(|d| d.mechanism) {
        None => String::new(),
        Some(Mechanism::ChiSquare { r_prime }) => format!("r_prime={r_prime}"),
        Some(Mechanism::GaussianOutput { nu_mean, nu_sigma }) => {
            format!("nu_mean={nu_mean};nu_sigma={nu_sigma}")
        }
        Some(Mechanism::GaussianInput { k }) => format!("k={k}"),
    }
}

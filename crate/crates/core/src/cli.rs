//! Experiment runner behind the `infomech` binary.
//!
//! Every command reads a JSON [`ExperimentConfig`], writes its reports to an
//! output directory and returns an exit status: 0 when every contract holds,
//! 1 when one fails ([`CliError::ContractFailed`]), 2 when the configuration
//! is unusable ([`CliError::ConfigInvalid`]). Report files embed the config
//! hash and seed; the wall-clock timestamp lives only in `metadata.json`, so
//! data files are byte-identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::{
    entropy_conservation_audit, entropy_conservation_audit_grid, fisher_conservation_audit,
    fisher_conservation_audit_grid, pointwise_identity_residual, posterior_conjugate, ConjugateGaussianModel,
    ConservationReport, Identity, Likelihood, Model, ModelFile,
};
use crate::density::io::{load_density, Density};
use crate::density::GaussianComponent;
use crate::error::Error;
use crate::estimators::{grid_entropy, grid_fisher_unchecked, info_state, EstimatorBudget, InfoState};
use crate::heatflow::{flow_trace, lyapunov_check, TimeGrid, MATRIX_INEQUALITY_REL_TOL, PHI_SLACK};
use crate::landscape::{ComplexityReport, LandscapeFile};
use crate::rng;
use crate::spectral::{projected_statistic, robustness_sweep, SpectralFilter, SweepConfig, SweepResult};
use crate::suite::{self, flow_table, tol, CriterionOutcome, Table};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("contract failed: {invariant}: {detail}")]
    ContractFailed { invariant: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::ContractFailed { .. } => 1,
        }
    }

    fn contract(invariant: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::ContractFailed {
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::Io(_)
            | Error::InvalidArgument(_)
            | Error::InvalidGrid(_)
            | Error::InvalidMixture(_)
            | Error::DimensionMismatch { .. }
            | Error::DomainTooSmall { .. }
            | Error::AllZero
            | Error::FilterOrderRejected(_) => CliError::ConfigInvalid(e.to_string()),
            other => CliError::contract(invariant_name(&other), other.to_string()),
        }
    }
}

fn invariant_name(e: &Error) -> &'static str {
    match e {
        Error::CrossCheckFailed { .. } => "fisher_cross_check",
        Error::NotPositiveDefinite(_) => "positive_definite",
        Error::NonPositiveFisher(_) => "fisher_positive",
        Error::BudgetExceeded(_) => "estimator_budget",
        _ => "invariant",
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Info,
    Conserve,
    Spectral,
    Heatflow,
    Landscape,
    Suite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Info => "info",
            Command::Conserve => "conserve",
            Command::Spectral => "spectral",
            Command::Heatflow => "heatflow",
            Command::Landscape => "landscape",
            Command::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Parser)]
#[command(name = "infomech", version, about = "Information potential audits and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// H, J and Phi of a density file.
    Info(RunArgs),
    /// Conservation audits of a Bayesian model file.
    Conserve(RunArgs),
    /// Spectral projections and the cutoff-robustness sweep.
    Spectral(RunArgs),
    /// Heat-flow trace of a density file.
    Heatflow(RunArgs),
    /// Complexity report of an energy landscape file.
    Landscape(RunArgs),
    /// The full acceptance corpus.
    Suite(RunArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

impl CommandArgs {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            CommandArgs::Info(a) => (Command::Info, a),
            CommandArgs::Conserve(a) => (Command::Conserve, a),
            CommandArgs::Spectral(a) => (Command::Spectral, a),
            CommandArgs::Heatflow(a) => (Command::Heatflow, a),
            CommandArgs::Landscape(a) => (Command::Landscape, a),
            CommandArgs::Suite(a) => (Command::Suite, a),
        }
    }
}

/// Experiment configuration file. Paths are relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// If present, must match the command being run.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: EstimatorBudget,
    #[serde(default)]
    pub info: Option<InfoSection>,
    #[serde(default)]
    pub conserve: Option<ConserveSection>,
    #[serde(default)]
    pub spectral: Option<SpectralSection>,
    #[serde(default)]
    pub heatflow: Option<HeatflowSection>,
    #[serde(default)]
    pub landscape: Option<LandscapeSection>,
    #[serde(default)]
    pub suite: Option<SuiteSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            command: None,
            seed: None,
            budget: EstimatorBudget::default(),
            info: None,
            conserve: None,
            spectral: None,
            heatflow: None,
            landscape: None,
            suite: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoSection {
    pub density: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConserveSection {
    pub model: PathBuf,
    /// Datasets checked by the pointwise identity on grid models.
    #[serde(default = "five")]
    pub pointwise_datasets: usize,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    /// Grid densities whose projections are tabulated.
    #[serde(default)]
    pub densities: Vec<PathBuf>,
    #[serde(default = "default_orders")]
    pub orders: Vec<u32>,
    /// Robustness sweep around the base density (default: `N(0, 1)` on `[-10, 10)`, 256 points).
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub sweep_base: Option<PathBuf>,
    /// Declared lower bound on the robustness ratio.
    #[serde(default)]
    pub min_robustness_ratio: Option<f64>,
}

fn default_orders() -> Vec<u32> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatflowSection {
    pub density: PathBuf,
    /// Defaults to a geometric grid with first step `0.05 / J(0)`, ratio 1.25, up to 64.
    #[serde(default)]
    pub times: Option<TimeGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    pub problem: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    #[serde(default = "all_criteria")]
    pub criteria: Vec<u8>,
}

fn all_criteria() -> Vec<u8> {
    suite::CRITERIA.iter().map(|(id, _)| *id).collect()
}

/// Config hash and seed embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
}

/// Parsed configuration plus the values derived from it.
struct Context {
    command: Command,
    config: ExperimentConfig,
    base_dir: PathBuf,
    seed: Option<u64>,
    provenance: Provenance,
    out: PathBuf,
    format: Format,
}

impl Context {
    fn require_seed(&self, why: &str) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::ConfigInvalid(format!(
                "{why} is stochastic and needs a seed (--seed or \"seed\" in the config)"
            ))
        })
    }

    fn budget(&self) -> EstimatorBudget {
        let mut b = self.config.budget.clone();
        if let Some(s) = self.seed {
            b.mc_seed = rng::derive_seed(s, 0);
        }
        b
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        s.as_ref()
            .ok_or_else(|| CliError::ConfigInvalid(format!("config has no \"{name}\" section")))
    }

    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> CliResult<()> {
        if !self.format.json() {
            return Ok(());
        }
        let doc = serde_json::json!({ "provenance": self.provenance, "report": body });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        write_file(&self.out.join(format!("{name}.json")), format!("{text}\n").as_bytes())
    }

    fn write_csv(&self, table: &Table) -> CliResult<()> {
        if !self.format.csv() {
            return Ok(());
        }
        let mut buf = format!(
            "# config_sha256={}\n# seed={}\n",
            self.provenance.config_sha256,
            self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into())
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let io = |e: csv::Error| CliError::ConfigInvalid(format!("csv: {e}"));
            w.write_record(&table.header).map_err(io)?;
            for r in &table.rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        }
        write_file(&self.out.join(format!("{}.csv", table.name)), &buf)
    }

    fn write_metadata(&self) -> CliResult<()> {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = serde_json::json!({
            "command": self.command.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp_unix": ts,
            "config_sha256": self.provenance.config_sha256,
            "seed": self.seed,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        write_file(&self.out.join("metadata.json"), format!("{text}\n").as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::ConfigInvalid(format!("cannot write {}: {e}", path.display())))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Parses and validates a configuration file.
pub fn load_config(path: &Path) -> CliResult<(ExperimentConfig, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        serde_json::from_slice(&bytes).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    if config.version != CONFIG_VERSION {
        return Err(CliError::ConfigInvalid(format!(
            "unsupported config version {} (expected {CONFIG_VERSION})",
            config.version
        )));
    }
    Ok((config, bytes))
}

/// Runs one command; the binary maps the error to its exit code.
pub fn run(command: Command, args: &RunArgs) -> CliResult<()> {
    let (config, bytes, base_dir) = match &args.config {
        Some(p) => {
            let (c, b) = load_config(p)?;
            (c, b, p.parent().unwrap_or(Path::new(".")).to_path_buf())
        }
        None if command == Command::Suite => {
            let c = ExperimentConfig::default();
            let b = serde_json::to_vec(&c).expect("default config serializes");
            (c, b, PathBuf::from("."))
        }
        None => return Err(CliError::ConfigInvalid(format!("`{}` needs --config", command.name()))),
    };
    if let Some(c) = config.command {
        if c != command {
            return Err(CliError::ConfigInvalid(format!(
                "config is for `{}`, not `{}`",
                c.name(),
                command.name()
            )));
        }
    }
    let seed = args.seed.or(config.seed);
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::ConfigInvalid(format!("cannot create {}: {e}", args.out.display())))?;
    let ctx = Context {
        command,
        provenance: Provenance {
            command: command.name().into(),
            config_sha256: hex::encode(Sha256::digest(&bytes)),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config,
        base_dir,
        seed,
        out: args.out.clone(),
        format: args.format,
    };
    let result = match command {
        Command::Info => run_info(&ctx),
        Command::Conserve => run_conserve(&ctx),
        Command::Spectral => run_spectral(&ctx),
        Command::Heatflow => run_heatflow(&ctx),
        Command::Landscape => run_landscape(&ctx),
        Command::Suite => run_suite(&ctx),
    };
    // Metadata is written only for runs that got past validation.
    match &result {
        Err(CliError::ConfigInvalid(_)) => {}
        _ => ctx.write_metadata()?,
    }
    result
}

fn run_info(ctx: &Context) -> CliResult<()> {
    let sec = ctx.section(&ctx.config.info, "info")?;
    let d = load_density(&ctx.path(&sec.density))?;
    if let Density::Mixture(m) = &d {
        if m.len() > 1 && m.dim() > 1 {
            ctx.require_seed("Monte Carlo estimation of a multivariate mixture")?;
        }
    }
    let state = info_state(&d, &ctx.budget())?;
    ctx.write_json("info", &state)?;
    ctx.write_csv(&info_table(&state))?;
    println!("H = {:.10}  J = {:.10}  Phi = {:.3e}", state.h, state.j, state.phi);
    Ok(())
}

fn info_table(s: &InfoState) -> Table {
    Table {
        name: "info".into(),
        header: [
            "dim",
            "H",
            "J",
            "Phi",
            "entropy_power",
            "resolution_scale",
            "H_std_error",
            "J_std_error",
        ]
        .map(String::from)
        .to_vec(),
        rows: vec![vec![
            s.dim.to_string(),
            fmt(s.h),
            fmt(s.j),
            fmt(s.phi),
            fmt(s.entropy_power),
            fmt(s.resolution_scale),
            fmt(s.h_std_error),
            fmt(s.j_std_error),
        ]],
    }
}

/// `log p(x | D) - log p(x) - log p(D | x) + log p(D)` at a few points, with the
/// evidence from the stacked-observation Gaussian.
pub fn conjugate_pointwise_residual(
    m: &ConjugateGaussianModel,
    data: &[Vec<f64>],
    points: &[Vec<f64>],
) -> crate::Result<f64> {
    let post = posterior_conjugate(m, data)?;
    let lik = Likelihood::gaussian_noise(m.noise_covariance().clone(), m.n_obs())?;
    let n = m.dim();
    let k = m.n_obs();
    let prior = m.prior();
    let stacked_mean = DVector::from_fn(n * k, |i, _| prior.mean()[i % n]);
    let stacked_cov = DMatrix::from_fn(n * k, n * k, |i, j| {
        let c = prior.covariance()[(i % n, j % n)];
        if i / n == j / n {
            c + m.noise_covariance()[(i % n, j % n)]
        } else {
            c
        }
    });
    let evidence = GaussianComponent::new(stacked_mean, stacked_cov)?;
    let flat: Vec<f64> = data.iter().flatten().copied().collect();
    let log_ev = evidence.log_pdf(&flat);
    Ok(points
        .iter()
        .map(|x| (post.log_pdf(x) - prior.log_pdf(x) - lik.log_likelihood(x, data) + log_ev).abs())
        .fold(0.0, f64::max))
}

#[derive(Serialize)]
struct ConserveOutput {
    reports: Vec<ConservationReport>,
    data: Option<Vec<Vec<f64>>>,
}

fn run_conserve(ctx: &Context) -> CliResult<()> {
    let sec = ctx.section(&ctx.config.conserve, "conserve")?;
    let path = ctx.path(&sec.model);
    let text = fs::read_to_string(&path).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    let model = file.build(path.parent().unwrap_or(Path::new(".")))?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut used_data = None;
    match model {
        Model::Conjugate { model, data } => {
            let data = match data {
                Some(d) => d,
                None => {
                    let seed = ctx.require_seed("sampling a dataset")?;
                    let mut r = rng::stream(seed, 1);
                    let x = model.prior().sample(&mut r);
                    Likelihood::gaussian_noise(model.noise_covariance().clone(), model.n_obs())?.sample(&x, &mut r)
                }
            };
            let post = posterior_conjugate(&model, &data)?;
            let points = vec![
                model.prior().mean().iter().copied().collect(),
                post.mean().iter().copied().collect(),
                post.mean().iter().map(|v| v + 1.0).collect::<Vec<f64>>(),
            ];
            let pw = conjugate_pointwise_residual(&model, &data, &points)?;
            reports.push(ConservationReport::new(Identity::Pointwise, pw, 0.0, 0.0, points.len()));
            reports.push(entropy_conservation_audit(&model)?);
            reports.push(fisher_conservation_audit(&model)?);
            for r in &reports {
                if r.residual.abs() > tol::CONJUGATE_RESIDUAL {
                    failures.push((r.identity, r.residual.abs(), tol::CONJUGATE_RESIDUAL));
                }
            }
            used_data = Some(data);
        }
        Model::Grid { problem, n_datasets } => {
            let seed = ctx.require_seed("the grid Monte Carlo audit")?;
            let mut r = rng::stream(seed, 1);
            let mut worst = 0.0f64;
            let mut checked = 0;
            for _ in 0..sec.pointwise_datasets {
                let (_, data) = problem.sample_dataset(&mut r);
                let rep = pointwise_identity_residual(&problem, &data, None)?;
                worst = worst.max(rep.max_residual);
                checked += rep.checked;
            }
            let pointwise = ConservationReport::new(Identity::Pointwise, worst, 0.0, 0.0, checked);
            if worst > tol::POINTWISE_RESIDUAL {
                failures.push((Identity::Pointwise, worst, tol::POINTWISE_RESIDUAL));
            }
            reports.push(pointwise);
            let budget = ctx.budget();
            let e = entropy_conservation_audit_grid(&problem, n_datasets, rng::derive_seed(seed, 2))?;
            let f = fisher_conservation_audit_grid(
                &problem,
                n_datasets,
                rng::derive_seed(seed, 3),
                budget.fisher_crosscheck_tol,
            )?;
            for rep in [e, f] {
                let band = tol::MC_SIGMAS * rep.mc_std_error + tol::GRID_AUDIT_ALLOWANCE;
                if !rep.within(tol::MC_SIGMAS, tol::GRID_AUDIT_ALLOWANCE) {
                    failures.push((rep.identity, rep.residual.abs(), band));
                }
                reports.push(rep);
            }
        }
    }
    let mut table = Table {
        name: "conserve".into(),
        header: ["identity", "lhs", "rhs", "residual", "mc_std_error", "samples_used"]
            .map(String::from)
            .to_vec(),
        rows: vec![],
    };
    for r in &reports {
        table.rows.push(vec![
            identity_name(r.identity),
            fmt(r.lhs),
            fmt(r.rhs),
            fmt(r.residual),
            fmt(r.mc_std_error),
            r.samples_used.to_string(),
        ]);
    }
    ctx.write_json(
        "conserve",
        &ConserveOutput {
            reports: reports.clone(),
            data: used_data,
        },
    )?;
    ctx.write_csv(&table)?;
    for r in &reports {
        println!("{:<10} residual {:+.3e}", identity_name(r.identity), r.residual);
    }
    match failures.first() {
        Some((id, value, limit)) => Err(CliError::contract(
            format!("{}_conservation", identity_name(*id)),
            format!("|residual| {value:e} exceeds {limit:e}"),
        )),
        None => Ok(()),
    }
}

fn identity_name(i: Identity) -> String {
    match i {
        Identity::Pointwise => "pointwise".into(),
        Identity::Entropy => "entropy".into(),
        Identity::Fisher => "fisher".into(),
        Identity::Projected(m) => format!("projected_{m}"),
    }
}

#[derive(Serialize)]
struct SpectralOutput {
    projections: Vec<ProjectionRow>,
    sweep: Option<SweepOutput>,
}

#[derive(Serialize)]
struct ProjectionRow {
    density: String,
    m: u32,
    statistic: f64,
    entropy: f64,
    fisher_laplacian: f64,
    fisher_gradient: f64,
}

#[derive(Serialize)]
struct SweepOutput {
    config: SweepConfig,
    robustness_ratio: Option<f64>,
    result: SweepResult,
}

fn run_spectral(ctx: &Context) -> CliResult<()> {
    let sec = ctx.section(&ctx.config.spectral, "spectral")?;
    let filters = sec
        .orders
        .iter()
        .map(|&m| SpectralFilter::new(m))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut failure = None;
    for p in &sec.densities {
        let Density::Grid(d) = load_density(&ctx.path(p))? else {
            return Err(CliError::ConfigInvalid(format!(
                "{}: spectral projections need a grid density",
                p.display()
            )));
        };
        let h = grid_entropy(&d);
        let fisher = grid_fisher_unchecked(&d);
        for f in &filters {
            let s = projected_statistic(&d, f)?;
            let target = match f.order() {
                0 => Some(("projection_m0_equals_entropy", h)),
                1 => Some(("projection_m1_equals_fisher", fisher.laplacian_form)),
                _ => None,
            };
            if let Some((name, v)) = target {
                if (s - v).abs() > tol::SPECTRAL_IDENTITY && failure.is_none() {
                    failure = Some(CliError::contract(
                        name,
                        format!("{}: |{s} - {v}| > {:e}", p.display(), tol::SPECTRAL_IDENTITY),
                    ));
                }
            }
            rows.push(ProjectionRow {
                density: p.display().to_string(),
                m: f.order(),
                statistic: s,
                entropy: h,
                fisher_laplacian: fisher.laplacian_form,
                fisher_gradient: fisher.gradient_form,
            });
        }
    }
    let sweep = match &sec.sweep {
        Some(cfg) => {
            let seed = ctx.require_seed("the robustness sweep")?;
            let base = match &sec.sweep_base {
                Some(p) => match load_density(&ctx.path(p))? {
                    Density::Grid(g) => g,
                    Density::Mixture(_) => {
                        return Err(CliError::ConfigInvalid("sweep_base must be a grid density".into()))
                    }
                },
                None => suite::sweep_base()?,
            };
            let result = robustness_sweep(&base, cfg, rng::derive_seed(seed, 5))?;
            let ratio = result.robustness_ratio();
            if let Some(min) = sec.min_robustness_ratio {
                if !ratio.is_some_and(|r| r >= min) && failure.is_none() {
                    failure = Some(CliError::contract(
                        "robustness_ratio",
                        format!("{ratio:?} below declared minimum {min}"),
                    ));
                }
            }
            Some(SweepOutput {
                config: cfg.clone(),
                robustness_ratio: ratio,
                result,
            })
        }
        None => None,
    };
    let mut table = Table {
        name: "spectral_projections".into(),
        header: [
            "density",
            "m",
            "statistic",
            "entropy",
            "fisher_laplacian",
            "fisher_gradient",
        ]
        .map(String::from)
        .to_vec(),
        rows: vec![],
    };
    for r in &rows {
        table.rows.push(vec![
            r.density.clone(),
            r.m.to_string(),
            fmt(r.statistic),
            fmt(r.entropy),
            fmt(r.fisher_laplacian),
            fmt(r.fisher_gradient),
        ]);
    }
    ctx.write_csv(&table)?;
    if let Some(s) = &sweep {
        let mut t = Table {
            name: "spectral_sweep".into(),
            header: ["m", "cutoff", "seed", "statistic"].map(String::from).to_vec(),
            rows: vec![],
        };
        for r in &s.result.rows {
            t.rows.push(vec![
                r.m.to_string(),
                fmt(r.cutoff),
                r.seed.to_string(),
                fmt(r.statistic),
            ]);
        }
        ctx.write_csv(&t)?;
        let mut t = Table {
            name: "spectral_sweep_summary".into(),
            header: ["m", "cutoff", "mean", "variance", "rms"].map(String::from).to_vec(),
            rows: vec![],
        };
        for r in &s.result.summary {
            t.rows.push(vec![
                r.m.to_string(),
                fmt(r.cutoff),
                fmt(r.mean),
                fmt(r.variance),
                fmt(r.rms),
            ]);
        }
        ctx.write_csv(&t)?;
        println!("robustness ratio = {:?}", s.robustness_ratio);
    }
    ctx.write_json(
        "spectral",
        &SpectralOutput {
            projections: rows,
            sweep,
        },
    )?;
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct HeatflowOutput {
    times: Vec<f64>,
    states: Vec<InfoState>,
    relative_debruijn: Vec<f64>,
    relative_dissipation: Vec<f64>,
    fisher_strictly_decreasing: bool,
    max_phi_increase: f64,
    min_matrix_margin: f64,
}

fn run_heatflow(ctx: &Context) -> CliResult<()> {
    let sec = ctx.section(&ctx.config.heatflow, "heatflow")?;
    let Density::Grid(d) = load_density(&ctx.path(&sec.density))? else {
        return Err(CliError::ConfigInvalid("heat flow needs a grid density".into()));
    };
    let budget = ctx.budget();
    let times = match &sec.times {
        Some(t) => t.times()?,
        None => suite::flow_times(info_state(&d, &budget)?.j)?,
    };
    let trace = flow_trace(&d, &times, &budget)?;
    let lyap = lyapunov_check(&trace, PHI_SLACK);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let out = HeatflowOutput {
        times: trace.times.clone(),
        states: trace.states.clone(),
        relative_debruijn: trace.relative_debruijn(),
        relative_dissipation: trace.relative_dissipation(),
        fisher_strictly_decreasing: trace.fisher_strictly_decreasing(),
        max_phi_increase: lyap.max_violation,
        min_matrix_margin: trace.min_matrix_margin(),
    };
    ctx.write_csv(&flow_table("heatflow", &trace))?;
    ctx.write_json("heatflow", &out)?;
    let db = max(&out.relative_debruijn);
    let fd = max(&out.relative_dissipation);
    println!("max de Bruijn residual {db:.3e}, max dissipation residual {fd:.3e}");
    if db > tol::DEBRUIJN_REL {
        return Err(CliError::contract(
            "de_bruijn",
            format!("relative residual {db:e} > {:e}", tol::DEBRUIJN_REL),
        ));
    }
    if fd > tol::DISSIPATION_REL {
        return Err(CliError::contract(
            "fisher_dissipation",
            format!("relative residual {fd:e} > {:e}", tol::DISSIPATION_REL),
        ));
    }
    if !out.fisher_strictly_decreasing {
        return Err(CliError::contract("fisher_decreasing", "J did not decrease strictly"));
    }
    if !lyap.monotone {
        return Err(CliError::contract(
            "phi_nonincreasing",
            format!("Phi increased by {:e}", lyap.max_violation),
        ));
    }
    if out.min_matrix_margin < -MATRIX_INEQUALITY_REL_TOL {
        return Err(CliError::contract(
            "matrix_inequality",
            format!("margin {:e}", out.min_matrix_margin),
        ));
    }
    Ok(())
}

fn run_landscape(ctx: &Context) -> CliResult<()> {
    let sec = ctx.section(&ctx.config.landscape, "landscape")?;
    let path = ctx.path(&sec.problem);
    let text = fs::read_to_string(&path).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    let file: LandscapeFile =
        serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    let problem = file.build(path.parent().unwrap_or(Path::new(".")))?;
    if problem.landscape.dim() > 1 {
        ctx.require_seed("Monte Carlo estimation of a multivariate mixture")?;
    }
    let report = problem.report(&ctx.budget())?;
    if let Some(w) = &report.separation_warning {
        eprintln!(
            "warning: modes overlap (min Mahalanobis separation {:.2})",
            w.min_mahalanobis
        );
    }
    for w in &report.plateau_warnings {
        eprintln!("warning: plateau of {} points at energy {}", w.points.len(), w.energy);
    }
    ctx.write_json("landscape", &report)?;
    ctx.write_csv(&modes_table(&report))?;
    println!(
        "N_LM = {}  Phi_mixture = {:.6}  Phi_direct = {:.6}  log N_LM = {:.6}",
        report.effective_count, report.phi_mixture, report.phi_direct, report.log_nlm
    );
    Ok(())
}

fn modes_table(r: &ComplexityReport) -> Table {
    let mut t = Table {
        name: "landscape_modes".into(),
        header: ["location", "energy", "weight", "log_det_hessian"]
            .map(String::from)
            .to_vec(),
        rows: vec![],
    };
    for (m, w) in r.modes.modes.iter().zip(&r.modes.weights) {
        let n = m.hessian.len();
        let h = DMatrix::from_fn(n, n, |i, j| m.hessian[i][j]);
        let loc: Vec<String> = m.location.iter().map(|v| fmt(*v)).collect();
        t.rows
            .push(vec![loc.join(" "), fmt(m.energy), fmt(*w), fmt(h.determinant().ln())]);
    }
    t
}

#[derive(Serialize)]
struct SuiteOutput<'a> {
    passed: bool,
    criteria: &'a [CriterionOutcome],
}

fn run_suite(ctx: &Context) -> CliResult<()> {
    let seed = ctx.require_seed("the acceptance suite")?;
    let ids = ctx
        .config
        .suite
        .as_ref()
        .map(|s| s.criteria.clone())
        .unwrap_or_else(all_criteria);
    if let Some(bad) = ids.iter().find(|&&id| !(1..=8).contains(&id)) {
        return Err(CliError::ConfigInvalid(format!("unknown criterion {bad}")));
    }
    let mut outcomes = Vec::new();
    for id in ids {
        let o = suite::run_criterion(id, seed);
        println!("{}  ({:.1}s)", o.summary_line(), o.elapsed.as_secs_f64());
        outcomes.push(o);
    }
    let mut summary = Table {
        name: "suite_summary".into(),
        header: ["criterion", "name", "check", "value", "relation", "limit", "passed"]
            .map(String::from)
            .to_vec(),
        rows: vec![],
    };
    for o in &outcomes {
        if let Some(e) = &o.error {
            summary.rows.push(vec![
                o.id.to_string(),
                o.name.clone(),
                "error".into(),
                e.clone(),
                String::new(),
                String::new(),
                "false".into(),
            ]);
        }
        for c in &o.checks {
            let rel = match c.relation {
                suite::Relation::AtMost => "<=",
                suite::Relation::AtLeast => ">=",
            };
            summary.rows.push(vec![
                o.id.to_string(),
                o.name.clone(),
                c.name.clone(),
                fmt(c.value),
                rel.into(),
                fmt(c.limit),
                c.passed.to_string(),
            ]);
        }
    }
    ctx.write_csv(&summary)?;
    for o in &outcomes {
        for t in &o.tables {
            ctx.write_csv(t)?;
        }
    }
    let passed = outcomes.iter().all(|o| o.passed);
    ctx.write_json(
        "suite",
        &SuiteOutput {
            passed,
            criteria: &outcomes,
        },
    )?;
    match outcomes.iter().find(|o| !o.passed) {
        Some(o) => Err(CliError::contract(
            format!("criterion_{}_{}", o.id, o.name),
            o.first_failure().unwrap_or_default(),
        )),
        None => Ok(()),
    }
}

/// Entry point used by the binary; returns the process exit code.
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
    let (command, run_args) = cli.command.split();
    match run(command, run_args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_and_versions_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"version": 1, "colour": 3}"#).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"version": 7}"#).unwrap();
        assert!(matches!(load_config(&p), Err(CliError::ConfigInvalid(_))));
    }

    #[test]
    fn conjugate_pointwise_identity_closed_form() {
        let prior = GaussianComponent::from_vecs(vec![0.5, -1.0], vec![vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let noise = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.8]);
        let m = ConjugateGaussianModel::new(prior, noise, 3).unwrap();
        let data = vec![vec![1.0, 0.0], vec![0.5, -0.5], vec![2.0, 0.3]];
        let r = conjugate_pointwise_residual(&m, &data, &[vec![0.0, 0.0], vec![1.0, -2.0]]).unwrap();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(Error::Parse("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::InvariantViolated("x".into())).exit_code(), 1);
    }
}

//! Command-line surface for `relax-shock`: configuration, subcommands and
//! file formats.

// negated comparisons are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use relax_shock::chapman_enskog::{build_reduced, lax_count, ns_profile, residual_rv, NsProfile, ProfileOptions, ReducedSystem};
use relax_shock::linearized::{apply_right_inverse, assemble, ce_right_inverse_fluid, energy_diagnostic};
use relax_shock::model::{broadwell_model, hugoniot_endstates, jin_xin_model, Flux, RelaxationModel};
use relax_shock::solver::{
    fixed_point_solve, nonlinear_residual, sweep_row, sweep_table, verify_theorem_bounds, SolverOptions, SweepOptions,
};
use relax_shock::spaces::{weighted_norm, NormSpec};
use relax_shock::stability::{assemble_l, profile_conditions, profile_derivative, spectrum_check, SpectrumTolerances};
use relax_shock::{Grid, GridFunction};

/// Version of every JSON document written by the CLI.
pub const SCHEMA: u32 = 1;

/// Viscosity used by `check` when the run itself is inviscid.
pub const STRIP_ETA: f64 = 1e-3;

/// Tolerance of the `verify` round trip.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] relax_shock::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigInvalid",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "Io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(relax_shock::Error::ConfigInvalid(_)) => 2,
            _ => 1,
        }
    }

    /// The object written to standard error.
    pub fn to_json(&self) -> Value {
        json!({ "schema": SCHEMA, "error": self.kind(), "message": self.to_string() })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxName {
    #[default]
    Burgers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    JinXin {
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default)]
        flux: FluxName,
    },
    Broadwell {},
}

fn default_a() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::JinXin { a: 1.0, flux: FluxName::Burgers }
    }
}

impl ModelConfig {
    pub fn build(&self) -> CliResult<RelaxationModel> {
        Ok(match self {
            ModelConfig::JinXin { a, flux: FluxName::Burgers } => jin_xin_model(*a, Flux::burgers())?,
            ModelConfig::Broadwell {} => broadwell_model()?,
        })
    }
}

/// Grid of the profile: half-width `L` and step `h`. Unset values follow the
/// library defaults (`L = 40 / eps`, `h = min(0.1, 0.05 / eps)`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub eps0: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { tol: d.tol, max_iter: d.max_iter, eps0: d.eps0 }
    }
}

/// Sampling of the converged profile for the dense spectrum: step `h` and
/// half-width `x_scale / eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub h: f64,
    pub x_scale: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { h: 0.5, x_scale: 23.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub profile: Option<PathBuf>,
    pub diag: Option<PathBuf>,
}

/// Everything a run needs; command-line flags override these values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    /// Weight rate; unset takes a quarter of the fitted tail rate.
    pub delta: Option<f64>,
    pub eta: f64,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub spectrum: SpectrumConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            epsilon: 0.1,
            epsilons: vec![0.05, 0.1, 0.2],
            delta: None,
            eta: 0.0,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            spectrum: SpectrumConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("every sweep epsilon must be positive".into());
        }
        if let Some(d) = self.delta {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("delta = {d} outside [0, 1]"));
            }
        }
        if !(self.eta >= 0.0) {
            return bad(format!("eta = {} must be nonnegative", self.eta));
        }
        if self.grid.l.is_some_and(|l| !(l > 0.0)) || self.grid.h.is_some_and(|h| !(h > 0.0)) {
            return bad("grid L and h must be positive".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 || !(self.solver.eps0 > 0.0) {
            return bad("solver tol, max_iter and eps0 must be positive".into());
        }
        if !(self.spectrum.h > 0.0) || !(self.spectrum.x_scale > 0.0) {
            return bad("spectrum h and x_scale must be positive".into());
        }
        Ok(())
    }

    fn profile_options(&self, epsilon: f64) -> ProfileOptions {
        let mut p = ProfileOptions { h: self.grid.h, ..ProfileOptions::default() };
        if let Some(l) = self.grid.l {
            p.domain_scale = l * epsilon;
        }
        p
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            delta: self.delta,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            eta: self.eta,
            eps0: self.solver.eps0,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "relax-shock", version, about = "Small-amplitude standing shock profiles of relaxation systems")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural checks on the model.
    Check {
        #[arg(long)]
        epsilon: Option<f64>,
        /// Viscosity of the strip check; defaults to the run's eta when
        /// positive, else 1e-3.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduced maps f_*, b_*, c_* at sample states.
    Reduce {
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate (Navier-Stokes-type) profile.
    NsProfile {
        #[command(flatten)]
        run: RunFlags,
    },
    /// Corrected profile by the contraction iteration.
    Solve {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Re-reads a profile and recomputes its bounds and residual.
    Verify {
        #[arg(long)]
        in_profile: PathBuf,
        /// Diagnostics of the run that wrote the profile; supplies epsilon
        /// and delta and is compared against.
        #[arg(long)]
        in_diag: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectrum of the linearized operator about a profile.
    Spectrum {
        #[arg(long)]
        in_profile: PathBuf,
        /// Amplitude; estimated from the end values when omitted.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pipeline over several amplitudes with log-log slope fits.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "grid-L")]
    pub grid_l: Option<f64>,
    #[arg(long)]
    pub grid_h: Option<f64>,
    #[arg(long)]
    pub out_profile: Option<PathBuf>,
    #[arg(long)]
    pub out_diag: Option<PathBuf>,
}

impl RunFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if self.grid_l.is_some() {
            cfg.grid.l = self.grid_l;
        }
        if self.grid_h.is_some() {
            cfg.grid.h = self.grid_h;
        }
        if self.out_profile.is_some() {
            cfg.output.profile = self.out_profile.clone();
        }
        if self.out_diag.is_some() {
            cfg.output.diag = self.out_diag.clone();
        }
    }
}

/// Result of a subcommand: its JSON document and whether its gates passed.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub document: Value,
    pub passed: bool,
}

/// Parses, runs and reports; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(o) => i32::from(!o.passed),
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let outcome = match &cli.command {
        Command::Check { epsilon, eta, out } => {
            if let Some(e) = epsilon {
                cfg.epsilon = *e;
            }
            if let Some(e) = eta {
                cfg.eta = *e;
            }
            cfg.validate()?;
            let o = cmd_check(&cfg)?;
            emit(&o.document, out.as_deref())?;
            o
        }
        Command::Reduce { samples, out } => {
            cfg.validate()?;
            let o = cmd_reduce(&cfg, *samples)?;
            emit(&o.document, out.as_deref())?;
            o
        }
        Command::NsProfile { run } => {
            run.apply(&mut cfg);
            cfg.validate()?;
            let (o, profile) = cmd_ns_profile(&cfg)?;
            if let Some(p) = &cfg.output.profile {
                write_profile_csv(p, &profile.big_u(), profile.u.dim)?;
            }
            emit(&o.document, cfg.output.diag.as_deref())?;
            o
        }
        Command::Solve { run, delta, eta, tol, max_iter } => {
            run.apply(&mut cfg);
            if delta.is_some() {
                cfg.delta = *delta;
            }
            if let Some(e) = eta {
                cfg.eta = *e;
            }
            if let Some(t) = tol {
                cfg.solver.tol = *t;
            }
            if let Some(m) = max_iter {
                cfg.solver.max_iter = *m;
            }
            cfg.validate()?;
            let (o, u_bar, n) = cmd_solve(&cfg)?;
            if let Some(p) = &cfg.output.profile {
                write_profile_csv(p, &u_bar, n)?;
            }
            emit(&o.document, cfg.output.diag.as_deref())?;
            o
        }
        Command::Verify { in_profile, in_diag, epsilon, delta, out } => {
            cfg.validate()?;
            let recorded = match in_diag {
                Some(p) => Some(read_json(p)?),
                None => None,
            };
            let eps = epsilon
                .or_else(|| recorded.as_ref().and_then(|d| d["epsilon"].as_f64()))
                .ok_or_else(|| CliError::Config("verify needs --epsilon or --in-diag".into()))?;
            let delta = delta.or_else(|| recorded.as_ref().and_then(|d| d["delta"].as_f64()));
            let o = cmd_verify(&cfg, in_profile, eps, delta, recorded.as_ref())?;
            emit(&o.document, out.as_deref())?;
            o
        }
        Command::Spectrum { in_profile, epsilon, out } => {
            cfg.validate()?;
            let o = cmd_spectrum(&cfg, in_profile, *epsilon)?;
            emit(&o.document, out.as_deref())?;
            o
        }
        Command::Sweep { epsilons, out } => {
            if let Some(e) = epsilons {
                cfg.epsilons = e.clone();
            }
            cfg.validate()?;
            let o = cmd_sweep(&cfg)?;
            emit(&o.document, out.as_deref())?;
            o
        }
    };
    Ok(outcome)
}

fn emit(doc: &Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| CliError::Io(e.to_string()))?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| io_err(p, e)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

/// Writes `x,u_1..u_n,v_1..v_r` with 17 significant digits.
pub fn write_profile_csv(path: &Path, f: &GridFunction, n: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec!["x".to_string()];
    header.extend((1..=n).map(|k| format!("u_{k}")));
    header.extend((1..=f.dim - n).map(|k| format!("v_{k}")));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..f.len() {
        let mut rec = vec![format!("{:.16e}", f.grid.x(i))];
        rec.extend(f.at(i).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a profile CSV; returns the samples and the number of `u` columns.
pub fn read_profile_csv(path: &Path, epsilon: f64) -> CliResult<(GridFunction, usize)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    if header.get(0) != Some("x") {
        return Err(CliError::Config(format!("{}: first column must be x", path.display())));
    }
    let n = header.iter().filter(|h| h.starts_with("u_")).count();
    let r_count = header.iter().filter(|h| h.starts_with("v_")).count();
    if n == 0 || n + r_count + 1 != header.len() {
        return Err(CliError::Config(format!("{}: header must be x,u_1..,v_1..", path.display())));
    }
    let mut xs = Vec::new();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| io_err(path, e))?;
        xs.push(vals[0]);
        points.push(vals[1..].to_vec());
    }
    if xs.len() < 3 || xs.len() % 2 == 0 {
        return Err(CliError::Config(format!("{}: need an odd number (>= 3) of grid points", path.display())));
    }
    let half = (xs.len() - 1) / 2;
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let grid = Grid::new(half, h);
    if xs.iter().enumerate().any(|(i, &x)| (x - grid.x(i)).abs() > 1e-9 * h.max(1.0)) {
        return Err(CliError::Config(format!("{}: abscissae must form a symmetric uniform grid", path.display())));
    }
    Ok((GridFunction::from_points(grid, epsilon, &points)?, n))
}

fn model_and_reduced(cfg: &RunConfig) -> CliResult<(RelaxationModel, ReducedSystem)> {
    let model = cfg.model.build()?;
    let reduced = build_reduced(&model);
    Ok((model, reduced))
}

fn profile_for(cfg: &RunConfig, model: &RelaxationModel, reduced: &ReducedSystem, eps: f64) -> CliResult<NsProfile> {
    let ends = hugoniot_endstates(reduced, model, eps)?;
    Ok(ns_profile(reduced, model, &ends, &cfg.profile_options(eps))?)
}

fn cmd_check(cfg: &RunConfig) -> CliResult<Outcome> {
    let (model, reduced) = model_and_reduced(cfg)?;
    let eta = if cfg.eta > 0.0 { cfg.eta } else { STRIP_ETA };
    let report = relax_shock::structure::structure_report(&model, &reduced, cfg.epsilon, eta)?;
    let document = json!({
        "schema": SCHEMA,
        "command": "check",
        "model": model.name,
        "epsilon": cfg.epsilon,
        "eta": eta,
        "theta_kawashima": report.kawashima.as_ref().map(|k| k.theta),
        "report": to_value(&report),
    });
    Ok(Outcome { document, passed: report.all_pass })
}

fn cmd_reduce(cfg: &RunConfig, samples: usize) -> CliResult<Outcome> {
    let (model, reduced) = model_and_reduced(cfg)?;
    let mut rows = Vec::new();
    for u in model.sample_points(model.eps_max, samples.max(1)) {
        rows.push(json!({
            "u": u,
            "f_star": reduced.f_star(&u)?,
            "b_star": reduced.b_star(&u)?.to_rows(),
            "c_star": reduced.c_star(&u)?.to_rows(),
        }));
    }
    let document = json!({ "schema": SCHEMA, "command": "reduce", "model": model.name, "samples": rows });
    Ok(Outcome { document, passed: true })
}

fn cmd_ns_profile(cfg: &RunConfig) -> CliResult<(Outcome, NsProfile)> {
    let (model, reduced) = model_and_reduced(cfg)?;
    let profile = profile_for(cfg, &model, &reduced, cfg.epsilon)?;
    let rv = residual_rv(&model, &reduced, &profile)?;
    let document = json!({
        "schema": SCHEMA,
        "command": "ns-profile",
        "model": model.name,
        "epsilon": profile.epsilon,
        "theta_fit": profile.theta_fit,
        "sup_Rv": rv.sup,
        "lax_count": lax_count(&reduced, &profile.ends)?,
        "grid": grid_json(profile.grid()),
    });
    Ok((Outcome { document, passed: true }, profile))
}

fn grid_json(g: Grid) -> Value {
    json!({ "L": g.x_max(), "h": g.h, "points": g.len() })
}

/// Diagnostics of the linear solver on the first correction `L^dagger(0, -R_v)`.
fn linear_diagnostics(model: &RelaxationModel, reduced: &ReducedSystem, profile: &NsProfile, delta: f64, eta: f64) -> CliResult<Value> {
    let rv = residual_rv(model, reduced, profile)?;
    let op = assemble(model, reduced, profile, eta)?;
    let f = GridFunction::zeros(profile.grid(), model.n, profile.epsilon);
    let g = rv.rv.scale(-1.0);
    let first = apply_right_inverse(&op, &f, &g)?;
    let energy = energy_diagnostic(&op, &first.u, &f, &g, delta, &[1, 2])?;
    let fluid = match ce_right_inverse_fluid(reduced, profile, &profile.u_prime) {
        Ok(fl) => json!({ "mu_minus": fl.mu_minus, "mu_plus": fl.mu_plus, "alpha": fl.alpha, "phase_residual": fl.phase_residual }),
        Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
    };
    Ok(json!({
        "eta": eta,
        "phase_residual": first.phase_residual,
        "C_emp": energy.c_emp,
        "energy": to_value(&energy),
        "fluid": fluid,
    }))
}

fn cmd_solve(cfg: &RunConfig) -> CliResult<(Outcome, GridFunction, usize)> {
    let (model, reduced) = model_and_reduced(cfg)?;
    let profile = profile_for(cfg, &model, &reduced, cfg.epsilon)?;
    let rv = residual_rv(&model, &reduced, &profile)?;
    let sol = fixed_point_solve(&model, &reduced, &profile, &cfg.solver_options())?;
    let bounds = verify_theorem_bounds(&model, &profile, &sol.u_bar, sol.delta)?;
    let linear = linear_diagnostics(&model, &reduced, &profile, sol.delta, cfg.eta)?;
    let document = json!({
        "schema": SCHEMA,
        "command": "solve",
        "model": model.name,
        "epsilon": sol.epsilon,
        "delta": sol.delta,
        "eta": cfg.eta,
        "grid": grid_json(profile.grid()),
        "tol": cfg.solver.tol,
        "effective_tol": sol.effective_tol,
        "iterations": sol.iterations,
        "steps": sol.steps,
        "ratios": sol.ratios,
        "first_iterate_norm": sol.first_iterate_norm,
        "norm_h2": sol.norm_h2,
        "sup_derivatives": sol.sup_derivatives,
        "residual": sol.residual,
        "phase_residual": sol.phase_residual,
        "theta_fit": profile.theta_fit,
        "sup_Rv": rv.sup,
        "bounds": to_value(&bounds),
        "linear": linear,
    });
    Ok((Outcome { document, passed: true }, sol.u_bar, model.n))
}

/// Values compared by the `verify` round trip.
fn verified_quantities(
    model: &RelaxationModel,
    profile: &NsProfile,
    u_bar: &GridFunction,
    delta: f64,
) -> CliResult<Value> {
    let corr = u_bar.sub(&profile.big_u());
    let d1 = relax_shock::numerics::fd_derivative(&corr, 1)?;
    let d2 = relax_shock::numerics::fd_derivative(&corr, 2)?;
    Ok(json!({
        "norm_h2": weighted_norm(&corr, NormSpec::new(2, profile.epsilon, delta))?,
        "sup_derivatives": [corr.sup_norm(), d1.sup_norm(), d2.sup_norm()],
        "residual": nonlinear_residual(model, u_bar)?,
        "bounds": to_value(&verify_theorem_bounds(model, profile, u_bar, delta)?),
    }))
}

/// Largest absolute-or-relative difference between numbers at matching
/// positions of two JSON values.
pub fn max_difference(a: &Value, b: &Value) -> f64 {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            let d = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).map(|(p, q)| max_difference(p, q)).fold(0.0, f64::max)
        }
        (Value::Object(x), Value::Object(y)) => {
            x.iter().map(|(k, p)| y.get(k).map_or(f64::INFINITY, |q| max_difference(p, q))).fold(0.0, f64::max)
        }
        _ if a == b => 0.0,
        _ => f64::INFINITY,
    }
}

fn cmd_verify(cfg: &RunConfig, path: &Path, eps: f64, delta: Option<f64>, recorded: Option<&Value>) -> CliResult<Outcome> {
    let (model, reduced) = model_and_reduced(cfg)?;
    let (u_bar, n) = read_profile_csv(path, eps)?;
    if n != model.n || u_bar.dim != model.dim() {
        return Err(CliError::Config(format!("profile columns do not match the model {}", model.name)));
    }
    let grid = u_bar.grid;
    let mut vcfg = cfg.clone();
    vcfg.grid = GridConfig { l: Some(grid.x_max()), h: Some(grid.h) };
    let profile = profile_for(&vcfg, &model, &reduced, eps)?;
    if profile.grid() != grid {
        return Err(CliError::Config("profile grid cannot be reproduced".into()));
    }
    let delta = delta.unwrap_or_else(|| profile.default_delta());
    let q = verified_quantities(&model, &profile, &u_bar, delta)?;
    let (difference, passed) = match recorded {
        Some(r) => {
            let d = ["norm_h2", "sup_derivatives", "residual", "bounds"]
                .iter()
                .map(|k| max_difference(&r[*k], &q[*k]))
                .fold(0.0, f64::max);
            (Some(d), d <= ROUND_TRIP_TOL)
        }
        None => (None, true),
    };
    let mut document = json!({
        "schema": SCHEMA,
        "command": "verify",
        "model": model.name,
        "epsilon": eps,
        "delta": delta,
        "grid": grid_json(grid),
        "max_difference": difference,
        "tolerance": ROUND_TRIP_TOL,
        "matches": passed,
    });
    if let (Value::Object(d), Value::Object(extra)) = (&mut document, q) {
        d.extend(extra);
    }
    Ok(Outcome { document, passed })
}

fn cmd_spectrum(cfg: &RunConfig, path: &Path, epsilon: Option<f64>) -> CliResult<Outcome> {
    let (model, reduced) = model_and_reduced(cfg)?;
    let (raw, _) = read_profile_csv(path, 0.0)?;
    let n = model.n;
    let last = raw.len() - 1;
    let eps = epsilon.unwrap_or_else(|| {
        raw.at(last)[..n].iter().zip(&raw.at(0)[..n]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    });
    if !(eps > 0.0) {
        return Err(CliError::Config("profile has no jump; pass --epsilon".into()));
    }
    let u_bar = GridFunction { epsilon: eps, ..raw };
    let ends = hugoniot_endstates(&reduced, &model, eps)?;
    let stride = ((cfg.spectrum.h / u_bar.grid.h).round() as usize).max(1);
    let coarse = u_bar.subsample(stride, cfg.spectrum.x_scale / eps)?;
    let lmat = assemble_l(&model, &coarse)?;
    let up = profile_derivative(&coarse)?;
    let report = spectrum_check(&lmat, &up, SpectrumTolerances::default())?;
    let conditions = profile_conditions(&model, &reduced, &u_bar, &ends)?;
    let document = json!({
        "schema": SCHEMA,
        "command": "spectrum",
        "model": model.name,
        "epsilon": eps,
        "grid": grid_json(coarse.grid),
        "size": lmat.rows(),
        "eigenvalues": report.eigenvalues,
        "translation": to_value(&report.translation),
        "margins": {
            "max_other_re": report.max_other_re,
            "count_above_threshold": report.count_above_threshold,
            "threshold": report.threshold,
        },
        "conditions": to_value(&conditions),
        "passed": report.passed,
    });
    Ok(Outcome { document, passed: report.passed && conditions.finite })
}

fn cmd_sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    let (model, reduced) = model_and_reduced(cfg)?;
    // a fixed L is a fixed physical half-width, so the options differ per row
    let rows = cfg
        .epsilons
        .iter()
        .map(|&e| {
            let opts = SweepOptions { profile: cfg.profile_options(e), solver: cfg.solver_options() };
            sweep_row(&model, &reduced, e, &opts).map_err(|err| err.to_string())
        })
        .collect();
    let table = sweep_table(rows);
    let passed = table.slopes.as_ref().is_some_and(|s| {
        s.rv >= 2.7
            && s.corrector_h2 >= 1.8
            && s.corrector_sup >= 1.8
            && (0..3).all(|k| s.ns_profile[k] >= k as f64 + 0.8)
            && s.kinetic[0] >= 1.8
            && s.kinetic[1] >= 2.7
    }) && table.rows.iter().all(|r| r.is_ok());
    let document = json!({
        "schema": SCHEMA,
        "command": "sweep",
        "model": model.name,
        "epsilons": cfg.epsilons,
        "table": to_value(&table),
        "passed": passed,
    });
    Ok(Outcome { document, passed })
}

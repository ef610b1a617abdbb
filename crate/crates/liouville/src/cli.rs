//! Command-line front end: JSON experiment configs in, machine-readable
//! reports out.
//!
//! Subcommands: `classify | minimize | sweep | blowup-slope | pohozaev`.
//! Common flags: `--config <path>`, `--out <dir>`, `--jobs <k>`, `--seed <u64>`.
//! LIOUVILLE_LOG=info|debug controls stderr chatter.
//!
//! Exit codes: 0 success, 2 config error, 3 non-convergence,
//! 4 expected-unboundedness floor hit, 5 numeric corruption.
//!
//! Field dumps are flat binary: a 16-byte header (magic "LIOU", u32 grid
//! size n, u32 component count N, 4 zero pad bytes, all little-endian)
//! followed by N row-major n*n blocks of f64 little-endian values.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::blowup::{estimate_sigma, fit_log_slope, synthetic_bubble, u_lambda_family};
use crate::energy::{evaluate_j, normalize_v, SystemField};
use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField, TorusGrid};
use crate::lambda::{
    lambda_min_with_table, lambda_subset_at, rho_critical, Classification, LambdaReport,
    RhoVector,
};
use crate::minimize::{minimize, InitialGuess, MinimizeResult, SolverOptions, Termination};
use crate::model::{CouplingMatrix, SingularModel, SingularSource};

#[derive(Parser)]
#[command(name = "liouville", about = "singular Liouville system toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Overrides init_seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Lambda criterion and print the coercivity verdict
    Classify,
    /// Minimize J_rho and dump the solution field
    Minimize,
    /// Phase diagram over a rectangular rho grid
    Sweep,
    /// J(u^lambda) against log(lambda) with regression
    BlowupSlope,
    /// Concentration masses and the Pohozaev residual around a point
    Pohozaev,
}

fn log_level() -> u8 {
    match std::env::var("LIOUVILLE_LOG").as_deref() {
        Ok("debug") => 2,
        Ok("info") => 1,
        _ => 0,
    }
}

macro_rules! info {
    ($($arg:tt)*) => {
        if log_level() >= 1 {
            eprintln!($($arg)*);
        }
    };
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub point: [f64; 2],
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// 1-based component whose rho varies along the first axis.
    pub component_i: usize,
    pub range_i: RangeSpec,
    #[serde(default)]
    pub component_j: Option<usize>,
    #[serde(default)]
    pub range_j: Option<RangeSpec>,
    /// Run the minimizer at every node and record the final energy.
    #[serde(default)]
    pub minimize: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleConfig {
    pub lambda: f64,
    pub center: [f64; 2],
}

fn default_h_spec() -> String {
    "constant".into()
}

/// One JSON document drives every subcommand; unknown fields are hard
/// errors so typos cannot silently fall back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid_n: usize,
    /// Row-major symmetric positive definite coupling matrix.
    pub matrix: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    /// "constant" or the path of a field dump with the smooth weights.
    #[serde(default = "default_h_spec")]
    pub h_spec: String,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub init_seed: Option<u64>,
    /// blowup-slope: the lambda values, all <= grid_n / 8.
    #[serde(default)]
    pub lambda_list: Option<Vec<f64>>,
    /// blowup-slope: 1-based component subset I (default: all).
    #[serde(default)]
    pub subset: Option<Vec<usize>>,
    /// blowup-slope / pohozaev: the point x (default [0.5, 0.5]).
    #[serde(default)]
    pub point: Option<[f64; 2]>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// pohozaev: strictly decreasing ball radii.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    /// pohozaev: build the field as a synthetic bubble.
    #[serde(default)]
    pub bubble: Option<BubbleConfig>,
    /// pohozaev: load the field from a dump instead.
    #[serde(default)]
    pub field: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let n = self.matrix.len();
        if self.rho.len() != n {
            return Err(Error::Config(format!(
                "field rho: {} entries for a {n}-component matrix",
                self.rho.len()
            )));
        }
        for s in &self.sources {
            if s.alpha.len() != n {
                return Err(Error::Config(format!(
                    "field sources.alpha: {} entries, expected {n}",
                    s.alpha.len()
                )));
            }
        }
        if let Some(subset) = &self.subset {
            for &i in subset {
                if i == 0 || i > n {
                    return Err(Error::Config(format!(
                        "field subset: component {i} out of range 1..={n}"
                    )));
                }
            }
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<SingularModel> {
        let grid = TorusGrid::new(self.grid_n)?;
        let coupling = CouplingMatrix::new(&self.matrix)?;
        let sources: Vec<SingularSource> = self
            .sources
            .iter()
            .map(|s| SingularSource {
                point: Point::new(s.point[0], s.point[1]),
                alpha: s.alpha.clone(),
            })
            .collect();
        if self.h_spec == "constant" {
            SingularModel::new(grid, coupling, sources)
        } else {
            let h = read_field_dump(Path::new(&self.h_spec))?;
            if h.grid() != grid {
                return Err(Error::GridMismatch(h.grid().n(), grid.n()));
            }
            let n = coupling.size();
            let weights: Vec<ScalarField> = if h.len() == n {
                h.components().to_vec()
            } else if h.len() == 1 {
                vec![h.component(0).clone(); n]
            } else {
                return Err(Error::Config(format!(
                    "field h_spec: dump has {} components, expected 1 or {n}",
                    h.len()
                )));
            };
            SingularModel::with_weights(grid, coupling, sources, weights)
        }
    }

    pub fn rho_vector(&self) -> Result<RhoVector> {
        RhoVector::new(self.rho.clone())
    }

    fn point(&self) -> Point {
        let p = self.point.unwrap_or([0.5, 0.5]);
        Point::new(p[0], p[1])
    }

    /// 0-based subset; defaults to the full index set.
    fn subset0(&self) -> Vec<usize> {
        match &self.subset {
            Some(s) => s.iter().map(|&i| i - 1).collect(),
            None => (0..self.matrix.len()).collect(),
        }
    }
}

pub fn write_field_dump(path: &Path, field: &SystemField) -> Result<()> {
    let n = field.grid().n() as u32;
    let mut out = Vec::with_capacity(16 + field.len() * field.grid().len() * 8);
    out.extend_from_slice(b"LIOU");
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&(field.len() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for i in 0..field.len() {
        for &v in field.component(i).values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<SystemField> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[0..4] != b"LIOU" {
        return Err(Error::CorruptField(format!(
            "{}: missing LIOU header",
            path.display()
        )));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n_comp = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 16 + n_comp * n * n * 8;
    if bytes.len() != expected {
        return Err(Error::CorruptField(format!(
            "{}: {} bytes, expected {expected} for n={n}, N={n_comp}",
            path.display(),
            bytes.len()
        )));
    }
    let grid = TorusGrid::new(n)?;
    let mut components = Vec::with_capacity(n_comp);
    for c in 0..n_comp {
        let base = 16 + c * n * n * 8;
        let values: Vec<f64> = (0..n * n)
            .map(|k| {
                f64::from_le_bytes(bytes[base + 8 * k..base + 8 * k + 8].try_into().unwrap())
            })
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::CorruptField(format!(
                "{}: non-finite value in component {c}",
                path.display()
            )));
        }
        components.push(ScalarField::from_values(grid, values)?);
    }
    SystemField::new(components)
}

/// 17 significant digits, enough to round-trip any f64.
fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::CorruptField("non-finite value in output".into()));
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if text.contains("null,") || text.contains(": null") {
        // serde_json renders NaN/inf as null
        if text.contains("NaN") {
            return Err(Error::CorruptField("NaN in JSON output".into()));
        }
    }
    fs::write(path, text)?;
    Ok(())
}

fn classification_str(c: Classification) -> &'static str {
    match c {
        Classification::Coercive => "coercive",
        Classification::Critical => "critical",
        Classification::Unbounded => "unbounded",
    }
}

/// 1-based rendering of a component subset.
fn subset_str(subset: &[usize]) -> String {
    let parts: Vec<String> = subset.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

fn cmd_classify(cfg: &ExperimentConfig, out: &Path) -> Result<u8> {
    let model = cfg.build_model()?;
    let rho = cfg.rho_vector()?;
    let report: LambdaReport = lambda_min_with_table(&model, &rho, true)?;
    ensure_finite(&[report.lambda, report.epsilon])?;

    println!("Lambda(rho) = {:.6}", report.lambda);
    println!(
        "argmin: I = {}, x = {:?}",
        subset_str(&report.argmin_subset),
        report.argmin_point
    );
    println!("classification: {}", classification_str(report.classification));
    let mut rho0_json = serde_json::Value::Null;
    if report.sharp_regime {
        let rho0 = rho_critical(&model)?;
        println!("sharp regime (a_ij <= 0 off-diagonal): rho0 = {:?}", rho0.values());
        rho0_json = serde_json::to_value(rho0.values())?;
    }
    let doc = serde_json::json!({
        "config": cfg,
        "report": report,
        "rho_critical": rho0_json,
    });
    write_json(&out.join("classify.json"), &doc)?;
    Ok(0)
}

fn minimize_exit_code(result: &MinimizeResult) -> u8 {
    match result.termination {
        Termination::Converged => 0,
        Termination::EnergyFloor {
            expected_unboundedness: true,
        } => 4,
        _ => 3,
    }
}

fn cmd_minimize(cfg: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<u8> {
    let model = cfg.build_model()?;
    let rho = cfg.rho_vector()?;
    let init = match seed.or(cfg.init_seed) {
        Some(s) => InitialGuess::RandomSmooth { seed: s },
        None => InitialGuess::Zero,
    };
    info!("minimize: n={}, N={}", model.grid().n(), model.component_count());
    let result = minimize(&model, &rho, init, &cfg.solver)?;
    ensure_finite(&[result.energy_report.j, result.residual_h_minus_1])?;
    ensure_finite(&result.j_trace)?;

    let mut csv = String::from("iteration,j\n");
    for (k, j) in result.j_trace.iter().enumerate() {
        csv.push_str(&format!("{k},{}\n", fmt(*j)));
    }
    fs::write(out.join("trace.csv"), csv)?;
    write_field_dump(&out.join("u_star.liou"), &result.u_star)?;
    let doc = serde_json::json!({
        "config": cfg,
        "j": result.energy_report.j,
        "energy_report": result.energy_report,
        "residual_h_minus_1": result.residual_h_minus_1,
        "iterations": result.iterations,
        "converged": result.converged,
        "termination": result.termination,
        "classification": classification_str(result.lambda_classification),
    });
    write_json(&out.join("minimize.json"), &doc)?;
    println!(
        "J = {:.8}, residual = {:.3e}, {} iterations, {:?}",
        result.energy_report.j, result.residual_h_minus_1, result.iterations, result.termination
    );
    Ok(minimize_exit_code(&result))
}

fn sweep_axis(r: &RangeSpec) -> Result<Vec<f64>> {
    if r.steps == 0 || !(r.min > 0.0) || r.max < r.min {
        return Err(Error::Config(
            "field sweep.range: needs 0 < min <= max and steps >= 1".into(),
        ));
    }
    if r.steps == 1 {
        return Ok(vec![r.min]);
    }
    let d = (r.max - r.min) / (r.steps - 1) as f64;
    Ok((0..r.steps).map(|k| r.min + d * k as f64).collect())
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<u8> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("field sweep: required for the sweep command".into()))?;
    let model = cfg.build_model()?;
    let n = model.component_count();
    let check_axis = |c: usize| -> Result<usize> {
        if c == 0 || c > n {
            return Err(Error::Config(format!(
                "field sweep.component: {c} out of range 1..={n}"
            )));
        }
        Ok(c - 1)
    };
    let ci = check_axis(sweep.component_i)?;
    let axis_i = sweep_axis(&sweep.range_i)?;
    let (cj, axis_j) = match (&sweep.component_j, &sweep.range_j) {
        (Some(c), Some(r)) => (Some(check_axis(*c)?), sweep_axis(r)?),
        (None, None) => (None, vec![f64::NAN]),
        _ => {
            return Err(Error::Config(
                "field sweep: component_j and range_j must come together".into(),
            ))
        }
    };
    if cj == Some(ci) {
        return Err(Error::Config("field sweep: the two axes coincide".into()));
    }

    // deterministic node order: axis_i outer, axis_j inner
    let mut nodes: Vec<Vec<f64>> = Vec::new();
    for &vi in &axis_i {
        for &vj in &axis_j {
            let mut rho = cfg.rho.clone();
            rho[ci] = vi;
            if let Some(cj) = cj {
                rho[cj] = vj;
            }
            nodes.push(rho);
        }
    }
    info!("sweep: {} nodes, minimize={}", nodes.len(), sweep.minimize);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    let do_min = sweep.minimize;
    let solver = cfg.solver.clone();
    let rows: Vec<Result<String>> = pool.install(|| {
        use rayon::prelude::*;
        nodes
            .par_iter()
            .map(|rho_values| {
                let rho = RhoVector::new(rho_values.clone())?;
                let report = crate::lambda::lambda_min(&model, &rho)?;
                ensure_finite(&[report.lambda])?;
                let mut row: Vec<String> = rho_values.iter().map(|&v| fmt(v)).collect();
                row.push(fmt(report.lambda));
                row.push(classification_str(report.classification).into());
                if do_min {
                    let result = minimize(&model, &rho, InitialGuess::Zero, &solver)?;
                    ensure_finite(&[result.energy_report.j])?;
                    row.push(fmt(result.energy_report.j));
                    row.push(format!("{:?}", result.termination));
                }
                Ok(row.join(","))
            })
            .collect()
    });

    let mut csv = String::new();
    for i in 0..n {
        csv.push_str(&format!("rho_{},", i + 1));
    }
    csv.push_str("lambda,classification");
    if do_min {
        csv.push_str(",j,termination");
    }
    csv.push('\n');
    for row in rows {
        csv.push_str(&row?);
        csv.push('\n');
    }
    fs::write(out.join("sweep.csv"), csv)?;
    println!("sweep: {} rows -> {}", nodes.len(), out.join("sweep.csv").display());
    Ok(0)
}

fn cmd_blowup_slope(cfg: &ExperimentConfig, out: &Path) -> Result<u8> {
    let model = cfg.build_model()?;
    let rho = cfg.rho_vector()?;
    let lambdas = cfg
        .lambda_list
        .clone()
        .ok_or_else(|| Error::Config("field lambda_list: required for blowup-slope".into()))?;
    let subset = cfg.subset0();
    let x = cfg.point();

    let mut energies = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let u = u_lambda_family(&model, &rho, &subset, x, lambda)?;
        let report = evaluate_j(&model, &rho, &u)?;
        ensure_finite(&[report.j])?;
        info!("lambda = {lambda}: J = {:.6}", report.j);
        energies.push(report.j);
    }
    let fit = fit_log_slope(&lambdas, &energies)?;
    let lambda_ix = lambda_subset_at(&model, &rho, &subset, x)?;
    let predicted = lambda_ix / (4.0 * std::f64::consts::PI);
    ensure_finite(&[fit.slope, predicted])?;

    let mut csv = String::from("lambda,j\n");
    for (l, j) in lambdas.iter().zip(&energies) {
        csv.push_str(&format!("{},{}\n", fmt(*l), fmt(*j)));
    }
    fs::write(out.join("blowup_slope.csv"), csv)?;
    let doc = serde_json::json!({
        "config": cfg,
        "subset": subset.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "fit": fit,
        "lambda_form": lambda_ix,
        "predicted_slope": predicted,
    });
    write_json(&out.join("blowup_slope.json"), &doc)?;
    println!(
        "measured slope {:.4} vs Lambda_I,x/(4 pi) = {:.4}",
        fit.slope, predicted
    );
    Ok(0)
}

fn cmd_pohozaev(cfg: &ExperimentConfig, out: &Path) -> Result<u8> {
    let model = cfg.build_model()?;
    let rho = cfg.rho_vector()?;
    let radii = cfg
        .radii
        .clone()
        .ok_or_else(|| Error::Config("field radii: required for pohozaev".into()))?;
    let x = cfg.point();
    let raw = if let Some(path) = &cfg.field {
        read_field_dump(Path::new(path))?
    } else if let Some(b) = &cfg.bubble {
        let center = Point::new(b.center[0], b.center[1]);
        let one = synthetic_bubble(model.grid(), center, b.lambda);
        SystemField::new(vec![one; model.component_count()])?
    } else {
        SystemField::zeros(model.grid(), model.component_count())
    };
    let v = normalize_v(&model, &rho, &raw)?;
    let report = estimate_sigma(&model, &rho, &v, x, &radii)?;
    ensure_finite(&report.sigma)?;
    ensure_finite(&[report.pohozaev_residual])?;

    for (i, s) in report.sigma.iter().enumerate() {
        println!(
            "sigma_{} = {:.6} ({}converged)",
            i + 1,
            s,
            if report.sigma_converged[i] { "" } else { "not " }
        );
    }
    println!("pohozaev residual = {:.6}", report.pohozaev_residual);
    let doc = serde_json::json!({ "config": cfg, "report": report });
    write_json(&out.join("pohozaev.json"), &doc)?;
    Ok(0)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::CorruptField(_) => 5,
        _ => 2,
    }
}

pub fn run() -> u8 {
    let cli = Cli::parse();
    let Some(config_path) = cli.config.as_deref() else {
        eprintln!("error: --config <path> is required");
        return 2;
    };
    let cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return 2;
    }
    let result = match cli.command {
        Command::Classify => cmd_classify(&cfg, &cli.out),
        Command::Minimize => cmd_minimize(&cfg, &cli.out, cli.seed),
        Command::Sweep => cmd_sweep(&cfg, &cli.out, cli.jobs),
        Command::BlowupSlope => cmd_blowup_slope(&cfg, &cli.out),
        Command::Pohozaev => cmd_pohozaev(&cfg, &cli.out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

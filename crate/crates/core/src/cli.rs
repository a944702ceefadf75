//! The `symlab` command line.
//!
//! Every subcommand that takes a config accepts JSON or TOML (by file
//! extension), applies `--set key.path=value` overrides on top, and writes
//! the effective config to `<out>/config.resolved.json`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ea_discovery::{discover, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::group_rep::{validate_representation, ActionBundle, GroupName, GroupRepresentation, GroupSetting};
use crate::io::{write_json, write_matrix_csv, write_run_dir};
use crate::measures::{project, rmd2, symmetrize, EmpiricalMeasure};
use crate::selfcheck::{run_suite, SuiteOptions};
use crate::shallow_model::{Sigma, UnitSpec};
use crate::teacher_student::{make_teacher, run_grid, summarize, write_metrics_csv, ExperimentGrid, TeacherSpec};
use crate::training::{init_ensemble, DataStream, InitMode, TrainConfig, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "SYMLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "symlab", version, about = "Symmetry-aware training of wide shallow models")]
pub struct Cli {
    /// Worker threads (overrides SYMLAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print dim(E^G) for a group and unit, optionally writing its basis.
    Subspace(SubspaceArgs),
    /// Train one model.
    Run(ConfigArgs),
    /// Run a teacher-student grid and write metrics.csv and summary.json.
    Sweep(SweepArgs),
    /// Run the subspace-discovery heuristic and write discovery.json.
    Discover(ConfigArgs),
    /// Run the built-in property suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitKind {
    MatrixSigmoid,
    AffineLayer,
}

#[derive(Debug, Args)]
pub struct UnitArgs {
    #[arg(long, value_enum, default_value = "matrix-sigmoid")]
    pub unit: UnitKind,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub c: usize,
    /// Hidden width, affine layers only.
    #[arg(long, default_value_t = 1)]
    pub b: usize,
    #[arg(long, default_value = "logistic")]
    pub sigma: String,
}

impl UnitArgs {
    pub fn spec(&self) -> Result<UnitSpec> {
        let sigma = match self.sigma.to_ascii_lowercase().as_str() {
            "logistic" => Sigma::Logistic,
            "tanh" => Sigma::Tanh,
            other => return Err(Error::Config(format!("unknown activation '{other}'"))),
        };
        let unit = match self.unit {
            UnitKind::MatrixSigmoid => UnitSpec::matrix_sigmoid(self.d, self.c, sigma),
            UnitKind::AffineLayer => UnitSpec::affine_layer(self.d, self.b, self.c, sigma),
        };
        unit.validate()?;
        Ok(unit)
    }
}

#[derive(Debug, Args)]
pub struct SubspaceArgs {
    /// Built-in group: C2-swap, C4-rot, Sn-deepsets, Cn-circulant or trivial.
    #[arg(long, conflicts_with = "rep")]
    pub group: Option<String>,
    /// Group size for Sn-deepsets and Cn-circulant.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Representation file for the input space.
    #[arg(long)]
    pub rep: Option<PathBuf>,
    /// Representation file for the output space (trivial if absent).
    #[arg(long, requires = "rep")]
    pub rep_out: Option<PathBuf>,
    /// Representation file for the hidden space (trivial if absent).
    #[arg(long, requires = "rep")]
    pub rep_hidden: Option<PathBuf>,
    #[command(flatten)]
    pub unit: UnitArgs,
    /// Directory for eg_basis.csv and eg_projector.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON or TOML config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a config entry, e.g. `--set train.alpha=20`. Values are
    /// parsed as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Also write a run directory per grid cell under `<out>/runs`.
    #[arg(long)]
    pub save_runs: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Extra representation files to check.
    #[arg(long)]
    pub rep: Vec<PathBuf>,
    /// Snapshot CSV files to load.
    #[arg(long)]
    pub snapshot: Vec<PathBuf>,
    #[command(flatten)]
    pub unit: UnitArgs,
}

/// Config of `symlab run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub unit: UnitSpec,
    pub group: GroupSetting,
    pub teacher: TeacherSpec,
    pub init_mode: InitMode,
    pub sigma_pi: f64,
    pub train: TrainConfig,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            unit: UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic),
            group: GroupSetting::default(),
            teacher: TeacherSpec::default(),
            init_mode: InitMode::Wi,
            sigma_pi: 4.0,
            train: TrainConfig::default(),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Parse(_) => EXIT_IO,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::Dimension(_)
        | Error::Structure(_)
        | Error::InvalidProjector(_)
        | Error::InvalidMeasure(_)
        | Error::Config(_)
        | Error::Json(_) => EXIT_CONFIG,
        Error::DegenerateEscape { .. } | Error::Solver(_) => EXIT_FAILURE,
    }
}

/// Sets `path` (dot separated) inside `root`, creating objects as needed.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node
            .as_object_mut()
            .expect("object")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    if !node.is_object() {
        *node = Value::Object(Default::default());
    }
    node.as_object_mut().expect("object").insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Reads a JSON or TOML file into a JSON value.
pub fn read_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        let v: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(v).map_err(Error::from)
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Loads a config (or the type's defaults when no file is given), applies
/// overrides and deserializes.
pub fn load_config<T: DeserializeOwned + Serialize + Default>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut value = match path {
        Some(p) => read_config_value(p)?,
        None => serde_json::to_value(T::default())?,
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

fn resolve<T: DeserializeOwned + Serialize + Default>(args: &ConfigArgs) -> Result<(T, Value)> {
    let cfg: T = load_config(args.config.as_deref(), &args.overrides)?;
    let resolved = serde_json::to_value(&cfg)?;
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("config.resolved.json"), &resolved)?;
    Ok((cfg, resolved))
}

fn load_rep(path: &Path) -> Result<GroupRepresentation> {
    let rep = GroupRepresentation::load_json(path).map_err(|e| match e {
        Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
        other => other,
    })?;
    let report = validate_representation(&rep)?;
    if !report.is_valid() {
        return Err(Error::Structure(format!("{}: {}", path.display(), report.to_string().trim_end())));
    }
    Ok(rep)
}

fn closed_form_dim(setting: &GroupSetting, unit: &UnitSpec) -> Option<usize> {
    let n = setting.n;
    let b = unit.hidden_dim()?;
    let (d, c) = (unit.input_dim(), unit.output_dim());
    if n == 0 || d % n != 0 || c % n != 0 || b % n != 0 {
        return None;
    }
    let (bt, ct, dt) = (b / n, c / n, d / n);
    match setting.name {
        GroupName::SnDeepsets if n >= 2 => Some(2 * bt * (ct + dt) + bt),
        GroupName::CnCirculant => Some(n * bt * (ct + dt) + bt),
        _ => None,
    }
}

fn cmd_subspace(args: &SubspaceArgs) -> Result<()> {
    let unit = args.unit.spec()?;
    let (bundle, setting) = match &args.rep {
        Some(path) => {
            let rho = load_rep(path)?;
            let rho_hat = match &args.rep_out {
                Some(p) => load_rep(p)?,
                None => GroupRepresentation::trivial_like(&rho, unit.output_dim()),
            };
            let eta = args.rep_hidden.as_deref().map(load_rep).transpose()?;
            (ActionBundle::new(&unit, rho, rho_hat, eta)?, None)
        }
        None => {
            let name: GroupName = args.group.as_deref().unwrap_or("C2-swap").parse()?;
            let setting = GroupSetting::new(name, args.n);
            (setting.bundle(&unit)?, Some(setting))
        }
    };
    println!("dim(E^G)={}", bundle.eg_dim());
    println!("D={} |G|={}", bundle.param_dim(), bundle.order());
    if let Some(expected) = setting.and_then(|s| closed_form_dim(&s, &unit)) {
        let tag = if expected == bundle.eg_dim() { "matches" } else { "MISMATCH" };
        println!("closed form: {expected} ({tag})");
    }
    if let Some(out) = &args.out {
        write_matrix_csv(&out.join("eg_basis.csv"), bundle.eg_basis())?;
        write_matrix_csv(&out.join("eg_projector.csv"), bundle.eg_projector())?;
        println!("wrote {}", out.join("eg_basis.csv").display());
    }
    Ok(())
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let (spec, resolved): (RunSpec, Value) = resolve(args)?;
    spec.unit.validate()?;
    spec.train.validate()?;
    let bundle = spec.group.bundle(&spec.unit)?;
    let teacher = make_teacher(&spec.teacher, &spec.unit, &bundle)?;
    let init = init_ensemble(&spec.unit, spec.train.n_particles, spec.init_mode, Some(&bundle), spec.train.seeds.init)?;
    let mut data = DataStream::new(teacher, spec.sigma_pi, spec.train.seeds.data)?;
    let record = Trainer::new(spec.train.clone(), Some(&bundle), init)?.run(&mut data)?;
    write_run_dir(&args.out, &record, &resolved)?;

    let mu = EmpiricalMeasure::from_ensemble(record.final_ensemble());
    let to_eg = rmd2(&mu, &project(&mu, &bundle)?)?;
    let to_g = rmd2(&mu, &symmetrize(&mu, bundle.m_action())?)?;
    let summary = json!({
        "epochs": spec.train.epochs(),
        "step_size": record.step_size,
        "final_mean_batch_loss": record.mean_batch_loss.last(),
        "rmd2_to_EG": to_eg,
        "rmd2_to_G": to_g,
        "wall_clock_secs": record.wall_clock_secs,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    println!("rmd2_to_EG={to_eg:.3e} rmd2_to_G={to_g:.3e}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let (grid, _): (ExperimentGrid, Value) = resolve(&args.config)?;
    grid.validate()?;
    let out = &args.config.out;
    let output = run_grid(&grid)?;
    write_metrics_csv(&out.join("metrics.csv"), &output.rows)?;
    write_json(&out.join("summary.json"), &summarize(&output.rows))?;
    if args.save_runs {
        for cell in &output.runs {
            let dir = out.join("runs").join(format!("{}_N{}_r{}", cell.scheme.as_str(), cell.n, cell.repetition));
            write_run_dir(&dir, &cell.record, &serde_json::to_value(&cell.record.config)?)?;
        }
    }
    println!("{} metric rows, wrote {}", output.rows.len(), out.join("metrics.csv").display());
    Ok(())
}

fn cmd_discover(args: &ConfigArgs) -> Result<()> {
    let (cfg, _): (DiscoveryConfig, Value) = resolve(args)?;
    let result = discover(&cfg)?;
    write_json(&args.out.join("discovery.json"), &result.document())?;
    write_matrix_csv(&args.out.join("basis.csv"), &result.state.basis)?;
    for s in &result.state.history {
        let r = s.rmd2_to_ej.map_or("-".to_string(), |r| format!("{r:.3e}"));
        println!("step {}: k={} rmd2_to_Ej={r} {:?}", s.j, s.k_j, s.decision);
    }
    if let Some(angle) = result.largest_angle() {
        println!("largest principal angle to E^G: {angle:.3e} rad");
    }
    println!("wrote {}", args.out.join("discovery.json").display());
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let opts = SuiteOptions {
        rep_files: args.rep.clone(),
        snapshot_files: args.snapshot.clone(),
        snapshot_unit: Some(args.unit.spec()?),
    };
    let report = run_suite(&opts)?;
    println!("{report}");
    Ok(report.all_passed())
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a count")))?),
        Err(_) => None,
    };
    if let Some(n) = flag.or(from_env).filter(|n| *n > 0) {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let outcome = configure_threads(cli.threads).and_then(|()| match &cli.command {
        Command::Subspace(a) => cmd_subspace(a).map(|()| true),
        Command::Run(a) => cmd_run(a).map(|()| true),
        Command::Sweep(a) => cmd_sweep(a).map(|()| true),
        Command::Discover(a) => cmd_discover(a).map(|()| true),
        Command::Validate(a) => cmd_validate(a),
    });
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CONFIG,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest() {
        let mut v = json!({"train": {"alpha": 50}});
        apply_override(&mut v, "train.alpha=20").unwrap();
        apply_override(&mut v, "train.seeds.init=9").unwrap();
        apply_override(&mut v, "teacher.kind=WI").unwrap();
        assert_eq!(v["train"]["alpha"], json!(20));
        assert_eq!(v["train"]["seeds"]["init"], json!(9));
        assert_eq!(v["teacher"]["kind"], json!("WI"));
        assert!(apply_override(&mut v, "noequals").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_IO);
        assert_eq!(exit_code(&Error::Diverged { epoch: 3, reason: "x".into() }), EXIT_DIVERGED);
    }

    #[test]
    fn closed_forms() {
        let unit = UnitSpec::affine_layer(3, 3, 3, Sigma::Tanh);
        assert_eq!(closed_form_dim(&GroupSetting::new(GroupName::CnCirculant, 3), &unit), Some(7));
        assert_eq!(closed_form_dim(&GroupSetting::new(GroupName::SnDeepsets, 3), &unit), Some(5));
    }
}

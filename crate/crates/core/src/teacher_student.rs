//! Teacher-student experiments: teachers, data, sweeps over `N × scheme ×
//! repetition`, and the metrics recorded for each trained student.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_rep::{ActionBundle, GroupSetting};
use crate::measures::{project, rmd2, symmetrize, EmpiricalMeasure};
use crate::risk::{risk, risk_da, risk_fa, McSample};
use crate::shallow_model::{fa_eval, model_eval, ParticleEnsemble, Sigma, UnitSpec};
use crate::training::{init_ensemble, train, DataStream, InitMode, NoiseMode, RunRecord, Scheme, TrainConfig};

/// Default teacher particles before scaling, for `D = 4`.
pub const ARBITRARY_PARTICLES: [[f64; 4]; 5] = [
    [-1.0, 0.0, 0.0, 0.5],
    [0.5, 1.0, 0.0, 1.0],
    [-0.5, 0.3, 1.0, 0.0],
    [0.0, -1.0, -0.5, 1.0],
    [0.7, -0.7, 0.5, 0.7],
];

/// Default strongly invariant teacher in E^G coordinates, before scaling.
pub const SI_COORDINATES: [[f64; 2]; 5] = [[1.0, 0.0], [0.5, 1.0], [-0.5, 0.3], [0.0, -1.0], [0.7, 0.7]];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TeacherKind {
    #[default]
    #[serde(rename = "arbitrary")]
    Arbitrary,
    /// Orbit closure of the arbitrary particles.
    #[serde(rename = "WI", alias = "wi")]
    Wi,
    /// Particles inside E^G, given in eg_basis coordinates.
    #[serde(rename = "SI", alias = "si")]
    Si,
}

impl TeacherKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TeacherKind::Arbitrary => "arbitrary",
            TeacherKind::Wi => "WI",
            TeacherKind::Si => "SI",
        }
    }
}

impl fmt::Display for TeacherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherSpec {
    pub kind: TeacherKind,
    /// Multiplies every particle (ϑ).
    pub scale: f64,
    /// Replaces the built-in particles: ambient vectors for arbitrary/WI,
    /// E^G coordinates for SI.
    pub particles: Option<Vec<Vec<f64>>>,
}

impl Default for TeacherSpec {
    fn default() -> Self {
        Self { kind: TeacherKind::Arbitrary, scale: 0.5, particles: None }
    }
}

impl TeacherSpec {
    pub fn new(kind: TeacherKind) -> Self {
        Self { kind, ..Default::default() }
    }
}

/// Builds the teacher ensemble: 5 particles for arbitrary/SI, their orbit
/// closure (`5·|G|` particles) for WI.
pub fn make_teacher(spec: &TeacherSpec, unit: &UnitSpec, bundle: &ActionBundle) -> Result<ParticleEnsemble> {
    let dim = unit.param_dim();
    if bundle.param_dim() != dim {
        return Err(Error::Dimension("bundle does not match the unit".into()));
    }
    let scaled = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter().map(|r| r.into_iter().map(|v| spec.scale * v).collect()).collect()
    };
    match spec.kind {
        TeacherKind::Arbitrary | TeacherKind::Wi => {
            let rows = match &spec.particles {
                Some(p) => p.clone(),
                None if dim == 4 => ARBITRARY_PARTICLES.iter().map(|r| r.to_vec()).collect(),
                None => {
                    return Err(Error::Config(format!(
                        "built-in teacher particles need D = 4, unit has D = {dim}; supply teacher.particles"
                    )))
                }
            };
            if rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Dimension(format!("teacher particles must have length {dim}")));
            }
            let base = ParticleEnsemble::from_rows(*unit, &scaled(rows))?;
            if spec.kind == TeacherKind::Wi {
                base.symmetrized(bundle)
            } else {
                Ok(base)
            }
        }
        TeacherKind::Si => {
            let k = bundle.eg_dim();
            let coords = match &spec.particles {
                Some(p) => p.clone(),
                None if k == 2 => SI_COORDINATES.iter().map(|r| r.to_vec()).collect(),
                None => {
                    return Err(Error::Config(format!(
                        "built-in SI teacher needs dim(E^G) = 2, got {k}; supply teacher.particles"
                    )))
                }
            };
            if coords.iter().any(|r| r.len() != k) {
                return Err(Error::Dimension(format!("SI teacher coordinates must have length {k}")));
            }
            let rows: Vec<Vec<f64>> = scaled(coords).iter().map(|a| bundle.from_reduced(a)).collect();
            ParticleEnsemble::from_rows(*unit, &rows)
        }
    }
}

/// `B` labelled samples `(x, Φ_teacher(x))` with `x ~ N(0, σ_π² I)`.
pub fn gen_batch(teacher: &ParticleEnsemble, sigma_pi: f64, b: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if b == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut stream = DataStream::new(teacher.clone(), sigma_pi, seed)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    stream.next_batch(b, &mut xs, &mut ys);
    Ok((xs, ys))
}

/// Anything that maps inputs to outputs.
pub trait Evaluable {
    fn input_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Evaluable for ParticleEnsemble {
    fn input_dim(&self) -> usize {
        self.unit().input_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        model_eval(self, x)
    }
}

/// The feature-averaged model `Q_G Φ_θ`.
pub struct FeatureAveraged<'a> {
    pub ensemble: &'a ParticleEnsemble,
    pub bundle: &'a ActionBundle,
}

impl Evaluable for FeatureAveraged<'_> {
    fn input_dim(&self) -> usize {
        self.ensemble.unit().input_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        fa_eval(self.ensemble, self.bundle, x)
    }
}

/// `sqrt(mean ‖a(x) − b(x)‖²)` over `n_points` inputs `x ~ N(0, σ_π² I)`.
pub fn l2_distance_mc(a: &dyn Evaluable, b: &dyn Evaluable, sigma_pi: f64, n_points: usize, seed: u64) -> Result<f64> {
    if n_points == 0 {
        return Err(Error::Config("n_points must be positive".into()));
    }
    if a.input_dim() != b.input_dim() {
        return Err(Error::Dimension("models take inputs of different dimension".into()));
    }
    let d = a.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..n_points {
        let x: Vec<f64> = (0..d).map(|_| sigma_pi * rng.sample::<f64, _>(StandardNormal)).collect();
        let (ya, yb) = (a.eval(&x)?, b.eval(&x)?);
        if ya.len() != yb.len() {
            return Err(Error::Dimension("models have different output dimension".into()));
        }
        acc += ya.iter().zip(&yb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    Ok((acc / n_points as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    pub unit: UnitSpec,
    pub group: GroupSetting,
    pub n_values: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub teacher: TeacherSpec,
    pub init_mode: InitMode,
    pub repetitions: usize,
    pub sigma_pi: f64,
    pub mc_points: usize,
    pub mc_seed: u64,
    /// Noise mode for every run. When absent: projected for SI/zero
    /// initialization, full otherwise (none whenever `beta = 0`).
    pub noise_mode: Option<NoiseMode>,
    /// Template for the per-run training config; `scheme`, `n_particles`,
    /// `noise_mode` and the seeds' repetition offset are filled in per run.
    pub train: TrainConfig,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            unit: UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic),
            group: GroupSetting::default(),
            n_values: vec![5, 10, 50, 100, 500, 1000, 5000],
            schemes: Scheme::ALL.to_vec(),
            teacher: TeacherSpec::default(),
            init_mode: InitMode::Si,
            repetitions: 10,
            sigma_pi: 4.0,
            mc_points: 100,
            mc_seed: 20_240_601,
            noise_mode: None,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.unit.validate()?;
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Config("n_values must be nonempty and positive".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_values must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if self.repetitions == 0 || self.mc_points == 0 {
            return Err(Error::Config("repetitions and mc_points must be positive".into()));
        }
        if !(self.sigma_pi >= 0.0 && self.sigma_pi.is_finite()) {
            return Err(Error::Config("sigma_pi must be finite and nonnegative".into()));
        }
        self.run_config(Scheme::Vanilla, self.n_values[0], 0).validate()
    }

    pub fn resolved_noise_mode(&self) -> NoiseMode {
        if self.train.beta == 0.0 {
            return NoiseMode::None;
        }
        self.noise_mode.unwrap_or(match self.init_mode {
            InitMode::Si | InitMode::Zero => NoiseMode::Projected,
            InitMode::Wi => NoiseMode::Full,
        })
    }

    /// Training config of one cell.
    pub fn run_config(&self, scheme: Scheme, n: usize, repetition: usize) -> TrainConfig {
        TrainConfig {
            scheme,
            n_particles: n,
            noise_mode: self.resolved_noise_mode(),
            seeds: self.train.seeds.for_repetition(repetition as u64),
            ..self.train.clone()
        }
    }
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub teacher_kind: String,
    pub init_mode: String,
    pub scheme: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub repetition: usize,
    pub metric_name: String,
    pub value: f64,
    pub epoch: Option<usize>,
}

/// A trained cell of the grid.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub scheme: Scheme,
    pub n: usize,
    pub repetition: usize,
    pub record: RunRecord,
}

#[derive(Debug, Clone)]
pub struct GridOutput {
    pub rows: Vec<MetricRow>,
    pub runs: Vec<CellRun>,
}

/// Median and quartiles of one metric across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub teacher_kind: String,
    pub init_mode: String,
    pub scheme: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric_name: String,
    pub epoch: Option<usize>,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn summarize(rows: &[MetricRow]) -> Vec<SummaryEntry> {
    type Key = (String, String, String, usize, String, Option<usize>);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.teacher_kind.clone(), r.init_mode.clone(), r.scheme.clone(), r.n, r.metric_name.clone(), r.epoch);
        groups.entry(key).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((teacher_kind, init_mode, scheme, n, metric_name, epoch), mut v)| {
            v.sort_by(f64::total_cmp);
            SummaryEntry {
                teacher_kind,
                init_mode,
                scheme,
                n,
                metric_name,
                epoch,
                count: v.len(),
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
            }
        })
        .collect()
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Trains every `(N, scheme, repetition)` cell and computes its metrics.
///
/// Metric names: `rmd2_to_EG`, `rmd2_to_G`, `l2_to_teacher`,
/// `l2_to_fa_teacher`, `l2_to_own_fa`, `train_loss` (the scheme's risk on
/// the shared Monte-Carlo sample, one row per snapshot) and `rmd2_pair`
/// (scheme column `a:b`).
pub fn run_grid(grid: &ExperimentGrid) -> Result<GridOutput> {
    grid.validate()?;
    let bundle = grid.group.bundle(&grid.unit)?;
    let teacher = make_teacher(&grid.teacher, &grid.unit, &bundle)?;
    let sample = McSample::draw(&teacher, grid.sigma_pi, grid.mc_points, grid.mc_seed)?;

    let mut jobs: Vec<(usize, usize, Scheme)> = Vec::new();
    for &n in grid.n_values.iter().rev() {
        for rep in 0..grid.repetitions {
            for &s in &grid.schemes {
                jobs.push((n, rep, s));
            }
        }
    }
    let runs: Vec<CellRun> = jobs
        .par_iter()
        .map(|&(n, rep, scheme)| {
            let cfg = grid.run_config(scheme, n, rep);
            let init = init_ensemble(&grid.unit, n, grid.init_mode, Some(&bundle), cfg.seeds.init)?;
            let mut data = match cfg.fixed_dataset {
                Some(size) => DataStream::fixed(teacher.clone(), grid.sigma_pi, cfg.seeds.data, size)?,
                None => DataStream::new(teacher.clone(), grid.sigma_pi, cfg.seeds.data)?,
            };
            let record = train(init, &mut data, &cfg, Some(&bundle)).map_err(|e| match e {
                Error::Diverged { epoch, reason } => {
                    Error::Diverged { epoch, reason: format!("{scheme} N={n} repetition={rep}: {reason}") }
                }
                other => other,
            })?;
            Ok(CellRun { scheme, n, repetition: rep, record })
        })
        .collect::<Result<_>>()?;

    let row = |scheme: String, n: usize, rep: usize, name: &str, value: f64, epoch: Option<usize>| MetricRow {
        teacher_kind: grid.teacher.kind.to_string(),
        init_mode: grid.init_mode.to_string(),
        scheme,
        n,
        repetition: rep,
        metric_name: name.to_string(),
        value,
        epoch,
    };

    let per_run: Vec<Vec<MetricRow>> = runs
        .par_iter()
        .map(|run| {
            let (n, rep, scheme) = (run.n, run.repetition, run.scheme);
            let fin = run.record.final_ensemble();
            let last = run.record.snapshots.last().map(|s| s.epoch);
            let mu = EmpiricalMeasure::from_ensemble(fin);
            let s = scheme.to_string();
            let mut out = vec![
                row(s.clone(), n, rep, "rmd2_to_EG", rmd2(&mu, &project(&mu, &bundle)?)?, last),
                row(s.clone(), n, rep, "rmd2_to_G", rmd2(&mu, &symmetrize(&mu, bundle.m_action())?)?, last),
            ];
            let seed = grid.mc_seed.wrapping_add(1);
            let own_fa = FeatureAveraged { ensemble: fin, bundle: &bundle };
            let fa_teacher = FeatureAveraged { ensemble: &teacher, bundle: &bundle };
            out.push(row(s.clone(), n, rep, "l2_to_teacher", l2_distance_mc(fin, &teacher, grid.sigma_pi, grid.mc_points, seed)?, last));
            out.push(row(s.clone(), n, rep, "l2_to_fa_teacher", l2_distance_mc(fin, &fa_teacher, grid.sigma_pi, grid.mc_points, seed)?, last));
            out.push(row(s.clone(), n, rep, "l2_to_own_fa", l2_distance_mc(fin, &own_fa, grid.sigma_pi, grid.mc_points, seed)?, last));
            for snap in &run.record.snapshots {
                let m = EmpiricalMeasure::from_ensemble(&snap.ensemble);
                let scale = run.record.config.loss_scale;
                let r = match scheme {
                    Scheme::Da => risk_da(&grid.unit, &m, &bundle, &sample, scale)?,
                    Scheme::Fa => risk_fa(&grid.unit, &m, &bundle, &sample, scale)?,
                    Scheme::Vanilla | Scheme::Ea => risk(&grid.unit, &m, &sample, scale)?,
                };
                out.push(row(s.clone(), n, rep, "train_loss", r.mean, Some(snap.epoch)));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<MetricRow> = per_run.into_iter().flatten().collect();

    // Pairwise distances between the schemes of the same (N, repetition).
    let mut pairs = Vec::new();
    for &n in &grid.n_values {
        for rep in 0..grid.repetitions {
            let cell: Vec<&CellRun> = runs.iter().filter(|r| r.n == n && r.repetition == rep).collect();
            for (i, a) in cell.iter().enumerate() {
                for b in &cell[i + 1..] {
                    pairs.push((n, rep, *a, *b));
                }
            }
        }
    }
    let pair_rows: Vec<MetricRow> = pairs
        .par_iter()
        .map(|(n, rep, a, b)| {
            let ma = EmpiricalMeasure::from_ensemble(a.record.final_ensemble());
            let mb = EmpiricalMeasure::from_ensemble(b.record.final_ensemble());
            let epoch = a.record.snapshots.last().map(|s| s.epoch);
            Ok(row(format!("{}:{}", a.scheme, b.scheme), *n, *rep, "rmd2_pair", rmd2(&ma, &mb)?, epoch))
        })
        .collect::<Result<_>>()?;
    rows.extend(pair_rows);

    let scheme_rank = |s: &str| {
        let first = s.split(':').next().unwrap_or(s);
        Scheme::ALL.iter().position(|x| x.as_str() == first).unwrap_or(Scheme::ALL.len())
    };
    rows.sort_by(|a, b| {
        (a.n, a.repetition, scheme_rank(&a.scheme), &a.scheme, &a.metric_name, a.epoch)
            .cmp(&(b.n, b.repetition, scheme_rank(&b.scheme), &b.scheme, &b.metric_name, b.epoch))
    });
    let mut runs = runs;
    runs.sort_by_key(|r| (r.n, r.repetition, scheme_rank(r.scheme.as_str())));
    Ok(GridOutput { rows, runs })
}

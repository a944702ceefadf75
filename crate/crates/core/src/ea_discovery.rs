//! Data-driven discovery of the invariant parameter subspace.
//!
//! Starting from `E_0 = {0}`, each step trains a vanilla model initialized
//! inside `E_j` with noise confined to `E_j`. If the final particles stay
//! within `δ_j` (in RMD²) of their projection onto `E_j`, the search stops.
//! Otherwise the mean residual `v = (1/N) Σ (θ_i − P_{E_j} θ_i)` is appended
//! to the basis and the next step starts from `E_{j+1} = E_j ⊕ v`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_rep::{ActionBundle, GroupSetting};
use crate::measures::{pushforward, rmd2, EmpiricalMeasure};
use crate::shallow_model::{ParticleEnsemble, Sigma, UnitSpec};
use crate::teacher_student::{make_teacher, TeacherKind, TeacherSpec};
use crate::training::{DataStream, NoiseMode, Scheme, TrainConfig, Trainer, INIT_STD};

/// Escape directions shorter than this are treated as cancelled out.
pub const MIN_ESCAPE_NORM: f64 = 1e-10;

/// Escape directions shorter than this fraction of the RMS residual are
/// treated as cancelled out.
pub const MIN_ESCAPE_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub unit: UnitSpec,
    /// Group used to build WI/SI teachers and to report the distance to the true E^G.
    pub group: GroupSetting,
    /// Required in config files.
    #[serde(default)]
    pub teacher: Option<TeacherSpec>,
    pub sigma_pi: f64,
    /// Threshold used for every step without an entry in `delta_schedule`.
    pub delta: f64,
    pub delta_schedule: Vec<f64>,
    pub max_steps: Option<usize>,
    /// Defaults to `D`.
    pub max_dim: Option<usize>,
    /// Compare each step against the group's E^G.
    pub reference: bool,
    pub train: TrainConfig,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            unit: UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic),
            group: GroupSetting::default(),
            teacher: Some(TeacherSpec::new(TeacherKind::Wi)),
            sigma_pi: 4.0,
            delta: 1e-2,
            delta_schedule: Vec::new(),
            max_steps: None,
            max_dim: None,
            reference: true,
            train: TrainConfig {
                alpha: 20.0,
                n_particles: 1000,
                noise_mode: NoiseMode::Projected,
                ..TrainConfig::default()
            },
        }
    }
}

impl DiscoveryConfig {
    pub fn delta_for(&self, j: usize) -> f64 {
        self.delta_schedule.get(j).copied().unwrap_or(self.delta)
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim.unwrap_or(self.unit.param_dim()).min(self.unit.param_dim())
    }

    /// Defaults to `max_dim + 1`, enough to reach saturation.
    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(self.max_dim() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.unit.validate()?;
        if self.teacher.is_none() {
            return Err(Error::Config("discovery needs a teacher specification".into()));
        }
        if self.train.scheme != Scheme::Vanilla {
            return Err(Error::Config("discovery trains with the vanilla scheme".into()));
        }
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.max_dim == Some(0) {
            return Err(Error::Config("max_dim must be positive".into()));
        }
        let bad_delta = |d: f64| !(d >= 0.0 && d.is_finite());
        if bad_delta(self.delta) || self.delta_schedule.iter().any(|d| bad_delta(*d)) {
            return Err(Error::Config("thresholds must be finite and nonnegative".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Stayed,
    Escaped,
    Saturated,
}

/// What happened at step `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub j: usize,
    pub k_j: usize,
    pub delta: f64,
    #[serde(rename = "rmd2_to_Ej")]
    pub rmd2_to_ej: Option<f64>,
    #[serde(rename = "rmd2_to_true_EG")]
    pub rmd2_to_true_eg: Option<f64>,
    pub escaped: bool,
    pub decision: Decision,
    /// Normalized escape direction, ambient coordinates.
    pub v: Option<Vec<f64>>,
    #[serde(skip)]
    pub final_ensemble: Option<ParticleEnsemble>,
}

/// The nested subspaces `E_0 ⊆ E_1 ⊆ …` found so far.
#[derive(Debug, Clone)]
pub struct HeuristicState {
    pub j: usize,
    /// Orthonormal columns spanning `E_j` (`D × k_j`).
    pub basis: DMatrix<f64>,
    pub history: Vec<StepRecord>,
}

impl HeuristicState {
    pub fn new(dim: usize) -> Self {
        Self { j: 0, basis: DMatrix::zeros(dim, 0), history: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Largest `|BᵀB − I|` entry.
    pub fn gram_residual(&self) -> f64 {
        let k = self.k();
        (self.basis.transpose() * &self.basis - DMatrix::identity(k, k)).amax()
    }
}

/// `RMD²(μ, P#μ)` for the orthogonal projector onto the span of `basis`.
pub fn rmd2_to_subspace(mu: &EmpiricalMeasure, basis: &DMatrix<f64>) -> Result<f64> {
    rmd2(mu, &pushforward(mu, &(basis * basis.transpose()))?)
}

/// Appends `v` to an orthonormal basis by two passes of Gram-Schmidt.
pub fn append_direction(basis: &DMatrix<f64>, v: &[f64]) -> Result<DMatrix<f64>> {
    let mut w = DVector::from_column_slice(v);
    for _ in 0..2 {
        for c in basis.column_iter() {
            let proj = c.dot(&w);
            w -= proj * c;
        }
    }
    let norm = w.norm();
    if norm < MIN_ESCAPE_NORM {
        return Err(Error::DegenerateEscape { norm, rmd2: f64::NAN });
    }
    w /= norm;
    let k = basis.ncols();
    let mut out = basis.clone().resize_horizontally(k + 1, 0.0);
    out.set_column(k, &w);
    Ok(out)
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let svd = (a.transpose() * b).svd(false, false);
    let mut angles: Vec<f64> = svd.singular_values.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Runs one step of the heuristic and updates `state`.
pub fn heuristic_step(
    state: &mut HeuristicState,
    teacher: &ParticleEnsemble,
    cfg: &DiscoveryConfig,
    reference: Option<&ActionBundle>,
) -> Result<Decision> {
    let j = state.j;
    let k = state.k();
    let delta = cfg.delta_for(j);
    if k >= cfg.max_dim() {
        state.history.push(StepRecord {
            j,
            k_j: k,
            delta,
            rmd2_to_ej: None,
            rmd2_to_true_eg: None,
            escaped: false,
            decision: Decision::Saturated,
            v: None,
            final_ensemble: None,
        });
        return Ok(Decision::Saturated);
    }

    let unit = cfg.unit;
    let n = cfg.train.n_particles;
    let dim = unit.param_dim();
    let init = if k == 0 {
        ParticleEnsemble::zeros(unit, n)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seeds.init);
        let mut params = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let a = DVector::from_fn(k, |_, _| INIT_STD * rng.sample::<f64, _>(StandardNormal));
            params.extend((&state.basis * a).iter());
        }
        ParticleEnsemble::new(unit, n, params)?
    };
    let mut data = DataStream::new(teacher.clone(), cfg.sigma_pi, cfg.train.seeds.data)?;
    let trainer = Trainer::with_noise_basis(cfg.train.clone(), None, init, Some(&state.basis))?;
    let record = trainer.run(&mut data)?;
    let fin = record.final_ensemble().clone();
    let mu = EmpiricalMeasure::from_ensemble(&fin);
    let r = rmd2_to_subspace(&mu, &state.basis)?;
    let r_true = match reference {
        Some(b) => Some(rmd2_to_subspace(&mu, b.eg_basis())?),
        None => None,
    };

    let mut rec = StepRecord {
        j,
        k_j: k,
        delta,
        rmd2_to_ej: Some(r),
        rmd2_to_true_eg: r_true,
        escaped: false,
        decision: Decision::Stayed,
        v: None,
        final_ensemble: Some(fin.clone()),
    };
    if r <= delta {
        state.history.push(rec);
        return Ok(Decision::Stayed);
    }

    let p = state.projector();
    let mut v = vec![0.0; dim];
    let mut sq = 0.0;
    for theta in fin.particles() {
        let t = DVector::from_column_slice(theta);
        let res = &t - &p * &t;
        sq += res.norm_squared();
        for (vi, ri) in v.iter_mut().zip(res.iter()) {
            *vi += ri / n as f64;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rms = (sq / n as f64).sqrt();
    if norm < MIN_ESCAPE_NORM || norm < MIN_ESCAPE_RATIO * rms {
        return Err(Error::DegenerateEscape { norm, rmd2: r });
    }
    let unit_v: Vec<f64> = v.iter().map(|x| x / norm).collect();
    state.basis = append_direction(&state.basis, &unit_v).map_err(|_| Error::DegenerateEscape { norm, rmd2: r })?;
    rec.escaped = true;
    rec.decision = Decision::Escaped;
    rec.v = Some(unit_v);
    state.history.push(rec);
    state.j += 1;
    Ok(Decision::Escaped)
}

/// Result of a full discovery run.
#[derive(Debug, Clone)]
pub struct Discovery {
    pub state: HeuristicState,
    pub final_decision: Decision,
    /// Principal angles to the reference E^G, when one was supplied.
    pub principal_angles: Option<Vec<f64>>,
    pub true_eg_dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryDocument {
    pub steps: Vec<StepRecord>,
    pub final_decision: Decision,
    pub final_dim: usize,
    pub true_eg_dim: Option<usize>,
    pub principal_angles: Option<Vec<f64>>,
}

impl Discovery {
    pub fn document(&self) -> DiscoveryDocument {
        DiscoveryDocument {
            steps: self.state.history.clone(),
            final_decision: self.final_decision,
            final_dim: self.state.k(),
            true_eg_dim: self.true_eg_dim,
            principal_angles: self.principal_angles.clone(),
        }
    }

    pub fn largest_angle(&self) -> Option<f64> {
        self.principal_angles.as_ref().and_then(|a| a.last().copied())
    }
}

/// Repeats [`heuristic_step`] until a step stays, the basis saturates, or
/// `max_steps` steps have run.
pub fn discover(cfg: &DiscoveryConfig) -> Result<Discovery> {
    cfg.validate()?;
    let bundle = cfg.group.bundle(&cfg.unit)?;
    let teacher = make_teacher(cfg.teacher.as_ref().expect("validated"), &cfg.unit, &bundle)?;
    let reference = cfg.reference.then_some(&bundle);
    let mut state = HeuristicState::new(cfg.unit.param_dim());
    let mut decision = Decision::Escaped;
    for _ in 0..cfg.max_steps() {
        decision = heuristic_step(&mut state, &teacher, cfg, reference)?;
        if decision != Decision::Escaped {
            break;
        }
    }
    let principal_angles = reference.map(|b| principal_angles(&state.basis, b.eg_basis()));
    Ok(Discovery {
        state,
        final_decision: decision,
        principal_angles,
        true_eg_dim: reference.map(|b| b.eg_dim()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_append() {
        let b = DMatrix::zeros(3, 0);
        let b = append_direction(&b, &[3.0, 0.0, 4.0]).unwrap();
        let b = append_direction(&b, &[1.0, 1.0, 0.0]).unwrap();
        let s = HeuristicState { j: 2, basis: b, history: vec![] };
        assert!(s.gram_residual() < 1e-15);
        assert!(append_direction(&s.basis, &[0.6, 0.0, 0.8]).is_err());
    }

    #[test]
    fn angles_between_planes() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let t = 0.3f64;
        let b = DMatrix::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
        let ang = principal_angles(&a, &b);
        assert!((ang[0] - t).abs() < 1e-12);
    }

    #[test]
    fn config_requires_teacher() {
        let cfg = DiscoveryConfig { teacher: None, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let parsed: DiscoveryConfig = serde_json::from_str("{}").unwrap();
        assert!(parsed.validate().is_err());
    }

    #[test]
    fn threshold_schedule() {
        let cfg = DiscoveryConfig { delta_schedule: vec![0.5], ..Default::default() };
        assert_eq!(cfg.delta_for(0), 0.5);
        assert_eq!(cfg.delta_for(3), 1e-2);
        assert_eq!(cfg.max_steps(), 5);
    }
}

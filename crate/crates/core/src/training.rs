//! Noisy minibatch SGD on particle ensembles under the vanilla, DA, FA and
//! EA schemes.
//!
//! Each run owns four independent ChaCha streams (initialization, data,
//! noise, DA group draws). Vanilla, DA and FA consume the noise stream
//! identically, so runs with equal seeds see the same data and the same
//! noise.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::group_rep::{row_major, ActionBundle};
use crate::shallow_model::{apply_into, loss, loss_grad, FaWorkspace, LossScale, ParticleEnsemble, UnitSpec};

/// Standard deviation of the Gaussian initialization (variance 1/16).
pub const INIT_STD: f64 = 0.25;

/// Runs abort once any parameter exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[default]
    #[serde(rename = "vanilla", alias = "Vanilla", alias = "V")]
    Vanilla,
    #[serde(rename = "DA", alias = "da")]
    Da,
    #[serde(rename = "FA", alias = "fa")]
    Fa,
    #[serde(rename = "EA", alias = "ea")]
    Ea,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Vanilla, Scheme::Da, Scheme::Fa, Scheme::Ea];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Vanilla => "vanilla",
            Scheme::Da => "DA",
            Scheme::Fa => "FA",
            Scheme::Ea => "EA",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}', expected vanilla, DA, FA or EA")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Full,
    Projected,
    None,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitMode {
    /// i.i.d. `N(0, 1/16)` entries.
    #[default]
    #[serde(rename = "WI", alias = "wi")]
    Wi,
    /// The WI draws projected onto E^G.
    #[serde(rename = "SI", alias = "si")]
    Si,
    #[serde(rename = "zero")]
    Zero,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Wi => "WI",
            InitMode::Si => "SI",
            InitMode::Zero => "zero",
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub init: u64,
    pub data: u64,
    pub noise: u64,
    pub da: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { init: 1, data: 2, noise: 3, da: 4 }
    }
}

impl Seeds {
    /// Seeds for repetition `r`: every stream is shifted by `r`.
    pub fn for_repetition(self, r: u64) -> Self {
        Self { init: self.init + r, data: self.data + r, noise: self.noise + r, da: self.da + r }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub scheme: Scheme,
    /// Base rate; the step size is `alpha / n_particles`.
    pub alpha: f64,
    pub n_particles: usize,
    pub horizon_t: f64,
    pub batch: usize,
    pub tau: f64,
    pub beta: f64,
    pub noise_mode: NoiseMode,
    pub granularity: usize,
    pub seeds: Seeds,
    pub loss_scale: LossScale,
    /// Cycle through a fixed dataset of this size instead of sampling fresh data.
    pub fixed_dataset: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Vanilla,
            alpha: 50.0,
            n_particles: 100,
            horizon_t: 20.0,
            batch: 20,
            tau: 1e-4,
            beta: 1e-6,
            noise_mode: NoiseMode::Full,
            granularity: 5,
            seeds: Seeds::default(),
            loss_scale: LossScale::One,
            fixed_dataset: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.n_particles == 0 {
            return bad("n_particles must be positive".into());
        }
        if !(self.horizon_t > 0.0 && self.horizon_t.is_finite()) {
            return bad(format!("horizon_t must be positive, got {}", self.horizon_t));
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("tau and beta must be finite and nonnegative".into());
        }
        if self.granularity == 0 {
            return bad("granularity must be positive".into());
        }
        if (self.noise_mode == NoiseMode::None) != (self.beta == 0.0) {
            return bad(format!("noise_mode {:?} is inconsistent with beta = {}", self.noise_mode, self.beta));
        }
        if self.fixed_dataset == Some(0) {
            return bad("fixed_dataset must be positive".into());
        }
        Ok(())
    }

    /// `s = α / N`.
    pub fn step_size(&self) -> f64 {
        self.alpha / self.n_particles as f64
    }

    /// `N_e = ⌈N · T⌉`.
    pub fn epochs(&self) -> usize {
        (self.n_particles as f64 * self.horizon_t).ceil() as usize
    }

    /// Epochs at which snapshots are taken: multiples of `⌊N_e / gr⌋` below
    /// `gr` steps, then `N_e`.
    pub fn snapshot_epochs(&self) -> Vec<usize> {
        let ne = self.epochs();
        let stride = ne / self.granularity;
        let mut out: Vec<usize> = (0..self.granularity).map(|k| k * stride).collect();
        out.push(ne);
        out.dedup();
        out
    }

    pub fn needs_bundle(&self) -> bool {
        self.scheme != Scheme::Vanilla || self.noise_mode == NoiseMode::Projected
    }
}

/// Initial particles; deterministic in `seed`.
pub fn init_ensemble(
    unit: &UnitSpec,
    n: usize,
    mode: InitMode,
    bundle: Option<&ActionBundle>,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let dim = unit.param_dim();
    match mode {
        InitMode::Zero => ParticleEnsemble::zeros(*unit, n),
        InitMode::Wi | InitMode::Si => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params: Vec<f64> = (0..n * dim).map(|_| INIT_STD * rng.sample::<f64, _>(StandardNormal)).collect();
            let ens = ParticleEnsemble::new(*unit, n, params)?;
            if mode == InitMode::Wi {
                return Ok(ens);
            }
            let bundle = bundle.ok_or_else(|| Error::Config("SI initialization needs a group bundle".into()))?;
            if bundle.param_dim() != dim {
                return Err(Error::Dimension("bundle does not match the unit".into()));
            }
            ens.projected(bundle)
        }
    }
}

/// Labelled Gaussian inputs `x ~ N(0, σ_π² I)`, `y = Φ_teacher(x)`.
#[derive(Debug, Clone)]
pub struct DataStream {
    teacher: ParticleEnsemble,
    sigma_pi: f64,
    rng: ChaCha8Rng,
    fixed: Option<(Vec<f64>, Vec<f64>)>,
    cursor: usize,
    acts: Vec<f64>,
}

impl DataStream {
    /// Infinite stream of fresh samples.
    pub fn new(teacher: ParticleEnsemble, sigma_pi: f64, seed: u64) -> Result<Self> {
        if !(sigma_pi >= 0.0 && sigma_pi.is_finite()) {
            return Err(Error::Config(format!("sigma_pi must be finite and nonnegative, got {sigma_pi}")));
        }
        let acts = vec![0.0; teacher.act_len()];
        Ok(Self { teacher, sigma_pi, rng: ChaCha8Rng::seed_from_u64(seed), fixed: None, cursor: 0, acts })
    }

    /// Draws `size` samples once and then cycles through them.
    pub fn fixed(teacher: ParticleEnsemble, sigma_pi: f64, seed: u64, size: usize) -> Result<Self> {
        let mut s = Self::new(teacher, sigma_pi, seed)?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        s.sample(size, &mut xs, &mut ys);
        s.fixed = Some((xs, ys));
        Ok(s)
    }

    pub fn teacher(&self) -> &ParticleEnsemble {
        &self.teacher
    }

    fn sample(&mut self, b: usize, xs: &mut Vec<f64>, ys: &mut Vec<f64>) {
        let d = self.teacher.unit().input_dim();
        let c = self.teacher.unit().output_dim();
        xs.clear();
        ys.clear();
        xs.extend((0..b * d).map(|_| self.sigma_pi * self.rng.sample::<f64, _>(StandardNormal)));
        ys.resize(b * c, 0.0);
        for k in 0..b {
            self.teacher.forward(&xs[k * d..(k + 1) * d], &mut self.acts, &mut ys[k * c..(k + 1) * c]);
        }
    }

    /// Fills `xs` (`b × d`) and `ys` (`b × c`) row-major.
    pub fn next_batch(&mut self, b: usize, xs: &mut Vec<f64>, ys: &mut Vec<f64>) {
        let Some((fx, fy)) = &self.fixed else {
            return self.sample(b, xs, ys);
        };
        let d = self.teacher.unit().input_dim();
        let c = self.teacher.unit().output_dim();
        let size = fx.len() / d;
        xs.clear();
        ys.clear();
        for _ in 0..b {
            xs.extend_from_slice(&fx[self.cursor * d..(self.cursor + 1) * d]);
            ys.extend_from_slice(&fy[self.cursor * c..(self.cursor + 1) * c]);
            self.cursor = (self.cursor + 1) % size;
        }
    }
}

/// Mutable state of one training run.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    bundle: Option<&'a ActionBundle>,
    ens: ParticleEnsemble,
    /// EA only: reduced coordinates (`N × k`) and the row-major basis (`D × k`).
    reduced: Option<(Vec<f64>, Vec<f64>, usize)>,
    noise_rng: ChaCha8Rng,
    da_rng: ChaCha8Rng,
    epoch: usize,
    grad: Vec<f64>,
    acts: Vec<f64>,
    out: Vec<f64>,
    xbuf: Vec<f64>,
    ybuf: Vec<f64>,
    noise: Vec<f64>,
    fa: Option<FaWorkspace>,
    noise_projector: Option<Vec<f64>>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, bundle: Option<&'a ActionBundle>, init: ParticleEnsemble) -> Result<Self> {
        Self::with_noise_basis(cfg, bundle, init, None)
    }

    /// Like [`Trainer::new`], but projected noise lands in the span of the
    /// orthonormal columns of `noise_basis` instead of E^G.
    pub fn with_noise_basis(
        cfg: TrainConfig,
        bundle: Option<&'a ActionBundle>,
        init: ParticleEnsemble,
        noise_basis: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if init.n() != cfg.n_particles {
            return Err(Error::Config(format!(
                "initial ensemble has {} particles, config expects {}",
                init.n(),
                cfg.n_particles
            )));
        }
        let needs_bundle = cfg.scheme != Scheme::Vanilla || (cfg.noise_mode == NoiseMode::Projected && noise_basis.is_none());
        if needs_bundle && bundle.is_none() {
            return Err(Error::Config(format!("scheme {} with {:?} noise needs a group bundle", cfg.scheme, cfg.noise_mode)));
        }
        if let Some(b) = bundle {
            if b.param_dim() != init.dim()
                || b.rho().dim() != init.unit().input_dim()
                || b.rho_hat().dim() != init.unit().output_dim()
            {
                return Err(Error::Dimension("bundle does not match the ensemble's unit".into()));
            }
        }
        let dim = init.dim();
        let noise_projector = match noise_basis {
            Some(basis) if basis.nrows() != dim => {
                return Err(Error::Dimension(format!("noise basis has {} rows, D = {dim}", basis.nrows())))
            }
            Some(basis) => Some(row_major(&(basis * basis.transpose()))),
            None => bundle.map(|b| b.projector_row_major().to_vec()),
        };
        let reduced = match (cfg.scheme, bundle) {
            (Scheme::Ea, Some(b)) => {
                let k = b.eg_dim();
                let basis = b.eg_basis();
                let basis_rm: Vec<f64> = (0..dim).flat_map(|r| (0..k).map(move |c| basis[(r, c)])).collect();
                let coords: Vec<f64> = init.particles().flat_map(|p| b.to_reduced(p)).collect();
                Some((coords, basis_rm, k))
            }
            _ => None,
        };
        let fa = (cfg.scheme == Scheme::Fa).then(|| FaWorkspace::new(&init, bundle.unwrap()));
        let mut t = Self {
            noise_rng: ChaCha8Rng::seed_from_u64(cfg.seeds.noise),
            da_rng: ChaCha8Rng::seed_from_u64(cfg.seeds.da),
            epoch: 0,
            grad: vec![0.0; init.params().len()],
            acts: vec![0.0; init.act_len()],
            out: vec![0.0; init.unit().output_dim()],
            xbuf: vec![0.0; init.unit().input_dim()],
            ybuf: vec![0.0; init.unit().output_dim()],
            noise: vec![0.0; dim],
            fa,
            noise_projector,
            cfg,
            bundle,
            ens: init,
            reduced,
        };
        if t.reduced.is_some() {
            t.reconstruct();
        }
        Ok(t)
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ens
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// EA reduced coordinates, `N × k` row-major.
    pub fn reduced_coordinates(&self) -> Option<&[f64]> {
        self.reduced.as_ref().map(|(a, _, _)| a.as_slice())
    }

    fn reconstruct(&mut self) {
        let (coords, basis, k) = self.reduced.as_ref().unwrap();
        let k = *k;
        let dim = self.ens.dim();
        let params = self.ens.params_mut();
        for (theta, a) in params.chunks_exact_mut(dim).zip(coords.chunks_exact(k.max(1))) {
            for (r, t) in theta.iter_mut().enumerate() {
                *t = basis[r * k..(r + 1) * k].iter().zip(a).map(|(p, q)| p * q).sum();
            }
        }
        if k == 0 {
            params.iter_mut().for_each(|t| *t = 0.0);
        }
    }

    /// One SGD step on the minibatch `xs` (`B × d`), `ys` (`B × c`). Returns
    /// the mean minibatch loss of the scheme's model before the update.
    pub fn step(&mut self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        let d = self.ens.unit().input_dim();
        let c = self.ens.unit().output_dim();
        if xs.len() % d != 0 || ys.len() != xs.len() / d * c || xs.is_empty() {
            return Err(Error::Dimension(format!("batch of {} inputs and {} labels", xs.len(), ys.len())));
        }
        let b = xs.len() / d;
        let inv_b = 1.0 / b as f64;
        let scale = self.cfg.loss_scale;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total_loss = 0.0;

        for k in 0..b {
            let x = &xs[k * d..(k + 1) * d];
            let y = &ys[k * c..(k + 1) * c];
            match self.cfg.scheme {
                Scheme::Fa => {
                    let bundle = self.bundle.unwrap();
                    let ws = self.fa.as_mut().unwrap();
                    total_loss += ws.accumulate(&self.ens, bundle, x, y, scale, inv_b, &mut self.grad);
                }
                Scheme::Da => {
                    let bundle = self.bundle.unwrap();
                    let g = self.da_rng.random_range(0..bundle.order());
                    apply_into(bundle.rho_row_major(g), x, &mut self.xbuf);
                    apply_into(bundle.rho_hat_row_major(g), y, &mut self.ybuf);
                    total_loss += self.plain_accumulate(inv_b, scale);
                }
                Scheme::Vanilla | Scheme::Ea => {
                    self.xbuf.copy_from_slice(x);
                    self.ybuf.copy_from_slice(y);
                    total_loss += self.plain_accumulate(inv_b, scale);
                }
            }
        }

        let s = self.cfg.step_size();
        let noise_scale = (2.0 * self.cfg.beta * s).sqrt();
        let two_tau = 2.0 * self.cfg.tau;
        let dim = self.ens.dim();
        let n = self.ens.n();
        let mode = self.cfg.noise_mode;

        if let Some((coords, basis, k)) = self.reduced.as_mut() {
            let k = *k;
            for i in 0..n {
                let g = &self.grad[i * dim..(i + 1) * dim];
                let a = &mut coords[i * k..(i + 1) * k];
                match mode {
                    NoiseMode::None => {}
                    NoiseMode::Full => {
                        for j in 0..k {
                            self.noise[j] = self.noise_rng.sample(StandardNormal);
                        }
                    }
                    NoiseMode::Projected => {
                        for v in self.noise.iter_mut() {
                            *v = self.noise_rng.sample(StandardNormal);
                        }
                        // Bᵀ ξ, stored in the first k slots.
                        let mut red = [0.0f64; 64];
                        let mut heap = Vec::new();
                        let red: &mut [f64] = if k <= 64 {
                            &mut red[..k]
                        } else {
                            heap.resize(k, 0.0);
                            &mut heap
                        };
                        for r in 0..dim {
                            for j in 0..k {
                                red[j] += basis[r * k + j] * self.noise[r];
                            }
                        }
                        self.noise[..k].copy_from_slice(red);
                    }
                }
                for j in 0..k {
                    let mut rg = two_tau * a[j];
                    for r in 0..dim {
                        rg += basis[r * k + j] * g[r];
                    }
                    a[j] -= s * rg;
                    if mode != NoiseMode::None {
                        a[j] += noise_scale * self.noise[j];
                    }
                }
            }
            self.reconstruct();
        } else {
            let proj = match mode {
                NoiseMode::Projected => self.noise_projector.as_deref(),
                _ => None,
            };
            let mut pn = vec![0.0; if proj.is_some() { dim } else { 0 }];
            let params = self.ens.params_mut();
            for i in 0..n {
                let theta = &mut params[i * dim..(i + 1) * dim];
                let g = &self.grad[i * dim..(i + 1) * dim];
                for r in 0..dim {
                    theta[r] -= s * (g[r] + two_tau * theta[r]);
                }
                if mode == NoiseMode::None {
                    continue;
                }
                for v in self.noise.iter_mut() {
                    *v = self.noise_rng.sample(StandardNormal);
                }
                let xi: &[f64] = match proj {
                    Some(p) => {
                        apply_into(p, &self.noise, &mut pn);
                        &pn
                    }
                    None => &self.noise,
                };
                for r in 0..dim {
                    theta[r] += noise_scale * xi[r];
                }
            }
        }

        self.epoch += 1;
        if let Some(bad) = self.ens.params().iter().find(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(Error::Diverged { epoch: self.epoch, reason: format!("parameter reached {bad}") });
        }
        Ok(total_loss * inv_b)
    }

    /// Vanilla gradient contribution of the sample stored in `xbuf`/`ybuf`.
    fn plain_accumulate(&mut self, weight: f64, scale: LossScale) -> f64 {
        self.ens.forward(&self.xbuf, &mut self.acts, &mut self.out);
        let v = loss_grad(&self.out, &self.ybuf, scale);
        self.ens.backward(&self.xbuf, &self.acts, &v, weight, &mut self.grad);
        loss(&self.out, &self.ybuf, scale)
    }
}

/// A snapshot of the ensemble at a given epoch.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub ensemble: ParticleEnsemble,
}

/// The recorded trajectory of one training run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub step_size: f64,
    pub snapshots: Vec<Snapshot>,
    pub mean_batch_loss: Vec<f64>,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn final_ensemble(&self) -> &ParticleEnsemble {
        &self.snapshots.last().expect("a run always has an initial snapshot").ensemble
    }
}

/// Runs `N_e` steps on fresh minibatches, snapshotting per the granularity.
/// `mean_batch_loss[i]` averages the minibatch losses between snapshots
/// `i` and `i + 1`.
pub fn train(
    init: ParticleEnsemble,
    data: &mut DataStream,
    cfg: &TrainConfig,
    bundle: Option<&ActionBundle>,
) -> Result<RunRecord> {
    Trainer::new(cfg.clone(), bundle, init)?.run(data)
}

impl Trainer<'_> {
    /// Trains a fresh trainer for `N_e` steps on minibatches from `data`.
    pub fn run(mut self, data: &mut DataStream) -> Result<RunRecord> {
        let start = Instant::now();
        if self.epoch != 0 {
            return Err(Error::Config("run() expects a trainer at epoch 0".into()));
        }
        if data.teacher().unit().input_dim() != self.ens.unit().input_dim()
            || data.teacher().unit().output_dim() != self.ens.unit().output_dim()
        {
            return Err(Error::Dimension("teacher and student map between different spaces".into()));
        }
        let cfg = self.cfg.clone();
        let epochs = cfg.snapshot_epochs();
        let mut snapshots = vec![Snapshot { epoch: 0, ensemble: self.ens.clone() }];
        let mut mean_batch_loss = Vec::with_capacity(epochs.len());
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &target in &epochs[1..] {
            let mut acc = 0.0;
            let from = self.epoch;
            while self.epoch < target {
                data.next_batch(cfg.batch, &mut xs, &mut ys);
                acc += self.step(&xs, &ys)?;
            }
            mean_batch_loss.push(acc / (target - from) as f64);
            snapshots.push(Snapshot { epoch: target, ensemble: self.ens.clone() });
        }
        Ok(RunRecord {
            step_size: cfg.step_size(),
            config: cfg,
            snapshots,
            mean_batch_loss,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_rep::{GroupName, GroupSetting};
    use crate::shallow_model::Sigma;

    fn unit() -> UnitSpec {
        UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic)
    }

    #[test]
    fn snapshot_schedule() {
        let cfg = TrainConfig { n_particles: 5, ..Default::default() };
        assert_eq!(cfg.epochs(), 100);
        assert_eq!(cfg.snapshot_epochs(), vec![0, 20, 40, 60, 80, 100]);
        let odd = TrainConfig { n_particles: 3, horizon_t: 1.0, ..Default::default() };
        assert_eq!(odd.snapshot_epochs(), vec![0, 3]);
        let frac = TrainConfig { n_particles: 7, horizon_t: 1.5, ..Default::default() };
        assert_eq!(frac.epochs(), 11);
        assert_eq!(frac.snapshot_epochs(), vec![0, 2, 4, 6, 8, 11]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { beta: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let ok = TrainConfig { beta: 0.0, noise_mode: NoiseMode::None, ..Default::default() };
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { batch: 0, ..Default::default() }.validate().is_err());
        assert!("fa".parse::<Scheme>().unwrap() == Scheme::Fa);
        assert!("XA".parse::<Scheme>().is_err());
    }

    #[test]
    fn init_modes() {
        let bundle = GroupSetting::new(GroupName::C2Swap, 2).bundle(&unit()).unwrap();
        let a = init_ensemble(&unit(), 10, InitMode::Wi, None, 7).unwrap();
        let b = init_ensemble(&unit(), 10, InitMode::Wi, None, 7).unwrap();
        assert_eq!(a, b);
        let si = init_ensemble(&unit(), 10, InitMode::Si, Some(&bundle), 7).unwrap();
        for p in si.particles() {
            for g in 0..bundle.order() {
                let q = bundle.act_param(g, p);
                assert!(p.iter().zip(&q).all(|(x, y)| (x - y).abs() < 1e-10));
            }
        }
        assert!(init_ensemble(&unit(), 10, InitMode::Si, None, 7).is_err());
        assert!(init_ensemble(&unit(), 3, InitMode::Zero, None, 0).unwrap().params().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exact_fit_without_noise_is_fixed_point() {
        let teacher = init_ensemble(&unit(), 4, InitMode::Wi, None, 11).unwrap();
        let mut data = DataStream::new(teacher.clone(), 4.0, 5).unwrap();
        let cfg = TrainConfig {
            n_particles: 4,
            horizon_t: 2.0,
            tau: 0.0,
            beta: 0.0,
            noise_mode: NoiseMode::None,
            ..Default::default()
        };
        let rec = train(teacher.clone(), &mut data, &cfg, None).unwrap();
        assert_eq!(rec.final_ensemble(), &teacher);
        assert_eq!(rec.step_size, 12.5);
    }

    #[test]
    fn fixed_dataset_cycles() {
        let teacher = init_ensemble(&unit(), 2, InitMode::Wi, None, 1).unwrap();
        let mut data = DataStream::fixed(teacher, 1.0, 3, 3).unwrap();
        let (mut x1, mut y1, mut x2, mut y2) = (vec![], vec![], vec![], vec![]);
        data.next_batch(3, &mut x1, &mut y1);
        data.next_batch(3, &mut x2, &mut y2);
        assert_eq!(x1, x2);
        assert_eq!(y1, y2);
    }

    #[test]
    fn divergence_is_reported() {
        let teacher = init_ensemble(&unit(), 2, InitMode::Wi, None, 1).unwrap();
        let mut data = DataStream::new(teacher.clone(), 1e4, 3).unwrap();
        let cfg = TrainConfig { n_particles: 2, alpha: 1e9, ..Default::default() };
        let err = train(teacher, &mut data, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}

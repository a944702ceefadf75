//! Generalized shallow models `Φ_θ(x) = (1/N) Σ_i σ*(x, θ_i)`.
//!
//! Two unit families are supported:
//!
//! * **matrix-sigmoid**: `z ∈ R^{c×d}`, `σ*(x, z) = σ(z·x)` entrywise;
//! * **affine-layer**: `z = (W, A, B) ∈ R^{c×b} × R^{d×b} × R^b`,
//!   `σ*(x, z) = W σ(Aᵀx + B)`.
//!
//! Parameters are flattened row-major; for affine layers the blocks are
//! concatenated as `[W | A | B]`. This is the same convention used by the
//! parameter actions in [`crate::group_rep`].
//!
//! Gradients are closed-form. Per-particle gradient rows carry no `1/N`
//! factor: the model mean's `1/N` is absorbed in the `α/N` step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_rep::ActionBundle;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma {
    #[default]
    Logistic,
    Tanh,
}

impl Sigma {
    #[inline]
    pub fn value(self, t: f64) -> f64 {
        match self {
            Sigma::Logistic => 1.0 / (1.0 + (-t).exp()),
            Sigma::Tanh => t.tanh(),
        }
    }

    /// Derivative expressed through the function value `s = σ(t)`.
    #[inline]
    pub fn derivative_from_value(self, s: f64) -> f64 {
        match self {
            Sigma::Logistic => s * (1.0 - s),
            Sigma::Tanh => 1.0 - s * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UnitSpec {
    MatrixSigmoid {
        d: usize,
        c: usize,
        #[serde(default)]
        sigma: Sigma,
    },
    AffineLayer {
        d: usize,
        b: usize,
        c: usize,
        #[serde(default)]
        sigma: Sigma,
    },
}

impl Default for UnitSpec {
    fn default() -> Self {
        UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic)
    }
}

impl UnitSpec {
    pub fn matrix_sigmoid(d: usize, c: usize, sigma: Sigma) -> Self {
        UnitSpec::MatrixSigmoid { d, c, sigma }
    }

    pub fn affine_layer(d: usize, b: usize, c: usize, sigma: Sigma) -> Self {
        UnitSpec::AffineLayer { d, b, c, sigma }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            UnitSpec::MatrixSigmoid { d, .. } | UnitSpec::AffineLayer { d, .. } => d,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            UnitSpec::MatrixSigmoid { c, .. } | UnitSpec::AffineLayer { c, .. } => c,
        }
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        match *self {
            UnitSpec::MatrixSigmoid { .. } => None,
            UnitSpec::AffineLayer { b, .. } => Some(b),
        }
    }

    pub fn sigma(&self) -> Sigma {
        match *self {
            UnitSpec::MatrixSigmoid { sigma, .. } | UnitSpec::AffineLayer { sigma, .. } => sigma,
        }
    }

    pub fn with_sigma(self, sigma: Sigma) -> Self {
        match self {
            UnitSpec::MatrixSigmoid { d, c, .. } => UnitSpec::MatrixSigmoid { d, c, sigma },
            UnitSpec::AffineLayer { d, b, c, .. } => UnitSpec::AffineLayer { d, b, c, sigma },
        }
    }

    /// Parameter dimension `D`.
    pub fn param_dim(&self) -> usize {
        match *self {
            UnitSpec::MatrixSigmoid { d, c, .. } => c * d,
            UnitSpec::AffineLayer { d, b, c, .. } => c * b + d * b + b,
        }
    }

    /// Length of the per-particle activation cache.
    pub(crate) fn act_dim(&self) -> usize {
        match *self {
            UnitSpec::MatrixSigmoid { c, .. } => c,
            UnitSpec::AffineLayer { b, .. } => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            UnitSpec::MatrixSigmoid { d, c, .. } => d > 0 && c > 0,
            UnitSpec::AffineLayer { d, b, c, .. } => d > 0 && b > 0 && c > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("unit dimensions must be positive: {self:?}")))
        }
    }

    /// Forward pass for one particle. Writes `σ*(x, z)` into `out` and the
    /// activation values into `acts`.
    #[inline(always)]
    pub(crate) fn forward_one(&self, z: &[f64], x: &[f64], acts: &mut [f64], out: &mut [f64]) {
        match *self {
            UnitSpec::MatrixSigmoid { d, c, sigma } => {
                for k in 0..c {
                    let row = &z[k * d..(k + 1) * d];
                    let t: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                    let s = sigma.value(t);
                    acts[k] = s;
                    out[k] = s;
                }
            }
            UnitSpec::AffineLayer { d, b, c, sigma } => {
                let (w, rest) = z.split_at(c * b);
                let (a, bias) = rest.split_at(d * b);
                for l in 0..b {
                    let mut h = bias[l];
                    for j in 0..d {
                        h += a[j * b + l] * x[j];
                    }
                    acts[l] = sigma.value(h);
                }
                for k in 0..c {
                    let row = &w[k * b..(k + 1) * b];
                    out[k] = row.iter().zip(acts.iter()).map(|(p, q)| p * q).sum();
                }
            }
        }
    }

    /// `grad += weight · J(x, z)ᵀ v` using activations from [`forward_one`].
    #[inline(always)]
    pub(crate) fn backward_one(&self, z: &[f64], x: &[f64], acts: &[f64], v: &[f64], weight: f64, grad: &mut [f64]) {
        match *self {
            UnitSpec::MatrixSigmoid { d, c, sigma } => {
                for k in 0..c {
                    let coef = weight * v[k] * sigma.derivative_from_value(acts[k]);
                    if coef == 0.0 {
                        continue;
                    }
                    let row = &mut grad[k * d..(k + 1) * d];
                    for (g, xj) in row.iter_mut().zip(x) {
                        *g += coef * xj;
                    }
                }
            }
            UnitSpec::AffineLayer { d, b, c, sigma } => {
                let w = &z[..c * b];
                let (gw, rest) = grad.split_at_mut(c * b);
                let (ga, gb) = rest.split_at_mut(d * b);
                for k in 0..c {
                    let vk = weight * v[k];
                    for l in 0..b {
                        gw[k * b + l] += vk * acts[l];
                    }
                }
                for l in 0..b {
                    let mut u = 0.0;
                    for k in 0..c {
                        u += w[k * b + l] * v[k];
                    }
                    let coef = weight * u * sigma.derivative_from_value(acts[l]);
                    gb[l] += coef;
                    for j in 0..d {
                        ga[j * b + l] += coef * x[j];
                    }
                }
            }
        }
    }
}

/// `σ*(x, z)` for a single parameter vector.
pub fn unit_eval(unit: &UnitSpec, z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len("parameter", z.len(), unit.param_dim())?;
    check_len("input", x.len(), unit.input_dim())?;
    let mut acts = vec![0.0; unit.act_dim()];
    let mut out = vec![0.0; unit.output_dim()];
    unit.forward_one(z, x, &mut acts, &mut out);
    Ok(out)
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} has length {got}, expected {expected}")))
    }
}

/// The parameter vector `θ ∈ Z^N` of a shallow model, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    unit: UnitSpec,
    n: usize,
    params: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(unit: UnitSpec, n: usize, params: Vec<f64>) -> Result<Self> {
        unit.validate()?;
        if n == 0 {
            return Err(Error::Config("ensemble must contain at least one particle".into()));
        }
        check_len("parameter matrix", params.len(), n * unit.param_dim())?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("ensemble contains non-finite parameters".into()));
        }
        Ok(Self { unit, n, params })
    }

    pub fn from_rows(unit: UnitSpec, rows: &[Vec<f64>]) -> Result<Self> {
        let params = rows.iter().flatten().copied().collect();
        Self::new(unit, rows.len(), params)
    }

    pub fn zeros(unit: UnitSpec, n: usize) -> Result<Self> {
        Self::new(unit, n, vec![0.0; n * unit.param_dim()])
    }

    pub fn unit(&self) -> &UnitSpec {
        &self.unit
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.unit.param_dim()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.params[i * d..(i + 1) * d]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.params.chunks_exact(self.dim())
    }

    /// Applies a map to every particle.
    pub fn map_particles(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let params = self.particles().flat_map(f).collect();
        Self::new(self.unit, self.n, params)
    }

    /// The ensemble `{M_g θ_i}` with `N·|G|` rows, grouped by particle.
    pub fn symmetrized(&self, bundle: &ActionBundle) -> Result<Self> {
        let mut params = Vec::with_capacity(self.params.len() * bundle.order());
        for p in self.particles() {
            for g in 0..bundle.order() {
                params.extend(bundle.act_param(g, p));
            }
        }
        Self::new(self.unit, self.n * bundle.order(), params)
    }

    /// The ensemble `{P_{E^G} θ_i}`.
    pub fn projected(&self, bundle: &ActionBundle) -> Result<Self> {
        self.map_particles(|p| bundle.project(p))
    }

    /// Mean model output, writing per-particle activations into `acts`.
    pub(crate) fn forward(&self, x: &[f64], acts: &mut [f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.unit {
            UnitSpec::MatrixSigmoid { d: 2, c: 2, sigma } => ms_forward::<2, 2>(sigma, &self.params, x, acts, out),
            UnitSpec::MatrixSigmoid { d, c, sigma } => {
                for (z, a) in self.params.chunks_exact(c * d).zip(acts.chunks_exact_mut(c)) {
                    for ((row, ak), ok) in z.chunks_exact(d).zip(a.iter_mut()).zip(out.iter_mut()) {
                        let s = sigma.value(row.iter().zip(x).map(|(p, q)| p * q).sum());
                        *ak = s;
                        *ok += s;
                    }
                }
            }
            UnitSpec::AffineLayer { c, .. } => {
                let b = self.unit.act_dim();
                let mut unit_out = vec![0.0; c];
                for (z, a) in self.particles().zip(acts.chunks_exact_mut(b)) {
                    self.unit.forward_one(z, x, a, &mut unit_out);
                    for (o, u) in out.iter_mut().zip(&unit_out) {
                        *o += u;
                    }
                }
            }
        }
        let inv = 1.0 / self.n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    /// `grad_i += weight · J_iᵀ v` for every particle.
    pub(crate) fn backward(&self, x: &[f64], acts: &[f64], v: &[f64], weight: f64, grad: &mut [f64]) {
        match self.unit {
            UnitSpec::MatrixSigmoid { d: 2, c: 2, sigma } => ms_backward::<2, 2>(sigma, x, acts, v, weight, grad),
            UnitSpec::MatrixSigmoid { d, c, sigma } => {
                let wv: Vec<f64> = v.iter().map(|vk| weight * vk).collect();
                for (a, g) in acts.chunks_exact(c).zip(grad.chunks_exact_mut(c * d)) {
                    for ((ak, wvk), grow) in a.iter().zip(&wv).zip(g.chunks_exact_mut(d)) {
                        let coef = wvk * sigma.derivative_from_value(*ak);
                        for (gj, xj) in grow.iter_mut().zip(x) {
                            *gj += coef * xj;
                        }
                    }
                }
            }
            UnitSpec::AffineLayer { .. } => {
                let a = self.unit.act_dim();
                let dim = self.dim();
                for ((z, ai), gi) in self.particles().zip(acts.chunks_exact(a)).zip(grad.chunks_exact_mut(dim)) {
                    self.unit.backward_one(z, x, ai, v, weight, gi);
                }
            }
        }
    }

    pub(crate) fn act_len(&self) -> usize {
        self.n * self.unit.act_dim()
    }
}

/// Matrix-sigmoid forward pass with dimensions known at compile time.
fn ms_forward<const D: usize, const C: usize>(sigma: Sigma, params: &[f64], x: &[f64], acts: &mut [f64], out: &mut [f64]) {
    let x: &[f64; D] = x.try_into().expect("input length checked by caller");
    let mut sum = [0.0; C];
    for (z, a) in params.chunks_exact(C * D).zip(acts.chunks_exact_mut(C)) {
        for k in 0..C {
            let mut t = 0.0;
            for j in 0..D {
                t += z[k * D + j] * x[j];
            }
            let s = sigma.value(t);
            a[k] = s;
            sum[k] += s;
        }
    }
    out.copy_from_slice(&sum);
}

fn ms_backward<const D: usize, const C: usize>(sigma: Sigma, x: &[f64], acts: &[f64], v: &[f64], weight: f64, grad: &mut [f64]) {
    let x: &[f64; D] = x.try_into().expect("input length checked by caller");
    let mut wv = [0.0; C];
    for k in 0..C {
        wv[k] = weight * v[k];
    }
    for (a, g) in acts.chunks_exact(C).zip(grad.chunks_exact_mut(C * D)) {
        for k in 0..C {
            let coef = wv[k] * sigma.derivative_from_value(a[k]);
            for j in 0..D {
                g[k * D + j] += coef * x[j];
            }
        }
    }
}

/// `Φ_θ(x)`: arithmetic mean of the unit outputs.
pub fn model_eval(ens: &ParticleEnsemble, x: &[f64]) -> Result<Vec<f64>> {
    check_len("input", x.len(), ens.unit().input_dim())?;
    let mut acts = vec![0.0; ens.act_len()];
    let mut out = vec![0.0; ens.unit().output_dim()];
    ens.forward(x, &mut acts, &mut out);
    Ok(out)
}

/// Feature-averaged model `(Q_G Φ)(x) = (1/|G|) Σ_g ρ̂_g⁻¹ Φ(ρ_g x)`.
pub fn fa_eval(ens: &ParticleEnsemble, bundle: &ActionBundle, x: &[f64]) -> Result<Vec<f64>> {
    check_len("input", x.len(), ens.unit().input_dim())?;
    if bundle.param_dim() != ens.dim() || bundle.rho_hat().dim() != ens.unit().output_dim() {
        return Err(Error::Dimension("bundle does not match the ensemble's unit".into()));
    }
    let c = ens.unit().output_dim();
    let mut acts = vec![0.0; ens.act_len()];
    let mut phi = vec![0.0; c];
    let mut out = vec![0.0; c];
    for g in 0..bundle.order() {
        let xg = bundle.act_input(g, x);
        ens.forward(&xg, &mut acts, &mut phi);
        add_transpose_apply(bundle.rho_hat_row_major(g), &phi, 1.0, &mut out);
    }
    let inv = 1.0 / bundle.order() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    Ok(out)
}

/// `out += w · Mᵀ v` for a row-major square matrix `M`.
#[inline]
pub(crate) fn add_transpose_apply(m: &[f64], v: &[f64], w: f64, out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        let vi = w * v[i];
        if vi == 0.0 {
            continue;
        }
        for (o, mij) in out.iter_mut().zip(&m[i * n..(i + 1) * n]) {
            *o += mij * vi;
        }
    }
}

/// `out = M v` for a row-major square matrix `M`.
#[inline]
pub(crate) fn apply_into(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossScale {
    Half,
    #[default]
    One,
}

impl LossScale {
    pub fn factor(self) -> f64 {
        match self {
            LossScale::Half => 0.5,
            LossScale::One => 1.0,
        }
    }
}

/// `scale · ‖ŷ − y‖²`.
pub fn loss(y_hat: &[f64], y: &[f64], scale: LossScale) -> f64 {
    scale.factor() * y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Gradient of [`loss`] with respect to `ŷ`: `2 · scale · (ŷ − y)`.
pub fn loss_grad(y_hat: &[f64], y: &[f64], scale: LossScale) -> Vec<f64> {
    let f = 2.0 * scale.factor();
    y_hat.iter().zip(y).map(|(a, b)| f * (a - b)).collect()
}

/// Per-particle gradient rows `J_iᵀ ∇ℓ(Φ(x), y) + τ ∇r(θ_i)` with the
/// quadratic penalization `r(z) = ‖z‖²`. Returned row-major, `N × D`.
pub fn per_sample_grad(ens: &ParticleEnsemble, x: &[f64], y: &[f64], tau: f64, scale: LossScale) -> Result<Vec<f64>> {
    check_len("input", x.len(), ens.unit().input_dim())?;
    check_len("label", y.len(), ens.unit().output_dim())?;
    let mut acts = vec![0.0; ens.act_len()];
    let mut out = vec![0.0; ens.unit().output_dim()];
    ens.forward(x, &mut acts, &mut out);
    let v = loss_grad(&out, y, scale);
    let mut grad: Vec<f64> = ens.params().iter().map(|p| 2.0 * tau * p).collect();
    ens.backward(x, &acts, &v, 1.0, &mut grad);
    Ok(grad)
}

/// Per-particle gradient of the feature-averaged loss `ℓ(Q_G Φ(x), y)`
/// (again without the `1/N` factor), plus the penalization gradient.
pub fn fa_per_sample_grad(
    ens: &ParticleEnsemble,
    bundle: &ActionBundle,
    x: &[f64],
    y: &[f64],
    tau: f64,
    scale: LossScale,
) -> Result<Vec<f64>> {
    let mut grad: Vec<f64> = ens.params().iter().map(|p| 2.0 * tau * p).collect();
    let mut ws = FaWorkspace::new(ens, bundle);
    ws.accumulate(ens, bundle, x, y, scale, 1.0, &mut grad);
    Ok(grad)
}

/// Scratch buffers for feature-averaged gradients.
pub(crate) struct FaWorkspace {
    xg: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    phi: Vec<f64>,
    fa: Vec<f64>,
    vg: Vec<f64>,
}

impl FaWorkspace {
    pub(crate) fn new(ens: &ParticleEnsemble, bundle: &ActionBundle) -> Self {
        let order = bundle.order();
        let c = ens.unit().output_dim();
        Self {
            xg: vec![vec![0.0; ens.unit().input_dim()]; order],
            acts: vec![vec![0.0; ens.act_len()]; order],
            phi: vec![0.0; c],
            fa: vec![0.0; c],
            vg: vec![0.0; c],
        }
    }

    /// `grad += weight · ∂/∂θ_i ℓ(Q_G Φ(x), y) · N`; returns the loss value.
    pub(crate) fn accumulate(
        &mut self,
        ens: &ParticleEnsemble,
        bundle: &ActionBundle,
        x: &[f64],
        y: &[f64],
        scale: LossScale,
        weight: f64,
        grad: &mut [f64],
    ) -> f64 {
        let order = bundle.order();
        let inv = 1.0 / order as f64;
        self.fa.iter_mut().for_each(|v| *v = 0.0);
        for g in 0..order {
            apply_into(bundle.rho_row_major(g), x, &mut self.xg[g]);
            ens.forward(&self.xg[g], &mut self.acts[g], &mut self.phi);
            add_transpose_apply(bundle.rho_hat_row_major(g), &self.phi, inv, &mut self.fa);
        }
        let v = loss_grad(&self.fa, y, scale);
        for g in 0..order {
            // d/dΦ(ρ_g x) of ℓ(avg_g ρ̂_gᵀ Φ(ρ_g x)) is ρ̂_g v / |G|
            apply_into(bundle.rho_hat_row_major(g), &v, &mut self.vg);
            ens.backward(&self.xg[g], &self.acts[g], &self.vg, weight * inv, grad);
        }
        loss(&self.fa, y, scale)
    }
}

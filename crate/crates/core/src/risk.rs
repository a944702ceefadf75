//! Monte-Carlo estimates of the population risk and of its DA, FA and EA
//! variants for models given by weighted parameter measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group_rep::ActionBundle;
use crate::measures::{project, symmetrize, EmpiricalMeasure};
use crate::shallow_model::{loss, LossScale, ParticleEnsemble, UnitSpec};
use crate::training::DataStream;

/// A fixed set of labelled inputs shared between estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    d: usize,
    c: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl McSample {
    pub fn new(d: usize, c: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if d == 0 || c == 0 || xs.len() % d != 0 || xs.is_empty() || ys.len() != xs.len() / d * c {
            return Err(Error::Dimension(format!("{} inputs of dim {d} with {} labels of dim {c}", xs.len(), ys.len())));
        }
        Ok(Self { d, c, xs, ys })
    }

    /// `n` i.i.d. samples `x ~ N(0, σ_π² I)` labelled by the teacher.
    pub fn draw(teacher: &ParticleEnsemble, sigma_pi: f64, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("Monte-Carlo sample must be nonempty".into()));
        }
        let mut stream = DataStream::new(teacher.clone(), sigma_pi, seed)?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        stream.next_batch(n, &mut xs, &mut ys);
        Self::new(teacher.unit().input_dim(), teacher.unit().output_dim(), xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.xs[k * self.d..(k + 1) * self.d]
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.ys[k * self.c..(k + 1) * self.c]
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std_err: (var / n).sqrt() }
    }
}

/// `Φ_μ(x) = Σ_j w_j σ*(x, p_j)`.
pub fn measure_eval(unit: &UnitSpec, mu: &EmpiricalMeasure, x: &[f64]) -> Result<Vec<f64>> {
    if mu.dim() != unit.param_dim() || x.len() != unit.input_dim() {
        return Err(Error::Dimension("measure or input does not match the unit".into()));
    }
    let mut acts = vec![0.0; unit.act_dim()];
    let mut tmp = vec![0.0; unit.output_dim()];
    let mut out = vec![0.0; unit.output_dim()];
    for (p, w) in mu.atoms() {
        unit.forward_one(p, x, &mut acts, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += w * t;
        }
    }
    Ok(out)
}

fn check(unit: &UnitSpec, sample: &McSample) -> Result<()> {
    if sample.d != unit.input_dim() || sample.c != unit.output_dim() {
        return Err(Error::Dimension("sample does not match the unit".into()));
    }
    Ok(())
}

/// Per-sample losses `ℓ(Φ_μ(x_k), y_k)`.
pub fn risk_terms(unit: &UnitSpec, mu: &EmpiricalMeasure, sample: &McSample, scale: LossScale) -> Result<Vec<f64>> {
    check(unit, sample)?;
    (0..sample.len())
        .map(|k| Ok(loss(&measure_eval(unit, mu, sample.x(k))?, sample.y(k), scale)))
        .collect()
}

/// `R(μ)`.
pub fn risk(unit: &UnitSpec, mu: &EmpiricalMeasure, sample: &McSample, scale: LossScale) -> Result<Estimate> {
    Ok(Estimate::from_values(&risk_terms(unit, mu, sample, scale)?))
}

/// `R^DA(μ)`: the loss averaged exactly over transformed samples `(ρ_g x, ρ̂_g y)`.
pub fn risk_da(
    unit: &UnitSpec,
    mu: &EmpiricalMeasure,
    bundle: &ActionBundle,
    sample: &McSample,
    scale: LossScale,
) -> Result<Estimate> {
    check(unit, sample)?;
    let order = bundle.order() as f64;
    let terms = (0..sample.len())
        .map(|k| {
            let mut acc = 0.0;
            for g in 0..bundle.order() {
                let y_hat = measure_eval(unit, mu, &bundle.act_input(g, sample.x(k)))?;
                acc += loss(&y_hat, &bundle.act_output(g, sample.y(k)), scale);
            }
            Ok(acc / order)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_values(&terms))
}

/// `(Q_G Φ_μ)(x) = (1/|G|) Σ_g ρ̂_g⁻¹ Φ_μ(ρ_g x)`.
pub fn measure_fa_eval(unit: &UnitSpec, mu: &EmpiricalMeasure, bundle: &ActionBundle, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; unit.output_dim()];
    let inv = 1.0 / bundle.order() as f64;
    for g in 0..bundle.order() {
        let phi = measure_eval(unit, mu, &bundle.act_input(g, x))?;
        let back = bundle.rho_hat().matrix(g).transpose() * nalgebra::DVector::from_vec(phi);
        for (o, v) in out.iter_mut().zip(back.iter()) {
            *o += inv * v;
        }
    }
    Ok(out)
}

/// `R^FA(μ) = E ℓ(Q_G Φ_μ(X), Y)`.
pub fn risk_fa(
    unit: &UnitSpec,
    mu: &EmpiricalMeasure,
    bundle: &ActionBundle,
    sample: &McSample,
    scale: LossScale,
) -> Result<Estimate> {
    check(unit, sample)?;
    let terms = (0..sample.len())
        .map(|k| Ok(loss(&measure_fa_eval(unit, mu, bundle, sample.x(k))?, sample.y(k), scale)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_values(&terms))
}

/// `R^EA(μ) = R(P_{E^G}#μ)`.
pub fn risk_ea(
    unit: &UnitSpec,
    mu: &EmpiricalMeasure,
    bundle: &ActionBundle,
    sample: &McSample,
    scale: LossScale,
) -> Result<Estimate> {
    risk(unit, &project(mu, bundle)?, sample, scale)
}

/// `R(μ^G)`, the right-hand side of the FA identity.
pub fn risk_of_symmetrized(
    unit: &UnitSpec,
    mu: &EmpiricalMeasure,
    bundle: &ActionBundle,
    sample: &McSample,
    scale: LossScale,
) -> Result<Estimate> {
    risk(unit, &symmetrize(mu, bundle.m_action())?, sample, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shallow_model::{model_eval, Sigma};

    #[test]
    fn measure_eval_matches_uniform_ensemble() {
        let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
        let ens = ParticleEnsemble::from_rows(unit, &[vec![0.1, 0.2, 0.3, 0.4], vec![-1.0, 0.5, 0.0, 2.0]]).unwrap();
        let mu = EmpiricalMeasure::from_ensemble(&ens);
        let x = [0.5, -1.5];
        let a = measure_eval(&unit, &mu, &x).unwrap();
        let b = model_eval(&ens, &x).unwrap();
        for k in 0..2 {
            assert!((a[k] - b[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn estimate_statistics() {
        let e = Estimate::from_values(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.std_err - 1.0).abs() < 1e-15);
        assert_eq!(Estimate::from_values(&[4.0]).std_err, 0.0);
    }

    #[test]
    fn sample_shape_errors() {
        assert!(McSample::new(2, 1, vec![0.0; 3], vec![0.0]).is_err());
        assert!(McSample::new(2, 1, vec![0.0; 4], vec![0.0; 2]).is_ok());
    }
}

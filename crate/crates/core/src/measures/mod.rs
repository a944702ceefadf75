//! Weighted point clouds on the parameter space and exact Wasserstein-2.

pub mod network_simplex;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group_rep::{ActionBundle, GroupRepresentation};
use crate::shallow_model::ParticleEnsemble;

/// Atoms closer than this are merged before solving transport problems.
pub const MERGE_TOL: f64 = 1e-12;

/// Tolerance on `|Σ w − 1|` accepted by constructors (weights are then renormalized).
pub const WEIGHT_TOL: f64 = 1e-9;

/// `Σ_j w_j δ_{p_j}` with `m` atoms in `R^D`, points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("measure has no atoms".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, points, weights })
    }

    /// Uniform weights `1/m`.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        let m = if dim == 0 { 0 } else { points.len() / dim };
        Self::new(dim, points, vec![1.0 / m.max(1) as f64; m])
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![1.0])
    }

    /// The empirical measure `(1/N) Σ δ_{θ_i}` of an ensemble.
    pub fn from_ensemble(ens: &ParticleEnsemble) -> Self {
        let w = 1.0 / ens.n() as f64;
        Self { dim: ens.dim(), points: ens.params().to_vec(), weights: vec![w; ens.n()] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Drops zero-weight atoms and merges atoms within `tol` of each other
    /// (neighbours in lexicographic order), summing their weights.
    pub fn merged(&self, tol: f64) -> Self {
        let mut order: Vec<usize> = (0..self.len()).filter(|&j| self.weights[j] > 0.0).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut points: Vec<f64> = Vec::with_capacity(self.points.len());
        let mut weights: Vec<f64> = Vec::with_capacity(self.len());
        for j in order {
            let p = self.point(j);
            if let Some(last_w) = weights.last_mut() {
                let last = &points[points.len() - self.dim..];
                if sq_dist(last, p) <= tol * tol {
                    *last_w += self.weights[j];
                    continue;
                }
            }
            points.extend_from_slice(p);
            weights.push(self.weights[j]);
        }
        Self { dim: self.dim, points, weights }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `T#μ` for a linear map `T`.
pub fn pushforward(mu: &EmpiricalMeasure, t: &DMatrix<f64>) -> Result<EmpiricalMeasure> {
    if t.ncols() != mu.dim() {
        return Err(Error::Dimension(format!("map has {} columns, measure dimension is {}", t.ncols(), mu.dim())));
    }
    let out_dim = t.nrows();
    let mut points = Vec::with_capacity(out_dim * mu.len());
    for p in mu.points.chunks_exact(mu.dim) {
        for r in 0..out_dim {
            points.push((0..mu.dim).map(|c| t[(r, c)] * p[c]).sum());
        }
    }
    Ok(EmpiricalMeasure { dim: out_dim, points, weights: mu.weights.clone() })
}

/// `μ^G = (1/|G|) Σ_g M_g#μ`: atoms `M_g p_j` with weight `w_j / |G|`,
/// grouped by source atom.
pub fn symmetrize(mu: &EmpiricalMeasure, m_action: &GroupRepresentation) -> Result<EmpiricalMeasure> {
    if m_action.dim() != mu.dim() {
        return Err(Error::Dimension(format!("action on R^{} applied to measure on R^{}", m_action.dim(), mu.dim())));
    }
    let order = m_action.order();
    let mut points = Vec::with_capacity(mu.points.len() * order);
    let mut weights = Vec::with_capacity(mu.len() * order);
    for (p, w) in mu.atoms() {
        for g in 0..order {
            points.extend(m_action.act(g, p));
            weights.push(w / order as f64);
        }
    }
    Ok(EmpiricalMeasure { dim: mu.dim(), points, weights })
}

/// `μ^{E^G} = P_{E^G}#μ`.
pub fn project(mu: &EmpiricalMeasure, bundle: &ActionBundle) -> Result<EmpiricalMeasure> {
    pushforward(mu, bundle.eg_projector())
}

/// `M_μ² = 2 Σ_j w_j ‖p_j‖²`.
pub fn second_moment(mu: &EmpiricalMeasure) -> f64 {
    2.0 * mu.atoms().map(|(p, w)| w * p.iter().map(|x| x * x).sum::<f64>()).sum::<f64>()
}

/// Squared-distance cost matrix, row-major `m × n`.
pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<f64> {
    let n = nu.len();
    let mut cost = vec![0.0; mu.len() * n];
    cost.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        let p = mu.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = sq_dist(p, nu.point(j));
        }
    });
    cost
}

/// Optimal transport plan between two measures for the squared Euclidean cost.
pub fn optimal_plan(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<network_simplex::Transport> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension(format!("measures live in R^{} and R^{}", mu.dim(), nu.dim())));
    }
    let (sa, sb) = (mu.weights.iter().sum::<f64>(), nu.weights.iter().sum::<f64>());
    if (sa - sb).abs() > WEIGHT_TOL {
        return Err(Error::InvalidMeasure(format!("total masses differ: {sa} vs {sb}")));
    }
    network_simplex::solve(&mu.weights, &nu.weights, &cost_matrix(mu, nu))
}

/// `W_2²(μ, ν)`, computed exactly after merging coincident atoms.
pub fn w2_squared(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension(format!("measures live in R^{} and R^{}", mu.dim(), nu.dim())));
    }
    let (a, b) = (mu.merged(MERGE_TOL), nu.merged(MERGE_TOL));
    Ok(optimal_plan(&a, &b)?.cost.max(0.0))
}

/// `W_2(μ, ν)`.
pub fn w2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    w2_squared(mu, nu).map(f64::sqrt)
}

/// Relative measure distance `W_2²(μ, ν) / (M_μ² + M_ν²)`, defined as 0 when
/// both measures are the point mass at the origin.
pub fn rmd2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let denom = second_moment(mu) + second_moment(nu);
    let w = w2_squared(mu, nu)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((w / denom).clamp(0.0, 1.0))
}

use nalgebra::DMatrix;

use super::{
    average_projector, build_affine_layer_action, build_conjugation_action, fixed_subspace_basis, mat_vec,
    max_abs_diff, row_major, GroupRepresentation, RANK_TOL,
};
use crate::error::{Error, Result};
use crate::shallow_model::UnitSpec;

/// Linked representations on inputs (`rho`), outputs (`rho_hat`), hidden
/// units (`eta`) and parameters (`m_action`), plus the invariant-parameter
/// subspace as an orthonormal basis and its projector.
#[derive(Debug, Clone)]
pub struct ActionBundle {
    rho: GroupRepresentation,
    rho_hat: GroupRepresentation,
    eta: Option<GroupRepresentation>,
    m_action: GroupRepresentation,
    eg_basis: DMatrix<f64>,
    eg_projector: DMatrix<f64>,
    // Row-major caches for the per-sample loops.
    rho_rm: Vec<Vec<f64>>,
    rho_hat_rm: Vec<Vec<f64>>,
    projector_rm: Vec<f64>,
}

impl ActionBundle {
    /// Builds the parameter action matching the unit kind (conjugation for
    /// matrix-sigmoid units, intertwining for affine layers; a missing `eta`
    /// defaults to the trivial representation) and its fixed subspace.
    pub fn new(
        unit: &UnitSpec,
        rho: GroupRepresentation,
        rho_hat: GroupRepresentation,
        eta: Option<GroupRepresentation>,
    ) -> Result<Self> {
        if rho.dim() != unit.input_dim() || rho_hat.dim() != unit.output_dim() {
            return Err(Error::Dimension(format!(
                "unit maps R^{} -> R^{} but representations act on R^{} and R^{}",
                unit.input_dim(),
                unit.output_dim(),
                rho.dim(),
                rho_hat.dim()
            )));
        }
        let m_action = match unit.hidden_dim() {
            None => build_conjugation_action(&rho_hat, &rho)?,
            Some(b) => {
                let eta_rep = match &eta {
                    Some(e) if e.dim() != b => {
                        return Err(Error::Dimension(format!("eta acts on R^{} but hidden dim is {b}", e.dim())))
                    }
                    Some(e) => e.clone(),
                    None => GroupRepresentation::trivial_like(&rho, b),
                };
                build_affine_layer_action(&rho_hat, &rho, &eta_rep)?
            }
        };
        Self::from_action(rho, rho_hat, eta, m_action)
    }

    /// Uses an explicitly supplied parameter action.
    pub fn from_action(
        rho: GroupRepresentation,
        rho_hat: GroupRepresentation,
        eta: Option<GroupRepresentation>,
        m_action: GroupRepresentation,
    ) -> Result<Self> {
        for (name, rep) in [("rho", &rho), ("rho_hat", &rho_hat), ("m_action", &m_action)] {
            let report = rep.validate();
            if !report.is_valid() {
                return Err(Error::Structure(format!("{name}: {report}")));
            }
            if !rep.same_group(&rho) {
                return Err(Error::Structure(format!("{name} does not share rho's Cayley table")));
            }
        }
        let eg_projector = average_projector(&m_action);
        let eg_basis = fixed_subspace_basis(&eg_projector, RANK_TOL)?;
        Ok(Self {
            rho_rm: rho.matrices().iter().map(row_major).collect(),
            rho_hat_rm: rho_hat.matrices().iter().map(row_major).collect(),
            projector_rm: row_major(&eg_projector),
            rho,
            rho_hat,
            eta,
            m_action,
            eg_basis,
            eg_projector,
        })
    }

    pub fn rho(&self) -> &GroupRepresentation {
        &self.rho
    }

    pub fn rho_hat(&self) -> &GroupRepresentation {
        &self.rho_hat
    }

    pub fn eta(&self) -> Option<&GroupRepresentation> {
        self.eta.as_ref()
    }

    pub fn m_action(&self) -> &GroupRepresentation {
        &self.m_action
    }

    pub fn eg_basis(&self) -> &DMatrix<f64> {
        &self.eg_basis
    }

    pub fn eg_projector(&self) -> &DMatrix<f64> {
        &self.eg_projector
    }

    pub fn order(&self) -> usize {
        self.rho.order()
    }

    pub fn param_dim(&self) -> usize {
        self.m_action.dim()
    }

    /// `dim(E^G)`.
    pub fn eg_dim(&self) -> usize {
        self.eg_basis.ncols()
    }

    pub(crate) fn rho_row_major(&self, g: usize) -> &[f64] {
        &self.rho_rm[g]
    }

    pub(crate) fn rho_hat_row_major(&self, g: usize) -> &[f64] {
        &self.rho_hat_rm[g]
    }

    pub(crate) fn projector_row_major(&self) -> &[f64] {
        &self.projector_rm
    }

    /// `P_{E^G} z`.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let dim = self.param_dim();
        let mut out = vec![0.0; dim];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.projector_rm[i * dim..(i + 1) * dim];
            *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn act_param(&self, g: usize, z: &[f64]) -> Vec<f64> {
        self.m_action.act(g, z)
    }

    pub fn act_input(&self, g: usize, x: &[f64]) -> Vec<f64> {
        self.rho.act(g, x)
    }

    pub fn act_output(&self, g: usize, y: &[f64]) -> Vec<f64> {
        self.rho_hat.act(g, y)
    }

    /// Reduced coordinates `Bᵀ z` in the E^G basis.
    pub fn to_reduced(&self, z: &[f64]) -> Vec<f64> {
        mat_vec(&self.eg_basis.transpose(), z)
    }

    /// Ambient point `B a` from reduced coordinates.
    pub fn from_reduced(&self, a: &[f64]) -> Vec<f64> {
        mat_vec(&self.eg_basis, a)
    }

    /// Largest violation of the bundle invariants: `P = BBᵀ`, symmetry,
    /// idempotency and `M_g P = P M_g = P`.
    pub fn invariant_residual(&self) -> f64 {
        let p = &self.eg_projector;
        let mut r = max_abs_diff(p, &(&self.eg_basis * self.eg_basis.transpose()));
        r = r.max(max_abs_diff(p, &p.transpose()));
        r = r.max(max_abs_diff(&(p * p), p));
        for m in self.m_action.matrices() {
            r = r.max(max_abs_diff(&(m * p), p));
            r = r.max(max_abs_diff(&(p * m), p));
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_rep::{GroupName, GroupSetting};
    use crate::shallow_model::{Sigma, UnitSpec};

    #[test]
    fn c2_bundle_invariants() {
        let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
        let bundle = GroupSetting::new(GroupName::C2Swap, 2).bundle(&unit).unwrap();
        assert_eq!(bundle.eg_dim(), 2);
        assert!(bundle.invariant_residual() < 1e-12);
        let z = [0.3, -1.0, 2.0, 0.5];
        let a = bundle.to_reduced(&z);
        let back = bundle.from_reduced(&a);
        let p = bundle.project(&z);
        for i in 0..4 {
            assert!((back[i] - p[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_dimension_mismatch() {
        let unit = UnitSpec::matrix_sigmoid(3, 2, Sigma::Logistic);
        let (rho, rho_hat, _) = GroupSetting::new(GroupName::C2Swap, 2)
            .representations(&UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic))
            .unwrap();
        assert!(matches!(ActionBundle::new(&unit, rho, rho_hat, None), Err(Error::Dimension(_))));
    }
}

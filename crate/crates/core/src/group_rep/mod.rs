//! Finite groups realized as orthogonal matrix representations.
//!
//! A [`GroupRepresentation`] stores one dense matrix per group element
//! (element `0` is the identity) together with the Cayley table of the
//! group law. The Haar measure of a finite group is the uniform
//! distribution over element ids, so every group integral in this crate is
//! a plain average over `0..order`.
//!
//! The parameter-space action and its fixed-point subspace live in
//! [`bundle`]; the named groups used by the experiments live in
//! [`builtins`].

pub mod builtins;
pub mod bundle;

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtins::{GroupName, GroupSetting};
pub use bundle::ActionBundle;

/// Default eigenvalue tolerance when extracting a basis of the fixed subspace.
pub const RANK_TOL: f64 = 1e-8;

const IDENTITY_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;
const COMPOSE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRepresentation {
    matrices: Vec<DMatrix<f64>>,
    cayley: Vec<Vec<usize>>,
    inverses: Vec<usize>,
}

impl GroupRepresentation {
    /// Assembles a representation from its matrices and Cayley table.
    ///
    /// Only structural properties are checked here (shapes, table range).
    /// Numerical invariants are reported by [`GroupRepresentation::validate`].
    pub fn from_parts(matrices: Vec<DMatrix<f64>>, cayley: Vec<Vec<usize>>) -> Result<Self> {
        let order = matrices.len();
        if order == 0 {
            return Err(Error::Structure("a group needs at least one element".into()));
        }
        let dim = matrices[0].nrows();
        for (g, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Structure(format!(
                    "matrix {g} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if cayley.len() != order || cayley.iter().any(|row| row.len() != order) {
            return Err(Error::Structure(format!("cayley table must be {order}x{order}")));
        }
        if cayley.iter().flatten().any(|&id| id >= order) {
            return Err(Error::Structure("cayley table references an unknown element".into()));
        }
        let mut inverses = vec![usize::MAX; order];
        for (g, row) in cayley.iter().enumerate() {
            if let Some(h) = row.iter().position(|&gh| gh == 0) {
                inverses[g] = h;
            }
        }
        if inverses.contains(&usize::MAX) {
            return Err(Error::Structure("cayley table lacks inverses".into()));
        }
        Ok(Self { matrices, cayley, inverses })
    }

    /// Builds a representation from matrices alone, deriving the Cayley
    /// table by matching products. Fails if the set is not closed under
    /// multiplication or the first matrix is not the identity.
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let order = matrices.len();
        if order == 0 {
            return Err(Error::Structure("a group needs at least one element".into()));
        }
        let dim = matrices[0].nrows();
        if matrices.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::Structure("matrices must be square of equal dimension".into()));
        }
        let mut cayley = vec![vec![0; order]; order];
        for g in 0..order {
            for h in 0..order {
                let prod = &matrices[g] * &matrices[h];
                let id = matrices
                    .iter()
                    .position(|m| max_abs_diff(m, &prod) < COMPOSE_TOL)
                    .ok_or_else(|| {
                        Error::Structure(format!("product of elements {g} and {h} is not in the set"))
                    })?;
                cayley[g][h] = id;
            }
        }
        Self::from_parts(matrices, cayley)
    }

    /// The trivial representation of a group of the given order: every
    /// element acts as the identity. The Cayley table must still describe
    /// the abstract group so that linked representations share element ids.
    pub fn trivial_like(other: &GroupRepresentation, dim: usize) -> Self {
        let matrices = vec![DMatrix::identity(dim, dim); other.order()];
        Self {
            matrices,
            cayley: other.cayley.clone(),
            inverses: other.inverses.clone(),
        }
    }

    pub fn trivial_group(dim: usize) -> Self {
        Self {
            matrices: vec![DMatrix::identity(dim, dim)],
            cayley: vec![vec![0]],
            inverses: vec![0],
        }
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrix(&self, g: usize) -> &DMatrix<f64> {
        &self.matrices[g]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn cayley(&self) -> &[Vec<usize>] {
        &self.cayley
    }

    pub fn compose(&self, g: usize, h: usize) -> usize {
        self.cayley[g][h]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverses[g]
    }

    /// Applies element `g` to a vector.
    pub fn act(&self, g: usize, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrices[g], v)
    }

    /// Whether two representations describe the same abstract group
    /// (identical order and Cayley table).
    pub fn same_group(&self, other: &GroupRepresentation) -> bool {
        self.cayley == other.cayley
    }

    /// Checks identity, orthogonality and composition invariants.
    pub fn validate(&self) -> ValidationReport {
        let dim = self.dim();
        let id = DMatrix::<f64>::identity(dim, dim);
        let mut violations = Vec::new();

        let r = max_abs_diff(&self.matrices[0], &id);
        if r > IDENTITY_TOL {
            violations.push(Violation { kind: ViolationKind::Identity, elements: vec![0], residual: r });
        }
        for (g, m) in self.matrices.iter().enumerate() {
            let r = max_abs_diff(&(m * m.transpose()), &id);
            if r > ORTHO_TOL {
                violations.push(Violation { kind: ViolationKind::Orthogonality, elements: vec![g], residual: r });
            }
        }
        for g in 0..self.order() {
            for h in 0..self.order() {
                let prod = &self.matrices[g] * &self.matrices[h];
                let r = max_abs_diff(&prod, &self.matrices[self.cayley[g][h]]);
                if r > COMPOSE_TOL {
                    violations.push(Violation {
                        kind: ViolationKind::Composition,
                        elements: vec![g, h],
                        residual: r,
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn to_document(&self) -> RepresentationDocument {
        RepresentationDocument {
            order: self.order(),
            dim: self.dim(),
            matrices: self
                .matrices
                .iter()
                .map(|m| MatrixEntry::Nested((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()))
                .collect(),
            cayley: self.cayley.clone(),
        }
    }

    pub fn from_document(doc: RepresentationDocument) -> Result<Self> {
        if doc.matrices.len() != doc.order {
            return Err(Error::Structure(format!(
                "document declares order {} but lists {} matrices",
                doc.order,
                doc.matrices.len()
            )));
        }
        let matrices = doc
            .matrices
            .into_iter()
            .enumerate()
            .map(|(g, entry)| entry.into_matrix(doc.dim).map_err(|e| Error::Structure(format!("matrix {g}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(matrices, doc.cayley)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: RepresentationDocument = serde_json::from_str(&text)?;
        Self::from_document(doc)
    }
}

/// JSON form of a representation: `{order, dim, matrices, cayley}`. Each
/// matrix may be given either as nested rows or as a flat row-major list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentationDocument {
    pub order: usize,
    pub dim: usize,
    pub matrices: Vec<MatrixEntry>,
    pub cayley: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntry {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixEntry {
    fn into_matrix(self, dim: usize) -> std::result::Result<DMatrix<f64>, String> {
        match self {
            MatrixEntry::Flat(v) => {
                if v.len() != dim * dim {
                    return Err(format!("expected {} entries, got {}", dim * dim, v.len()));
                }
                Ok(DMatrix::from_row_slice(dim, dim, &v))
            }
            MatrixEntry::Nested(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(format!("expected {dim}x{dim} nested rows"));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Ok(DMatrix::from_row_slice(dim, dim, &flat))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Identity,
    Orthogonality,
    Composition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub elements: Vec<usize>,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_residual(&self, kind: ViolationKind) -> Option<f64> {
        self.violations
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.residual)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for kind in [ViolationKind::Identity, ViolationKind::Orthogonality, ViolationKind::Composition] {
            let count = self.violations.iter().filter(|v| v.kind == kind).count();
            if let Some(r) = self.max_residual(kind) {
                writeln!(f, "{kind:?}: {count} violation(s), max residual {r:e}")?;
            }
        }
        Ok(())
    }
}

/// Structural validation wrapper: errors only on malformed input, otherwise
/// returns the (possibly non-empty) report.
pub fn validate_representation(rep: &GroupRepresentation) -> Result<ValidationReport> {
    let dim = rep.dim();
    if rep.matrices().iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
        return Err(Error::Structure("matrices must be square of equal dimension".into()));
    }
    Ok(rep.validate())
}

/// `z ↦ ρ̂_g z ρ_gᵀ` on row-major flattened `c×d` matrices, i.e. `ρ̂_g ⊗ ρ_g`.
pub fn build_conjugation_action(
    rho_hat: &GroupRepresentation,
    rho: &GroupRepresentation,
) -> Result<GroupRepresentation> {
    ensure_same_group(rho_hat, rho, "rho_hat", "rho")?;
    let matrices = (0..rho.order())
        .map(|g| rho_hat.matrix(g).kronecker(rho.matrix(g)))
        .collect();
    GroupRepresentation::from_parts(matrices, rho.cayley().to_vec())
}

/// Intertwining action on single-hidden-layer parameters `z = (W, A, B)`:
/// `(ρ̂_g W η_gᵀ, ρ_g A η_gᵀ, η_g B)`, each block flattened row-major and
/// concatenated in that order.
pub fn build_affine_layer_action(
    rho_hat: &GroupRepresentation,
    rho: &GroupRepresentation,
    eta: &GroupRepresentation,
) -> Result<GroupRepresentation> {
    ensure_same_group(rho_hat, rho, "rho_hat", "rho")?;
    ensure_same_group(eta, rho, "eta", "rho")?;
    let (c, d, b) = (rho_hat.dim(), rho.dim(), eta.dim());
    let total = c * b + d * b + b;
    let matrices = (0..rho.order())
        .map(|g| {
            let mut m = DMatrix::zeros(total, total);
            let w_block = rho_hat.matrix(g).kronecker(eta.matrix(g));
            let a_block = rho.matrix(g).kronecker(eta.matrix(g));
            m.view_mut((0, 0), (c * b, c * b)).copy_from(&w_block);
            m.view_mut((c * b, c * b), (d * b, d * b)).copy_from(&a_block);
            m.view_mut((c * b + d * b, c * b + d * b), (b, b)).copy_from(eta.matrix(g));
            m
        })
        .collect();
    GroupRepresentation::from_parts(matrices, rho.cayley().to_vec())
}

fn ensure_same_group(a: &GroupRepresentation, b: &GroupRepresentation, an: &str, bn: &str) -> Result<()> {
    if a.order() != b.order() {
        return Err(Error::Structure(format!(
            "{an} has order {} but {bn} has order {}",
            a.order(),
            b.order()
        )));
    }
    if !a.same_group(b) {
        return Err(Error::Structure(format!("{an} and {bn} have different Cayley tables")));
    }
    Ok(())
}

/// Haar average `(1/|G|) Σ_g M_g`, the orthogonal projector onto the fixed subspace.
pub fn average_projector(m_action: &GroupRepresentation) -> DMatrix<f64> {
    let dim = m_action.dim();
    let mut p = DMatrix::zeros(dim, dim);
    for m in m_action.matrices() {
        p += m;
    }
    p / m_action.order() as f64
}

/// Column-orthonormal basis of the range of an orthogonal projector.
///
/// The rank is the number of eigenvalues above `1 - rank_tol`. Within that
/// eigenspace the basis is put in a canonical form: Gram–Schmidt over the
/// projected standard basis vectors `P e_1, P e_2, …` in index order. For the
/// coordinate-swap conjugation action this yields exactly `I/√2, swap/√2`.
pub fn fixed_subspace_basis(p: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let dim = p.nrows();
    if p.ncols() != dim {
        return Err(Error::InvalidProjector(format!("projector is {}x{}", p.nrows(), p.ncols())));
    }
    let sym_res = max_abs_diff(p, &p.transpose());
    let idem_res = max_abs_diff(&(p * p), p);
    let scale = p.amax().max(1.0);
    if sym_res > 1e-8 * scale || idem_res > 1e-8 * scale {
        return Err(Error::InvalidProjector(format!(
            "symmetry residual {sym_res:e}, idempotency residual {idem_res:e}"
        )));
    }
    if dim == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 1.0 - rank_tol).collect();
    let k = keep.len();
    if k == 0 {
        return Ok(DMatrix::zeros(dim, 0));
    }
    let mut v = DMatrix::zeros(dim, k);
    for (col, &i) in keep.iter().enumerate() {
        v.set_column(col, &eig.eigenvectors.column(i));
    }
    let q = &v * v.transpose();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for i in 0..dim {
        if basis.len() == k {
            break;
        }
        let mut w: DVector<f64> = q.column(i).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&w);
                w.axpy(-proj, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 1e-6 {
            basis.push(w / norm);
        }
    }
    if basis.len() < k {
        return Ok(v);
    }
    Ok(DMatrix::from_columns(&basis))
}

/// Largest entrywise absolute difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = m.shape();
    debug_assert_eq!(cols, v.len());
    let mut out = vec![0.0; rows];
    for j in 0..cols {
        let vj = v[j];
        if vj == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

/// Row-major copy of a matrix, used by the hot training loops.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Permutation matrix sending basis vector `e_i` to `e_{perm[i]}`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2_swap() -> GroupRepresentation {
        GroupRepresentation::from_matrices(vec![
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn swap_group_is_valid() {
        let rep = c2_swap();
        assert!(validate_representation(&rep).unwrap().is_valid());
        assert_eq!(rep.cayley(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(rep.inverse(1), 1);
    }

    #[test]
    fn scaled_element_fails_orthogonality() {
        let rep = GroupRepresentation::from_parts(
            vec![DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])],
            vec![vec![0, 1], vec![1, 0]],
        )
        .unwrap();
        let report = validate_representation(&rep).unwrap();
        assert!(!report.is_valid());
        let r = report.max_residual(ViolationKind::Orthogonality).unwrap();
        assert!((r - 3.0).abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn mismatched_shapes_are_structural_errors() {
        let err = GroupRepresentation::from_parts(
            vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)],
            vec![vec![0, 1], vec![1, 0]],
        );
        assert!(matches!(err, Err(Error::Structure(_))));
        let err = GroupRepresentation::from_parts(vec![DMatrix::identity(2, 2)], vec![vec![0, 0]]);
        assert!(matches!(err, Err(Error::Structure(_))));
    }

    #[test]
    fn conjugation_of_swap_fixes_two_dimensions() {
        let rep = c2_swap();
        let m = build_conjugation_action(&rep, &rep).unwrap();
        assert_eq!(m.dim(), 4);
        assert!(m.validate().is_valid());
        let p = average_projector(&m);
        let basis = fixed_subspace_basis(&p, RANK_TOL).unwrap();
        assert_eq!(basis.ncols(), 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[s, 0.0, 0.0, s], [0.0, s, s, 0.0]];
        for (col, e) in expected.iter().enumerate() {
            for i in 0..4 {
                assert!((basis[(i, col)] - e[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_action_has_zero_projector() {
        let rep = GroupRepresentation::from_matrices(vec![
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, -1.0),
        ])
        .unwrap();
        let p = average_projector(&rep);
        assert_eq!(p[(0, 0)], 0.0);
        assert_eq!(fixed_subspace_basis(&p, RANK_TOL).unwrap().ncols(), 0);
    }

    #[test]
    fn non_idempotent_matrix_is_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, 0.2]);
        assert!(matches!(fixed_subspace_basis(&p, RANK_TOL), Err(Error::InvalidProjector(_))));
    }

    #[test]
    fn document_accepts_flat_and_nested_matrices() {
        let json = r#"{"order":2,"dim":2,"matrices":[[1,0,0,1],[[0,1],[1,0]]],"cayley":[[0,1],[1,0]]}"#;
        let doc: RepresentationDocument = serde_json::from_str(json).unwrap();
        let rep = GroupRepresentation::from_document(doc).unwrap();
        assert_eq!(rep, c2_swap());
        let round = GroupRepresentation::from_document(rep.to_document()).unwrap();
        assert_eq!(round, rep);
    }
}

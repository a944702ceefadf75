//! Named groups selectable by configuration string.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{permutation_matrix, ActionBundle, GroupRepresentation};
use crate::error::{Error, Result};
use crate::shallow_model::UnitSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupName {
    /// C2 acting on every space by reversing coordinates (the swap on R²).
    #[serde(rename = "C2-swap")]
    C2Swap,
    /// C4 acting on R² by quarter-turn rotations, trivially on outputs and hidden units.
    #[serde(rename = "C4-rot")]
    C4Rot,
    /// S_n permuting the n rows of set-structured inputs, outputs and hidden units.
    #[serde(rename = "Sn-deepsets")]
    SnDeepsets,
    /// C_n cyclically shifting the n rows of array-structured spaces.
    #[serde(rename = "Cn-circulant")]
    CnCirculant,
    #[serde(rename = "trivial")]
    Trivial,
}

impl GroupName {
    pub const ALL: [GroupName; 5] = [
        GroupName::C2Swap,
        GroupName::C4Rot,
        GroupName::SnDeepsets,
        GroupName::CnCirculant,
        GroupName::Trivial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupName::C2Swap => "C2-swap",
            GroupName::C4Rot => "C4-rot",
            GroupName::SnDeepsets => "Sn-deepsets",
            GroupName::CnCirculant => "Cn-circulant",
            GroupName::Trivial => "trivial",
        }
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GroupName::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown group '{s}', expected one of {}",
                    GroupName::ALL.map(|g| g.as_str()).join(", ")
                ))
            })
    }
}

/// A named group plus its size parameter (`n` for S_n / C_n, ignored otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSetting {
    pub name: GroupName,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    2
}

impl Default for GroupSetting {
    fn default() -> Self {
        Self { name: GroupName::C2Swap, n: 2 }
    }
}

impl GroupSetting {
    pub fn new(name: GroupName, n: usize) -> Self {
        Self { name, n }
    }

    /// Representations on input, output and hidden spaces for the given unit.
    /// `eta` is `None` for matrix-sigmoid units, which have no hidden layer.
    pub fn representations(
        &self,
        unit: &UnitSpec,
    ) -> Result<(GroupRepresentation, GroupRepresentation, Option<GroupRepresentation>)> {
        let d = unit.input_dim();
        let c = unit.output_dim();
        let b = unit.hidden_dim();
        match self.name {
            GroupName::Trivial => {
                let rho = GroupRepresentation::trivial_group(d);
                let rho_hat = GroupRepresentation::trivial_group(c);
                let eta = b.map(GroupRepresentation::trivial_group);
                Ok((rho, rho_hat, eta))
            }
            GroupName::C2Swap => {
                let perms = vec![identity_perm(2), vec![1, 0]];
                let rev = |dim: usize| -> Result<GroupRepresentation> {
                    let reversed: Vec<usize> = (0..dim).rev().collect();
                    GroupRepresentation::from_parts(
                        vec![DMatrix::identity(dim, dim), permutation_matrix(&reversed)],
                        cayley_of(&perms),
                    )
                };
                Ok((rev(d)?, rev(c)?, b.map(rev).transpose()?))
            }
            GroupName::C4Rot => {
                if d != 2 {
                    return Err(Error::Config(format!("C4-rot acts on R², got input dim {d}")));
                }
                let rots = vec![
                    DMatrix::identity(2, 2),
                    DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
                    DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
                    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
                ];
                let rho = GroupRepresentation::from_matrices(rots)?;
                let rho_hat = GroupRepresentation::trivial_like(&rho, c);
                let eta = b.map(|b| GroupRepresentation::trivial_like(&rho, b));
                Ok((rho, rho_hat, eta))
            }
            GroupName::SnDeepsets | GroupName::CnCirculant => {
                let n = self.n;
                if n == 0 {
                    return Err(Error::Config("group size n must be positive".into()));
                }
                let perms = if self.name == GroupName::SnDeepsets {
                    all_permutations(n)
                } else {
                    cyclic_shifts(n)
                };
                let block = |dim: usize, what: &str| -> Result<GroupRepresentation> {
                    if dim % n != 0 {
                        return Err(Error::Config(format!("{what} dimension {dim} is not a multiple of n = {n}")));
                    }
                    let k = dim / n;
                    let mats = perms
                        .iter()
                        .map(|p| permutation_matrix(p).kronecker(&DMatrix::<f64>::identity(k, k)))
                        .collect();
                    GroupRepresentation::from_parts(mats, cayley_of(&perms))
                };
                let eta = match b {
                    Some(b) => Some(block(b, "hidden")?),
                    None => None,
                };
                Ok((block(d, "input")?, block(c, "output")?, eta))
            }
        }
    }

    pub fn bundle(&self, unit: &UnitSpec) -> Result<ActionBundle> {
        let (rho, rho_hat, eta) = self.representations(unit)?;
        ActionBundle::new(unit, rho, rho_hat, eta)
    }
}

fn identity_perm(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// All permutations of `0..n` in lexicographic order (identity first).
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = identity_perm(n);
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

/// Cyclic shifts `i ↦ i + s mod n`, `s = 0..n`.
pub fn cyclic_shifts(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|s| (0..n).map(|i| (i + s) % n).collect()).collect()
}

/// Cayley table of a permutation group under `(g·h)(i) = g(h(i))`.
pub fn cayley_of(perms: &[Vec<usize>]) -> Vec<Vec<usize>> {
    perms
        .iter()
        .map(|g| {
            perms
                .iter()
                .map(|h| {
                    let gh: Vec<usize> = h.iter().map(|&i| g[i]).collect();
                    perms.iter().position(|p| *p == gh).expect("permutation set is closed")
                })
                .collect()
        })
        .collect()
}

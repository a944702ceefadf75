//! Symmetry-aware training of wide shallow models.
//!
//! The crate compares three ways of exploiting a finite symmetry group `G`
//! when training shallow networks by noisy SGD: data augmentation (DA),
//! feature averaging (FA) and equivariant architectures (EA). It provides
//! the group/representation layer, the models and their gradients, exact
//! optimal transport between particle measures, the training loop, a
//! teacher-student experiment driver, and a heuristic that discovers the
//! invariant parameter subspace from data.

pub mod cli;
pub mod ea_discovery;
pub mod error;
pub mod group_rep;
pub mod io;
pub mod measures;
pub mod risk;
pub mod selfcheck;
pub mod shallow_model;
pub mod teacher_student;
pub mod training;

pub use error::{Error, Result};

//! Invariant parameter subspaces of the built-in group actions.
//!
//! Run with `cargo run --example invariant_subspace`.

use symlab::group_rep::{GroupName, GroupSetting};
use symlab::shallow_model::{Sigma, UnitSpec};

fn main() -> symlab::Result<()> {
    let ms = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let c2 = GroupSetting::new(GroupName::C2Swap, 2).bundle(&ms)?;
    println!("C2 swap on 2x2 matrix units: D = {}, dim(E^G) = {}", c2.param_dim(), c2.eg_dim());
    println!("basis (columns):\n{:.4}", c2.eg_basis());

    // Affine layers with n rows per space; compare with the closed forms.
    for n in [2, 3, 4] {
        let unit = UnitSpec::affine_layer(n, n, n, Sigma::Tanh);
        let cn = GroupSetting::new(GroupName::CnCirculant, n).bundle(&unit)?;
        let sn = GroupSetting::new(GroupName::SnDeepsets, n).bundle(&unit)?;
        println!(
            "n = {n}: D = {:3}  circulant {:2} (expect {:2})  deepsets {:2} (expect {})",
            unit.param_dim(),
            cn.eg_dim(),
            2 * n + 1,
            sn.eg_dim(),
            5
        );
    }

    let z = [0.3, -1.0, 2.0, 0.5];
    println!("P_E^G {:?} = {:?}", z, c2.project(&z));
    Ok(())
}

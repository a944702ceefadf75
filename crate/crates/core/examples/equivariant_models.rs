//! Shallow models, their symmetrization, and the equivariance of WI ensembles.

use symlab::group_rep::GroupSetting;
use symlab::shallow_model::{fa_eval, model_eval, ParticleEnsemble, Sigma, UnitSpec};

fn main() -> symlab::Result<()> {
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit)?;
    let ens = ParticleEnsemble::from_rows(unit, &[vec![1.0, -0.5, 0.2, 0.0], vec![0.0, 0.7, -1.2, 0.4]])?;
    let sym = ens.symmetrized(&bundle)?;

    let x = [0.8, -1.5];
    let gx = bundle.act_input(1, &x);
    println!("model(x)        = {:?}", model_eval(&ens, &x)?);
    println!("swap(model(x))  = {:?}", bundle.act_output(1, &model_eval(&ens, &x)?));
    println!("model(swap x)   = {:?}  (not equivariant)", model_eval(&ens, &gx)?);
    println!("FA model(x)     = {:?}", fa_eval(&ens, &bundle, &x)?);
    println!("symmetrized(x)  = {:?}  (same as FA)", model_eval(&sym, &x)?);
    println!("symmetrized(gx) = {:?}", model_eval(&sym, &gx)?);
    Ok(())
}

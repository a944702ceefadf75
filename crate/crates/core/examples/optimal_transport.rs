//! Exact W2 and the relative measure distance between particle clouds.

use symlab::group_rep::GroupSetting;
use symlab::measures::{optimal_plan, project, rmd2, symmetrize, w2, EmpiricalMeasure};
use symlab::shallow_model::{Sigma, UnitSpec};

fn main() -> symlab::Result<()> {
    let mu = EmpiricalMeasure::uniform(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0])?;
    let nu = EmpiricalMeasure::new(2, vec![0.0, 0.1, 1.0, 1.0], vec![0.5, 0.5])?;
    let plan = optimal_plan(&mu, &nu)?;
    println!("W2 = {:.6}, plan:", w2(&mu, &nu)?);
    for (i, j, f) in &plan.flows {
        println!("  {i} -> {j}: {f:.4}");
    }

    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit)?;
    let cloud = EmpiricalMeasure::uniform(4, vec![0.5, 0.1, -0.2, 0.4, 0.0, 1.0, 1.0, 0.0])?;
    println!("RMD^2(mu, mu^G)   = {:.4e}", rmd2(&cloud, &symmetrize(&cloud, bundle.m_action())?)?);
    println!("RMD^2(mu, P#mu)   = {:.4e}", rmd2(&cloud, &project(&cloud, &bundle)?)?);
    Ok(())
}

//! Monte-Carlo risks of the augmented, averaged and projected objectives.

use symlab::group_rep::GroupSetting;
use symlab::measures::{symmetrize, EmpiricalMeasure};
use symlab::risk::{risk, risk_da, risk_ea, risk_fa, risk_of_symmetrized, McSample};
use symlab::shallow_model::{LossScale, Sigma, UnitSpec};
use symlab::teacher_student::{make_teacher, TeacherKind, TeacherSpec};

fn main() -> symlab::Result<()> {
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit)?;
    let teacher = make_teacher(&TeacherSpec::new(TeacherKind::Wi), &unit, &bundle)?;
    let sample = McSample::draw(&teacher, 4.0, 1000, 11)?;
    let s = LossScale::One;

    let mu = EmpiricalMeasure::uniform(4, vec![0.4, -0.3, 0.1, 0.0, -0.2, 0.5, 0.5, 0.3])?;
    let wi = symmetrize(&mu, bundle.m_action())?;
    println!("R(mu)      = {:.6}", risk(&unit, &mu, &sample, s)?.mean);
    println!("R_FA(mu)   = {:.6}  R(mu^G) = {:.6}", risk_fa(&unit, &mu, &bundle, &sample, s)?.mean, risk_of_symmetrized(&unit, &mu, &bundle, &sample, s)?.mean);
    println!("R_EA(mu)   = {:.6}", risk_ea(&unit, &mu, &bundle, &sample, s)?.mean);
    println!("R_DA(mu)   = {:.6}", risk_da(&unit, &mu, &bundle, &sample, s)?.mean);
    println!("R_DA(mu^G) = {:.6}  R(mu^G) = {:.6}", risk_da(&unit, &wi, &bundle, &sample, s)?.mean, risk(&unit, &wi, &sample, s)?.mean);
    Ok(())
}

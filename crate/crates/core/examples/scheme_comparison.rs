//! Vanilla, DA, FA and EA training from a shared initialization and data stream.

use symlab::group_rep::GroupSetting;
use symlab::measures::{project, rmd2, EmpiricalMeasure};
use symlab::shallow_model::{Sigma, UnitSpec};
use symlab::teacher_student::{make_teacher, TeacherKind, TeacherSpec};
use symlab::training::{init_ensemble, train, DataStream, InitMode, Scheme, TrainConfig};

fn main() -> symlab::Result<()> {
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit)?;
    let teacher = make_teacher(&TeacherSpec::new(TeacherKind::Wi), &unit, &bundle)?;
    let n = 100;

    let mut finals = Vec::new();
    for scheme in Scheme::ALL {
        let cfg = TrainConfig { scheme, n_particles: n, horizon_t: 5.0, ..Default::default() };
        let init = init_ensemble(&unit, n, InitMode::Wi, Some(&bundle), cfg.seeds.init)?;
        let mut data = DataStream::new(teacher.clone(), 4.0, cfg.seeds.data)?;
        let record = train(init, &mut data, &cfg, Some(&bundle))?;
        let mu = EmpiricalMeasure::from_ensemble(record.final_ensemble());
        println!(
            "{:8} final batch loss {:.3e}  RMD^2 to E^G {:.3e}",
            scheme.as_str(),
            record.mean_batch_loss.last().copied().unwrap_or(f64::NAN),
            rmd2(&mu, &project(&mu, &bundle)?)?
        );
        finals.push((scheme, mu));
    }
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            let (a, ma) = &finals[i];
            let (b, mb) = &finals[j];
            println!("RMD^2({}, {}) = {:.3e}", a.as_str(), b.as_str(), rmd2(ma, mb)?);
        }
    }
    Ok(())
}

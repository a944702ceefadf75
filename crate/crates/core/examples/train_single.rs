//! One noisy-SGD run of a student against a symmetric teacher.
//!
//! `cargo run --release --example train_single -- 500` sets N.

use symlab::group_rep::GroupSetting;
use symlab::measures::{project, rmd2, EmpiricalMeasure};
use symlab::shallow_model::{Sigma, UnitSpec};
use symlab::teacher_student::{make_teacher, TeacherKind, TeacherSpec};
use symlab::training::{init_ensemble, train, DataStream, InitMode, NoiseMode, TrainConfig};

fn main() -> symlab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit)?;
    let teacher = make_teacher(&TeacherSpec::new(TeacherKind::Wi), &unit, &bundle)?;

    let cfg = TrainConfig { n_particles: n, horizon_t: 5.0, noise_mode: NoiseMode::Projected, ..Default::default() };
    let init = init_ensemble(&unit, n, InitMode::Si, Some(&bundle), cfg.seeds.init)?;
    let mut data = DataStream::new(teacher, 4.0, cfg.seeds.data)?;
    let record = train(init, &mut data, &cfg, Some(&bundle))?;

    println!("N = {n}, step = {}, epochs = {}", record.step_size, cfg.epochs());
    for (snap, loss) in record.snapshots.iter().skip(1).zip(&record.mean_batch_loss) {
        let mu = EmpiricalMeasure::from_ensemble(&snap.ensemble);
        let off = rmd2(&mu, &project(&mu, &bundle)?)?;
        println!("epoch {:6}  batch loss {loss:.4e}  RMD^2 to E^G {off:.3e}", snap.epoch);
    }
    Ok(())
}

//! A small teacher-student sweep written to `target/grid_example/metrics.csv`.

use std::path::Path;

use symlab::teacher_student::{run_grid, summarize, write_metrics_csv, ExperimentGrid, TeacherKind, TeacherSpec};
use symlab::training::{InitMode, Scheme, TrainConfig};

fn main() -> symlab::Result<()> {
    let grid = ExperimentGrid {
        n_values: vec![10, 50],
        schemes: vec![Scheme::Vanilla, Scheme::Fa],
        teacher: TeacherSpec::new(TeacherKind::Wi),
        init_mode: InitMode::Si,
        repetitions: 3,
        train: TrainConfig { horizon_t: 2.0, ..Default::default() },
        ..Default::default()
    };
    let out = run_grid(&grid)?;
    let path = Path::new("target/grid_example/metrics.csv");
    write_metrics_csv(path, &out.rows)?;
    for s in summarize(&out.rows).iter().filter(|s| s.metric_name == "rmd2_to_EG") {
        println!("{:8} N = {:3}  median RMD^2 to E^G {:.3e}", s.scheme, s.n, s.median);
    }
    println!("{} rows in {}", out.rows.len(), path.display());
    Ok(())
}

//! Built-in property suite behind `symlab validate`.
//!
//! Every check is cheap (well under a second each) and uses fixed seeds, so
//! the table is reproducible. User-supplied representation files add one
//! row each; snapshot files are loaded and must parse, otherwise the error
//! propagates.

use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::group_rep::builtins::all_permutations;
use crate::group_rep::{validate_representation, ActionBundle, GroupName, GroupRepresentation, GroupSetting};
use crate::io::read_ensemble_csv;
use crate::measures::{symmetrize, w2_squared, EmpiricalMeasure};
use crate::risk::{risk, risk_da, risk_ea, risk_fa, risk_of_symmetrized, McSample};
use crate::shallow_model::{
    fa_eval, loss, model_eval, per_sample_grad, unit_eval, LossScale, ParticleEnsemble, Sigma, UnitSpec,
};

const SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn tol(name: &str, value: f64, tol: f64) -> Self {
        Self::new(name, value < tol, format!("max error {value:.2e} (tol {tol:.0e})"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Extra representation files in the JSON document format.
    pub rep_files: Vec<PathBuf>,
    /// Ensemble snapshots to load, with the unit they were written for.
    pub snapshot_files: Vec<PathBuf>,
    pub snapshot_unit: Option<UnitSpec>,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag}  {:width$}  {}", c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Settings exercised by the suite: each named group with a unit it acts on.
pub fn reference_settings() -> Vec<(String, GroupSetting, UnitSpec)> {
    let ms = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    vec![
        ("C2-swap/matrix-sigmoid".into(), GroupSetting::new(GroupName::C2Swap, 2), ms),
        ("C4-rot/matrix-sigmoid".into(), GroupSetting::new(GroupName::C4Rot, 4), UnitSpec::matrix_sigmoid(2, 1, Sigma::Tanh)),
        ("S3-deepsets/affine".into(), GroupSetting::new(GroupName::SnDeepsets, 3), UnitSpec::affine_layer(3, 6, 3, Sigma::Tanh)),
        ("C4-circulant/affine".into(), GroupSetting::new(GroupName::CnCirculant, 4), UnitSpec::affine_layer(4, 4, 8, Sigma::Logistic)),
        ("trivial/affine".into(), GroupSetting::new(GroupName::Trivial, 1), UnitSpec::affine_layer(2, 3, 2, Sigma::Logistic)),
    ]
}

fn representation_checks(bundles: &[(String, ActionBundle)], out: &mut Vec<Check>) -> Result<()> {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (name, b) in bundles {
        let mut reps = vec![b.rho(), b.rho_hat(), b.m_action()];
        reps.extend(b.eta());
        for rep in reps {
            let report = validate_representation(rep)?;
            if !report.is_valid() {
                bad.push(name.clone());
            }
        }
        worst = worst.max(b.invariant_residual());
    }
    out.push(Check::new(
        "built-in representations",
        bad.is_empty(),
        if bad.is_empty() { format!("{} settings valid", bundles.len()) } else { format!("invalid: {}", bad.join(", ")) },
    ));
    out.push(Check::tol("projector identities", worst, 1e-10));
    Ok(())
}

fn subspace_dims(bundles: &[(String, ActionBundle)]) -> Check {
    // Closed forms with per-row sizes b~, c~, d~: S_n gives 2b~(c~+d~)+b~,
    // C_n gives n b~(c~+d~)+b~; C2 conjugation on 2x2 gives 2.
    let expected = |name: &str, b: &ActionBundle| -> Option<usize> {
        let (d, c) = (b.rho().dim(), b.rho_hat().dim());
        match name {
            "C2-swap/matrix-sigmoid" => Some(2),
            "S3-deepsets/affine" => {
                let hb = b.eta()?.dim() / 3;
                Some(2 * hb * (c / 3 + d / 3) + hb)
            }
            "C4-circulant/affine" => {
                let hb = b.eta()?.dim() / 4;
                Some(4 * hb * (c / 4 + d / 4) + hb)
            }
            "trivial/affine" => Some(b.param_dim()),
            _ => None,
        }
    };
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (name, b) in bundles {
        if let Some(e) = expected(name, b) {
            checked += 1;
            if e != b.eg_dim() {
                mismatches.push(format!("{name}: {} != {e}", b.eg_dim()));
            }
        }
    }
    Check::new(
        "dim(E^G) closed forms",
        mismatches.is_empty(),
        if mismatches.is_empty() { format!("{checked} settings match") } else { mismatches.join("; ") },
    )
}

fn equivariance(bundles: &[(String, ActionBundle)], units: &[UnitSpec], rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for ((_, b), unit) in bundles.iter().zip(units) {
        for _ in 0..20 {
            let z = gaussian(rng, unit.param_dim(), 1.0);
            let x = gaussian(rng, unit.input_dim(), 1.0);
            let g = rng.random_range(0..b.order());
            let lhs = unit_eval(unit, &b.act_param(g, &z), &b.act_input(g, &x))?;
            let rhs = b.act_output(g, &unit_eval(unit, &z, &x)?);
            worst = worst.max(max_diff(&lhs, &rhs));
        }
    }
    Ok(Check::tol("unit equivariance", worst, 1e-12))
}

fn fa_identity(bundles: &[(String, ActionBundle)], units: &[UnitSpec], rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for ((_, b), unit) in bundles.iter().zip(units) {
        let ens = ParticleEnsemble::new(*unit, 5, gaussian(rng, 5 * unit.param_dim(), 0.5))?;
        let sym = ens.symmetrized(b)?;
        for _ in 0..20 {
            let x = gaussian(rng, unit.input_dim(), 2.0);
            worst = worst.max(max_diff(&fa_eval(&ens, b, &x)?, &model_eval(&sym, &x)?));
        }
    }
    Ok(Check::tol("feature averaging = symmetrized model", worst, 1e-12))
}

fn gradient_fd(rng: &mut ChaCha8Rng) -> Result<Check> {
    let units = [
        UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic),
        UnitSpec::matrix_sigmoid(3, 2, Sigma::Tanh),
        UnitSpec::affine_layer(2, 3, 2, Sigma::Logistic),
        UnitSpec::affine_layer(3, 2, 1, Sigma::Tanh),
    ];
    let h = 1e-6;
    let mut worst = 0.0f64;
    for unit in units {
        for tau in [0.0, 1e-4] {
            let n = 3;
            let dim = unit.param_dim();
            let params = gaussian(rng, n * dim, 0.7);
            let x = gaussian(rng, unit.input_dim(), 1.0);
            let y = gaussian(rng, unit.output_dim(), 1.0);
            let ens = ParticleEnsemble::new(unit, n, params.clone())?;
            let grad = per_sample_grad(&ens, &x, &y, tau, LossScale::One)?;
            // Per-particle rows carry no 1/N, so they are gradients of N·ℓ + τΣ‖θ_i‖².
            let objective = |p: &[f64]| -> Result<f64> {
                let e = ParticleEnsemble::new(unit, n, p.to_vec())?;
                let reg: f64 = p.iter().map(|v| v * v).sum();
                Ok(n as f64 * loss(&model_eval(&e, &x)?, &y, LossScale::One) + tau * reg)
            };
            for k in 0..n * dim {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (objective(&plus)? - objective(&minus)?) / (2.0 * h);
                let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
    }
    Ok(Check::tol("gradient vs finite differences", worst, 1e-5))
}

fn ot_bruteforce(rng: &mut ChaCha8Rng) -> Result<Check> {
    let perms = all_permutations(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a = gaussian(rng, 8, 1.0);
        let b = gaussian(rng, 8, 1.0);
        let brute = perms
            .iter()
            .map(|p| {
                (0..4)
                    .map(|i| (a[2 * i] - b[2 * p[i]]).powi(2) + (a[2 * i + 1] - b[2 * p[i] + 1]).powi(2))
                    .sum::<f64>()
                    / 4.0
            })
            .fold(f64::INFINITY, f64::min);
        let w = w2_squared(&EmpiricalMeasure::uniform(2, a)?, &EmpiricalMeasure::uniform(2, b)?)?;
        worst = worst.max((w - brute).abs());
    }
    Ok(Check::tol("W2 vs permutation brute force", worst, 1e-9))
}

fn risk_identities(rng: &mut ChaCha8Rng) -> Result<Check> {
    let unit = UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic);
    let bundle = GroupSetting::default().bundle(&unit)?;
    let teacher = ParticleEnsemble::new(unit, 4, gaussian(rng, 16, 0.5))?.symmetrized(&bundle)?;
    let sample = McSample::draw(&teacher, 4.0, 64, SEED)?;
    let scale = LossScale::One;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mu = EmpiricalMeasure::uniform(4, gaussian(rng, 5 * 4, 0.5))?;
        let fa = risk_fa(&unit, &mu, &bundle, &sample, scale)?.mean;
        worst = worst.max((fa - risk_of_symmetrized(&unit, &mu, &bundle, &sample, scale)?.mean).abs());
        let ea = risk_ea(&unit, &mu, &bundle, &sample, scale)?.mean;
        let projected = crate::measures::project(&mu, &bundle)?;
        worst = worst.max((ea - risk(&unit, &projected, &sample, scale)?.mean).abs());
        let wi = symmetrize(&mu, bundle.m_action())?;
        let da = risk_da(&unit, &wi, &bundle, &sample, scale)?.mean;
        worst = worst.max((da - risk(&unit, &wi, &sample, scale)?.mean).abs());
    }
    Ok(Check::tol("risk identities (FA, EA, DA on WI)", worst, 1e-10))
}

/// Runs the suite. Errors are reserved for unreadable inputs; failed
/// properties are reported as rows.
pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let settings = reference_settings();
    let mut bundles = Vec::new();
    let mut units = Vec::new();
    for (name, setting, unit) in &settings {
        bundles.push((name.clone(), setting.bundle(unit)?));
        units.push(*unit);
    }
    let mut checks = Vec::new();
    representation_checks(&bundles, &mut checks)?;
    checks.push(subspace_dims(&bundles));
    checks.push(equivariance(&bundles, &units, &mut rng)?);
    checks.push(fa_identity(&bundles, &units, &mut rng)?);
    checks.push(gradient_fd(&mut rng)?);
    checks.push(ot_bruteforce(&mut rng)?);
    checks.push(risk_identities(&mut rng)?);

    for path in &opts.rep_files {
        let rep = GroupRepresentation::load_json(path)?;
        let report = validate_representation(&rep)?;
        let detail = if report.is_valid() { "valid".to_string() } else { report.to_string().trim_end().replace('\n', "; ") };
        checks.push(Check::new(format!("representation {}", path.display()), report.is_valid(), detail));
    }
    if !opts.snapshot_files.is_empty() {
        let unit = opts.snapshot_unit.unwrap_or(UnitSpec::matrix_sigmoid(2, 2, Sigma::Logistic));
        for path in &opts.snapshot_files {
            let ens = read_ensemble_csv(path, &unit)?;
            checks.push(Check::new(format!("snapshot {}", path.display()), true, format!("{} particles", ens.n())));
        }
    }
    Ok(SuiteReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let report = run_suite(&SuiteOptions::default()).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn non_orthogonal_rep_fails_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rep.json");
        std::fs::write(&path, r#"{"order":2,"dim":2,"matrices":[[1,0,0,1],[2,0,0,1]],"cayley":[[0,1],[1,0]]}"#).unwrap();
        let report = run_suite(&SuiteOptions { rep_files: vec![path], ..Default::default() }).unwrap();
        assert!(!report.all_passed());
        assert!(!report.checks.last().unwrap().passed);
    }

    #[test]
    fn corrupted_snapshot_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        std::fs::write(&path, "3,4\n1,2\n").unwrap();
        let opts = SuiteOptions { snapshot_files: vec![path], ..Default::default() };
        assert!(run_suite(&opts).is_err());
    }
}

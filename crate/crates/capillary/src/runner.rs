//! Scenario execution: expands checks into a deterministic task list, runs
//! the tasks on a rayon pool (order-preserving, so the report is identical
//! for any job count), and assembles the run report. A failing or erroring
//! check never aborts the remaining ones.

use crate::hkr;
use crate::identities::{self, IdentityReport, LaplacianWhich};
use crate::report::{CheckReport, LevelRow, RunReport};
use crate::scenario::{CheckConfig, CheckKind, Directions, Scenario, SurfaceConfig};
use crate::stability::{self, Verdict};
use crate::surfaces::make_surface;
use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum RunnerError {
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Filter {
    All,
    SpectrumOnly,
    HkrOnly,
}

impl Filter {
    fn admits(self, kind: CheckKind) -> bool {
        match self {
            Filter::All => true,
            Filter::SpectrumOnly => matches!(kind, CheckKind::Spectrum | CheckKind::Pairing),
            Filter::HkrOnly => {
                matches!(kind, CheckKind::Hkr | CheckKind::Volume | CheckKind::Radial)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub levels: Option<Vec<usize>>,
    pub tol: Option<f64>,
    pub jobs: usize,
    pub filter: Filter,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            levels: None,
            tol: None,
            jobs: 0, // rayon default
            filter: Filter::All,
        }
    }
}

struct Task {
    id: String,
    kind: CheckKind,
    surface: SurfaceConfig,
    check: CheckConfig,
    direction: Option<Vec<f64>>,
    levels: Vec<usize>,
    tol: f64,
    rule_order: usize,
    seed: u64,
}

fn expand_directions(check: &CheckConfig) -> Vec<(String, Option<Vec<f64>>)> {
    if check.kind.directionless() {
        return vec![("".into(), None)];
    }
    match &check.directions {
        Directions::Named(_) => vec![
            ("e1".into(), Some(vec![1.0, 0.0, 0.0])),
            ("e2".into(), Some(vec![0.0, 1.0, 0.0])),
            ("e3".into(), Some(vec![0.0, 0.0, 1.0])),
        ],
        Directions::Explicit(list) => list
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("a{i}"), Some(a.clone())))
            .collect(),
    }
}

fn expand_tasks(scn: &Scenario, opts: &RunOptions, seed: u64) -> Vec<Task> {
    let mut tasks = Vec::new();
    let surfaces: std::collections::HashMap<&str, &SurfaceConfig> =
        scn.surface.iter().map(|s| (s.name.as_str(), s)).collect();
    for (ci, check) in scn.check.iter().enumerate() {
        if !opts.filter.admits(check.kind) {
            continue;
        }
        let surface = surfaces[check.surface.as_str()];
        let levels = opts
            .levels
            .clone()
            .or_else(|| check.levels.clone())
            .unwrap_or_else(|| scn.levels.clone());
        let tol = check
            .tol
            .or(opts.tol)
            .or(scn.tol)
            .unwrap_or_else(|| check.kind.default_tol());
        for (label, direction) in expand_directions(check) {
            let id = if label.is_empty() {
                format!("{ci:03}:{}:{}", check.kind.name(), check.surface)
            } else {
                format!("{ci:03}:{}:{}:{label}", check.kind.name(), check.surface)
            };
            tasks.push(Task {
                id,
                kind: check.kind,
                surface: surface.clone(),
                check: check.clone(),
                direction,
                levels: levels.clone(),
                tol,
                rule_order: scn.rule_order,
                seed: seed.wrapping_add((tasks.len() as u64).wrapping_mul(0x9e37_79b9)),
            });
        }
    }
    tasks
}

pub fn run_scenario(scn: &Scenario, opts: &RunOptions) -> Result<RunReport, RunnerError> {
    let seed = opts.seed.unwrap_or(scn.seed);
    let tasks = expand_tasks(scn, opts, seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| RunnerError::Pool(e.to_string()))?;
    let checks: Vec<CheckReport> =
        pool.install(|| tasks.par_iter().map(execute_task).collect());
    Ok(RunReport::new(scn.hash(), seed, checks))
}

fn execute_task(task: &Task) -> CheckReport {
    let start = std::time::Instant::now();
    let mut report = CheckReport {
        id: task.id.clone(),
        kind: task.kind.name().into(),
        surface: task.surface.name.clone(),
        family: format!("{:?}", task.surface.family),
        curvature: task.surface.curvature.0.k(),
        theta: None,
        direction: task.direction.clone(),
        residual: None,
        order: None,
        pass: false,
        levels: Vec::new(),
        detail: serde_json::Value::Null,
        error: None,
        wall_clock_ms: 0.0,
    };
    match run_check(task, &mut report) {
        Ok(()) => {}
        Err(msg) => {
            report.pass = false;
            report.error = Some(msg);
        }
    }
    report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

fn absorb_identity(report: &mut CheckReport, inner: IdentityReport) {
    report.theta = inner.theta;
    report.residual = Some(inner.last_residual());
    report.order = inner.order;
    report.pass = inner.pass;
    report.levels = inner
        .levels
        .iter()
        .map(|l| LevelRow {
            level: l.level,
            residual: l.rel_residual,
        })
        .collect();
    report.detail = serde_json::to_value(&inner).unwrap_or(serde_json::Value::Null);
}

fn expect_matches(expect: &Option<String>, actual: &str, default: bool) -> bool {
    match expect {
        Some(e) => e.eq_ignore_ascii_case(actual),
        None => default,
    }
}

fn run_check(task: &Task, report: &mut CheckReport) -> Result<(), String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let spec = task.surface.to_spec();
    let patch = make_surface(&spec).map_err(|e| err(&e))?;
    report.family = patch.name.clone();
    report.theta = patch.contact_angle;
    let a = task
        .direction
        .as_ref()
        .map(|d| DVector::from_row_slice(d))
        .unwrap_or_else(|| DVector::from_row_slice(&[0.0, 0.0, 1.0]));
    let last_level = *task.levels.last().ok_or("empty level list")?;
    match task.kind {
        CheckKind::Field => {
            let rep = patch.sf.check_field_identities(&a, 1000, task.seed);
            let residual = rep.max_residual();
            report.residual = Some(residual);
            report.pass = residual < task.tol;
            report.detail = serde_json::to_value(&rep).map_err(|e| err(&e))?;
        }
        CheckKind::Minkowski => {
            let rep =
                identities::minkowski_residual(&patch, &a, task.rule_order, &task.levels, task.tol)
                    .map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::MinkowskiHigher => {
            let k = task.check.k.ok_or("minkowski_higher requires k")?;
            let rep = identities::minkowski_higher(
                &patch,
                &a,
                k,
                task.rule_order,
                &task.levels,
                task.tol,
            )
            .map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::Balance => {
            let rep =
                identities::balance_residual(&patch, &a, task.rule_order, &task.levels, task.tol)
                    .map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::Robin => {
            let rep = identities::robin_residual(&patch, &a, 48, task.tol).map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::Laplacian => {
            let name = task.check.variant.as_deref().ok_or("variant required")?;
            let which = LaplacianWhich::parse(name)
                .ok_or_else(|| format!("unknown laplacian variant {name:?}"))?;
            let rep = identities::laplacian_identity_residual(&patch, &a, which, task.tol)
                .map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::Phi => {
            let (_, rep) =
                identities::phi_test_function(&patch, &a, task.rule_order, last_level, task.tol)
                    .map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::AuxPhi => {
            let (boundary, interior) =
                identities::aux_phi_residual(&patch, task.tol, task.tol).map_err(|e| err(&e))?;
            let pass = boundary.pass && interior.pass;
            absorb_identity(report, boundary.clone());
            report.pass = pass;
            report.detail = serde_json::json!({
                "boundary": serde_json::to_value(&boundary).map_err(|e| err(&e))?,
                "interior": serde_json::to_value(&interior).map_err(|e| err(&e))?,
            });
        }
        CheckKind::BoundaryUmbilic => {
            let rep = identities::boundary_umbilic_residual(&patch.sf, &a, 200, task.tol)
                .map_err(|e| err(&e))?;
            absorb_identity(report, rep);
        }
        CheckKind::Spectrum => {
            let rep =
                stability::classify(&patch, &task.levels, task.tol).map_err(|e| err(&e))?;
            let verdict = match rep.verdict {
                Verdict::Stable => "stable",
                Verdict::Unstable => "unstable",
                Verdict::Marginal => "marginal",
            };
            report.levels = rep
                .levels
                .iter()
                .map(|&(level, _, lam)| LevelRow {
                    level,
                    residual: lam,
                })
                .collect();
            report.residual = rep.levels.last().map(|&(_, _, lam)| lam);
            report.pass =
                expect_matches(&task.check.expect, verdict, rep.verdict != Verdict::Marginal);
            report.detail = serde_json::to_value(&rep).map_err(|e| err(&e))?;
        }
        CheckKind::Pairing => {
            let rep = stability::stability_pairing(&patch, &a, last_level).map_err(|e| err(&e))?;
            report.residual = Some(rep.rel_gap);
            report.pass = rep.rel_gap < task.tol;
            report.detail = serde_json::to_value(&rep).map_err(|e| err(&e))?;
        }
        CheckKind::Hkr => {
            let rep = hkr::hkr_check(&patch, &a, task.rule_order, last_level, task.tol)
                .map_err(|e| err(&e))?;
            let verdict = match rep.verdict {
                hkr::HkrVerdict::Equality => "equality",
                hkr::HkrVerdict::StrictInequality => "strict_inequality",
                hkr::HkrVerdict::Violation => "violation",
                hkr::HkrVerdict::Refused => "refused",
            };
            report.residual = Some(rep.rel_margin);
            report.pass = expect_matches(
                &task.check.expect,
                verdict,
                matches!(
                    rep.verdict,
                    hkr::HkrVerdict::Equality | hkr::HkrVerdict::StrictInequality
                ),
            );
            report.detail = serde_json::to_value(&rep).map_err(|e| err(&e))?;
        }
        CheckKind::Volume => {
            let axis = DVector::from_row_slice(&[0.0, 0.0, 1.0]);
            let div = hkr::volume_potential_integral(&patch, &axis, task.rule_order, last_level)
                .map_err(|e| err(&e))?;
            let direct = hkr::volume_direct_oracle(&patch, task.rule_order + 4, last_level + 1)
                .map_err(|e| err(&e))?;
            let rel = (div - direct).abs() / div.abs().max(direct.abs()).max(1e-14);
            report.residual = Some(rel);
            report.pass = rel < task.tol;
            report.detail = serde_json::json!({
                "divergence_route": div,
                "direct_quadrature": direct,
                "rel_gap": rel,
            });
        }
        CheckKind::Radial => {
            let worst = hkr::radial_solution_residual(&patch.sf, 500, task.seed);
            report.residual = Some(worst);
            report.pass = worst < task.tol;
            report.detail = serde_json::json!({ "max_residual": worst, "samples": 500 });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO: &str = r#"
schema_version = 1
seed = 11
levels = [1, 2]

[[surface]]
name = "cap"
family = "spherical_cap"
curvature = 0
cap_radius = 1.0

[[surface]]
name = "undu"
family = "unduloid_piece"
curvature = 0
h_target = 3.0

[[check]]
kind = "minkowski"
surface = "cap"

[[check]]
kind = "robin"
surface = "cap"
directions = [[0.0, 0.0, 1.0]]

[[check]]
kind = "spectrum"
surface = "undu"
levels = [1, 2]
expect = "unstable"

[[check]]
kind = "hkr"
surface = "cap"
directions = [[0.0, 0.0, 1.0]]
expect = "equality"

[[check]]
kind = "volume"
surface = "cap"

[[check]]
kind = "radial"
surface = "cap"
tol = 1e-9
"#;

    #[test]
    fn scenario_runs_and_passes() {
        let scn = Scenario::parse(SCENARIO).unwrap();
        let rep = run_scenario(&scn, &RunOptions::default()).unwrap();
        for c in &rep.checks {
            assert!(c.pass, "{}: {:?} {:?}", c.id, c.residual, c.error);
        }
        // 3 minkowski directions + 1 robin + 1 spectrum + 1 hkr + 1 volume
        // + 1 radial.
        assert_eq!(rep.total, 8);
        assert!(rep.overall_pass);
    }

    #[test]
    fn byte_identical_across_job_counts() {
        let scn = Scenario::parse(SCENARIO).unwrap();
        let mut o1 = RunOptions::default();
        o1.jobs = 1;
        let mut o4 = RunOptions::default();
        o4.jobs = 4;
        let r1 = run_scenario(&scn, &o1).unwrap().to_json();
        let r4 = run_scenario(&scn, &o4).unwrap().to_json();
        assert_eq!(r1, r4);
    }

    #[test]
    fn filters_select_check_classes() {
        let scn = Scenario::parse(SCENARIO).unwrap();
        let mut opts = RunOptions::default();
        opts.filter = Filter::HkrOnly;
        let rep = run_scenario(&scn, &opts).unwrap();
        assert_eq!(rep.total, 3); // hkr + volume + radial
        opts.filter = Filter::SpectrumOnly;
        let rep = run_scenario(&scn, &opts).unwrap();
        assert_eq!(rep.total, 1);
    }

    #[test]
    fn failing_check_does_not_abort_the_run() {
        let text = format!(
            "{SCENARIO}\n[[check]]\nkind = \"laplacian\"\nsurface = \"undu\"\nvariant = \"eq-x\"\n"
        );
        // eq-x needs a flat ambient *and* works; instead force an error with
        // a spherical-only mismatch: eq-x on the unduloid is fine, so use a
        // closed-sphere spectrum request which is unsupported.
        let text = format!(
            "{text}\n[[surface]]\nname = \"ball\"\nfamily = \"closed_sphere\"\ncurvature = 0\ncap_radius = 0.4\n\n[[check]]\nkind = \"spectrum\"\nsurface = \"ball\"\n"
        );
        let scn = Scenario::parse(&text).unwrap();
        let rep = run_scenario(&scn, &RunOptions::default()).unwrap();
        let bad = rep.checks.iter().find(|c| c.surface == "ball").unwrap();
        assert!(!bad.pass);
        assert!(bad.error.is_some());
        // Everything else still ran.
        assert!(rep.checks.iter().filter(|c| c.pass).count() >= 8);
        assert!(!rep.overall_pass);
    }
}

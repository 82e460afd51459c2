//! Experiment orchestration and artifact emission.
//!
//! Executes the configured pipeline (curvature report, heat or flow solve,
//! selected verifications), writes CSV tables with fixed schemas plus a
//! human-readable and a machine-readable summary, and returns the exit
//! code: 0 all checks pass, 1 an estimate fails, 2 precondition or
//! configuration failure. Runs are deterministic given the seed; every
//! summary field is plumbed from a module output.

use crate::bounds::{make_bounds_static, BoundFunctionSet};
use crate::curvature::{self, CurvatureBounds, EffectiveDim};
use crate::error::{FinslerError, Result};
use crate::flow::{self, FlowTrajectory};
use crate::heat::{self, HeatOptions, HeatTrajectory};
use crate::metric::direction_quadrature;
use crate::scenario::{CheckName, KPolicy, Scenario};
use crate::verify::{self, EstimateReport, VerifyConfig};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub pass: Option<bool>,
    pub worst_margin: Option<f64>,
    pub worst_t: Option<f64>,
    pub worst_node: Option<usize>,
    pub tol_budget: Option<f64>,
    pub conditions: Vec<(String, bool)>,
    pub constants: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub grid_nodes_per_axis: usize,
    pub dt: f64,
    pub t_end: f64,
    pub metric_family: String,
    pub defaults_applied: Vec<String>,
    pub checks: Vec<CheckSummary>,
    pub exit_code: i32,
    pub runtime_seconds: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: RunSummary,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut body = String::with_capacity(rows.len() * 48 + header.len() + 1);
    body.push_str(header);
    body.push('\n');
    for r in rows {
        body.push_str(r);
        body.push('\n');
    }
    fs::write(path, body)?;
    Ok(())
}

struct Pipeline<'a> {
    scenario: &'a Scenario,
    config: VerifyConfig,
    heat_static: Option<HeatTrajectory>,
    coupled: Option<(FlowTrajectory, HeatTrajectory)>,
    curv_bounds: Option<CurvatureBounds>,
    static_bounds: Option<BoundFunctionSet>,
}

impl<'a> Pipeline<'a> {
    fn heat_options(&self) -> HeatOptions {
        HeatOptions {
            min_ratio_guard: if self.scenario.allow_small_min {
                None
            } else {
                Some(heat::DEFAULT_MIN_RATIO)
            },
        }
    }

    fn heat_static(&mut self) -> Result<&HeatTrajectory> {
        if self.heat_static.is_none() {
            let s = self.scenario;
            let traj = heat::solve_heat(
                &s.metric,
                &s.measure,
                &s.u0,
                s.t_end,
                s.dt,
                &self.heat_options(),
            )?;
            self.heat_static = Some(traj);
        }
        Ok(self.heat_static.as_ref().unwrap())
    }

    fn coupled(&mut self) -> Result<&(FlowTrajectory, HeatTrajectory)> {
        if self.coupled.is_none() {
            let s = self.scenario;
            let pair = flow::solve_heat_under_flow(
                &s.metric,
                &s.measure,
                &s.u0,
                s.t_end,
                s.dt,
                s.dt_flow,
                &self.heat_options(),
            )?;
            self.coupled = Some(pair);
        }
        Ok(self.coupled.as_ref().unwrap())
    }

    fn n_param(&self) -> EffectiveDim {
        match &self.scenario.bounds {
            Some(b) => EffectiveDim::Finite(b.n_eff),
            None => EffectiveDim::Finite((self.scenario.grid.dim + 1) as f64),
        }
    }

    fn curv_bounds(&mut self) -> Result<&CurvatureBounds> {
        if self.curv_bounds.is_none() {
            let s = self.scenario;
            let dirs = direction_quadrature(s.grid.dim, 16);
            let cb = curvature::curvature_bounds(&s.metric, &s.measure, self.n_param(), &dirs)?;
            self.curv_bounds = Some(cb);
        }
        Ok(self.curv_bounds.as_ref().unwrap())
    }

    fn static_bounds(&mut self) -> Result<&BoundFunctionSet> {
        if self.static_bounds.is_none() {
            let recipe = self.scenario.bounds.as_ref().ok_or_else(|| {
                FinslerError::Config("this check needs a [bounds] section".into())
            })?.clone();
            let k = match recipe.k_policy {
                KPolicy::Explicit(k) => k,
                KPolicy::Estimate { floor } => {
                    let cb = self.curv_bounds()?;
                    cb.k.min(-floor)
                }
            };
            let (kind, n_eff, k) = recipe.static_kind(k)?;
            self.static_bounds = Some(make_bounds_static(kind, n_eff, k)?);
        }
        Ok(self.static_bounds.as_ref().unwrap())
    }
}

/// Execute the selected checks and write all artifacts under `out_dir`.
pub fn run(scenario: &Scenario, checks: &[CheckName], strict_variant: bool) -> Result<RunOutcome> {
    let started = Instant::now();
    let out_dir: PathBuf = scenario.out_dir.clone();
    fs::create_dir_all(&out_dir)?;
    let config = VerifyConfig {
        c_disc: scenario.c_disc,
        strict_variant,
        condition_grid_points: 200,
    };
    let mut pipe = Pipeline {
        scenario,
        config,
        heat_static: None,
        coupled: None,
        curv_bounds: None,
        static_bounds: None,
    };
    let mut summaries = Vec::new();
    let mut any_fail = false;

    for check in checks {
        let summary = match check {
            CheckName::Curvature => run_curvature(&mut pipe, &out_dir)?,
            CheckName::Heat => run_heat(&mut pipe, &out_dir)?,
            CheckName::Flow => run_flow(&mut pipe, &out_dir)?,
            CheckName::VerifyStatic => {
                let bounds = pipe.static_bounds()?.clone();
                let cb = pipe.curv_bounds()?.clone();
                let cfg = pipe.config.clone();
                let heat = pipe.heat_static()?;
                let report = verify::verify_static_estimate(heat, &bounds, &cb, &cfg)?;
                emit_report(&report, scenario, &out_dir)?
            }
            CheckName::VerifyHarnack => {
                let bounds = pipe.static_bounds()?.clone();
                let cfg = pipe.config.clone();
                let heat = pipe.heat_static()?;
                let quads = verify::sample_quadruples(
                    heat.len(),
                    scenario.grid.node_count(),
                    scenario.harnack_samples,
                    scenario.seed,
                );
                let report =
                    verify::verify_harnack_static(heat, &scenario.metric, &bounds, &quads, &cfg)?;
                emit_report(&report, scenario, &out_dir)?
            }
            CheckName::VerifyFlow => {
                let cfg = pipe.config.clone();
                let recipe = scenario
                    .bounds
                    .as_ref()
                    .ok_or_else(|| {
                        FinslerError::Config("verify-flow needs a [bounds] section".into())
                    })?
                    .clone();
                let (flow_traj, heat_traj) = pipe.coupled()?;
                let consts = verify::flow_constants(flow_traj);
                let kind =
                    recipe.flow_kind(consts.c1, consts.c2, consts.c3, scenario.grid.dim)?;
                let bounds = make_bounds_static(kind, recipe.n_eff, 0.0)?;
                let report = verify::verify_flow_estimate(flow_traj, heat_traj, &bounds, &cfg)?;
                emit_report(&report, scenario, &out_dir)?
            }
            CheckName::VerifyHarnackFlow => {
                let cfg = pipe.config.clone();
                let recipe = scenario
                    .bounds
                    .as_ref()
                    .ok_or_else(|| {
                        FinslerError::Config("verify-harnack-flow needs a [bounds] section".into())
                    })?
                    .clone();
                let (flow_traj, heat_traj) = pipe.coupled()?;
                let consts = verify::flow_constants(flow_traj);
                let kind =
                    recipe.flow_kind(consts.c1, consts.c2, consts.c3, scenario.grid.dim)?;
                let bounds = make_bounds_static(kind, recipe.n_eff, 0.0)?;
                let quads = verify::sample_quadruples(
                    heat_traj.len(),
                    scenario.grid.node_count(),
                    scenario.harnack_samples,
                    scenario.seed,
                );
                let report =
                    verify::verify_harnack_flow(flow_traj, heat_traj, &bounds, &quads, &cfg)?;
                emit_report(&report, scenario, &out_dir)?
            }
        };
        if summary.pass == Some(false) {
            any_fail = true;
        }
        summaries.push(summary);
    }

    let exit_code = if any_fail { 1 } else { 0 };
    let summary = RunSummary {
        seed: scenario.seed,
        grid_nodes_per_axis: scenario.grid.m,
        dt: scenario.dt,
        t_end: scenario.t_end,
        metric_family: scenario.metric.family_name().into(),
        defaults_applied: scenario.defaults_applied.clone(),
        checks: summaries,
        exit_code,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_summary(&summary, &out_dir)?;
    write_gnuplot_script(&summary, &out_dir)?;
    Ok(RunOutcome { exit_code, summary })
}

fn node_coords_str(scenario: &Scenario, idx: usize) -> String {
    let p = scenario.grid.position(idx);
    let mut s = String::new();
    for ax in 0..scenario.grid.dim {
        if ax > 0 {
            s.push(',');
        }
        s.push_str(&fmt_f(p[ax]));
    }
    s
}

fn run_curvature(pipe: &mut Pipeline, out_dir: &Path) -> Result<CheckSummary> {
    let scenario = pipe.scenario;
    let n_param = pipe.n_param();
    let dirs = direction_quadrature(scenario.grid.dim, 16);
    let stride = scenario.curvature_node_stride;
    let grid = scenario.grid;
    let mut rows = Vec::new();
    for idx in 0..grid.node_count() {
        let c = grid.coords_of(idx);
        if (0..grid.dim).any(|ax| c[ax] % stride != 0) {
            continue;
        }
        for y in &dirs {
            let sample =
                curvature::curvature_sample(&scenario.metric, &scenario.measure, n_param, idx, y)?;
            let lam_min = crate::linalg::sym_eig_min(grid.dim, &sample.ric_ij);
            let lam_max = crate::linalg::sym_eig_max(grid.dim, &sample.ric_ij);
            let mut row = node_coords_str(scenario, idx);
            for ax in 0..grid.dim {
                row.push(',');
                row.push_str(&fmt_f(y[ax]));
            }
            for v in [
                sample.f,
                sample.ric,
                sample.s,
                sample.s_dot,
                sample.ric_n,
                lam_min,
                lam_max,
            ] {
                row.push(',');
                row.push_str(&fmt_f(v));
            }
            rows.push(row);
        }
    }
    let header = if grid.dim == 2 {
        "x1,x2,y1,y2,F,Ric,S,Sdot,RicN,lambda_min_Ricij,lambda_max_Ricij"
    } else {
        "x1,x2,x3,y1,y2,y3,F,Ric,S,Sdot,RicN,lambda_min_Ricij,lambda_max_Ricij"
    };
    write_csv(&out_dir.join("curvature.csv"), header, &rows)?;
    let cb = pipe.curv_bounds()?;
    let mut constants = vec![
        ("K".into(), cb.k),
        ("K1".into(), cb.k1),
        ("K2".into(), cb.k2),
    ];
    if let (Some(k3), Some(k4)) = (cb.k3, cb.k4) {
        constants.push(("K3".into(), k3));
        constants.push(("K4".into(), k4));
    }
    Ok(CheckSummary {
        name: "curvature".into(),
        pass: None,
        worst_margin: None,
        worst_t: None,
        worst_node: Some(cb.k_witness.0),
        tol_budget: None,
        conditions: Vec::new(),
        constants,
        notes: vec![format!("curvature.csv: {} rows", rows.len())],
    })
}

fn run_heat(pipe: &mut Pipeline, out_dir: &Path) -> Result<CheckSummary> {
    let scenario = pipe.scenario;
    let stride = scenario.stride;
    let heat_traj = pipe.heat_static()?;
    let mut rows = Vec::new();
    for (k, t) in heat_traj.times.iter().enumerate() {
        if k % stride != 0 && k + 1 != heat_traj.len() {
            continue;
        }
        for idx in 0..scenario.grid.node_count() {
            let mut row = fmt_f(*t);
            row.push(',');
            row.push_str(&node_coords_str(scenario, idx));
            row.push(',');
            row.push_str(&fmt_f(heat_traj.states[k].data[idx]));
            rows.push(row);
        }
    }
    let header = if scenario.grid.dim == 2 {
        "t,x1,x2,u"
    } else {
        "t,x1,x2,x3,u"
    };
    write_csv(&out_dir.join("heat_checkpoints.csv"), header, &rows)?;
    let masses = heat_traj.mass_history(&scenario.measure);
    let drift = masses
        .iter()
        .map(|m| (m - masses[0]).abs() / masses[0].abs().max(1e-300))
        .fold(0.0f64, f64::max);
    let min_start = heat_traj.states.first().unwrap().min();
    let min_end = heat_traj.states.last().unwrap().min();
    let max_start = heat_traj.states.first().unwrap().max();
    let max_end = heat_traj.states.last().unwrap().max();
    Ok(CheckSummary {
        name: "heat".into(),
        pass: None,
        worst_margin: None,
        worst_t: None,
        worst_node: None,
        tol_budget: None,
        conditions: Vec::new(),
        constants: vec![
            ("mass_drift_rel".into(), drift),
            ("min_u_start".into(), min_start),
            ("min_u_end".into(), min_end),
            ("max_u_start".into(), max_start),
            ("max_u_end".into(), max_end),
            ("steps".into(), (heat_traj.len() - 1) as f64),
        ],
        notes: vec![format!("heat_checkpoints.csv: {} rows", rows.len())],
    })
}

fn run_flow(pipe: &mut Pipeline, out_dir: &Path) -> Result<CheckSummary> {
    let scenario = pipe.scenario;
    let (flow_traj, _) = pipe.coupled()?;
    let grid = scenario.grid;
    let conformal = scenario.metric.family_name() == "conformal-flat";
    let mut rows = Vec::new();
    for (k, t) in flow_traj.times.iter().enumerate() {
        let metric = &flow_traj.metrics[k];
        for idx in 0..grid.node_count() {
            let mut row = fmt_f(*t);
            row.push(',');
            row.push_str(&node_coords_str(scenario, idx));
            if conformal {
                let phi = metric.conformal_values().expect("conformal family")[idx];
                row.push(',');
                row.push_str(&fmt_f(phi));
            } else {
                let g = metric
                    .riemannian_tensor(&grid.position(idx))
                    .ok_or_else(|| {
                        FinslerError::UnsupportedFamily(
                            "flow checkpoints need a quadratic family".into(),
                        )
                    })?;
                for i in 0..grid.dim {
                    for j in i..grid.dim {
                        row.push(',');
                        row.push_str(&fmt_f(g[i][j]));
                    }
                }
            }
            rows.push(row);
        }
    }
    let header = match (grid.dim, conformal) {
        (2, true) => "t,x1,x2,phi",
        (2, false) => "t,x1,x2,g11,g12,g22",
        (3, true) => "t,x1,x2,x3,phi",
        _ => "t,x1,x2,x3,g11,g12,g13,g22,g23,g33",
    };
    write_csv(&out_dir.join("flow_metric.csv"), header, &rows)?;
    let bound_rows: Vec<String> = flow_traj
        .times
        .iter()
        .zip(&flow_traj.bounds)
        .map(|(t, b)| {
            format!(
                "{},{},{},{},{}",
                fmt_f(*t),
                fmt_f(b.k1),
                fmt_f(b.k2),
                fmt_f(b.k3),
                fmt_f(b.k4)
            )
        })
        .collect();
    write_csv(&out_dir.join("flow_bounds.csv"), "t,K1,K2,K3,K4", &bound_rows)?;
    let env = flow_traj.bounds_envelope();
    Ok(CheckSummary {
        name: "flow".into(),
        pass: None,
        worst_margin: None,
        worst_t: None,
        worst_node: None,
        tol_budget: None,
        conditions: Vec::new(),
        constants: vec![
            ("K1".into(), env.k1),
            ("K2".into(), env.k2),
            ("K3".into(), env.k3),
            ("K4".into(), env.k4),
            ("flow_steps".into(), (flow_traj.times.len() - 1) as f64),
        ],
        notes: vec![format!("flow_metric.csv: {} rows", rows.len())],
    })
}

fn emit_report(
    report: &EstimateReport,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<CheckSummary> {
    let mut rows = Vec::with_capacity(report.rows.len());
    for r in &report.rows {
        rows.push(format!(
            "{},{},{},{},{}",
            report.check_name,
            fmt_f(r.t),
            node_coords_str(scenario, r.node),
            fmt_f(r.margin),
            if r.pass { 1 } else { 0 }
        ));
    }
    let header = if scenario.grid.dim == 2 {
        "check,t,x1,x2,margin,pass"
    } else {
        "check,t,x1,x2,x3,margin,pass"
    };
    write_csv(
        &out_dir.join(format!("report_{}.csv", report.check_name)),
        header,
        &rows,
    )?;
    Ok(CheckSummary {
        name: report.check_name.clone(),
        pass: Some(report.pass),
        worst_margin: Some(report.worst_margin),
        worst_t: Some(report.worst_t),
        worst_node: Some(report.worst_node),
        tol_budget: Some(report.tol_budget),
        conditions: report
            .verdicts
            .iter()
            .map(|v| (v.name.clone(), v.pass))
            .collect(),
        constants: report.constants.clone(),
        notes: if report.excluded > 0 {
            vec![format!("{} samples excluded (flagged)", report.excluded)]
        } else {
            Vec::new()
        },
    })
}

fn write_summary(summary: &RunSummary, out_dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| FinslerError::Config(format!("summary serialization: {e}")))?;
    fs::write(out_dir.join("summary.json"), json)?;
    let mut text = String::new();
    let _ = writeln!(text, "run summary (seed {})", summary.seed);
    let _ = writeln!(
        text,
        "grid m={} dt={:.6e} t_end={:.6e} metric={}",
        summary.grid_nodes_per_axis, summary.dt, summary.t_end, summary.metric_family
    );
    if !summary.defaults_applied.is_empty() {
        let _ = writeln!(text, "defaults applied:");
        for d in &summary.defaults_applied {
            let _ = writeln!(text, "  {d}");
        }
    }
    for c in &summary.checks {
        match c.pass {
            Some(true) => {
                let _ = writeln!(
                    text,
                    "[PASS] {}: worst margin {:.6e} (t={:.6e}, node {}), budget {:.6e}",
                    c.name,
                    c.worst_margin.unwrap_or(f64::NAN),
                    c.worst_t.unwrap_or(f64::NAN),
                    c.worst_node.unwrap_or(0),
                    c.tol_budget.unwrap_or(f64::NAN)
                );
            }
            Some(false) => {
                let _ = writeln!(
                    text,
                    "[FAIL] {}: worst margin {:.6e} (t={:.6e}, node {}), budget {:.6e}",
                    c.name,
                    c.worst_margin.unwrap_or(f64::NAN),
                    c.worst_t.unwrap_or(f64::NAN),
                    c.worst_node.unwrap_or(0),
                    c.tol_budget.unwrap_or(f64::NAN)
                );
            }
            None => {
                let _ = writeln!(text, "[info] {}", c.name);
            }
        }
        if !c.conditions.is_empty() {
            let conds: Vec<String> = c
                .conditions
                .iter()
                .map(|(n, p)| format!("{n}:{}", if *p { "pass" } else { "FAIL" }))
                .collect();
            let _ = writeln!(text, "    conditions: {}", conds.join(" "));
        }
        if !c.constants.is_empty() {
            let cs: Vec<String> = c
                .constants
                .iter()
                .map(|(n, v)| format!("{n}={v:.6e}"))
                .collect();
            let _ = writeln!(text, "    constants: {}", cs.join(" "));
        }
        for note in &c.notes {
            let _ = writeln!(text, "    note: {note}");
        }
    }
    let _ = writeln!(text, "exit code: {}", summary.exit_code);
    let _ = writeln!(text, "runtime: {:.3}s", summary.runtime_seconds);
    fs::write(out_dir.join("summary.txt"), text)?;
    Ok(())
}

fn write_gnuplot_script(summary: &RunSummary, out_dir: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# margin traces; run: gnuplot -p plots.gp");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel 't'");
    let _ = writeln!(s, "set ylabel 'margin'");
    for c in &summary.checks {
        if c.pass.is_some() {
            let _ = writeln!(
                s,
                "plot 'report_{}.csv' using 2:{} with lines title '{}'",
                c.name,
                // margin column: check,t,x...,margin,pass
                3 + 2,
                c.name
            );
            let _ = writeln!(s, "pause -1 'press enter'");
        }
    }
    fs::write(out_dir.join("plots.gp"), s)?;
    Ok(())
}

/// Map an error onto the exit-code contract.
pub fn exit_code_for(err: &FinslerError) -> i32 {
    match err {
        FinslerError::Config(_)
        | FinslerError::Precondition(_)
        | FinslerError::Domain(_)
        | FinslerError::UnsupportedFamily(_)
        | FinslerError::ZeroVector(_)
        | FinslerError::StrongConvexity(_)
        | FinslerError::Numerical { .. }
        | FinslerError::Stability { .. }
        | FinslerError::Io(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario_str;

    fn randers_scenario(out: &Path) -> Scenario {
        let text = format!(
            r#"
[manifold]
dimension = 2
nodes_per_axis = 16
period = 1.0

[metric]
family = "randers"
b = [{{ constant = 0.3 }}, {{ constant = 0.0 }}]

[time]
t_end = 0.002
stride = 8

[bounds]
kind = "corollary"
n_effective = 3.0

[checks]
run = ["curvature", "heat", "verify-static", "verify-harnack"]
seed = 21
harnack_samples = 25

[output]
directory = "{}"
"#,
            out.display()
        );
        load_scenario_str(&text).unwrap()
    }

    #[test]
    fn full_static_pipeline_exit_zero_and_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = randers_scenario(dir.path());
        let outcome = run(&scenario, &scenario.checks.clone(), false).unwrap();
        assert_eq!(outcome.exit_code, 0);
        for f in [
            "curvature.csv",
            "heat_checkpoints.csv",
            "report_static-estimate.csv",
            "report_harnack-static.csv",
            "summary.txt",
            "summary.json",
            "plots.gp",
        ] {
            assert!(dir.path().join(f).exists(), "missing {f}");
        }
        let json = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(json.contains("\"exit_code\": 0"));
    }

    #[test]
    fn deliberate_b1_violation_yields_precondition_error() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
[manifold]
dimension = 2
nodes_per_axis = 16
period = 1.0

[metric]
family = "euclidean"

[time]
t_end = 0.002

[bounds]
kind = "constant"
beta = 1.2
psi = 1.0

[checks]
run = ["verify-static"]

[output]
directory = "{}"
"#,
            dir.path().display()
        );
        let scenario = load_scenario_str(&text).unwrap();
        let err = run(&scenario, &scenario.checks.clone(), false).unwrap_err();
        assert!(matches!(err, FinslerError::Precondition(_)));
        assert_eq!(exit_code_for(&err), 2);
    }

    #[test]
    fn rerun_with_same_seed_byte_identical_csv() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut s1 = randers_scenario(dir1.path());
        s1.checks = vec![CheckName::Heat, CheckName::VerifyHarnack];
        let mut s2 = s1.clone();
        s2.out_dir = dir2.path().to_path_buf();
        run(&s1, &s1.checks.clone(), false).unwrap();
        run(&s2, &s2.checks.clone(), false).unwrap();
        for f in ["heat_checkpoints.csv", "report_harnack-static.csv"] {
            let a = std::fs::read(dir1.path().join(f)).unwrap();
            let b = std::fs::read(dir2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between identical runs");
        }
    }
}

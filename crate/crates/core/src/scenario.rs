//! Scenario configuration: TOML ingestion with strict validation.
//!
//! Unknown keys are rejected, parse errors carry positions, and every
//! defaulted field is echoed into the run summary. The grammar is
//! documented in the repository README.

use crate::analytic::TrigScalar;
use crate::bounds::{BoundKind, Generator};
use crate::error::{FinslerError, Result};
use crate::grid::{ScalarField, TorusGrid};
use crate::heat;
use crate::linalg;
use crate::measure::MeasureField;
use crate::metric::FinslerStructure;
use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    manifold: ManifoldSpec,
    metric: MetricSpec,
    #[serde(default)]
    measure: MeasureSpec,
    #[serde(default)]
    initial: InitialSpec,
    time: TimeSpec,
    #[serde(default)]
    flow: FlowSpec,
    #[serde(default)]
    bounds: Option<BoundsSpec>,
    #[serde(default)]
    checks: ChecksSpec,
    #[serde(default)]
    output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifoldSpec {
    dimension: usize,
    nodes_per_axis: usize,
    period: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricSpec {
    family: String,
    #[serde(default)]
    phi: Option<TrigScalar>,
    #[serde(default)]
    diag: Option<Vec<TrigScalar>>,
    #[serde(default)]
    b: Option<Vec<TrigScalar>>,
    #[serde(default)]
    a_diag: Option<Vec<TrigScalar>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MeasureSpec {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    log_sigma: Option<TrigScalar>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct InitialSpec {
    #[serde(default)]
    family: Option<String>,
    #[serde(default)]
    base: Option<f64>,
    #[serde(default)]
    amplitude: Option<f64>,
    #[serde(default)]
    wave: Option<[i32; 3]>,
    #[serde(default)]
    phase: Option<f64>,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    center: Option<[f64; 3]>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    mode_count: Option<usize>,
    #[serde(default)]
    allow_small_min: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSpec {
    t_end: f64,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    dt_cfl_fraction: Option<f64>,
    #[serde(default)]
    stride: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FlowSpec {
    #[serde(default)]
    enabled: Option<bool>,
    #[serde(default)]
    dt_flow_substeps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSpec {
    kind: String,
    #[serde(default)]
    generator: Option<String>,
    #[serde(default)]
    power: Option<f64>,
    #[serde(default)]
    theta: Option<f64>,
    #[serde(default)]
    n_effective: Option<f64>,
    #[serde(default)]
    k: Option<f64>,
    #[serde(default)]
    k_floor: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    psi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ChecksSpec {
    #[serde(default)]
    run: Option<Vec<String>>,
    #[serde(default)]
    harnack_samples: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    c_disc: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    #[serde(default)]
    directory: Option<String>,
    #[serde(default)]
    curvature_node_stride: Option<usize>,
}

/// Checks the runner understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckName {
    Curvature,
    Heat,
    Flow,
    VerifyStatic,
    VerifyHarnack,
    VerifyFlow,
    VerifyHarnackFlow,
}

impl CheckName {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "curvature" => CheckName::Curvature,
            "heat" => CheckName::Heat,
            "flow" => CheckName::Flow,
            "verify-static" => CheckName::VerifyStatic,
            "verify-harnack" => CheckName::VerifyHarnack,
            "verify-flow" => CheckName::VerifyFlow,
            "verify-harnack-flow" => CheckName::VerifyHarnackFlow,
            other => {
                return Err(FinslerError::Config(format!(
                    "unknown check '{other}' (supported: curvature, heat, flow, \
                     verify-static, verify-harnack, verify-flow, verify-harnack-flow)"
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::Curvature => "curvature",
            CheckName::Heat => "heat",
            CheckName::Flow => "flow",
            CheckName::VerifyStatic => "verify-static",
            CheckName::VerifyHarnack => "verify-harnack",
            CheckName::VerifyFlow => "verify-flow",
            CheckName::VerifyHarnackFlow => "verify-harnack-flow",
        }
    }
}

/// How the bound set's K is obtained.
#[derive(Debug, Clone, Copy)]
pub enum KPolicy {
    /// min sampled Ric_N, floored at −k_floor.
    Estimate { floor: f64 },
    Explicit(f64),
}

/// Resolved bound-set recipe (constants are filled in at run time).
#[derive(Debug, Clone)]
pub struct BoundsRecipe {
    pub kind_name: String,
    pub generator: Generator,
    pub theta: f64,
    pub n_eff: f64,
    pub k_policy: KPolicy,
    pub beta_const: f64,
    pub psi_const: f64,
}

impl BoundsRecipe {
    /// Static-estimate kind from the recipe with a resolved K.
    pub fn static_kind(&self, k: f64) -> Result<(BoundKind, f64, f64)> {
        let kind = match self.kind_name.as_str() {
            "corollary" => BoundKind::Corollary { b: self.generator },
            "remark-theta" => BoundKind::RemarkTheta { theta: self.theta },
            "remark-sinh" => BoundKind::RemarkSinh,
            "constant" => BoundKind::Constant {
                beta: self.beta_const,
                psi: self.psi_const,
            },
            other => {
                return Err(FinslerError::Config(format!(
                    "bounds kind '{other}' is not a static kind"
                )))
            }
        };
        Ok((kind, self.n_eff, k))
    }

    /// Flow-estimate kind with the hypothesis constants baked in.
    pub fn flow_kind(&self, c1: f64, c2: f64, c3: f64, dim: usize) -> Result<BoundKind> {
        Ok(match self.kind_name.as_str() {
            "flow-constant-beta" => BoundKind::FlowConstantBeta {
                theta: self.theta,
                c1,
                c2,
                c3,
                dim,
            },
            "flow-corollary" => BoundKind::FlowCorollary {
                b: self.generator,
                c1,
                c2,
                c3,
                dim,
            },
            other => {
                return Err(FinslerError::Config(format!(
                    "bounds kind '{other}' is not a flow kind"
                )))
            }
        })
    }
}

/// Fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: TorusGrid,
    pub metric: FinslerStructure,
    pub measure: MeasureField,
    pub u0: ScalarField,
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
    pub allow_small_min: bool,
    pub flow_enabled: bool,
    pub dt_flow: f64,
    pub bounds: Option<BoundsRecipe>,
    pub checks: Vec<CheckName>,
    pub harnack_samples: usize,
    pub seed: u64,
    pub c_disc: f64,
    pub out_dir: PathBuf,
    pub curvature_node_stride: usize,
    /// Defaulted fields, echoed into the summary.
    pub defaults_applied: Vec<String>,
}

/// Load and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        FinslerError::Config(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| {
        FinslerError::Config(format!("scenario parse error in {}: {e}", path.display()))
    })?;
    resolve(file)
}

/// Validate a scenario given as a TOML string (used by tests).
pub fn load_scenario_str(text: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| FinslerError::Config(format!("parse error: {e}")))?;
    resolve(file)
}

fn resolve(file: ScenarioFile) -> Result<Scenario> {
    let mut defaults = Vec::new();
    let grid = TorusGrid::new(
        file.manifold.dimension,
        file.manifold.nodes_per_axis,
        file.manifold.period,
    )?;
    let n = grid.dim;

    let metric = build_metric(&file.metric, grid)?;

    let measure_kind = file.measure.kind.clone().unwrap_or_else(|| {
        defaults.push("measure.kind = lebesgue".into());
        "lebesgue".into()
    });
    let measure = match measure_kind.as_str() {
        "lebesgue" => MeasureField::lebesgue(grid),
        "riemannian-volume" => MeasureField::riemannian_volume(&metric).map_err(|e| {
            FinslerError::Config(format!("measure.kind = riemannian-volume: {e}"))
        })?,
        "custom" => {
            let log_sigma = file.measure.log_sigma.clone().ok_or_else(|| {
                FinslerError::Config("measure.kind = custom needs measure.log_sigma".into())
            })?;
            MeasureField::custom_log(grid, log_sigma)
        }
        other => {
            return Err(FinslerError::Config(format!(
                "unknown measure.kind '{other}' (supported: lebesgue, riemannian-volume, custom)"
            )))
        }
    };

    let seed = file.checks.seed.unwrap_or_else(|| {
        defaults.push("checks.seed = 7".into());
        7
    });
    let u0 = build_initial(&file.initial, grid, seed, &mut defaults)?;

    // time stepping
    let cfl = heat::cfl_max_dt(&metric);
    let dt = match (file.time.dt, file.time.dt_cfl_fraction) {
        (Some(_), Some(_)) => {
            return Err(FinslerError::Config(
                "time.dt and time.dt_cfl_fraction are mutually exclusive".into(),
            ))
        }
        (Some(dt), None) => {
            if dt > cfl * (1.0 + 1e-12) {
                return Err(FinslerError::Config(format!(
                    "time.dt = {dt:.6e} violates the CFL guard {cfl:.6e}"
                )));
            }
            dt
        }
        (None, Some(frac)) => {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(FinslerError::Config(format!(
                    "time.dt_cfl_fraction must lie in (0, 1], got {frac}"
                )));
            }
            frac * cfl
        }
        (None, None) => {
            defaults.push("time.dt_cfl_fraction = 0.5".into());
            0.5 * cfl
        }
    };
    if !(file.time.t_end > 0.0) {
        return Err(FinslerError::Config(format!(
            "time.t_end must be positive, got {}",
            file.time.t_end
        )));
    }
    let steps = (file.time.t_end / dt).ceil();
    if steps > 200_000.0 {
        return Err(FinslerError::Config(format!(
            "time.t_end/dt = {steps} steps exceeds the desk-scale budget"
        )));
    }
    let stride = file.time.stride.unwrap_or_else(|| {
        defaults.push("time.stride = 1".into());
        1
    });

    let flow_enabled = file.flow.enabled.unwrap_or(false);
    let substeps = file.flow.dt_flow_substeps.unwrap_or_else(|| {
        if flow_enabled {
            defaults.push("flow.dt_flow_substeps = 4".into());
        }
        4
    });
    let dt_flow = substeps as f64 * dt;
    if flow_enabled {
        let guard = crate::flow::flow_max_dt(&metric);
        if dt_flow > guard * (1.0 + 1e-12) {
            return Err(FinslerError::Config(format!(
                "dt_flow = {substeps}·dt = {dt_flow:.6e} violates the flow guard {guard:.6e}; \
                 reduce time.dt or flow.dt_flow_substeps"
            )));
        }
        if !crate::flow::family_supported(&metric) {
            return Err(FinslerError::Config(format!(
                "metric family {} is not closed under the Ricci flow",
                metric.family_name()
            )));
        }
    }

    let bounds = match &file.bounds {
        None => None,
        Some(spec) => Some(build_bounds_recipe(spec, n, &mut defaults)?),
    };

    let checks = match &file.checks.run {
        None => {
            defaults.push("checks.run = [curvature, heat]".into());
            vec![CheckName::Curvature, CheckName::Heat]
        }
        Some(list) => {
            let mut v = Vec::new();
            for s in list {
                v.push(CheckName::parse(s)?);
            }
            v
        }
    };
    for c in &checks {
        let needs_flow = matches!(c, CheckName::Flow | CheckName::VerifyFlow | CheckName::VerifyHarnackFlow);
        if needs_flow && !flow_enabled {
            return Err(FinslerError::Config(format!(
                "check {} needs flow.enabled = true",
                c.as_str()
            )));
        }
        let needs_bounds = matches!(
            c,
            CheckName::VerifyStatic
                | CheckName::VerifyHarnack
                | CheckName::VerifyFlow
                | CheckName::VerifyHarnackFlow
        );
        if needs_bounds && bounds.is_none() {
            return Err(FinslerError::Config(format!(
                "check {} needs a [bounds] section",
                c.as_str()
            )));
        }
    }

    let harnack_samples = file.checks.harnack_samples.unwrap_or_else(|| {
        defaults.push("checks.harnack_samples = 100".into());
        100
    });
    let c_disc = file.checks.c_disc.unwrap_or_else(|| {
        defaults.push(format!("checks.c_disc = {}", crate::verify::DEFAULT_C_DISC));
        crate::verify::DEFAULT_C_DISC
    });
    let out_dir = PathBuf::from(file.output.directory.clone().unwrap_or_else(|| {
        defaults.push("output.directory = out".into());
        "out".into()
    }));
    let curvature_node_stride = file.output.curvature_node_stride.unwrap_or_else(|| {
        let s = (grid.m / 16).max(1);
        defaults.push(format!("output.curvature_node_stride = {s}"));
        s
    });
    let allow_small_min = file.initial.allow_small_min.unwrap_or(false);

    Ok(Scenario {
        grid,
        metric,
        measure,
        u0,
        t_end: file.time.t_end,
        dt,
        stride: stride.max(1),
        allow_small_min,
        flow_enabled,
        dt_flow,
        bounds,
        checks,
        harnack_samples,
        seed,
        c_disc,
        out_dir,
        curvature_node_stride,
        defaults_applied: defaults,
    })
}

fn build_metric(spec: &MetricSpec, grid: TorusGrid) -> Result<FinslerStructure> {
    let n = grid.dim;
    let pad = |v: &[TrigScalar], what: &str| -> Result<[TrigScalar; 3]> {
        if v.len() != n {
            return Err(FinslerError::Config(format!(
                "metric.{what} needs exactly {n} entries, got {}",
                v.len()
            )));
        }
        let mut out = [
            TrigScalar::constant(0.0),
            TrigScalar::constant(0.0),
            TrigScalar::constant(0.0),
        ];
        for (i, t) in v.iter().enumerate() {
            out[i] = t.clone();
        }
        Ok(out)
    };
    match spec.family.as_str() {
        "euclidean" => Ok(FinslerStructure::euclidean(grid)),
        "conformal-flat" => {
            let phi = spec.phi.clone().ok_or_else(|| {
                FinslerError::Config("metric.family = conformal-flat needs metric.phi".into())
            })?;
            Ok(FinslerStructure::conformal(grid, phi))
        }
        "riemannian" => {
            let diag = spec.diag.clone().ok_or_else(|| {
                FinslerError::Config(
                    "metric.family = riemannian needs metric.diag (log factors)".into(),
                )
            })?;
            Ok(FinslerStructure::riemannian_diagonal(grid, pad(&diag, "diag")?))
        }
        "randers" => {
            let b = spec.b.clone().ok_or_else(|| {
                FinslerError::Config("metric.family = randers needs metric.b".into())
            })?;
            let a = match &spec.a_diag {
                None => None,
                Some(v) => Some(pad(v, "a_diag")?),
            };
            FinslerStructure::randers(grid, a, pad(&b, "b")?)
        }
        other => Err(FinslerError::Config(format!(
            "unknown metric.family '{other}' \
             (supported: euclidean, riemannian, conformal-flat, randers)"
        ))),
    }
}

fn build_initial(
    spec: &InitialSpec,
    grid: TorusGrid,
    seed: u64,
    defaults: &mut Vec<String>,
) -> Result<ScalarField> {
    let family = spec.family.clone().unwrap_or_else(|| {
        defaults.push("initial.family = constant-plus-mode".into());
        "constant-plus-mode".into()
    });
    let base = spec.base.unwrap_or_else(|| {
        defaults.push("initial.base = 2".into());
        2.0
    });
    let amplitude = spec.amplitude.unwrap_or_else(|| {
        defaults.push("initial.amplitude = 0.5".into());
        0.5
    });
    let n = grid.dim;
    let u0 = match family.as_str() {
        "constant-plus-mode" => {
            let wave = spec.wave.unwrap_or([1, 0, 0]);
            let phase = spec.phase.unwrap_or(0.0);
            let mode = TrigScalar::single(base, amplitude, wave, phase);
            ScalarField::from_fn(grid, 0.0, |x| mode.eval(x, grid.l))
        }
        "gaussian-bump" => {
            let width = spec.width.unwrap_or(grid.l / 8.0);
            let mut center = spec.center.unwrap_or([grid.l / 2.0; 3]);
            center[n..].iter_mut().for_each(|c| *c = 0.0);
            ScalarField::from_fn(grid, 0.0, |x| {
                let d = grid.min_image(&linalg::sub(n, x, &center));
                base + amplitude * (-linalg::dot(n, &d, &d) / (2.0 * width * width)).exp()
            })
        }
        "random-positive" => {
            let count = spec.mode_count.unwrap_or(4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b9).wrapping_add(1));
            let mut modes = Vec::new();
            for _ in 0..count {
                let wave = [
                    rng.gen_range(-2..=2),
                    rng.gen_range(-2..=2),
                    if n == 3 { rng.gen_range(-2..=2) } else { 0 },
                ];
                let amp: f64 = rng.gen::<f64>();
                let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                modes.push((amp, wave, phase));
            }
            let norm: f64 = modes.iter().map(|(a, _, _)| a.abs()).sum::<f64>().max(1e-9);
            ScalarField::from_fn(grid, 0.0, |x| {
                let mut v = 0.0;
                for (a, wave, phase) in &modes {
                    let t = TrigScalar::single(0.0, *a, *wave, *phase);
                    v += t.eval(x, grid.l);
                }
                base + amplitude * v / norm
            })
        }
        other => {
            return Err(FinslerError::Config(format!(
                "unknown initial.family '{other}' \
                 (supported: constant-plus-mode, gaussian-bump, random-positive)"
            )))
        }
    };
    if u0.min() <= 0.0 {
        return Err(FinslerError::Config(format!(
            "initial data must be positive; min = {}",
            u0.min()
        )));
    }
    Ok(u0)
}

fn build_bounds_recipe(
    spec: &BoundsSpec,
    dim: usize,
    defaults: &mut Vec<String>,
) -> Result<BoundsRecipe> {
    let generator = match spec.generator.as_deref() {
        None => {
            if spec.kind == "corollary" || spec.kind == "flow-corollary" {
                defaults.push("bounds.generator = t-squared".into());
            }
            Generator::TSquared
        }
        Some("t-squared") => Generator::TSquared,
        Some("linear") => Generator::Linear(spec.theta.unwrap_or(1.0)),
        Some("sinh") => Generator::Sinh,
        Some("power") => Generator::Power(spec.power.ok_or_else(|| {
            FinslerError::Config("bounds.generator = power needs bounds.power".into())
        })?),
        Some(other) => {
            return Err(FinslerError::Config(format!(
                "unknown bounds.generator '{other}' (supported: t-squared, linear, sinh, power)"
            )))
        }
    };
    let n_eff = spec.n_effective.unwrap_or_else(|| {
        defaults.push(format!("bounds.n_effective = {}", dim + 1));
        (dim + 1) as f64
    });
    if n_eff < dim as f64 {
        return Err(FinslerError::Config(format!(
            "bounds.n_effective = {n_eff} must be at least the dimension {dim}"
        )));
    }
    let k_policy = match spec.k {
        Some(k) => KPolicy::Explicit(k),
        None => {
            let floor = spec.k_floor.unwrap_or_else(|| {
                defaults.push("bounds.k_floor = 0.01".into());
                0.01
            });
            KPolicy::Estimate { floor }
        }
    };
    let theta = spec.theta.unwrap_or_else(|| {
        match spec.kind.as_str() {
            "remark-theta" => defaults.push("bounds.theta = 0.5".into()),
            "flow-constant-beta" => defaults.push("bounds.theta = 2.0".into()),
            _ => {}
        }
        match spec.kind.as_str() {
            "remark-theta" => 0.5,
            _ => 2.0,
        }
    });
    Ok(BoundsRecipe {
        kind_name: spec.kind.clone(),
        generator,
        theta,
        n_eff,
        k_policy,
        beta_const: spec.beta.unwrap_or(0.5),
        psi_const: spec.psi.unwrap_or(0.0),
    })
}

/// Halve the spacing and time step `levels` times (for convergence runs).
pub fn refine(scenario: &Scenario, levels: u32) -> Result<Scenario> {
    let mut s = scenario.clone();
    for _ in 0..levels {
        let m = s.grid.m * 2;
        if m > 256 {
            return Err(FinslerError::Config(format!(
                "refinement would need {m} nodes per axis; beyond desk scale"
            )));
        }
        let grid = TorusGrid::new(s.grid.dim, m, s.grid.l)?;
        s.grid = grid;
        s.metric = rebuild_on_grid(&s.metric, grid)?;
        s.measure = match s.measure.kind {
            crate::measure::MeasureKind::Lebesgue => MeasureField::lebesgue(grid),
            crate::measure::MeasureKind::RiemannianVolume => {
                MeasureField::riemannian_volume(&s.metric)?
            }
            crate::measure::MeasureKind::Custom => {
                return Err(FinslerError::Config(
                    "refinement of custom measures is not supported".into(),
                ))
            }
        };
        let old_u0 = s.u0.clone();
        // initial data is analytic in all families; resample by nearest
        // coarse evaluation is wrong — rebuild from the coarse field by
        // bilinear interpolation of the stored samples
        s.u0 = interpolate_field(&old_u0, grid);
        s.dt /= 2.0;
        s.dt_flow /= 2.0;
        let cfl = heat::cfl_max_dt(&s.metric);
        if s.dt > cfl * (1.0 + 1e-12) {
            return Err(FinslerError::Config(format!(
                "refined dt = {:.6e} violates the CFL guard {:.6e}; start from a smaller dt",
                s.dt, cfl
            )));
        }
    }
    Ok(s)
}

fn rebuild_on_grid(metric: &FinslerStructure, grid: TorusGrid) -> Result<FinslerStructure> {
    use crate::metric::{ConformalScalar, MetricFamily, RiemannianTensor};
    Ok(match &metric.family {
        MetricFamily::Euclidean => FinslerStructure::euclidean(grid),
        MetricFamily::Riemannian(RiemannianTensor::DiagonalExp(logs)) => {
            FinslerStructure::riemannian_diagonal(grid, logs.clone())
        }
        MetricFamily::ConformalFlat(ConformalScalar::Analytic(phi)) => {
            FinslerStructure::conformal(grid, phi.clone())
        }
        MetricFamily::Randers(p) => {
            FinslerStructure::randers(grid, p.a_logs.clone(), p.b.clone())?
        }
        _ => {
            return Err(FinslerError::Config(
                "refinement needs an analytic metric representation".into(),
            ))
        }
    })
}

fn interpolate_field(coarse: &ScalarField, fine: TorusGrid) -> ScalarField {
    let cg = coarse.grid;
    ScalarField::from_fn(fine, coarse.t, |x| {
        // periodic bilinear interpolation of the coarse samples
        let h = cg.spacing();
        let n = cg.dim;
        let mut idx0 = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for ax in 0..n {
            let u = (x[ax] / h).rem_euclid(cg.m as f64);
            idx0[ax] = u.floor() as usize % cg.m;
            frac[ax] = u - u.floor();
        }
        let mut val = 0.0;
        let corners = if n == 2 { 4 } else { 8 };
        for corner in 0..corners {
            let mut c = [0usize; 3];
            let mut w = 1.0;
            for ax in 0..n {
                let bit = (corner >> ax) & 1;
                c[ax] = (idx0[ax] + bit) % cg.m;
                w *= if bit == 1 { frac[ax] } else { 1.0 - frac[ax] };
            }
            val += w * coarse.data[cg.index_of(&c)];
        }
        val
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[manifold]
dimension = 2
nodes_per_axis = 16
period = 1.0

[metric]
family = "euclidean"

[time]
t_end = 0.001
"#;

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = load_scenario_str(MINIMAL).unwrap();
        assert_eq!(s.grid.m, 16);
        assert_eq!(s.metric.family_name(), "euclidean");
        assert!(s.defaults_applied.iter().any(|d| d.contains("measure.kind")));
        assert!(s
            .defaults_applied
            .iter()
            .any(|d| d.contains("dt_cfl_fraction")));
        assert!(!s.flow_enabled);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("[time]", "[time]\nwhatever = 3.0\n");
        let text = text.replace("t_end = 0.001", "t_end = 0.001\n");
        let err = load_scenario_str(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("whatever"), "got: {msg}");
    }

    #[test]
    fn unknown_family_lists_supported_tags() {
        let text = MINIMAL.replace("family = \"euclidean\"", "family = \"minkowski\"");
        let err = load_scenario_str(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("supported"), "got: {msg}");
        assert!(msg.contains("randers"));
    }

    #[test]
    fn cfl_violation_names_dt_and_bound() {
        let text = MINIMAL.replace("t_end = 0.001", "t_end = 0.001\ndt = 1.0");
        let err = load_scenario_str(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("CFL"), "got: {msg}");
        assert!(msg.contains("time.dt"), "got: {msg}");
    }

    #[test]
    fn randers_scenario_round_trip() {
        let text = r#"
[manifold]
dimension = 2
nodes_per_axis = 16
period = 1.0

[metric]
family = "randers"
b = [{ constant = 0.3 }, { constant = 0.0 }]

[time]
t_end = 0.002

[bounds]
kind = "corollary"
n_effective = 3.0

[checks]
run = ["verify-static", "verify-harnack"]
seed = 11
"#;
        let s = load_scenario_str(text).unwrap();
        assert_eq!(s.metric.family_name(), "randers");
        assert!(s.bounds.is_some());
        assert_eq!(s.checks.len(), 2);
        assert_eq!(s.seed, 11);
    }

    #[test]
    fn flow_check_requires_flow_enabled() {
        let text = r#"
[manifold]
dimension = 2
nodes_per_axis = 16
period = 1.0

[metric]
family = "euclidean"

[time]
t_end = 0.001

[bounds]
kind = "flow-constant-beta"

[checks]
run = ["verify-flow"]
"#;
        let err = load_scenario_str(text).unwrap_err();
        assert!(format!("{err}").contains("flow.enabled"));
    }

    #[test]
    fn refinement_halves_h_and_dt() {
        let s = load_scenario_str(MINIMAL).unwrap();
        let r = refine(&s, 1).unwrap();
        assert_eq!(r.grid.m, 32);
        assert!((r.dt - s.dt / 2.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_and_random_initials_positive() {
        for fam in ["gaussian-bump", "random-positive"] {
            let text = MINIMAL.replace(
                "[time]",
                &format!("[initial]\nfamily = \"{fam}\"\nbase = 2.0\namplitude = 1.0\n\n[time]"),
            );
            let s = load_scenario_str(&text).unwrap();
            assert!(s.u0.min() > 0.0);
        }
    }
}

//! Bound-function triples (β, λ, Ψ) for the gradient estimates and their
//! condition checks.
//!
//! The corollary construction realizes
//! β = 1 + 2K/(b e^{−2Kt}) ∫₀ᵗ b e^{−2Ks} ds and Ψ = N/(8b) ∫₀ᵗ b′²/(bβ)
//! with adaptive quadrature. For that β one has identically
//! (β′ − 2K⁻β)/(1 − β) = (ln b)′, so taking λ = b makes the strict
//! condition (B3) evaluate to exactly zero; λ therefore defaults to
//! b^{1−ε} with a small ε, which keeps (B3) strictly positive for
//! increasing b while leaving (B2), (B4) and (B5) intact.

use crate::error::{FinslerError, Result};

/// Exponent shaving applied to the default λ = b^{1−ε} of the corollary
/// construction.
pub const LAMBDA_EPS: f64 = 1e-3;

/// Slack for the non-strict condition comparisons (B4, B5 evaluate to exact
/// zero for the corollary construction up to floating-point cancellation).
pub const CONDITION_SLACK: f64 = 1e-9;

/// Adaptive Simpson quadrature with certified tolerance.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

const QUAD_TOL: f64 = 1e-10;

/// Generator b(t) for the integral constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// b = t²
    TSquared,
    /// b = t^p, p > 0
    Power(f64),
    /// b = θ t
    Linear(f64),
    /// b = sinh t
    Sinh,
}

impl Generator {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Generator::TSquared => t * t,
            Generator::Power(p) => t.powf(*p),
            Generator::Linear(th) => th * t,
            Generator::Sinh => t.sinh(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Generator::TSquared => 2.0 * t,
            Generator::Power(p) => p * t.powf(p - 1.0),
            Generator::Linear(th) => *th,
            Generator::Sinh => t.cosh(),
        }
    }

    pub fn log_deriv(&self, t: f64) -> f64 {
        self.deriv(t) / self.eval(t)
    }

    pub fn name(&self) -> String {
        match self {
            Generator::TSquared => "t^2".into(),
            Generator::Power(p) => format!("t^{p}"),
            Generator::Linear(th) => format!("{th}*t"),
            Generator::Sinh => "sinh(t)".into(),
        }
    }
}

/// Concrete bound-function families.
#[derive(Debug, Clone)]
pub enum BoundKind {
    /// Corollary construction from a generator b with K < 0.
    Corollary { b: Generator },
    /// First explicit preset: b = (1 − θKt) t^{2/θ − 1}, β = 1/(1 − θKt),
    /// Ψ the closed-form right-hand side.
    RemarkTheta { theta: f64 },
    /// Hyperbolic preset: β from the sinh/cosh display, Ψ its closed form.
    RemarkSinh,
    /// Constant β = 1/θ with λ = t (flow estimate shape); Ψ holds the flow
    /// right-hand side so the static machinery can replay stationary flows.
    FlowConstantBeta {
        theta: f64,
        c1: f64,
        c2: f64,
        c3: f64,
        dim: usize,
    },
    /// β = 1/(1 + b), λ = b (flow corollary shape).
    FlowCorollary {
        b: Generator,
        c1: f64,
        c2: f64,
        c3: f64,
        dim: usize,
    },
    /// Fixed β and Ψ with λ = t; negative-test fodder.
    Constant { beta: f64, psi: f64 },
    /// β = t/(1+t), λ = t, Ψ = N/(8t): demonstration triple whose failing
    /// conditions must be pinpointed.
    RationalDemo,
}

/// The triple (β, λ, Ψ) with parameters, analytic derivatives where
/// available, and numeric fallbacks.
#[derive(Debug, Clone)]
pub struct BoundFunctionSet {
    pub kind: BoundKind,
    /// Effective dimension N ∈ [n, ∞) used in Ψ and condition (B5).
    pub n_eff: f64,
    /// Curvature lower bound K (Ric_N ≥ K).
    pub k: f64,
}

impl BoundFunctionSet {
    pub fn beta(&self, t: f64) -> f64 {
        match &self.kind {
            BoundKind::Corollary { b } => {
                let k = self.k;
                let bt = b.eval(t);
                let p = adaptive_simpson(&|s| b.eval(s) * (-2.0 * k * s).exp(), 0.0, t, QUAD_TOL);
                1.0 + 2.0 * k * p / (bt * (-2.0 * k * t).exp())
            }
            BoundKind::RemarkTheta { theta } => 1.0 / (1.0 - theta * self.k * t),
            BoundKind::RemarkSinh => {
                let a = -self.k * t;
                let sh = a.sinh();
                let ch = a.cosh();
                let denom = 1.0 + (sh * ch - self.k * t) / (sh * sh);
                1.0 / denom
            }
            BoundKind::FlowConstantBeta { theta, .. } => 1.0 / theta,
            BoundKind::FlowCorollary { b, .. } => 1.0 / (1.0 + b.eval(t)),
            BoundKind::Constant { beta, .. } => *beta,
            BoundKind::RationalDemo => t / (1.0 + t),
        }
    }

    pub fn beta_prime(&self, t: f64) -> f64 {
        match &self.kind {
            BoundKind::Corollary { b } => {
                // β' = 2K + (1−β)((ln b)' − 2K)
                let beta = self.beta(t);
                2.0 * self.k + (1.0 - beta) * (b.log_deriv(t) - 2.0 * self.k)
            }
            BoundKind::RemarkTheta { theta } => {
                let d = 1.0 - theta * self.k * t;
                theta * self.k / (d * d)
            }
            BoundKind::RemarkSinh => self.numeric_derivative(|s| self.beta(s), t),
            BoundKind::FlowConstantBeta { .. } | BoundKind::Constant { .. } => 0.0,
            BoundKind::FlowCorollary { b, .. } => {
                let d = 1.0 + b.eval(t);
                -b.deriv(t) / (d * d)
            }
            BoundKind::RationalDemo => 1.0 / ((1.0 + t) * (1.0 + t)),
        }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        match &self.kind {
            BoundKind::Corollary { b } => b.eval(t).powf(1.0 - LAMBDA_EPS),
            BoundKind::RemarkTheta { theta } => {
                let b = (1.0 - theta * self.k * t) * t.powf(2.0 / theta - 1.0);
                b.powf(1.0 - LAMBDA_EPS)
            }
            BoundKind::RemarkSinh => {
                let a = -self.k * t;
                let b = a.sinh().powi(2) + a.cosh() * a.sinh() + self.k * t;
                b.powf(1.0 - LAMBDA_EPS)
            }
            BoundKind::FlowConstantBeta { .. }
            | BoundKind::Constant { .. }
            | BoundKind::RationalDemo => t,
            BoundKind::FlowCorollary { b, .. } => b.eval(t),
        }
    }

    pub fn log_lambda_prime(&self, t: f64) -> f64 {
        match &self.kind {
            BoundKind::Corollary { b } => (1.0 - LAMBDA_EPS) * b.log_deriv(t),
            BoundKind::RemarkTheta { theta } => {
                let ld = -theta * self.k / (1.0 - theta * self.k * t) + (2.0 / theta - 1.0) / t;
                (1.0 - LAMBDA_EPS) * ld
            }
            BoundKind::RemarkSinh => {
                self.numeric_derivative(|s| self.lambda(s).ln(), t)
            }
            BoundKind::FlowConstantBeta { .. }
            | BoundKind::Constant { .. }
            | BoundKind::RationalDemo => 1.0 / t,
            BoundKind::FlowCorollary { b, .. } => b.log_deriv(t),
        }
    }

    pub fn psi(&self, t: f64) -> f64 {
        match &self.kind {
            BoundKind::Corollary { b } => {
                let q = adaptive_simpson(
                    &|s| {
                        // the integrand extends continuously to 0 for
                        // admissible generators; clamp to avoid 0/0
                        let s = s.max(1e-14);
                        let bs = b.eval(s);
                        let d = b.deriv(s);
                        d * d / (bs * self.beta(s))
                    },
                    0.0,
                    t,
                    QUAD_TOL,
                );
                self.n_eff / (8.0 * b.eval(t)) * q
            }
            BoundKind::RemarkTheta { theta } => {
                let n = self.n_eff;
                let k = self.k;
                n * (2.0 - theta).powi(2) / (16.0 * theta * (1.0 - theta) * t)
                    + n * k * k * theta * t / 4.0
                    - n * k / 2.0
            }
            BoundKind::RemarkSinh => {
                let a = -self.k * t;
                -self.n_eff * self.k / 2.0 * (1.0 / a.tanh() + 1.0)
            }
            BoundKind::FlowConstantBeta {
                c1, c2, c3, dim, ..
            }
            | BoundKind::FlowCorollary {
                c1, c2, c3, dim, ..
            } => {
                let n = *dim as f64;
                flow_rhs_core(
                    self.beta(t),
                    self.beta_prime(t),
                    self.log_lambda_prime(t),
                    n,
                    *c1,
                    *c2,
                ) + (2.0 * n * c3).sqrt()
            }
            BoundKind::Constant { psi, .. } => *psi,
            BoundKind::RationalDemo => self.n_eff / (8.0 * t),
        }
    }

    pub fn psi_prime(&self, t: f64) -> f64 {
        match &self.kind {
            BoundKind::Corollary { b } => {
                // Ψ' = −(ln b)' Ψ + N (ln b)'² / (8β)
                let ld = b.log_deriv(t);
                -ld * self.psi(t) + self.n_eff * ld * ld / (8.0 * self.beta(t))
            }
            BoundKind::RemarkTheta { theta } => {
                let n = self.n_eff;
                let k = self.k;
                -n * (2.0 - theta).powi(2) / (16.0 * theta * (1.0 - theta) * t * t)
                    + n * k * k * theta / 4.0
            }
            BoundKind::Constant { .. } => 0.0,
            BoundKind::RationalDemo => -self.n_eff / (8.0 * t * t),
            _ => self.numeric_derivative(|s| self.psi(s), t),
        }
    }

    /// Fourth-order central numeric derivative with relative step.
    pub fn numeric_derivative(&self, f: impl Fn(f64) -> f64, t: f64) -> f64 {
        let d = 1e-3 * t.max(1e-6);
        let s = [f(t - 2.0 * d), f(t - d), f(t), f(t + d), f(t + 2.0 * d)];
        crate::grid::deriv1_5pt(&s, d)
    }
}

/// Curvature part of the flow-estimate right-hand side (everything except
/// the √(2nC3) term):
/// n/(2β)((ln λ)′ − 2β′/(1−β)) + n(c1_term + β′)/(2β(1−β)) + n^{3/2}√C2/β.
/// The strict variant substitutes 2C1 for the printed C1 in `c1_term`.
pub fn flow_rhs_core(
    beta: f64,
    beta_prime: f64,
    log_lambda_prime: f64,
    n: f64,
    c1_term: f64,
    c2: f64,
) -> f64 {
    n / (2.0 * beta) * (log_lambda_prime - 2.0 * beta_prime / (1.0 - beta))
        + n * (c1_term + beta_prime) / (2.0 * beta * (1.0 - beta))
        + n.powf(1.5) * c2.sqrt() / beta
}

/// Build a static-estimate bound set, validating the construction
/// hypotheses (K < 0 for the corollary kind; b positive, increasing,
/// b(0+) = 0, b'²/b integrable near zero).
pub fn make_bounds_static(kind: BoundKind, n_eff: f64, k: f64) -> Result<BoundFunctionSet> {
    match &kind {
        BoundKind::Corollary { b } => {
            if k >= 0.0 {
                return Err(FinslerError::Domain(format!(
                    "the corollary construction needs K < 0, got {k}"
                )));
            }
            // numerical checks near zero on log-spaced samples
            let mut prev = 0.0;
            for j in (1..=12).rev() {
                let t = 2.0f64.powi(-(j as i32));
                let bt = b.eval(t);
                if !(bt > 0.0) {
                    return Err(FinslerError::Domain(format!(
                        "generator {} not positive at t={t}",
                        b.name()
                    )));
                }
                if bt < prev {
                    return Err(FinslerError::Domain(format!(
                        "generator {} not increasing near 0",
                        b.name()
                    )));
                }
                prev = bt;
            }
            if b.eval(2.0f64.powi(-12)) > 1e-2 {
                return Err(FinslerError::Domain(format!(
                    "generator {} does not vanish at 0+",
                    b.name()
                )));
            }
            // integrability of b'²/b: estimated growth exponent must be < 1
            let q = |t: f64| b.deriv(t).powi(2) / b.eval(t);
            let (t1, t2) = (1e-6, 1e-7);
            let p = (q(t2).ln() - q(t1).ln()) / (t1.ln() - t2.ln());
            if p >= 0.98 {
                return Err(FinslerError::Domain(format!(
                    "b'²/b grows like t^(-{p:.2}) near 0 for b = {}; not integrable",
                    b.name()
                )));
            }
            Ok(BoundFunctionSet { kind, n_eff, k })
        }
        BoundKind::RemarkTheta { theta } => {
            if k >= 0.0 {
                return Err(FinslerError::Domain(format!(
                    "the explicit preset needs K < 0, got {k}"
                )));
            }
            if !(*theta > 0.0 && *theta < 1.0) {
                return Err(FinslerError::Domain(format!(
                    "the explicit preset needs θ ∈ (0,1), got {theta}"
                )));
            }
            Ok(BoundFunctionSet { kind, n_eff, k })
        }
        BoundKind::RemarkSinh => {
            if k >= 0.0 {
                return Err(FinslerError::Domain(format!(
                    "the hyperbolic preset needs K < 0, got {k}"
                )));
            }
            Ok(BoundFunctionSet { kind, n_eff, k })
        }
        _ => Ok(BoundFunctionSet { kind, n_eff, k }),
    }
}

/// One evaluated condition.
#[derive(Debug, Clone)]
pub struct ConditionVerdict {
    pub name: String,
    pub pass: bool,
    /// Witness t of the first violation.
    pub witness: Option<f64>,
    /// Offending value at the witness.
    pub value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub verdicts: Vec<ConditionVerdict>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn first_failure(&self) -> Option<&ConditionVerdict> {
        self.verdicts.iter().find(|v| !v.pass)
    }
}

/// Log-spaced grid on (0, T], `count` points decreasing toward t_min.
pub fn log_spaced_grid(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let ratio: f64 = t_min / t_max;
    for j in 0..count {
        let frac = j as f64 / (count - 1) as f64;
        out.push(t_max * ratio.powf(frac));
    }
    out.reverse();
    out
}

fn scan_condition(
    name: &str,
    grid: &[f64],
    f: impl Fn(f64) -> f64,
    strict: bool,
) -> ConditionVerdict {
    for &t in grid {
        let v = f(t);
        let bad = if strict {
            !(v > 0.0)
        } else {
            v < -CONDITION_SLACK * v.abs().max(1.0)
        };
        if bad {
            return ConditionVerdict {
                name: name.into(),
                pass: false,
                witness: Some(t),
                value: Some(v),
            };
        }
    }
    ConditionVerdict {
        name: name.into(),
        pass: true,
        witness: None,
        value: None,
    }
}

/// Evaluate conditions (B1)–(B5) on a log-spaced t-grid.
pub fn check_conditions_static(bounds: &BoundFunctionSet, t_grid: &[f64]) -> ConditionReport {
    let k_minus = bounds.k.min(0.0);
    let mut verdicts = Vec::new();
    // (B1) β ∈ (0, 1)
    verdicts.push(scan_condition(
        "B1",
        t_grid,
        |t| {
            let b = bounds.beta(t);
            (b.min(1.0 - b)).min(f64::MAX)
        },
        true,
    ));
    // (B2) λ > 0 on the grid and λ(0+) = 0 (extrapolated on the smallest points)
    let mut b2 = scan_condition("B2", t_grid, |t| bounds.lambda(t), true);
    if b2.pass {
        let t_min = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let lam_max = t_grid
            .iter()
            .map(|&t| bounds.lambda(t))
            .fold(0.0f64, f64::max);
        let l1 = bounds.lambda(t_min);
        let l2 = bounds.lambda(t_min / 2.0);
        if !(l2 < l1 && l1 <= 0.1 * lam_max) {
            b2 = ConditionVerdict {
                name: "B2".into(),
                pass: false,
                witness: Some(t_min),
                value: Some(l1),
            };
        }
    }
    verdicts.push(b2);
    // (B3) (β' − 2K⁻β)/(1−β) − (ln λ)' > 0
    verdicts.push(scan_condition(
        "B3",
        t_grid,
        |t| {
            let beta = bounds.beta(t);
            (bounds.beta_prime(t) - 2.0 * k_minus * beta) / (1.0 - beta)
                - bounds.log_lambda_prime(t)
        },
        true,
    ));
    // (B4) limsup Ψ ≥ 0 toward 0+ (largest value over the smallest points)
    let mut small: Vec<f64> = t_grid.to_vec();
    small.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let probe: Vec<f64> = small.into_iter().take(10).collect();
    let best = probe
        .iter()
        .map(|&t| bounds.psi(t))
        .fold(f64::NEG_INFINITY, f64::max);
    verdicts.push(ConditionVerdict {
        name: "B4".into(),
        pass: best >= -CONDITION_SLACK * best.abs().max(1.0),
        witness: if best < 0.0 { probe.first().cloned() } else { None },
        value: Some(best),
    });
    // (B5) Ψ' + ((β'−2K⁻β)/(1−β))Ψ − N(β'−2K⁻β)²/(8β(1−β)²) ≥ 0.
    // The comparison slack scales with the magnitude of the summed terms:
    // the corollary construction makes this expression vanish identically,
    // so only cancellation noise remains.
    let mut b5 = ConditionVerdict {
        name: "B5".into(),
        pass: true,
        witness: None,
        value: None,
    };
    for &t in t_grid {
        let beta = bounds.beta(t);
        let a = bounds.beta_prime(t) - 2.0 * k_minus * beta;
        let t1 = bounds.psi_prime(t);
        let t2 = a / (1.0 - beta) * bounds.psi(t);
        let t3 = bounds.n_eff * a * a / (8.0 * beta * (1.0 - beta) * (1.0 - beta));
        let value = t1 + t2 - t3;
        let scale = t1.abs() + t2.abs() + t3.abs();
        if value < -CONDITION_SLACK * scale.max(1.0) {
            b5 = ConditionVerdict {
                name: "B5".into(),
                pass: false,
                witness: Some(t),
                value: Some(value),
            };
            break;
        }
    }
    verdicts.push(b5);
    ConditionReport { verdicts }
}

/// Evaluate conditions (C1)–(C3) on a log-spaced t-grid.
pub fn check_conditions_flow(bounds: &BoundFunctionSet, t_grid: &[f64]) -> ConditionReport {
    let mut verdicts = Vec::new();
    verdicts.push(scan_condition(
        "C1",
        t_grid,
        |t| {
            let b = bounds.beta(t);
            b.min(1.0 - b)
        },
        true,
    ));
    let mut c2 = scan_condition("C2", t_grid, |t| bounds.lambda(t), true);
    if c2.pass {
        let t_min = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let lam_max = t_grid
            .iter()
            .map(|&t| bounds.lambda(t))
            .fold(0.0f64, f64::max);
        let l1 = bounds.lambda(t_min);
        let l2 = bounds.lambda(t_min / 2.0);
        if !(l2 < l1 && l1 <= 0.1 * lam_max) {
            c2 = ConditionVerdict {
                name: "C2".into(),
                pass: false,
                witness: Some(t_min),
                value: Some(l1),
            };
        }
    }
    verdicts.push(c2);
    // (C3) 2β'/(1−β) − (ln λ)' < 0
    verdicts.push(scan_condition(
        "C3",
        t_grid,
        |t| {
            let beta = bounds.beta(t);
            -(2.0 * bounds.beta_prime(t) / (1.0 - beta) - bounds.log_lambda_prime(t))
        },
        true,
    ));
    ConditionReport { verdicts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn remark_theta_closed_form_value() {
        // n = 2, K = −1, θ = 1/2, t = 1:
        // n(2−θ)²/(16θ(1−θ)t) + nK²θt/4 − nK/2 = 1.125 + 0.25 + 1 = 2.375
        let b = make_bounds_static(BoundKind::RemarkTheta { theta: 0.5 }, 2.0, -1.0).unwrap();
        assert_relative_eq!(b.psi(1.0), 2.375, epsilon = 1e-12);
    }

    #[test]
    fn corollary_beta_matches_riemann_sum_oracle() {
        // independent oracle: midpoint Riemann sum with 1e-6 step
        let bounds =
            make_bounds_static(BoundKind::Corollary { b: Generator::TSquared }, 2.0, -1.0)
                .unwrap();
        let t = 0.7;
        let step = 1e-6;
        let steps = (t / step) as usize;
        let mut p = 0.0;
        for j in 0..steps {
            let s = (j as f64 + 0.5) * step;
            p += s * s * (2.0 * s).exp() * step;
        }
        let oracle = 1.0 - 2.0 * p / (t * t * (2.0 * t).exp());
        assert_abs_diff_eq!(bounds.beta(t), oracle, epsilon = 1e-6);
    }

    #[test]
    fn corollary_beta_tends_to_one_at_zero() {
        let bounds =
            make_bounds_static(BoundKind::Corollary { b: Generator::TSquared }, 2.0, -1.0)
                .unwrap();
        assert!((bounds.beta(1e-5) - 1.0).abs() < 1e-4);
        assert!(bounds.beta(1e-3) < 1.0);
    }

    #[test]
    fn corollary_conditions_all_pass() {
        let bounds =
            make_bounds_static(BoundKind::Corollary { b: Generator::TSquared }, 3.0, -1.0)
                .unwrap();
        let grid = log_spaced_grid(1e-5, 1.0, 200);
        let report = check_conditions_static(&bounds, &grid);
        for v in &report.verdicts {
            assert!(v.pass, "{} failed at {:?} value {:?}", v.name, v.witness, v.value);
        }
    }

    #[test]
    fn rational_demo_failures_pinpointed() {
        let bounds = make_bounds_static(BoundKind::RationalDemo, 2.0, 0.0).unwrap();
        let grid = log_spaced_grid(1e-4, 1.0, 200);
        let report = check_conditions_static(&bounds, &grid);
        let by_name = |n: &str| report.verdicts.iter().find(|v| v.name == n).unwrap();
        assert!(by_name("B1").pass);
        assert!(by_name("B2").pass);
        // B3 = −1/(t(1+t)) < 0 everywhere; B5 also fails
        assert!(!by_name("B3").pass);
        assert!(by_name("B3").witness.is_some());
        assert!(!by_name("B5").pass);
    }

    #[test]
    fn constant_beta_outside_unit_interval_fails_b1() {
        let bounds = make_bounds_static(
            BoundKind::Constant {
                beta: 1.2,
                psi: 1.0,
            },
            2.0,
            0.0,
        )
        .unwrap();
        let grid = log_spaced_grid(1e-4, 1.0, 200);
        let report = check_conditions_static(&bounds, &grid);
        assert!(!report.verdicts[0].pass);
        assert!(!report.all_pass());
    }

    #[test]
    fn flow_constant_beta_conditions_pass() {
        let bounds = make_bounds_static(
            BoundKind::FlowConstantBeta {
                theta: 2.0,
                c1: 0.5,
                c2: 0.25,
                c3: 0.1,
                dim: 2,
            },
            2.0,
            0.0,
        )
        .unwrap();
        let grid = log_spaced_grid(1e-5, 1.0, 200);
        let report = check_conditions_flow(&bounds, &grid);
        assert!(report.all_pass(), "{:?}", report.first_failure());
    }

    #[test]
    fn flow_corollary_conditions_pass() {
        let bounds = make_bounds_static(
            BoundKind::FlowCorollary {
                b: Generator::Linear(1.0),
                c1: 0.0,
                c2: 1.0,
                c3: 0.0,
                dim: 2,
            },
            2.0,
            0.0,
        )
        .unwrap();
        let grid = log_spaced_grid(1e-5, 1.0, 200);
        let report = check_conditions_flow(&bounds, &grid);
        assert!(report.all_pass(), "{:?}", report.first_failure());
    }

    #[test]
    fn corollary_rejects_bad_parameters() {
        assert!(matches!(
            make_bounds_static(BoundKind::Corollary { b: Generator::TSquared }, 2.0, 0.1),
            Err(FinslerError::Domain(_))
        ));
        // b = √t: b'²/b ~ t^{-3/2}, not integrable
        assert!(matches!(
            make_bounds_static(BoundKind::Corollary { b: Generator::Power(0.5) }, 2.0, -1.0),
            Err(FinslerError::Domain(_))
        ));
        // b = t^1.5 is fine
        assert!(make_bounds_static(
            BoundKind::Corollary {
                b: Generator::Power(1.5)
            },
            2.0,
            -1.0
        )
        .is_ok());
    }

    #[test]
    fn derivative_consistency_analytic_vs_numeric() {
        let sets = [
            make_bounds_static(BoundKind::Corollary { b: Generator::TSquared }, 2.0, -1.0)
                .unwrap(),
            make_bounds_static(BoundKind::RemarkTheta { theta: 0.5 }, 2.0, -1.0).unwrap(),
        ];
        for bounds in &sets {
            for &t in &[0.17, 0.5, 0.83] {
                let num_beta = bounds.numeric_derivative(|s| bounds.beta(s), t);
                assert_abs_diff_eq!(bounds.beta_prime(t), num_beta, epsilon = 1e-6);
                let num_psi = bounds.numeric_derivative(|s| bounds.psi(s), t);
                assert_abs_diff_eq!(bounds.psi_prime(t), num_psi, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn adaptive_simpson_certified() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert_relative_eq!(v, 1.0f64.exp() - 1.0, epsilon = 1e-11);
    }

    #[test]
    fn log_spaced_grid_shape() {
        let g = log_spaced_grid(1e-6, 2.0, 200);
        assert_eq!(g.len(), 200);
        assert_relative_eq!(g[199], 2.0);
        assert_relative_eq!(g[0], 1e-6, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}

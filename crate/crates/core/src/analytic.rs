//! Closed-form periodic scalar functions used as metric and field parameters.
//!
//! Every spatially varying parameter (conformal factor, log of diagonal
//! metric entries, Randers one-form components, custom densities) is a
//! trigonometric polynomial, so exact x-derivatives of any order are
//! available wherever the geometry needs them.

use crate::linalg::{Mat3, Vec3, ZERO_MAT, ZERO_VEC};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One cosine mode: `amplitude * cos(2π <wave, x> / period + phase)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrigMode {
    pub amplitude: f64,
    pub wave: [i32; 3],
    #[serde(default)]
    pub phase: f64,
}

/// `constant + Σ modes`, periodic with the grid period.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct TrigScalar {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<TrigMode>,
}

impl TrigScalar {
    pub fn constant(c: f64) -> Self {
        TrigScalar {
            constant: c,
            modes: Vec::new(),
        }
    }

    pub fn single(c: f64, amplitude: f64, wave: [i32; 3], phase: f64) -> Self {
        TrigScalar {
            constant: c,
            modes: vec![TrigMode {
                amplitude,
                wave,
                phase,
            }],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn eval(&self, x: &Vec3, period: f64) -> f64 {
        let mut v = self.constant;
        for m in &self.modes {
            v += m.amplitude * (phase_arg(m, x, period)).cos();
        }
        v
    }

    pub fn grad(&self, x: &Vec3, period: f64) -> Vec3 {
        let mut g = ZERO_VEC;
        for m in &self.modes {
            let a = phase_arg(m, x, period);
            let s = -m.amplitude * a.sin();
            for ax in 0..3 {
                g[ax] += s * TAU * m.wave[ax] as f64 / period;
            }
        }
        g
    }

    pub fn hessian(&self, x: &Vec3, period: f64) -> Mat3 {
        let mut h = ZERO_MAT;
        for m in &self.modes {
            let a = phase_arg(m, x, period);
            let c = -m.amplitude * a.cos();
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] +=
                        c * (TAU * m.wave[i] as f64 / period) * (TAU * m.wave[j] as f64 / period);
                }
            }
        }
        h
    }

    /// Flat Laplacian Σ ∂²/∂x_i², exact.
    pub fn laplacian(&self, x: &Vec3, period: f64) -> f64 {
        let h = self.hessian(x, period);
        h[0][0] + h[1][1] + h[2][2]
    }
}

fn phase_arg(m: &TrigMode, x: &Vec3, period: f64) -> f64 {
    let mut k_dot_x = 0.0;
    for ax in 0..3 {
        k_dot_x += m.wave[ax] as f64 * x[ax];
    }
    TAU * k_dot_x / period + m.phase
}

//! Logarithmic potential `φ = (1/2π) ln|·| * H` of a cell-wise constant
//! source.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant field on the cells of a rectangular grid; zero
/// outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `(xs.len()-1)·(ys.len()-1)` values, x fastest
    pub v: Vec<f64>,
}

impl CellField {
    pub fn check(&self) -> Result<()> {
        if self.xs.len() < 2
            || self.ys.len() < 2
            || self.v.len() != (self.xs.len() - 1) * (self.ys.len() - 1)
        {
            return Err(Error::Shape("cell field arrays".into()));
        }
        Ok(())
    }

    pub fn integral(&self) -> f64 {
        let nx = self.xs.len() - 1;
        let mut acc = crate::sum::Accum::default();
        for (id, v) in self.v.iter().enumerate() {
            let (i, j) = (id % nx, id / nx);
            acc.add(v * (self.xs[i + 1] - self.xs[i]) * (self.ys[j + 1] - self.ys[j]));
        }
        acc.value()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub phi: f64,
    pub grad: [f64; 2],
}

/// Cells closer than this many cell sizes use the exact rectangle integral.
const NEAR: f64 = 6.0;

#[inline]
fn xatan(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (y / x).atan()
    }
}

#[inline]
fn ylnr(y: f64, r2: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        0.5 * y * r2.ln()
    }
}

/// Antiderivative `G` with `∂²G/∂X∂Y = ln√(X²+Y²)`.
pub fn log_antiderivative(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let xy = if r2 == 0.0 {
        0.0
    } else {
        x * y * (r2.ln() - 3.0)
    };
    0.5 * (xy + x * xatan(x, y) + y * xatan(y, x))
}

/// `∂G/∂X = Y ln r − Y + X atan(Y/X)`
#[inline]
fn g_x(x: f64, y: f64) -> f64 {
    ylnr(y, x * x + y * y) - y + xatan(x, y)
}

/// `∫∫_{[a0,a1]×[b0,b1]} ln|p − y| dy` and its gradient in `p`.
pub fn rect_log_integral(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, [f64; 2]) {
    let (x1, x2) = (p[0] - a[1], p[0] - a[0]);
    let (y1, y2) = (p[1] - b[1], p[1] - b[0]);
    let g = log_antiderivative;
    let val = g(x2, y2) - g(x1, y2) - g(x2, y1) + g(x1, y1);
    let dx = g_x(x2, y2) - g_x(x1, y2) - g_x(x2, y1) + g_x(x1, y1);
    // ∂G/∂Y is g_x with the roles of X and Y swapped
    let dy = g_x(y2, x2) - g_x(y2, x1) - g_x(y1, x2) + g_x(y1, x1);
    (val, [dx, dy])
}

/// `φ` and `∇φ` at each point. Near cells (including the one containing the
/// point) are integrated exactly; far cells use the midpoint rule with the
/// second-order correction for non-square cells.
pub fn newtonian_potential(h: &CellField, points: &[[f64; 2]]) -> Result<Vec<PotentialSample>> {
    h.check()?;
    let nx = h.xs.len() - 1;
    let cells: Vec<(usize, usize, f64)> =
        h.v.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(id, v)| (id % nx, id / nx, *v))
            .collect();
    let c = 1.0 / (2.0 * PI);
    Ok(points
        .par_iter()
        .map(|&p| {
            let (mut phi, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for &(i, j, v) in &cells {
                let (a0, a1) = (h.xs[i], h.xs[i + 1]);
                let (b0, b1) = (h.ys[j], h.ys[j + 1]);
                let (wa, wb) = (a1 - a0, b1 - b0);
                let dx = p[0] - 0.5 * (a0 + a1);
                let dy = p[1] - 0.5 * (b0 + b1);
                let r2 = dx * dx + dy * dy;
                let size = wa.max(wb);
                if r2 < NEAR * NEAR * size * size {
                    let (val, g) = rect_log_integral(p, [a0, a1], [b0, b1]);
                    phi += v * val;
                    gx += v * g[0];
                    gy += v * g[1];
                } else {
                    let area = wa * wb;
                    // ∂xx ln r = (dy² − dx²)/r⁴ = −∂yy ln r
                    let corr = (wa * wa - wb * wb) / 24.0 * (dy * dy - dx * dx) / (r2 * r2);
                    phi += v * area * (0.5 * r2.ln() + corr);
                    gx += v * area * dx / r2;
                    gy += v * area * dy / r2;
                }
            }
            PotentialSample {
                phi: c * phi,
                grad: [c * gx, c * gy],
            }
        })
        .collect())
}

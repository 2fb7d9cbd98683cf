//! Square vortex lattice, its field `h_ε` and the core profile `ρ_ε`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bessel::k0_k1;
use crate::domain::PlaneGrid;
use crate::error::{invalid, Error, Result};

/// `(1/2π)K₀(r)`, the free-space kernel of `−Δ + 1` in the plane.
///
/// The Bessel routine is accurate to a few ulps; `tol` only enables the
/// shortcut of returning 0 once the bound `√(π/2r)e^{−r}/2π` drops below it.
pub fn yukawa_green(r: f64, tol: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Argument(format!(
            "yukawa_green needs r > 0, got {r}"
        )));
    }
    if tol > 0.0 && r > 1.0 && (PI / (2.0 * r)).sqrt() * (-r).exp() / (2.0 * PI) < tol {
        return Ok(0.0);
    }
    Ok(k0_k1(r).0 / (2.0 * PI))
}

/// The lattice `x₀ + (1/θ)ℤ²` with `θ = √(h_ex/2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub theta: f64,
    pub cell: f64,
    pub x0: [f64; 2],
    pub omega_extent: [f64; 2],
    /// lattice points in Ω padded by one cell on every side
    pub points: Vec<[f64; 2]>,
}

impl LatticeSpec {
    pub fn new(h_ex: f64, omega_extent: [f64; 2], x0: [f64; 2]) -> Result<Self> {
        if !(h_ex > 0.0 && h_ex.is_finite()) {
            return Err(invalid("h_ex", "the vortex lattice needs h_ex > 0"));
        }
        let theta = (h_ex / (2.0 * PI)).sqrt();
        let cell = 1.0 / theta;
        if x0.iter().any(|&c| !(c.abs() < 0.5 * cell)) {
            return Err(invalid(
                "x0",
                format!("translation {x0:?} outside (-{0}, {0})^2", 0.5 * cell),
            ));
        }
        let mut points = Vec::new();
        let range = |w: f64, o: f64| {
            let lo = ((-cell - o) / cell).ceil() as i64;
            let hi = ((w + cell - o) / cell).floor() as i64;
            lo..=hi
        };
        for j in range(omega_extent[1], x0[1]) {
            for i in range(omega_extent[0], x0[0]) {
                points.push([x0[0] + i as f64 * cell, x0[1] + j as f64 * cell]);
            }
        }
        Ok(LatticeSpec {
            theta,
            cell,
            x0,
            omega_extent,
            points,
        })
    }

    /// `|K_ε| = (1/θ)²`
    pub fn k_area(&self) -> f64 {
        self.cell * self.cell
    }

    /// Lattice points inside the closed cross-section.
    pub fn points_in_omega(&self) -> Vec<[f64; 2]> {
        let [wx, wy] = self.omega_extent;
        self.points
            .iter()
            .copied()
            .filter(|b| b[0] >= 0.0 && b[0] <= wx && b[1] >= 0.0 && b[1] <= wy)
            .collect()
    }

    /// Nearest lattice point (over the whole infinite lattice).
    pub fn nearest(&self, p: [f64; 2]) -> [f64; 2] {
        let n0 = ((p[0] - self.x0[0]) / self.cell).round();
        let n1 = ((p[1] - self.x0[1]) / self.cell).round();
        [self.x0[0] + n0 * self.cell, self.x0[1] + n1 * self.cell]
    }

    /// Radius beyond which the neglected part of `Σ K₀(|x−b|)` is below `tol`.
    ///
    /// Each point owns a square of area `1/θ²`; with `δ` its half diagonal
    /// the tail is at most `2πθ²[(R−2δ)K₁(R−2δ) + δK₀(R−2δ)]`.
    pub fn truncation_radius(&self, tol: f64) -> f64 {
        let th2 = self.theta * self.theta;
        let delta = self.cell / 2f64.sqrt();
        let mut r = 2.0 * delta + 0.25;
        loop {
            let x = r - 2.0 * delta;
            let (k0, k1) = k0_k1(x);
            if 2.0 * PI * th2 * (x * k1 + delta * k0) < tol || r > 1e4 {
                return r;
            }
            r += 0.25;
        }
    }

    /// Direct lattice sum `(h, ∇h)` at `p`, or `None` when `p` is a lattice
    /// point.
    pub fn direct_sum(&self, p: [f64; 2], r_cut: f64) -> Option<(f64, [f64; 2])> {
        let c = self.cell;
        let span = |q: f64, o: f64| {
            let lo = ((q - o - r_cut) / c).ceil() as i64;
            let hi = ((q - o + r_cut) / c).floor() as i64;
            lo..=hi
        };
        let (mut h, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for j in span(p[1], self.x0[1]) {
            for i in span(p[0], self.x0[0]) {
                let dx = p[0] - (self.x0[0] + i as f64 * c);
                let dy = p[1] - (self.x0[1] + j as f64 * c);
                let r = dx.hypot(dy);
                if r > r_cut {
                    continue;
                }
                if r == 0.0 {
                    return None;
                }
                let (k0, k1) = k0_k1(r);
                h += k0;
                gx -= k1 * dx / r;
                gy -= k1 * dy / r;
            }
        }
        Some((h, [gx, gy]))
    }
}

/// `h_ε = Σ_b K₀(|x − b|)` at every node of `grid` (x fastest), truncated
/// where the tail bound drops below `tol`.
pub fn lattice_field_h(grid: &PlaneGrid, spec: &LatticeSpec, tol: f64) -> Result<Vec<f64>> {
    let r_cut = spec.truncation_radius(tol);
    let nx = grid.xs.len();
    let rows: Vec<Result<Vec<f64>>> = grid
        .ys
        .par_iter()
        .map(|&y| {
            grid.xs
                .iter()
                .map(|&x| {
                    spec.direct_sum([x, y], r_cut)
                        .map(|(h, _)| h)
                        .ok_or_else(|| {
                            Error::Geometry(format!("node ({x}, {y}) sits on a lattice point"))
                        })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(nx * grid.ys.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Core profile: 0 within ε of a lattice point, `|x−b|/ε − 1` up to 2ε,
/// 1 beyond. Returns `(ρ, ∇ρ)`.
pub fn rho_at(spec: &LatticeSpec, eps: f64, p: [f64; 2]) -> (f64, [f64; 2]) {
    let b = spec.nearest(p);
    let (dx, dy) = (p[0] - b[0], p[1] - b[1]);
    let r = dx.hypot(dy);
    if r < eps {
        (0.0, [0.0, 0.0])
    } else if r <= 2.0 * eps {
        (r / eps - 1.0, [dx / (eps * r), dy / (eps * r)])
    } else {
        (1.0, [0.0, 0.0])
    }
}

pub(crate) fn check_cores(spec: &LatticeSpec, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.25 * spec.cell) {
        return Err(invalid(
            "epsilon",
            format!(
                "cores of radius 2*eps = {} overlap for lattice spacing {}",
                2.0 * eps,
                spec.cell
            ),
        ));
    }
    Ok(())
}

/// `ρ_ε` at every node of `grid`.
pub fn vortex_profile_rho(grid: &PlaneGrid, spec: &LatticeSpec, epsilon: f64) -> Result<Vec<f64>> {
    check_cores(spec, epsilon)?;
    let mut out = Vec::with_capacity(grid.n_nodes());
    for &y in &grid.ys {
        for &x in &grid.xs {
            out.push(rho_at(spec, epsilon, [x, y]).0);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// tabulated periodic field

/// `h_ε` split as `K₀(|v|) + S(v)` with `v = x − b` for the nearest lattice
/// point `b`. The remainder `S` is smooth on the Voronoi cell and the same for
/// every translation, so it is tabulated once (values, first and mixed
/// derivatives) and evaluated by bicubic Hermite interpolation.
#[derive(Clone, Debug)]
pub(crate) struct PeriodicField {
    cell: f64,
    m: usize,
    step: f64,
    nodes: Vec<[f64; 4]>,
    pub(crate) r_cut: f64,
}

impl PeriodicField {
    pub(crate) fn new(spec: &LatticeSpec, intervals: usize, tol: f64) -> Self {
        let cell = spec.cell;
        let r_cut = spec.truncation_radius(tol);
        let m = intervals.max(4);
        let step = cell / m as f64;
        let reach = ((r_cut + cell) / cell).ceil() as i64;
        let nodes: Vec<[f64; 4]> = (0..(m + 1) * (m + 1))
            .into_par_iter()
            .map(|id| {
                let (a, b) = (id % (m + 1), id / (m + 1));
                let v = [-0.5 * cell + a as f64 * step, -0.5 * cell + b as f64 * step];
                let mut acc = [0.0; 4];
                for j in -reach..=reach {
                    for i in -reach..=reach {
                        if i == 0 && j == 0 {
                            continue;
                        }
                        let dx = v[0] - i as f64 * cell;
                        let dy = v[1] - j as f64 * cell;
                        let r = dx.hypot(dy);
                        if r > r_cut {
                            continue;
                        }
                        let (k0, k1) = k0_k1(r);
                        acc[0] += k0;
                        acc[1] -= k1 * dx / r;
                        acc[2] -= k1 * dy / r;
                        acc[3] += dx * dy * (k0 + 2.0 * k1 / r) / (r * r);
                    }
                }
                acc
            })
            .collect();
        PeriodicField {
            cell,
            m,
            step,
            nodes,
            r_cut,
        }
    }

    /// `(S, ∇S)` at offset `v` from the nearest lattice point.
    fn remainder(&self, v: [f64; 2]) -> (f64, [f64; 2]) {
        let m = self.m;
        let locate = |c: f64| {
            let t = (c + 0.5 * self.cell) / self.step;
            let a = (t.floor().max(0.0) as usize).min(m - 1);
            (a, t - a as f64)
        };
        let (a, t) = locate(v[0]);
        let (b, u) = locate(v[1]);
        let hs = self.step;
        let basis = |t: f64| {
            let (t2, t3) = (t * t, t * t * t);
            (
                [2.0 * t3 - 3.0 * t2 + 1.0, -2.0 * t3 + 3.0 * t2],
                [hs * (t3 - 2.0 * t2 + t), hs * (t3 - t2)],
                [6.0 * t2 - 6.0 * t, -6.0 * t2 + 6.0 * t],
                [3.0 * t2 - 4.0 * t + 1.0, 3.0 * t2 - 2.0 * t],
            )
        };
        let (pt, qt, dpt, dqt) = basis(t);
        let (pu, qu, dpu, dqu) = basis(u);
        let (mut f, mut fx, mut fy) = (0.0, 0.0, 0.0);
        for (ia, (&p_a, (&q_a, (&dp_a, &dq_a)))) in pt
            .iter()
            .zip(qt.iter().zip(dpt.iter().zip(dqt.iter())))
            .enumerate()
        {
            for (ib, (&p_b, (&q_b, (&dp_b, &dq_b)))) in pu
                .iter()
                .zip(qu.iter().zip(dpu.iter().zip(dqu.iter())))
                .enumerate()
            {
                let n = self.nodes[(b + ib) * (m + 1) + a + ia];
                f += n[0] * p_a * p_b + n[1] * q_a * p_b + n[2] * p_a * q_b + n[3] * q_a * q_b;
                // d/dx: value basis derivative is dp/hs, slope basis derivative is dq
                fx += n[0] * dp_a / hs * p_b
                    + n[1] * dq_a * p_b
                    + n[2] * dp_a / hs * q_b
                    + n[3] * dq_a * q_b;
                fy += n[0] * p_a * dp_b / hs
                    + n[1] * q_a * dp_b / hs
                    + n[2] * p_a * dq_b
                    + n[3] * q_a * dq_b;
            }
        }
        (f, [fx, fy])
    }

    /// `(h, ∇h, |v|)` at `p`; the distance to the nearest lattice point is
    /// floored at `1e-12·cell`.
    pub(crate) fn eval(&self, spec: &LatticeSpec, p: [f64; 2]) -> (f64, [f64; 2], f64) {
        let b = spec.nearest(p);
        let v = [p[0] - b[0], p[1] - b[1]];
        let (s, gs) = self.remainder(v);
        let r = v[0].hypot(v[1]).max(1e-12 * self.cell);
        let (k0, k1) = k0_k1(r);
        (k0 + s, [gs[0] - k1 * v[0] / r, gs[1] - k1 * v[1] / r], r)
    }
}

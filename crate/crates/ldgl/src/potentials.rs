//! Layer supercurrents, single-layer potentials `S_k` with kernel
//! `−1/(4π|x−Q|)`, nontangential maximal functions and the interlayer
//! deviation of the in-plane field.
//!
//! Densities live on the nodes of the Ω grid; each node carries the
//! rectangle of its dual cell clipped to Ω and the potential of a constant
//! density over a rectangle is integrated in closed form. The discrete
//! potential is therefore an exact sum of harmonic functions off the layer.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, PlaneGrid};
use crate::error::{invalid, Error, Result};
use crate::fields::{curl3_at, LayeredConfiguration, C64};
use crate::sum::Accum;

/// `c` in `S_k(g)(x) = ∫ c g(Q)/|x − Q| dσ(Q)`.
pub const KERNEL_C: f64 = -1.0 / (4.0 * PI);

/// In-plane supercurrents of each layer and the Josephson current of each
/// gap.
///
/// Link values are `J = −s·Im(ū_t u_h e^{−iℓa})/ℓ`, the gauge-invariant
/// lattice form of `s(∂_i u − iA^i u, −iu)`; node values average the
/// adjacent links of the same direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDensity {
    pub nx: usize,
    pub ny: usize,
    pub h1_links: Vec<Vec<f64>>,
    pub h2_links: Vec<Vec<f64>>,
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
    /// `−Im(ū_n u_{n+1} e^{−iΦ})/(λ²s)` per gap, at Ω nodes
    pub j3: Vec<Vec<f64>>,
}

pub fn supercurrent_density(dom: &Domain, state: &LayeredConfiguration) -> Result<LayerDensity> {
    state.check(dom)?;
    let (nx, ny) = (dom.nx, dom.ny);
    let (hx, hy) = (dom.hx, dom.hy);
    let s = dom.params.s;
    let p = &state.pot;
    let mut out = LayerDensity {
        nx,
        ny,
        h1_links: Vec::new(),
        h2_links: Vec::new(),
        h1: Vec::new(),
        h2: Vec::new(),
        j3: Vec::new(),
    };
    for (n, u) in state.layers.u.iter().enumerate() {
        let k = dom.layer_k[n];
        let mut jx = vec![0.0; (nx - 1) * ny];
        let mut jy = vec![0.0; nx * (ny - 1)];
        for j in 0..ny {
            for i in 0..nx - 1 {
                let a = p.a1[p.i1(dom.ix0 + i, dom.iy0 + j, k)];
                let w = u[j * nx + i].conj() * u[j * nx + i + 1] * C64::from_polar(1.0, -hx * a);
                jx[j * (nx - 1) + i] = -s * w.im / hx;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let a = p.a2[p.i2(dom.ix0 + i, dom.iy0 + j, k)];
                let w = u[j * nx + i].conj() * u[(j + 1) * nx + i] * C64::from_polar(1.0, -hy * a);
                jy[j * nx + i] = -s * w.im / hy;
            }
        }
        out.h1.push(links_to_nodes_x(&jx, nx, ny));
        out.h2.push(links_to_nodes_y(&jy, nx, ny));
        out.h1_links.push(jx);
        out.h2_links.push(jy);
    }
    let lam2 = dom.params.lambda * dom.params.lambda;
    for n in 0..dom.n_layers() {
        let phase = crate::fields::vertical_link_phase(dom, p, n)?;
        let (u0, u1) = (&state.layers.u[n], &state.layers.u[n + 1]);
        out.j3.push(
            (0..nx * ny)
                .map(|t| -(u0[t].conj() * u1[t] * C64::from_polar(1.0, -phase[t])).im / (lam2 * s))
                .collect(),
        );
    }
    Ok(out)
}

fn links_to_nodes_x(v: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let l = (i > 0).then(|| v[j * (nx - 1) + i - 1]);
            let r = (i + 1 < nx).then(|| v[j * (nx - 1) + i]);
            out[j * nx + i] = match (l, r) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
        }
    }
    out
}

fn links_to_nodes_y(v: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let d = (j > 0).then(|| v[(j - 1) * nx + i]);
            let u = (j + 1 < ny).then(|| v[j * nx + i]);
            out[j * nx + i] = match (d, u) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
        }
    }
    out
}

/// A density on the Ω nodes of one layer plane `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSource {
    pub grid: PlaneGrid,
    pub z: f64,
    pub values: Vec<f64>,
}

impl LayerSource {
    pub fn new(grid: PlaneGrid, z: f64, values: Vec<f64>) -> Result<Self> {
        if grid.is_padded() || values.len() != grid.n_nodes() {
            return Err(Error::Shape(
                "layer density must live on the Ω nodes".into(),
            ));
        }
        Ok(LayerSource { grid, z, values })
    }

    /// Dual rectangles of the nodes, clipped to Ω, with their values.
    fn cells(&self) -> Vec<([f64; 2], [f64; 2], f64)> {
        let g = &self.grid;
        let dual = |xs: &[f64], i: usize| {
            let lo = if i == 0 {
                xs[0]
            } else {
                0.5 * (xs[i - 1] + xs[i])
            };
            let hi = if i + 1 == xs.len() {
                xs[i]
            } else {
                0.5 * (xs[i] + xs[i + 1])
            };
            [lo, hi]
        };
        let mut v = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let val = self.values[j * g.nx + i];
                if val != 0.0 {
                    v.push((dual(&g.xs, i), dual(&g.ys, j), val));
                }
            }
        }
        v
    }

    /// `∫ density` with the same quadrature as the potential.
    pub fn integral(&self) -> f64 {
        crate::sum::sum(
            self.cells()
                .iter()
                .map(|(a, b, v)| v * (a[1] - a[0]) * (b[1] - b[0])),
        )
    }

    pub fn l2_norm(&self) -> f64 {
        crate::sum::sum(
            self.cells()
                .iter()
                .map(|(a, b, v)| v * v * (a[1] - a[0]) * (b[1] - b[0])),
        )
        .sqrt()
    }
}

/// `ln(y + √(x²+y²+δ²))` without cancellation for negative `y`.
#[inline]
fn ln_y_plus_r(y: f64, q: f64, r: f64) -> f64 {
    if y >= 0.0 {
        (y + r).ln()
    } else {
        (q / (r - y)).ln()
    }
}

/// Antiderivative of `1/√(X²+Y²+δ²)` in `X` and `Y`.
fn inv_r_antiderivative(x: f64, y: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    let r = (x * x + y * y + d2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let t1 = if x == 0.0 {
        0.0
    } else {
        x * ln_y_plus_r(y, x * x + d2, r)
    };
    let t2 = if y == 0.0 {
        0.0
    } else {
        y * ln_y_plus_r(x, y * y + d2, r)
    };
    let t3 = if delta == 0.0 {
        0.0
    } else {
        delta * (x * y / (delta * r)).atan()
    };
    t1 + t2 - t3
}

/// `∫∫_{[a0,a1]×[b0,b1]} dy/√(|p̂ − y|² + δ²)`.
pub fn rect_inv_r_integral(p: [f64; 2], a: [f64; 2], b: [f64; 2], delta: f64) -> f64 {
    let d = delta.abs();
    let (x1, x2) = (p[0] - a[1], p[0] - a[0]);
    let (y1, y2) = (p[1] - b[1], p[1] - b[0]);
    let f = |x, y| inv_r_antiderivative(x, y, d);
    f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1)
}

/// `S_k` of a layer density at 3-D points. Points on the layer plane are
/// only accepted with `on_layer`, in which case the trace is returned.
pub fn single_layer_potential(
    src: &LayerSource,
    points: &[[f64; 3]],
    on_layer: bool,
) -> Result<Vec<f64>> {
    if !on_layer {
        if let Some(p) = points.iter().find(|p| p[2] == src.z) {
            return Err(Error::Argument(format!(
                "point {p:?} lies on the layer; request the trace with on_layer"
            )));
        }
    }
    let cells = src.cells();
    Ok(points
        .par_iter()
        .map(|p| {
            let delta = p[2] - src.z;
            let mut acc = 0.0;
            for (a, b, v) in &cells {
                acc += v * rect_inv_r_integral([p[0], p[1]], *a, *b, delta);
            }
            KERNEL_C * acc
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeOrientation {
    Up,
    Down,
    Both,
}

/// Cone `{|x| < R, |x₃| > |x| cos θ}` and its sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub theta: f64,
    pub radius: f64,
    pub orientation: ConeOrientation,
    /// radial and angular samples at density level 0
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for ConeSpec {
    fn default() -> Self {
        ConeSpec {
            theta: PI / 4.0,
            radius: 1.0,
            orientation: ConeOrientation::Both,
            n_radial: 16,
            n_angular: 8,
        }
    }
}

impl ConeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 0.5 * PI) {
            return Err(invalid("cone.theta", "need 0 < theta < pi/2"));
        }
        if !(self.radius > 0.0) || self.n_radial < 1 || self.n_angular < 1 {
            return Err(invalid("cone", "radius and sample counts must be positive"));
        }
        Ok(())
    }

    /// Offsets of the sample points at density `level`. Each level refines
    /// the previous one by halving every spacing, so the sets are nested.
    pub fn offsets(&self, level: u32) -> Vec<[f64; 3]> {
        let m = 1usize << level;
        let nr = self.n_radial * m;
        let na = self.n_angular * m;
        let signs: &[f64] = match self.orientation {
            ConeOrientation::Up => &[1.0],
            ConeOrientation::Down => &[-1.0],
            ConeOrientation::Both => &[1.0, -1.0],
        };
        let mut v = Vec::new();
        for &sg in signs {
            for jr in 1..nr {
                let r = jr as f64 * self.radius / nr as f64;
                // polar angle 0 is the axis: one sample
                v.push([0.0, 0.0, sg * r]);
                for mp in 1..na {
                    let pol = mp as f64 * self.theta / na as f64;
                    for q in 0..na {
                        let az = 2.0 * PI * q as f64 / na as f64;
                        v.push([
                            r * pol.sin() * az.cos(),
                            r * pol.sin() * az.sin(),
                            sg * r * pol.cos(),
                        ]);
                    }
                }
            }
        }
        v
    }
}

/// `u*(x̂) = sup |u|` over the sampled cone at `(x̂, z)` for each node of
/// `grid`. `bounds` is the box the sampler is defined on.
pub fn nontangential_maximal(
    sampler: &(dyn Fn(&[[f64; 3]]) -> Vec<f64> + Sync),
    bounds: [[f64; 2]; 3],
    grid: &PlaneGrid,
    z: f64,
    cone: &ConeSpec,
    level: u32,
) -> Result<Vec<f64>> {
    cone.validate()?;
    let offs = cone.offsets(level);
    let mut out = Vec::with_capacity(grid.n_nodes());
    for &y in &grid.ys {
        for &x in &grid.xs {
            let pts: Vec<[f64; 3]> = offs
                .iter()
                .map(|o| [x + o[0], y + o[1], z + o[2]])
                .collect();
            for p in &pts {
                for a in 0..3 {
                    if p[a] < bounds[a][0] || p[a] > bounds[a][1] {
                        return Err(Error::Geometry(format!(
                            "cone at ({x}, {y}, {z}) leaves the sampling box"
                        )));
                    }
                }
            }
            let vals = sampler(&pts);
            out.push(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    Ok(out)
}

/// Per layer, `‖Â_n − h_ex â_n − t_n − Σ_{k≠n} S_k(g_k)(·, ns)‖_{L²(Ω)}`
/// over both in-plane components.
pub fn representation_residual(dom: &Domain, state: &LayeredConfiguration) -> Result<Vec<f64>> {
    let dens = supercurrent_density(dom, state)?;
    let grid = dom.omega_plane();
    let (nx, ny) = (dom.nx, dom.ny);
    let heights = dom.layer_heights();
    let p = &state.pot;
    let h_ex = p.h_ex;
    let mut sources = Vec::new();
    for n in 0..=dom.n_layers() {
        sources.push([
            LayerSource::new(grid.clone(), heights[n], dens.h1[n].clone())?,
            LayerSource::new(grid.clone(), heights[n], dens.h2[n].clone())?,
        ]);
    }
    let mut out = Vec::with_capacity(sources.len());
    for n in 0..=dom.n_layers() {
        let k = dom.layer_k[n];
        let z = heights[n];
        let pts: Vec<[f64; 3]> = (0..nx * ny)
            .map(|id| [grid.xs[id % nx], grid.ys[id / nx], z])
            .collect();
        // deviation of the links from the background, moved to nodes
        let mut dx = vec![0.0; (nx - 1) * ny];
        for j in 0..ny {
            for i in 0..nx - 1 {
                dx[j * (nx - 1) + i] = p.a1[p.i1(dom.ix0 + i, dom.iy0 + j, k)];
            }
        }
        let mut dy = vec![0.0; nx * (ny - 1)];
        for j in 0..ny - 1 {
            for i in 0..nx {
                dy[j * nx + i] = p.a2[p.i2(dom.ix0 + i, dom.iy0 + j, k)] - h_ex * grid.xs[i];
            }
        }
        let mut resid = [links_to_nodes_x(&dx, nx, ny), links_to_nodes_y(&dy, nx, ny)];
        for src in &sources {
            for c in 0..2 {
                if src[c].values.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let vals = single_layer_potential(&src[c], &pts, true)?;
                for (r, v) in resid[c].iter_mut().zip(vals) {
                    *r -= v;
                }
            }
        }
        let mut acc = Accum::default();
        for c in 0..2 {
            for j in 0..ny {
                for i in 0..nx {
                    let r = resid[c][j * nx + i];
                    acc.add(dom.wx[i] * dom.wy[j] * r * r);
                }
            }
        }
        out.push(acc.value().sqrt());
    }
    Ok(out)
}

/// `½Σ_n ∫_{ns}^{(n+1)s}∫_Ω |curl Â(·,x₃) − curl Â_n|²`, with the plaquette
/// curl linear in `x₃` between grid planes.
pub fn trace_deviation(dom: &Domain, state: &LayeredConfiguration) -> Result<f64> {
    state.check(dom)?;
    let p = &state.pot;
    let mut acc = Accum::default();
    for n in 0..dom.n_layers() {
        let (k0, k1) = (dom.layer_k[n], dom.layer_k[n + 1]);
        for j in 0..dom.ny - 1 {
            for i in 0..dom.nx - 1 {
                let (bi, bj) = (dom.ix0 + i, dom.iy0 + j);
                let base = curl3_at(dom, p, bi, bj, k0);
                let area = dom.hx * dom.hy;
                for k in k0..k1 {
                    let fa = curl3_at(dom, p, bi, bj, k) - base;
                    let fb = curl3_at(dom, p, bi, bj, k + 1) - base;
                    acc.add(0.5 * area * dom.cell_z[k] * (fa * fa + fa * fb + fb * fb) / 3.0);
                }
            }
        }
    }
    Ok(acc.value())
}

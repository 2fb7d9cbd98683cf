//! Vortex-lattice test configuration used for energy upper bounds.
//!
//! The configuration has equal layers `v_n = ρ_ε e^{iχ}` built on the square
//! lattice field `h_ε`, and a potential `B = h_ex a + η(x₃)ξ(x̂)∇^⊥φ` with `φ`
//! the logarithmic potential of `H = (h_ε − h_ex)χ_Ω`. Its energy splits into
//! the slab part `I₁` and the two cutoff slabs `I₂`, `I₃`; these are evaluated
//! semi-analytically on fine quadratures, and the configuration is also
//! assembled on the box grid and evaluated with the discrete LD energy.

pub mod bessel;
mod lattice;
mod newton;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lattice::{lattice_field_h, rho_at, vortex_profile_rho, yukawa_green, LatticeSpec};
pub use newton::{
    log_antiderivative, newtonian_potential, rect_log_integral, CellField, PotentialSample,
};

use crate::domain::{build_domain, Domain, ModelParams, PlaneGrid};
use crate::energy::{ld_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::fields::{
    plane_links_omega, LayerStack, LayeredConfiguration, PlaneLinks, Potential3D, C64,
};
use crate::linalg::pcg;
use crate::sum::Accum;
use lattice::{check_cores, PeriodicField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructionOptions {
    /// translation candidates per axis over `K_ε`
    pub candidates_per_axis: usize,
    /// skip the search and use this translation
    pub translation: Option<[f64; 2]>,
    /// sub-samples per cell and axis for the final integrals
    pub quad_order: usize,
    /// sub-samples per cell and axis while screening translations
    pub screen_order: usize,
    /// intervals per axis of the tabulated periodic remainder
    pub table_intervals: usize,
    pub lattice_tol: f64,
    /// `C` in `M_ε(1 + s/L + C/ln(1/(ε√h_ex)))`, if known
    pub bound_constant: Option<f64>,
    /// also build the 3-D configuration on the box grid
    pub assemble: bool,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        ConstructionOptions {
            candidates_per_axis: 8,
            translation: None,
            quad_order: 4,
            screen_order: 2,
            table_intervals: 64,
            lattice_tol: 1e-10,
            bound_constant: None,
            assemble: true,
        }
    }
}

/// Sampled fields of the construction.
#[derive(Clone, Debug, Default)]
pub struct ConstructionFields {
    /// Ω grid the node fields live on
    pub omega: Option<PlaneGrid>,
    pub h: Vec<f64>,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    /// `ξ` on the nodes of the box plane
    pub xi: Vec<f64>,
    pub box_xs: Vec<f64>,
    pub box_ys: Vec<f64>,
    /// `(z, η(z))` on the box planes
    pub eta: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestConstructionReport {
    pub epsilon: f64,
    pub s: f64,
    pub n_layers: usize,
    pub height: f64,
    pub h_ex: f64,
    pub d: f64,
    pub lattice: LatticeSpec,
    pub vortices_in_omega: usize,
    pub truncation_radius: f64,
    pub lattice_tol: f64,
    pub candidates: usize,
    pub candidate_energy_mean: f64,
    pub candidate_energy_min: f64,
    /// radius of the plateau of `ξ`
    pub cutoff_radius: f64,
    /// per unit area of one layer: `½∫_Ω(|∇ρ|² + ρ²|∇h|²)`
    pub kinetic: f64,
    /// `∫_Ω(1−ρ²)²/4ε²`
    pub potential: f64,
    /// `‖H‖²_{L²}`
    pub h_norm_sq: f64,
    /// `∫(∇ξ·∇φ)²`
    pub grad_xi_dot_grad_phi_sq: f64,
    /// `∫ξ²|∇φ|²`
    pub xi_grad_phi_sq: f64,
    pub eta_prime_sq_upper: f64,
    pub eta_sq_upper: f64,
    pub eta_prime_sq_lower: f64,
    pub eta_sq_lower: f64,
    pub f_eps_layer: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub total: f64,
    pub m_eps: Option<f64>,
    pub ratio: Option<f64>,
    /// `ln(1/(ε√h_ex))`
    pub log_factor: Option<f64>,
    /// smallest `C` for which the bound holds at this point
    pub c_required: Option<f64>,
    pub bound_constant: Option<f64>,
    pub bound_value: Option<f64>,
    pub bound_holds: Option<bool>,
    pub h_norm_ratio: f64,
    pub xi_phi_ratio: f64,
    pub i2_ratio: f64,
    /// discrete LD energy of the assembled box configuration
    pub assembled: Option<EnergyBreakdown>,
    #[serde(skip)]
    pub fields: ConstructionFields,
    #[serde(skip)]
    pub config: Option<LayeredConfiguration>,
}

// ---------------------------------------------------------------------------
// in-plane integrals

struct OmegaIntegrals {
    kinetic: f64,
    potential: f64,
    h_norm_sq: f64,
    /// cell averages of `H`
    h_cells: Vec<f64>,
}

fn omega_integrals(
    params: &ModelParams,
    spec: &LatticeSpec,
    table: &PeriodicField,
    q: usize,
) -> OmegaIntegrals {
    let grid = PlaneGrid::omega(params.omega_extent, params.mesh.n_x, params.mesh.n_y);
    let (ncx, ncy) = (grid.xs.len() - 1, grid.ys.len() - 1);
    let eps = params.epsilon;
    let h_ex = params.h_ex;
    let q = q.max(1);
    let rows: Vec<([Accum; 3], Vec<f64>)> = (0..ncy)
        .into_par_iter()
        .map(|j| {
            let mut acc = [Accum::default(); 3];
            let mut hc = Vec::with_capacity(ncx);
            let (y0, y1) = (grid.ys[j], grid.ys[j + 1]);
            for i in 0..ncx {
                let (x0, x1) = (grid.xs[i], grid.xs[i + 1]);
                let w = (x1 - x0) * (y1 - y0) / (q * q) as f64;
                let mut hsum = 0.0;
                for b in 0..q {
                    let y = y0 + (b as f64 + 0.5) * (y1 - y0) / q as f64;
                    for a in 0..q {
                        let x = x0 + (a as f64 + 0.5) * (x1 - x0) / q as f64;
                        let (rho, grho) = rho_at(spec, eps, [x, y]);
                        let (h, gh, _) = table.eval(spec, [x, y]);
                        let mut kin = grho[0] * grho[0] + grho[1] * grho[1];
                        if rho > 0.0 {
                            kin += rho * rho * (gh[0] * gh[0] + gh[1] * gh[1]);
                        }
                        let p = 1.0 - rho * rho;
                        acc[0].add(0.5 * w * kin);
                        acc[1].add(w * p * p / (4.0 * eps * eps));
                        acc[2].add(w * (h - h_ex) * (h - h_ex));
                        hsum += h - h_ex;
                    }
                }
                hc.push(hsum / (q * q) as f64);
            }
            (acc, hc)
        })
        .collect();
    let mut acc = [Accum::default(); 3];
    let mut h_cells = Vec::with_capacity(ncx * ncy);
    for (a, hc) in &rows {
        for c in 0..3 {
            acc[c].merge(&a[c]);
        }
        h_cells.extend_from_slice(hc);
    }
    OmegaIntegrals {
        kinetic: acc[0].value(),
        potential: acc[1].value(),
        h_norm_sq: acc[2].value(),
        h_cells,
    }
}

fn f_eps_of(params: &ModelParams, spec: &LatticeSpec, table: &PeriodicField, q: usize) -> f64 {
    let o = omega_integrals(params, spec, table, q);
    o.kinetic + o.potential + 0.5 * o.h_norm_sq
}

/// `8×8`-style candidate grid: centers of a regular subdivision of `K_ε`.
pub fn candidate_grid(h_ex: f64, per_axis: usize) -> Vec<[f64; 2]> {
    let cell = (2.0 * PI / h_ex).sqrt();
    let n = per_axis.max(1);
    let mut v = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let x = (-0.5 + (a as f64 + 0.5) / n as f64) * cell;
            let y = (-0.5 + (b as f64 + 0.5) / n as f64) * cell;
            v.push([x, y]);
        }
    }
    v
}

/// Arg-min of `energy` over the candidates; ties go to the lexicographically
/// smaller point. Returns the point and all energies.
pub fn select_translation_by(
    candidates: &[[f64; 2]],
    energy: impl Fn([f64; 2]) -> Result<f64>,
) -> Result<([f64; 2], Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Argument("no translation candidates".into()));
    }
    let mut energies = Vec::with_capacity(candidates.len());
    let mut best: Option<([f64; 2], f64)> = None;
    for &c in candidates {
        let e = energy(c)?;
        energies.push(e);
        best = match best {
            None => Some((c, e)),
            Some((bc, be)) => {
                let lex_less = c[0] < bc[0] || (c[0] == bc[0] && c[1] < bc[1]);
                if e < be || (e == be && lex_less) {
                    Some((c, e))
                } else {
                    Some((bc, be))
                }
            }
        };
    }
    Ok((best.unwrap().0, energies))
}

/// Per-layer `F_ε` of the construction for each translation.
pub fn candidate_energies(candidates: &[[f64; 2]], params: &ModelParams) -> Result<Vec<f64>> {
    select_translation_by(
        candidates,
        screening_energy(params, &ConstructionOptions::default())?,
    )
    .map(|(_, e)| e)
}

fn screening_energy<'a>(
    params: &'a ModelParams,
    opts: &ConstructionOptions,
) -> Result<impl Fn([f64; 2]) -> Result<f64> + 'a> {
    let base = LatticeSpec::new(params.h_ex, params.omega_extent, [0.0, 0.0])?;
    check_cores(&base, params.epsilon)?;
    let table = PeriodicField::new(&base, opts.table_intervals, opts.lattice_tol);
    let q = opts.screen_order;
    Ok(move |x0: [f64; 2]| {
        let spec = LatticeSpec::new(params.h_ex, params.omega_extent, x0)?;
        Ok(f_eps_of(params, &spec, &table, q))
    })
}

/// Translation minimizing the discretized per-layer `F_ε`.
pub fn select_translation(candidates: &[[f64; 2]], params: &ModelParams) -> Result<[f64; 2]> {
    let f = screening_energy(params, &ConstructionOptions::default())?;
    select_translation_by(candidates, f).map(|(c, _)| c)
}

// ---------------------------------------------------------------------------
// cutoffs

fn xi_radius(params: &ModelParams) -> f64 {
    let [wx, wy] = params.omega_extent;
    (2.0 * wx.hypot(wy)).max(1.0)
}

/// `(ξ, ∇ξ)`: 1 on `B_R`, linear down to 0 on `B_{R+1}`, around the center of Ω.
fn xi_at(center: [f64; 2], big_r: f64, p: [f64; 2]) -> (f64, [f64; 2]) {
    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
    let r = dx.hypot(dy);
    if r <= big_r {
        (1.0, [0.0, 0.0])
    } else if r < big_r + 1.0 {
        (big_r + 1.0 - r, [-dx / r, -dy / r])
    } else {
        (0.0, [0.0, 0.0])
    }
}

/// `η(z)`: 1 on `[−s/2, L+s/2]`, linear down to 0 over a further `d`.
fn eta_at(params: &ModelParams, d: f64, z: f64) -> f64 {
    let lo = -0.5 * params.s;
    let hi = params.height + 0.5 * params.s;
    if z < lo {
        (1.0 - (lo - z) / d).max(0.0)
    } else if z > hi {
        (1.0 - (z - hi) / d).max(0.0)
    } else {
        1.0
    }
}

/// `(∫η'², ∫η²)` over `[a, b]` by composite Simpson (exact for the linear ramp).
fn eta_moments(params: &ModelParams, d: f64, a: f64, b: f64) -> (f64, f64) {
    let n = 64;
    let h = (b - a) / n as f64;
    let dh = 1e-3 * h;
    let (mut e1, mut e2) = (Accum::default(), Accum::default());
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let z = a + k as f64 * h;
        let e = eta_at(params, d, z);
        // one-sided slope taken inside the interval
        let zs = if k == n { z - dh } else { z };
        let de = (eta_at(params, d, zs + dh) - eta_at(params, d, zs)) / dh;
        e1.add(w * de * de);
        e2.add(w * e * e);
    }
    (e1.value() * h / 3.0, e2.value() * h / 3.0)
}

/// Tensor axis containing the uniform Ω nodes `[0, w]` and graded cells
/// outward to `[lo, hi]`.
fn exterior_axis(w: f64, n: usize, lo: f64, hi: f64, ratio: f64, hmax: f64) -> Vec<f64> {
    let h = w / (n - 1) as f64;
    let grow = |limit: f64| {
        let mut v = Vec::new();
        let mut off = 0.0;
        let mut c = h;
        while off < limit {
            c = (c * ratio).min(hmax);
            off += c;
            if off > limit - 0.3 * c {
                off = limit;
            }
            v.push(off);
        }
        v
    };
    let mut xs: Vec<f64> = grow(-lo).into_iter().rev().map(|o| -o).collect();
    xs.extend((0..n).map(|i| w * i as f64 / (n - 1) as f64));
    xs.extend(grow(hi - w).into_iter().map(|o| w + o));
    xs
}

/// `(∫_{ℝ²∖Ω} ξ²|∇φ|², ∫(∇ξ·∇φ)²)` by the midpoint rule on a graded grid.
fn exterior_integrals(params: &ModelParams, source: &CellField, big_r: f64) -> Result<(f64, f64)> {
    let [wx, wy] = params.omega_extent;
    let center = [0.5 * wx, 0.5 * wy];
    let reach = big_r + 1.0;
    let hmax = 0.05 * reach;
    let xs = exterior_axis(
        wx,
        params.mesh.n_x,
        center[0] - reach,
        center[0] + reach,
        1.15,
        hmax,
    );
    let ys = exterior_axis(
        wy,
        params.mesh.n_y,
        center[1] - reach,
        center[1] + reach,
        1.15,
        hmax,
    );
    let mut pts = Vec::new();
    let mut areas = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            let inside = xs[i] >= 0.0 && xs[i + 1] <= wx && ys[j] >= 0.0 && ys[j + 1] <= wy;
            if inside {
                continue;
            }
            let p = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
            // nearest point of the cell to the center
            let nx = center[0].clamp(xs[i], xs[i + 1]) - center[0];
            let ny = center[1].clamp(ys[j], ys[j + 1]) - center[1];
            if nx.hypot(ny) >= reach {
                continue;
            }
            pts.push(p);
            areas.push((xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]));
        }
    }
    let samples = newtonian_potential(source, &pts)?;
    let (mut a, mut g) = (Accum::default(), Accum::default());
    for ((p, w), s) in pts.iter().zip(&areas).zip(&samples) {
        let (xi, gxi) = xi_at(center, big_r, *p);
        let gp = s.grad;
        a.add(w * xi * xi * (gp[0] * gp[0] + gp[1] * gp[1]));
        let dot = gxi[0] * gp[0] + gxi[1] * gp[1];
        g.add(w * dot * dot);
    }
    Ok((a.value(), g.value()))
}

// ---------------------------------------------------------------------------
// phase

/// `Σ_b arg(x − b)` at the nodes of `grid` (x fastest).
pub fn vortex_phase(grid: &PlaneGrid, points: &[[f64; 2]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n_nodes());
    for &y in &grid.ys {
        for &x in &grid.xs {
            out.push(points.iter().map(|b| (y - b[1]).atan2(x - b[0])).sum());
        }
    }
    out
}

/// Sum of wrapped phase increments of `u` around the node rectangle
/// `[i0, i1]×[j0, j1]`, counterclockwise.
pub fn loop_winding(u: &[C64], nx: usize, rect: [usize; 4]) -> f64 {
    let [i0, j0, i1, j1] = rect;
    let mut path = Vec::new();
    for i in i0..i1 {
        path.push((i, j0));
    }
    for j in j0..j1 {
        path.push((i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        path.push((i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        path.push((i0, j));
    }
    let mut acc = 0.0;
    for w in 0..path.len() {
        let (a, b) = (path[w], path[(w + 1) % path.len()]);
        let ua = u[a.1 * nx + a.0];
        let ub = u[b.1 * nx + b.0];
        acc += (ub * ua.conj()).arg();
    }
    acc
}

fn wrap(x: f64) -> f64 {
    let t = x.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Node rectangles enclosing each core inside Ω with one cell of margin.
pub fn core_loops(spec: &LatticeSpec, grid: &PlaneGrid) -> Result<Vec<[usize; 4]>> {
    let (hx, hy) = (grid.hx(), grid.hy());
    let [wx, wy] = spec.omega_extent;
    let mut loops = Vec::new();
    for b in spec.points_in_omega() {
        let dist = b[0].min(wx - b[0]).min(b[1]).min(wy - b[1]);
        if dist < 2.0 * hx.max(hy) {
            return Err(Error::Geometry(format!(
                "core at ({}, {}) is within two grid cells of the boundary",
                b[0], b[1]
            )));
        }
        let ci = (b[0] / hx).floor() as usize;
        let cj = (b[1] / hy).floor() as usize;
        loops.push([ci - 1, cj - 1, ci + 2, cj + 2]);
    }
    Ok(loops)
}

/// Phase `χ = Σ arg(x−b) + c` on the Ω nodes. The single-valued corrector
/// `c` fits, in weighted least squares, the link increments of
/// `∇χ = B − ∇^⊥h_ε`; weights `ρ_tρ_h + 10⁻⁶` discount the cores.
fn build_phase(
    grid: &PlaneGrid,
    spec: &LatticeSpec,
    table: &PeriodicField,
    eps: f64,
    links: &PlaneLinks,
) -> Result<Vec<f64>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.hx(), grid.hy());
    let chi0 = vortex_phase(grid, &spec.points_in_omega());
    let rho: Vec<f64> = (0..nx * ny)
        .map(|id| rho_at(spec, eps, [grid.xs[id % nx], grid.ys[id / nx]]).0)
        .collect();
    // edges: (tail, head, weight, residual)
    let mut edges = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx - 1 {
            let (t, h) = (j * nx + i, j * nx + i + 1);
            let mid = [0.5 * (grid.xs[i] + grid.xs[i + 1]), grid.ys[j]];
            let (_, gh, _) = table.eval(spec, mid);
            let tau = hx * (links.ax[j * (nx - 1) + i] + gh[1]);
            edges.push((
                t,
                h,
                rho[t] * rho[h] + 1e-6,
                wrap(tau - (chi0[h] - chi0[t])),
            ));
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let (t, h) = (j * nx + i, (j + 1) * nx + i);
            let mid = [grid.xs[i], 0.5 * (grid.ys[j] + grid.ys[j + 1])];
            let (_, gh, _) = table.eval(spec, mid);
            let tau = hy * (links.ay[j * nx + i] - gh[0]);
            edges.push((
                t,
                h,
                rho[t] * rho[h] + 1e-6,
                wrap(tau - (chi0[h] - chi0[t])),
            ));
        }
    }
    let n = nx * ny;
    let reg = 1e-9;
    let mut diag = vec![reg; n];
    let mut rhs = vec![0.0; n];
    for &(t, h, w, r) in &edges {
        diag[t] += w;
        diag[h] += w;
        rhs[h] += w * r;
        rhs[t] -= w * r;
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = reg * xi;
        }
        for &(t, h, w, _) in &edges {
            let d = w * (x[h] - x[t]);
            y[h] += d;
            y[t] -= d;
        }
    };
    let (c, _) = pcg(apply, &diag, &rhs, 1e-10, 50 * n)?;
    Ok(chi0.iter().zip(&c).map(|(a, b)| a + b).collect())
}

// ---------------------------------------------------------------------------
// assembly

/// Builds the test configuration with default options.
pub fn assemble_test_configuration(params: &ModelParams, d: f64) -> Result<TestConstructionReport> {
    assemble_with(params, d, &ConstructionOptions::default())
}

pub fn assemble_with(
    params: &ModelParams,
    d: f64,
    opts: &ConstructionOptions,
) -> Result<TestConstructionReport> {
    let mut params = params.clone();
    params.cutoff_d = d;
    params.validate()?;
    params.check_resolution()?;
    let base = LatticeSpec::new(params.h_ex, params.omega_extent, [0.0, 0.0])?;
    check_cores(&base, params.epsilon)?;
    let table = PeriodicField::new(&base, opts.table_intervals, opts.lattice_tol);

    let (x0, energies) = match opts.translation {
        Some(x0) => (x0, Vec::new()),
        None => {
            let cands = candidate_grid(params.h_ex, opts.candidates_per_axis);
            let q = opts.screen_order;
            let p = &params;
            select_translation_by(&cands, |c| {
                let spec = LatticeSpec::new(p.h_ex, p.omega_extent, c)?;
                Ok(f_eps_of(p, &spec, &table, q))
            })?
        }
    };
    let spec = LatticeSpec::new(params.h_ex, params.omega_extent, x0)?;
    let om = omega_integrals(&params, &spec, &table, opts.quad_order);

    let grid = PlaneGrid::omega(params.omega_extent, params.mesh.n_x, params.mesh.n_y);
    let source = CellField {
        xs: grid.xs.clone(),
        ys: grid.ys.clone(),
        v: om.h_cells.clone(),
    };
    let big_r = xi_radius(&params);
    let centers: Vec<[f64; 2]> = (0..grid.ny - 1)
        .flat_map(|j| {
            let g = &grid;
            (0..g.nx - 1)
                .map(move |i| [0.5 * (g.xs[i] + g.xs[i + 1]), 0.5 * (g.ys[j] + g.ys[j + 1])])
        })
        .collect();
    let inner = newtonian_potential(&source, &centers)?;
    let mut a_in = Accum::default();
    for (id, s) in inner.iter().enumerate() {
        let (i, j) = (id % (grid.nx - 1), id / (grid.nx - 1));
        let w = (grid.xs[i + 1] - grid.xs[i]) * (grid.ys[j + 1] - grid.ys[j]);
        a_in.add(w * (s.grad[0] * s.grad[0] + s.grad[1] * s.grad[1]));
    }
    let (a_out, g_xi) = exterior_integrals(&params, &source, big_r)?;
    let xi_grad_phi_sq = a_in.value() + a_out;
    let mag_plane = om.h_norm_sq + g_xi;

    let (s, l) = (params.s, params.height);
    let top = l + 0.5 * s;
    let (ep_up, e_up) = eta_moments(&params, d, top, top + d);
    let (ep_lo, e_lo) = eta_moments(&params, d, -0.5 * s - d, -0.5 * s);
    let n1 = (params.n_layers + 1) as f64;
    let f_layer = om.kinetic + om.potential + 0.5 * om.h_norm_sq;
    let i1 = s * n1 * (om.kinetic + om.potential + 0.5 * mag_plane);
    let i2 = 0.5 * (ep_up * xi_grad_phi_sq + e_up * mag_plane);
    let i3 = 0.5 * (ep_lo * xi_grad_phi_sq + e_lo * mag_plane);
    let total = i1 + i2 + i3;

    let m_eps = params.m_eps().ok();
    let log_factor = m_eps.map(|_| (1.0 / (params.epsilon * params.h_ex.sqrt())).ln());
    let ratio = m_eps.map(|m| total / m);
    let c_required = match (ratio, log_factor) {
        (Some(r), Some(lf)) => Some((r - 1.0 - s / l) * lf),
        _ => None,
    };
    let bound_value = match (m_eps, log_factor, opts.bound_constant) {
        (Some(m), Some(lf), Some(c)) => Some(m * (1.0 + s / l + c / lf)),
        _ => None,
    };
    let area = params.omega_area();
    let mean = if energies.is_empty() {
        f_layer
    } else {
        crate::sum::sum(energies.iter().copied()) / energies.len() as f64
    };
    let min = energies.iter().copied().fold(f_layer, f64::min);

    let mut report = TestConstructionReport {
        epsilon: params.epsilon,
        s,
        n_layers: params.n_layers,
        height: l,
        h_ex: params.h_ex,
        d,
        vortices_in_omega: spec.points_in_omega().len(),
        lattice: spec.clone(),
        truncation_radius: table.r_cut,
        lattice_tol: opts.lattice_tol,
        candidates: energies.len().max(1),
        candidate_energy_mean: mean,
        candidate_energy_min: min,
        cutoff_radius: big_r,
        kinetic: om.kinetic,
        potential: om.potential,
        h_norm_sq: om.h_norm_sq,
        grad_xi_dot_grad_phi_sq: g_xi,
        xi_grad_phi_sq,
        eta_prime_sq_upper: ep_up,
        eta_sq_upper: e_up,
        eta_prime_sq_lower: ep_lo,
        eta_sq_lower: e_lo,
        f_eps_layer: f_layer,
        i1,
        i2,
        i3,
        total,
        m_eps,
        ratio,
        log_factor,
        c_required,
        bound_constant: opts.bound_constant,
        bound_value,
        bound_holds: bound_value.map(|b| total <= b),
        h_norm_ratio: om.h_norm_sq / (area * params.h_ex),
        xi_phi_ratio: g_xi / (area * params.h_ex),
        i2_ratio: i2 / (0.5 * params.volume_d() * params.h_ex),
        assembled: None,
        fields: ConstructionFields::default(),
        config: None,
    };

    // node fields on Ω
    let nodes: Vec<[f64; 2]> = (0..grid.n_nodes())
        .map(|id| [grid.xs[id % grid.nx], grid.ys[id / grid.nx]])
        .collect();
    let phi_nodes = newtonian_potential(&source, &nodes)?;
    report.fields.h = nodes.iter().map(|&p| table.eval(&spec, p).0).collect();
    report.fields.rho = nodes
        .iter()
        .map(|&p| rho_at(&spec, params.epsilon, p).0)
        .collect();
    report.fields.phi = phi_nodes.iter().map(|s| s.phi).collect();
    report.fields.omega = Some(grid.clone());

    if opts.assemble {
        let dom = build_domain(&params)?;
        let center = [0.5 * params.omega_extent[0], 0.5 * params.omega_extent[1]];
        let (bxs, bys) = (&dom.xs, &dom.ys);
        let mut mids = Vec::new();
        for j in 0..bys.len() {
            for i in 0..bxs.len() - 1 {
                mids.push([0.5 * (bxs[i] + bxs[i + 1]), bys[j]]);
            }
        }
        let n_a1 = mids.len();
        for j in 0..bys.len() - 1 {
            for i in 0..bxs.len() {
                mids.push([bxs[i], 0.5 * (bys[j] + bys[j + 1])]);
            }
        }
        let samples = newtonian_potential(&source, &mids)?;
        let pattern: Vec<f64> = mids
            .iter()
            .zip(&samples)
            .enumerate()
            .map(|(id, (p, smp))| {
                let xi = xi_at(center, big_r, *p).0;
                if id < n_a1 {
                    -xi * smp.grad[1]
                } else {
                    xi * smp.grad[0]
                }
            })
            .collect();
        let mut pot = Potential3D::background(&dom, params.h_ex);
        let per1 = (bxs.len() - 1) * bys.len();
        let per2 = bxs.len() * (bys.len() - 1);
        for (k, &z) in dom.zs.iter().enumerate() {
            let e = eta_at(&params, d, z);
            if e == 0.0 {
                continue;
            }
            for m in 0..per1 {
                pot.a1[k * per1 + m] += e * pattern[m];
            }
            for m in 0..per2 {
                pot.a2[k * per2 + m] += e * pattern[n_a1 + m];
            }
        }
        let links = plane_links_omega(&dom, &pot, dom.kz0);
        let chi = build_phase(&grid, &spec, &table, params.epsilon, &links)?;
        let v: Vec<C64> = chi
            .iter()
            .zip(&report.fields.rho)
            .map(|(c, r)| C64::from_polar(*r, *c))
            .collect();
        let layers = LayerStack {
            nx: dom.nx,
            ny: dom.ny,
            u: vec![v; params.n_layers + 1],
        };
        let cfg = LayeredConfiguration { layers, pot };
        report.assembled = Some(ld_energy(&dom, &cfg)?);
        report.fields.xi = bys
            .iter()
            .flat_map(|&y| bxs.iter().map(move |&x| xi_at(center, big_r, [x, y]).0))
            .collect();
        report.fields.box_xs = bxs.clone();
        report.fields.box_ys = bys.clone();
        report.fields.eta = dom.zs.iter().map(|&z| [z, eta_at(&params, d, z)]).collect();
        report.config = Some(cfg);
    }
    Ok(report)
}

/// Unit-modulus phase `e^{iχ}` of the construction on every layer, with
/// winding 2π around each core inside Ω.
pub fn reconstruct_phase(report: &TestConstructionReport, dom: &Domain) -> Result<LayerStack> {
    let cfg = report.config.as_ref().ok_or_else(|| {
        Error::Argument("report was built without the assembled configuration".into())
    })?;
    cfg.check(dom)?;
    let spec = &report.lattice;
    let grid = dom.omega_plane();
    let loops = core_loops(spec, &grid)?;
    let base = LatticeSpec::new(report.h_ex, spec.omega_extent, [0.0, 0.0])?;
    let table = PeriodicField::new(&base, 64, report.lattice_tol);
    let links = plane_links_omega(dom, &cfg.pot, dom.kz0);
    let chi = build_phase(&grid, spec, &table, report.epsilon, &links)?;
    let u: Vec<C64> = chi.iter().map(|c| C64::from_polar(1.0, *c)).collect();
    for rect in loops {
        let w = loop_winding(&u, grid.nx, rect);
        if (w - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::Geometry(format!(
                "phase winding {w} around core loop {rect:?}"
            )));
        }
    }
    Ok(LayerStack {
        nx: dom.nx,
        ny: dom.ny,
        u: vec![u; dom.n_layers() + 1],
    })
}

//! Post-processing: vorticity, `H⁻¹` norms, interlayer interpolation,
//! per-layer and per-slice 2-D energies, κ rescaling and the comparison
//! between an LD state and its interpolated AGL state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{m_eps, Domain, PlaneGrid};
use crate::energy::{agl_energy, ld_energy, plane_f_eps, EnergyBreakdown};
use crate::error::{invalid, Error, Result};
use crate::fields::{curl3_at, ContinuumConfiguration, LayeredConfiguration, Potential3D, C64};
use crate::linalg::pcg;
use crate::potentials::trace_deviation;
use crate::sum::{sum, Accum};

/// `μ_n` on the Ω plaquettes of every layer, `(nx-1)·(ny-1)` values each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VorticityField {
    pub nx: usize,
    pub ny: usize,
    pub mu: Vec<Vec<f64>>,
    /// `∫_Ω μ_n`
    pub circulation: Vec<f64>,
}

/// Gauge-invariant phase increment along a link with its amplitude weight:
/// `|u_t||u_h|·arg(ū_t u_h e^{−iℓa})`, the lattice form of `ℓ(iu, ∇_A u)`
/// with `A` removed.
#[inline]
fn link_current(ut: C64, uh: C64, phase: f64) -> f64 {
    let w = ut.conj() * uh * C64::from_polar(1.0, -phase);
    w.norm() * w.arg()
}

/// `μ = curl(iu, ∇_A u) + curl A` per plaquette. The link quantity summed
/// around a plaquette is `ℓa + |u_t||u_h|ω`, so where `|u| = 1` the
/// circulation is an exact multiple of `2π`.
pub fn vorticity(dom: &Domain, state: &LayeredConfiguration) -> Result<VorticityField> {
    state.check(dom)?;
    let (nx, ny) = (dom.nx, dom.ny);
    let (hx, hy) = (dom.hx, dom.hy);
    let p = &state.pot;
    let per_layer: Vec<(Vec<f64>, f64)> = state
        .layers
        .u
        .par_iter()
        .enumerate()
        .map(|(n, u)| {
            let k = dom.layer_k[n];
            let lx = |i: usize, j: usize| {
                let a = hx * p.a1[p.i1(dom.ix0 + i, dom.iy0 + j, k)];
                a + link_current(u[j * nx + i], u[j * nx + i + 1], a)
            };
            let ly = |i: usize, j: usize| {
                let a = hy * p.a2[p.i2(dom.ix0 + i, dom.iy0 + j, k)];
                a + link_current(u[j * nx + i], u[(j + 1) * nx + i], a)
            };
            let mut mu = Vec::with_capacity((nx - 1) * (ny - 1));
            let mut acc = Accum::default();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let circ = lx(i, j) + ly(i + 1, j) - lx(i, j + 1) - ly(i, j);
                    acc.add(circ);
                    mu.push(circ / (hx * hy));
                }
            }
            (mu, acc.value())
        })
        .collect();
    let (mu, circulation) = per_layer.into_iter().unzip();
    Ok(VorticityField {
        nx,
        ny,
        mu,
        circulation,
    })
}

/// Solves `−Δw = b/area` with `w = 0` on `∂Ω` (five-point stencil) where
/// `b` holds the load of each node; returns `√(bᵀw)`.
fn dirichlet_dual_norm(grid: &PlaneGrid, b: &[f64]) -> Result<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    if nx < 3 || ny < 3 {
        return Err(Error::Shape("H^-1 norm needs at least 3x3 nodes".into()));
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    let (mx, my) = (nx - 2, ny - 2);
    let cx = hy / hx;
    let cy = hx / hy;
    let rhs: Vec<f64> = (0..mx * my)
        .map(|id| b[(id / mx + 1) * nx + id % mx + 1])
        .collect();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("field must be finite".into()));
    }
    let apply = |w: &[f64], out: &mut [f64]| {
        for j in 0..my {
            for i in 0..mx {
                let t = j * mx + i;
                let mut v = 2.0 * (cx + cy) * w[t];
                if i > 0 {
                    v -= cx * w[t - 1];
                }
                if i + 1 < mx {
                    v -= cx * w[t + 1];
                }
                if j > 0 {
                    v -= cy * w[t - mx];
                }
                if j + 1 < my {
                    v -= cy * w[t + mx];
                }
                out[t] = v;
            }
        }
    };
    let diag = vec![2.0 * (cx + cy); mx * my];
    let (w, _) = pcg(apply, &diag, &rhs, 1e-10, 10 * nx * ny)?;
    Ok(sum(rhs.iter().zip(&w).map(|(b, w)| b * w)).max(0.0).sqrt())
}

/// `‖f‖_{H⁻¹(Ω)} = (∫|∇w|²)^{1/2}` with `−Δw = f`, `w = 0` on `∂Ω`, for a
/// node field on an Ω grid.
pub fn h_minus1_norm(grid: &PlaneGrid, f: &[f64]) -> Result<f64> {
    if grid.is_padded() || f.len() != grid.n_nodes() {
        return Err(Error::Shape("f must live on the nodes of an Ω grid".into()));
    }
    let area = grid.hx() * grid.hy();
    let b: Vec<f64> = f.iter().map(|v| v * area).collect();
    dirichlet_dual_norm(grid, &b)
}

/// Same norm for a plaquette field; each plaquette loads its four corners
/// with a quarter of its mass.
pub fn h_minus1_norm_cells(grid: &PlaneGrid, f: &[f64]) -> Result<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    if grid.is_padded() || f.len() != (nx - 1) * (ny - 1) {
        return Err(Error::Shape(
            "f must live on the plaquettes of an Ω grid".into(),
        ));
    }
    let q = 0.25 * grid.hx() * grid.hy();
    let mut b = vec![0.0; nx * ny];
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = q * f[j * (nx - 1) + i];
            b[j * nx + i] += v;
            b[j * nx + i + 1] += v;
            b[(j + 1) * nx + i] += v;
            b[(j + 1) * nx + i + 1] += v;
        }
    }
    dirichlet_dual_norm(grid, &b)
}

/// `‖(N+1)⁻¹Σ_n μ_n/h_ex − 1‖_{H⁻¹(Ω)}`.
pub fn average_vorticity_distance(dom: &Domain, state: &LayeredConfiguration) -> Result<f64> {
    let h = state.pot.h_ex;
    if !(h > 0.0) {
        return Err(invalid("h_ex", "average vorticity needs h_ex > 0"));
    }
    let v = vorticity(dom, state)?;
    vorticity_distance(dom, &v, h)
}

pub fn vorticity_distance(dom: &Domain, v: &VorticityField, h_ex: f64) -> Result<f64> {
    let m = v.mu.len() as f64;
    let f: Vec<f64> = (0..v.mu[0].len())
        .map(|c| sum(v.mu.iter().map(|mu| mu[c])) / (m * h_ex) - 1.0)
        .collect();
    h_minus1_norm_cells(&dom.omega_plane(), &f)
}

/// `ψ = (1−t)u_n + t u_{n+1}` on the grid planes of each slab, same
/// potential.
pub fn interpolate_layers(
    dom: &Domain,
    state: &LayeredConfiguration,
) -> Result<ContinuumConfiguration> {
    state.check(dom)?;
    let np = dom.n_omega();
    let p = dom.per_layer;
    let mut psi = Vec::with_capacity(np * dom.nzd);
    for k in 0..dom.nzd {
        let n = (k / p).min(dom.n_layers());
        let r = k - n * p;
        if r == 0 {
            psi.extend_from_slice(&state.layers.u[n]);
            continue;
        }
        let t = r as f64 / p as f64;
        let (u0, u1) = (&state.layers.u[n], &state.layers.u[n + 1]);
        psi.extend((0..np).map(|i| u0[i] * (1.0 - t) + u1[i] * t));
    }
    Ok(ContinuumConfiguration {
        nx: dom.nx,
        ny: dom.ny,
        nz: dom.nzd,
        psi,
        pot: state.pot.clone(),
    })
}

/// Largest pointwise violation of
/// `1−|ψ|² = (1−t)(1−|u_n|²) + t(1−|u_{n+1}|²) + t(1−t)|u_n−u_{n+1}|²`
/// over all nodes of the interpolated state.
pub fn interpolation_identity_residual(dom: &Domain, state: &LayeredConfiguration) -> Result<f64> {
    let c = interpolate_layers(dom, state)?;
    let np = dom.n_omega();
    let p = dom.per_layer;
    let mut worst = 0.0f64;
    for k in 0..dom.nzd {
        let n = (k / p).min(dom.n_layers());
        let t = (k - n * p) as f64 / p as f64;
        let u1 = if n < dom.n_layers() {
            &state.layers.u[n + 1]
        } else {
            &state.layers.u[n]
        };
        let u0 = &state.layers.u[n];
        for i in 0..np {
            let lhs = 1.0 - c.psi[k * np + i].norm_sqr();
            let rhs = (1.0 - t) * (1.0 - u0[i].norm_sqr())
                + t * (1.0 - u1[i].norm_sqr())
                + t * (1.0 - t) * (u0[i] - u1[i]).norm_sqr();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F2dDecomposition {
    /// `F_ε(u_n, Â_n)` for `n = 0..=N`
    pub per_layer: Vec<f64>,
    /// `Σ_{n<N} s·F_ε(u_n, Â_n)`
    pub weighted_sum: f64,
}

pub fn f2d_decomposition(dom: &Domain, state: &LayeredConfiguration) -> Result<F2dDecomposition> {
    state.check(dom)?;
    let per_layer: Vec<f64> = state
        .layers
        .u
        .par_iter()
        .enumerate()
        .map(|(n, u)| plane_f_eps(dom, u, &state.pot, dom.layer_k[n]))
        .collect();
    let s = dom.params.s;
    let weighted_sum = sum(per_layer[..dom.n_layers()].iter().map(|f| s * f));
    Ok(F2dDecomposition {
        per_layer,
        weighted_sum,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceEnergies {
    /// `F_ε(ψ(·,z_k), Â(·,z_k))` per grid plane of `[0, L]`
    pub per_slice: Vec<f64>,
    /// trapezoid integral over `[0, L]`
    pub integral: f64,
}

/// The dropped terms of the slicing bound are the vertical kinetic energy
/// and all magnetic energy outside the in-plane part over `D`, so
/// `agl_energy(state).total ≥ integral` holds term by term.
pub fn slice_energies(dom: &Domain, state: &ContinuumConfiguration) -> Result<SliceEnergies> {
    state.check(dom)?;
    let per_slice: Vec<f64> = (0..dom.nzd)
        .into_par_iter()
        .map(|k| plane_f_eps(dom, state.plane(k), &state.pot, dom.kz0 + k))
        .collect();
    let integral = sum(per_slice.iter().zip(&dom.wz).map(|(f, w)| f * w));
    Ok(SliceEnergies {
        per_slice,
        integral,
    })
}

/// Josephson, exterior magnetic and mixed-curl magnetic energy.
pub fn theorem2_bundle(b: &EnergyBreakdown) -> f64 {
    sum([b.josephson, b.magnetic_exterior, b.magnetic_mixed_in_d])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaDirection {
    ToKappa,
    FromKappa,
}

fn rescale_pot(p: &Potential3D, f: f64) -> Potential3D {
    let m = |v: &Vec<f64>| v.iter().map(|x| x * f).collect::<Vec<_>>();
    Potential3D {
        dims: p.dims,
        a1: m(&p.a1),
        a2: m(&p.a2),
        a3: m(&p.a3),
        h_ex: p.h_ex * f,
    }
}

fn kappa_factor(eps: f64, dir: KappaDirection) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("epsilon", "must be finite and > 0"));
    }
    // κ = 1/ε: A ↦ A/κ = εA
    Ok(match dir {
        KappaDirection::ToKappa => eps,
        KappaDirection::FromKappa => 1.0 / eps,
    })
}

/// `u` unchanged, `A ↦ A/κ` (to) or `A ↦ κA` (from), applied field alike.
pub fn rescale_kappa(
    state: &LayeredConfiguration,
    eps: f64,
    dir: KappaDirection,
) -> Result<LayeredConfiguration> {
    let f = kappa_factor(eps, dir)?;
    Ok(LayeredConfiguration {
        layers: state.layers.clone(),
        pot: rescale_pot(&state.pot, f),
    })
}

pub fn rescale_kappa_agl(
    state: &ContinuumConfiguration,
    eps: f64,
    dir: KappaDirection,
) -> Result<ContinuumConfiguration> {
    let f = kappa_factor(eps, dir)?;
    let mut out = state.clone();
    out.pot = rescale_pot(&state.pot, f);
    Ok(out)
}

/// `‖A³‖²_{L⁶(D)}` from the z-links inside `D`, weighted by their volume.
pub fn a3_l6_norm_sq(dom: &Domain, pot: &Potential3D) -> Result<f64> {
    pot.check(dom)?;
    let mut acc = Accum::default();
    for k in dom.kz0..dom.kz0 + dom.nzd - 1 {
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let a = pot.a3[pot.i3(dom.ix0 + i, dom.iy0 + j, k)];
                acc.add(dom.wx[i] * dom.wy[j] * dom.cell_z[k] * a.powi(6));
            }
        }
    }
    Ok(acc.value().cbrt())
}

/// `Σ_n (1/s)∫_Ω |u_{n+1} − u_n|⁴`.
pub fn layer_difference_l4(dom: &Domain, state: &LayeredConfiguration) -> Result<f64> {
    state.check(dom)?;
    let mut acc = Accum::default();
    for n in 0..dom.n_layers() {
        let (u0, u1) = (&state.layers.u[n], &state.layers.u[n + 1]);
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let t = j * dom.nx + i;
                acc.add(dom.wx[i] * dom.wy[j] * (u1[t] - u0[t]).norm_sqr().powi(2));
            }
        }
    }
    Ok(acc.value() / dom.params.s)
}

/// Comparison of an LD state with the AGL energy of its interpolation.
///
/// With `T` the LD energy whose outer layers carry weight `s/2`, the AGL
/// energy of the interpolated state obeys
/// `AGL ≤ T + r_pot + r_kin + r_vert ≤ LD + r_pot + r_kin + r_vert`:
/// * `r_pot = 2√(P·Q) + Q`, `P` the potential part of `T`,
///   `Q = (s/64ε²)Σ_n∫|u_{n+1}−u_n|⁴` (cross term of the interpolation
///   identity, `t(1−t) ≤ 1/4`);
/// * `r_kin = 2√(K·R) + R`, `K` the in-plane kinetic part of `T`, `R` the
///   energy of the link errors caused by the in-plane potential varying
///   between the layers;
/// * `r_vert = (√J + √R_J + √R_3)² − J` with `R_J` the cost of dropping the
///   Josephson phase and `R_3 = ½λ⁻²∫|ψ|²|A³|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ld: EnergyBreakdown,
    pub agl: EnergyBreakdown,
    /// `AGL − LD`
    pub gap: f64,
    /// `AGL − T`
    pub gap_trapezoid: f64,
    pub outer_layer_correction: f64,
    pub r_pot: f64,
    pub r_kin: f64,
    pub r_vert: f64,
    /// `(r_pot + r_kin + r_vert)/LD`
    pub bound: f64,
    pub holds: bool,
    pub a3_l6_sq: f64,
    pub layer_diff_l4: f64,
}

pub fn compare_interpolation(dom: &Domain, state: &LayeredConfiguration) -> Result<Comparison> {
    let ld = ld_energy(dom, state)?;
    let psi = interpolate_layers(dom, state)?;
    let agl = agl_energy(dom, &psi)?;
    let prm = &dom.params;
    let (s, eps, lam2) = (prm.s, prm.epsilon, prm.lambda * prm.lambda);
    let nx = dom.nx;
    let p = &state.pot;
    let inv4e2 = 1.0 / (4.0 * eps * eps);

    // per-layer in-plane kinetic and potential, unweighted by s
    let mut kin = vec![0.0; dom.n_layers() + 1];
    let mut pot = vec![0.0; dom.n_layers() + 1];
    for (n, u) in state.layers.u.iter().enumerate() {
        let k = dom.layer_k[n];
        let (mut ka, mut pa) = (Accum::default(), Accum::default());
        for j in 0..dom.ny {
            for i in 0..nx {
                let t = j * nx + i;
                let q = 1.0 - u[t].norm_sqr();
                pa.add(dom.wx[i] * dom.wy[j] * q * q * inv4e2);
                if i + 1 < nx {
                    let a = dom.hx * p.a1[p.i1(dom.ix0 + i, dom.iy0 + j, k)];
                    let d = u[t + 1] * C64::from_polar(1.0, -a) - u[t];
                    ka.add(0.5 * dom.wy[j] / dom.hx * d.norm_sqr());
                }
                if j + 1 < dom.ny {
                    let a = dom.hy * p.a2[p.i2(dom.ix0 + i, dom.iy0 + j, k)];
                    let d = u[t + nx] * C64::from_polar(1.0, -a) - u[t];
                    ka.add(0.5 * dom.wx[i] / dom.hy * d.norm_sqr());
                }
            }
        }
        kin[n] = ka.value();
        pot[n] = pa.value();
    }
    let nl = dom.n_layers();
    let outer = 0.5 * s * (kin[0] + pot[0] + kin[nl] + pot[nl]);
    let t_kin = s * sum(kin.iter().copied()) - 0.5 * s * (kin[0] + kin[nl]);
    let t_pot = s * sum(pot.iter().copied()) - 0.5 * s * (pot[0] + pot[nl]);

    let l4 = layer_difference_l4(dom, state)?;
    let q = s * s * l4 / 64.0 * 4.0 * inv4e2;
    let r_pot = 2.0 * (t_pot * q).sqrt() + q;

    // link errors from the in-plane potential varying inside each slab
    let mut r = Accum::default();
    let pl = dom.per_layer;
    for kk in 0..dom.nzd {
        let n = (kk / pl).min(nl);
        let rem = kk - n * pl;
        if rem == 0 {
            continue;
        }
        let t = rem as f64 / pl as f64;
        let kb = dom.kz0 + kk;
        let (k0, k1) = (dom.layer_k[n], dom.layer_k[n + 1]);
        let (u0, u1) = (&state.layers.u[n], &state.layers.u[n + 1]);
        let w = dom.wz[kk];
        let mut link = |h: usize, ph: f64, ph0: f64, ph1: f64, c: f64| {
            let e = C64::from_polar(1.0, -ph);
            let err = u0[h] * (e - C64::from_polar(1.0, -ph0)) * (1.0 - t)
                + u1[h] * (e - C64::from_polar(1.0, -ph1)) * t;
            r.add(w * c * err.norm_sqr());
        };
        for j in 0..dom.ny {
            for i in 0..nx {
                let (bi, bj) = (dom.ix0 + i, dom.iy0 + j);
                if i + 1 < nx {
                    let ph = |k| dom.hx * p.a1[p.i1(bi, bj, k)];
                    link(
                        j * nx + i + 1,
                        ph(kb),
                        ph(k0),
                        ph(k1),
                        0.5 * dom.wy[j] / dom.hx,
                    );
                }
                if j + 1 < dom.ny {
                    let ph = |k| dom.hy * p.a2[p.i2(bi, bj, k)];
                    link(
                        (j + 1) * nx + i,
                        ph(kb),
                        ph(k0),
                        ph(k1),
                        0.5 * dom.wx[i] / dom.hy,
                    );
                }
            }
        }
    }
    let rk = r.value();
    let r_kin = 2.0 * (t_kin * rk).sqrt() + rk;

    // vertical: Josephson phase and A³ along the interpolated column
    let mut rj = Accum::default();
    for n in 0..nl {
        let phase = crate::fields::vertical_link_phase(dom, p, n)?;
        for j in 0..dom.ny {
            for i in 0..nx {
                let t = j * nx + i;
                let d = C64::from_polar(1.0, phase[t]) - 1.0;
                rj.add(
                    dom.wx[i] * dom.wy[j] * state.layers.u[n][t].norm_sqr() * d.norm_sqr()
                        / (2.0 * lam2 * s),
                );
            }
        }
    }
    let mut r3 = Accum::default();
    for kk in 0..dom.nzd - 1 {
        let kb = dom.kz0 + kk;
        for j in 0..dom.ny {
            for i in 0..nx {
                let a = p.a3[p.i3(dom.ix0 + i, dom.iy0 + j, kb)];
                let th = dom.hz * a;
                let up = psi.psi[psi.idx(i, j, kk + 1)];
                let d = up * (C64::from_polar(1.0, -th) - 1.0);
                r3.add(dom.wx[i] * dom.wy[j] * d.norm_sqr() / (2.0 * lam2 * dom.hz));
            }
        }
    }
    let jos = ld.josephson;
    let root = jos.sqrt() + rj.value().sqrt() + r3.value().sqrt();
    let r_vert = root * root - jos;

    let gap = agl.total - ld.total;
    let gap_trapezoid = gap + outer;
    let total_r = r_pot + r_kin + r_vert;
    let bound = if ld.total != 0.0 {
        total_r / ld.total
    } else {
        f64::INFINITY
    };
    let slack = 1e-12 * (1.0 + ld.total.abs());
    Ok(Comparison {
        ld,
        agl,
        gap,
        gap_trapezoid,
        outer_layer_correction: outer,
        r_pot,
        r_kin,
        r_vert,
        bound,
        holds: agl.total <= ld.total + total_r + slack,
        a3_l6_sq: a3_l6_norm_sq(dom, p)?,
        layer_diff_l4: l4,
    })
}

/// One row of the asymptotic table. Ratios are against `M_ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub epsilon: f64,
    pub s: f64,
    pub n_layers: usize,
    pub h_ex: f64,
    pub pad: f64,
    pub m_eps: f64,
    pub total: f64,
    pub energy_ratio: f64,
    pub josephson_ratio: f64,
    pub exterior_ratio: f64,
    pub mixed_ratio: f64,
    pub trace_deviation_ratio: f64,
    pub f2d_sum: f64,
    pub f2d_to_total: f64,
    pub bundle_ratio: f64,
    pub a3_l6_ratio: f64,
    pub layer_diff_ratio: f64,
    pub agl_ld_gap_ratio: Option<f64>,
    pub avg_vorticity_distance: f64,
}

impl AsymptoticReport {
    pub const CSV_HEADER: &'static str = "epsilon,s,n_layers,h_ex,pad,m_eps,total,energy_ratio,josephson_ratio,exterior_ratio,mixed_ratio,trace_deviation_ratio,f2d_sum,f2d_to_total,bundle_ratio,a3_l6_ratio,layer_diff_ratio,agl_ld_gap_ratio,avg_vorticity_distance";

    pub fn csv_row(&self) -> String {
        let f = |x: f64| format!("{x:e}");
        [
            f(self.epsilon),
            f(self.s),
            self.n_layers.to_string(),
            f(self.h_ex),
            f(self.pad),
            f(self.m_eps),
            f(self.total),
            f(self.energy_ratio),
            f(self.josephson_ratio),
            f(self.exterior_ratio),
            f(self.mixed_ratio),
            f(self.trace_deviation_ratio),
            f(self.f2d_sum),
            f(self.f2d_to_total),
            f(self.bundle_ratio),
            f(self.a3_l6_ratio),
            f(self.layer_diff_ratio),
            self.agl_ld_gap_ratio.map(f).unwrap_or_default(),
            f(self.avg_vorticity_distance),
        ]
        .join(",")
    }
}

pub fn asymptotic_report(dom: &Domain, state: &LayeredConfiguration) -> Result<AsymptoticReport> {
    let prm = &dom.params;
    let m = m_eps(prm.volume_d(), prm.epsilon, state.pot.h_ex)?;
    let b = ld_energy(dom, state)?;
    let f2d = f2d_decomposition(dom, state)?;
    Ok(AsymptoticReport {
        epsilon: prm.epsilon,
        s: prm.s,
        n_layers: prm.n_layers,
        h_ex: state.pot.h_ex,
        pad: prm.pad,
        m_eps: m,
        total: b.total,
        energy_ratio: b.total / m,
        josephson_ratio: b.josephson / m,
        exterior_ratio: b.magnetic_exterior / m,
        mixed_ratio: b.magnetic_mixed_in_d / m,
        trace_deviation_ratio: trace_deviation(dom, state)? / m,
        f2d_sum: f2d.weighted_sum,
        f2d_to_total: f2d.weighted_sum / b.total,
        bundle_ratio: theorem2_bundle(&b) / m,
        a3_l6_ratio: a3_l6_norm_sq(dom, &state.pot)? / m,
        layer_diff_ratio: layer_difference_l4(dom, state)? / m,
        agl_ld_gap_ratio: None,
        avg_vorticity_distance: average_vorticity_distance(dom, state)?,
    })
}

/// In-plane field `curl Â` on the Ω plaquettes of box plane `kb`.
pub fn plane_field(dom: &Domain, pot: &Potential3D, kb: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity((dom.nx - 1) * (dom.ny - 1));
    for j in 0..dom.ny - 1 {
        for i in 0..dom.nx - 1 {
            v.push(curl3_at(dom, pot, dom.ix0 + i, dom.iy0 + j, kb));
        }
    }
    v
}

//! Field containers and gauge-covariant discrete calculus.
//!
//! Order parameters live on nodes, the vector potential on links of the box
//! grid (one value per link, per unit length). Curls are circulations per
//! plaquette area, which makes every energy term exactly gauge invariant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// `u_n` for `n = 0..=N`, each an `nx × ny` array over Ω (x fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub nx: usize,
    pub ny: usize,
    pub u: Vec<Vec<C64>>,
}

impl LayerStack {
    pub fn constant(dom: &Domain, value: C64) -> Self {
        LayerStack {
            nx: dom.nx,
            ny: dom.ny,
            u: vec![vec![value; dom.n_omega()]; dom.n_layers() + 1],
        }
    }
    pub fn max_modulus(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }
    pub fn check(&self, dom: &Domain) -> Result<()> {
        if self.nx != dom.nx || self.ny != dom.ny || self.u.len() != dom.n_layers() + 1 {
            return Err(Error::Shape(format!(
                "layer stack {}x{}x{} vs domain {}x{}x{}",
                self.nx,
                self.ny,
                self.u.len(),
                dom.nx,
                dom.ny,
                dom.n_layers() + 1
            )));
        }
        if self.u.iter().any(|l| l.len() != dom.n_omega()) {
            return Err(Error::Shape("layer array length".into()));
        }
        Ok(())
    }
}

/// Staggered vector potential on the box: `a1` on x-links
/// (`(NX-1)·NY·NZ`), `a2` on y-links, `a3` on z-links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential3D {
    pub dims: [usize; 3],
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    /// applied field of the background `h_ex·(0, x₁, 0)`
    pub h_ex: f64,
}

impl Potential3D {
    pub fn zeros(dom: &Domain, h_ex: f64) -> Self {
        let [nx, ny, nz] = dom.dims();
        Potential3D {
            dims: [nx, ny, nz],
            a1: vec![0.0; (nx - 1) * ny * nz],
            a2: vec![0.0; nx * (ny - 1) * nz],
            a3: vec![0.0; nx * ny * (nz - 1)],
            h_ex,
        }
    }

    /// `h_ex·a` with `a = (0, x₁, 0)`. Along a y-link `x₁` is constant, so the
    /// link average equals `h_ex·x₁` exactly.
    pub fn background(dom: &Domain, h_ex: f64) -> Self {
        let mut p = Self::zeros(dom, h_ex);
        let [nx, ny, nz] = p.dims;
        for k in 0..nz {
            for j in 0..ny - 1 {
                for i in 0..nx {
                    p.a2[(k * (ny - 1) + j) * nx + i] = h_ex * dom.xs[i];
                }
            }
        }
        p
    }

    #[inline]
    pub fn i1(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * (self.dims[0] - 1) + i
    }
    #[inline]
    pub fn i2(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.dims[1] - 1) + j) * self.dims[0] + i
    }
    #[inline]
    pub fn i3(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn background_only(&self, dom: &Domain) -> bool {
        *self == Self::background(dom, self.h_ex)
    }

    pub fn check(&self, dom: &Domain) -> Result<()> {
        let d = dom.dims();
        let ok = self.dims == d
            && self.a1.len() == (d[0] - 1) * d[1] * d[2]
            && self.a2.len() == d[0] * (d[1] - 1) * d[2]
            && self.a3.len() == d[0] * d[1] * (d[2] - 1);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "potential dims {:?} vs box {:?}",
                self.dims, d
            )))
        }
    }

    pub fn n_links(&self) -> usize {
        self.a1.len() + self.a2.len() + self.a3.len()
    }
}

/// LD state `({u_n}, A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredConfiguration {
    pub layers: LayerStack,
    pub pot: Potential3D,
}

impl LayeredConfiguration {
    pub fn normal_state(dom: &Domain) -> Self {
        LayeredConfiguration {
            layers: LayerStack::constant(dom, C64::new(0.0, 0.0)),
            pot: Potential3D::background(dom, dom.params.h_ex),
        }
    }
    pub fn check(&self, dom: &Domain) -> Result<()> {
        self.layers.check(dom)?;
        self.pot.check(dom)
    }
}

/// AGL state: `ψ` on the nodes of D (`nx·ny·nzd`, x fastest, plane index
/// relative to z = 0) and the same potential type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumConfiguration {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub psi: Vec<C64>,
    pub pot: Potential3D,
}

impl ContinuumConfiguration {
    pub fn constant(dom: &Domain, value: C64, pot: Potential3D) -> Self {
        ContinuumConfiguration {
            nx: dom.nx,
            ny: dom.ny,
            nz: dom.nzd,
            psi: vec![value; dom.n_omega() * dom.nzd],
            pot,
        }
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }
    pub fn plane(&self, k: usize) -> &[C64] {
        let n = self.nx * self.ny;
        &self.psi[k * n..(k + 1) * n]
    }
    pub fn check(&self, dom: &Domain) -> Result<()> {
        if self.nx != dom.nx
            || self.ny != dom.ny
            || self.nz != dom.nzd
            || self.psi.len() != dom.n_omega() * dom.nzd
        {
            return Err(Error::Shape("continuum order parameter vs domain".into()));
        }
        self.pot.check(dom)
    }
}

/// Real gauge phase on every box node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub g: Vec<f64>,
}

impl GaugeFunction {
    pub fn zeros(dom: &Domain) -> Self {
        let [a, b, c] = dom.dims();
        GaugeFunction {
            g: vec![0.0; a * b * c],
        }
    }
    pub fn from_fn(dom: &Domain, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let [nx, ny, nz] = dom.dims();
        let mut g = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    g.push(f(dom.xs[i], dom.ys[j], dom.zs[k]));
                }
            }
        }
        GaugeFunction { g }
    }
    pub fn add(&self, other: &GaugeFunction) -> GaugeFunction {
        GaugeFunction {
            g: self.g.iter().zip(&other.g).map(|(a, b)| a + b).collect(),
        }
    }
}

/// In-plane link values of one plane over a 2-D grid with `nx × ny` nodes:
/// `ax` on x-links (`(nx-1)·ny`), `ay` on y-links (`nx·(ny-1)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneLinks {
    pub nx: usize,
    pub ny: usize,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
}

impl PlaneLinks {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        PlaneLinks {
            nx,
            ny,
            ax: vec![0.0; (nx - 1) * ny],
            ay: vec![0.0; nx * (ny - 1)],
        }
    }
    pub fn check(&self) -> Result<()> {
        if self.ax.len() != (self.nx - 1) * self.ny || self.ay.len() != self.nx * (self.ny - 1) {
            return Err(Error::Shape("plane link arrays".into()));
        }
        Ok(())
    }
}

/// Trace of the in-plane potential on box plane `k`, restricted to Ω.
pub fn plane_links_omega(dom: &Domain, pot: &Potential3D, k: usize) -> PlaneLinks {
    let mut pl = PlaneLinks::zeros(dom.nx, dom.ny);
    for j in 0..dom.ny {
        for i in 0..dom.nx - 1 {
            pl.ax[j * (dom.nx - 1) + i] = pot.a1[pot.i1(dom.ix0 + i, dom.iy0 + j, k)];
        }
    }
    for j in 0..dom.ny - 1 {
        for i in 0..dom.nx {
            pl.ay[j * dom.nx + i] = pot.a2[pot.i2(dom.ix0 + i, dom.iy0 + j, k)];
        }
    }
    pl
}

/// Trace of the in-plane potential on the full box plane `k`.
pub fn plane_links_box(pot: &Potential3D, k: usize) -> PlaneLinks {
    let [nx, ny, _] = pot.dims;
    let n1 = (nx - 1) * ny;
    let n2 = nx * (ny - 1);
    PlaneLinks {
        nx,
        ny,
        ax: pot.a1[k * n1..(k + 1) * n1].to_vec(),
        ay: pot.a2[k * n2..(k + 1) * n2].to_vec(),
    }
}

/// Covariant link differences `(u_head·e^{-iℓa} − u_tail)/ℓ` on a uniform
/// `nx × ny` grid. Returns (x-links, y-links).
pub fn covariant_gradient(
    u: &[C64],
    links: &PlaneLinks,
    hx: f64,
    hy: f64,
) -> Result<(Vec<C64>, Vec<C64>)> {
    links.check()?;
    let (nx, ny) = (links.nx, links.ny);
    if u.len() != nx * ny {
        return Err(Error::Shape(format!(
            "u has {} nodes, links expect {}",
            u.len(),
            nx * ny
        )));
    }
    let mut gx = Vec::with_capacity((nx - 1) * ny);
    for j in 0..ny {
        for i in 0..nx - 1 {
            let a = links.ax[j * (nx - 1) + i];
            gx.push((u[j * nx + i + 1] * C64::from_polar(1.0, -hx * a) - u[j * nx + i]) / hx);
        }
    }
    let mut gy = Vec::with_capacity(nx * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx {
            let a = links.ay[j * nx + i];
            gy.push((u[(j + 1) * nx + i] * C64::from_polar(1.0, -hy * a) - u[j * nx + i]) / hy);
        }
    }
    Ok((gx, gy))
}

/// Plaquette curls of a potential: `c1` on x-normal plaquettes
/// `(NX, NY-1, NZ-1)`, `c2` on y-normal `(NX-1, NY, NZ-1)`, `c3` on z-normal
/// `(NX-1, NY-1, NZ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curl3 {
    pub dims: [usize; 3],
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
}

impl Curl3 {
    #[inline]
    pub fn i1(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.dims[1] - 1) + j) * self.dims[0] + i
    }
    #[inline]
    pub fn i2(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * (self.dims[0] - 1) + i
    }
    #[inline]
    pub fn i3(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.dims[1] - 1) + j) * (self.dims[0] - 1) + i
    }
}

#[inline]
pub(crate) fn curl3_at(dom: &Domain, p: &Potential3D, i: usize, j: usize, k: usize) -> f64 {
    let (hx, hy) = (dom.cell_x[i], dom.cell_y[j]);
    let circ = hx * (p.a1[p.i1(i, j, k)] - p.a1[p.i1(i, j + 1, k)])
        + hy * (p.a2[p.i2(i + 1, j, k)] - p.a2[p.i2(i, j, k)]);
    circ / (hx * hy)
}

#[inline]
pub(crate) fn curl1_at(dom: &Domain, p: &Potential3D, i: usize, j: usize, k: usize) -> f64 {
    let (hy, hz) = (dom.cell_y[j], dom.cell_z[k]);
    let circ = hy * (p.a2[p.i2(i, j, k)] - p.a2[p.i2(i, j, k + 1)])
        + hz * (p.a3[p.i3(i, j + 1, k)] - p.a3[p.i3(i, j, k)]);
    circ / (hy * hz)
}

#[inline]
pub(crate) fn curl2_at(dom: &Domain, p: &Potential3D, i: usize, j: usize, k: usize) -> f64 {
    let (hx, hz) = (dom.cell_x[i], dom.cell_z[k]);
    let circ = hz * (p.a3[p.i3(i, j, k)] - p.a3[p.i3(i + 1, j, k)])
        + hx * (p.a1[p.i1(i, j, k + 1)] - p.a1[p.i1(i, j, k)]);
    circ / (hx * hz)
}

pub fn discrete_curl(dom: &Domain, pot: &Potential3D) -> Result<Curl3> {
    pot.check(dom)?;
    let [nx, ny, nz] = pot.dims;
    let mut c = Curl3 {
        dims: pot.dims,
        c1: vec![0.0; nx * (ny - 1) * (nz - 1)],
        c2: vec![0.0; (nx - 1) * ny * (nz - 1)],
        c3: vec![0.0; (nx - 1) * (ny - 1) * nz],
    };
    for k in 0..nz {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let id = c.i3(i, j, k);
                c.c3[id] = curl3_at(dom, pot, i, j, k);
            }
        }
    }
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                let id = c.i1(i, j, k);
                c.c1[id] = curl1_at(dom, pot, i, j, k);
            }
        }
        for j in 0..ny {
            for i in 0..nx - 1 {
                let id = c.i2(i, j, k);
                c.c2[id] = curl2_at(dom, pot, i, j, k);
            }
        }
    }
    Ok(c)
}

/// Adds the discrete gradient of `g` to the links: `a += (g_head − g_tail)/ℓ`.
pub fn gauge_potential(dom: &Domain, pot: &Potential3D, g: &GaugeFunction) -> Potential3D {
    let [nx, ny, nz] = pot.dims;
    let mut p = pot.clone();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let g0 = g.g[dom.node(i, j, k)];
                if i + 1 < nx {
                    let id = p.i1(i, j, k);
                    p.a1[id] += (g.g[dom.node(i + 1, j, k)] - g0) / dom.cell_x[i];
                }
                if j + 1 < ny {
                    let id = p.i2(i, j, k);
                    p.a2[id] += (g.g[dom.node(i, j + 1, k)] - g0) / dom.cell_y[j];
                }
                if k + 1 < nz {
                    let id = p.i3(i, j, k);
                    p.a3[id] += (g.g[dom.node(i, j, k + 1)] - g0) / dom.cell_z[k];
                }
            }
        }
    }
    p
}

/// Gauge transformation of an LD state: `u_n ← u_n·e^{i g(·, ns)}`.
pub fn apply_gauge(
    dom: &Domain,
    state: &LayeredConfiguration,
    g: &GaugeFunction,
) -> Result<LayeredConfiguration> {
    state.check(dom)?;
    check_gauge(dom, g)?;
    let mut out = state.clone();
    for (n, layer) in out.layers.u.iter_mut().enumerate() {
        let k = dom.layer_k[n];
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let ph = g.g[dom.node(dom.ix0 + i, dom.iy0 + j, k)];
                layer[j * dom.nx + i] *= C64::from_polar(1.0, ph);
            }
        }
    }
    out.pot = gauge_potential(dom, &state.pot, g);
    Ok(out)
}

/// Gauge transformation of an AGL state.
pub fn apply_gauge_continuum(
    dom: &Domain,
    state: &ContinuumConfiguration,
    g: &GaugeFunction,
) -> Result<ContinuumConfiguration> {
    state.check(dom)?;
    check_gauge(dom, g)?;
    let mut out = state.clone();
    for k in 0..dom.nzd {
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let ph = g.g[dom.node(dom.ix0 + i, dom.iy0 + j, dom.kz0 + k)];
                let id = state.idx(i, j, k);
                out.psi[id] *= C64::from_polar(1.0, ph);
            }
        }
    }
    out.pot = gauge_potential(dom, &state.pot, g);
    Ok(out)
}

fn check_gauge(dom: &Domain, g: &GaugeFunction) -> Result<()> {
    let [a, b, c] = dom.dims();
    if g.g.len() != a * b * c {
        return Err(Error::Shape("gauge function vs box".into()));
    }
    if g.g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("gauge function must be finite".into()));
    }
    Ok(())
}

/// `∫_{ns}^{(n+1)s} A³ dx₃` at each Ω node, as the exact sum of z-link values
/// times their lengths.
pub fn vertical_link_phase(dom: &Domain, pot: &Potential3D, n: usize) -> Result<Vec<f64>> {
    if n >= dom.n_layers() {
        return Err(Error::OutOfRange(format!(
            "layer gap {n} with N = {}",
            dom.n_layers()
        )));
    }
    pot.check(dom)?;
    let (k0, k1) = (dom.layer_k[n], dom.layer_k[n + 1]);
    let mut out = vec![0.0; dom.n_omega()];
    for j in 0..dom.ny {
        for i in 0..dom.nx {
            let mut acc = 0.0;
            for k in k0..k1 {
                acc += dom.cell_z[k] * pot.a3[pot.i3(dom.ix0 + i, dom.iy0 + j, k)];
            }
            out[j * dom.nx + i] = acc;
        }
    }
    Ok(out)
}

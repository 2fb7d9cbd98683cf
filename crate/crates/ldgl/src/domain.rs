//! Geometry of the layered sample: cross-section `Ω = [0,Wx]×[0,Wy]`, the
//! cylinder `D = Ω×[0,L]`, the layer planes `z = n·s` and the padded box that
//! stands in for all of space.
//!
//! The box grid is a tensor product. Inside `Ω` (and inside `[0,L]` vertically)
//! the spacing is uniform; the padding is covered by cells that grow
//! geometrically away from the sample, so a wide pad stays cheap.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn default_lambda() -> f64 {
    1.0
}
fn default_pad() -> f64 {
    1.5
}
fn default_cutoff() -> f64 {
    1.0
}
fn default_grading() -> f64 {
    1.25
}

/// Grid resolution. `n_x`, `n_y` count nodes across `Ω` and `n_z` counts
/// planes across `[0, L]`; padding planes are generated from `pad` and
/// `grading`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
    /// growth ratio of exterior cells (1 gives a uniform pad)
    #[serde(default = "default_grading")]
    pub grading: f64,
}

impl Mesh {
    pub fn new(n_x: usize, n_y: usize, n_z: usize) -> Self {
        Mesh {
            n_x,
            n_y,
            n_z,
            grading: default_grading(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub s: f64,
    pub n_layers: usize,
    pub height: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub h_ex: f64,
    pub omega_extent: [f64; 2],
    #[serde(default = "default_pad")]
    pub pad: f64,
    /// vertical extent `d` of the cutoff used by the test construction
    #[serde(default = "default_cutoff")]
    pub cutoff_d: f64,
    pub mesh: Mesh,
}

impl ModelParams {
    /// Parameters with `s = L/N` and the documented defaults
    /// (`λ = 1`, `pad = 1.5`, `d = 1`).
    pub fn new(
        epsilon: f64,
        n_layers: usize,
        height: f64,
        h_ex: f64,
        omega_extent: [f64; 2],
        mesh: Mesh,
    ) -> Self {
        ModelParams {
            epsilon,
            s: height / n_layers as f64,
            n_layers,
            height,
            lambda: default_lambda(),
            h_ex,
            omega_extent,
            pad: default_pad(),
            cutoff_d: default_cutoff(),
            mesh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("s", self.s),
            ("height", self.height),
            ("lambda", self.lambda),
            ("omega_extent[0]", self.omega_extent[0]),
            ("omega_extent[1]", self.omega_extent[1]),
            ("cutoff_d", self.cutoff_d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.h_ex.is_finite() && self.h_ex >= 0.0) {
            return Err(invalid(
                "h_ex",
                format!("must be finite and >= 0, got {}", self.h_ex),
            ));
        }
        if self.n_layers < 1 {
            return Err(invalid("n_layers", "need N >= 1"));
        }
        let l = self.s * self.n_layers as f64;
        if (l - self.height).abs() > 1e-12 * self.height {
            return Err(invalid(
                "s",
                format!("s*N = {l} differs from L = {}", self.height),
            ));
        }
        if !(self.pad.is_finite() && self.pad >= 0.0) {
            return Err(invalid("pad", format!("must be >= 0, got {}", self.pad)));
        }
        let need = self.s / 2.0 + self.cutoff_d;
        if self.pad < need - 1e-12 {
            return Err(invalid(
                "pad",
                format!("pad = {} is below s/2 + d = {need}", self.pad),
            ));
        }
        let m = &self.mesh;
        if m.n_x < 2 || m.n_y < 2 || m.n_z < 2 {
            return Err(invalid("mesh", "each of n_x, n_y, n_z must be >= 2"));
        }
        if !(m.grading.is_finite() && m.grading >= 1.0) {
            return Err(invalid("mesh.grading", "must be >= 1"));
        }
        if (m.n_z - 1) % self.n_layers != 0 {
            return Err(Error::LayerAlignment(format!(
                "vertical spacing L/{} does not divide s = L/{}",
                m.n_z - 1,
                self.n_layers
            )));
        }
        Ok(())
    }

    pub fn h_plane(&self) -> f64 {
        let hx = self.omega_extent[0] / (self.mesh.n_x - 1) as f64;
        let hy = self.omega_extent[1] / (self.mesh.n_y - 1) as f64;
        hx.max(hy)
    }

    /// In-plane spacing must resolve the vortex core: `h ≤ ε/2`.
    pub fn check_resolution(&self) -> Result<()> {
        let h = self.h_plane();
        if h > 0.5 * self.epsilon * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!(
                "in-plane spacing {h} exceeds epsilon/2 = {}",
                0.5 * self.epsilon
            )));
        }
        Ok(())
    }

    pub fn omega_area(&self) -> f64 {
        self.omega_extent[0] * self.omega_extent[1]
    }

    pub fn volume_d(&self) -> f64 {
        self.omega_area() * self.height
    }

    /// `M_ε = (|D|/2)·h_ex·ln(1/(ε√h_ex))`; requires `ε√h_ex < 1`.
    pub fn m_eps(&self) -> Result<f64> {
        m_eps(self.volume_d(), self.epsilon, self.h_ex)
    }
}

pub fn m_eps(vol_d: f64, epsilon: f64, h_ex: f64) -> Result<f64> {
    let q = epsilon * h_ex.sqrt();
    if !(q < 1.0 && h_ex > 0.0) {
        return Err(invalid(
            "h_ex",
            format!("need 0 < eps*sqrt(h_ex) < 1, got {q}"),
        ));
    }
    Ok(0.5 * vol_d * h_ex * (1.0 / q).ln())
}

/// Offsets of the exterior grid lines measured outward from the sample
/// boundary: the first cell has size `h0·ratio`, each next one grows by
/// `ratio`, and everything is rescaled so the last offset is exactly `pad`.
fn graded_offsets(h0: f64, pad: f64, ratio: f64) -> Vec<f64> {
    if pad <= 0.0 {
        return Vec::new();
    }
    let mut cells = Vec::new();
    let mut total = 0.0;
    let mut c = h0 * ratio;
    while total < pad * (1.0 - 1e-9) {
        cells.push(c);
        total += c;
        c *= ratio;
    }
    // shrink or stretch to land on the pad; if the last cell overshoots by
    // more than half, drop it first
    if cells.len() > 1 && total - pad > 0.5 * cells[cells.len() - 1] {
        total -= cells.pop().unwrap();
    }
    let scale = pad / total;
    let mut out = Vec::with_capacity(cells.len());
    let mut acc = 0.0;
    for (i, c) in cells.iter().enumerate() {
        acc += c * scale;
        out.push(if i + 1 == cells.len() { pad } else { acc });
    }
    out
}

/// One graded axis: exterior, uniform interior `[0, w]` with `n` nodes,
/// exterior. Returns coordinates and the index of the node at 0.
fn build_axis(w: f64, n: usize, pad: f64, ratio: f64) -> (Vec<f64>, usize) {
    let h = w / (n - 1) as f64;
    let ext = graded_offsets(h, pad, ratio);
    let mut xs = Vec::with_capacity(n + 2 * ext.len());
    for o in ext.iter().rev() {
        xs.push(-o);
    }
    let i0 = xs.len();
    for i in 0..n {
        xs.push(if i + 1 == n {
            w
        } else {
            w * i as f64 / (n - 1) as f64
        });
    }
    for o in &ext {
        xs.push(w + o);
    }
    (xs, i0)
}

fn dual_lengths(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 {
                xs[0]
            } else {
                0.5 * (xs[i - 1] + xs[i])
            };
            let hi = if i + 1 == n {
                xs[n - 1]
            } else {
                0.5 * (xs[i] + xs[i + 1])
            };
            hi - lo
        })
        .collect()
}

/// Part of each dual interval that lies inside `[xs[i0], xs[i1]]`.
fn dual_lengths_inside(xs: &[f64], i0: usize, i1: usize) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            if i < i0 || i > i1 {
                return 0.0;
            }
            let lo = if i == i0 {
                xs[i]
            } else {
                0.5 * (xs[i - 1] + xs[i])
            };
            let hi = if i == i1 {
                xs[i]
            } else {
                0.5 * (xs[i] + xs[i + 1])
            };
            hi - lo
        })
        .collect()
}

/// In-plane grid of one horizontal plane: coordinates plus the location of
/// `Ω` inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub i0: usize,
    pub j0: usize,
    pub nx: usize,
    pub ny: usize,
}

impl PlaneGrid {
    /// A grid covering exactly `Ω` with `nx × ny` nodes.
    pub fn omega(w: [f64; 2], nx: usize, ny: usize) -> Self {
        let (xs, _) = build_axis(w[0], nx, 0.0, 1.0);
        let (ys, _) = build_axis(w[1], ny, 0.0, 1.0);
        PlaneGrid {
            xs,
            ys,
            i0: 0,
            j0: 0,
            nx,
            ny,
        }
    }
    pub fn is_padded(&self) -> bool {
        self.xs.len() != self.nx || self.ys.len() != self.ny
    }
    pub fn n_nodes(&self) -> usize {
        self.xs.len() * self.ys.len()
    }
    pub fn hx(&self) -> f64 {
        self.xs[self.i0 + 1] - self.xs[self.i0]
    }
    pub fn hy(&self) -> f64 {
        self.ys[self.j0 + 1] - self.ys[self.j0]
    }
}

/// The discretized sample and padded box. Immutable once built.
#[derive(Clone, Debug)]
pub struct Domain {
    pub params: ModelParams,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    /// box index of the node at x = 0, y = 0, z = 0
    pub ix0: usize,
    pub iy0: usize,
    pub kz0: usize,
    /// nodes across Ω and planes across [0, L]
    pub nx: usize,
    pub ny: usize,
    pub nzd: usize,
    /// grid planes per interlayer distance
    pub per_layer: usize,
    /// box z-index of layer n
    pub layer_k: Vec<usize>,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub dual_x: Vec<f64>,
    pub dual_y: Vec<f64>,
    pub dual_z: Vec<f64>,
    pub dual_x_in: Vec<f64>,
    pub dual_y_in: Vec<f64>,
    pub dual_z_in: Vec<f64>,
    pub cell_x: Vec<f64>,
    pub cell_y: Vec<f64>,
    pub cell_z: Vec<f64>,
    /// Ω-local quadrature weights (half spacing on the boundary)
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    /// trapezoid weights of the planes of D
    pub wz: Vec<f64>,
}

impl Domain {
    pub fn dims(&self) -> [usize; 3] {
        [self.xs.len(), self.ys.len(), self.zs.len()]
    }
    pub fn n_layers(&self) -> usize {
        self.params.n_layers
    }
    /// flat index of a box node, x fastest
    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ys.len() + j) * self.xs.len() + i
    }
    /// flat index of an Ω node in a layer array
    #[inline]
    pub fn onode(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn n_omega(&self) -> usize {
        self.nx * self.ny
    }
    pub fn cell_in_omega_x(&self, i: usize) -> bool {
        i >= self.ix0 && i + 1 < self.ix0 + self.nx
    }
    pub fn cell_in_omega_y(&self, j: usize) -> bool {
        j >= self.iy0 && j + 1 < self.iy0 + self.ny
    }
    pub fn cell_in_d_z(&self, k: usize) -> bool {
        k >= self.kz0 && k + 1 < self.kz0 + self.nzd
    }
    /// Is the 3-D cell with lower corner (i,j,k) inside D?
    pub fn cell_in_d(&self, i: usize, j: usize, k: usize) -> bool {
        self.cell_in_omega_x(i) && self.cell_in_omega_y(j) && self.cell_in_d_z(k)
    }
    pub fn node_in_omega(&self, i: usize, j: usize) -> bool {
        i >= self.ix0 && i < self.ix0 + self.nx && j >= self.iy0 && j < self.iy0 + self.ny
    }
    /// Box z-indices of the planes of D.
    pub fn d_planes(&self) -> std::ops::Range<usize> {
        self.kz0..self.kz0 + self.nzd
    }
    pub fn omega_plane(&self) -> PlaneGrid {
        PlaneGrid::omega(self.params.omega_extent, self.nx, self.ny)
    }
    pub fn box_plane(&self) -> PlaneGrid {
        PlaneGrid {
            xs: self.xs.clone(),
            ys: self.ys.clone(),
            i0: self.ix0,
            j0: self.iy0,
            nx: self.nx,
            ny: self.ny,
        }
    }
    /// Total volume of box cells flagged as lying in D.
    pub fn d_mask_volume(&self) -> f64 {
        let [nxb, nyb, nzb] = self.dims();
        let mut v = 0.0;
        for k in 0..nzb - 1 {
            for j in 0..nyb - 1 {
                for i in 0..nxb - 1 {
                    if self.cell_in_d(i, j, k) {
                        v += self.cell_x[i] * self.cell_y[j] * self.cell_z[k];
                    }
                }
            }
        }
        v
    }
    pub fn omega_area_quadrature(&self) -> f64 {
        let mut a = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                a += self.wx[i] * self.wy[j];
            }
        }
        a
    }
    /// Coordinates of layer planes.
    pub fn layer_heights(&self) -> Vec<f64> {
        self.layer_k.iter().map(|&k| self.zs[k]).collect()
    }
}

pub fn build_domain(params: &ModelParams) -> Result<Domain> {
    params.validate()?;
    let m = &params.mesh;
    let [wx_ext, wy_ext] = params.omega_extent;
    let (xs, ix0) = build_axis(wx_ext, m.n_x, params.pad, m.grading);
    let (ys, iy0) = build_axis(wy_ext, m.n_y, params.pad, m.grading);
    let (zs, kz0) = build_axis(params.height, m.n_z, params.pad, m.grading);
    let per_layer = (m.n_z - 1) / params.n_layers;
    let layer_k: Vec<usize> = (0..=params.n_layers).map(|n| kz0 + n * per_layer).collect();
    for (n, &k) in layer_k.iter().enumerate() {
        let z = zs[k];
        let target = n as f64 * params.s;
        if (z - target).abs() > 1e-12 * params.height.max(1.0) {
            return Err(Error::LayerAlignment(format!(
                "layer {n} expected at {target}, grid plane at {z}"
            )));
        }
    }
    let hx = wx_ext / (m.n_x - 1) as f64;
    let hy = wy_ext / (m.n_y - 1) as f64;
    let hz = params.height / (m.n_z - 1) as f64;
    let cells = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let local_w = |n: usize, h: f64| {
        (0..n)
            .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
            .collect::<Vec<_>>()
    };
    Ok(Domain {
        dual_x: dual_lengths(&xs),
        dual_y: dual_lengths(&ys),
        dual_z: dual_lengths(&zs),
        dual_x_in: dual_lengths_inside(&xs, ix0, ix0 + m.n_x - 1),
        dual_y_in: dual_lengths_inside(&ys, iy0, iy0 + m.n_y - 1),
        dual_z_in: dual_lengths_inside(&zs, kz0, kz0 + m.n_z - 1),
        cell_x: cells(&xs),
        cell_y: cells(&ys),
        cell_z: cells(&zs),
        wx: local_w(m.n_x, hx),
        wy: local_w(m.n_y, hy),
        wz: local_w(m.n_z, hz),
        xs,
        ys,
        zs,
        ix0,
        iy0,
        kz0,
        nx: m.n_x,
        ny: m.n_y,
        nzd: m.n_z,
        per_layer,
        layer_k,
        hx,
        hy,
        hz,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_offsets_end_on_pad() {
        for (h, pad, r) in [(0.1, 1.5, 1.25), (0.03, 2.0, 1.3), (0.25, 1.125, 1.0)] {
            let o = graded_offsets(h, pad, r);
            assert_eq!(*o.last().unwrap(), pad);
            assert!(o.windows(2).all(|w| w[1] > w[0]));
        }
        assert!(graded_offsets(0.1, 0.0, 1.2).is_empty());
    }
}

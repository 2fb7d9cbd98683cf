#![allow(dead_code)]

use ldgl::fields::{
    ContinuumConfiguration, GaugeFunction, LayerStack, LayeredConfiguration, Potential3D, C64,
};
use ldgl::{build_domain, Domain, Mesh, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit square, `L = 1`, `n × n × nz` mesh.
pub fn params(eps: f64, n_layers: usize, h_ex: f64, n: usize, nz: usize) -> ModelParams {
    ModelParams::new(eps, n_layers, 1.0, h_ex, [1.0, 1.0], Mesh::new(n, n, nz))
}

pub fn domain(eps: f64, n_layers: usize, h_ex: f64, n: usize, nz: usize) -> Domain {
    build_domain(&params(eps, n_layers, h_ex, n, nz)).unwrap()
}

/// A few random Fourier modes in three variables, amplitude about `amp`.
pub struct SmoothFn {
    modes: Vec<([f64; 3], f64, f64)>,
}

impl SmoothFn {
    pub fn new(rng: &mut ChaCha8Rng, amp: f64) -> Self {
        let modes = (0..4)
            .map(|_| {
                let k = [
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ];
                (k, amp * rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3))
            })
            .collect();
        SmoothFn { modes }
    }
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, ph)| a * (k[0] * x + k[1] * y + k[2] * z + ph).sin())
            .sum()
    }
}

pub fn smooth_gauge(dom: &Domain, seed: u64) -> GaugeFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = SmoothFn::new(&mut rng, 2.0);
    GaugeFunction::from_fn(dom, |x, y, z| f.eval(x, y, z))
}

/// Background plus smooth perturbations sampled at link midpoints.
pub fn smooth_potential(dom: &Domain, h_ex: f64, amp: f64, rng: &mut ChaCha8Rng) -> Potential3D {
    let fs: Vec<SmoothFn> = (0..3).map(|_| SmoothFn::new(rng, amp)).collect();
    let mut p = Potential3D::background(dom, h_ex);
    let [nx, ny, nz] = dom.dims();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let (x, y, z) = (dom.xs[i], dom.ys[j], dom.zs[k]);
                if i + 1 < nx {
                    let id = p.i1(i, j, k);
                    p.a1[id] += fs[0].eval(0.5 * (x + dom.xs[i + 1]), y, z);
                }
                if j + 1 < ny {
                    let id = p.i2(i, j, k);
                    p.a2[id] += fs[1].eval(x, 0.5 * (y + dom.ys[j + 1]), z);
                }
                if k + 1 < nz {
                    let id = p.i3(i, j, k);
                    p.a3[id] += fs[2].eval(x, y, 0.5 * (z + dom.zs[k + 1]));
                }
            }
        }
    }
    p
}

fn smooth_u(rng: &mut ChaCha8Rng) -> impl Fn(f64, f64, f64) -> C64 {
    let r = SmoothFn::new(rng, 0.2);
    let th = SmoothFn::new(rng, 3.0);
    move |x, y, z| C64::from_polar(0.75 + r.eval(x, y, z), th.eval(x, y, z))
}

pub fn smooth_ld_state(dom: &Domain, seed: u64) -> LayeredConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = smooth_u(&mut rng);
    let mut layers = LayerStack::constant(dom, C64::new(0.0, 0.0));
    let g = dom.omega_plane();
    for (n, z) in dom.layer_heights().into_iter().enumerate() {
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                layers.u[n][j * dom.nx + i] = u(g.xs[i], g.ys[j], z);
            }
        }
    }
    let pot = smooth_potential(dom, dom.params.h_ex, 1.0, &mut rng);
    LayeredConfiguration { layers, pot }
}

pub fn smooth_agl_state(dom: &Domain, seed: u64) -> ContinuumConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = smooth_u(&mut rng);
    let pot = smooth_potential(dom, dom.params.h_ex, 1.0, &mut rng);
    let mut st = ContinuumConfiguration::constant(dom, C64::new(0.0, 0.0), pot);
    let g = dom.omega_plane();
    for k in 0..dom.nzd {
        let z = dom.zs[dom.kz0 + k];
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let id = st.idx(i, j, k);
                st.psi[id] = u(g.xs[i], g.ys[j], z);
            }
        }
    }
    st
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

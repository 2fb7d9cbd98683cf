//! Gradient descent for the discrete LD and AGL energies.
//!
//! Iterates are flattened to real vectors (`Re u`, `Im u` per node, then the
//! three link arrays). Steps are taken in the diagonal metric given by the
//! quadrature weight of each unknown, so the step length is a property of
//! the continuum functional rather than of the mesh. Barzilai-Borwein
//! initial steps are safeguarded by Armijo backtracking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, PlaneGrid};
use crate::energy::{
    agl_energy, agl_gradient, gl2d_gradient, ld_energy, ld_gradient, local_energy_agl,
    local_energy_gl2d, local_energy_ld, Dep, EnergyBreakdown, Gl2dMode,
};
use crate::error::{invalid, Error, Result};
use crate::fields::{
    apply_gauge, apply_gauge_continuum, ContinuumConfiguration, GaugeFunction, LayerStack,
    LayeredConfiguration, PlaneLinks, Potential3D, C64,
};
use crate::linalg::{dot, pcg};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// constant trial step, halved until Armijo holds
    Fixed,
    /// Barzilai-Borwein trial step with Armijo backtracking
    AdaptiveBb,
    /// previous accepted step doubled, then Armijo backtracking
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeFix {
    None,
    /// move to the discrete Coulomb gauge every `n` iterations
    CoulombProjectionInterval(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// stop when `‖∇E‖ ≤ grad_tol·(1 + |E|)`
    pub grad_tol: f64,
    pub step_rule: StepRule,
    /// trial step of the fixed rule and first trial of the others
    pub initial_step: f64,
    pub seed: u64,
    /// path of a stored state to start from (used by the runner)
    pub warm_start: Option<String>,
    pub gauge_fix: GaugeFix,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 2000,
            grad_tol: 1e-6,
            step_rule: StepRule::AdaptiveBb,
            initial_step: 1e-2,
            seed: 0,
            warm_start: None,
            gauge_fix: GaugeFix::None,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol", "must be > 0"));
        }
        if self.max_iters < 1 {
            return Err(invalid("max_iters", "must be >= 1"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(invalid("initial_step", "must be finite and > 0"));
        }
        if self.gauge_fix == GaugeFix::CoulombProjectionInterval(0) {
            return Err(invalid("gauge_fix", "interval must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    /// backtracking could not find a decrease
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeTrace {
    pub seed: u64,
    /// energy, gradient norm and accepted step per iteration; entry 0 is
    /// the initial state with step 0
    pub energy: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub step: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// energy before and after the final `|u| ≤ 1` projection
    pub energy_before_polish: f64,
    pub breakdown: EnergyBreakdown,
}

impl MinimizeTrace {
    pub const CSV_HEADER: &'static str = "iter,energy,gradnorm,step";

    pub fn csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for i in 0..self.energy.len() {
            s.push_str(&format!(
                "{i},{:e},{:e},{:e}\n",
                self.energy[i], self.grad_norm[i], self.step[i]
            ));
        }
        s
    }

    /// Accepted energies never increase.
    pub fn is_monotone(&self) -> bool {
        self.energy.windows(2).all(|w| w[1] <= w[0])
    }
}

// ---------------------------------------------------------------------------
// flattening

fn push_complex(x: &mut Vec<f64>, u: &[C64]) {
    for z in u {
        x.push(z.re);
        x.push(z.im);
    }
}

fn push_pot(x: &mut Vec<f64>, p: &Potential3D) {
    x.extend_from_slice(&p.a1);
    x.extend_from_slice(&p.a2);
    x.extend_from_slice(&p.a3);
}

fn read_complex(x: &[f64], u: &mut [C64]) -> usize {
    for (t, z) in u.iter_mut().enumerate() {
        *z = C64::new(x[2 * t], x[2 * t + 1]);
    }
    2 * u.len()
}

fn read_pot(x: &[f64], p: &mut Potential3D) {
    let (n1, n2) = (p.a1.len(), p.a2.len());
    p.a1.copy_from_slice(&x[..n1]);
    p.a2.copy_from_slice(&x[n1..n1 + n2]);
    p.a3.copy_from_slice(&x[n1 + n2..]);
}

fn pot_mass(dom: &Domain, out: &mut Vec<f64>) {
    let [nx, ny, nz] = dom.dims();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx - 1 {
                out.push(dom.cell_x[i] * dom.dual_y[j] * dom.dual_z[k]);
            }
        }
    }
    for k in 0..nz {
        for j in 0..ny - 1 {
            for i in 0..nx {
                out.push(dom.dual_x[i] * dom.cell_y[j] * dom.dual_z[k]);
            }
        }
    }
    for k in 0..nz - 1 {
        for j in 0..ny {
            for i in 0..nx {
                out.push(dom.dual_x[i] * dom.dual_y[j] * dom.cell_z[k]);
            }
        }
    }
}

trait Problem {
    fn n(&self) -> usize;
    fn energy(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> Result<()>;
    /// Moves `x` along its gauge orbit to the Coulomb representative.
    fn gauge_fix(&self, x: &mut [f64]) -> Result<()>;
    /// `|u| ← min(|u|, 1)`.
    fn polish(&self, x: &mut [f64]);
    fn n_complex(&self) -> usize;
}

fn clamp_modulus(x: &mut [f64], n_complex: usize) {
    for t in 0..n_complex {
        let (re, im) = (x[2 * t], x[2 * t + 1]);
        let r = (re * re + im * im).sqrt();
        if r > 1.0 {
            x[2 * t] = re / r;
            x[2 * t + 1] = im / r;
        }
    }
}

struct LdProblem<'a> {
    dom: &'a Domain,
    template: LayeredConfiguration,
}

impl LdProblem<'_> {
    fn state(&self, x: &[f64]) -> LayeredConfiguration {
        let mut st = self.template.clone();
        let mut off = 0;
        for l in st.layers.u.iter_mut() {
            off += read_complex(&x[off..], l);
        }
        read_pot(&x[off..], &mut st.pot);
        st
    }
}

fn flatten_ld(st: &LayeredConfiguration) -> Vec<f64> {
    let mut x = Vec::new();
    for l in &st.layers.u {
        push_complex(&mut x, l);
    }
    push_pot(&mut x, &st.pot);
    x
}

impl Problem for LdProblem<'_> {
    fn n(&self) -> usize {
        2 * self.n_complex() + self.template.pot.n_links()
    }
    fn n_complex(&self) -> usize {
        self.template.layers.u.len() * self.dom.n_omega()
    }
    fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(ld_energy(self.dom, &self.state(x))?.total)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> Result<()> {
        let gr = ld_gradient(self.dom, &self.state(x))?;
        let mut v = Vec::with_capacity(g.len());
        for l in &gr.du {
            push_complex(&mut v, l);
        }
        v.extend_from_slice(&gr.da.a1);
        v.extend_from_slice(&gr.da.a2);
        v.extend_from_slice(&gr.da.a3);
        g.copy_from_slice(&v);
        Ok(())
    }
    fn gauge_fix(&self, x: &mut [f64]) -> Result<()> {
        let st = self.state(x);
        let g = coulomb_gauge(self.dom, &st.pot)?;
        let fixed = apply_gauge(self.dom, &st, &g)?;
        x.copy_from_slice(&flatten_ld(&fixed));
        Ok(())
    }
    fn polish(&self, x: &mut [f64]) {
        clamp_modulus(x, self.n_complex());
    }
}

struct AglProblem<'a> {
    dom: &'a Domain,
    template: ContinuumConfiguration,
}

impl AglProblem<'_> {
    fn state(&self, x: &[f64]) -> ContinuumConfiguration {
        let mut st = self.template.clone();
        let off = read_complex(x, &mut st.psi);
        read_pot(&x[off..], &mut st.pot);
        st
    }
}

fn flatten_agl(st: &ContinuumConfiguration) -> Vec<f64> {
    let mut x = Vec::new();
    push_complex(&mut x, &st.psi);
    push_pot(&mut x, &st.pot);
    x
}

impl Problem for AglProblem<'_> {
    fn n(&self) -> usize {
        2 * self.n_complex() + self.template.pot.n_links()
    }
    fn n_complex(&self) -> usize {
        self.template.psi.len()
    }
    fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(agl_energy(self.dom, &self.state(x))?.total)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> Result<()> {
        let gr = agl_gradient(self.dom, &self.state(x))?;
        let mut v = Vec::with_capacity(g.len());
        push_complex(&mut v, &gr.dpsi);
        v.extend_from_slice(&gr.da.a1);
        v.extend_from_slice(&gr.da.a2);
        v.extend_from_slice(&gr.da.a3);
        g.copy_from_slice(&v);
        Ok(())
    }
    fn gauge_fix(&self, x: &mut [f64]) -> Result<()> {
        let st = self.state(x);
        let g = coulomb_gauge(self.dom, &st.pot)?;
        let fixed = apply_gauge_continuum(self.dom, &st, &g)?;
        x.copy_from_slice(&flatten_agl(&fixed));
        Ok(())
    }
    fn polish(&self, x: &mut [f64]) {
        clamp_modulus(x, self.n_complex());
    }
}

fn ld_mass(dom: &Domain) -> Vec<f64> {
    let mut m = Vec::new();
    for _ in 0..=dom.n_layers() {
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let w = dom.params.s * dom.wx[i] * dom.wy[j];
                m.push(w);
                m.push(w);
            }
        }
    }
    pot_mass(dom, &mut m);
    m
}

fn agl_mass(dom: &Domain) -> Vec<f64> {
    let mut m = Vec::new();
    for k in 0..dom.nzd {
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let w = dom.wz[k] * dom.wx[i] * dom.wy[j];
                m.push(w);
                m.push(w);
            }
        }
    }
    pot_mass(dom, &mut m);
    m
}

/// Gauge function moving `pot` to the discrete Coulomb gauge: the deviation
/// from the background becomes the minimal-norm representative of its
/// orbit, i.e. weighted-divergence free.
pub fn coulomb_gauge(dom: &Domain, pot: &Potential3D) -> Result<GaugeFunction> {
    pot.check(dom)?;
    let bg = Potential3D::background(dom, pot.h_ex);
    let [nx, ny, nz] = pot.dims;
    let nn = nx * ny * nz;
    let mut w1 = vec![0.0; pot.a1.len()];
    let mut w2 = vec![0.0; pot.a2.len()];
    let mut w3 = vec![0.0; pot.a3.len()];
    // link weight V/ℓ² of the graph Laplacian, and V/ℓ for the right side
    let mut rhs = vec![0.0; nn];
    let mut diag = vec![0.0; nn];
    let mut flux = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let t = dom.node(i, j, k);
                if i + 1 < nx {
                    let l = pot.i1(i, j, k);
                    let v = dom.cell_x[i] * dom.dual_y[j] * dom.dual_z[k];
                    let ell = dom.cell_x[i];
                    w1[l] = v / (ell * ell);
                    let f = v / ell * (pot.a1[l] - bg.a1[l]);
                    rhs[t] += f;
                    flux += 2.0 * f * f;
                    rhs[dom.node(i + 1, j, k)] -= f;
                    diag[t] += w1[l];
                    diag[dom.node(i + 1, j, k)] += w1[l];
                }
                if j + 1 < ny {
                    let l = pot.i2(i, j, k);
                    let v = dom.dual_x[i] * dom.cell_y[j] * dom.dual_z[k];
                    let ell = dom.cell_y[j];
                    w2[l] = v / (ell * ell);
                    let f = v / ell * (pot.a2[l] - bg.a2[l]);
                    rhs[t] += f;
                    flux += 2.0 * f * f;
                    rhs[dom.node(i, j + 1, k)] -= f;
                    diag[t] += w2[l];
                    diag[dom.node(i, j + 1, k)] += w2[l];
                }
                if k + 1 < nz {
                    let l = pot.i3(i, j, k);
                    let v = dom.dual_x[i] * dom.dual_y[j] * dom.cell_z[k];
                    let ell = dom.cell_z[k];
                    w3[l] = v / (ell * ell);
                    let f = v / ell * (pot.a3[l] - bg.a3[l]);
                    rhs[t] += f;
                    flux += 2.0 * f * f;
                    rhs[dom.node(i, j, k + 1)] -= f;
                    diag[t] += w3[l];
                    diag[dom.node(i, j, k + 1)] += w3[l];
                }
            }
        }
    }
    let apply = |g: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let t = dom.node(i, j, k);
                    let edge = |h: usize, w: f64, out: &mut [f64]| {
                        let d = w * (g[h] - g[t]);
                        out[t] -= d;
                        out[h] += d;
                    };
                    if i + 1 < nx {
                        edge(dom.node(i + 1, j, k), w1[pot.i1(i, j, k)], out);
                    }
                    if j + 1 < ny {
                        edge(dom.node(i, j + 1, k), w2[pot.i2(i, j, k)], out);
                    }
                    if k + 1 < nz {
                        edge(dom.node(i, j, k + 1), w3[pot.i3(i, j, k)], out);
                    }
                }
            }
        }
    };
    // the system is singular with constant kernel: solve on mean-zero
    // functions, with the tolerance measured against the uncancelled flux
    let mean = rhs.iter().sum::<f64>() / nn as f64;
    rhs.iter_mut().for_each(|v| *v -= mean);
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm <= 1e-12 * flux.sqrt() {
        return Ok(GaugeFunction { g: vec![0.0; nn] });
    }
    let tol = (1e-12 * flux.sqrt() / bnorm).max(1e-12);
    let (g, _) = pcg(apply, &diag, &rhs, tol, 20 * nn)?;
    Ok(GaugeFunction { g })
}

fn descend(
    prob: &dyn Problem,
    mass: &[f64],
    mut x: Vec<f64>,
    opts: &MinimizeOptions,
) -> Result<(Vec<f64>, MinimizeTrace)> {
    opts.validate()?;
    let n = prob.n();
    let mut g = vec![0.0; n];
    let mut e = prob.energy(&x)?;
    if !e.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }
    prob.gradient(&x, &mut g)?;
    // norm of the L² functional derivative
    let gnorm = |g: &[f64]| {
        g.iter()
            .zip(mass)
            .map(|(g, m)| g * g / m)
            .sum::<f64>()
            .sqrt()
    };
    let mut trace = MinimizeTrace {
        seed: opts.seed,
        energy: vec![e],
        grad_norm: vec![gnorm(&g)],
        step: vec![0.0],
        iterations: 0,
        stop_reason: StopReason::MaxIters,
        energy_before_polish: e,
        breakdown: EnergyBreakdown::default(),
    };
    let mut alpha = opts.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    for it in 1..=opts.max_iters {
        if gnorm(&g) <= opts.grad_tol * (1.0 + e.abs()) {
            trace.stop_reason = StopReason::Converged;
            break;
        }
        let d: Vec<f64> = g.iter().zip(mass).map(|(g, m)| -g / m).collect();
        let slope = dot(&g, &d);
        let mut trial = match (opts.step_rule, &prev) {
            (StepRule::Fixed, _) => opts.initial_step,
            (StepRule::Backtracking, _) => 2.0 * alpha,
            (StepRule::AdaptiveBb, Some((xp, gp))) => {
                let mut sms = 0.0;
                let mut sy = 0.0;
                for i in 0..n {
                    let s = x[i] - xp[i];
                    sms += s * s * mass[i];
                    sy += s * (g[i] - gp[i]);
                }
                if sy > 0.0 && sms > 0.0 {
                    sms / sy
                } else {
                    2.0 * alpha
                }
            }
            (StepRule::AdaptiveBb, None) => alpha,
        };
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                xt[i] = x[i] + trial * d[i];
            }
            let et = prob.energy(&xt)?;
            if et.is_finite() && et <= e + 1e-4 * trial * slope {
                accepted = Some(et);
                break;
            }
            trial *= 0.5;
        }
        let Some(et) = accepted else {
            trace.stop_reason = StopReason::LineSearchFailed;
            break;
        };
        alpha = trial;
        prob.gradient(&xt, &mut gt)?;
        prev = Some((x.clone(), g.clone()));
        std::mem::swap(&mut x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        e = et;
        if let GaugeFix::CoulombProjectionInterval(m) = opts.gauge_fix {
            if it % m == 0 {
                prob.gauge_fix(&mut x)?;
                prob.gradient(&x, &mut g)?;
                prev = None;
            }
        }
        trace.iterations = it;
        trace.energy.push(e);
        trace.grad_norm.push(gnorm(&g));
        trace.step.push(trial);
        if !e.is_finite() {
            return Err(Error::NonFinite { iter: it });
        }
    }
    if trace.stop_reason == StopReason::MaxIters && gnorm(&g) <= opts.grad_tol * (1.0 + e.abs()) {
        trace.stop_reason = StopReason::Converged;
    }
    trace.energy_before_polish = e;
    // projection onto the unit disc is 1-Lipschitz and commutes with phase
    // rotation, so no energy term can grow
    prob.polish(&mut x);
    Ok((x, trace))
}

pub fn minimize_ld(
    dom: &Domain,
    initial: &LayeredConfiguration,
    opts: &MinimizeOptions,
) -> Result<(LayeredConfiguration, MinimizeTrace)> {
    initial.check(dom)?;
    dom.params.check_resolution()?;
    let prob = LdProblem {
        dom,
        template: initial.clone(),
    };
    let (x, mut trace) = descend(&prob, &ld_mass(dom), flatten_ld(initial), opts)?;
    let st = prob.state(&x);
    trace.breakdown = ld_energy(dom, &st)?;
    Ok((st, trace))
}

pub fn minimize_agl(
    dom: &Domain,
    initial: &ContinuumConfiguration,
    opts: &MinimizeOptions,
) -> Result<(ContinuumConfiguration, MinimizeTrace)> {
    initial.check(dom)?;
    dom.params.check_resolution()?;
    let prob = AglProblem {
        dom,
        template: initial.clone(),
    };
    let (x, mut trace) = descend(&prob, &agl_mass(dom), flatten_agl(initial), opts)?;
    let st = prob.state(&x);
    trace.breakdown = agl_energy(dom, &st)?;
    Ok((st, trace))
}

// ---------------------------------------------------------------------------
// random states

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    let r = rng.gen_range(0.5..1.0);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    C64::from_polar(r, th)
}

/// Background potential plus uniform noise of size `noise` on every link.
pub fn random_potential(dom: &Domain, h_ex: f64, noise: f64, rng: &mut ChaCha8Rng) -> Potential3D {
    let mut p = Potential3D::background(dom, h_ex);
    for v in
        p.a1.iter_mut()
            .chain(p.a2.iter_mut())
            .chain(p.a3.iter_mut())
    {
        *v += noise * rng.gen_range(-1.0..1.0);
    }
    p
}

/// `|u|` uniform in `[0.5, 1)`, uniform phases, background plus noise.
pub fn random_ld_state(dom: &Domain, seed: u64, noise: f64) -> LayeredConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = LayerStack::constant(dom, C64::new(0.0, 0.0));
    for l in layers.u.iter_mut() {
        for z in l.iter_mut() {
            *z = random_complex(&mut rng);
        }
    }
    let pot = random_potential(dom, dom.params.h_ex, noise, &mut rng);
    LayeredConfiguration { layers, pot }
}

pub fn random_agl_state(dom: &Domain, seed: u64, noise: f64) -> ContinuumConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = ContinuumConfiguration::constant(
        dom,
        C64::new(0.0, 0.0),
        Potential3D::zeros(dom, dom.params.h_ex),
    );
    for z in st.psi.iter_mut() {
        *z = random_complex(&mut rng);
    }
    st.pot = random_potential(dom, dom.params.h_ex, noise, &mut rng);
    st
}

// ---------------------------------------------------------------------------
// finite-difference check of the gradients

/// A state whose energy gradient is to be checked.
pub enum CheckTarget<'a> {
    Ld(&'a Domain, &'a LayeredConfiguration),
    Agl(&'a Domain, &'a ContinuumConfiguration),
    F2d {
        grid: &'a PlaneGrid,
        u: &'a [C64],
        links: &'a PlaneLinks,
        eps: f64,
        h_ex: f64,
    },
}

/// Outcome of [`gradient_check`]: worst relative mismatch and the scale used
/// as absolute floor (`1e-8` of the largest sampled gradient entry). At a
/// stationary state both sides are roundoff and only `max_abs_error` is
/// meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub coords: usize,
    pub floor: f64,
}

/// Compares analytic partial derivatives with central differences of the
/// local energy on `n_coords` seeded random coordinates.
pub fn gradient_check(
    target: CheckTarget,
    fd_step: f64,
    n_coords: usize,
    seed: u64,
) -> Result<GradientCheck> {
    if !(1e-8..=1e-3).contains(&fd_step) {
        return Err(invalid("fd_step", "must lie in [1e-8, 1e-3]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n_coords);
    match target {
        CheckTarget::Ld(dom, st) => {
            let gr = ld_gradient(dom, st)?;
            let nu = st.layers.u.len() * dom.n_omega();
            let p = &st.pot;
            let total = 2 * nu + p.n_links();
            for _ in 0..n_coords {
                let c = rng.gen_range(0..total);
                let mut s = st.clone();
                let (dep, an) = if c < 2 * nu {
                    let (n, t, im) = (c / 2 / dom.n_omega(), (c / 2) % dom.n_omega(), c % 2 == 1);
                    let g = gr.du[n][t];
                    (Dep::U(n, t), if im { g.im } else { g.re })
                } else {
                    link_dep(c - 2 * nu, p, &gr.da.a1, &gr.da.a2, &gr.da.a3)
                };
                let eval = |s: &mut LayeredConfiguration, h: f64| {
                    perturb_ld(s, c, nu, dom.n_omega(), h);
                    let v = local_energy_ld(dom, s, dep);
                    perturb_ld(s, c, nu, dom.n_omega(), -h);
                    v
                };
                let fd = (eval(&mut s, fd_step) - eval(&mut s, -fd_step)) / (2.0 * fd_step);
                pairs.push((an, fd));
            }
        }
        CheckTarget::Agl(dom, st) => {
            let gr = agl_gradient(dom, st)?;
            let nu = st.psi.len();
            let p = &st.pot;
            let total = 2 * nu + p.n_links();
            let np = dom.n_omega();
            for _ in 0..n_coords {
                let c = rng.gen_range(0..total);
                let mut s = st.clone();
                let (dep, an) = if c < 2 * nu {
                    let t = c / 2;
                    let g = gr.dpsi[t];
                    (Dep::U(t / np, t % np), if c % 2 == 1 { g.im } else { g.re })
                } else {
                    link_dep(c - 2 * nu, p, &gr.da.a1, &gr.da.a2, &gr.da.a3)
                };
                let eval = |s: &mut ContinuumConfiguration, h: f64| {
                    perturb_flat(&mut s.psi, &mut s.pot, c, h);
                    let v = local_energy_agl(dom, s, dep);
                    perturb_flat(&mut s.psi, &mut s.pot, c, -h);
                    v
                };
                let fd = (eval(&mut s, fd_step) - eval(&mut s, -fd_step)) / (2.0 * fd_step);
                pairs.push((an, fd));
            }
        }
        CheckTarget::F2d {
            grid,
            u,
            links,
            eps,
            h_ex,
        } => {
            let gr = gl2d_gradient(grid, u, links, eps, h_ex, Gl2dMode::FullPlaneGl)?;
            let nu = u.len();
            let total = 2 * nu + links.ax.len() + links.ay.len();
            for _ in 0..n_coords {
                let c = rng.gen_range(0..total);
                let mut uu = u.to_vec();
                let mut ll = links.clone();
                let (dep, an) = if c < 2 * nu {
                    let g = gr.du[c / 2];
                    (Dep::U(0, c / 2), if c % 2 == 1 { g.im } else { g.re })
                } else if c - 2 * nu < links.ax.len() {
                    (Dep::A1(c - 2 * nu), gr.dax[c - 2 * nu])
                } else {
                    let l = c - 2 * nu - links.ax.len();
                    (Dep::A2(l), gr.day[l])
                };
                let mut eval = |h: f64| {
                    perturb_2d(&mut uu, &mut ll, c, h);
                    let v = local_energy_gl2d(grid, &uu, &ll, eps, h_ex, dep);
                    perturb_2d(&mut uu, &mut ll, c, -h);
                    v
                };
                let fd = (eval(fd_step) - eval(-fd_step)) / (2.0 * fd_step);
                pairs.push((an, fd));
            }
        }
    }
    let scale = pairs.iter().fold(0.0f64, |m, (a, _)| m.max(a.abs()));
    let floor = 1e-8 * scale.max(f64::MIN_POSITIVE);
    let max_rel_error = pairs
        .iter()
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(floor))
        .fold(0.0, f64::max);
    let max_abs_error = pairs.iter().map(|(a, f)| (a - f).abs()).fold(0.0, f64::max);
    Ok(GradientCheck {
        max_rel_error,
        max_abs_error,
        coords: pairs.len(),
        floor,
    })
}

fn link_dep(c: usize, p: &Potential3D, g1: &[f64], g2: &[f64], g3: &[f64]) -> (Dep, f64) {
    let (n1, n2) = (p.a1.len(), p.a2.len());
    if c < n1 {
        (Dep::A1(c), g1[c])
    } else if c < n1 + n2 {
        (Dep::A2(c - n1), g2[c - n1])
    } else {
        (Dep::A3(c - n1 - n2), g3[c - n1 - n2])
    }
}

fn perturb_pot(p: &mut Potential3D, c: usize, h: f64) {
    let (n1, n2) = (p.a1.len(), p.a2.len());
    if c < n1 {
        p.a1[c] += h;
    } else if c < n1 + n2 {
        p.a2[c - n1] += h;
    } else {
        p.a3[c - n1 - n2] += h;
    }
}

fn perturb_complex(z: &mut C64, im: bool, h: f64) {
    if im {
        z.im += h;
    } else {
        z.re += h;
    }
}

fn perturb_ld(s: &mut LayeredConfiguration, c: usize, nu: usize, np: usize, h: f64) {
    if c < 2 * nu {
        let t = c / 2;
        perturb_complex(&mut s.layers.u[t / np][t % np], c % 2 == 1, h);
    } else {
        perturb_pot(&mut s.pot, c - 2 * nu, h);
    }
}

fn perturb_flat(psi: &mut [C64], p: &mut Potential3D, c: usize, h: f64) {
    if c < 2 * psi.len() {
        perturb_complex(&mut psi[c / 2], c % 2 == 1, h);
    } else {
        perturb_pot(p, c - 2 * psi.len(), h);
    }
}

fn perturb_2d(u: &mut [C64], l: &mut PlaneLinks, c: usize, h: f64) {
    let nu = u.len();
    if c < 2 * nu {
        perturb_complex(&mut u[c / 2], c % 2 == 1, h);
    } else if c - 2 * nu < l.ax.len() {
        l.ax[c - 2 * nu] += h;
    } else {
        l.ay[c - 2 * nu - l.ax.len()] += h;
    }
}

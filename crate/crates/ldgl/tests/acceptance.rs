//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! Exits non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldgl::analysis::{
    average_vorticity_distance, compare_interpolation, h_minus1_norm,
    interpolation_identity_residual, rescale_kappa, rescale_kappa_agl, slice_energies, vorticity,
    KappaDirection,
};
use ldgl::construction::{assemble_with, ConstructionOptions, TestConstructionReport};
use ldgl::domain::PlaneGrid;
use ldgl::energy::{agl_energy, agl_energy_kappa, ld_energy, ld_energy_kappa};
use ldgl::fields::{
    apply_gauge, apply_gauge_continuum, ContinuumConfiguration, LayerStack, LayeredConfiguration,
    Potential3D, C64,
};
use ldgl::minimize::{
    gradient_check, minimize_agl, minimize_ld, random_agl_state, random_ld_state, CheckTarget,
    MinimizeOptions,
};
use ldgl::potentials::{single_layer_potential, trace_deviation, LayerSource, KERNEL_C};
use ldgl::{build_domain, Domain, EnergyBreakdown, Mesh, ModelParams};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn opts(max_iters: usize) -> MinimizeOptions {
    MinimizeOptions {
        max_iters,
        ..MinimizeOptions::default()
    }
}

/// Worst relative change over the terms of two breakdowns. Terms below
/// `1e-14·total` are compared against that floor.
fn worst_term_change(a: &EnergyBreakdown, b: &EnergyBreakdown) -> f64 {
    let floor = 1e-14 * a.total.abs();
    a.terms()
        .iter()
        .chain([a.total].iter())
        .zip(b.terms().iter().chain([b.total].iter()))
        .map(|(x, y)| (x - y).abs() / x.abs().max(floor).max(1e-300))
        .fold(0.0, f64::max)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn construction(
    eps: f64,
    h_ex: f64,
    extent: [f64; 2],
    mesh: Mesh,
    translation: Option<[f64; 2]>,
    assemble: bool,
) -> Result<(ModelParams, TestConstructionReport), String> {
    let mut p = ModelParams::new(eps, 2, 1.0, h_ex, extent, mesh);
    p.omega_extent = extent;
    let o = ConstructionOptions {
        translation,
        assemble,
        ..ConstructionOptions::default()
    };
    let rep = ok(assemble_with(&p, 1.0, &o))?;
    Ok((p, rep))
}

fn c1_exact_identities() -> Outcome {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let g = common::smooth_gauge(&dom, 1000 + seed);
        let ld = common::smooth_ld_state(&dom, seed);
        let a = ok(ld_energy(&dom, &ld))?;
        let b = ok(ld_energy(&dom, &ok(apply_gauge(&dom, &ld, &g))?))?;
        worst = worst.max(worst_term_change(&a, &b));
        let agl = common::smooth_agl_state(&dom, 100 + seed);
        let a = ok(agl_energy(&dom, &agl))?;
        let b = ok(agl_energy(
            &dom,
            &ok(apply_gauge_continuum(&dom, &agl, &g))?,
        ))?;
        worst = worst.max(worst_term_change(&a, &b));
    }
    ensure!(worst <= 1e-12, "gauge invariance {worst:e}");

    let mut resid: f64 = 0.0;
    for seed in 0..5 {
        let d = common::domain(0.25, 2, 3.0, 9, 9);
        resid = resid.max(ok(interpolation_identity_residual(
            &d,
            &random_ld_state(&d, seed, 0.1),
        ))?);
    }
    ensure!(resid <= 1e-12, "interpolation identity residual {resid:e}");

    let (_, rep) = construction(
        0.2,
        6.0,
        [1.0, 1.0],
        Mesh::new(11, 11, 5),
        Some([0.49, 0.49]),
        true,
    )?;
    let i_rel = (rep.i2 - rep.i3).abs() / rep.i2.abs();
    ensure!(i_rel <= 1e-10, "I2 vs I3 {i_rel:e}");
    let asm = rep.assembled.as_ref().ok_or("no assembled breakdown")?;
    ensure!(
        asm.josephson == 0.0,
        "constructed josephson {}",
        asm.josephson
    );

    let mut equal = common::smooth_ld_state(&dom, 7);
    equal.pot = Potential3D::background(&dom, 3.0);
    let first = equal.layers.u[0].clone();
    equal.layers.u.iter_mut().for_each(|u| *u = first.clone());
    let j = ok(ld_energy(&dom, &equal))?.josephson;
    ensure!(j == 0.0, "equal-layer josephson {j}");

    let (eps, n) = (0.1, 4usize);
    let d = common::domain(eps, n, 5.0, 21, 9);
    let s = d.params.s;
    let e_ld = ok(ld_energy(&d, &LayeredConfiguration::normal_state(&d)))?.total;
    let want_ld = s * (n + 1) as f64 / (4.0 * eps * eps);
    let normal =
        ContinuumConfiguration::constant(&d, C64::new(0.0, 0.0), Potential3D::background(&d, 5.0));
    let e_agl = ok(agl_energy(&d, &normal))?.total;
    let want_agl = 1.0 / (4.0 * eps * eps);
    let (r_ld, r_agl) = (
        (e_ld - want_ld).abs() / want_ld,
        (e_agl - want_agl).abs() / want_agl,
    );
    ensure!(
        r_ld <= 1e-12 && r_agl <= 1e-12,
        "normal closed forms {r_ld:e} {r_agl:e}"
    );
    Ok(format!(
        "gauge {worst:.1e}, identity {resid:.1e}, I2/I3 {i_rel:.1e}, normal {:.1e}",
        r_ld.max(r_agl)
    ))
}

fn c2_gradients() -> Outcome {
    let dom = common::domain(0.1, 4, 3.0, 33, 9);
    let ld = common::smooth_ld_state(&dom, 21);
    let agl = common::smooth_agl_state(&dom, 22);
    let a = ok(gradient_check(CheckTarget::Ld(&dom, &ld), 1e-6, 200, 1))?;
    let b = ok(gradient_check(CheckTarget::Agl(&dom, &agl), 1e-6, 200, 2))?;
    ensure!(a.coords >= 200 && b.coords >= 200, "too few coordinates");
    ensure!(
        a.max_rel_error <= 1e-6 && b.max_rel_error <= 1e-6,
        "LD {:e}, AGL {:e}",
        a.max_rel_error,
        b.max_rel_error
    );
    Ok(format!(
        "LD {:.1e}, AGL {:.1e} on {} coordinates each",
        a.max_rel_error, b.max_rel_error, a.coords
    ))
}

fn upper_bound_sweep() -> Result<Vec<(f64, TestConstructionReport)>, String> {
    let mut out = Vec::new();
    for eps in [0.08f64, 0.06, 0.045] {
        let n = (2.0 / eps).ceil() as usize + 1;
        let h_ex = eps.ln().powi(2);
        let p = ModelParams::new(eps, 4, 1.0, h_ex, [1.0, 1.0], Mesh::new(n, n, 9));
        let o = ConstructionOptions {
            assemble: false,
            ..ConstructionOptions::default()
        };
        out.push((eps, ok(assemble_with(&p, 1.0, &o))?));
    }
    Ok(out)
}

fn c3_upper_bound(sweep: &[(f64, TestConstructionReport)]) -> Outcome {
    let s = 0.25;
    let first = &sweep[0].1;
    let c = first.c_required.ok_or("no C at the first point")?.max(0.0);
    ensure!(c <= 30.0, "fitted C = {c}");
    let mut ratios = Vec::new();
    for (eps, r) in sweep {
        let ratio = r.ratio.ok_or("no ratio")?;
        let bound = 1.0 + s + c / r.log_factor.ok_or("no log factor")?;
        ensure!(
            ratio <= bound * (1.0 + 1e-12),
            "eps {eps}: ratio {ratio} above {bound}"
        );
        ratios.push(ratio);
    }
    ensure!(
        ratios.windows(2).all(|w| w[1] < w[0]),
        "ratio not decreasing {ratios:?}"
    );
    Ok(format!("C = {c:.3}, ratios {:.4?}", ratios))
}

fn c4_construction_ratios(sweep: &[(f64, TestConstructionReport)]) -> Outcome {
    let cols: [(&str, Vec<f64>); 3] = [
        (
            "h_norm",
            sweep.iter().map(|(_, r)| r.h_norm_ratio).collect(),
        ),
        (
            "xi_phi",
            sweep.iter().map(|(_, r)| r.xi_phi_ratio).collect(),
        ),
        ("i2", sweep.iter().map(|(_, r)| r.i2_ratio).collect()),
    ];
    let mut msg = Vec::new();
    let mut bad = Vec::new();
    for (name, v) in &cols {
        msg.push(format!("{name} {}", sci(v)));
        if !v.iter().all(|x| x.is_finite() && *x >= 0.0) {
            bad.push(format!("{name} not finite"));
        } else if v.windows(2).all(|w| w[1] > w[0]) {
            bad.push(format!("{name} grows monotonically"));
        }
    }
    let msg = msg.join(", ");
    ensure!(bad.is_empty(), "{}; {msg}", bad.join(", "));
    Ok(msg)
}

fn c5_slicing() -> Outcome {
    let dom = common::domain(0.1, 2, 5.0, 21, 5);
    let mut states: Vec<ContinuumConfiguration> = (0..5)
        .map(|k| random_agl_state(&dom, 300 + k, 0.2))
        .chain((0..5).map(|k| common::smooth_agl_state(&dom, 310 + k)))
        .collect();
    let (min, _) = ok(minimize_agl(
        &dom,
        &random_agl_state(&dom, 320, 0.05),
        &opts(500),
    ))?;
    states.push(min);
    let mut slack = f64::INFINITY;
    for st in &states {
        let total = ok(agl_energy(&dom, st))?.total;
        let sl = ok(slice_energies(&dom, st))?;
        let margin = total - sl.integral + 1e-10 * (1.0 + total.abs());
        ensure!(
            margin >= 0.0,
            "total {total} below slice integral {}",
            sl.integral
        );
        slack = slack.min((total - sl.integral) / total.abs());
    }
    Ok(format!(
        "{} states, smallest relative slack {slack:.2e}",
        states.len()
    ))
}

fn c6_comparison() -> Outcome {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let flat = LayeredConfiguration {
        layers: LayerStack::constant(&dom, C64::from_polar(0.7, 1.1)),
        pot: Potential3D::background(&dom, 3.0),
    };
    let c = ok(compare_interpolation(&dom, &flat))?;
    ensure!(c.gap <= 1e-8, "equal-layer gap {}", c.gap);
    // with the outer layers at half weight the two energies coincide
    ensure!(
        c.gap_trapezoid.abs() <= 1e-8,
        "equal-layer trapezoid gap {}",
        c.gap_trapezoid
    );

    let mut ratios = Vec::new();
    for (eps, n_layers) in [(0.25f64, 4usize), (0.125, 8)] {
        let n = (2.0 / eps).ceil() as usize + 1;
        let h_ex = eps.ln().powi(2);
        let p = common::params(eps, n_layers, h_ex, n, 2 * n_layers + 1);
        ensure!((p.s - eps).abs() < 1e-15, "s = {} at eps {eps}", p.s);
        let d = ok(build_domain(&p))?;
        let (st, _) = ok(minimize_ld(&d, &random_ld_state(&d, 5, 0.05), &opts(2000)))?;
        let c = ok(compare_interpolation(&d, &st))?;
        ensure!(
            c.holds && c.agl.total <= c.ld.total * (1.0 + c.bound),
            "eps {eps}: AGL {} vs LD {} (1 + {})",
            c.agl.total,
            c.ld.total,
            c.bound
        );
        ratios.push(c.gap.abs() / ok(p.m_eps())?);
    }
    ensure!(non_increasing(&ratios), "|gap|/M_eps {ratios:?}");
    Ok(format!(
        "equal-layer gap {:.3}, trapezoid gap {:.1e}, |gap|/M_eps {}",
        c.gap,
        c.gap_trapezoid,
        sci(&ratios)
    ))
}

fn circulation(p: &ModelParams, rep: &TestConstructionReport) -> Result<Vec<f64>, String> {
    let dom = ok(build_domain(p))?;
    let st = rep
        .config
        .as_ref()
        .ok_or("construction kept no configuration")?;
    Ok(ok(vorticity(&dom, st))?.circulation)
}

fn c7_vorticity() -> Outcome {
    let cases = [
        (
            0usize,
            0.15,
            1.0,
            [1.0, 1.0],
            Mesh::new(15, 15, 5),
            [-1.2, -1.2],
        ),
        (1, 0.2, 6.0, [1.0, 1.0], Mesh::new(11, 11, 5), [0.49, 0.49]),
        (3, 0.2, 6.0, [3.0, 1.0], Mesh::new(31, 11, 5), [0.49, 0.49]),
    ];
    let mut worst: f64 = 0.0;
    for (k, eps, h_ex, extent, mesh, x0) in cases {
        let (p, rep) = construction(eps, h_ex, extent, mesh, Some(x0), true)?;
        ensure!(
            rep.vortices_in_omega == k,
            "expected {k} vortices, got {}",
            rep.vortices_in_omega
        );
        for c in circulation(&p, &rep)? {
            let err = (c - 2.0 * PI * k as f64).abs();
            ensure!(err <= 1e-3, "k = {k}: circulation {c}");
            worst = worst.max(err);
        }
    }

    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let mut gauge: f64 = 0.0;
    for seed in 0..20 {
        let st = common::smooth_ld_state(&dom, 400 + seed);
        let g = common::smooth_gauge(&dom, 420 + seed);
        let a = ok(vorticity(&dom, &st))?;
        let b = ok(vorticity(&dom, &ok(apply_gauge(&dom, &st, &g))?))?;
        for (x, y) in a.mu.iter().flatten().zip(b.mu.iter().flatten()) {
            gauge = gauge.max((x - y).abs() / (1.0 + x.abs()));
        }
    }
    ensure!(gauge <= 1e-12, "mu gauge invariance {gauge:e}");

    let mut dist = Vec::new();
    for h_ex in [4.0, 8.0, 16.0, 32.0] {
        let dom = common::domain(0.1, 2, h_ex, 21, 5);
        let (st, _) = ok(minimize_ld(
            &dom,
            &random_ld_state(&dom, 9, 0.05),
            &opts(2000),
        ))?;
        dist.push(ok(average_vorticity_distance(&dom, &st))?);
    }
    ensure!(non_increasing(&dist), "distance over h_ex {dist:?}");
    Ok(format!(
        "quantization {worst:.1e}, gauge {gauge:.1e}, distance {dist:.4?}"
    ))
}

fn smooth_source(n: usize) -> Result<LayerSource, String> {
    let g = PlaneGrid::omega([1.0, 1.0], n, n);
    let mut v = Vec::new();
    for &y in &g.ys {
        for &x in &g.xs {
            v.push(1.0 + 0.5 * (2.0 * x + y).sin() + x * y);
        }
    }
    ok(LayerSource::new(g, 0.0, v))
}

fn laplacian_residual(src: &LayerSource, p: [f64; 3], h: f64) -> Result<f64, String> {
    let mut pts = vec![p];
    for a in 0..3 {
        for sg in [1.0, -1.0] {
            let mut q = p;
            q[a] += sg * h;
            pts.push(q);
        }
    }
    let v = ok(single_layer_potential(src, &pts, false))?;
    Ok((v[1..].iter().sum::<f64>() - 6.0 * v[0]) / (h * h))
}

/// Copies the in-plane links of box plane `k0` to every plane and zeroes
/// the vertical links.
fn flatten_in_x3(dom: &Domain, pot: &mut Potential3D, k0: usize) {
    let [nx, ny, nz] = dom.dims();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    let (a, b) = (pot.i1(i, j, k), pot.i1(i, j, k0));
                    pot.a1[a] = pot.a1[b];
                }
                if j + 1 < ny {
                    let (a, b) = (pot.i2(i, j, k), pot.i2(i, j, k0));
                    pot.a2[a] = pot.a2[b];
                }
            }
        }
    }
    pot.a3.iter_mut().for_each(|a| *a = 0.0);
}

fn c8_potentials() -> Outcome {
    let src = smooth_source(21)?;
    let mut ratios = Vec::new();
    for p in [[0.4, 0.6, 0.35], [1.3, 0.2, -0.5]] {
        let r = laplacian_residual(&src, p, 0.1)? / laplacian_residual(&src, p, 0.05)?;
        ensure!((3.5..=4.5).contains(&r), "harmonicity ratio {r} at {p:?}");
        ratios.push(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let (x, y, d) = (
            rng.gen_range(-1.0..2.0),
            rng.gen_range(-1.0..2.0),
            rng.gen_range(0.01..2.0),
        );
        let v = ok(single_layer_potential(
            &src,
            &[[x, y, d], [x, y, -d]],
            false,
        ))?;
        ensure!(v[0] == v[1], "mirror {} vs {}", v[0], v[1]);
    }
    let q = src.integral();
    let mut mono: f64 = 0.0;
    for dir in [[0.8, 0.0, 0.6], [0.0, 0.6, 0.8], [-0.5, 0.5, 0.7071]] {
        let r = 10.0 * 2f64.sqrt();
        let p = [0.5 + r * dir[0], 0.5 + r * dir[1], r * dir[2]];
        let dist = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) + p[2].powi(2)).sqrt();
        let v = ok(single_layer_potential(&src, &[p], false))?[0];
        mono = mono.max((v / (KERNEL_C * q / dist) - 1.0).abs());
    }
    ensure!(mono < 0.02, "monopole error {mono}");

    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let mut flat = common::smooth_ld_state(&dom, 30);
    flatten_in_x3(&dom, &mut flat.pot, dom.layer_k[0]);
    let td0 = ok(trace_deviation(&dom, &flat))?;
    ensure!(td0 == 0.0, "x3-independent trace deviation {td0}");

    let mut td = Vec::new();
    for n_layers in [2usize, 4, 8] {
        let dom = common::domain(0.25, n_layers, 3.0, 9, 2 * n_layers + 1);
        let (st, _) = ok(minimize_ld(
            &dom,
            &random_ld_state(&dom, 31, 0.05),
            &opts(1000),
        ))?;
        td.push(ok(trace_deviation(&dom, &st))?);
    }
    ensure!(non_increasing(&td), "trace deviation as s shrinks {td:?}");
    Ok(format!(
        "harmonic ratios {ratios:.3?}, monopole {mono:.1e}, trace deviation over s = 1/2, 1/4, 1/8: {}",
        sci(&td)
    ))
}

fn c9_h_minus1() -> Outcome {
    let g = PlaneGrid::omega([1.0, 1.0], 65, 65);
    let mut f = Vec::new();
    for &y in &g.ys {
        for &x in &g.xs {
            f.push((PI * x).sin() * (PI * y).sin());
        }
    }
    let v = ok(h_minus1_norm(&g, &f))?;
    let want = 1.0 / (8f64.sqrt() * PI);
    ensure!((v - want).abs() <= 1e-3, "{v} vs {want}");
    Ok(format!("{v:.7} vs {want:.7}"))
}

fn c10_rescaling() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut trip: f64 = 0.0;
    for (eps, seed) in [(0.1f64, 1u64), (0.25, 2), (0.5, 3)] {
        let n = (2.0 / eps).ceil() as usize + 1;
        let dom = common::domain(eps, 2, 3.0, n.max(9), 5);
        let kappa = 1.0 / eps;
        for k in 0..3 {
            let st = random_ld_state(&dom, 10 * seed + k, 0.3);
            let there = ok(rescale_kappa(&st, eps, KappaDirection::ToKappa))?;
            let g = ok(ld_energy(&dom, &st))?.total;
            let gk = ok(ld_energy_kappa(&dom, &there, kappa))?;
            worst = worst.max((g - 0.5 * kappa * kappa * gk).abs() / g);
            let back = ok(rescale_kappa(&there, eps, KappaDirection::FromKappa))?;
            ensure!(back.layers == st.layers, "round trip changed u");
            for (a, b) in back
                .pot
                .a1
                .iter()
                .chain(&back.pot.a2)
                .chain(&back.pot.a3)
                .zip(st.pot.a1.iter().chain(&st.pot.a2).chain(&st.pot.a3))
            {
                trip = trip.max((a - b).abs() / b.abs().max(1.0));
            }

            let ct = random_agl_state(&dom, 100 + 10 * seed + k, 0.3);
            let ck = ok(rescale_kappa_agl(&ct, eps, KappaDirection::ToKappa))?;
            let g = ok(agl_energy(&dom, &ct))?.total;
            let gk = ok(agl_energy_kappa(&dom, &ck, kappa))?;
            worst = worst.max((g - 0.5 * kappa * kappa * gk).abs() / g);
        }
    }
    ensure!(worst <= 1e-10, "G vs (k^2/2) G_k {worst:e}");
    ensure!(trip <= 1e-14, "round trip {trip:e}");
    Ok(format!("identity {worst:.1e}, round trip {trip:.1e}"))
}

fn cli(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = ok(Command::new(env!("CARGO_BIN_EXE_ldgl"))
        .current_dir(cwd)
        .args(args)
        .output())?;
    ensure!(
        out.status.success(),
        "ldgl {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn c11_reproducibility() -> Outcome {
    let root = ok(tempfile::tempdir())?;
    let cfg = root.path().join("c.toml");
    ok(std::fs::write(
        &cfg,
        "seed = 11\n[model]\nepsilon = 0.25\nn_layers = 2\nh_ex = 2.0\n[sweep]\nh_ex = [1.5, 2.5]\n[minimize]\nmax_iters = 60\n",
    ))?;
    let cfg = cfg.to_str().ok_or("path")?;
    let mut tables = Vec::new();
    for (name, extra) in [("a", vec!["--dump-fields"]), ("b", vec![])] {
        let dir = root.path().join(name);
        ok(std::fs::create_dir_all(&dir))?;
        let mut args = vec!["minimize-ld", "--config", cfg, "--out", "run"];
        args.extend(extra);
        cli(&dir, &args)?;
        cli(&dir, &["verify", "--out", "run"])?;
        cli(&dir, &["report", "--out", "agg", "run"])?;
        tables.push(ok(std::fs::read(dir.join("agg/report.csv")))?);
    }
    ensure!(tables[0] == tables[1], "aggregated tables differ");
    let rows = String::from_utf8_lossy(&tables[0]).lines().count() - 1;
    Ok(format!(
        "{rows} rows bit-identical, verify passed on both runs"
    ))
}

fn main() {
    let sweep = std::cell::OnceCell::new();
    let sweep_ref = &sweep;
    let get_sweep = move || -> Result<&Vec<(f64, TestConstructionReport)>, String> {
        if sweep_ref.get().is_none() {
            let _ = sweep_ref.set(upper_bound_sweep());
        }
        sweep_ref.get().unwrap().as_ref().map_err(|e| e.clone())
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("exact identities", Box::new(c1_exact_identities)),
        ("gradient correctness", Box::new(c2_gradients)),
        (
            "upper-bound reproduction",
            Box::new(|| c3_upper_bound(get_sweep()?)),
        ),
        (
            "construction ratios bounded",
            Box::new(|| c4_construction_ratios(get_sweep()?)),
        ),
        ("slicing inequality", Box::new(c5_slicing)),
        ("comparison pipeline", Box::new(c6_comparison)),
        ("vorticity", Box::new(c7_vorticity)),
        ("layer potentials", Box::new(c8_potentials)),
        ("H^-1 oracle", Box::new(c9_h_minus1)),
        ("kappa rescaling", Box::new(c10_rescaling)),
        ("reproducibility", Box::new(c11_reproducibility)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(m) => println!("PASS {:>2} {name}: {m} [{secs:.1}s]", i + 1),
            Err(m) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {m} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

mod common;

use std::f64::consts::PI;

use ldgl::analysis::{
    a3_l6_norm_sq, asymptotic_report, average_vorticity_distance, compare_interpolation,
    f2d_decomposition, h_minus1_norm, h_minus1_norm_cells, interpolate_layers,
    interpolation_identity_residual, layer_difference_l4, rescale_kappa, rescale_kappa_agl,
    slice_energies, theorem2_bundle, vorticity, vorticity_distance, KappaDirection, VorticityField,
};
use ldgl::domain::PlaneGrid;
use ldgl::energy::{agl_energy, agl_energy_kappa, ld_energy, ld_energy_kappa};
use ldgl::fields::{
    apply_gauge, ContinuumConfiguration, LayerStack, LayeredConfiguration, Potential3D, C64,
};
use ldgl::minimize::{random_agl_state, random_ld_state};
use ldgl::Domain;

const ONE: C64 = C64::new(1.0, 0.0);

fn vortex_state(dom: &Domain, x0: [f64; 2], core: f64) -> LayeredConfiguration {
    let g = dom.omega_plane();
    let mut layers = LayerStack::constant(dom, ONE);
    for u in layers.u.iter_mut() {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (dx, dy) = (g.xs[i] - x0[0], g.ys[j] - x0[1]);
                let r = dx.hypot(dy);
                u[j * g.nx + i] = C64::from_polar((r / core).tanh(), dy.atan2(dx));
            }
        }
    }
    LayeredConfiguration {
        layers,
        pot: Potential3D::zeros(dom, dom.params.h_ex),
    }
}

#[test]
fn vorticity_of_the_superconducting_state_vanishes() {
    let dom = common::domain(0.1, 2, 0.0, 21, 5);
    let st = LayeredConfiguration {
        layers: LayerStack::constant(&dom, ONE),
        pot: Potential3D::zeros(&dom, 0.0),
    };
    let v = vorticity(&dom, &st).unwrap();
    assert!(v.mu.iter().flatten().all(|m| *m == 0.0));
    assert!(v.circulation.iter().all(|c| *c == 0.0));
}

#[test]
fn single_vortex_carries_two_pi() {
    let dom = common::domain(0.05, 2, 1.0, 41, 5);
    let st = vortex_state(&dom, [0.51, 0.49], 0.05);
    let v = vorticity(&dom, &st).unwrap();
    for c in &v.circulation {
        assert!((c - 2.0 * PI).abs() < 1e-3, "{c}");
    }
    let g = common::smooth_gauge(&dom, 3);
    let w = vorticity(&dom, &apply_gauge(&dom, &st, &g).unwrap()).unwrap();
    for (a, b) in v.mu.iter().flatten().zip(w.mu.iter().flatten()) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

#[test]
fn vorticity_is_gauge_invariant_on_random_states() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    for seed in 0..3 {
        let st = common::smooth_ld_state(&dom, 60 + seed);
        let g = common::smooth_gauge(&dom, 70 + seed);
        let (a, b) = (
            vorticity(&dom, &st).unwrap(),
            vorticity(&dom, &apply_gauge(&dom, &st, &g).unwrap()).unwrap(),
        );
        for (x, y) in a.mu.iter().flatten().zip(b.mu.iter().flatten()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }
}

/// `∫w` for `−Δw = 1` on the unit square with zero boundary values.
fn torsion_series() -> f64 {
    let mut s = 0.0;
    for m in (1..400).step_by(2) {
        for n in (1..400).step_by(2) {
            let (m, n) = (m as f64, n as f64);
            s += 64.0 / (PI.powi(6) * m * m * n * n * (m * m + n * n));
        }
    }
    s
}

#[test]
fn h_minus1_norm_examples() {
    let g = PlaneGrid::omega([1.0, 1.0], 65, 65);
    assert_eq!(h_minus1_norm(&g, &vec![0.0; 65 * 65]).unwrap(), 0.0);
    let mut f = Vec::new();
    for &y in &g.ys {
        for &x in &g.xs {
            f.push((PI * x).sin() * (PI * y).sin());
        }
    }
    let v = h_minus1_norm(&g, &f).unwrap();
    assert!((v - 1.0 / (8f64.sqrt() * PI)).abs() < 1e-3, "{v}");
    let f2: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
    assert!((h_minus1_norm(&g, &f2).unwrap() - 2.0 * v).abs() < 1e-10);

    let one = h_minus1_norm(&g, &vec![1.0; 65 * 65]).unwrap();
    let want = torsion_series().sqrt();
    assert!((one / want - 1.0).abs() < 1e-2, "{one} vs {want}");
    assert!(h_minus1_norm(&g, &[1.0; 3]).is_err());
}

#[test]
fn average_vorticity_distance_examples() {
    let dom = common::domain(0.05, 2, 5.0, 33, 5);
    // no vorticity: the distance is the norm of the constant 1
    let st = LayeredConfiguration {
        layers: LayerStack::constant(&dom, ONE),
        pot: Potential3D::zeros(&dom, 5.0),
    };
    let d = average_vorticity_distance(&dom, &st).unwrap();
    let ones = vec![1.0; 32 * 32];
    assert!((d - h_minus1_norm_cells(&dom.omega_plane(), &ones).unwrap()).abs() < 1e-12);
    assert!((d / torsion_series().sqrt() - 1.0).abs() < 2e-2, "{d}");

    let synthetic = VorticityField {
        nx: 33,
        ny: 33,
        mu: vec![vec![5.0; 32 * 32]; 3],
        circulation: vec![5.0; 3],
    };
    assert_eq!(vorticity_distance(&dom, &synthetic, 5.0).unwrap(), 0.0);

    let zero_field = LayeredConfiguration {
        layers: LayerStack::constant(&dom, ONE),
        pot: Potential3D::zeros(&dom, 0.0),
    };
    assert!(average_vorticity_distance(&dom, &zero_field).is_err());
}

#[test]
fn interpolation_matches_layers_and_midpoints() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let st = random_ld_state(&dom, 13, 0.1);
    let psi = interpolate_layers(&dom, &st).unwrap();
    let p = dom.per_layer;
    assert_eq!(p, 2);
    for n in 0..=2 {
        assert_eq!(psi.plane(n * p), &st.layers.u[n][..]);
    }
    for n in 0..2 {
        let mid = psi.plane(n * p + 1);
        for (t, z) in mid.iter().enumerate() {
            let want = (st.layers.u[n][t] + st.layers.u[n + 1][t]) * 0.5;
            assert!((z - want).norm() < 1e-15);
        }
    }
    assert_eq!(psi.pot, st.pot);
    for seed in 0..5 {
        let dom = common::domain(0.25, 2, 3.0, 9, 9);
        let r = interpolation_identity_residual(&dom, &random_ld_state(&dom, seed, 0.1)).unwrap();
        assert!(r <= 1e-12, "{r}");
    }
}

#[test]
fn layer_energies_of_the_normal_state() {
    let dom = common::domain(0.1, 4, 5.0, 21, 9);
    let f = f2d_decomposition(&dom, &LayeredConfiguration::normal_state(&dom)).unwrap();
    for v in &f.per_layer {
        assert!((v - 25.0).abs() < 1e-12 * 25.0, "{v}");
    }
    // s·N·|Ω|/(4ε²)
    assert!((f.weighted_sum - 0.25 * 4.0 * 25.0).abs() < 1e-12 * 25.0);
}

#[test]
fn identical_layers_have_identical_layer_energies() {
    let dom = common::domain(0.25, 3, 3.0, 9, 7);
    let mut st = common::smooth_ld_state(&dom, 14);
    let first = st.layers.u[0].clone();
    st.layers.u.iter_mut().for_each(|u| *u = first.clone());
    // copy the in-plane links of layer 0 to every plane
    let [nx, ny, nz] = dom.dims();
    let k0 = dom.layer_k[0];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    let (a, b) = (st.pot.i1(i, j, k), st.pot.i1(i, j, k0));
                    st.pot.a1[a] = st.pot.a1[b];
                }
                if j + 1 < ny {
                    let (a, b) = (st.pot.i2(i, j, k), st.pot.i2(i, j, k0));
                    st.pot.a2[a] = st.pot.a2[b];
                }
            }
        }
    }
    let f = f2d_decomposition(&dom, &st).unwrap();
    assert!(f.per_layer.iter().all(|v| *v == f.per_layer[0]));
}

#[test]
fn slice_energies_examples() {
    let dom = common::domain(0.1, 2, 5.0, 21, 5);
    let normal = ContinuumConfiguration::constant(
        &dom,
        C64::new(0.0, 0.0),
        Potential3D::background(&dom, 5.0),
    );
    let sl = slice_energies(&dom, &normal).unwrap();
    assert!(sl.per_slice.iter().all(|v| (v - 25.0).abs() < 1e-12 * 25.0));
    let total = agl_energy(&dom, &normal).unwrap().total;
    assert!(
        (total - sl.integral).abs() < 1e-12 * total,
        "{total} vs {}",
        sl.integral
    );

    // x₃-independent: equal slices, integral L·F
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let mut flat = ContinuumConfiguration::constant(&dom, ONE, Potential3D::background(&dom, 3.0));
    let base = common::smooth_ld_state(&dom, 15).layers.u[0].clone();
    for k in 0..dom.nzd {
        let np = dom.n_omega();
        flat.psi[k * np..(k + 1) * np].copy_from_slice(&base);
    }
    let sl = slice_energies(&dom, &flat).unwrap();
    assert!(sl.per_slice.iter().all(|v| *v == sl.per_slice[0]));
    assert!((sl.integral - sl.per_slice[0]).abs() < 1e-12 * sl.integral);

    // twisting the phase in x₃ adds vertical kinetic energy only
    let mut twisted = flat.clone();
    for k in 0..dom.nzd {
        let np = dom.n_omega();
        let rot = C64::from_polar(1.0, 2.0 * dom.zs[dom.kz0 + k]);
        twisted.psi[k * np..(k + 1) * np]
            .iter_mut()
            .for_each(|z| *z *= rot);
    }
    let tw = slice_energies(&dom, &twisted).unwrap();
    let e = agl_energy(&dom, &twisted).unwrap();
    assert!((tw.integral - sl.integral).abs() < 1e-12 * sl.integral);
    assert!(e.vertical_kinetic > 0.0 && e.total > tw.integral);

    for seed in 0..5 {
        let st = random_agl_state(&dom, 80 + seed, 0.2);
        let total = agl_energy(&dom, &st).unwrap().total;
        let sl = slice_energies(&dom, &st).unwrap();
        assert!(total >= sl.integral - 1e-10 * (1.0 + total.abs()));
    }
}

#[test]
fn bundle_sums_the_lower_order_terms() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let b = ld_energy(&dom, &common::smooth_ld_state(&dom, 16)).unwrap();
    let want = b.josephson + b.magnetic_exterior + b.magnetic_mixed_in_d;
    assert!((theorem2_bundle(&b) - want).abs() <= 1e-12 * want.abs());
    let flat = LayeredConfiguration {
        layers: LayerStack::constant(&dom, C64::from_polar(0.8, 0.3)),
        pot: Potential3D::background(&dom, 3.0),
    };
    let b = ld_energy(&dom, &flat).unwrap();
    assert_eq!(b.josephson, 0.0);
    // the background curl equals h_ex up to rounding
    assert!(theorem2_bundle(&b).abs() < 1e-20);
}

#[test]
fn kappa_rescaling() {
    let dom = common::domain(0.1, 2, 3.0, 9, 5);
    let st = random_ld_state(&dom, 17, 0.3);
    let there = rescale_kappa(&st, 0.1, KappaDirection::ToKappa).unwrap();
    let back = rescale_kappa(&there, 0.1, KappaDirection::FromKappa).unwrap();
    assert_eq!(back.layers, st.layers);
    for (a, b) in back
        .pot
        .a1
        .iter()
        .chain(&back.pot.a2)
        .chain(&back.pot.a3)
        .zip(st.pot.a1.iter().chain(&st.pot.a2).chain(&st.pot.a3))
    {
        assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
    }
    let kappa = 10.0;
    let g = ld_energy(&dom, &st).unwrap().total;
    let gk = ld_energy_kappa(&dom, &there, kappa).unwrap();
    assert!(
        (g - 0.5 * kappa * kappa * gk).abs() <= 1e-10 * g,
        "{g} vs {}",
        0.5 * kappa * kappa * gk
    );

    let ct = random_agl_state(&dom, 18, 0.3);
    let ck = rescale_kappa_agl(&ct, 0.1, KappaDirection::ToKappa).unwrap();
    let (g, gk) = (
        agl_energy(&dom, &ct).unwrap().total,
        agl_energy_kappa(&dom, &ck, kappa).unwrap(),
    );
    assert!((g - 0.5 * kappa * kappa * gk).abs() <= 1e-10 * g);

    // κ = 1: the map is the identity and G = G_κ/2
    let dom1 = common::domain(1.0, 2, 3.0, 9, 5);
    let st1 = random_ld_state(&dom1, 19, 0.3);
    let same = rescale_kappa(&st1, 1.0, KappaDirection::ToKappa).unwrap();
    assert_eq!(same, st1);
    let (g, gk) = (
        ld_energy(&dom1, &st1).unwrap().total,
        ld_energy_kappa(&dom1, &same, 1.0).unwrap(),
    );
    assert!((g - 0.5 * gk).abs() <= 1e-12 * g);
    assert!(rescale_kappa(&st, 0.0, KappaDirection::ToKappa).is_err());
}

#[test]
fn comparison_of_equal_layers_and_random_states() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let flat = LayeredConfiguration {
        layers: LayerStack::constant(&dom, C64::from_polar(0.7, 1.1)),
        pot: Potential3D::background(&dom, 3.0),
    };
    let c = compare_interpolation(&dom, &flat).unwrap();
    assert!(c.gap <= 1e-8, "{}", c.gap);
    assert!(c.holds);
    assert_eq!(c.layer_diff_l4, 0.0);
    assert_eq!(layer_difference_l4(&dom, &flat).unwrap(), 0.0);
    assert_eq!(a3_l6_norm_sq(&dom, &flat.pot).unwrap(), 0.0);
    for seed in 0..5 {
        let st = common::smooth_ld_state(&dom, 90 + seed);
        let c = compare_interpolation(&dom, &st).unwrap();
        assert!(c.holds, "{c:?}");
        assert!(c.agl.total <= c.ld.total * (1.0 + c.bound) + 1e-12 * c.ld.total);
        assert!((c.gap - (c.agl.total - c.ld.total)).abs() < 1e-12 * c.ld.total);
    }
}

#[test]
fn asymptotic_report_recomputes_m_eps() {
    let dom = common::domain(0.1, 2, 5.0, 21, 5);
    let st = random_ld_state(&dom, 21, 0.05);
    let r = asymptotic_report(&dom, &st).unwrap();
    let want = 0.5 * 5.0 * (1.0 / (0.1 * 5f64.sqrt())).ln();
    assert!((r.m_eps - want).abs() < 1e-12 * want);
    assert!((r.energy_ratio - r.total / r.m_eps).abs() < 1e-12 * r.energy_ratio);
    assert_eq!(
        r.csv_row().split(',').count(),
        ldgl::analysis::AsymptoticReport::CSV_HEADER
            .split(',')
            .count()
    );
    let strong = common::domain(0.5, 2, 5.0, 9, 5);
    assert!(asymptotic_report(&strong, &random_ld_state(&strong, 1, 0.05)).is_err());
}

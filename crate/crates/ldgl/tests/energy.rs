mod common;

use ldgl::domain::PlaneGrid;
use ldgl::energy::{
    agl_energy, agl_gradient, gl2d_energy, gl2d_gradient, ld_energy, ld_gradient, Gl2dMode,
};
use ldgl::fields::{
    plane_links_box, plane_links_omega, vertical_link_phase, ContinuumConfiguration, LayerStack,
    LayeredConfiguration, PlaneLinks, Potential3D, C64,
};
use ldgl::minimize::{gradient_check, CheckTarget};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[test]
fn ld_normal_state_closed_form() {
    // s = 0.25, N = 4, |Ω| = 1, ε = 0.1 → s(N+1)|Ω|/(4ε²) = 31.25
    let dom = common::domain(0.1, 4, 5.0, 21, 9);
    let b = ld_energy(&dom, &LayeredConfiguration::normal_state(&dom)).unwrap();
    assert!((b.total - 31.25).abs() < 1e-12 * 31.25, "{}", b.total);
    assert!(b.magnetic().abs() < 1e-20);
    assert_eq!(b.josephson, 0.0);
}

#[test]
fn ld_superconducting_state_without_field_is_zero() {
    let dom = common::domain(0.1, 4, 0.0, 21, 9);
    let st = LayeredConfiguration {
        layers: LayerStack::constant(&dom, ONE),
        pot: Potential3D::zeros(&dom, 0.0),
    };
    assert_eq!(ld_energy(&dom, &st).unwrap().total, 0.0);
    let g = ld_gradient(&dom, &st).unwrap();
    assert!(g.du.iter().flatten().all(|z| *z == ZERO));
    assert!(g
        .da
        .a1
        .iter()
        .chain(&g.da.a2)
        .chain(&g.da.a3)
        .all(|v| *v == 0.0));
}

#[test]
fn josephson_vanishes_for_phase_matched_layers() {
    let dom = common::domain(0.25, 4, 3.0, 9, 9);
    let mut st = common::smooth_ld_state(&dom, 4);
    for n in 0..4 {
        let phi = vertical_link_phase(&dom, &st.pot, n).unwrap();
        let next: Vec<C64> = st.layers.u[n]
            .iter()
            .zip(&phi)
            .map(|(u, p)| u * C64::from_polar(1.0, *p))
            .collect();
        st.layers.u[n + 1] = next;
    }
    assert_eq!(ld_energy(&dom, &st).unwrap().josephson, 0.0);
}

#[test]
fn agl_normal_state_closed_form() {
    let dom = common::domain(0.1, 2, 5.0, 21, 5);
    let st = ContinuumConfiguration::constant(&dom, ZERO, Potential3D::background(&dom, 5.0));
    let b = agl_energy(&dom, &st).unwrap();
    assert!((b.total - 25.0).abs() < 1e-12 * 25.0, "{}", b.total);
    let g = agl_gradient(&dom, &st).unwrap();
    assert!(g.dpsi.iter().all(|z| *z == ZERO));
}

#[test]
fn agl_superconducting_state_without_field_is_zero() {
    let dom = common::domain(0.1, 2, 0.0, 21, 5);
    let st = ContinuumConfiguration::constant(&dom, ONE, Potential3D::zeros(&dom, 0.0));
    assert_eq!(agl_energy(&dom, &st).unwrap().total, 0.0);
    let g = agl_gradient(&dom, &st).unwrap();
    assert!(g.dpsi.iter().all(|z| *z == ZERO));
}

#[test]
fn vertical_kinetic_scales_with_inverse_lambda_squared() {
    let mut vk = Vec::new();
    for lam in [1.0, 2.0] {
        let mut p = common::params(0.25, 2, 0.0, 9, 9);
        p.lambda = lam;
        let dom = ldgl::build_domain(&p).unwrap();
        let mut st = ContinuumConfiguration::constant(&dom, ONE, Potential3D::zeros(&dom, 0.0));
        for k in 0..dom.nzd {
            let z = dom.zs[dom.kz0 + k];
            for t in 0..dom.n_omega() {
                st.psi[k * dom.n_omega() + t] = C64::from_polar(1.0, z);
            }
        }
        vk.push(agl_energy(&dom, &st).unwrap().vertical_kinetic);
    }
    assert!(vk[1] > 0.0);
    assert!((vk[0] / vk[1] - 4.0).abs() < 1e-12, "{vk:?}");
}

#[test]
fn ld_normal_state_has_zero_order_parameter_gradient() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let g = ld_gradient(&dom, &LayeredConfiguration::normal_state(&dom)).unwrap();
    assert!(g.du.iter().flatten().all(|z| *z == ZERO));
}

#[test]
fn gl2d_examples() {
    let grid = PlaneGrid::omega([1.0, 1.0], 21, 21);
    let mut links = PlaneLinks::zeros(21, 21);
    for j in 0..20 {
        for i in 0..21 {
            links.ay[j * 21 + i] = 3.0 * grid.xs[i];
        }
    }
    let u0 = vec![ZERO; 441];
    let v = gl2d_energy(&grid, &u0, &links, 0.1, 3.0, Gl2dMode::RestrictedF).unwrap();
    assert!((v - 25.0).abs() < 1e-12, "{v}");
    let u1 = vec![ONE; 441];
    let z = gl2d_energy(
        &grid,
        &u1,
        &PlaneLinks::zeros(21, 21),
        0.1,
        0.0,
        Gl2dMode::RestrictedF,
    )
    .unwrap();
    assert_eq!(z, 0.0);
}

#[test]
fn gl2d_modes_agree_when_exterior_is_background() {
    let dom = common::domain(0.2, 1, 4.0, 11, 3);
    let st = common::smooth_ld_state(&dom, 5);
    // interior links of Ω from a smooth state, everything on or outside ∂Ω
    // at background values, so exterior plaquettes carry exactly h_ex
    let mut pot = Potential3D::background(&dom, 4.0);
    let inner = plane_links_omega(&dom, &st.pot, dom.kz0);
    for j in 1..dom.ny - 1 {
        for i in 0..dom.nx - 1 {
            let id = pot.i1(dom.ix0 + i, dom.iy0 + j, dom.kz0);
            pot.a1[id] = inner.ax[j * (dom.nx - 1) + i];
        }
    }
    for j in 0..dom.ny - 1 {
        for i in 1..dom.nx - 1 {
            let id = pot.i2(dom.ix0 + i, dom.iy0 + j, dom.kz0);
            pot.a2[id] = inner.ay[j * dom.nx + i];
        }
    }
    let u = &st.layers.u[0];
    let f = gl2d_energy(
        &dom.omega_plane(),
        u,
        &plane_links_omega(&dom, &pot, dom.kz0),
        0.2,
        4.0,
        Gl2dMode::RestrictedF,
    )
    .unwrap();
    let g = gl2d_energy(
        &dom.box_plane(),
        u,
        &plane_links_box(&pot, dom.kz0),
        0.2,
        4.0,
        Gl2dMode::FullPlaneGl,
    )
    .unwrap();
    assert!((f - g).abs() < 1e-12 * f, "{f} vs {g}");
}

#[test]
fn gl2d_restricted_mode_rejects_padded_grid() {
    let dom = common::domain(0.2, 1, 4.0, 11, 3);
    let u = vec![ONE; dom.n_omega()];
    let l = plane_links_box(&Potential3D::background(&dom, 4.0), dom.kz0);
    assert!(gl2d_energy(&dom.box_plane(), &u, &l, 0.2, 4.0, Gl2dMode::RestrictedF).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let st = common::smooth_ld_state(&dom, 6);
    let r = gradient_check(CheckTarget::Ld(&dom, &st), 1e-5, 150, 1).unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
    let ct = common::smooth_agl_state(&dom, 7);
    let r = gradient_check(CheckTarget::Agl(&dom, &ct), 1e-5, 150, 2).unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
    let grid = dom.omega_plane();
    let links = plane_links_omega(&dom, &st.pot, dom.kz0);
    let r = gradient_check(
        CheckTarget::F2d {
            grid: &grid,
            u: &st.layers.u[0],
            links: &links,
            eps: 0.25,
            h_ex: 3.0,
        },
        1e-5,
        100,
        3,
    )
    .unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
    let g = gl2d_gradient(
        &grid,
        &st.layers.u[0],
        &links,
        0.25,
        3.0,
        Gl2dMode::RestrictedF,
    )
    .unwrap();
    assert_eq!(g.du.len(), dom.n_omega());
}

#[test]
fn energy_is_independent_of_thread_count() {
    let dom = common::domain(0.2, 2, 4.0, 11, 5);
    let st = common::smooth_ld_state(&dom, 8);
    let eval = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| ld_energy(&dom, &st).unwrap())
    };
    let (a, b) = (eval(1), eval(3));
    assert_eq!(a, b);
}

#[test]
fn shape_mismatch_is_rejected() {
    let dom = common::domain(0.2, 2, 4.0, 11, 5);
    let mut st = LayeredConfiguration::normal_state(&dom);
    st.layers.u.pop();
    assert!(ld_energy(&dom, &st).is_err());
}

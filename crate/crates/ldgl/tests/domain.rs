mod common;

use ldgl::domain::m_eps;
use ldgl::{build_domain, Error, Mesh, ModelParams};

#[test]
fn layer_planes_of_four_layers() {
    let dom = common::domain(0.1, 4, 1.0, 21, 9);
    let z = dom.layer_heights();
    let want = [0.0, 0.25, 0.5, 0.75, 1.0];
    assert_eq!(z.len(), 5);
    for (a, b) in z.iter().zip(want) {
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
    }
    assert_eq!(dom.n_layers(), 4);
    assert_eq!(dom.per_layer, 2);
}

#[test]
fn omega_weights_partition_unit_square() {
    let dom = common::domain(0.1, 1, 1.0, 33, 3);
    assert!((dom.omega_area_quadrature() - 1.0).abs() < 1e-10);
    let cells: f64 = (0..dom.xs.len() - 1)
        .filter(|&i| dom.cell_in_omega_x(i))
        .map(|i| dom.cell_x[i])
        .sum::<f64>()
        * (0..dom.ys.len() - 1)
            .filter(|&j| dom.cell_in_omega_y(j))
            .map(|j| dom.cell_y[j])
            .sum::<f64>();
    assert!((cells - 1.0).abs() < 1e-10);
    assert!((dom.d_mask_volume() - 1.0).abs() < 1e-10);
}

#[test]
fn alignment_matches_divisibility_by_brute_force() {
    for nz in 2..40usize {
        let p = common::params(0.5, 3, 1.0, 5, nz);
        let spacing = 1.0 / (nz - 1) as f64;
        let aligned = (0..=3).all(|n| {
            let z = n as f64 / 3.0;
            let q = z / spacing;
            (q - q.round()).abs() < 1e-9
        });
        match build_domain(&p) {
            Ok(d) => {
                assert!(aligned, "nz = {nz} accepted");
                for (n, z) in d.layer_heights().iter().enumerate() {
                    assert!((z - n as f64 / 3.0).abs() < 1e-12);
                }
            }
            Err(Error::LayerAlignment(_)) => assert!(!aligned, "nz = {nz} rejected"),
            Err(e) => panic!("unexpected {e}"),
        }
    }
    assert!(build_domain(&common::params(0.5, 3, 1.0, 5, 7)).is_ok());
    assert!(matches!(
        build_domain(&common::params(0.5, 3, 1.0, 5, 5)),
        Err(Error::LayerAlignment(_))
    ));
}

#[test]
fn resolution_guard() {
    assert!(common::params(0.1, 1, 1.0, 21, 3)
        .check_resolution()
        .is_ok());
    assert!(matches!(
        common::params(0.1, 1, 1.0, 20, 3).check_resolution(),
        Err(Error::Resolution(_))
    ));
}

#[test]
fn parameter_validation_names_the_field() {
    let mut p = common::params(0.1, 2, 1.0, 21, 5);
    p.epsilon = -1.0;
    match p.validate() {
        Err(Error::InvalidParam { name, .. }) => assert_eq!(name, "epsilon"),
        r => panic!("{r:?}"),
    }
    let mut p = common::params(0.1, 2, 1.0, 21, 5);
    p.pad = 0.5;
    assert!(matches!(
        p.validate(),
        Err(Error::InvalidParam { name: "pad", .. })
    ));
    let mut p = common::params(0.1, 2, 1.0, 21, 5);
    p.s = 0.3;
    assert!(matches!(
        p.validate(),
        Err(Error::InvalidParam { name: "s", .. })
    ));
}

#[test]
fn m_eps_closed_form() {
    // |D| = 1, ε = 0.05, h_ex = 40: ½·40·ln(1/(0.05·√40))
    let v = m_eps(1.0, 0.05, 40.0).unwrap();
    let want = 20.0 * (1.0 / (0.05 * 40f64.sqrt())).ln();
    assert!((v - want).abs() < 1e-12);
    assert!((v - 23.03).abs() < 5e-3, "{v}");
    assert!(m_eps(1.0, 0.5, 4.0).is_err());
    assert!(m_eps(1.0, 0.1, 0.0).is_err());
}

#[test]
fn padded_exterior_is_graded_and_ends_on_pad() {
    let p = ModelParams::new(0.1, 2, 1.0, 1.0, [1.0, 1.0], Mesh::new(21, 21, 5));
    let dom = build_domain(&p).unwrap();
    let pad = p.pad;
    assert!((dom.xs[0] + pad).abs() < 1e-12);
    assert!((dom.xs.last().unwrap() - 1.0 - pad).abs() < 1e-12);
    assert!((dom.zs[0] + pad).abs() < 1e-12);
    let ext: Vec<f64> = (dom.ix0 + dom.nx - 1..dom.xs.len() - 1)
        .map(|i| dom.cell_x[i])
        .collect();
    assert!(ext.len() >= 2);
    for w in ext.windows(2) {
        assert!(
            w[1] >= w[0] * (1.0 - 1e-12),
            "exterior cells shrink: {ext:?}"
        );
    }
    let inner = &dom.cell_x[dom.ix0..dom.ix0 + dom.nx - 1];
    assert!(inner.iter().all(|c| (c - 0.05).abs() < 1e-12));
}

#[test]
fn node_indexing_is_x_fastest() {
    let dom = common::domain(0.2, 1, 1.0, 11, 3);
    let [nx, ny, _] = dom.dims();
    assert_eq!(dom.node(1, 0, 0), 1);
    assert_eq!(dom.node(0, 1, 0), nx);
    assert_eq!(dom.node(0, 0, 1), nx * ny);
}

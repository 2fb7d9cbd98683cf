mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldgl::analysis::interpolate_layers;
use ldgl::construction::{assemble_with, ConstructionOptions};
use ldgl::energy::{agl_energy, ld_energy};
use ldgl::fields::{
    apply_gauge, ContinuumConfiguration, LayerStack, LayeredConfiguration, Potential3D, C64,
};
use ldgl::minimize::{
    coulomb_gauge, gradient_check, minimize_agl, minimize_ld, random_agl_state, random_ld_state,
    CheckTarget, GaugeFix, MinimizeOptions, StepRule, StopReason,
};

fn opts(max_iters: usize) -> MinimizeOptions {
    MinimizeOptions {
        max_iters,
        ..MinimizeOptions::default()
    }
}

#[test]
fn global_minimum_returns_immediately() {
    let dom = common::domain(0.25, 2, 0.0, 9, 5);
    let ld = LayeredConfiguration {
        layers: LayerStack::constant(&dom, C64::new(1.0, 0.0)),
        pot: Potential3D::zeros(&dom, 0.0),
    };
    let (out, tr) = minimize_ld(&dom, &ld, &opts(100)).unwrap();
    assert_eq!(tr.iterations, 0);
    assert_eq!(tr.stop_reason, StopReason::Converged);
    assert_eq!(out, ld);
    assert_eq!(tr.breakdown.total, 0.0);

    let agl =
        ContinuumConfiguration::constant(&dom, C64::new(1.0, 0.0), Potential3D::zeros(&dom, 0.0));
    let (_, tr) = minimize_agl(&dom, &agl, &opts(100)).unwrap();
    assert_eq!(tr.iterations, 0);
    assert_eq!(tr.breakdown.total, 0.0);
}

#[test]
fn perturbed_normal_start_beats_normal_and_constructed_states() {
    let p = common::params(0.1, 2, 12.0, 21, 5);
    let dom = ldgl::build_domain(&p).unwrap();
    let normal = ld_energy(&dom, &LayeredConfiguration::normal_state(&dom))
        .unwrap()
        .total;
    let rep = assemble_with(&p, 1.0, &ConstructionOptions::default()).unwrap();
    let constructed = rep.assembled.as_ref().unwrap().total;

    // the exact normal state is a critical point; seed the instability
    let mut st = LayeredConfiguration::normal_state(&dom);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for z in st.layers.u.iter_mut().flatten() {
        *z = C64::new(rng.gen_range(-1e-3..1e-3), rng.gen_range(-1e-3..1e-3));
    }
    let (out, tr) = minimize_ld(&dom, &st, &opts(3000)).unwrap();
    assert!(tr.is_monotone());
    assert!(
        tr.breakdown.total <= normal.min(constructed).min(rep.total),
        "{} vs normal {normal}, constructed {constructed}",
        tr.breakdown.total
    );
    assert!(out.layers.max_modulus() <= 1.0 + 1e-6);
}

#[test]
fn runs_are_deterministic_and_descend() {
    let dom = common::domain(0.25, 2, 4.0, 9, 5);
    let init = random_ld_state(&dom, 3, 0.05);
    let e0 = ld_energy(&dom, &init).unwrap().total;
    let o = opts(150);
    let (a, ta) = minimize_ld(&dom, &init, &o).unwrap();
    let (b, tb) = minimize_ld(&dom, &init, &o).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a, b);
    assert!(ta.is_monotone());
    assert!(ta.breakdown.total <= e0);
    assert!(a.layers.max_modulus() <= 1.0 + 1e-6);

    let ct = random_agl_state(&dom, 4, 0.05);
    let (_, t1) = minimize_agl(&dom, &ct, &o).unwrap();
    let (_, t2) = minimize_agl(&dom, &ct, &o).unwrap();
    assert_eq!(t1, t2);
    assert!(t1.is_monotone());
}

#[test]
fn every_step_rule_descends() {
    let dom = common::domain(0.25, 2, 4.0, 9, 5);
    let init = random_ld_state(&dom, 5, 0.05);
    let e0 = ld_energy(&dom, &init).unwrap().total;
    for rule in [
        StepRule::Fixed,
        StepRule::AdaptiveBb,
        StepRule::Backtracking,
    ] {
        let o = MinimizeOptions {
            step_rule: rule,
            max_iters: 60,
            ..MinimizeOptions::default()
        };
        let (_, tr) = minimize_ld(&dom, &init, &o).unwrap();
        assert!(tr.is_monotone(), "{rule:?}");
        assert!(tr.breakdown.total < e0, "{rule:?}");
    }
}

#[test]
fn warm_started_agl_run_does_not_increase_energy() {
    let dom = common::domain(0.25, 2, 4.0, 9, 5);
    let (ld, _) = minimize_ld(&dom, &random_ld_state(&dom, 6, 0.05), &opts(300)).unwrap();
    let warm = interpolate_layers(&dom, &ld).unwrap();
    let e_warm = agl_energy(&dom, &warm).unwrap().total;
    let (out, tr) = minimize_agl(&dom, &warm, &opts(300)).unwrap();
    assert!(
        tr.breakdown.total <= e_warm,
        "{} vs {e_warm}",
        tr.breakdown.total
    );
    assert!(out.psi.iter().all(|z| z.norm() <= 1.0 + 1e-6));
}

#[test]
fn gauge_transformed_start_reaches_the_same_energy() {
    let dom = common::domain(0.25, 2, 4.0, 9, 5);
    let init = random_ld_state(&dom, 7, 0.05);
    let g = common::smooth_gauge(&dom, 8);
    let moved = apply_gauge(&dom, &init, &g).unwrap();
    let o = MinimizeOptions {
        max_iters: 5000,
        grad_tol: 1e-9,
        ..MinimizeOptions::default()
    };
    let (_, ta) = minimize_ld(&dom, &init, &o).unwrap();
    let (_, tb) = minimize_ld(&dom, &moved, &o).unwrap();
    let (a, b) = (ta.breakdown.total, tb.breakdown.total);
    assert_eq!(ta.stop_reason, StopReason::Converged);
    assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
}

#[test]
fn coulomb_gauge_is_a_projection() {
    let dom = common::domain(0.25, 2, 4.0, 9, 5);
    let st = common::smooth_ld_state(&dom, 9);
    let g = coulomb_gauge(&dom, &st.pot).unwrap();
    let fixed = apply_gauge(&dom, &st, &g).unwrap();
    let (e0, e1) = (
        ld_energy(&dom, &st).unwrap().total,
        ld_energy(&dom, &fixed).unwrap().total,
    );
    assert!((e0 - e1).abs() <= 1e-12 * e0);
    let again = coulomb_gauge(&dom, &fixed.pot).unwrap();
    let (lo, hi) = again
        .g
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi - lo < 1e-8, "second projection moves by {}", hi - lo);

    let o = MinimizeOptions {
        gauge_fix: GaugeFix::CoulombProjectionInterval(10),
        max_iters: 60,
        ..MinimizeOptions::default()
    };
    let (_, tr) = minimize_ld(&dom, &st, &o).unwrap();
    assert!(tr.is_monotone());
    assert!(tr.breakdown.total < e0);
}

#[test]
fn gradient_check_step_behaviour() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let st = common::smooth_ld_state(&dom, 11);
    let err = |h| {
        gradient_check(CheckTarget::Ld(&dom, &st), h, 200, 1)
            .unwrap()
            .max_rel_error
    };
    let (coarse, fine) = (err(1e-3), err(1e-6));
    assert!(fine <= 1e-6, "{fine}");
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert!(gradient_check(CheckTarget::Ld(&dom, &st), 1e-2, 10, 1).is_err());
    assert!(gradient_check(CheckTarget::Ld(&dom, &st), 1e-9, 10, 1).is_err());

    let normal = LayeredConfiguration::normal_state(&dom);
    let r = gradient_check(CheckTarget::Ld(&dom, &normal), 1e-6, 200, 2).unwrap();
    assert!(r.max_abs_error <= 1e-12, "{r:?}");
}

#[test]
fn strong_fields_suppress_the_order_parameter() {
    let mut maxima = Vec::new();
    for h in [8.0, 24.0, 64.0] {
        let dom = common::domain(0.25, 2, h, 9, 5);
        let (out, _) = minimize_ld(&dom, &random_ld_state(&dom, 12, 0.05), &opts(2000)).unwrap();
        maxima.push(out.layers.max_modulus());
    }
    assert!(
        maxima[0] > maxima[1] && maxima[1] >= maxima[2],
        "{maxima:?}"
    );
    assert!(maxima[2] < 1e-2, "{maxima:?}");
}

#[test]
fn invalid_options_are_rejected() {
    let dom = common::domain(0.25, 2, 3.0, 9, 5);
    let st = LayeredConfiguration::normal_state(&dom);
    for o in [
        MinimizeOptions {
            grad_tol: 0.0,
            ..MinimizeOptions::default()
        },
        MinimizeOptions {
            max_iters: 0,
            ..MinimizeOptions::default()
        },
        MinimizeOptions {
            gauge_fix: GaugeFix::CoulombProjectionInterval(0),
            ..MinimizeOptions::default()
        },
    ] {
        assert!(minimize_ld(&dom, &st, &o).is_err());
    }
    let coarse = common::domain(0.1, 2, 3.0, 9, 5);
    assert!(minimize_ld(
        &coarse,
        &LayeredConfiguration::normal_state(&coarse),
        &opts(5)
    )
    .is_err());
}

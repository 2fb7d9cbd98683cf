//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! Three regimes:
//! - `x ≤ 2`: ascending series (Temme's form at order zero),
//! - `2 < x < 25`: Steed's continued fraction for `K₀`, `K₁`,
//! - `x ≥ 25`: Hankel asymptotic expansion.
//!
//! The asymptotic series alone is not accurate to 1e-10 below roughly
//! `x ≈ 15`, hence the continued fraction in the middle band.

use std::f64::consts::PI;

pub const SERIES_MAX: f64 = 2.0;
pub const ASYMPTOTIC_MIN: f64 = 25.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

/// `(K₀(x), K₁(x))` for `x > 0`.
pub fn k0_k1(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= SERIES_MAX {
        series(x)
    } else if x < ASYMPTOTIC_MIN {
        steed(x)
    } else {
        (asymptotic(0.0, x), asymptotic(1.0, x))
    }
}

pub fn k0(x: f64) -> f64 {
    k0_k1(x).0
}

pub fn k1(x: f64) -> f64 {
    k0_k1(x).1
}

fn series(x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let d = x2 * x2;
    let mut ff = -EULER_GAMMA - x2.ln();
    let mut sum = ff;
    let mut p = 0.5;
    let mut q = 0.5;
    let mut c = 1.0;
    let mut sum1 = p;
    for i in 1..200 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi);
        c *= d / fi;
        p /= fi;
        q /= fi;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

fn steed(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let fk = k as f64;
        let odd = 2.0 * fk - 1.0;
        let next = term * (mu - odd * odd) / (fk * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

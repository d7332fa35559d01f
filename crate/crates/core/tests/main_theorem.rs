use num_complex::Complex64;
use toric_mirror::cycle::{characteristic_cycle, cycle_of_complex, CycleChain};
use toric_mirror::divisor::{box_elements, divisor_data};
use toric_mirror::fan::examples::*;
use toric_mirror::fan::StackyFan;
use toric_mirror::gamma::h_coefficient;
use toric_mirror::integrate::{eta_sigma, integrate_cycle};
use toric_mirror::lattice::rat;
use toric_mirror::params::EquivariantParams;
use toric_mirror::quadrature::QuadratureConfig;
use toric_mirror::series::ifunction_localized;

fn c(a: f64, b: f64) -> Complex64 {
    Complex64::new(a, b)
}

fn rhs(fan: &StackyFan, basis: &[Vec<i64>], terms: &[(Vec<i64>, i64)], p: &EquivariantParams) -> Complex64 {
    let dd = divisor_data(fan, basis).unwrap();
    let mut s = c(0.0, 0.0);
    for sigma in 0..fan.max_cones.len() {
        for v in box_elements(&dd, sigma) {
            let i = ifunction_localized(&dd, &v, p, -p.z, &rat(12, 1)).unwrap().eval(p.t0, &p.log_q());
            for (l, m) in terms {
                s += h_coefficient(&dd, &v, l, &p.w, p.z).unwrap() * i * *m as f64;
            }
        }
    }
    s
}

fn lhs(fan: &StackyFan, basis: &[Vec<i64>], chain: &CycleChain, sigma: usize, p: &EquivariantParams) -> Complex64 {
    let dd = divisor_data(fan, basis).unwrap();
    let s = eta_sigma(&dd, sigma).unwrap();
    integrate_cycle(fan, chain, p, &s, &QuadratureConfig::default()).unwrap().value
}

fn check(fan: &StackyFan, basis: &[Vec<i64>], l: &[i64], sigma: usize, p: &EquivariantParams) {
    let a = lhs(fan, basis, &characteristic_cycle(fan, l).unwrap(), sigma, p);
    let b = rhs(fan, basis, &[(l.to_vec(), 1)], p);
    assert!((a - b).norm() <= 1e-9 * b.norm(), "{l:?}: {a} vs {b}");
}

#[test]
fn projective_line() {
    let p = EquivariantParams::new(1.0, vec![c(0.37, 0.11), c(-0.23, 0.07)], c(0.1, 0.0), vec![0.01]);
    for l in [[1, 1], [1, 2], [0, 1], [2, 3]] {
        check(&p1(), &[vec![1, 1]], &l, 0, &p);
    }
}

#[test]
fn weighted_projective_line() {
    let p = EquivariantParams::new(0.8, vec![c(0.37, 0.11), c(-0.23, 0.07)], c(0.0, 0.2), vec![0.02]);
    for l in [[1, 1], [1, 2], [0, 1]] {
        check(&p12(), &[vec![2, 1]], &l, 0, &p);
    }
}

#[test]
fn projective_plane() {
    let p = EquivariantParams::new(1.0, vec![c(0.37, 0.11), c(-0.23, 0.07), c(0.05, -0.13)], c(0.1, 0.0), vec![0.01]);
    for l in [[1, 1, 1], [1, 0, 1], [2, 1, 0]] {
        check(&p2(), &[vec![1, 1, 1]], &l, 0, &p);
    }
}

#[test]
fn hirzebruch_surface_with_convergent_splitting() {
    let p = EquivariantParams::new(
        1.0,
        vec![c(0.37, 0.11), c(-0.23, 0.07), c(0.05, -0.13), c(0.11, 0.02)],
        c(0.1, 0.0),
        vec![0.01, 0.02],
    );
    check(&hirzebruch(1), &[vec![1, -1, 1, 0], vec![0, 1, 0, 1]], &[1, 1, 1, 1], 3, &p);
}

#[test]
fn trivial_bundle_through_koszul_complex() {
    let f = p1();
    let p = EquivariantParams::new(1.0, vec![c(0.37, 0.11), c(-0.23, 0.07)], c(0.1, 0.0), vec![0.01]);
    let terms = vec![(vec![1, 0], 1), (vec![0, 1], 1), (vec![1, 1], -1)];
    let a = lhs(&f, &[vec![1, 1]], &cycle_of_complex(&f, &terms).unwrap(), 0, &p);
    let b = rhs(&f, &[vec![1, 1]], &[(vec![0, 0], 1)], &p);
    assert!((a - b).norm() <= 1e-9 * b.norm(), "{a} vs {b}");
}

#[test]
fn doubling_the_radius_stays_within_the_tail_bound() {
    let f = p2();
    let dd = divisor_data(&f, &[vec![1, 1, 1]]).unwrap();
    let s = eta_sigma(&dd, 0).unwrap();
    let p = EquivariantParams::new(1.0, vec![c(0.37, 0.11), c(-0.23, 0.07), c(0.05, -0.13)], c(0.1, 0.0), vec![0.01]);
    let chain = characteristic_cycle(&f, &[1, 1, 1]).unwrap();
    let auto = integrate_cycle(&f, &chain, &p, &s, &QuadratureConfig::default()).unwrap();
    let r = auto.cells.iter().map(|c| c.radius).fold(0.0, f64::max);
    let cfg = QuadratureConfig { ray_radius: Some(2.0 * r), ..QuadratureConfig::default() };
    let far = integrate_cycle(&f, &chain, &p, &s, &cfg).unwrap();
    assert!((far.value - auto.value).norm() <= auto.tail_bound + auto.error_estimate + far.error_estimate);
}

#[test]
fn integrals_are_linear_in_chains() {
    let f = p1();
    let dd = divisor_data(&f, &[vec![1, 1]]).unwrap();
    let s = eta_sigma(&dd, 0).unwrap();
    let p = EquivariantParams::new(1.0, vec![c(0.37, 0.11), c(-0.23, 0.07)], c(0.1, 0.0), vec![0.01]);
    let cfg = QuadratureConfig::default();
    let a = characteristic_cycle(&f, &[1, 1]).unwrap();
    let b = characteristic_cycle(&f, &[2, 3]).unwrap();
    let ia = integrate_cycle(&f, &a, &p, &s, &cfg).unwrap();
    let ib = integrate_cycle(&f, &b, &p, &s, &cfg).unwrap();
    let iab = integrate_cycle(&f, &a.add(&b.scale(-3)), &p, &s, &cfg).unwrap();
    let budget = ia.budget() + 3.0 * ib.budget() + iab.budget();
    assert!((iab.value - ia.value + 3.0 * ib.value).norm() <= budget);
}

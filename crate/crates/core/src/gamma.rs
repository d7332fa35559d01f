//! Complex Gamma function and the characteristic classes evaluated at fixed points.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;

use crate::divisor::{age_of_line_bundle, inv_box, sigma_frame, BoxElement, DivisorData};
use crate::error::{Error, Result};
use crate::lattice::{frac, rat_to_f64, Rational};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn check_pole(s: Complex64) -> Result<()> {
    if s.re <= 0.5 && s.im.abs() < 1e-14 && (s.re - s.re.round()).abs() < 1e-14 && s.re.round() <= 0.0 {
        return Err(Error::GammaPole(format!("{s}")));
    }
    Ok(())
}

/// Lanczos sum for `Re s >= 1/2`.
fn log_gamma_right(s: Complex64) -> Complex64 {
    let s = s - 1.0;
    let mut a = Complex64::new(LANCZOS[0], 0.0);
    for (j, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (s + j as f64);
    }
    let t = s + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (s + 0.5) * t.ln() - t + a.ln()
}

/// `log Gamma(s)`. Analytic continuation of the Lanczos form for `Re s >= 1/2`,
/// reflection with principal logarithms to the left.
pub fn log_gamma(s: Complex64) -> Result<Complex64> {
    check_pole(s)?;
    if s.re >= 0.5 {
        Ok(log_gamma_right(s))
    } else {
        let sin = (PI * s).sin();
        Ok(Complex64::new(PI.ln(), 0.0) - sin.ln() - log_gamma_right(1.0 - s))
    }
}

pub fn gamma(s: Complex64) -> Result<Complex64> {
    check_pole(s)?;
    if s.re >= 0.5 {
        Ok(log_gamma_right(s).exp())
    } else {
        Ok(PI / ((PI * s).sin() * log_gamma_right(1.0 - s).exp()))
    }
}

/// `z^s` through the real logarithm of `z > 0`.
pub fn zpow(z: f64, s: Complex64) -> Complex64 {
    (s * z.ln()).exp()
}

fn two_pi_i(x: Complex64) -> Complex64 {
    (Complex64::new(0.0, 2.0 * PI) * x).exp()
}

/// Integer combination of line bundles `L_l`, `l` in `Z^{r'}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquivariantKClass {
    pub terms: BTreeMap<Vec<i64>, i64>,
}

impl EquivariantKClass {
    pub fn line_bundle(l: Vec<i64>) -> Self {
        Self::from_terms([(l, 1)])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Vec<i64>, i64)>) -> Self {
        let mut k = EquivariantKClass::default();
        for (l, m) in terms {
            k.add_term(l, m);
        }
        k
    }

    pub fn add_term(&mut self, l: Vec<i64>, m: i64) {
        let e = self.terms.entry(l.clone()).or_insert(0);
        *e += m;
        if *e == 0 {
            self.terms.remove(&l);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut k = self.clone();
        for (l, m) in &other.terms {
            k.add_term(l.clone(), *m);
        }
        k
    }

    pub fn neg(&self) -> Self {
        EquivariantKClass { terms: self.terms.iter().map(|(l, m)| (l.clone(), -m)).collect() }
    }
}

fn twisted(dd: &DivisorData, v: &BoxElement, w: &[Complex64]) -> Vec<Complex64> {
    sigma_frame(dd, v.sigma, w).tw
}

fn check_l(dd: &DivisorData, l: &[i64]) -> Result<()> {
    if l.len() != dd.fan.r_prime() {
        return Err(Error::Dimension(format!("line bundle of length {} (expected {})", l.len(), dd.fan.r_prime())));
    }
    Ok(())
}

/// `ch_z(L_l)` at the fixed point: `exp(2 pi i (sum l_i tw_i / z + age_v(L_l)))`.
pub fn ch_tilde_at(dd: &DivisorData, v: &BoxElement, l: &[i64], w: &[Complex64], z: f64) -> Result<Complex64> {
    check_l(dd, l)?;
    let tw = twisted(dd, v, w);
    let cone = &dd.fan.max_cones[v.sigma];
    let lin: Complex64 = cone.iter().zip(&tw).map(|(&i, t)| t * l[i] as f64 / z).sum();
    let age = rat_to_f64(&age_of_line_bundle(dd, v, l));
    Ok(two_pi_i(lin + age))
}

/// `Gamma_z(TX)` at the fixed point, the tangent direction `p` carrying age `c_p(v)`.
pub fn gamma_tilde_tx_at(dd: &DivisorData, v: &BoxElement, w: &[Complex64], z: f64) -> Result<Complex64> {
    let tw = twisted(dd, v, w);
    let mut out = Complex64::new(1.0, 0.0);
    for (t, c) in tw.iter().zip(&v.c) {
        let s = -t / z + 1.0 - rat_to_f64(c);
        out *= zpow(z, s) * gamma(s)?;
    }
    Ok(out)
}

/// Product of the weights `-tw_p` over directions untwisted at `v`.
pub fn euler_ix_at(dd: &DivisorData, v: &BoxElement, w: &[Complex64]) -> Result<Complex64> {
    let tw = twisted(dd, v, w);
    let mut e = Complex64::new(1.0, 0.0);
    for (t, c) in tw.iter().zip(&v.c) {
        if c.is_zero() {
            if t.norm() == 0.0 {
                return Err(Error::Degenerate(format!("zero tangent weight at max cone {}", v.sigma)));
            }
            e *= -t;
        }
    }
    Ok(e)
}

/// Closed-form decomposition coefficient `h_{sigma,v}`.
pub fn h_coefficient(dd: &DivisorData, v: &BoxElement, l: &[i64], w: &[Complex64], z: f64) -> Result<Complex64> {
    check_l(dd, l)?;
    let tw = twisted(dd, v, w);
    let cone = &dd.fan.max_cones[v.sigma];
    let mut h = Complex64::new(1.0, 0.0);
    for (p, &i) in cone.iter().enumerate() {
        let pairing = dd.pairing(i, &v.beta);
        let c = frac(&-pairing.clone());
        let s = -tw[p] / z + rat_to_f64(&c);
        // exp(-2 pi i (-<v,D_i>) l_i) only sees the fractional part of <v,D_i> l_i
        let exact = frac(&(pairing * Rational::from_integer(BigInt::from(l[i]))));
        let phase = two_pi_i(Complex64::new(rat_to_f64(&exact), 0.0) + tw[p] * l[i] as f64 / z);
        h *= zpow(z, s) * gamma(s)? * phase;
    }
    let g = rat_to_f64(&Rational::from_integer(dd.group_order(v.sigma).clone()));
    Ok(h / g)
}

/// `h` through `inv^*(Gamma_z(TX) ch_z(L)) / (|G| e(TIX))`.
pub fn h_class_composition(dd: &DivisorData, v: &BoxElement, l: &[i64], w: &[Complex64], z: f64) -> Result<Complex64> {
    let vi = inv_box(dd, v);
    let num = gamma_tilde_tx_at(dd, &vi, w, z)? * ch_tilde_at(dd, &vi, l, w, z)?;
    let g = rat_to_f64(&Rational::from_integer(dd.group_order(v.sigma).clone()));
    Ok(num / (g * euler_ix_at(dd, v, w)?))
}

/// Relative difference between the closed form and the class-composition route.
pub fn h_consistency(dd: &DivisorData, v: &BoxElement, l: &[i64], w: &[Complex64], z: f64) -> Result<f64> {
    let a = h_coefficient(dd, v, l, w, z)?;
    let b = h_class_composition(dd, v, l, w, z)?;
    Ok((a - b).norm() / a.norm())
}

/// `Gamma_z(TX) ch_z(K)` at the fixed point.
pub fn kappa_eval(dd: &DivisorData, k: &EquivariantKClass, v: &BoxElement, w: &[Complex64], z: f64) -> Result<Complex64> {
    let mut ch = Complex64::zero();
    for (l, m) in &k.terms {
        ch += ch_tilde_at(dd, v, l, w, z)? * *m as f64;
    }
    Ok(gamma_tilde_tx_at(dd, v, w, z)? * ch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divisor::{box_elements, divisor_data, fixed_points};
    use crate::fan::examples::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn gamma_known_values() {
        let sqrt_pi = PI.sqrt();
        assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-14);
        assert!((log_gamma(c(0.5, 0.0)).unwrap().re - 0.572_364_942_924_700_1).abs() < 1e-13);
        assert!(close(gamma(c(0.5, 0.0)).unwrap(), c(sqrt_pi, 0.0), 1e-13));
        assert!(close(gamma(c(2.5, 0.0)).unwrap(), c(0.75 * sqrt_pi, 0.0), 1e-13));
        assert!(close(gamma(c(-0.5, 0.0)).unwrap(), c(-2.0 * sqrt_pi, 0.0), 1e-13));
        assert!(close(gamma(c(1.0 / 3.0, 0.0)).unwrap(), c(2.678_938_534_707_747_6, 0.0), 1e-13));
        assert!(close(gamma(c(1.0, 1.0)).unwrap(), c(0.498_015_668_118_356_0, -0.154_949_828_301_810_7), 1e-13));
        assert!(close(gamma(c(6.0, 0.0)).unwrap(), c(120.0, 0.0), 1e-13));
        assert!(matches!(gamma(c(-2.0, 0.0)), Err(Error::GammaPole(_))));
        assert!(matches!(gamma(c(0.0, 0.0)), Err(Error::GammaPole(_))));
    }

    #[test]
    fn reflection_and_recurrence() {
        let s = c(0.3, 0.7);
        let v = gamma(s).unwrap() * gamma(1.0 - s).unwrap() * (PI * s).sin() / PI;
        assert!((v - 1.0).norm() < 1e-12);
        let s = c(-1.7, 2.3);
        assert!(close(gamma(s + 1.0).unwrap(), s * gamma(s).unwrap(), 1e-12));
    }

    fn w3() -> Vec<Complex64> {
        vec![c(-0.83, 0.21), c(0.37, -0.15), c(0.61, 0.27)]
    }

    #[test]
    fn p1_h_matches_example_at_l1_zero() {
        let dd = divisor_data(&p1(), &[vec![1, 1]]).unwrap();
        let w = &w3()[..2];
        let z = 1.3;
        let v = box_elements(&dd, 0).remove(0);
        let s = (w[1] - w[0]) / z;
        let want = zpow(z, s) * gamma(s).unwrap();
        assert!(close(h_coefficient(&dd, &v, &[0, 5], w, z).unwrap(), want, 1e-12));
        let v2 = box_elements(&dd, 1).remove(0);
        let s2 = (w[0] - w[1]) / z;
        let want2 = zpow(z, s2) * gamma(s2).unwrap();
        assert!(close(h_coefficient(&dd, &v2, &[3, 0], w, z).unwrap(), want2, 1e-12));
    }

    #[test]
    fn h_routes_agree() {
        let w = w3();
        let f1 = divisor_data(&hirzebruch(1), &[vec![1, -1, 1, 0], vec![0, 1, 0, 1]]).unwrap();
        let w4 = vec![c(-0.83, 0.21), c(0.37, -0.15), c(0.61, 0.27), c(-0.29, 0.11)];
        let cases = [
            (divisor_data(&p1(), &[vec![1, 1]]).unwrap(), w[..2].to_vec()),
            (divisor_data(&p12(), &[vec![2, 1]]).unwrap(), w[..2].to_vec()),
            (divisor_data(&p2(), &[vec![1, 1, 1]]).unwrap(), w.clone()),
            (f1, w4),
        ];
        for (dd, w) in cases {
            let rp = dd.fan.r_prime();
            for fp in fixed_points(&dd) {
                for shift in 0..3i64 {
                    let l: Vec<i64> = (0..rp as i64).map(|i| (i * 2 + shift) % 3 - 1).collect();
                    let res = h_consistency(&dd, &fp.v, &l, &w, 0.9).unwrap();
                    assert!(res < 1e-12, "{res}");
                }
            }
        }
    }

    #[test]
    fn twisted_pieces() {
        let dd = divisor_data(&p12(), &[vec![2, 1]]).unwrap();
        let w = &w3()[..2];
        let tv = box_elements(&dd, 1).remove(1);
        assert_eq!(euler_ix_at(&dd, &tv, w).unwrap(), c(1.0, 0.0));
        let ch = ch_tilde_at(&dd, &tv, &[0, 1], &[c(0.0, 0.0); 2], 1.0).unwrap();
        assert!((ch + 1.0).norm() < 1e-14);
        assert!(ch_tilde_at(&dd, &tv, &[0, 0], w, 1.0).unwrap() == c(1.0, 0.0));
    }

    #[test]
    fn kappa_is_additive() {
        let dd = divisor_data(&p1(), &[vec![1, 1]]).unwrap();
        let w = &w3()[..2];
        let v = box_elements(&dd, 0).remove(0);
        let o = EquivariantKClass::line_bundle(vec![0, 0]);
        let gamma_only = gamma_tilde_tx_at(&dd, &v, w, 1.0).unwrap();
        assert!(close(kappa_eval(&dd, &o, &v, w, 1.0).unwrap(), gamma_only, 1e-15));
        let l = EquivariantKClass::line_bundle(vec![1, 2]);
        let zero = l.add(&l.neg());
        assert!(zero.terms.is_empty());
        assert_eq!(kappa_eval(&dd, &zero, &v, w, 1.0).unwrap(), c(0.0, 0.0));
        let pt = EquivariantKClass::from_terms([(vec![0, 0], 1), (vec![-1, 0], -1)]);
        let sum = kappa_eval(&dd, &o, &v, w, 1.0).unwrap()
            - kappa_eval(&dd, &EquivariantKClass::line_bundle(vec![-1, 0]), &v, w, 1.0).unwrap();
        assert!(close(kappa_eval(&dd, &pt, &v, w, 1.0).unwrap(), sum, 1e-14));
    }
}

//! Truncated Puiseux series and the localized equivariant I-function.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::divisor::{degree, enumerate_keff, sigma_frame, BoxElement, DivisorData};
use crate::error::{Error, Result};
use crate::lattice::{rat_to_f64, Rational};
use crate::params::EquivariantParams;

/// Sum of terms `coeff * q^(e / m)` with total degree at most `truncation`.
#[derive(Clone, Debug, PartialEq)]
pub struct PuiseuxSeries {
    pub k: usize,
    pub denominator: u64,
    pub terms: BTreeMap<Vec<i64>, Complex64>,
    pub truncation: Rational,
}

impl PuiseuxSeries {
    pub fn zero(k: usize, truncation: Rational) -> Self {
        PuiseuxSeries { k, denominator: 1, terms: BTreeMap::new(), truncation }
    }

    pub fn one(k: usize, truncation: Rational) -> Self {
        let mut s = Self::zero(k, truncation);
        s.terms.insert(vec![0; k], Complex64::new(1.0, 0.0));
        s
    }

    fn degree_of(&self, e: &[i64]) -> Rational {
        Rational::new(BigInt::from(e.iter().sum::<i64>()), BigInt::from(self.denominator))
    }

    /// Adds `c * q^exponent`; terms above the truncation are dropped.
    pub fn add_term(&mut self, exponent: &[Rational], c: Complex64) -> Result<()> {
        if exponent.len() != self.k {
            return Err(Error::Dimension(format!("exponent of length {} in a series in {} variables", exponent.len(), self.k)));
        }
        if degree(exponent) > self.truncation {
            return Ok(());
        }
        let m = exponent.iter().fold(BigInt::from(self.denominator), |acc, e| acc.lcm(e.denom()));
        let m = m.to_u64().expect("denominator fits in u64");
        if m != self.denominator {
            self.rescale(m);
        }
        let key: Vec<i64> = exponent
            .iter()
            .map(|e| (e.numer() * BigInt::from(m) / e.denom()).to_i64().expect("exponent fits in i64"))
            .collect();
        let entry = self.terms.entry(key.clone()).or_insert(Complex64::zero());
        *entry += c;
        if *entry == Complex64::zero() {
            self.terms.remove(&key);
        }
        Ok(())
    }

    fn rescale(&mut self, m: u64) {
        let f = (m / self.denominator) as i64;
        self.terms = std::mem::take(&mut self.terms)
            .into_iter()
            .map(|(e, c)| (e.into_iter().map(|x| x * f).collect(), c))
            .collect();
        self.denominator = m;
    }

    pub fn exponent(&self, key: &[i64]) -> Vec<Rational> {
        key.iter().map(|&x| Rational::new(BigInt::from(x), BigInt::from(self.denominator))).collect()
    }

    pub fn coefficient(&self, exponent: &[Rational]) -> Complex64 {
        let m = BigInt::from(self.denominator);
        let mut key = Vec::with_capacity(exponent.len());
        for e in exponent {
            let scaled = e * Rational::from_integer(m.clone());
            if !scaled.is_integer() {
                return Complex64::zero();
            }
            key.push(scaled.to_integer().to_i64().unwrap_or(i64::MAX));
        }
        self.terms.get(&key).copied().unwrap_or_default()
    }

    /// Evaluates at `q > 0` with real logarithms, summing in key order.
    pub fn eval(&self, log_q: &[f64]) -> Complex64 {
        let m = self.denominator as f64;
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(log_q).map(|(&x, l)| x as f64 / m * l).sum::<f64>().exp())
            .sum()
    }

    /// Largest `|c q^e|` among terms of maximal degree.
    pub fn last_shell_magnitude(&self, log_q: &[f64]) -> f64 {
        let Some(top) = self.terms.keys().map(|e| e.iter().sum::<i64>()).max() else { return 0.0 };
        let m = self.denominator as f64;
        self.terms
            .iter()
            .filter(|(e, _)| e.iter().sum::<i64>() == top)
            .map(|(e, c)| c.norm() * e.iter().zip(log_q).map(|(&x, l)| x as f64 / m * l).sum::<f64>().exp())
            .fold(0.0, f64::max)
    }

    pub fn truncate(&self, n: &Rational) -> PuiseuxSeries {
        let mut out = self.clone();
        out.terms.retain(|e, _| self.degree_of(e) <= *n);
        out.truncation = n.clone().min(self.truncation.clone());
        out
    }

    /// CSV rows `exponent,re,im`; exponents written as `a/b` joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("exponent,re,im\n");
        for (e, c) in &self.terms {
            let ex: Vec<String> = self.exponent(e).iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{},{:e},{:e}\n", ex.join(";"), c.re, c.im));
        }
        s
    }
}

fn check_compatible(a: &PuiseuxSeries, b: &PuiseuxSeries) -> Result<()> {
    if a.k != b.k {
        return Err(Error::Dimension(format!("series in {} and {} variables", a.k, b.k)));
    }
    Ok(())
}

pub fn ps_add(a: &PuiseuxSeries, b: &PuiseuxSeries) -> Result<PuiseuxSeries> {
    check_compatible(a, b)?;
    let n = a.truncation.clone().min(b.truncation.clone());
    let mut out = PuiseuxSeries::zero(a.k, n);
    out.denominator = a.denominator.lcm(&b.denominator);
    for s in [a, b] {
        for (e, c) in &s.terms {
            out.add_term(&s.exponent(e), *c)?;
        }
    }
    Ok(out)
}

pub fn ps_mul(a: &PuiseuxSeries, b: &PuiseuxSeries) -> Result<PuiseuxSeries> {
    check_compatible(a, b)?;
    let n = a.truncation.clone().min(b.truncation.clone());
    let mut out = PuiseuxSeries::zero(a.k, n);
    out.denominator = a.denominator.lcm(&b.denominator);
    for (ea, ca) in &a.terms {
        let xa = a.exponent(ea);
        for (eb, cb) in &b.terms {
            let x: Vec<Rational> = xa.iter().zip(b.exponent(eb)).map(|(p, q)| p + q).collect();
            out.add_term(&x, ca * cb)?;
        }
    }
    Ok(out)
}

/// `exp(gamma0 * t0) * prod_a q_a^gamma_a * body(q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixedSeries {
    pub gamma0: Complex64,
    pub gamma: Vec<Complex64>,
    pub body: PuiseuxSeries,
}

impl PrefixedSeries {
    pub fn prefactor(&self, t0: Complex64, log_q: &[f64]) -> Complex64 {
        let e = self.gamma0 * t0 + self.gamma.iter().zip(log_q).map(|(g, l)| g * l).sum::<Complex64>();
        e.exp()
    }

    pub fn eval(&self, t0: Complex64, log_q: &[f64]) -> Complex64 {
        self.prefactor(t0, log_q) * self.body.eval(log_q)
    }
}

/// Pullback of the divisor class for ray `i` at the cone: `-tw_i` on the cone, zero off it.
fn pullback(dd: &DivisorData, sigma: usize, tw: &[Complex64], i: usize) -> Complex64 {
    match dd.fan.max_cones[sigma].iter().position(|&j| j == i) {
        Some(p) => -tw[p],
        None => Complex64::zero(),
    }
}

fn pole_error(i: usize, m: &Rational) -> Error {
    Error::Degenerate(format!("I-function factor for ray {i} has a pole at m = {m}"))
}

/// `m` ranges over `lo < m <= hi` with `m = c mod 1`.
fn arithmetic_range(c: &Rational, lo: &Rational, hi: &Rational) -> Vec<Rational> {
    let one = Rational::from_integer(BigInt::from(1));
    let shift = (lo - c).floor() + &one;
    let mut m = c + shift;
    let mut out = Vec::new();
    while &m <= hi {
        out.push(m.clone());
        m += &one;
    }
    out
}

fn linear(a: Complex64, m: &Rational, z: f64) -> Complex64 {
    a + rat_to_f64(m) * z
}

/// Telescoped ratio of the two infinite products for ray `i` at degree `d`.
pub fn ifunction_term_factor(
    dd: &DivisorData,
    sigma: usize,
    i: usize,
    d: &[Rational],
    z: f64,
    tw: &[Complex64],
) -> Result<Complex64> {
    let a = pullback(dd, sigma, tw, i);
    let c = dd.pairing(i, d);
    let zero = Rational::zero();
    let one = Complex64::new(1.0, 0.0);
    if c.is_zero() {
        return Ok(one);
    }
    let (range, invert) = if c > zero { (arithmetic_range(&c, &zero, &c), true) } else { (arithmetic_range(&c, &c, &zero), false) };
    let mut p = one;
    for m in &range {
        let f = linear(a, m, z);
        if f.norm() == 0.0 {
            return Err(pole_error(i, m));
        }
        p *= f;
    }
    Ok(if invert { one / p } else { p })
}

/// Coefficient of `q^d` in the localized I-function body.
pub fn ifunction_coefficient(dd: &DivisorData, sigma: usize, d: &[Rational], z: f64, tw: &[Complex64]) -> Result<Complex64> {
    let mut c = Complex64::new(1.0, 0.0);
    for i in 0..dd.r() {
        c *= ifunction_term_factor(dd, sigma, i, d, z, tw)?;
    }
    Ok(c)
}

/// Localized I-function at the fixed point `(sigma, v)` with series argument `z`
/// (pass `-params.z` for the reflected argument), truncated at degree `n_max`.
pub fn ifunction_localized(
    dd: &DivisorData,
    v: &BoxElement,
    params: &EquivariantParams,
    z: f64,
    n_max: &Rational,
) -> Result<PrefixedSeries> {
    let sigma = v.sigma;
    let tw = sigma_frame(dd, sigma, &params.w).tw;
    let degrees = enumerate_keff(dd, sigma, v, n_max)?;
    let mut body = PuiseuxSeries::zero(dd.k, n_max.clone());
    for d in &degrees {
        let c = ifunction_coefficient(dd, sigma, d, z, &tw)?;
        body.add_term(d, c)?;
    }
    let eta = dd.eta(sigma);
    let cone = &dd.fan.max_cones[sigma];
    let gamma = (0..dd.k)
        .map(|a| {
            (0..dd.r())
                .filter(|j| !cone.contains(j))
                .map(|j| params.w[j] * rat_to_f64(&eta[j][a]))
                .sum::<Complex64>()
                / z
        })
        .collect();
    Ok(PrefixedSeries { gamma0: Complex64::new(1.0 / z, 0.0), gamma, body })
}

/// `coeff(d + step) / coeff(d)` from incremental products only.
pub fn recursion_oracle(
    dd: &DivisorData,
    sigma: usize,
    d: &[Rational],
    step: &[Rational],
    z: f64,
    tw: &[Complex64],
) -> Result<Complex64> {
    let mut ratio = Complex64::new(1.0, 0.0);
    let next: Vec<Rational> = d.iter().zip(step).map(|(a, b)| a + b).collect();
    for i in 0..dd.r() {
        let a = pullback(dd, sigma, tw, i);
        let c = dd.pairing(i, d);
        let c2 = dd.pairing(i, &next);
        if c2 > c {
            for m in arithmetic_range(&c, &c, &c2) {
                let f = linear(a, &m, z);
                if f.norm() == 0.0 {
                    return Err(pole_error(i, &m));
                }
                ratio /= f;
            }
        } else {
            for m in arithmetic_range(&c, &c2, &c) {
                ratio *= linear(a, &m, z);
            }
        }
    }
    Ok(ratio)
}

/// Coefficients of every enumerated degree obtained by chaining recursion ratios
/// along `+-e_a` steps from the lowest-degree element of the sector.
pub fn chained_coefficients(
    dd: &DivisorData,
    v: &BoxElement,
    z: f64,
    w: &[Complex64],
    n_max: &Rational,
) -> Result<Vec<(Vec<Rational>, Complex64)>> {
    let sigma = v.sigma;
    let tw = sigma_frame(dd, sigma, w).tw;
    let degrees = enumerate_keff(dd, sigma, v, n_max)?;
    let Some(base) = degrees.first() else { return Ok(vec![]) };
    let base_c = ifunction_coefficient(dd, sigma, base, z, &tw)?;
    if base_c == Complex64::zero() {
        return Err(Error::ZeroCoefficient);
    }
    let index: HashMap<&Vec<Rational>, usize> = degrees.iter().enumerate().map(|(p, d)| (d, p)).collect();
    let mut coeff: Vec<Option<Complex64>> = vec![None; degrees.len()];
    coeff[0] = Some(base_c);
    let mut queue = VecDeque::from([0usize]);
    while let Some(p) = queue.pop_front() {
        let c = coeff[p].unwrap();
        for a in 0..dd.k {
            for s in [1i64, -1] {
                let mut step = vec![Rational::zero(); dd.k];
                step[a] = Rational::from_integer(BigInt::from(s));
                let nd: Vec<Rational> = degrees[p].iter().zip(&step).map(|(x, y)| x + y).collect();
                let Some(&q) = index.get(&nd) else { continue };
                if coeff[q].is_some() {
                    continue;
                }
                if c == Complex64::zero() {
                    return Err(Error::ZeroCoefficient);
                }
                coeff[q] = Some(c * recursion_oracle(dd, sigma, &degrees[p], &step, z, &tw)?);
                queue.push_back(q);
            }
        }
    }
    Ok(degrees
        .into_iter()
        .zip(coeff)
        .filter_map(|(d, c)| c.map(|c| (d, c)))
        .collect())
}

/// Per-fixed-point `z^-1` coefficient of the localized I-function.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMapValue {
    pub sigma: usize,
    pub v: BoxElement,
    pub tau: Complex64,
    pub residual: f64,
}

/// Richardson extrapolation of `z (I(z) - delta_{v,0})` along `z0, 2 z0, 4 z0, ...`.
pub fn mirror_map_extract(
    dd: &DivisorData,
    v: &BoxElement,
    params: &EquivariantParams,
    n_max: &Rational,
    z0: f64,
    levels: usize,
    tol: f64,
) -> Result<MirrorMapValue> {
    let log_q = params.log_q();
    let delta = if v.is_zero() { 1.0 } else { 0.0 };
    let mut table: Vec<Complex64> = Vec::with_capacity(levels);
    for l in 0..levels {
        let z = z0 * 2f64.powi(l as i32);
        let p = EquivariantParams { z, ..params.clone() };
        let s = ifunction_localized(dd, v, &p, z, n_max)?;
        table.push((s.eval(params.t0, &log_q) - delta) * z);
    }
    // expansion in h = 1/z, h halves at each level
    let mut prev_diag = table[0];
    let mut residual = f64::INFINITY;
    for j in 1..levels {
        let f = 2f64.powi(j as i32);
        for p in (j..levels).rev() {
            table[p] = (f * table[p] - table[p - 1]) / (f - 1.0);
        }
        residual = (table[j] - prev_diag).norm();
        prev_diag = table[j];
    }
    let tau = table[levels - 1];
    if !tau.is_finite() || residual > tol * tau.norm().max(1.0) {
        return Err(Error::Extrapolation(residual));
    }
    Ok(MirrorMapValue { sigma: v.sigma, v: v.clone(), tau, residual })
}

//! Divisor classes, extended nef cones, Box elements and degree enumeration.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fan::StackyFan;
use crate::lattice::{
    frac, integer_kernel, inverse_rational, lcm_all, rat_int, rat_to_f64, smith_normal_form, solve_rational,
    IntMatrix, Rational,
};

#[derive(Clone, Debug)]
pub struct DivisorData {
    pub fan: StackyFan,
    pub k: usize,
    /// `e_1 .. e_k`, each a vector in `Z^r`.
    pub basis: Vec<Vec<BigInt>>,
    /// `D_i` in the dual basis, `d[i][a] = l_i^(a)`.
    pub d: Vec<Vec<Rational>>,
    /// Charge vectors `l^(a)`, which coincide with the basis vectors.
    pub charges: Vec<Vec<BigInt>>,
    /// `|G_sigma|` per max cone.
    pub group_orders: Vec<BigInt>,
    /// lcm of all `|G_sigma|`.
    pub box_denominator: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NefMembership {
    pub member: bool,
    /// Coordinates along `D_i`, `i` in the anticone (in index order).
    pub coords: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BoxElement {
    pub sigma: usize,
    /// `c_i(v)` for the rays of the cone, in the cone's index order.
    #[serde(serialize_with = "ser_rats")]
    pub c: Vec<Rational>,
    #[serde(serialize_with = "ser_ints")]
    pub v: Vec<BigInt>,
    /// Unit-cell representative in `K_sigma`, coordinates in the basis `e_a`.
    #[serde(serialize_with = "ser_rats")]
    pub beta: Vec<Rational>,
    #[serde(serialize_with = "ser_rat")]
    pub age: Rational,
}

impl BoxElement {
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }
}

fn ser_rat<S: serde::Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn ser_rats<S: serde::Serializer>(x: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(x.iter().map(|r| r.to_string()))
}

fn ser_ints<S: serde::Serializer>(x: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(x.iter().map(|r| r.to_string()))
}

/// Exact change of frame at a max cone.
#[derive(Clone, Debug)]
pub struct SigmaFrame {
    /// `s[j][p]`: coefficient of `b_{sigma[p]}` in `b_j`, for every `j < r`.
    pub s: Vec<Vec<Rational>>,
    /// `tw_i` for the rays of the cone, in the cone's index order.
    pub tw: Vec<Complex64>,
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ceil(x: &Rational) -> BigInt {
    x.ceil().to_integer()
}

impl DivisorData {
    pub fn n(&self) -> usize {
        self.fan.n
    }

    pub fn r(&self) -> usize {
        self.fan.r()
    }

    /// `<D_i, beta>` for `beta` in basis coordinates.
    pub fn pairing(&self, i: usize, beta: &[Rational]) -> Rational {
        dot(&self.d[i], beta)
    }

    /// The `k x k` matrix whose rows are `D_i`, `i` in the anticone of `sigma`.
    pub fn anticone_matrix(&self, sigma: usize) -> Vec<Vec<Rational>> {
        self.fan.anticone_of(sigma).iter().map(|&i| self.d[i].clone()).collect()
    }

    pub fn group_order(&self, sigma: usize) -> &BigInt {
        &self.group_orders[sigma]
    }

    pub fn rho_hat(&self) -> Vec<Rational> {
        (0..self.k).map(|a| self.d.iter().map(|di| di[a].clone()).sum()).collect()
    }

    /// `eta_sigma` in the canonical splitting: `e_a^dual = sum_{i in I_sigma} eta[i][a] D_i`.
    /// Rows for rays of `sigma` vanish.
    pub fn eta(&self, sigma: usize) -> Vec<Vec<Rational>> {
        let anti = self.fan.anticone_of(sigma);
        let c = self.anticone_matrix(sigma);
        let inv = inverse_rational(&c).expect("anticone classes form a basis");
        let mut eta = vec![vec![Rational::zero(); self.k]; self.r()];
        // e_a^dual = sum_p x_p D_{anti[p]} with C^T x = e_a, so x = (C^T)^{-1} e_a = row a of C^{-1} transposed
        for (p, &i) in anti.iter().enumerate() {
            for a in 0..self.k {
                eta[i][a] = inv[a][p].clone();
            }
        }
        eta
    }
}

pub fn divisor_data(fan: &StackyFan, basis: &[Vec<i64>]) -> Result<DivisorData> {
    let rep = fan.validate();
    if !rep.ok() {
        return Err(Error::InvalidFan(rep.failures.join("; ")));
    }
    let r = fan.r();
    let k = fan.k();
    if basis.len() != k {
        return Err(Error::NotABasis(format!("expected {k} vectors, got {}", basis.len())));
    }
    if let Some(e) = basis.iter().find(|e| e.len() != r) {
        return Err(Error::NotABasis(format!("vector of length {} (expected {r})", e.len())));
    }
    let basis: Vec<Vec<BigInt>> = basis.iter().map(|e| e.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let phi = fan.phi_matrix();
    for (a, e) in basis.iter().enumerate() {
        if phi.mul_vec(e).iter().any(|x| !x.is_zero()) {
            return Err(Error::NotABasis(format!("e_{a} is not in the kernel")));
        }
    }
    // express the supplied vectors in a reference kernel basis; the change of basis must be unimodular
    let kernel = integer_kernel(&phi);
    let kcols: Vec<Vec<Rational>> = (0..r).map(|i| kernel.iter().map(|v| rat_int(&v[i])).collect()).collect();
    let mut change = Vec::with_capacity(k);
    for (a, e) in basis.iter().enumerate() {
        let rhs: Vec<Rational> = e.iter().map(rat_int).collect();
        let x = solve_rational(&kcols, &rhs).ok_or_else(|| Error::NotABasis(format!("e_{a} not in kernel span")))?;
        if x.iter().any(|t| !t.is_integer()) {
            return Err(Error::NotABasis(format!("e_{a} is not in the integral kernel lattice")));
        }
        change.push(x.iter().map(|t| t.to_integer()).collect::<Vec<BigInt>>());
    }
    let cm = IntMatrix::from_rows(&change);
    let snf = smith_normal_form(&cm);
    if snf.diagonal().iter().any(|s| !s.is_one()) {
        return Err(Error::NotABasis("vectors span a proper sublattice of the kernel".into()));
    }

    let d: Vec<Vec<Rational>> = (0..r).map(|i| basis.iter().map(|e| rat_int(&e[i])).collect()).collect();
    let mut group_orders = Vec::with_capacity(fan.max_cones.len());
    for sigma in 0..fan.max_cones.len() {
        let anti = fan.anticone_of(sigma);
        let c = IntMatrix::from_rows(&anti.iter().map(|&i| basis.iter().map(|e| e[i].clone()).collect()).collect::<Vec<Vec<BigInt>>>());
        let det: BigInt = smith_normal_form(&c).diagonal().iter().product();
        if det.is_zero() {
            return Err(Error::InvalidFan(format!("anticone classes of max cone {sigma} are dependent")));
        }
        group_orders.push(det.abs());
    }
    let box_denominator = lcm_all(group_orders.iter());
    let dd = DivisorData { fan: fan.clone(), k, charges: basis.clone(), basis, d, group_orders, box_denominator };

    for a in 0..k {
        let mut ea = vec![Rational::zero(); k];
        ea[a] = Rational::one();
        for sigma in 0..fan.max_cones.len() {
            if !nef_membership(&dd, &ea, sigma).member {
                return Err(Error::NefViolated { a, sigma });
            }
        }
    }
    // the last r - r' dual basis vectors must lie in the cone spanned by the extension classes
    let rp = fan.r_prime();
    let ext = r - rp;
    if ext > 0 {
        let cols: Vec<Vec<Rational>> = (0..k).map(|a| (rp..r).map(|i| dd.d[i][a].clone()).collect()).collect();
        for a in (k - ext)..k {
            let mut ea = vec![Rational::zero(); k];
            ea[a] = Rational::one();
            let ok = solve_rational(&cols, &ea).is_some_and(|x| x.iter().all(|t| !t.is_negative()));
            if !ok {
                return Err(Error::NotABasis(format!("tail vector e_{a}^dual is not in the extension cone")));
            }
        }
    }
    Ok(dd)
}

pub fn nef_membership(dd: &DivisorData, class: &[Rational], sigma: usize) -> NefMembership {
    let c = dd.anticone_matrix(sigma);
    let k = dd.k;
    let cols: Vec<Vec<Rational>> = (0..k).map(|a| c.iter().map(|row| row[a].clone()).collect()).collect();
    let coords = solve_rational(&cols, class).expect("anticone classes form a basis");
    let member = coords.iter().all(|x| !x.is_negative());
    NefMembership { member, coords }
}

pub fn semipositive_check(dd: &DivisorData) -> bool {
    let rho = dd.rho_hat();
    (0..dd.fan.max_cones.len()).all(|s| nef_membership(dd, &rho, s).member)
}

/// `v(beta)` with both forms of the defining formula checked against each other.
pub fn v_of_beta(dd: &DivisorData, sigma: usize, beta: &[Rational]) -> Result<BoxElement> {
    let fan = &dd.fan;
    let cone = &fan.max_cones[sigma];
    for i in fan.anticone_of(sigma) {
        if !dd.pairing(i, beta).is_integer() {
            return Err(Error::NotInKSigma(sigma));
        }
    }
    let n = fan.n;
    let mut v1 = vec![BigInt::zero(); n];
    for i in 0..fan.r() {
        let m = ceil(&dd.pairing(i, beta));
        for (x, &b) in v1.iter_mut().zip(fan.b(i)) {
            *x += &m * b;
        }
    }
    let c: Vec<Rational> = cone.iter().map(|&i| frac(&-dd.pairing(i, beta))).collect();
    let mut v2 = vec![Rational::zero(); n];
    for (ci, &i) in c.iter().zip(cone) {
        for (x, b) in v2.iter_mut().zip(fan.b_rational(i)) {
            *x += ci * b;
        }
    }
    let v1r: Vec<Rational> = v1.iter().map(rat_int).collect();
    assert_eq!(v1r, v2, "the two expressions for v(beta) disagree");
    let age = c.iter().sum();
    Ok(BoxElement { sigma, c, v: v1, beta: beta.iter().map(frac).collect(), age })
}

pub fn box_elements(dd: &DivisorData, sigma: usize) -> Vec<BoxElement> {
    let anti = dd.fan.anticone_of(sigma);
    let k = dd.k;
    let c = IntMatrix::from_rows(&anti.iter().map(|&i| dd.basis.iter().map(|e| e[i].clone()).collect()).collect::<Vec<Vec<BigInt>>>());
    let snf = smith_normal_form(&c);
    let diag = snf.diagonal();
    // C^{-1} Z^k = V S^{-1} Z^k
    let mut reps: Vec<Vec<Rational>> = vec![vec![Rational::zero(); k]];
    for (j, s) in diag.iter().enumerate() {
        let mut next = Vec::new();
        let mut t = BigInt::zero();
        while &t < s {
            let scale = Rational::new(t.clone(), s.clone());
            for base in &reps {
                let mut b = base.clone();
                for (a, x) in b.iter_mut().enumerate() {
                    *x += &scale * rat_int(snf.v.get(a, j));
                }
                next.push(b);
            }
            t += 1;
        }
        reps = next;
    }
    let mut out: Vec<BoxElement> = reps
        .iter()
        .map(|b| {
            let unit: Vec<Rational> = b.iter().map(frac).collect();
            v_of_beta(dd, sigma, &unit).expect("representative lies in K_sigma")
        })
        .collect();
    out.sort_by(|a, b| a.age.cmp(&b.age).then(a.beta.cmp(&b.beta)));
    out.dedup();
    out
}

pub fn inv_box(dd: &DivisorData, v: &BoxElement) -> BoxElement {
    let beta: Vec<Rational> = v.beta.iter().map(|x| frac(&-x)).collect();
    v_of_beta(dd, v.sigma, &beta).expect("negated representative lies in K_sigma")
}

/// Degree functional coefficients `g_p` with `deg(beta) = sum_p g_p m_p`.
fn degree_coefficients(dd: &DivisorData, sigma: usize) -> Vec<Rational> {
    let inv = inverse_rational(&dd.anticone_matrix(sigma)).expect("anticone classes form a basis");
    (0..dd.k).map(|p| inv.iter().map(|row| row[p].clone()).sum()).collect()
}

/// All `beta` in the extended effective cone over the sector `v` with degree at most `n_max`,
/// ordered by degree then lexicographically.
pub fn enumerate_keff(dd: &DivisorData, sigma: usize, v: &BoxElement, n_max: &Rational) -> Result<Vec<Vec<Rational>>> {
    let g = degree_coefficients(dd, sigma);
    if g.iter().any(|x| !x.is_positive()) {
        return Err(Error::UnboundedDegree(sigma));
    }
    let inv = inverse_rational(&dd.anticone_matrix(sigma)).expect("anticone classes form a basis");
    let k = dd.k;
    let mut found: Vec<(Rational, Vec<Rational>)> = Vec::new();
    let mut m = vec![0i64; k];
    fn rec(
        p: usize,
        budget: Rational,
        g: &[Rational],
        m: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if p == g.len() {
            out.push(m.clone());
            return;
        }
        let mut t = 0i64;
        let mut left = budget.clone();
        while !left.is_negative() {
            m[p] = t;
            rec(p + 1, left.clone(), g, m, out);
            t += 1;
            left -= &g[p];
        }
        m[p] = 0;
    }
    let mut ms = Vec::new();
    rec(0, n_max.clone(), &g, &mut m, &mut ms);
    for mv in ms {
        let beta: Vec<Rational> =
            (0..k).map(|a| (0..k).map(|p| &inv[a][p] * Rational::from_integer(BigInt::from(mv[p]))).sum()).collect();
        let unit: Vec<Rational> = beta.iter().map(frac).collect();
        if unit != v.beta {
            continue;
        }
        let deg: Rational = beta.iter().sum();
        found.push((deg, beta));
    }
    found.sort();
    Ok(found.into_iter().map(|(_, b)| b).collect())
}

pub fn degree(beta: &[Rational]) -> Rational {
    beta.iter().sum()
}

/// Exact frame coefficients at `sigma` together with the twisted weights.
pub fn sigma_frame(dd: &DivisorData, sigma: usize, w: &[Complex64]) -> SigmaFrame {
    let fan = &dd.fan;
    let cone = &fan.max_cones[sigma];
    let n = fan.n;
    let cols: Vec<Vec<Rational>> = (0..n).map(|a| cone.iter().map(|&i| fan.b_rational(i)[a].clone()).collect()).collect();
    let s: Vec<Vec<Rational>> = (0..fan.r())
        .map(|j| solve_rational(&cols, &fan.b_rational(j)).expect("cone rays form a basis"))
        .collect();
    let tw = (0..cone.len())
        .map(|p| {
            let i = cone[p];
            let mut t = w[i];
            for j in 0..fan.r() {
                if !cone.contains(&j) {
                    t += w[j] * rat_to_f64(&s[j][p]);
                }
            }
            t
        })
        .collect();
    SigmaFrame { s, tw }
}

/// Fractional part of `sum c_i(v) l_i` over the rays of the cone.
pub fn age_of_line_bundle(dd: &DivisorData, v: &BoxElement, l: &[i64]) -> Rational {
    let cone = &dd.fan.max_cones[v.sigma];
    let s: Rational = cone.iter().zip(&v.c).map(|(&i, c)| c * Rational::from_integer(BigInt::from(l[i]))).sum();
    frac(&s)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FixedPoint {
    pub sigma: usize,
    pub v: BoxElement,
}

pub fn fixed_points(dd: &DivisorData) -> Vec<FixedPoint> {
    (0..dd.fan.max_cones.len())
        .flat_map(|s| box_elements(dd, s).into_iter().map(move |v| FixedPoint { sigma: s, v }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::examples::*;
    use crate::lattice::rat;

    fn p1dd() -> DivisorData {
        divisor_data(&p1(), &[vec![1, 1]]).unwrap()
    }
    fn p12dd() -> DivisorData {
        divisor_data(&p12(), &[vec![2, 1]]).unwrap()
    }
    fn p2dd() -> DivisorData {
        divisor_data(&p2(), &[vec![1, 1, 1]]).unwrap()
    }

    #[test]
    fn divisor_data_examples() {
        let dd = p1dd();
        assert_eq!(dd.d, vec![vec![rat(1, 1)], vec![rat(1, 1)]]);
        let dd = p12dd();
        assert_eq!(dd.d, vec![vec![rat(2, 1)], vec![rat(1, 1)]]);
        assert_eq!(dd.box_denominator, BigInt::from(2));
        assert!(matches!(divisor_data(&p1(), &[vec![-1, -1]]), Err(Error::NefViolated { a: 0, .. })));
        assert!(matches!(divisor_data(&p1(), &[vec![2, 2]]), Err(Error::NotABasis(_))));
        assert!(matches!(divisor_data(&p1(), &[vec![1, 0]]), Err(Error::NotABasis(_))));
    }

    #[test]
    fn nef_and_semipositivity() {
        let dd = p2dd();
        for s in 0..3 {
            let m = nef_membership(&dd, &dd.d[0], s);
            assert!(m.member);
        }
        assert!(!nef_membership(&p1dd(), &[rat(-1, 1)], 0).member);
        assert!(semipositive_check(&p2dd()));
        assert!(semipositive_check(&p12dd()));
        let f3 = divisor_data(&hirzebruch(3), &[vec![1, -3, 1, 0], vec![0, 1, 0, 1]]).unwrap();
        assert!(!semipositive_check(&f3));
        let f1 = divisor_data(&hirzebruch(1), &[vec![1, -1, 1, 0], vec![0, 1, 0, 1]]).unwrap();
        assert!(semipositive_check(&f1));
    }

    #[test]
    fn box_examples() {
        let dd = p1dd();
        assert_eq!(box_elements(&dd, 0).len(), 1);
        let dd = p12dd();
        let b = box_elements(&dd, 1);
        assert_eq!(b.len(), 2);
        assert!(b[0].is_zero());
        assert_eq!(b[1].c, vec![rat(1, 2)]);
        assert_eq!(b[1].v, vec![BigInt::from(-1)]);
        assert_eq!(b[1].age, rat(1, 2));
        assert_eq!(b[1].beta, vec![rat(1, 2)]);
        assert_eq!(box_elements(&dd, 0).len(), 1);
        for s in 0..3 {
            assert_eq!(box_elements(&p2dd(), s).len(), 1);
        }
    }

    #[test]
    fn v_of_beta_examples() {
        let dd = p12dd();
        let e = v_of_beta(&dd, 1, &[rat(1, 2)]).unwrap();
        assert_eq!(e.v, vec![BigInt::from(-1)]);
        assert_eq!(e.age, rat(1, 2));
        assert!(v_of_beta(&p1dd(), 0, &[rat(3, 1)]).unwrap().is_zero());
        assert!(matches!(v_of_beta(&dd, 0, &[rat(1, 2)]), Err(Error::NotInKSigma(0))));
        assert_eq!(inv_box(&dd, &e), e);
    }

    #[test]
    fn enumerate_examples() {
        let dd = p1dd();
        let z = box_elements(&dd, 0).remove(0);
        let got = enumerate_keff(&dd, 0, &z, &rat(3, 1)).unwrap();
        assert_eq!(got, (0..4).map(|d| vec![rat(d, 1)]).collect::<Vec<_>>());
        let dd = p12dd();
        let tw = box_elements(&dd, 1).remove(1);
        let got = enumerate_keff(&dd, 1, &tw, &rat(2, 1)).unwrap();
        assert_eq!(got, vec![vec![rat(1, 2)], vec![rat(3, 2)]]);
        let dd = p2dd();
        let z = box_elements(&dd, 0).remove(0);
        assert_eq!(enumerate_keff(&dd, 0, &z, &rat(2, 1)).unwrap().len(), 3);
    }

    #[test]
    fn frames() {
        let w = [Complex64::new(0.3, 0.1), Complex64::new(-0.7, 0.2), Complex64::new(1.1, -0.4)];
        let f = sigma_frame(&p1dd(), 0, &w[..2]);
        assert!((f.tw[0] - (w[0] - w[1])).norm() < 1e-15);
        let f = sigma_frame(&p12dd(), 1, &w[..2]);
        assert!((f.tw[0] - (w[1] - w[0] * 0.5)).norm() < 1e-15);
        assert_eq!(f.s[0], vec![rat(-1, 2)]);
        let f = sigma_frame(&p2dd(), 0, &w);
        assert!((f.tw[0] - (w[0] - w[2])).norm() < 1e-15);
        assert!((f.tw[1] - (w[1] - w[2])).norm() < 1e-15);
    }

    #[test]
    fn line_bundle_ages() {
        let dd = p12dd();
        let tw = box_elements(&dd, 1).remove(1);
        assert_eq!(age_of_line_bundle(&dd, &tw, &[0, 1]), rat(1, 2));
        assert_eq!(age_of_line_bundle(&dd, &tw, &[0, 2]), rat(0, 1));
        let z = box_elements(&dd, 1).remove(0);
        assert_eq!(age_of_line_bundle(&dd, &z, &[5, 3]), rat(0, 1));
    }

    #[test]
    fn eta_is_a_splitting() {
        let f1 = divisor_data(&hirzebruch(1), &[vec![1, -1, 1, 0], vec![0, 1, 0, 1]]).unwrap();
        for s in 0..4 {
            let eta = f1.eta(s);
            for a in 0..2 {
                for b in 0..2 {
                    let v: Rational = (0..4).map(|i| &f1.d[i][b] * &eta[i][a]).sum();
                    assert_eq!(v, if a == b { rat(1, 1) } else { rat(0, 1) });
                }
            }
        }
    }
}

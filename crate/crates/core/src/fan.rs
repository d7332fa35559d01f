//! Stacky fans: ray vectors, extension vectors and simplicial maximal cones.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{cokernel_order, det_rational, rank_rational, rat, solve_rational, CokernelOrder, IntMatrix, Rational};

/// A cone of the fan, given by its sorted ray indices (0-based). The empty
/// cone is the origin.
pub type Cone = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackyFan {
    pub n: usize,
    /// `b_1 .. b_{r'}`
    pub rays: Vec<Vec<i64>>,
    /// `b_{r'+1} .. b_r`
    #[serde(default)]
    pub extensions: Vec<Vec<i64>>,
    pub max_cones: Vec<Cone>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }
}

impl StackyFan {
    pub fn new(n: usize, rays: Vec<Vec<i64>>, extensions: Vec<Vec<i64>>, max_cones: Vec<Cone>) -> Self {
        let max_cones = max_cones
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        StackyFan { n, rays, extensions, max_cones }
    }

    pub fn r_prime(&self) -> usize {
        self.rays.len()
    }

    pub fn r(&self) -> usize {
        self.rays.len() + self.extensions.len()
    }

    pub fn k(&self) -> usize {
        self.r() - self.n
    }

    /// `b_i` for `i < r` (rays first, then extension vectors).
    pub fn b(&self, i: usize) -> &[i64] {
        if i < self.rays.len() {
            &self.rays[i]
        } else {
            &self.extensions[i - self.rays.len()]
        }
    }

    pub fn b_rational(&self, i: usize) -> Vec<Rational> {
        self.b(i).iter().map(|&x| rat(x, 1)).collect()
    }

    /// The `n x r` matrix of the map `Z^r -> N`, columns `b_i`.
    pub fn phi_matrix(&self) -> IntMatrix {
        let cols: Vec<Vec<BigInt>> =
            (0..self.r()).map(|i| self.b(i).iter().map(|&x| BigInt::from(x)).collect()).collect();
        IntMatrix::from_cols(&cols)
    }

    /// Rows are the vectors `b_i`, `i` in the cone, in index order.
    pub fn cone_rows(&self, cone: &[usize]) -> Vec<Vec<Rational>> {
        cone.iter().map(|&i| self.b_rational(i)).collect()
    }

    pub fn dot(&self, i: usize, u: &[Rational]) -> Rational {
        self.b(i).iter().zip(u).map(|(&b, x)| rat(b, 1) * x).sum()
    }

    /// All cones of the fan (faces of maximal cones), including the origin,
    /// sorted by dimension then lexicographically.
    pub fn cones(&self) -> Vec<Cone> {
        let mut set = BTreeSet::new();
        for sigma in &self.max_cones {
            let d = sigma.len();
            for mask in 0u32..(1 << d) {
                let c: Cone = (0..d).filter(|b| mask & (1 << b) != 0).map(|b| sigma[b]).collect();
                set.insert(c);
            }
        }
        let mut v: Vec<Cone> = set.into_iter().collect();
        v.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        v
    }

    pub fn is_cone(&self, tau: &[usize]) -> bool {
        let mut t = tau.to_vec();
        t.sort_unstable();
        t.dedup();
        t.len() == tau.len() && self.max_cones.iter().any(|s| t.iter().all(|i| s.contains(i)))
    }

    pub fn max_cone_index(&self, sigma: &[usize]) -> Option<usize> {
        let mut s = sigma.to_vec();
        s.sort_unstable();
        self.max_cones.iter().position(|c| *c == s)
    }

    /// The anticone `I_tau`: all indices `0..r` whose ray is not in `tau`.
    pub fn anticone(&self, tau: &[usize]) -> Result<Vec<usize>> {
        if !self.is_cone(tau) {
            return Err(Error::UnknownCone(tau.to_vec()));
        }
        Ok((0..self.r()).filter(|i| !tau.contains(i)).collect())
    }

    /// Anticone of the `sigma`-th maximal cone.
    pub fn anticone_of(&self, sigma: usize) -> Vec<usize> {
        (0..self.r()).filter(|i| !self.max_cones[sigma].contains(i)).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let n = self.n;
        if n == 0 {
            rep.fail("rank n must be positive");
            return rep;
        }
        for i in 0..self.r() {
            if self.b(i).len() != n {
                rep.fail(format!("vector b_{i} has length {} (expected {n})", self.b(i).len()));
            }
        }
        if !rep.ok() {
            return rep;
        }
        for i in 0..self.r() {
            if self.b(i).iter().all(|&x| x == 0) {
                rep.fail(format!("vector b_{i} is zero"));
            }
        }
        if self.max_cones.is_empty() {
            rep.fail("no maximal cones");
            return rep;
        }
        let mut structural = true;
        for (s, cone) in self.max_cones.iter().enumerate() {
            let mut sorted = cone.clone();
            sorted.dedup();
            if sorted.len() != n || cone.len() != n {
                rep.fail(format!("max cone {s} has {} distinct rays (expected {n})", sorted.len()));
                structural = false;
            }
            if let Some(&bad) = cone.iter().find(|&&i| i >= self.r_prime()) {
                rep.fail(format!("max cone {s} uses index {bad}, which is not a ray"));
                structural = false;
            }
        }
        if !structural {
            return rep;
        }
        for (s, cone) in self.max_cones.iter().enumerate() {
            if det_rational(&self.cone_rows(cone)).is_zero() {
                rep.fail(format!("max cone {s} is not simplicial (rays linearly dependent)"));
            }
        }
        if !rep.ok() {
            return rep;
        }
        for i in 0..self.r_prime() {
            if !self.max_cones.iter().any(|c| c.contains(&i)) {
                rep.fail(format!("ray {i} is not contained in any max cone"));
            }
        }
        self.check_facet_pairing(&mut rep);
        self.check_generic_cover(&mut rep);

        let ray_rows: Vec<Vec<Rational>> = (0..self.r_prime()).map(|i| self.b_rational(i)).collect();
        if rank_rational(&ray_rows) < n {
            rep.fail("rays do not span a finite-index sublattice of N");
        }
        match cokernel_order(&self.phi_matrix()) {
            CokernelOrder::Finite(o) if o == BigInt::from(1) => {}
            _ => rep.fail("b_1..b_r do not generate N"),
        }
        rep
    }

    fn check_facet_pairing(&self, rep: &mut ValidationReport) {
        let mut seen = BTreeSet::new();
        for sigma in &self.max_cones {
            for &j in sigma {
                let facet: Cone = sigma.iter().copied().filter(|&i| i != j).collect();
                if !seen.insert(facet.clone()) {
                    continue;
                }
                let holders: Vec<(usize, usize)> = self
                    .max_cones
                    .iter()
                    .filter(|c| facet.iter().all(|i| c.contains(i)))
                    .map(|c| (c.iter().copied().find(|i| !facet.contains(i)).unwrap(), 0))
                    .collect();
                if holders.len() != 2 {
                    rep.fail(format!(
                        "completeness: facet {:?} lies in {} max cones (expected 2)",
                        facet,
                        holders.len()
                    ));
                    continue;
                }
                let side = |apex: usize| {
                    let mut rows = self.cone_rows(&facet);
                    rows.push(self.b_rational(apex));
                    det_rational(&rows)
                };
                let (a, b) = (side(holders[0].0), side(holders[1].0));
                if (a.is_positive() && b.is_positive()) || (a.is_negative() && b.is_negative()) {
                    rep.fail(format!("completeness: the two max cones at facet {:?} overlap", facet));
                }
            }
        }
    }

    /// A generic vector must lie in the interior of exactly one max cone.
    fn check_generic_cover(&self, rep: &mut ValidationReport) {
        let n = self.n;
        let candidates: Vec<Vec<Rational>> = (1..40)
            .map(|t: i64| (0..n).map(|j| rat((t * 7919 + 104_729 * j as i64 * j as i64 + 13 * j as i64 + 1) % 1009 - 500, 997)).collect())
            .collect();
        for cand in candidates {
            let mut on_wall = false;
            let mut hits = 0;
            for sigma in &self.max_cones {
                let rows = self.cone_rows(sigma);
                let cols: Vec<Vec<Rational>> = (0..n).map(|a| rows.iter().map(|r| r[a].clone()).collect()).collect();
                let Some(x) = solve_rational(&cols, &cand) else { continue };
                if x.iter().any(|c| c.is_zero()) {
                    on_wall = true;
                    break;
                }
                if x.iter().all(|c| c.is_positive()) {
                    hits += 1;
                }
            }
            if on_wall {
                continue;
            }
            if hits != 1 {
                rep.fail(format!("completeness: a generic vector lies in {hits} max cones (expected 1)"));
            }
            return;
        }
        rep.fail("completeness: could not find a generic test vector");
    }
}

/// Standard test fans.
pub mod examples {
    use super::StackyFan;

    pub fn p1() -> StackyFan {
        StackyFan::new(1, vec![vec![1], vec![-1]], vec![], vec![vec![0], vec![1]])
    }

    /// Weighted projective line P(1,2): rays 1 and -2.
    pub fn p12() -> StackyFan {
        StackyFan::new(1, vec![vec![1], vec![-2]], vec![], vec![vec![0], vec![1]])
    }

    pub fn p2() -> StackyFan {
        StackyFan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, -1]],
            vec![],
            vec![vec![0, 1], vec![1, 2], vec![0, 2]],
        )
    }

    /// Hirzebruch surface F_a with rays (1,0), (0,1), (-1,a), (0,-1).
    pub fn hirzebruch(a: i64) -> StackyFan {
        StackyFan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, a], vec![0, -1]],
            vec![],
            vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;

    #[test]
    fn standard_fans_validate() {
        for f in [p1(), p12(), p2(), hirzebruch(1), hirzebruch(3)] {
            let rep = f.validate();
            assert!(rep.ok(), "{:?}", rep.failures);
        }
    }

    #[test]
    fn missing_cone_fails_completeness() {
        let f = StackyFan::new(1, vec![vec![1], vec![-1]], vec![], vec![vec![0]]);
        let rep = f.validate();
        assert!(!rep.ok());
        assert!(rep.failures.iter().any(|m| m.contains("completeness") || m.contains("not contained")));
    }

    #[test]
    fn overlapping_cones_fail() {
        // two cones on the same side
        let f = StackyFan::new(1, vec![vec![1], vec![2]], vec![], vec![vec![0], vec![1]]);
        assert!(!f.validate().ok());
    }

    #[test]
    fn p2_missing_cone_fails() {
        let f = StackyFan::new(2, vec![vec![1, 0], vec![0, 1], vec![-1, -1]], vec![], vec![vec![0, 1], vec![1, 2]]);
        assert!(!f.validate().ok());
    }

    #[test]
    fn non_generating_vectors_fail() {
        let f = StackyFan::new(1, vec![vec![2], vec![-2]], vec![], vec![vec![0], vec![1]]);
        let rep = f.validate();
        assert!(rep.failures.iter().any(|m| m.contains("generate")));
        let fixed = StackyFan::new(1, vec![vec![2], vec![-2]], vec![vec![1]], vec![vec![0], vec![1]]);
        assert!(fixed.validate().ok());
    }

    #[test]
    fn anticones() {
        assert_eq!(p1().anticone(&[0]).unwrap(), vec![1]);
        assert_eq!(p2().anticone(&[]).unwrap(), vec![0, 1, 2]);
        assert_eq!(p12().anticone(&[1]).unwrap(), vec![0]);
        assert!(p1().anticone(&[0, 1]).is_err());
    }

    #[test]
    fn cone_enumeration() {
        assert_eq!(p2().cones().len(), 7);
        assert_eq!(p1().cones().len(), 3);
    }
}

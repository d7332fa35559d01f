//! Moment polytopes, faces and the piecewise-linear characteristic cycle.
//!
//! A cell `(-tau + shift) x face` is parametrized by `Re y = sum_{j in tau} c_j b_j - shift`,
//! `c >= 0`, and `u` on the face. Its orientation is
//! `(-1)^(n + dim tau) * sign det[b_tau | D]` times the parametrization frame, where `D` is
//! any basis of the face tangent space.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fan::{Cone, StackyFan};
use crate::lattice::{det_rational, rank_rational, rat, solve_rational, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct MomentPolytope {
    pub l: Vec<i64>,
    /// `chi_sigma(l)` per max cone.
    pub vertices: Vec<Vec<Rational>>,
    pub q_ample: bool,
}

impl MomentPolytope {
    /// Vertex set of `Delta_tau(l)`, sorted and deduplicated.
    pub fn face(&self, fan: &StackyFan, tau: &[usize]) -> Vec<Vec<Rational>> {
        let mut v: Vec<Vec<Rational>> = fan
            .max_cones
            .iter()
            .enumerate()
            .filter(|(_, s)| tau.iter().all(|i| s.contains(i)))
            .map(|(p, _)| self.vertices[p].clone())
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

pub fn moment_polytope(fan: &StackyFan, l: &[i64]) -> Result<MomentPolytope> {
    if l.len() != fan.r_prime() {
        return Err(Error::Dimension(format!("line bundle of length {} (expected {})", l.len(), fan.r_prime())));
    }
    let mut vertices = Vec::with_capacity(fan.max_cones.len());
    for sigma in &fan.max_cones {
        let rows = fan.cone_rows(sigma);
        let rhs: Vec<Rational> = sigma.iter().map(|&i| rat(-l[i], 1)).collect();
        vertices.push(solve_rational(&rows, &rhs).ok_or_else(|| Error::InvalidFan("singular max cone".into()))?);
    }
    let q_ample = fan.max_cones.iter().zip(&vertices).all(|(sigma, chi)| {
        (0..fan.r_prime()).filter(|i| !sigma.contains(i)).all(|i| fan.dot(i, chi) > rat(-l[i], 1))
    });
    Ok(MomentPolytope { l: l.to_vec(), vertices, q_ample })
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceCell {
    pub tau: Cone,
    /// Sorted vertex list of the face.
    pub vertices: Vec<Vec<Rational>>,
    /// Translation `t v0` of the cone factor in `N_R`.
    pub shift: Vec<Rational>,
}

impl FaceCell {
    pub fn face_dim(&self) -> usize {
        face_directions(&self.vertices).len()
    }
}

/// Deterministic basis of the affine span of sorted vertices.
pub fn face_directions(vertices: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let Some(v0) = vertices.first() else { return vec![] };
    let mut dirs: Vec<Vec<Rational>> = Vec::new();
    for v in &vertices[1..] {
        let d: Vec<Rational> = v.iter().zip(v0).map(|(a, b)| a - b).collect();
        let mut trial = dirs.clone();
        trial.push(d.clone());
        if rank_rational(&trial) == trial.len() {
            dirs = trial;
        }
    }
    dirs
}

/// Formal integer combination of cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleChain {
    pub cells: BTreeMap<FaceCell, i64>,
    pub label: String,
}

impl CycleChain {
    pub fn empty(label: impl Into<String>) -> Self {
        CycleChain { cells: BTreeMap::new(), label: label.into() }
    }

    pub fn add_cell(&mut self, cell: FaceCell, m: i64) {
        let e = self.cells.entry(cell.clone()).or_insert(0);
        *e += m;
        if *e == 0 {
            self.cells.remove(&cell);
        }
    }

    pub fn add(&self, other: &CycleChain) -> CycleChain {
        let mut out = self.clone();
        for (c, m) in &other.cells {
            out.add_cell(c.clone(), *m);
        }
        out
    }

    pub fn scale(&self, k: i64) -> CycleChain {
        let mut out = CycleChain::empty(self.label.clone());
        if k != 0 {
            for (c, m) in &self.cells {
                out.add_cell(c.clone(), m * k);
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// One cell per line: multiplicity, cone, face vertices, shift.
    pub fn dump(&self) -> String {
        let fmt_v = |v: &[Rational]| format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        let mut s = String::new();
        for (c, m) in &self.cells {
            let verts: Vec<String> = c.vertices.iter().map(|v| fmt_v(v)).collect();
            s.push_str(&format!("{m}\t{:?}\t[{}]\t{}\n", c.tau, verts.join(" "), fmt_v(&c.shift)));
        }
        s
    }
}

pub fn characteristic_cycle(fan: &StackyFan, l: &[i64]) -> Result<CycleChain> {
    let poly = moment_polytope(fan, l)?;
    if !poly.q_ample {
        return Err(Error::NotAmple(l.to_vec()));
    }
    let mut chain = CycleChain::empty(format!("CC(L{l:?})"));
    for tau in fan.cones() {
        let vertices = poly.face(fan, &tau);
        chain.add_cell(FaceCell { tau, vertices, shift: vec![Rational::zero(); fan.n] }, 1);
    }
    Ok(chain)
}

/// `Xi + t v0`, `v0` in the interior of the max cone `sigma`.
pub fn shifted_cycle(fan: &StackyFan, chain: &CycleChain, sigma: usize, v0: &[Rational], t: &Rational) -> Result<CycleChain> {
    let cone = fan.max_cones.get(sigma).ok_or_else(|| Error::UnknownCone(vec![sigma]))?;
    if v0.len() != fan.n {
        return Err(Error::Dimension(format!("shift vector of length {}", v0.len())));
    }
    let rows = fan.cone_rows(cone);
    let cols: Vec<Vec<Rational>> = (0..fan.n).map(|a| rows.iter().map(|r| r[a].clone()).collect()).collect();
    let coords = solve_rational(&cols, v0).ok_or(Error::NotInterior(sigma))?;
    if coords.iter().any(|x| !x.is_positive()) || t.is_negative() {
        return Err(Error::NotInterior(sigma));
    }
    let mut out = CycleChain::empty(format!("{} + t v0", chain.label));
    for (c, m) in &chain.cells {
        let shift = c.shift.iter().zip(v0).map(|(s, v)| s + t * v).collect();
        out.add_cell(FaceCell { shift, ..c.clone() }, *m);
    }
    Ok(out)
}

pub fn cycle_of_complex(fan: &StackyFan, terms: &[(Vec<i64>, i64)]) -> Result<CycleChain> {
    let mut out = CycleChain::empty("complex");
    for (l, m) in terms {
        out = out.add(&characteristic_cycle(fan, l)?.scale(*m));
    }
    Ok(out)
}

/// Orientation sign of a cell relative to its parametrization frame.
pub fn cell_sign(fan: &StackyFan, cell: &FaceCell) -> i64 {
    let mut cols: Vec<Vec<Rational>> = fan.cone_rows(&cell.tau);
    cols.extend(face_directions(&cell.vertices));
    let n = fan.n;
    let rows: Vec<Vec<Rational>> = (0..n).map(|a| cols.iter().map(|c| c[a].clone()).collect()).collect();
    let det = det_rational(&rows);
    let parity = if (n + cell.tau.len()).is_multiple_of(2) { 1 } else { -1 };
    if det.is_positive() {
        parity
    } else if det.is_negative() {
        -parity
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundaryPiece {
    pub cone: Cone,
    pub vertices: Vec<Vec<String>>,
    pub multiplicity: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub unmatched: Vec<BoundaryPiece>,
    pub dimension_errors: Vec<String>,
}

impl CycleReport {
    pub fn ok(&self) -> bool {
        self.unmatched.is_empty() && self.dimension_errors.is_empty()
    }
}

fn embed(n: usize, top: Option<&[Rational]>, bottom: Option<&[Rational]>) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); 2 * n];
    if let Some(t) = top {
        v[..n].clone_from_slice(t);
    }
    if let Some(b) = bottom {
        v[n..].clone_from_slice(b);
    }
    v
}

fn neg(v: &[Rational]) -> Vec<Rational> {
    v.iter().map(|x| -x).collect()
}

/// Computes the boundary of the chain rel infinity. Every finite boundary piece must cancel.
pub fn verify_cycle(fan: &StackyFan, chain: &CycleChain) -> CycleReport {
    let n = fan.n;
    let mut rep = CycleReport::default();
    let mut pieces: BTreeMap<(Cone, Vec<Vec<Rational>>, Vec<Rational>), i64> = BTreeMap::new();
    for (cell, &mult) in &chain.cells {
        let dirs = face_directions(&cell.vertices);
        if cell.tau.len() + dirs.len() != n {
            rep.dimension_errors.push(format!("cell {:?} has dimension {}", cell.tau, cell.tau.len() + dirs.len()));
            continue;
        }
        let eps = cell_sign(fan, cell);
        // parametrization frame as columns in N_R x M_R
        let mut frame: Vec<Vec<Rational>> = cell.tau.iter().map(|&j| embed(n, Some(&fan.b_rational(j)), None)).collect();
        frame.extend(dirs.iter().map(|d| embed(n, None, Some(d))));
        let mut boundary: Vec<(Cone, Vec<Vec<Rational>>, Vec<Rational>)> = Vec::new();
        for &j in &cell.tau {
            let alpha: Cone = cell.tau.iter().copied().filter(|&i| i != j).collect();
            let nu = embed(n, Some(&neg(&fan.b_rational(j))), None);
            boundary.push((alpha, cell.vertices.clone(), nu));
        }
        if !dirs.is_empty() {
            for j in 0..fan.r_prime() {
                if cell.tau.contains(&j) {
                    continue;
                }
                let mut bigger = cell.tau.clone();
                bigger.push(j);
                bigger.sort_unstable();
                if !fan.is_cone(&bigger) {
                    continue;
                }
                let vals: Vec<Rational> = cell.vertices.iter().map(|v| fan.dot(j, v)).collect();
                let min = vals.iter().min().unwrap().clone();
                let facet: Vec<Vec<Rational>> =
                    cell.vertices.iter().zip(&vals).filter(|(_, x)| **x == min).map(|(v, _)| v.clone()).collect();
                if face_directions(&facet).len() + 1 != dirs.len() {
                    continue;
                }
                // d in span(dirs) with <b_j, d> = -1
                let row: Vec<Rational> = dirs.iter().map(|d| fan.dot(j, d)).collect();
                let Some(a) = solve_rational(&[row], &[rat(-1, 1)]) else { continue };
                let d: Vec<Rational> =
                    (0..n).map(|p| dirs.iter().zip(&a).map(|(dv, x)| &dv[p] * x).sum()).collect();
                boundary.push((cell.tau.clone(), facet, embed(n, None, Some(&d))));
            }
        }
        for (alpha, face, nu) in boundary {
            let mut target = vec![nu];
            target.extend(alpha.iter().map(|&a| embed(n, Some(&neg(&fan.b_rational(a))), None)));
            target.extend(face_directions(&face).iter().map(|d| embed(n, None, Some(d))));
            // frame * X = target, column by column
            let rows: Vec<Vec<Rational>> = (0..2 * n).map(|p| frame.iter().map(|f| f[p].clone()).collect()).collect();
            let x: Vec<Vec<Rational>> = target
                .iter()
                .map(|t| solve_rational(&rows, t).expect("boundary frame lies in the cell tangent space"))
                .collect();
            let det = det_rational(&x);
            let s = if det.is_positive() { 1 } else { -1 };
            *pieces.entry((alpha, face, cell.shift.clone())).or_insert(0) += mult * eps * s;
        }
    }
    for ((cone, face, _), m) in pieces {
        if m != 0 {
            rep.unmatched.push(BoundaryPiece {
                cone,
                vertices: face.iter().map(|v| v.iter().map(|x| x.to_string()).collect()).collect(),
                multiplicity: m,
            });
        }
    }
    rep
}

//! Numeric parameters `(z, w, t0, q)` and generic sampling of `w`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divisor::{sigma_frame, DivisorData};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivariantParams {
    pub z: f64,
    pub w: Vec<Complex64>,
    pub t0: Complex64,
    pub q: Vec<f64>,
}

/// Minimal separation used by the genericity guard.
pub const GENERIC_EPS: f64 = 1e-9;

impl EquivariantParams {
    pub fn new(z: f64, w: Vec<Complex64>, t0: Complex64, q: Vec<f64>) -> Self {
        EquivariantParams { z, w, t0, q }
    }

    pub fn log_q(&self) -> Vec<f64> {
        self.q.iter().map(|x| x.ln()).collect()
    }

    pub fn check_basic(&self, dd: &DivisorData, q_max: f64) -> Result<()> {
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::Degenerate(format!("z must be positive, got {}", self.z)));
        }
        if self.w.len() != dd.r() {
            return Err(Error::Dimension(format!("w has length {} (expected {})", self.w.len(), dd.r())));
        }
        if self.q.len() != dd.k {
            return Err(Error::Dimension(format!("q has length {} (expected {})", self.q.len(), dd.k)));
        }
        if let Some(x) = self.q.iter().find(|&&x| !(x > 0.0 && x < q_max)) {
            return Err(Error::Degenerate(format!("q = {x} outside (0, {q_max})")));
        }
        Ok(())
    }

    /// Twisted weights at every max cone must be nonzero and pairwise distinct.
    pub fn check_generic(&self, dd: &DivisorData) -> Result<()> {
        for sigma in 0..dd.fan.max_cones.len() {
            let tw = sigma_frame(dd, sigma, &self.w).tw;
            for (p, a) in tw.iter().enumerate() {
                if a.norm() < GENERIC_EPS {
                    return Err(Error::Degenerate(format!("twisted weight {p} vanishes at max cone {sigma}")));
                }
                for b in &tw[p + 1..] {
                    if (a - b).norm() < GENERIC_EPS {
                        return Err(Error::Degenerate(format!("twisted weights coincide at max cone {sigma}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Box in `C^r` from which `w` is drawn: independent per-coordinate ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WBox {
    pub re: Vec<(f64, f64)>,
    pub im: Vec<(f64, f64)>,
}

/// Draws `w` uniformly from the box until the genericity guard and `extra` both accept it.
pub fn sample_w(
    dd: &DivisorData,
    region: &WBox,
    seed: u64,
    max_tries: usize,
    mut extra: impl FnMut(&[Complex64]) -> bool,
) -> Result<Vec<Complex64>> {
    let r = dd.r();
    if region.re.len() != r || region.im.len() != r {
        return Err(Error::Dimension(format!("w region must have {r} entries")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    for _ in 0..max_tries {
        let w: Vec<Complex64> =
            (0..r).map(|i| Complex64::new(draw(&mut rng, region.re[i]), draw(&mut rng, region.im[i]))).collect();
        let p = EquivariantParams::new(1.0, w.clone(), Complex64::new(0.0, 0.0), vec![]);
        if p.check_generic(dd).is_ok() && extra(&w) {
            return Ok(w);
        }
    }
    Err(Error::Degenerate(format!("no admissible w found in {max_tries} draws")))
}

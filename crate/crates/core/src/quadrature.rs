//! Gauss-Legendre rules and globally adaptive subdivision in one and two dimensions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]` by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                dp = 1.0;
                x = 0.0;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    fn apply(&self, f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        let mut s = Complex64::new(0.0, 0.0);
        let mut abs = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(m + h * x);
            s += v * *w;
            abs += v.norm() * w;
        }
        (s * h, abs * h.abs())
    }

    fn apply2(&self, f: &mut impl FnMut(f64, f64) -> Complex64, r: &Rect) -> (Complex64, f64) {
        let (hx, hy) = (0.5 * (r.x1 - r.x0), 0.5 * (r.y1 - r.y0));
        let (mx, my) = (0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
        let mut s = Complex64::new(0.0, 0.0);
        let mut abs = 0.0;
        for (x, wx) in self.nodes.iter().zip(&self.weights) {
            for (y, wy) in self.nodes.iter().zip(&self.weights) {
                let v = f(mx + hx * x, my + hy * y);
                s += v * (wx * wy);
                abs += v.norm() * wx * wy;
            }
        }
        (s * (hx * hy), abs * (hx * hy).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Fixed ray truncation radius; `None` selects it per cell from the decay of the integrand.
    pub ray_radius: Option<f64>,
    pub nodes_per_dim: usize,
    pub adaptive_tol: f64,
    pub max_subdivisions: usize,
    /// Relative size of the integrand on the truncation boundary below which a radius is accepted.
    pub tail_threshold: f64,
    pub trace: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            ray_radius: None,
            nodes_per_dim: 16,
            adaptive_tol: 1e-11,
            max_subdivisions: 4000,
            tail_threshold: 1e-18,
            trace: false,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ray_radius.is_some_and(|r| !(r > 0.0)) || !(self.adaptive_tol > 0.0) || self.nodes_per_dim == 0 {
            return Err(Error::Config("quadrature needs R > 0, tol > 0 and at least one node".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    /// Integral of `|f|` over the domain.
    pub abs: f64,
    pub subdivisions: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    abs: f64,
}

fn panel(rule: &GaussLegendre, f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> Panel {
    let (coarse, _) = rule.apply(f, a, b);
    let m = 0.5 * (a + b);
    let (l, la) = rule.apply(f, a, m);
    let (r, ra) = rule.apply(f, m, b);
    let value = l + r;
    Panel { a, b, value, err: (value - coarse).norm(), abs: la + ra }
}

fn worst<T>(items: &[T], err: impl Fn(&T) -> f64) -> usize {
    let mut best = 0;
    for (i, it) in items.iter().enumerate() {
        if err(it) > err(&items[best]) {
            best = i;
        }
    }
    best
}

/// Adaptive integral of `f` over `[a, b]`; stops when the summed error is below `tol` times
/// the integral of `|f|`.
pub fn adaptive_1d(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
    tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    let mut panels = vec![panel(rule, &mut f, a, b)];
    let mut subdivisions = 0;
    loop {
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let abs: f64 = panels.iter().map(|p| p.abs).sum();
        if err <= tol * abs || abs == 0.0 {
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let value = panels.iter().map(|p| p.value).sum();
            return Ok(QuadResult { value, error: err, abs, subdivisions });
        }
        if subdivisions >= max_subdivisions || !err.is_finite() {
            return Err(Error::NonConvergent { subdivisions, error: err / abs });
        }
        let i = worst(&panels, |p| p.err);
        let p = panels.swap_remove(i);
        let m = 0.5 * (p.a + p.b);
        panels.push(panel(rule, &mut f, p.a, m));
        panels.push(panel(rule, &mut f, m, p.b));
        subdivisions += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    fn split(&self) -> [Rect; 4] {
        let mx = 0.5 * (self.x0 + self.x1);
        let my = 0.5 * (self.y0 + self.y1);
        [
            Rect { x0: self.x0, x1: mx, y0: self.y0, y1: my },
            Rect { x0: mx, x1: self.x1, y0: self.y0, y1: my },
            Rect { x0: self.x0, x1: mx, y0: my, y1: self.y1 },
            Rect { x0: mx, x1: self.x1, y0: my, y1: self.y1 },
        ]
    }
}

struct Cell2 {
    rect: Rect,
    value: Complex64,
    err: f64,
    abs: f64,
}

fn cell2(rule: &GaussLegendre, f: &mut impl FnMut(f64, f64) -> Complex64, rect: Rect) -> Cell2 {
    let (coarse, _) = rule.apply2(f, &rect);
    let mut value = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for c in rect.split() {
        let (v, a) = rule.apply2(f, &c);
        value += v;
        abs += a;
    }
    Cell2 { rect, value, err: (value - coarse).norm(), abs }
}

/// Two-dimensional analogue of [`adaptive_1d`] on a rectangle, splitting into quarters.
pub fn adaptive_2d(
    mut f: impl FnMut(f64, f64) -> Complex64,
    rect: Rect,
    rule: &GaussLegendre,
    tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    let mut cells = vec![cell2(rule, &mut f, rect)];
    let mut subdivisions = 0;
    loop {
        let err: f64 = cells.iter().map(|c| c.err).sum();
        let abs: f64 = cells.iter().map(|c| c.abs).sum();
        if err <= tol * abs || abs == 0.0 {
            cells.sort_by(|p, q| p.rect.x0.total_cmp(&q.rect.x0).then(p.rect.y0.total_cmp(&q.rect.y0)));
            let value = cells.iter().map(|c| c.value).sum();
            return Ok(QuadResult { value, error: err, abs, subdivisions });
        }
        if subdivisions >= max_subdivisions || !err.is_finite() {
            return Err(Error::NonConvergent { subdivisions, error: err / abs });
        }
        let i = worst(&cells, |c| c.err);
        let c = cells.swap_remove(i);
        for q in c.rect.split() {
            cells.push(cell2(rule, &mut f, q));
        }
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials() {
        for n in [1, 2, 5, 10, 16, 21] {
            let g = GaussLegendre::new(n);
            assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // exact up to degree 2n - 1
            let deg = 2 * n - 1;
            let s: f64 = g.nodes.iter().zip(&g.weights).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let want = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - want).abs() < 1e-13, "n={n}");
        }
        let g = GaussLegendre::new(2);
        assert!((g.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let g = GaussLegendre::new(10);
        let f = |x: f64| Complex64::new(1.0 / (1e-4 + x * x), 0.0);
        let r = adaptive_1d(f, -1.0, 1.0, &g, 1e-12, 500).unwrap();
        let want = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value.re - want).abs() < 1e-9 * want);
        assert!(r.error <= 1e-12 * r.abs);
    }

    #[test]
    fn adaptive_2d_gaussian() {
        let g = GaussLegendre::new(10);
        let f = |x: f64, y: f64| Complex64::new((-(x * x + y * y)).exp(), 0.0);
        let r = adaptive_2d(f, Rect { x0: 0.0, x1: 8.0, y0: 0.0, y1: 8.0 }, &g, 1e-12, 500).unwrap();
        assert!((r.value.re - PI / 4.0).abs() < 1e-11);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = GaussLegendre::new(3);
        let f = |x: f64| Complex64::new((1.0 / x.abs().max(1e-300)).sin(), 0.0);
        assert!(matches!(adaptive_1d(f, -1.0, 1.0, &g, 1e-14, 5), Err(Error::NonConvergent { .. })));
    }
}

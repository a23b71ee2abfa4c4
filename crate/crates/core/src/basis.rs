//! Local polynomial bases.
//!
//! Cell spaces use scaled monomials `((x - x_T)/h_T)^a ((y - y_T)/h_T)^b`
//! in graded-lexicographic order (`1, x, y, x^2, xy, y^2, ...`), so the
//! first `dim(k-1)` functions of an order-`k` basis are exactly the
//! order-`k-1` basis on the same cell. Edge spaces use Legendre polynomials
//! in the chordwise parameter `s` running from `-1` at the lower-indexed
//! vertex to `+1` at the higher one.

use crate::{Point, Vec2};

/// Dimension of `P_k` in two variables.
pub const fn poly_dim(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellBasis {
    order: usize,
    center: Point,
    scale: f64,
    exponents: Vec<(usize, usize)>,
}

impl CellBasis {
    pub fn new(order: usize, center: Point, scale: f64) -> Self {
        assert!(scale > 0.0, "basis scale must be positive");
        let mut exponents = Vec::with_capacity(poly_dim(order));
        for d in 0..=order {
            for j in 0..=d {
                exponents.push((d - j, j));
            }
        }
        Self { order, center, scale, exponents }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    /// Writes values (and optionally gradients) of all functions at `p`.
    pub fn eval_into(&self, p: Point, values: &mut [f64], gradients: Option<&mut [Vec2]>) {
        let n = self.order + 1;
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        assert!(n <= 16, "order too high");
        for i in 1..n {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        for (v, &(a, b)) in values.iter_mut().zip(&self.exponents) {
            *v = px[a] * py[b];
        }
        if let Some(g) = gradients {
            let inv = 1.0 / self.scale;
            for (g, &(a, b)) in g.iter_mut().zip(&self.exponents) {
                let dx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let dy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                *g = Vec2::new(dx * inv, dy * inv);
            }
        }
    }

    pub fn values(&self, p: Point) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval_into(p, &mut v, None);
        v
    }

    pub fn eval(&self, p: Point) -> (Vec<f64>, Vec<Vec2>) {
        let mut v = vec![0.0; self.dim()];
        let mut g = vec![Vec2::zeros(); self.dim()];
        self.eval_into(p, &mut v, Some(&mut g));
        (v, g)
    }

    /// Value of the polynomial with coefficients `coef` at `p`.
    pub fn evaluate(&self, coef: &[f64], p: Point) -> f64 {
        self.values(p).iter().zip(coef).map(|(v, c)| v * c).sum()
    }
}

/// `[P_{k-1}]^2`: the order-`k-1` scalar basis in each Cartesian slot.
///
/// Function `c * n + j` is scalar function `j` in component `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct VecBasis {
    scalar: CellBasis,
}

impl VecBasis {
    pub fn new(scalar: CellBasis) -> Self {
        Self { scalar }
    }

    pub fn scalar(&self) -> &CellBasis {
        &self.scalar
    }

    pub fn dim(&self) -> usize {
        2 * self.scalar.dim()
    }

    /// Vector value of the field with coefficients `coef` at `p`.
    pub fn evaluate(&self, coef: &[f64], p: Point) -> Vec2 {
        let n = self.scalar.dim();
        let v = self.scalar.values(p);
        let x = v.iter().zip(&coef[..n]).map(|(a, b)| a * b).sum();
        let y = v.iter().zip(&coef[n..2 * n]).map(|(a, b)| a * b).sum();
        Vec2::new(x, y)
    }
}

/// Legendre polynomials `P_0 .. P_{n-1}` at `s`.
pub fn legendre_values(n: usize, s: f64, out: &mut [f64]) {
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n > 1 {
        out[1] = s;
    }
    for j in 2..n {
        let jf = j as f64;
        out[j] = ((2.0 * jf - 1.0) * s * out[j - 1] - (jf - 1.0) * out[j - 2]) / jf;
    }
}

/// `P_{k-1}(e)` on a straight edge, parameterised from `start` to `end`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBasis {
    modes: usize,
    start: Point,
    end: Point,
}

impl EdgeBasis {
    /// `modes` = `k`, the dimension of `P_{k-1}(e)`.
    pub fn new(modes: usize, start: Point, end: Point) -> Self {
        Self { modes, start, end }
    }

    pub fn dim(&self) -> usize {
        self.modes
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Chordwise parameter of a point on the edge.
    pub fn param(&self, p: Point) -> f64 {
        let d = self.end - self.start;
        2.0 * (p - self.start).dot(&d) / d.norm_squared() - 1.0
    }

    pub fn point(&self, s: f64) -> Point {
        nalgebra::center(&self.start, &self.end) + (self.end - self.start) * (0.5 * s)
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        legendre_values(self.modes, s, out);
    }

    pub fn values(&self, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.modes];
        self.eval_into(s, &mut v);
        v
    }

    /// Diagonal of the edge mass matrix, `|e| / (2j + 1)`.
    pub fn mass_diagonal(&self) -> Vec<f64> {
        let len = self.length();
        (0..self.modes).map(|j| len / (2 * j + 1) as f64).collect()
    }

    pub fn evaluate(&self, coef: &[f64], p: Point) -> f64 {
        self.values(self.param(p)).iter().zip(coef).map(|(a, b)| a * b).sum()
    }
}

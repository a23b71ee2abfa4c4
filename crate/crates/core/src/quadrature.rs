//! Positive-weight quadrature on segments, triangles and star-shaped polygons.
//!
//! Triangle rules up to degree 9 are fully symmetric point sets (Dunavant);
//! higher degrees use a collapsed Gauss-Legendre product rule, which is not
//! symmetric but keeps all points interior and all weights positive.

use std::sync::OnceLock;

use crate::error::{Result, WgError};
use crate::mesh::polygon_geometry;
use crate::Point;

/// Highest total degree for which [`triangle_rule`] builds a rule.
pub const MAX_TRIANGLE_DEGREE: usize = 40;

/// Quadrature points and weights in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// All polynomials of total degree up to this are integrated exactly.
    pub exact_degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess for the i-th largest root, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on the segment `[a, b]` exact for polynomials of `degree`.
pub fn segment_rule(a: Point, b: Point, degree: usize) -> QuadRule {
    let n = degree / 2 + 1;
    let (nodes, weights) = gauss_legendre(n);
    let mid = nalgebra::center(&a, &b);
    let half = (b - a) * 0.5;
    let jac = half.norm();
    QuadRule {
        points: nodes.iter().map(|&s| mid + half * s).collect(),
        weights: weights.iter().map(|w| w * jac).collect(),
        exact_degree: 2 * n - 1,
    }
}

/// Rule on the reference triangle in barycentric coordinates, weights sum to 1.
#[derive(Debug, Clone)]
struct RefRule {
    bary: Vec<[f64; 3]>,
    weights: Vec<f64>,
    exact_degree: usize,
}

enum Orbit {
    Centroid(f64),
    /// `(a, a, 1-2a)` and permutations.
    Three(f64, f64),
    /// `(a, b, 1-a-b)` and permutations.
    Six(f64, f64, f64),
}

fn expand(orbits: &[Orbit], exact_degree: usize) -> RefRule {
    let mut bary = Vec::new();
    let mut weights = Vec::new();
    for o in orbits {
        match *o {
            Orbit::Centroid(w) => {
                bary.push([1.0 / 3.0; 3]);
                weights.push(w);
            }
            Orbit::Three(a, w) => {
                let c = 1.0 - 2.0 * a;
                for p in [[a, a, c], [a, c, a], [c, a, a]] {
                    bary.push(p);
                    weights.push(w);
                }
            }
            Orbit::Six(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    bary.push(p);
                    weights.push(w);
                }
            }
        }
    }
    RefRule { bary, weights, exact_degree }
}

fn symmetric_rule(degree: usize) -> Option<RefRule> {
    use Orbit::*;
    let r = match degree {
        0 | 1 => expand(&[Centroid(1.0)], 1),
        2 => expand(&[Three(1.0 / 6.0, 1.0 / 3.0)], 2),
        3 | 4 => expand(
            &[
                Three(0.445948490915965, 0.223381589678011),
                Three(0.091576213509771, 0.109951743655322),
            ],
            4,
        ),
        5 => expand(
            &[
                Centroid(0.225),
                Three(0.470142064105115, 0.132394152788506),
                Three(0.101286507323456, 0.125939180544827),
            ],
            5,
        ),
        6 => expand(
            &[
                Three(0.249286745170910, 0.116786275726379),
                Three(0.063089014491502, 0.050844906370207),
                Six(0.053145049844817, 0.310352451033784, 0.082851075618374),
            ],
            6,
        ),
        7 | 8 => expand(
            &[
                Centroid(0.144315607677787),
                Three(0.459292588292723, 0.095091634267285),
                Three(0.170569307751760, 0.103217370534718),
                Three(0.050547228317031, 0.032458497623198),
                Six(0.008394777409958, 0.263112829634638, 0.027230314174435),
            ],
            8,
        ),
        9 => expand(
            &[
                Centroid(0.097135796282799),
                Three(0.489682519198738, 0.031334700227139),
                Three(0.437089591492937, 0.077827541004774),
                Three(0.188203535619033, 0.079647738927210),
                Three(0.044729513394453, 0.025577675658698),
                Six(0.036838412054736, 0.221962989160766, 0.043283539377289),
            ],
            9,
        ),
        _ => return None,
    };
    Some(r)
}

/// Collapsed (Duffy) Gauss-Legendre rule on the reference triangle.
fn collapsed_rule(degree: usize) -> RefRule {
    let n = (degree + 2).div_ceil(2);
    let (nodes, w) = gauss_legendre(n);
    let mut bary = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let xi = 0.5 * (nodes[i] + 1.0);
        for j in 0..n {
            let eta = 0.5 * (nodes[j] + 1.0);
            let x = xi;
            let y = eta * (1.0 - xi);
            bary.push([1.0 - x - y, x, y]);
            // 0.25 from the interval maps, 2 to normalise the area 1/2 to 1.
            weights.push(0.5 * w[i] * w[j] * (1.0 - xi));
        }
    }
    RefRule { bary, weights, exact_degree: 2 * n - 2 }
}

fn reference_rule(degree: usize) -> &'static RefRule {
    static RULES: OnceLock<Vec<RefRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=MAX_TRIANGLE_DEGREE)
            .map(|d| symmetric_rule(d).unwrap_or_else(|| collapsed_rule(d)))
            .collect()
    });
    &rules[degree]
}

/// Rule on the triangle `tri` exact for polynomials of total `degree`.
pub fn triangle_rule(tri: [Point; 3], degree: usize) -> Result<QuadRule> {
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(WgError::QuadratureDegree { requested: degree, max: MAX_TRIANGLE_DEGREE });
    }
    let [a, b, c] = tri;
    let area = 0.5 * (b - a).perp(&(c - a));
    if !(area > 0.0) {
        return Err(WgError::Geometry(format!("triangle with non-positive area {area:.3e}")));
    }
    Ok(map_reference(reference_rule(degree), tri, area))
}

fn map_reference(r: &RefRule, [a, b, c]: [Point; 3], area: f64) -> QuadRule {
    QuadRule {
        points: r
            .bary
            .iter()
            .map(|l| Point::from(a.coords * l[0] + b.coords * l[1] + c.coords * l[2]))
            .collect(),
        weights: r.weights.iter().map(|w| w * area).collect(),
        exact_degree: r.exact_degree,
    }
}

/// Rule on a counter-clockwise polygon that is star-shaped with respect to
/// its centroid, built from the centroid fan. Triangles use
/// [`triangle_rule`] directly.
pub fn polygon_rule(pts: &[Point], degree: usize) -> Result<QuadRule> {
    if pts.len() == 3 {
        return triangle_rule([pts[0], pts[1], pts[2]], degree);
    }
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(WgError::QuadratureDegree { requested: degree, max: MAX_TRIANGLE_DEGREE });
    }
    let centroid = polygon_geometry(pts)?.centroid;
    let r = reference_rule(degree);
    let n = pts.len();
    let mut out = QuadRule {
        points: Vec::with_capacity(n * r.weights.len()),
        weights: Vec::with_capacity(n * r.weights.len()),
        exact_degree: r.exact_degree,
    };
    for i in 0..n {
        let tri = [centroid, pts[i], pts[(i + 1) % n]];
        let area = 0.5 * (tri[1] - tri[0]).perp(&(tri[2] - tri[0]));
        if !(area > 0.0) {
            return Err(WgError::Geometry(format!(
                "fan triangle {i} has non-positive area {area:.3e}; polygon is not star-shaped about its centroid"
            )));
        }
        let part = map_reference(r, tri, area);
        out.points.extend(part.points);
        out.weights.extend(part.weights);
    }
    Ok(out)
}

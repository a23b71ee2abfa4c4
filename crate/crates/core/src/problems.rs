//! Manufactured test problems on the unit square.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Result, WgError};
use crate::{Point, Vec2};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> Vec2 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> Matrix2<f64> + Send + Sync>;

/// `-div(a grad u) = f` in the unit square, `u = g` on the boundary, with a
/// known exact solution.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub tensor: TensorFn,
    pub source: ScalarFn,
    pub boundary: ScalarFn,
    pub exact: ScalarFn,
    pub exact_grad: VectorFn,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec").field("name", &self.name).finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Builds a problem with `g = u` and checks it with
    /// [`check_consistency`](Self::check_consistency).
    pub fn new(
        name: impl Into<String>,
        tensor: impl Fn(Point) -> Matrix2<f64> + Send + Sync + 'static,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
        exact: impl Fn(Point) -> f64 + Send + Sync + 'static,
        exact_grad: impl Fn(Point) -> Vec2 + Send + Sync + 'static,
    ) -> Result<Self> {
        let exact: ScalarFn = Arc::new(exact);
        let p = Self {
            name: name.into(),
            tensor: Arc::new(tensor),
            source: Arc::new(source),
            boundary: exact.clone(),
            exact,
            exact_grad: Arc::new(exact_grad),
        };
        p.check_consistency()?;
        Ok(p)
    }

    pub fn a(&self, p: Point) -> Matrix2<f64> {
        (self.tensor)(p)
    }

    pub fn f(&self, p: Point) -> f64 {
        (self.source)(p)
    }

    pub fn g(&self, p: Point) -> f64 {
        (self.boundary)(p)
    }

    pub fn u(&self, p: Point) -> f64 {
        (self.exact)(p)
    }

    pub fn grad_u(&self, p: Point) -> Vec2 {
        (self.exact_grad)(p)
    }

    /// Samples a grid of interior points and checks that `a` is symmetric
    /// positive definite, that `grad u` matches finite differences of `u`,
    /// and that `f` matches central differences of `-div(a grad u)`.
    pub fn check_consistency(&self) -> Result<()> {
        let h = 1e-4;
        let fail = |p: Point, what: String| {
            Err(WgError::Config(format!("problem `{}` at ({:.3}, {:.3}): {what}", self.name, p.x, p.y)))
        };
        for i in 0..7 {
            for j in 0..7 {
                let p = Point::new(0.07 + 0.141 * i as f64, 0.05 + 0.143 * j as f64);
                let a = self.a(p);
                let scale = a.abs().max().max(1.0);
                if (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 * scale {
                    return fail(p, "coefficient tensor not symmetric".into());
                }
                if !(a[(0, 0)] > 0.0 && a.determinant() > 0.0) {
                    return fail(p, "coefficient tensor not positive definite".into());
                }
                let (ex, ey) = (Vec2::new(h, 0.0), Vec2::new(0.0, h));
                let fd = Vec2::new(
                    (self.u(p + ex) - self.u(p - ex)) / (2.0 * h),
                    (self.u(p + ey) - self.u(p - ey)) / (2.0 * h),
                );
                let g = self.grad_u(p);
                if (fd - g).norm() > 1e-6 * (1.0 + g.norm()) {
                    return fail(p, format!("gradient {g:?} disagrees with finite differences {fd:?}"));
                }
                let flux = |q: Point| self.a(q) * self.grad_u(q);
                let div = (flux(p + ex).x - flux(p - ex).x + flux(p + ey).y - flux(p - ey).y) / (2.0 * h);
                let f = self.f(p);
                if (f + div).abs() > 1e-6 * (1.0 + f.abs()) {
                    return fail(p, format!("source {f} disagrees with -div(a grad u) = {}", -div));
                }
            }
        }
        Ok(())
    }
}

fn identity(_: Point) -> Matrix2<f64> {
    Matrix2::identity()
}

fn ex1_variable() -> Result<ProblemSpec> {
    let u = |p: Point| (PI * p.x).sin() * (PI * p.y).cos();
    let grad = |p: Point| {
        Vec2::new(
            PI * (PI * p.x).cos() * (PI * p.y).cos(),
            -PI * (PI * p.x).sin() * (PI * p.y).sin(),
        )
    };
    let tensor = |p: Point| {
        let d = p.x * p.x + p.y * p.y + 1.0;
        Matrix2::new(d, p.x * p.y, p.x * p.y, d)
    };
    let source = move |p: Point| {
        let d = p.x * p.x + p.y * p.y + 1.0;
        let g = grad(p);
        let uxy = -PI * PI * (PI * p.x).cos() * (PI * p.y).sin();
        let lap = -2.0 * PI * PI * u(p);
        -(3.0 * p.x * g.x + 3.0 * p.y * g.y + d * lap + 2.0 * p.x * p.y * uxy)
    };
    ProblemSpec::new("ex1-variable", tensor, source, u, grad)
}

fn ex2_poisson() -> Result<ProblemSpec> {
    let u = |p: Point| (PI * p.x).sin() * (PI * p.y).cos();
    ProblemSpec::new(
        "ex2-poisson",
        identity,
        move |p| 2.0 * PI * PI * u(p),
        u,
        |p| Vec2::new(PI * (PI * p.x).cos() * (PI * p.y).cos(), -PI * (PI * p.x).sin() * (PI * p.y).sin()),
    )
}

fn ex4_honeycomb() -> Result<ProblemSpec> {
    let u = |p: Point| (PI * p.x).sin() * (PI * p.y).sin();
    ProblemSpec::new(
        "ex4-honeycomb",
        identity,
        move |p| 2.0 * PI * PI * u(p),
        u,
        |p| Vec2::new(PI * (PI * p.x).cos() * (PI * p.y).sin(), PI * (PI * p.x).sin() * (PI * p.y).cos()),
    )
}

fn poly(degree: usize) -> Result<ProblemSpec> {
    let name = format!("poly-deg-{degree}");
    match degree {
        1 => ProblemSpec::new(name, identity, |_| 0.0, |p| 1.0 + 2.0 * p.x - 3.0 * p.y, |_| Vec2::new(2.0, -3.0)),
        2 => ProblemSpec::new(
            name,
            identity,
            |_| -10.0,
            |p| 1.0 + p.x - 2.0 * p.y + 3.0 * p.x * p.x - p.x * p.y + 2.0 * p.y * p.y,
            |p| Vec2::new(1.0 + 6.0 * p.x - p.y, -2.0 - p.x + 4.0 * p.y),
        ),
        3 => ProblemSpec::new(
            name,
            identity,
            |p| -(10.0 + 2.0 * p.x + 3.0 * p.y),
            |p| {
                1.0 + p.x - 2.0 * p.y + 3.0 * p.x * p.x - p.x * p.y + 2.0 * p.y * p.y + p.x.powi(3)
                    - 2.0 * p.x * p.y * p.y
                    + 0.5 * p.y.powi(3)
            },
            |p| {
                Vec2::new(
                    1.0 + 6.0 * p.x - p.y + 3.0 * p.x * p.x - 2.0 * p.y * p.y,
                    -2.0 - p.x + 4.0 * p.y - 4.0 * p.x * p.y + 1.5 * p.y * p.y,
                )
            },
        ),
        _ => Err(WgError::Config(format!("no polynomial problem of degree {degree}"))),
    }
}

pub const NAMES: [&str; 6] = ["ex1-variable", "ex2-poisson", "ex4-honeycomb", "poly-deg-1", "poly-deg-2", "poly-deg-3"];

/// Looks up a built-in problem by name.
pub fn lookup(name: &str) -> Result<ProblemSpec> {
    match name {
        "ex1-variable" => ex1_variable(),
        "ex2-poisson" => ex2_poisson(),
        "ex4-honeycomb" => ex4_honeycomb(),
        "poly-deg-1" => poly(1),
        "poly-deg-2" => poly(2),
        "poly-deg-3" => poly(3),
        _ => Err(WgError::Config(format!("unknown problem `{name}` (known: {})", NAMES.join(", ")))),
    }
}

/// All built-in problems.
pub fn registry() -> Result<Vec<ProblemSpec>> {
    NAMES.iter().map(|n| lookup(n)).collect()
}

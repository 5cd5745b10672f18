//! Closed-form intersection of two axis-aligned conics sharing their
//! quadratic coefficients.
//!
//! Subtracting the equations cancels the quadratic terms, leaving a line.
//! Substituting the line back into the first equation gives a univariate
//! quadratic whose two (possibly complex) roots are returned.

use num_complex::Complex64;

use crate::error::{Error, Result};

const SHAPE_RTOL: f64 = 1e-12;
const DEGENERATE_RTOL: f64 = 1e-12;

/// `xx·x² + yy·y² + x·x + y·y + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisQuadric {
    pub xx: f64,
    pub yy: f64,
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl AxisQuadric {
    /// `(cx − x)²/(2σx²) + (cy − y)²/(2σy²) + n = 0`.
    pub fn from_center(center: (f64, f64), sigma: (f64, f64), n: f64) -> Self {
        let (cx, cy) = center;
        let xx = 1.0 / (2.0 * sigma.0 * sigma.0);
        let yy = 1.0 / (2.0 * sigma.1 * sigma.1);
        Self {
            xx,
            yy,
            x: -2.0 * cx * xx,
            y: -2.0 * cy * yy,
            c: cx * cx * xx + cy * cy * yy + n,
        }
    }

    /// `(x − cx)² + (y − cy)² − r² = 0`.
    pub fn circle(center: (f64, f64), radius: f64) -> Self {
        let (cx, cy) = center;
        Self {
            xx: 1.0,
            yy: 1.0,
            x: -2.0 * cx,
            y: -2.0 * cy,
            c: cx * cx + cy * cy - radius * radius,
        }
    }

    pub fn eval(&self, p: ComplexPoint) -> Complex64 {
        p.x * p.x * self.xx + p.y * p.y * self.yy + p.x * self.x + p.y * self.y + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint {
    pub x: Complex64,
    pub y: Complex64,
}

impl ComplexPoint {
    pub fn real(&self) -> (f64, f64) {
        (self.x.re, self.y.re)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.x.im.abs() <= tol && self.y.im.abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRootPair {
    pub root1: ComplexPoint,
    pub root2: ComplexPoint,
}

impl ComplexRootPair {
    pub fn is_conjugate(&self) -> bool {
        self.root1.x == self.root2.x.conj() && self.root1.y == self.root2.y.conj()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SHAPE_RTOL * a.abs().max(b.abs())
}

/// Both roots of `a·t² + b·t + c = 0` for real coefficients with `a ≠ 0`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> (Complex64, Complex64) {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let r1 = q / a;
        let r2 = c / q;
        (Complex64::new(r1, 0.0), Complex64::new(r2, 0.0))
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a);
        (Complex64::new(re, im), Complex64::new(re, -im))
    }
}

pub fn solve_ellipse_pair(a: &AxisQuadric, b: &AxisQuadric) -> Result<ComplexRootPair> {
    let finite = [a, b]
        .iter()
        .all(|q| [q.xx, q.yy, q.x, q.y, q.c].iter().all(|v| v.is_finite()));
    if !finite {
        return Err(Error::param("quadric", "coefficients must be finite"));
    }
    if !close(a.xx, b.xx) || !close(a.yy, b.yy) {
        return Err(Error::param(
            "quadric",
            "both equations must share the same quadratic coefficients",
        ));
    }

    // lx·X + ly·Y + lc = 0
    let lx = a.x - b.x;
    let ly = a.y - b.y;
    let lc = a.c - b.c;
    let scale = a.x.abs() + b.x.abs() + a.y.abs() + b.y.abs();
    if lx.abs() + ly.abs() <= DEGENERATE_RTOL * scale {
        return Err(Error::DegenerateGeometry(
            "equations have coincident centers; no linear constraint".into(),
        ));
    }

    let (root1, root2) = if ly.abs() >= lx.abs() {
        // Y = m·X + k
        let m = -lx / ly;
        let k = -lc / ly;
        let q2 = a.xx + a.yy * m * m;
        let q1 = 2.0 * a.yy * m * k + a.x + a.y * m;
        let q0 = a.yy * k * k + a.y * k + a.c;
        if q2 == 0.0 {
            return Err(Error::DegenerateGeometry("vanishing quadratic term".into()));
        }
        let (x1, x2) = quadratic_roots(q2, q1, q0);
        let y_of = |x: Complex64| x * m + k;
        (
            ComplexPoint { x: x1, y: y_of(x1) },
            ComplexPoint { x: x2, y: y_of(x2) },
        )
    } else {
        // X = m·Y + k
        let m = -ly / lx;
        let k = -lc / lx;
        let q2 = a.yy + a.xx * m * m;
        let q1 = 2.0 * a.xx * m * k + a.y + a.x * m;
        let q0 = a.xx * k * k + a.x * k + a.c;
        if q2 == 0.0 {
            return Err(Error::DegenerateGeometry("vanishing quadratic term".into()));
        }
        let (y1, y2) = quadratic_roots(q2, q1, q0);
        let x_of = |y: Complex64| y * m + k;
        (
            ComplexPoint { x: x_of(y1), y: y1 },
            ComplexPoint { x: x_of(y2), y: y2 },
        )
    };

    Ok(ComplexRootPair { root1, root2 })
}

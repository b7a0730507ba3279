//! Closed-form desired velocity fields with analytic derivatives.
//!
//! Every field caches its W^{2,inf} data on a bounding box: the sup norms of
//! U, DU and D^2U, and the contraction constant alpha >= 0 with
//! D^S U <= -alpha I on the box.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityBounds {
    pub sup: f64,
    pub sup_jacobian: f64,
    pub sup_hessian: f64,
}

impl VelocityBounds {
    /// ||U||_{W^{2,inf}}, taken as the largest of the three sup norms.
    pub fn w2inf(&self) -> f64 {
        self.sup.max(self.sup_jacobian).max(self.sup_hessian)
    }
}

/// Natural cubic spline on a uniform knot vector, stored as per-interval
/// polynomial coefficients in the local variable `s = x - x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    coeffs: Vec<[f64; 4]>,
}

impl CubicSpline {
    /// Interpolate `f` at `n_knots` equispaced knots on `[x0, x1]`.
    pub fn tabulate(f: impl Fn(f64) -> f64, x0: f64, x1: f64, n_knots: usize) -> Result<Self> {
        if n_knots < 4 || !(x1 > x0) {
            return Err(Error::InvalidVelocity(format!(
                "spline needs >= 4 knots on an increasing interval, got {n_knots} on [{x0}, {x1}]"
            )));
        }
        let n = n_knots - 1;
        let h = (x1 - x0) / n as f64;
        let y: Vec<f64> = (0..=n).map(|i| f(x0 + i as f64 * h)).collect();
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidVelocity(format!("tabulated value {bad}")));
        }
        // Second derivatives M with M_0 = M_n = 0; interior rows are
        // M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2.
        let mut m = vec![0.0; n + 1];
        if n >= 2 {
            let rhs: Vec<f64> = (1..n)
                .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h))
                .collect();
            let sol = solve_tridiagonal(&vec![1.0; n - 1], &vec![4.0; n - 1], &vec![1.0; n - 1], &rhs);
            m[1..n].copy_from_slice(&sol);
        }
        let coeffs = (0..n)
            .map(|i| {
                let a = y[i];
                let b = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
                let c = m[i] / 2.0;
                let d = (m[i + 1] - m[i]) / (6.0 * h);
                [a, b, c, d]
            })
            .collect();
        Ok(Self { x0, h, coeffs })
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * self.coeffs.len() as f64
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if x < self.x_min() || x > self.x_max() {
            return None;
        }
        let i = (((x - self.x0) / self.h) as usize).min(self.coeffs.len() - 1);
        Some((i, x - (self.x0 + i as f64 * self.h)))
    }

    /// Value; constant extension outside the tabulated range.
    pub fn value(&self, x: f64) -> f64 {
        let xc = x.clamp(self.x_min(), self.x_max());
        let (i, s) = self.locate(xc).expect("clamped");
        let [a, b, c, d] = self.coeffs[i];
        a + s * (b + s * (c + s * d))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, s)) => {
                let [_, b, c, d] = self.coeffs[i];
                b + s * (2.0 * c + 3.0 * s * d)
            }
            None => 0.0,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, s)) => {
                let [_, _, c, d] = self.coeffs[i];
                2.0 * c + 6.0 * d * s
            }
            None => 0.0,
        }
    }

    /// Exact extrema over the tabulated range: (sup |S|, max S', min S', sup |S''|).
    fn extrema(&self) -> (f64, f64, f64, f64) {
        let mut sup = 0.0f64;
        let mut d_max = f64::NEG_INFINITY;
        let mut d_min = f64::INFINITY;
        let mut dd = 0.0f64;
        let h = self.h;
        for &[a, b, c, d] in &self.coeffs {
            let val = |s: f64| a + s * (b + s * (c + s * d));
            let der = |s: f64| b + s * (2.0 * c + 3.0 * s * d);
            // candidates for |S|: ends and roots of S'
            let mut cands = vec![0.0, h];
            let (qa, qb, qc) = (3.0 * d, 2.0 * c, b);
            if qa.abs() > 1e-300 {
                let disc = qb * qb - 4.0 * qa * qc;
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    cands.push((-qb + r) / (2.0 * qa));
                    cands.push((-qb - r) / (2.0 * qa));
                }
            } else if qb.abs() > 1e-300 {
                cands.push(-qc / qb);
            }
            for s in cands.into_iter().filter(|s| (0.0..=h).contains(s)) {
                sup = sup.max(val(s).abs());
            }
            // S' is quadratic: ends plus vertex
            let mut dcands = vec![0.0, h];
            if d.abs() > 1e-300 {
                dcands.push(-c / (3.0 * d));
            }
            for s in dcands.into_iter().filter(|s| (0.0..=h).contains(s)) {
                d_max = d_max.max(der(s));
                d_min = d_min.min(der(s));
            }
            dd = dd.max((2.0 * c).abs()).max((2.0 * c + 6.0 * d * h).abs());
        }
        (sup, d_max, d_min, dd)
    }
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and
/// `upper[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile1D {
    Constant(f64),
    /// U(x) = a + b x with b <= 0.
    Affine { a: f64, b: f64 },
    /// Tabulated spline of a decreasing closed form.
    SmoothDecreasing(CubicSpline),
}

/// Desired velocity on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField1D {
    profile: Profile1D,
    bounds: VelocityBounds,
    alpha: f64,
    x_min: f64,
    x_max: f64,
}

impl VelocityField1D {
    pub fn constant(value: f64, x_min: f64, x_max: f64) -> Result<Self> {
        check_box(x_min, x_max)?;
        if !value.is_finite() {
            return Err(Error::InvalidVelocity(format!("constant {value}")));
        }
        Ok(Self {
            profile: Profile1D::Constant(value),
            bounds: VelocityBounds {
                sup: value.abs(),
                sup_jacobian: 0.0,
                sup_hessian: 0.0,
            },
            alpha: 0.0,
            x_min,
            x_max,
        })
    }

    pub fn affine(a: f64, b: f64, x_min: f64, x_max: f64) -> Result<Self> {
        check_box(x_min, x_max)?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidVelocity(format!("affine a={a} b={b}")));
        }
        if b > 0.0 {
            return Err(Error::InvalidVelocity(format!(
                "affine slope b = {b} must be <= 0"
            )));
        }
        Ok(Self {
            profile: Profile1D::Affine { a, b },
            bounds: VelocityBounds {
                sup: (a + b * x_min).abs().max((a + b * x_max).abs()),
                sup_jacobian: b.abs(),
                sup_hessian: 0.0,
            },
            alpha: -b,
            x_min,
            x_max,
        })
    }

    /// Tabulate a user closed form on `[x_min, x_max]` with a natural cubic
    /// spline. The spline must be nonincreasing on the box.
    pub fn smooth_decreasing(
        f: impl Fn(f64) -> f64,
        x_min: f64,
        x_max: f64,
        n_knots: usize,
    ) -> Result<Self> {
        check_box(x_min, x_max)?;
        let spline = CubicSpline::tabulate(f, x_min, x_max, n_knots)?;
        let (sup, d_max, d_min, dd) = spline.extrema();
        if d_max > 1e-12 {
            return Err(Error::InvalidVelocity(format!(
                "tabulated field increases somewhere (max slope {d_max})"
            )));
        }
        Ok(Self {
            profile: Profile1D::SmoothDecreasing(spline),
            bounds: VelocityBounds {
                sup,
                sup_jacobian: d_max.abs().max(d_min.abs()),
                sup_hessian: dd,
            },
            alpha: (-d_max).max(0.0),
            x_min,
            x_max,
        })
    }

    pub fn profile(&self) -> &Profile1D {
        &self.profile
    }

    pub fn bounds(&self) -> VelocityBounds {
        self.bounds
    }

    /// Contraction constant: U' <= -alpha on the box.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bounding_box(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.profile {
            Profile1D::Constant(c) => *c,
            Profile1D::Affine { a, b } => a + b * x,
            Profile1D::SmoothDecreasing(s) => s.value(x),
        }
    }

    /// dU/dx, which is also the divergence and the Jacobian in 1D.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.profile {
            Profile1D::Constant(_) => 0.0,
            Profile1D::Affine { b, .. } => *b,
            Profile1D::SmoothDecreasing(s) => s.derivative(x),
        }
    }

    pub fn divergence(&self, x: f64) -> f64 {
        self.derivative(x)
    }

    pub fn jacobian(&self, x: f64) -> f64 {
        self.derivative(x)
    }

    /// d^2U/dx^2, the gradient of the divergence.
    pub fn divergence_gradient(&self, x: f64) -> f64 {
        match &self.profile {
            Profile1D::Constant(_) | Profile1D::Affine { .. } => 0.0,
            Profile1D::SmoothDecreasing(s) => s.second_derivative(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile2D {
    Constant([f64; 2]),
    /// U(x) = c - lambda x.
    Radial { c: [f64; 2], lambda: f64 },
}

/// Desired velocity in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityField2D {
    profile: Profile2D,
    bounds: VelocityBounds,
    alpha: f64,
    bbox: [f64; 4],
}

impl VelocityField2D {
    pub fn constant(u: [f64; 2], bbox: [f64; 4]) -> Result<Self> {
        check_box(bbox[0], bbox[1])?;
        check_box(bbox[2], bbox[3])?;
        if !(u[0].is_finite() && u[1].is_finite()) {
            return Err(Error::InvalidVelocity(format!("constant {u:?}")));
        }
        Ok(Self {
            profile: Profile2D::Constant(u),
            bounds: VelocityBounds {
                sup: u[0].hypot(u[1]),
                sup_jacobian: 0.0,
                sup_hessian: 0.0,
            },
            alpha: 0.0,
            bbox,
        })
    }

    /// `bbox = [x_min, x_max, y_min, y_max]`.
    pub fn radial(c: [f64; 2], lambda: f64, bbox: [f64; 4]) -> Result<Self> {
        check_box(bbox[0], bbox[1])?;
        check_box(bbox[2], bbox[3])?;
        if !(c[0].is_finite() && c[1].is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidVelocity(format!("radial c={c:?} lambda={lambda}")));
        }
        // |U| is convex, so its sup over the box is attained at a corner.
        let mut sup = 0.0f64;
        for x in [bbox[0], bbox[1]] {
            for y in [bbox[2], bbox[3]] {
                sup = sup.max((c[0] - lambda * x).hypot(c[1] - lambda * y));
            }
        }
        Ok(Self {
            profile: Profile2D::Radial { c, lambda },
            bounds: VelocityBounds {
                sup,
                sup_jacobian: lambda.abs(),
                sup_hessian: 0.0,
            },
            alpha: lambda.max(0.0),
            bbox,
        })
    }

    pub fn profile(&self) -> Profile2D {
        self.profile
    }

    pub fn bounds(&self) -> VelocityBounds {
        self.bounds
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bounding_box(&self) -> [f64; 4] {
        self.bbox
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        match self.profile {
            Profile2D::Constant(u) => u,
            Profile2D::Radial { c, lambda } => [c[0] - lambda * p[0], c[1] - lambda * p[1]],
        }
    }

    /// Row-major Jacobian `[[dU1/dx, dU1/dy], [dU2/dx, dU2/dy]]`.
    pub fn jacobian(&self, _p: [f64; 2]) -> [[f64; 2]; 2] {
        match self.profile {
            Profile2D::Constant(_) => [[0.0; 2]; 2],
            Profile2D::Radial { lambda, .. } => [[-lambda, 0.0], [0.0, -lambda]],
        }
    }

    /// Symmetric part of the Jacobian.
    pub fn symmetric_jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let j = self.jacobian(p);
        let off = 0.5 * (j[0][1] + j[1][0]);
        [[j[0][0], off], [off, j[1][1]]]
    }

    pub fn divergence(&self, p: [f64; 2]) -> f64 {
        let j = self.jacobian(p);
        j[0][0] + j[1][1]
    }

    pub fn divergence_gradient(&self, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

fn check_box(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && hi > lo {
        Ok(())
    } else {
        Err(Error::InvalidVelocity(format!("bounding box [{lo}, {hi}]")))
    }
}

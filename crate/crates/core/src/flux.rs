//! The congestion flux F_k(rho) = rho (1 - rho^k), its exact Godunov flux and
//! exact Riemann fans for a constant velocity.
//!
//! F_k vanishes at 0 and 1 and is strictly concave on (0, 1), with
//! F_k'(rho) = 1 - (k+1) rho^k decreasing from 1 to -k. The maximum sits at
//! rho* = (k+1)^{-1/k}, where rho*^k = 1/(k+1) and F_max = rho* k/(k+1).

use crate::error::{Error, Result};
use crate::grid::TOL_NEG;

/// rho^k via exp(k ln rho) with rho clamped to [1e-300, 1]; 0^k = 0.
#[inline]
pub fn pow_k(rho: f64, k: f64) -> f64 {
    if rho <= 0.0 {
        0.0
    } else if rho >= 1.0 {
        1.0
    } else {
        (k * rho.max(1e-300).ln()).exp()
    }
}

fn check_density(rho: f64) -> Result<f64> {
    if !(-TOL_NEG..=1.0 + TOL_NEG).contains(&rho) {
        Err(Error::DomainError(rho))
    } else {
        Ok(rho.clamp(0.0, 1.0))
    }
}

/// F_k for a fixed stiffness, with the vertex precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flux {
    k: f64,
    rho_star: f64,
    f_max: f64,
}

impl Flux {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::InvalidScenario(format!("stiffness k = {k} must be >= 1")));
        }
        let (rho_star, f_max) = argmax(k);
        Ok(Self { k, rho_star, f_max })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        pow_k(rho, self.k)
    }

    /// F_k(rho) for a density already known to lie in [0, 1].
    #[inline]
    pub fn value(&self, rho: f64) -> f64 {
        let r = rho.clamp(0.0, 1.0);
        r * (1.0 - pow_k(r, self.k))
    }

    #[inline]
    pub fn deriv(&self, rho: f64) -> f64 {
        1.0 - (self.k + 1.0) * pow_k(rho.clamp(0.0, 1.0), self.k)
    }

    /// Exact Godunov flux of u F_k for the states `left | right`.
    #[inline]
    pub fn godunov(&self, left: f64, right: f64, u: f64) -> f64 {
        self.godunov_from_values(left, right, self.value(left), self.value(right), u)
    }

    /// Godunov flux when F_k(left) and F_k(right) are already known.
    ///
    /// For u >= 0 this is u min F over [left, right] when left <= right and
    /// u max F over [right, left] otherwise; u < 0 swaps min and max.
    #[inline]
    pub fn godunov_from_values(&self, left: f64, right: f64, f_left: f64, f_right: f64, u: f64) -> f64 {
        let (lo, hi) = if left <= right { (left, right) } else { (right, left) };
        let max_f = || {
            if self.rho_star <= lo {
                if lo == left { f_left } else { f_right }
            } else if self.rho_star >= hi {
                if hi == left { f_left } else { f_right }
            } else {
                self.f_max
            }
        };
        let min_f = f_left.min(f_right);
        let increasing = left <= right;
        if u >= 0.0 {
            u * if increasing { min_f } else { max_f() }
        } else {
            u * if increasing { max_f() } else { min_f }
        }
    }
}

/// F_k(rho) = rho (1 - rho^k).
pub fn flux_value(rho: f64, k: f64) -> Result<f64> {
    let r = check_density(rho)?;
    Ok(r * (1.0 - pow_k(r, k)))
}

/// F_k'(rho) = 1 - (k+1) rho^k.
pub fn flux_deriv(rho: f64, k: f64) -> Result<f64> {
    let r = check_density(rho)?;
    Ok(1.0 - (k + 1.0) * pow_k(r, k))
}

/// Vertex (rho*, F_max) of the concave flux.
pub fn flux_argmax(k: f64) -> (f64, f64) {
    argmax(k)
}

fn argmax(k: f64) -> (f64, f64) {
    let rho_star = (-(k + 1.0).ln() / k).exp();
    (rho_star, rho_star * k / (k + 1.0))
}

/// Godunov interface flux with range checks on the states.
pub fn godunov_interface_flux(left: f64, right: f64, u: f64, k: f64) -> Result<f64> {
    let l = check_density(left)?;
    let r = check_density(right)?;
    Ok(Flux::new(k)?.godunov(l, r, u))
}

/// Inverse of F_k' on [0, 1]: the unique rho with 1 - (k+1) rho^k = xi.
pub fn flux_deriv_inverse(xi: f64, k: f64) -> Result<f64> {
    if xi.is_nan() || xi < -k || xi > 1.0 {
        return Err(Error::RangeError { xi, k });
    }
    let base = (1.0 - xi) / (k + 1.0);
    if base <= 0.0 {
        return Ok(0.0);
    }
    Ok((base.ln() / k).exp().min(1.0))
}

/// Same inverse by bisection on the monotone map F_k'.
pub fn flux_deriv_inverse_bisect(xi: f64, k: f64) -> Result<f64> {
    if xi.is_nan() || xi < -k || xi > 1.0 {
        return Err(Error::RangeError { xi, k });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // F_k' is decreasing: F_k'(lo) >= xi >= F_k'(hi).
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - (k + 1.0) * pow_k(mid, k) > xi {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveKind {
    /// Discontinuity moving at `speed` (physical units, includes u).
    Shock { speed: f64 },
    /// Continuous fan between the characteristic speeds `tail < head`.
    Rarefaction { tail: f64, head: f64 },
    Constant,
}

/// Entropy solution of the Riemann problem for rho_t + (u F_k(rho))_x = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannFan {
    pub left: f64,
    pub right: f64,
    pub k: f64,
    pub u: f64,
    pub kind: WaveKind,
}

impl RiemannFan {
    /// Value at the physical similarity coordinate x / t.
    pub fn sample_physical(&self, x_over_t: f64) -> f64 {
        match self.kind {
            WaveKind::Constant => self.left,
            WaveKind::Shock { speed } => {
                if x_over_t < speed {
                    self.left
                } else {
                    self.right
                }
            }
            WaveKind::Rarefaction { tail, head } => {
                if x_over_t <= tail {
                    self.left
                } else if x_over_t >= head {
                    self.right
                } else {
                    let xi = (x_over_t / self.u).clamp(-self.k, 1.0);
                    flux_deriv_inverse(xi, self.k).expect("clamped into range")
                }
            }
        }
    }

    /// Value at the normalized coordinate xi = x / (u t).
    pub fn sample(&self, xi: f64) -> f64 {
        self.sample_physical(xi * self.u)
    }

    /// Value at (x, t) for a fan centred at `x0`.
    pub fn eval(&self, x: f64, t: f64, x0: f64) -> f64 {
        if t <= 0.0 {
            return if x < x0 { self.left } else { self.right };
        }
        self.sample_physical((x - x0) / t)
    }

    /// Exact average of the fan profile over `[a, b]` at time `t`.
    pub fn cell_average(&self, a: f64, b: f64, t: f64, x0: f64) -> f64 {
        // The profile is monotone and piecewise smooth; split at the wave
        // edges and integrate each piece with Gauss-Legendre panels.
        let mut cuts = vec![a, b];
        match self.kind {
            WaveKind::Shock { speed } => cuts.push(x0 + speed * t),
            WaveKind::Rarefaction { tail, head } => {
                cuts.push(x0 + tail * t);
                cuts.push(x0 + head * t);
            }
            WaveKind::Constant => {}
        }
        cuts.retain(|&c| c >= a && c <= b);
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += crate::quadrature::integrate(|x| self.eval(x, t, x0), w[0], w[1], 4);
        }
        total / (b - a)
    }
}

/// Exact entropy solution of the Riemann problem `left | right` at x = 0.
///
/// Equal states give a constant fan.
pub fn riemann_exact(left: f64, right: f64, k: f64, u: f64) -> Result<RiemannFan> {
    let l = check_density(left)?;
    let r = check_density(right)?;
    if !(u.is_finite() && u != 0.0) {
        return Err(Error::InvalidVelocity(format!("Riemann velocity {u}")));
    }
    let flux = Flux::new(k)?;
    let kind = if l == r {
        WaveKind::Constant
    } else {
        let (cl, cr) = (u * flux.deriv(l), u * flux.deriv(r));
        if cl < cr {
            WaveKind::Rarefaction { tail: cl, head: cr }
        } else {
            WaveKind::Shock {
                speed: u * (flux.value(r) - flux.value(l)) / (r - l),
            }
        }
    };
    Ok(RiemannFan {
        left: l,
        right: r,
        k,
        u,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force Godunov oracle: min/max of u F on a fine lattice.
    fn godunov_oracle(l: f64, r: f64, u: f64, k: f64, n: usize) -> f64 {
        let (lo, hi) = if l <= r { (l, r) } else { (r, l) };
        let vals = (0..=n).map(|i| {
            let s = lo + (hi - lo) * i as f64 / n as f64;
            u * s * (1.0 - s.powf(k))
        });
        if l <= r {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    #[test]
    fn flux_values() {
        assert_eq!(flux_value(0.5, 1.0).unwrap(), 0.25);
        for k in [1.0, 3.0, 64.0, 1024.0] {
            assert_eq!(flux_value(1.0, k).unwrap(), 0.0);
            assert_eq!(flux_value(0.0, k).unwrap(), 0.0);
        }
        let v = flux_value(0.63, 3.0).unwrap();
        assert!((v - 0.63 * (1.0 - 0.63f64.powi(3))).abs() < 1e-15);
        assert!((v - 0.4724).abs() < 1e-4);
        assert!(flux_value(1.1, 2.0).is_err());
        assert!(flux_value(-0.1, 2.0).is_err());
        // inside tolerance: clamped
        assert_eq!(flux_value(1.0 + 1e-13, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_values() {
        assert_eq!(flux_deriv(0.0, 5.0).unwrap(), 1.0);
        for k in [1.0, 8.0, 256.0] {
            assert_eq!(flux_deriv(1.0, k).unwrap(), -k);
        }
        assert_eq!(flux_deriv(0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn argmax_values() {
        let (r, f) = flux_argmax(1.0);
        assert!((r - 0.5).abs() < 1e-15 && (f - 0.25).abs() < 1e-15);
        let (r, f) = flux_argmax(3.0);
        assert!((r - 4f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((r - 0.6300).abs() < 1e-4);
        assert!((f - r * 0.75).abs() < 1e-15);
        assert!((f - 0.4725).abs() < 1e-4);
        for k in [1.0, 2.0, 7.5, 64.0, 1024.0] {
            let (r, _) = flux_argmax(k);
            assert!(flux_deriv(r, k).unwrap().abs() < 1e-13, "k={k}");
        }
        let (r, f) = flux_argmax(1e4);
        assert!(r > 0.999 && f > 0.998);
    }

    #[test]
    fn godunov_examples_against_brute_force() {
        let g = godunov_interface_flux(0.2, 0.8, 1.0, 1.0).unwrap();
        let oracle = godunov_oracle(0.2, 0.8, 1.0, 1.0, 1_000_000);
        assert!((oracle - 0.16).abs() < 1e-12);
        assert!((g - 0.16).abs() < 1e-15);
        let g = godunov_interface_flux(0.9, 0.1, 1.0, 1.0).unwrap();
        let oracle = godunov_oracle(0.9, 0.1, 1.0, 1.0, 1_000_000);
        assert!((oracle - 0.25).abs() < 1e-12);
        assert!((g - 0.25).abs() < 1e-15);
    }

    #[test]
    fn godunov_matches_oracle_on_lattice() {
        for k in [1.0, 2.0, 8.0, 64.0] {
            for u in [1.3, -0.7] {
                for i in 0..=10 {
                    for j in 0..=10 {
                        let (l, r) = (i as f64 / 10.0, j as f64 / 10.0);
                        let g = godunov_interface_flux(l, r, u, k).unwrap();
                        let o = godunov_oracle(l, r, u, k, 20_000);
                        assert!((g - o).abs() < 1e-6, "k={k} u={u} {l}|{r}: {g} vs {o}");
                    }
                }
            }
        }
    }

    #[test]
    fn godunov_consistency() {
        for k in [1.0, 4.0, 256.0] {
            let f = Flux::new(k).unwrap();
            for rho in [0.0, 0.3, 0.9, 0.999, 1.0] {
                for u in [2.0, -1.5] {
                    assert_eq!(f.godunov(rho, rho, u), u * f.value(rho));
                }
            }
        }
    }

    #[test]
    fn godunov_monotone() {
        for k in [1.0, 8.0, 64.0] {
            let f = Flux::new(k).unwrap();
            let n = 200;
            let s = |i: usize| i as f64 / n as f64;
            for i in 0..=n {
                for j in 0..n {
                    // nonincreasing in the right state
                    assert!(f.godunov(s(i), s(j + 1), 1.0) <= f.godunov(s(i), s(j), 1.0) + 1e-15);
                    // nondecreasing in the left state
                    assert!(f.godunov(s(j + 1), s(i), 1.0) >= f.godunov(s(j), s(i), 1.0) - 1e-15);
                }
            }
        }
    }

    #[test]
    fn inverse_derivative() {
        assert_eq!(flux_deriv_inverse(1.0, 4.0).unwrap(), 0.0);
        for k in [1.0, 4.0, 256.0] {
            assert!((flux_deriv_inverse(-k, k).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((flux_deriv_inverse(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(flux_deriv_inverse(1.5, 2.0).is_err());
        assert!(flux_deriv_inverse(-3.0, 2.0).is_err());
        for k in [1.0, 3.0, 16.0, 256.0] {
            for i in 0..=100 {
                let rho = i as f64 / 100.0;
                let xi = flux_deriv(rho, k).unwrap();
                let a = flux_deriv_inverse(xi, k).unwrap();
                let b = flux_deriv_inverse_bisect(xi, k).unwrap();
                // both land on the same characteristic speed, up to the
                // slope times the bisection width
                let slope = (k + 1.0) * k * pow_k(rho, k - 1.0);
                let tol = 1e-12 + 4e-15 * slope;
                assert!((flux_deriv(a, k).unwrap() - xi).abs() < tol, "k={k} rho={rho}");
                assert!((flux_deriv(b, k).unwrap() - xi).abs() < tol, "k={k} rho={rho}");
                // the identity on rho is only well posed where F_k' is not
                // flat to machine precision
                if slope > 1e-3 {
                    assert!((a - b).abs() < 1e-12, "k={k} rho={rho}");
                    assert!((a - rho).abs() < 1e-12, "k={k} rho={rho}: {a}");
                }
            }
        }
    }

    #[test]
    fn riemann_shock_speed() {
        let fan = riemann_exact(0.1, 0.6, 1.0, 1.0).unwrap();
        match fan.kind {
            WaveKind::Shock { speed } => assert!((speed - 0.3).abs() < 1e-15),
            other => panic!("expected shock, got {other:?}"),
        }
        for k in [1.0, 8.0, 256.0] {
            let fan = riemann_exact(0.0, 1.0, k, 1.0).unwrap();
            assert_eq!(fan.kind, WaveKind::Shock { speed: 0.0 });
        }
    }

    #[test]
    fn riemann_rarefaction_sampling() {
        let k = 4.0;
        let fan = riemann_exact(1.0, 0.25, k, 1.0).unwrap();
        assert!(matches!(fan.kind, WaveKind::Rarefaction { .. }));
        for c in [0.3, 0.5, 0.8, 0.95] {
            let xi = flux_deriv(c, k).unwrap();
            assert!((fan.sample(xi) - c).abs() < 1e-12);
        }
        assert_eq!(fan.sample(-10.0), 1.0);
        assert_eq!(fan.sample(10.0), 0.25);
        // negative velocity mirrors the wave pattern
        let fan = riemann_exact(0.25, 1.0, k, -1.0).unwrap();
        assert!(matches!(fan.kind, WaveKind::Rarefaction { .. }));
        assert!((fan.sample(flux_deriv(0.5, k).unwrap()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn riemann_equal_states() {
        let fan = riemann_exact(0.4, 0.4, 2.0, 1.0).unwrap();
        assert_eq!(fan.kind, WaveKind::Constant);
        assert_eq!(fan.sample(0.3), 0.4);
    }

    /// Entropy production of a shock for the Kruzhkov pair with constant c:
    /// sigma [|rho - c|] - u [(F(rho) - F(c)) sgn(rho - c)], which must be >= 0.
    fn kruzhkov_dissipation(fan: &RiemannFan, c: f64) -> f64 {
        let f = Flux::new(fan.k).unwrap();
        let speed = match fan.kind {
            WaveKind::Shock { speed } => speed,
            _ => unreachable!(),
        };
        let s = |r: f64| (r - c).abs();
        let q = |r: f64| fan.u * (f.value(r) - f.value(c)) * (r - c).signum();
        speed * (s(fan.right) - s(fan.left)) - (q(fan.right) - q(fan.left))
    }

    #[test]
    fn shocks_are_entropic() {
        for k in [1.0, 2.0, 8.0, 64.0] {
            for (l, r, u) in [(0.1, 0.6, 1.0), (0.0, 0.99, 2.0), (0.7, 0.2, -1.0)] {
                let fan = riemann_exact(l, r, k, u).unwrap();
                assert!(matches!(fan.kind, WaveKind::Shock { .. }));
                // jump increases in the direction of u
                assert!((r - l) * u >= 0.0);
                for i in 0..=20 {
                    let c = i as f64 / 20.0;
                    assert!(kruzhkov_dissipation(&fan, c) >= -1e-14, "k={k} c={c}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn concavity(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            for k in [1.0, 2.0, 8.0, 64.0] {
                let f = Flux::new(k).unwrap();
                let mid = f.value(0.5 * (a + b));
                proptest::prop_assert!(mid >= 0.5 * (f.value(a) + f.value(b)) - 1e-15);
            }
        }
    }
}

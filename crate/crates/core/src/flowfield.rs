//! Deterministic stream function and drift of the meandering jet.
//!
//! Ψ(x, y) = −tanh(y) + a·sech²(y)·cos(kx) + c·y, with c and k fixed by β.
//! The drift seen by a fluid particle is (u, v) = (−Ψ_y, Ψ_x).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_AMPLITUDE: f64 = 0.01;
pub const DEFAULT_EPSILON: f64 = 0.001;
pub const BETA_MAX: f64 = 2.0 / 3.0;

/// Beyond this |y| the sech² factor is treated as exactly zero.
const SECH_CUTOFF: f64 = 300.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PhasePoint { x, y }
    }

    pub fn distance(self, other: PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: PhasePoint, t: f64) -> PhasePoint {
        PhasePoint::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    pub fn translate(self, dx: f64, dy: f64) -> PhasePoint {
        PhasePoint::new(self.x + dx, self.y + dy)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityVector {
    pub u: f64,
    pub v: f64,
}

impl VelocityVector {
    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }
}

/// Row-major ∂(u, v)/∂(x, y).
pub type Jacobian = [[f64; 2]; 2];

/// Anything that can supply a drift field to the solvers.
pub trait VelocityField: Sync {
    fn velocity(&self, pt: PhasePoint) -> VelocityVector;
}

/// Scalar field whose level sets are traced by the geometry module.
pub trait StreamFunction: Sync {
    fn value(&self, pt: PhasePoint) -> f64;
    /// (∂/∂x, ∂/∂y)
    fn gradient(&self, pt: PhasePoint) -> [f64; 2];
}

/// Zero drift. Turns every solver into a pure-diffusion solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFlow;

impl VelocityField for ZeroFlow {
    fn velocity(&self, _pt: PhasePoint) -> VelocityVector {
        VelocityVector::default()
    }
}

/// Parameters of the random jet. `c` and `k` are always derived from `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetParameters {
    pub beta: f64,
    pub a: f64,
    pub c: f64,
    pub k: f64,
    pub epsilon: f64,
}

/// Builds a parameter set, deriving the phase speed and wavenumber from `beta`.
pub fn make_params(beta: f64, a: f64, epsilon: f64) -> Result<JetParameters> {
    if !(0.0..=BETA_MAX).contains(&beta) {
        return Err(Error::ParameterDomain {
            field: "beta",
            value: beta,
            expected: "0 <= beta <= 2/3",
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::ParameterDomain {
            field: "epsilon",
            value: epsilon,
            expected: "0 < epsilon < 1",
        });
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::ParameterDomain {
            field: "a",
            value: a,
            expected: "a > 0",
        });
    }
    // 1 - 1.5 * (2/3) rounds to a tiny negative number
    let root = (1.0 - 1.5 * beta).max(0.0).sqrt();
    Ok(JetParameters {
        beta,
        a,
        c: (1.0 + root) / 3.0,
        k: (2.0 * (1.0 + root)).sqrt(),
        epsilon,
    })
}

#[inline]
fn sech2_tanh(y: f64) -> (f64, f64) {
    if y.abs() > SECH_CUTOFF {
        return (0.0, y.signum());
    }
    let s = 1.0 / y.cosh();
    (s * s, y.tanh())
}

impl JetParameters {
    /// Default `a` = 0.01 and `epsilon` = 0.001.
    pub fn with_beta(beta: f64) -> Result<Self> {
        make_params(beta, DEFAULT_AMPLITUDE, DEFAULT_EPSILON)
    }

    /// Zonal period 2π/k.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.k
    }

    pub fn stream_function(&self, pt: PhasePoint) -> f64 {
        let (s, t) = sech2_tanh(pt.y);
        -t + self.a * s * (self.k * pt.x).cos() + self.c * pt.y
    }

    pub fn velocity(&self, pt: PhasePoint) -> VelocityVector {
        let (s, t) = sech2_tanh(pt.y);
        let (sin, cos) = (self.k * pt.x).sin_cos();
        VelocityVector {
            u: s + 2.0 * self.a * s * t * cos - self.c,
            v: -self.a * self.k * s * sin,
        }
    }

    pub fn velocity_jacobian(&self, pt: PhasePoint) -> Jacobian {
        let (s, t) = sech2_tanh(pt.y);
        let (sin, cos) = (self.k * pt.x).sin_cos();
        let (a, k) = (self.a, self.k);
        let du_dx = -2.0 * a * k * s * t * sin;
        let du_dy = -2.0 * s * t + 2.0 * a * cos * (s * s - 2.0 * s * t * t);
        let dv_dx = -a * k * k * s * cos;
        let dv_dy = 2.0 * a * k * s * t * sin;
        [[du_dx, du_dy], [dv_dx, dv_dy]]
    }

    /// Mirror map (x, y) → (x + π/k, −y). It sends Ψ to −Ψ and maps the
    /// drift onto its own reflection, exchanging the two separatrix chains.
    pub fn mirror(&self, pt: PhasePoint) -> PhasePoint {
        PhasePoint::new(pt.x + 0.5 * self.period(), -pt.y)
    }
}

impl VelocityField for JetParameters {
    fn velocity(&self, pt: PhasePoint) -> VelocityVector {
        JetParameters::velocity(self, pt)
    }
}

impl StreamFunction for JetParameters {
    fn value(&self, pt: PhasePoint) -> f64 {
        self.stream_function(pt)
    }

    fn gradient(&self, pt: PhasePoint) -> [f64; 2] {
        let vel = JetParameters::velocity(self, pt);
        [vel.v, -vel.u]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_velocity(p: &JetParameters, pt: PhasePoint, h: f64) -> VelocityVector {
        let psi = |x: f64, y: f64| p.stream_function(PhasePoint::new(x, y));
        let psi_x = (psi(pt.x + h, pt.y) - psi(pt.x - h, pt.y)) / (2.0 * h);
        let psi_y = (psi(pt.x, pt.y + h) - psi(pt.x, pt.y - h)) / (2.0 * h);
        VelocityVector { u: -psi_y, v: psi_x }
    }

    fn fd_jacobian(p: &JetParameters, pt: PhasePoint, h: f64) -> Jacobian {
        let vx1 = p.velocity(pt.translate(h, 0.0));
        let vx0 = p.velocity(pt.translate(-h, 0.0));
        let vy1 = p.velocity(pt.translate(0.0, h));
        let vy0 = p.velocity(pt.translate(0.0, -h));
        [
            [(vx1.u - vx0.u) / (2.0 * h), (vy1.u - vy0.u) / (2.0 * h)],
            [(vx1.v - vx0.v) / (2.0 * h), (vy1.v - vy0.v) / (2.0 * h)],
        ]
    }

    #[test]
    fn params_at_endpoints() {
        let p = JetParameters::with_beta(0.0).unwrap();
        assert_relative_eq!(p.c, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.k, 2.0, max_relative = 1e-15);
        let p = JetParameters::with_beta(BETA_MAX).unwrap();
        assert_relative_eq!(p.c, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.k, 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn params_at_one_third() {
        let p = JetParameters::with_beta(1.0 / 3.0).unwrap();
        let half_root = 0.5f64.sqrt();
        assert_relative_eq!(p.c, (1.0 + half_root) / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.k, (2.0 + 2f64.sqrt()).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(p.k * p.k, 6.0 * p.c, max_relative = 1e-14);
    }

    #[test]
    fn params_reject_out_of_range() {
        for (beta, eps, a, field) in [
            (-0.1, 0.001, 0.01, "beta"),
            (0.7, 0.001, 0.01, "beta"),
            (0.3, 0.0, 0.01, "epsilon"),
            (0.3, 1.0, 0.01, "epsilon"),
            (0.3, 0.001, 0.0, "a"),
        ] {
            match make_params(beta, a, eps) {
                Err(Error::ParameterDomain { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected parameter error, got {other:?}"),
            }
        }
    }

    #[test]
    fn stream_function_on_the_axis() {
        for beta in [0.0, 0.2, 0.5] {
            let p = JetParameters::with_beta(beta).unwrap();
            assert_relative_eq!(p.stream_function(PhasePoint::new(0.0, 0.0)), 0.01);
            assert_relative_eq!(
                p.stream_function(PhasePoint::new(PI / p.k, 0.0)),
                -0.01,
                max_relative = 1e-14
            );
            for x in [0.3, 1.1, 2.9] {
                assert_relative_eq!(
                    p.stream_function(PhasePoint::new(x, 0.0)),
                    0.01 * (p.k * x).cos(),
                    epsilon = 1e-16
                );
            }
        }
    }

    #[test]
    fn velocity_examples() {
        let p = JetParameters::with_beta(0.0).unwrap();
        let v = p.velocity(PhasePoint::new(0.0, 0.0));
        assert_relative_eq!(v.u, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(v.v, 0.0);

        let pt = PhasePoint::new(PI / 4.0, 0.0);
        let v = p.velocity(pt);
        assert_relative_eq!(v.u, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(v.v, -0.02, max_relative = 1e-14);
        let fd = fd_velocity(&p, pt, 1e-5);
        assert_relative_eq!(fd.v, v.v, max_relative = 1e-6);
        assert_relative_eq!(fd.u, v.u, max_relative = 1e-6);

        let far = p.velocity(PhasePoint::new(0.7, 400.0));
        assert_eq!(far.u, -p.c);
        assert_eq!(far.v, 0.0);
        let far = p.velocity(PhasePoint::new(0.7, -40.0));
        assert_relative_eq!(far.u, -p.c, epsilon = 1e-30);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = JetParameters::with_beta(1.0 / 3.0).unwrap();
        for pt in [PhasePoint::new(0.0, 0.0), PhasePoint::new(PI / p.k, 0.5)] {
            let j = p.velocity_jacobian(pt);
            let fd = fd_jacobian(&p, pt, 1e-5);
            for r in 0..2 {
                for c in 0..2 {
                    if j[r][c].abs() < 1e-14 {
                        assert!(fd[r][c].abs() < 1e-9, "({r},{c}) {}", fd[r][c]);
                    } else {
                        assert_relative_eq!(fd[r][c], j[r][c], max_relative = 1e-6);
                    }
                }
            }
            assert!((j[0][0] + j[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn quasi_random_invariants() {
        // Halton points over one period and |y| <= 3.
        fn halton(mut i: usize, base: usize) -> f64 {
            let (mut f, mut r) = (1.0, 0.0);
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        }
        for beta in [0.05, 1.0 / 3.0, 0.6] {
            let p = JetParameters::with_beta(beta).unwrap();
            let period = p.period();
            for i in 1..=1000 {
                let pt = PhasePoint::new(period * halton(i, 2), -3.0 + 6.0 * halton(i, 3));
                let j = p.velocity_jacobian(pt);
                assert!((j[0][0] + j[1][1]).abs() < 1e-10);

                let v = p.velocity(pt);
                let shifted = p.velocity(pt.translate(period, 0.0));
                assert_relative_eq!(v.u, shifted.u, epsilon = 1e-14);
                assert_relative_eq!(v.v, shifted.v, epsilon = 1e-14);
                let psi = p.stream_function(pt);
                assert_relative_eq!(psi, p.stream_function(pt.translate(period, 0.0)), epsilon = 1e-14);

                let mirrored = p.velocity(PhasePoint::new(-pt.x, pt.y));
                assert_eq!(mirrored.u, v.u);
                assert_eq!(mirrored.v, -v.v);

                if i % 10 == 0 {
                    let fd = fd_velocity(&p, pt, 1e-5);
                    assert!((fd.u - v.u).abs() <= 1e-6 * v.u.abs().max(1e-3));
                    assert!((fd.v - v.v).abs() <= 1e-6 * v.v.abs().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn mirror_negates_stream_function() {
        let p = JetParameters::with_beta(0.25).unwrap();
        for pt in [PhasePoint::new(0.2, 0.4), PhasePoint::new(-1.3, -0.9)] {
            assert_relative_eq!(
                p.stream_function(p.mirror(pt)),
                -p.stream_function(pt),
                epsilon = 1e-14
            );
            let v = p.velocity(pt);
            let vm = p.velocity(p.mirror(pt));
            assert_relative_eq!(vm.u, v.u, epsilon = 1e-14);
            assert_relative_eq!(vm.v, -v.v, epsilon = 1e-14);
        }
    }
}

//! Hyperbolic geometry of the Poincaré disk and the PSL(2,R) isometry action.
//!
//! Group elements are kept as real 2x2 matrices acting on the upper half-plane;
//! the disk action goes through a fixed Cayley conjugation, cached in SU(1,1)
//! form `(alpha, beta)` with `|alpha|^2 - |beta|^2 = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint(pub Complex64);

impl DiskPoint {
    pub fn new(z: Complex64) -> Result<Self, LabError> {
        if !z.re.is_finite() || !z.im.is_finite() || z.norm() >= 1.0 {
            return Err(LabError::Geometry(format!("point {z} not in the open disk")));
        }
        Ok(DiskPoint(z))
    }

    pub fn origin() -> Self {
        DiskPoint(Complex64::new(0.0, 0.0))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }
}

/// Cayley transform H -> D, `w -> (w - i)/(w + i)`.
pub fn cayley(w: Complex64) -> Complex64 {
    (w - Complex64::i()) / (w + Complex64::i())
}

/// Inverse Cayley transform D -> H, `z -> i(1 + z)/(1 - z)`.
pub fn cayley_inv(z: Complex64) -> Complex64 {
    Complex64::i() * (1.0 + z) / (1.0 - z)
}

/// An orientation-preserving isometry of the hyperbolic plane.
///
/// `m` is a real matrix with det 1, identified with its negative. The disk
/// action `z -> (alpha z + beta)/(conj(beta) z + conj(alpha))` is cached.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MoebiusElement {
    pub m: [[f64; 2]; 2],
    #[serde(skip)]
    su: Option<(Complex64, Complex64)>,
}

impl MoebiusElement {
    /// Builds from a real matrix, renormalizing the determinant to 1.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self, LabError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(det.is_finite() && det > 0.0) {
            return Err(LabError::Geometry(format!("matrix determinant {det} must be positive")));
        }
        let s = det.sqrt();
        let m = [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]];
        Ok(Self { m, su: Some(su11_of(&m)) })
    }

    pub fn identity() -> Self {
        Self::from_matrix([[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    /// Hyperbolic translation of the disk moving 0 to `a`, `z -> (z + a)/(1 + conj(a) z)`.
    pub fn disk_translation(a: Complex64) -> Result<Self, LabError> {
        if a.norm() >= 1.0 {
            return Err(LabError::Geometry("translation target outside the disk".into()));
        }
        let s = (1.0 - a.norm_sqr()).sqrt();
        Ok(Self::from_su11(Complex64::new(1.0 / s, 0.0), a / s))
    }

    /// Rotation of the disk about 0 by `theta`.
    pub fn disk_rotation(theta: f64) -> Self {
        Self::from_su11(Complex64::from_polar(1.0, theta / 2.0), Complex64::new(0.0, 0.0))
    }

    /// Builds from the SU(1,1) pair; callers must supply `|al|^2 - |be|^2 = 1`.
    pub fn from_su11(al: Complex64, be: Complex64) -> Self {
        let a = al.re + be.re;
        let d = al.re - be.re;
        let b = al.im - be.im;
        let c = -al.im - be.im;
        Self::from_matrix([[a, b], [c, d]]).expect("su11 pair with unit determinant")
    }

    pub fn su11(&self) -> (Complex64, Complex64) {
        self.su.unwrap_or_else(|| su11_of(&self.m))
    }

    /// Matrix product, renormalized to det 1 to control drift.
    pub fn compose(&self, rhs: &Self) -> Self {
        let a = &self.m;
        let b = &rhs.m;
        let m = [
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ];
        Self::from_matrix(m).expect("product of unimodular matrices")
    }

    pub fn inverse(&self) -> Self {
        let m = &self.m;
        Self::from_matrix([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]).expect("inverse")
    }

    /// Action on the upper half-plane.
    pub fn apply_h(&self, w: Complex64) -> Complex64 {
        let m = &self.m;
        (m[0][0] * w + m[0][1]) / (m[1][0] * w + m[1][1])
    }

    /// Action on the disk through the Cayley conjugation.
    pub fn apply(&self, z: Complex64) -> Complex64 {
        let (al, be) = self.su11();
        (al * z + be) / (be.conj() * z + al.conj())
    }

    /// Trace of the half-plane matrix (sign-ambiguous in PSL).
    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn is_parabolic(&self, tol: f64) -> bool {
        (self.trace().abs() - 2.0).abs() <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let m = &self.m;
        let s = if m[0][0] + m[1][1] >= 0.0 { 1.0 } else { -1.0 };
        (s * m[0][0] - 1.0).abs() <= tol
            && (s * m[1][1] - 1.0).abs() <= tol
            && (s * m[0][1]).abs() <= tol
            && (s * m[1][0]).abs() <= tol
    }

    /// Exact lift of the boundary circle action, `x -> x + 2 arg(alpha + beta e^{-ix})`.
    ///
    /// Continuous in `x` and monotone; the principal branch is safe because
    /// `|beta/alpha| < 1` keeps the argument away from the cut.
    pub fn boundary_lift_raw(&self, x: f64) -> f64 {
        let (al, be) = self.su11();
        let w = 1.0 + (be / al) * Complex64::from_polar(1.0, -x);
        x + 2.0 * (al.arg() + w.arg())
    }

    /// Derivative of the boundary circle action at angle `x`.
    pub fn boundary_derivative(&self, x: f64) -> f64 {
        // |g'(e^{ix})| = 1/|conj(beta) e^{ix} + conj(alpha)|^2
        let (al, be) = self.su11();
        let d = be.conj() * Complex64::from_polar(1.0, x) + al.conj();
        1.0 / d.norm_sqr()
    }

    /// Fixed angles of the boundary action (hyperbolic: two, parabolic: one).
    pub fn boundary_fixed_angles(&self) -> Vec<f64> {
        let tr = self.trace();
        let m = &self.m;
        let mut fixed_h: Vec<Complex64> = Vec::new();
        if tr.abs() > 2.0 + 1e-12 {
            // real fixed points of (aw+b)/(cw+d): c w^2 + (d-a) w - b = 0
            let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
            if c.abs() < 1e-14 {
                fixed_h.push(Complex64::new(f64::INFINITY, 0.0));
                if (d - a).abs() > 1e-14 {
                    fixed_h.push(Complex64::new(b / (d - a), 0.0));
                }
            } else {
                let disc = ((d - a) * (d - a) + 4.0 * b * c).sqrt();
                fixed_h.push(Complex64::new((a - d + disc) / (2.0 * c), 0.0));
                fixed_h.push(Complex64::new((a - d - disc) / (2.0 * c), 0.0));
            }
        } else if self.is_parabolic(1e-9) && !self.is_identity(1e-12) {
            let (a, _b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
            if c.abs() < 1e-14 {
                fixed_h.push(Complex64::new(f64::INFINITY, 0.0));
            } else {
                fixed_h.push(Complex64::new((a - d) / (2.0 * c), 0.0));
            }
        }
        fixed_h
            .into_iter()
            .map(|w| {
                if w.re.is_infinite() {
                    0.0 // cayley(inf) = 1, angle 0
                } else {
                    cayley(w).arg()
                }
            })
            .collect()
    }
}

fn su11_of(m: &[[f64; 2]; 2]) -> (Complex64, Complex64) {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    (
        Complex64::new((a + d) / 2.0, (b - c) / 2.0),
        Complex64::new((a - d) / 2.0, -(b + c) / 2.0),
    )
}

/// Hyperbolic distance in the disk (curvature -1 metric `4|dz|^2/(1-|z|^2)^2`).
pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    let q = ((z - w) / (1.0 - w.conj() * z)).norm();
    2.0 * q.atanh()
}

/// Poisson kernel `P(z, t) = (1 - |z|^2)/|e^{it} - z|^2`.
pub fn poisson_kernel(z: Complex64, t: f64) -> f64 {
    (1.0 - z.norm_sqr()) / (Complex64::from_polar(1.0, t) - z).norm_sqr()
}

/// Conformal factor of the hyperbolic metric in the disk chart, `4/(1-|z|^2)^2`.
pub fn disk_conformal_factor(z: Complex64) -> f64 {
    let q = 1.0 - z.norm_sqr();
    4.0 / (q * q)
}

/// Applies `g` to a disk point, staying inside the disk.
pub fn mobius_apply(g: &MoebiusElement, z: DiskPoint) -> DiskPoint {
    let w = g.apply(z.0);
    // isometries preserve the disk; clamp defensively against rounding at the boundary
    debug_assert!(w.norm() < 1.0 + 1e-9);
    DiskPoint(w)
}

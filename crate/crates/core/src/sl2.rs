//! 2×2 real matrices with exact spectral-norm arithmetic.

use serde::{Deserialize, Serialize};

/// Determinant tolerance for matrices that are supposed to be unimodular.
pub const DET_TOL: f64 = 1e-9;

/// A 2×2 real matrix, row-major: [[a, b], [c, d]].
///
/// Most of the crate works with unit-determinant matrices, but rescaled
/// running products are stored here too, so the determinant is a method,
/// not an enforced invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sl2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sl2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Sl2 { a, b, c, d }
    }

    pub fn identity() -> Self {
        Sl2::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn diag(x: f64, y: f64) -> Self {
        Sl2::new(x, 0.0, 0.0, y)
    }

    /// Counterclockwise rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Sl2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn is_unimodular(&self) -> bool {
        (self.det() - 1.0).abs() <= DET_TOL
    }

    /// Matrix product self · rhs.
    pub fn mul(&self, rhs: &Sl2) -> Sl2 {
        Sl2::new(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }

    /// Inverse for det = 1 matrices (adjugate).
    pub fn inv_unimodular(&self) -> Sl2 {
        Sl2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn scale(&self, s: f64) -> Sl2 {
        Sl2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }

    /// Spectral norm (largest singular value) via the closed form
    /// √((f + √(f² − 4g²)) / 2), f = Σ entries², g = det.
    ///
    /// Entries are pre-scaled by the largest magnitude so the squares never
    /// overflow; the running products this is applied to carry entries up
    /// to 2⁵¹² between rescales.
    pub fn spectral_norm(&self) -> f64 {
        let m = self.max_abs_entry();
        if m == 0.0 || !m.is_finite() {
            return m;
        }
        let (a, b, c, d) = (self.a / m, self.b / m, self.c / m, self.d / m);
        let f = a * a + b * b + c * c + d * d;
        let g = a * d - b * c;
        let disc = (f * f - 4.0 * g * g).max(0.0);
        m * ((f + disc.sqrt()) / 2.0).sqrt()
    }

    /// log of the spectral norm, safe for entries near the overflow edge.
    pub fn log_spectral_norm(&self) -> f64 {
        let m = self.max_abs_entry();
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        m.ln() + self.scale(1.0 / m).spectral_norm().ln()
    }

    /// Spectral radius (largest |eigenvalue|); for real eigenvalues only,
    /// complex pairs of a det-1 matrix have modulus 1.
    pub fn spectral_radius_unimodular(&self) -> f64 {
        let t = self.trace();
        if t.abs() <= 2.0 {
            1.0
        } else {
            (t.abs() + (t * t - 4.0).sqrt()) / 2.0
        }
    }
}

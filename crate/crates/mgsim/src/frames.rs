//! Rotating-frame algebra between each CIG's local d-q frame and the common
//! D-Q system frame.
//!
//! Every CIG carries an unwrapped frame angle `δ` that integrates
//! `δ̇ = ω_i − ω_s`. Angles are never reduced mod 2π: only `sin δ` / `cos δ`
//! enter the transformations, and keeping `δ` continuous keeps the
//! integration smooth.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A d-q (or D-Q) pair. Which frame it lives in is contextual.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub d: f64,
    pub q: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        Vec2 { d, q }
    }

    pub fn norm(self) -> f64 {
        self.d.hypot(self.q)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.d * other.d + self.q * other.q
    }

    /// K·v with K = [[0, 1], [−1, 0]], the rotational coupling matrix of the
    /// dq dynamic equations.
    pub fn perp(self) -> Vec2 {
        Vec2 {
            d: self.q,
            q: -self.d,
        }
    }

    pub fn is_finite(self) -> bool {
        self.d.is_finite() && self.q.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.d + rhs.d, self.q + rhs.q)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.d += rhs.d;
        self.q += rhs.q;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.d - rhs.d, self.q - rhs.q)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.d * s, self.q * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.d, -self.q)
    }
}

/// Unwrapped rotation angle of a CIG's local frame relative to the system
/// frame, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameAngle(pub f64);

impl FrameAngle {
    fn sin_cos(self) -> (f64, f64) {
        self.0.sin_cos()
    }
}

/// The 2×2 rotation matrix T(δ) = [[cos δ, −sin δ], [sin δ, cos δ]].
pub fn rotation(delta: FrameAngle) -> [[f64; 2]; 2] {
    let (s, c) = delta.sin_cos();
    [[c, -s], [s, c]]
}

/// Local dq → system DQ: X = T(δ)·x.
pub fn to_global(x: Vec2, delta: FrameAngle) -> Vec2 {
    let (s, c) = delta.sin_cos();
    Vec2 {
        d: c * x.d - s * x.q,
        q: s * x.d + c * x.q,
    }
}

/// System DQ → local dq: x = T(δ)⁻¹·X = T(δ)ᵀ·X.
pub fn to_local(x: Vec2, delta: FrameAngle) -> Vec2 {
    let (s, c) = delta.sin_cos();
    Vec2 {
        d: c * x.d + s * x.q,
        q: -s * x.d + c * x.q,
    }
}

//! Numeric scalar abstraction used by the dense linear algebra and the oracle.
//!
//! `f64` is the default and the only type that can be persisted. The
//! multiprecision [`crate::mp::MpFloat`] implements the same trait for cases
//! where the incremental update cancels more digits than a double carries.

use std::fmt::Debug;

pub trait Scalar: Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// Construction context (precision for multiprecision types).
    type Ctx: Copy + Debug + Send + Sync + 'static;

    /// Smallest magnitude the oracle may treat as a real, nonzero walk mass.
    /// `None` means the exponent range is effectively unbounded.
    const UNDERFLOW_FLOOR: Option<f64>;

    fn from_f64(v: f64, ctx: Self::Ctx) -> Self;
    fn to_f64(&self) -> f64;
    fn ctx(&self) -> Self::Ctx;
    fn default_ctx() -> Self::Ctx;

    /// Relative precision of the type (unit roundoff).
    fn epsilon(ctx: Self::Ctx) -> f64;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn abs(&self) -> Self;
    fn powf(&self, exp: f64) -> Self;

    /// `self -= a * b`
    fn mul_sub_assign(&mut self, a: &Self, b: &Self);
    /// `self += a * b`
    fn mul_add_assign(&mut self, a: &Self, b: &Self);

    fn zero(ctx: Self::Ctx) -> Self {
        Self::from_f64(0.0, ctx)
    }

    fn one(ctx: Self::Ctx) -> Self {
        Self::from_f64(1.0, ctx)
    }

    fn is_zero(&self) -> bool {
        *self == Self::zero(self.ctx())
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero(self.ctx())
    }
}

impl Scalar for f64 {
    type Ctx = ();
    const UNDERFLOW_FLOOR: Option<f64> = Some(1e-280);

    #[inline]
    fn from_f64(v: f64, _: ()) -> Self {
        v
    }
    #[inline]
    fn to_f64(&self) -> f64 {
        *self
    }
    #[inline]
    fn ctx(&self) {}
    #[inline]
    fn default_ctx() {}
    #[inline]
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    #[inline]
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
    #[inline]
    fn epsilon(_: ()) -> f64 {
        f64::EPSILON
    }
    #[inline]
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    #[inline]
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    #[inline]
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    #[inline]
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    #[inline]
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    #[inline]
    fn powf(&self, exp: f64) -> Self {
        f64::powf(*self, exp)
    }
    #[inline]
    fn mul_sub_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    #[inline]
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
}

//! Multiprecision scalar backed by `astro-float`.
//!
//! The precision (in bits) travels with every value and acts as the
//! [`Scalar::Ctx`]. Results are rounded to the precision of the left operand.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

use crate::scalar::Scalar;

const RM: RoundingMode = RoundingMode::ToEven;

/// Precision used when no context is available.
pub const DEFAULT_PRECISION: usize = 256;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

#[derive(Clone)]
pub struct MpFloat {
    v: BigFloat,
    prec: usize,
}

impl MpFloat {
    pub fn precision(&self) -> usize {
        self.prec
    }

    fn wrap(&self, v: BigFloat) -> Self {
        MpFloat { v, prec: self.prec }
    }
}

impl fmt::Debug for MpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}@{}", self.to_f64(), self.prec)
    }
}

impl PartialEq for MpFloat {
    fn eq(&self, other: &Self) -> bool {
        self.v == other.v
    }
}

impl PartialOrd for MpFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

/// `2^k` as a double, going through subnormals gracefully.
fn pow2(k: i64) -> f64 {
    let clamp = |k: i64| k.clamp(-1000, 1000) as i32;
    let first = clamp(k);
    let rest = clamp(k - first as i64);
    2f64.powi(first) * 2f64.powi(rest)
}

impl Scalar for MpFloat {
    type Ctx = usize;
    const UNDERFLOW_FLOOR: Option<f64> = None;

    fn from_f64(v: f64, prec: usize) -> Self {
        MpFloat { v: BigFloat::from_f64(v, prec), prec }
    }

    fn to_f64(&self) -> f64 {
        let Some((words, _, sign, exp, _)) = self.v.as_raw_parts() else {
            return f64::NAN;
        };
        let Some(&top) = words.last() else { return 0.0 };
        if top == 0 {
            return 0.0;
        }
        // value = 0.m * 2^exp with the leading bit in `top`
        let next = if words.len() > 1 { words[words.len() - 2] } else { 0 };
        let lead = top as f64 + next as f64 / 2f64.powi(64);
        let mag = lead * pow2(exp as i64 - 64);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    fn ctx(&self) -> usize {
        self.prec
    }

    fn default_ctx() -> usize {
        DEFAULT_PRECISION
    }

    fn epsilon(prec: usize) -> f64 {
        pow2(1 - prec as i64)
    }

    fn add(&self, rhs: &Self) -> Self {
        self.wrap(self.v.add(&rhs.v, self.prec, RM))
    }

    fn sub(&self, rhs: &Self) -> Self {
        self.wrap(self.v.sub(&rhs.v, self.prec, RM))
    }

    fn mul(&self, rhs: &Self) -> Self {
        self.wrap(self.v.mul(&rhs.v, self.prec, RM))
    }

    fn div(&self, rhs: &Self) -> Self {
        self.wrap(self.v.div(&rhs.v, self.prec, RM))
    }

    fn abs(&self) -> Self {
        if self.v.is_negative() {
            self.wrap(self.v.neg())
        } else {
            self.clone()
        }
    }

    fn powf(&self, exp: f64) -> Self {
        if exp >= 0.0 && exp.fract() == 0.0 && exp < u32::MAX as f64 {
            return self.wrap(self.v.powi(exp as usize, self.prec, RM));
        }
        let e = BigFloat::from_f64(exp, self.prec);
        CONSTS.with(|cc| self.wrap(self.v.pow(&e, self.prec, RM, &mut cc.borrow_mut())))
    }

    fn mul_sub_assign(&mut self, a: &Self, b: &Self) {
        let prod = a.v.mul(&b.v, self.prec, RM);
        self.v = self.v.sub(&prod, self.prec, RM);
    }

    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        let prod = a.v.mul(&b.v, self.prec, RM);
        self.v = self.v.add(&prod, self.prec, RM);
    }

    fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    fn is_positive(&self) -> bool {
        self.v.is_positive() && !self.v.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_arithmetic() {
        let p = 512;
        for v in [0.0, 1.0, -2.5, 1e-300, 3.141592653589793, 7e200] {
            assert_eq!(MpFloat::from_f64(v, p).to_f64(), v);
        }
        let third = MpFloat::one(p).div(&MpFloat::from_f64(3.0, p));
        assert!((third.to_f64() - 1.0 / 3.0).abs() < 1e-16);
        let back = third.mul(&MpFloat::from_f64(3.0, p));
        assert!(back.sub(&MpFloat::one(p)).abs().to_f64() < 1e-150);
    }

    #[test]
    fn tiny_values_survive() {
        let p = 256;
        let a = MpFloat::from_f64(1e-300, p);
        let tiny = a.mul(&a).mul(&a);
        assert!(tiny.is_positive());
        assert_eq!(tiny.to_f64(), 0.0);
        let ratio = tiny.div(&a.mul(&a));
        assert!((ratio.to_f64() - 1e-300).abs() < 1e-310);
    }

    #[test]
    fn powers() {
        let p = 256;
        let half = MpFloat::from_f64(0.5, p);
        assert_eq!(half.powf(10.0).to_f64(), 0.5f64.powi(10));
        let r = MpFloat::from_f64(0.25, p).powf(0.5).to_f64();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cancellation_is_resolved() {
        let p = 256;
        let one = MpFloat::one(p);
        let eps = MpFloat::from_f64(1e-40, p);
        let d = one.add(&eps).sub(&one);
        assert!((d.to_f64() - 1e-40).abs() < 1e-55);
    }
}

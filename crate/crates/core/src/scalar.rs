//! Scalar abstractions.
//!
//! [`Scalar`] covers anything with field arithmetic, so rational-function
//! formulas (cell probabilities, asymptotic variances) can be evaluated
//! exactly over [`BigRational`]. [`Real`] adds the transcendental functions
//! needed by the b-bit model and the likelihood solvers.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num};

pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync {
    /// Converts an event count or cardinality.
    fn from_count(n: u64) -> Self;
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl Scalar for BigRational {
    fn from_count(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
}

pub trait Real: Scalar + Float + FromPrimitive + Copy {
    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("float literal")
    }

    /// `(1 - x)^e`, with `0^0 = 1`.
    #[inline]
    fn pow_one_minus(x: Self, e: Self) -> Self {
        if e == Self::zero() {
            Self::one()
        } else {
            (e * (-x).ln_1p()).exp()
        }
    }

    /// `1 - (1 - x)^e`, accurate when `x` or `e * x` is small.
    #[inline]
    fn one_minus_pow_one_minus(x: Self, e: Self) -> Self {
        if e == Self::zero() {
            Self::zero()
        } else {
            -(e * (-x).ln_1p()).exp_m1()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated sum; error does not grow with the number of terms.
pub fn neumaier_sum<T: Real>(terms: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

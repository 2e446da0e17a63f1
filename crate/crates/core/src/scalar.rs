//! Numeric abstractions shared by the exact-arithmetic parts of the crate.
//!
//! Losses and label distributions are generic over [`Scalar`], which covers
//! `f32`, `f64` and exact rationals ([`num_rational::Rational64`]). Code that
//! needs transcendental functions asks for [`Real`] instead.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// A number type that losses and distributions can be computed in.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Absolute slack used when comparing two computed risks for equality.
    ///
    /// Zero for exact types.
    fn tie_tolerance() -> Self;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `num / den` built from integer counts.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn tie_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn tie_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for Ratio<i64> {
    fn tie_tolerance() -> Self {
        Ratio::from_integer(0)
    }
}

impl Scalar for Ratio<i128> {
    fn tie_tolerance() -> Self {
        Ratio::from_integer(0)
    }
}

/// Floating-point scalars with the special functions the optimizers need.
pub trait Real: Scalar + Float {
    fn erfc(self) -> Self;

    /// `1 / sqrt(2π)`.
    fn inv_sqrt_2pi() -> Self;

    /// Standard normal density.
    fn std_normal_pdf(self) -> Self {
        let half = Self::from_f64(0.5).unwrap();
        Self::inv_sqrt_2pi() * (-(half * self * self)).exp()
    }

    /// Standard normal distribution function, via `erfc` so the lower tail
    /// keeps full relative precision.
    fn std_normal_cdf(self) -> Self {
        let half = Self::from_f64(0.5).unwrap();
        half * (-self / Self::from_f64(std::f64::consts::SQRT_2).unwrap()).erfc()
    }
}

impl Real for f32 {
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    fn inv_sqrt_2pi() -> Self {
        0.398_942_3
    }
}

impl Real for f64 {
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    fn inv_sqrt_2pi() -> Self {
        0.398_942_280_401_432_7
    }
}

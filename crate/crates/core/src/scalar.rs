use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating-point type the numerical code is generic over.
///
/// Random draws are always made in `f64` and narrowed with [`Scalar::lit`],
/// so a given seed produces the same scenario for every scalar type up to
/// rounding.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance used for rank decisions in factorizations.
    fn rank_tolerance() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type Cx<T> = Complex<T>;

#[inline]
pub(crate) fn cx_zero<T: Scalar>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn scale<T: Scalar>(z: Cx<T>, s: T) -> Cx<T> {
    Complex::new(z.re * s, z.im * s)
}

pub(crate) fn norm_sq<T: Scalar>(v: &[Cx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

//! Scalar abstraction for probability tables and entropy arithmetic.

use num_traits::{Float, FromPrimitive, NumAssign, NumCast};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

pub trait Real:
    Float
    + FromPrimitive
    + NumCast
    + NumAssign
    + Sum
    + Copy
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + 'static
{
    /// Convert a literal; every finite f64 is representable (possibly rounded).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute tolerance: `base`, widened to a few thousand ulps for narrow types.
    fn tol(base: f64) -> Self {
        let floor = 1.0e3 * Self::epsilon().to_f64_lossy();
        Self::lit(base.max(floor))
    }

    /// `-x ln x` with the `0 ln 0 = 0` convention.
    fn neg_x_ln_x(self) -> Self {
        if self <= Self::zero() {
            Self::zero()
        } else {
            -self * self.ln()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln(n!)` computed by summation; exact enough for the small arguments used here.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Field of matrix and vector entries: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const IS_COMPLEX: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn abs2(self) -> f64;
    fn re(self) -> f64;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;
    fn to_mm_string(self) -> String;
    fn parse_mm(tokens: &[&str]) -> Option<Self>;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn to_mm_string(self) -> String {
        format!("{self:.17e}")
    }
    fn parse_mm(tokens: &[&str]) -> Option<Self> {
        match tokens {
            [v] => v.parse().ok(),
            _ => None,
        }
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn to_mm_string(self) -> String {
        format!("{:.17e} {:.17e}", self.re, self.im)
    }
    fn parse_mm(tokens: &[&str]) -> Option<Self> {
        match tokens {
            [re, im] => Some(Complex64::new(re.parse().ok()?, im.parse().ok()?)),
            _ => None,
        }
    }
}

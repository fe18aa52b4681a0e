//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All fields, states and operators are generic over [`Real`], which is
//! implemented for `f32` and `f64`. Tolerances quoted in the tests assume
//! `f64`; the `f32` instantiation is useful for quick, low-accuracy scans.

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use rustfft::FftNum;

/// Floating point scalar usable for grids, FFTs and small dense linear algebra.
pub trait Real: RealField + FftNum + Copy + Default + std::fmt::Display {}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over the scalar type.
pub type C<T> = Complex<T>;

/// Dense complex matrix, used for every per-node fiber quantity.
pub type CMat<T> = DMatrix<Complex<T>>;

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(lit(re), lit(im))
}

#[inline]
pub fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// `i`, the imaginary unit.
#[inline]
pub fn imag_unit<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

/// Complex exponential.
#[inline]
pub fn cexp<T: Real>(z: C<T>) -> C<T> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}

/// Absolute value that does not collide with `Signed::abs`.
#[inline]
pub fn abs<T: Real>(x: T) -> T {
    if x < T::zero() {
        -x
    } else {
        x
    }
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    // every Real is a subset of f64
    nalgebra::try_convert::<T, f64>(x).unwrap_or(f64::NAN)
}

/// Squared modulus of a complex number.
#[inline]
pub fn norm_sqr<T: Real>(z: C<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Largest entrywise modulus of a matrix.
pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter()
        .map(|z| norm_sqr(*z).sqrt())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Frobenius norm of a complex matrix.
pub fn frobenius<T: Real>(m: &CMat<T>) -> T {
    m.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b).sqrt()
}

/// Entrywise deviation from Hermiticity, `max |M - M^†|`.
pub fn hermiticity_defect<T: Real>(m: &CMat<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

/// Hermitian part `(M + M^†)/2`.
pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * re(lit::<T>(0.5))
}

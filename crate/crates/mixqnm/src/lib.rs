//! Two scalar fields mixing through a common thermal bath: kernels, quasi-normal
//! modes, closed-form evolution and a direct time-domain integrator.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

pub mod error;
pub mod kernels;
pub mod quad;
pub mod spectral;
pub mod amplitude_qnm;
pub mod onepoint_qnm;
pub mod correlator_qnm;
pub mod evolution;
pub mod volterra_oracle;
pub mod reductions;

pub use error::{MixError, Result};

pub type CMat2 = Matrix2<Complex64>;
pub type CMat4 = Matrix4<Complex64>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

//! Modified Bessel functions of complex argument and the frequency-domain
//! fundamental solution built from them.
//!
//! Every s-domain kernel in this crate evaluates K₀, K₁ or I₁ at z = s·r/c with
//! Re(s) > 0, r > 0, so all arguments live in the open right half-plane. The
//! heavy lifting is done by the Amos routines (via the `complex-bessel` crate)
//! in exponentially scaled form; this module unscales, enforces the domain
//! contract, and flags decay underflow instead of silently denormalizing.
//!
//! The integral-equation literature writes the same kernels with Hankel and
//! Bessel functions at imaginary-rotated arguments. The `*_rotated` accessors
//! expose that notation,
//!
//! ```text
//! H₀⁽¹⁾(iz) = -(2i/π) K₀(z),   H₁⁽¹⁾(iz) = -(2/π) K₁(z),   J₁(iz) = i I₁(z),
//! ```
//!
//! so kernel code can be transcribed literally in either form.

use num_complex::Complex64;
use thiserror::Error;

/// ln of the smallest positive normal f64; beyond this decay K is reported as zero.
const LN_MIN_NORMAL: f64 = -708.396_418_532_264_1;
/// ln of the largest finite f64; beyond this growth I overflows.
const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    /// K is only evaluated in the open right half-plane.
    #[error("argument {0} has non-positive real part")]
    NonpositiveRealPart(Complex64),
    #[error("argument must be nonzero")]
    ZeroArgument,
    /// Only orders 0 and 1 occur in the kernels.
    #[error("unsupported order {0} (only 0 and 1)")]
    UnsupportedOrder(u8),
    /// |I(z)| exceeds the largest finite f64.
    #[error("modified Bessel I overflows at {0}")]
    Overflow(Complex64),
    /// distance argument of the fundamental solution must be positive
    #[error("kernel distance must be positive, got {0}")]
    NonpositiveDistance(f64),
    #[error("wave speed must be positive, got {0}")]
    NonpositiveSpeed(f64),
    #[error("bessel evaluation failed at {z}: {reason}")]
    Backend { z: Complex64, reason: String },
}

/// K value together with a decay-underflow marker.
///
/// For Re(z) beyond roughly 708 the true K_ν(z) ~ √(π/2z)·e^(-z) is smaller
/// than the smallest normal f64; `value` is then exactly zero and
/// `underflowed` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KValue {
    pub value: Complex64,
    pub underflowed: bool,
}

fn backend_err(z: Complex64, e: complex_bessel::Error) -> SpecFunError {
    match e {
        complex_bessel::Error::Overflow => SpecFunError::Overflow(z),
        other => SpecFunError::Backend {
            z,
            reason: format!("{other:?}"),
        },
    }
}

fn check_k_domain(z: Complex64) -> Result<(), SpecFunError> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(SpecFunError::ZeroArgument);
    }
    if !(z.re > 0.0) {
        return Err(SpecFunError::NonpositiveRealPart(z));
    }
    Ok(())
}

fn unscale_k(scaled: Complex64, z: Complex64) -> KValue {
    // scaled = e^z K(z); the product magnitude is e^{-Re z} |scaled|
    let log_mag = scaled.norm().ln() - z.re;
    if log_mag < LN_MIN_NORMAL {
        KValue {
            value: Complex64::new(0.0, 0.0),
            underflowed: true,
        }
    } else {
        KValue {
            value: scaled * (-z).exp(),
            underflowed: false,
        }
    }
}

/// Modified Bessel function K_order(z), order ∈ {0, 1}, Re(z) > 0.
pub fn mod_bessel_k(order: u8, z: Complex64) -> Result<KValue, SpecFunError> {
    if order > 1 {
        return Err(SpecFunError::UnsupportedOrder(order));
    }
    check_k_domain(z)?;
    let scaled =
        complex_bessel::besselk_scaled(order as f64, z).map_err(|e| backend_err(z, e))?;
    Ok(unscale_k(scaled, z))
}

/// K₀(z) and K₁(z) in one call; the kernels always need the pair.
pub fn mod_bessel_k01(z: Complex64) -> Result<(KValue, KValue), SpecFunError> {
    check_k_domain(z)?;
    let k0 = complex_bessel::besselk_scaled(0.0, z).map_err(|e| backend_err(z, e))?;
    let k1 = complex_bessel::besselk_scaled(1.0, z).map_err(|e| backend_err(z, e))?;
    Ok((unscale_k(k0, z), unscale_k(k1, z)))
}

fn mod_bessel_i(order: u8, z: Complex64) -> Result<Complex64, SpecFunError> {
    if z == Complex64::new(0.0, 0.0) {
        // I₀(0) = 1, I₁(0) = 0
        return Ok(Complex64::new(if order == 0 { 1.0 } else { 0.0 }, 0.0));
    }
    // scaled = e^{-|Re z|} I(z)
    let scaled =
        complex_bessel::besseli_scaled(order as f64, z).map_err(|e| backend_err(z, e))?;
    let growth = z.re.abs();
    if scaled.norm().ln() + growth > LN_MAX {
        return Err(SpecFunError::Overflow(z));
    }
    Ok(scaled * growth.exp())
}

/// Modified Bessel function I₁(z).
pub fn mod_bessel_i1(z: Complex64) -> Result<Complex64, SpecFunError> {
    mod_bessel_i(1, z)
}

/// Modified Bessel function I₀(z). Needed by the Wronskian consistency check
/// I₀(z)K₁(z) + I₁(z)K₀(z) = 1/z; the kernels themselves never call it.
pub fn mod_bessel_i0(z: Complex64) -> Result<Complex64, SpecFunError> {
    mod_bessel_i(0, z)
}

/// H₀⁽¹⁾(iz) = -(2i/π)·K₀(z).
pub fn hankel1_0_rotated(z: Complex64) -> Result<Complex64, SpecFunError> {
    let k0 = mod_bessel_k(0, z)?;
    Ok(Complex64::new(0.0, -2.0 / std::f64::consts::PI) * k0.value)
}

/// H₁⁽¹⁾(iz) = -(2/π)·K₁(z).
pub fn hankel1_1_rotated(z: Complex64) -> Result<Complex64, SpecFunError> {
    let k1 = mod_bessel_k(1, z)?;
    Ok(-2.0 / std::f64::consts::PI * k1.value)
}

/// J₁(iz) = i·I₁(z).
pub fn besselj1_rotated(z: Complex64) -> Result<Complex64, SpecFunError> {
    let i1 = mod_bessel_i1(z)?;
    Ok(Complex64::new(0.0, 1.0) * i1)
}

/// Fundamental solution of the s-domain wave operator at distance r and wave
/// speed c,
///
/// ```text
/// K(r; c, s) = (i/4) H₀⁽¹⁾(i·s·r/c) = (1/2π) K₀(s·r/c).
/// ```
pub fn hankel_kernel_k(r: f64, c: f64, s: Complex64) -> Result<Complex64, SpecFunError> {
    if !(r > 0.0) {
        return Err(SpecFunError::NonpositiveDistance(r));
    }
    if !(c > 0.0) {
        return Err(SpecFunError::NonpositiveSpeed(c));
    }
    let k0 = mod_bessel_k(0, s * r / c)?;
    Ok(k0.value / (2.0 * std::f64::consts::PI))
}

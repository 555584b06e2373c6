//! Special functions: Gamma, unit-ball volumes and the scaled MacDonald
//! function `a^nu K_nu(a)`.

use std::f64::consts::PI;

use crate::quadrature::{self, Tolerance};
use crate::{Error, Result};

/// Gamma function (Lanczos approximation, ~1e-15 relative on the positive axis).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    PI.powf(half) / gamma(half + 1.0)
}

/// Surface measure of the unit sphere in `R^n` (`n * omega_n`).
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Arguments above this use the exponential (cosh) representation; the
/// oscillatory one cancels catastrophically once `K_nu(a) ~ e^{-a}`.
pub const OSCILLATORY_LIMIT: f64 = 8.0;

/// `a^nu K_nu(a)` for `nu in (0, 1)`, `a > 0`.
pub fn scaled_macdonald(nu: f64, a: f64) -> Result<f64> {
    if a <= OSCILLATORY_LIMIT {
        scaled_macdonald_oscillatory(nu, a)
    } else {
        Ok(a.powf(nu) * macdonald_cosh(nu, a)?)
    }
}

/// `a^nu K_nu(a)` through the Basset integral
/// `K_nu(a) = Gamma(nu + 1/2) (2a)^nu / sqrt(pi) * int_0^inf cos t (t^2 + a^2)^(-nu-1/2) dt`.
pub fn scaled_macdonald_oscillatory(nu: f64, a: f64) -> Result<f64> {
    if !(nu > -0.5) || !(a > 0.0) {
        return Err(Error::invalid(format!("Basset integral needs nu > -1/2 and a > 0 (nu={nu}, a={a})")));
    }
    let p = nu + 0.5;
    let a2 = a * a;
    let integral = quadrature::cosine_fourier_integral(|t| (t * t + a2).powf(-p))?;
    Ok(gamma(p) * 2f64.powf(nu) * a.powf(2.0 * nu) / PI.sqrt() * integral)
}

/// `K_nu(a) = int_0^inf exp(-a cosh t) cosh(nu t) dt`.
pub fn macdonald_cosh(nu: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!("K_nu needs a > 0, got {a}")));
    }
    // integrand below 1e-300 beyond cosh t = 700/a
    let upper = (700.0 / a).max(1.0).acosh() + 1.0;
    let q = quadrature::adaptive(
        |t| (-a * t.cosh()).exp() * (nu * t).cosh(),
        0.0,
        upper,
        Tolerance::new(1e-300, 1e-13),
    );
    if !q.converged {
        return Err(Error::QuadratureFailure(format!("K_{nu}({a}) did not converge")));
    }
    Ok(q.value)
}

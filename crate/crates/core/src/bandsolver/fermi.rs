//! Carrier statistics: normalized Fermi–Dirac integrals and band densities.

use crate::constants::{BOLTZMANN, ELECTRON_MASS, HBAR};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Series in e^η for the non-degenerate tail:
/// F_j(η) = Σ (-1)^(k+1) e^(kη) / k^(j+1).
fn tail_series(eta: f64, j: f64) -> f64 {
    let x = eta.exp();
    let mut sum = 0.0;
    let mut xk = x;
    for k in 1..=8 {
        let term = xk / (k as f64).powf(j + 1.0);
        sum += if k % 2 == 1 { term } else { -term };
        xk *= x;
    }
    sum
}

/// Trapezoid rule after t = u², on the even (hence spectrally integrated)
/// integrand `weight(u) / (1 + exp(u² - η))`.
fn trapezoid(eta: f64, weight: impl Fn(f64) -> f64) -> f64 {
    let upper = (eta.max(0.0) + 40.0).sqrt();
    let du = (0.2 / eta.max(1.0).sqrt()).min(0.05);
    let n = (upper / du).ceil() as usize;
    let du = upper / n as f64;
    let f = |u: f64| {
        let a = u * u - eta;
        let occ = if a > 0.0 {
            let e = (-a).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + a.exp())
        };
        weight(u) * occ
    };
    let mut sum = 0.5 * (f(0.0) + f(upper));
    for i in 1..n {
        sum += f(i as f64 * du);
    }
    sum * du
}

/// Normalized Fermi–Dirac integral of order 1/2.
pub fn fd_half(eta: f64) -> f64 {
    if eta < -10.0 {
        return tail_series(eta, 0.5);
    }
    // 1/Γ(3/2) · ∫ 2u² occ du
    4.0 / SQRT_PI * trapezoid(eta, |u| u * u)
}

/// Normalized Fermi–Dirac integral of order -1/2 (the η-derivative of
/// [`fd_half`]).
pub fn fd_minus_half(eta: f64) -> f64 {
    if eta < -10.0 {
        return tail_series(eta, -0.5);
    }
    // 1/Γ(1/2) · ∫ 2 occ du
    2.0 / SQRT_PI * trapezoid(eta, |_| 1.0)
}

/// Effective density of states of a parabolic band, m⁻³.
pub fn effective_dos(mass_rel: f64, temperature_k: f64) -> f64 {
    let m = mass_rel * ELECTRON_MASS;
    2.0 * (m * BOLTZMANN * temperature_k / (2.0 * std::f64::consts::PI * HBAR * HBAR)).powf(1.5)
}

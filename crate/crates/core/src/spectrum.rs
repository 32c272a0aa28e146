//! Parameter algebra shared by every other module: the exponents μ_c, ζ, μ, β,
//! the spectra d(β) and d*(β), boundary phases and the one-point prefactor.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check, Error, Result};

/// Physical parameters of a one-force-point chain. `x_r == 0` stands for the
/// force point 0⁺.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleParams {
    pub kappa: f64,
    pub rho: f64,
    pub a: f64,
    pub x: f64,
    pub x_r: f64,
}

impl SleParams {
    pub fn new(kappa: f64, rho: f64, x: f64, x_r: f64) -> Result<Self> {
        check(
            kappa.is_finite() && kappa > 0.0,
            "kappa",
            "must be positive",
        )?;
        check(rho.is_finite() && rho > -2.0, "rho", "must exceed -2")?;
        check(x_r.is_finite() && x_r >= 0.0, "x_r", "must be nonnegative")?;
        check(x.is_finite() && x > x_r, "x", "must exceed x_r")?;
        Ok(SleParams {
            kappa,
            rho,
            a: 2.0 / kappa,
            x,
            x_r,
        })
    }

    /// Same chain, different tracked point.
    pub fn with_x(&self, x: f64) -> Result<Self> {
        SleParams::new(self.kappa, self.rho, x, self.x_r)
    }

    pub fn mu_c(&self) -> f64 {
        2.0 * self.a - 0.5 + self.a * self.rho / 2.0
    }

    /// 1 + ρ/2, the factor converting between the two β conventions.
    pub fn half_weight(&self) -> f64 {
        1.0 + self.rho / 2.0
    }

    /// Dimension of the Bessel process followed by the gap V − W.
    pub fn bessel_dim(&self) -> f64 {
        1.0 + self.a * (2.0 + self.rho)
    }

    /// Initial value of Q: (x − x_R)/x.
    pub fn q0(&self) -> f64 {
        (self.x - self.x_r) / self.x
    }

    pub fn zeta_bound(&self) -> f64 {
        let mc = self.mu_c();
        -mc * mc / (2.0 * self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub mu_c: f64,
    pub zeta: f64,
    pub mu: f64,
    pub beta: f64,
}

/// Builds (μ_c, ζ, μ, β) from ζ.
pub fn spectrum_params(params: &SleParams, zeta: f64) -> Result<SpectrumParams> {
    let a = params.a;
    let mu_c = params.mu_c();
    let bound = params.zeta_bound();
    if !(zeta.is_finite() && zeta > bound) {
        return Err(Error::ZetaOutOfRange { zeta, bound });
    }
    if mu_c <= 0.0 {
        log::warn!("mu_c = {mu_c} is not positive; formulas are evaluated literally");
    }
    let root = (mu_c * mu_c + 2.0 * a * zeta).sqrt();
    Ok(SpectrumParams {
        mu_c,
        zeta,
        mu: mu_c + root,
        beta: a / root,
    })
}

/// Inverse map: the record with the given β > 0.
pub fn spectrum_params_from_beta(params: &SleParams, beta: f64) -> Result<SpectrumParams> {
    check(beta.is_finite() && beta > 0.0, "beta", "must be positive")?;
    let a = params.a;
    let mu_c = params.mu_c();
    let zeta = (a / beta + mu_c) * (a / beta - mu_c) / (2.0 * a);
    Ok(SpectrumParams {
        mu_c,
        zeta,
        mu: mu_c + a / beta,
        beta,
    })
}

/// Inverse map: the record with the given μ > μ_c.
pub fn spectrum_params_from_mu(params: &SleParams, mu: f64) -> Result<SpectrumParams> {
    let mu_c = params.mu_c();
    check(mu.is_finite() && mu > mu_c, "mu", "must exceed mu_c")?;
    let a = params.a;
    let root = mu - mu_c;
    Ok(SpectrumParams {
        mu_c,
        zeta: (root * root - mu_c * mu_c) / (2.0 * a),
        mu,
        beta: a / root,
    })
}

/// d(β), with β measured against g′ at the distance times τ_s.
pub fn d(params: &SleParams, beta: f64) -> f64 {
    let k = params.kappa;
    let rho = params.rho;
    let inner = (k - 2.0 * rho) / 4.0 - (1.0 + rho / 2.0 + 2.0 * beta) / beta;
    1.0 - beta / k * inner * inner
}

/// d*(β), the same spectrum in the convention g′ ≈ e^{−β(1+ρ/2)s}.
pub fn d_star(params: &SleParams, beta: f64) -> f64 {
    let a = params.a;
    let rho = params.rho;
    let inner = (1.0 - a * rho) / (2.0 * a) - (1.0 + 2.0 * beta) / beta;
    1.0 - a * beta / 2.0 * inner * inner * (1.0 + rho / 2.0)
}

pub fn beta_zero(params: &SleParams) -> f64 {
    (4.0 + 2.0 * params.rho) / (8.0 - params.kappa + 2.0 * params.rho)
}

pub fn beta_zero_star(params: &SleParams) -> f64 {
    let a = params.a;
    2.0 * a / (4.0 * a - 1.0 + a * params.rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimSpectrum {
    pub d: f64,
    pub d_star: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub beta_zero: f64,
}

/// Evaluates d and d* at β (d* at the same numerical β, as written) together
/// with the zeros β_± of d and β_0.
pub fn dim_spectrum(params: &SleParams, beta: f64) -> Result<DimSpectrum> {
    check(beta.is_finite() && beta > 0.0, "beta", "must be positive")?;
    let (beta_minus, beta_plus) = beta_range(params)?;
    Ok(DimSpectrum {
        d: d(params, beta),
        d_star: d_star(params, beta),
        beta_minus,
        beta_plus,
        beta_zero: beta_zero(params),
    })
}

/// Location of the maximum of d. Writing d = 1 − (Cβ − B)²/(κβ) with
/// B = 1 + ρ/2 and C = (κ − 2ρ)/4 − 2, the maximum sits at B/|C|.
fn beta_peak(params: &SleParams) -> f64 {
    let b = 1.0 + params.rho / 2.0;
    let c = (params.kappa - 2.0 * params.rho) / 4.0 - 2.0;
    if c == 0.0 {
        f64::INFINITY
    } else {
        b / c.abs()
    }
}

/// Zeros β_− < β_+ of d by bisection, brackets grown geometrically from the peak.
pub fn beta_range(params: &SleParams) -> Result<(f64, f64)> {
    let f = |b: f64| d(params, b);
    let peak = beta_peak(params);
    if !peak.is_finite() {
        let lo = bracket_and_bisect(&f, 1.0, 0.5)?;
        return Ok((lo, f64::INFINITY));
    }
    if f(peak) <= 0.0 {
        return Err(Error::NoPositiveRegion);
    }
    let lo = bracket_and_bisect(&f, peak, 0.5)?;
    let hi = bracket_and_bisect(&f, peak, 2.0).unwrap_or(f64::INFINITY);
    Ok((lo, hi))
}

fn bracket_and_bisect(f: &impl Fn(f64) -> f64, start: f64, factor: f64) -> Result<f64> {
    let mut inside = start;
    let mut outside = start * factor;
    let mut grown = 0;
    while f(outside) > 0.0 {
        inside = outside;
        outside *= factor;
        grown += 1;
        if grown > 200 {
            return Err(Error::NoPositiveRegion);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if f(mid) > 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
        if (inside - outside).abs() <= 1e-12 * inside.abs().max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (inside + outside))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseClass {
    NoHit,
    HitCannotContinue,
    HitIntervalContinue,
    HitBounceEmptyInterior,
}

/// Boundary behaviour of an SLE_κ(ρ) curve near a force point group with
/// cumulative weight ρ̄.
pub fn boundary_phase(kappa: f64, rho_bar: f64) -> Result<PhaseClass> {
    check(kappa > 0.0, "kappa", "must be positive")?;
    let upper = kappa / 2.0 - 2.0;
    let lower = kappa / 2.0 - 4.0;
    if rho_bar >= upper {
        Ok(PhaseClass::NoHit)
    } else if rho_bar > (-2.0f64).max(lower) {
        Ok(PhaseClass::HitBounceEmptyInterior)
    } else if kappa < 4.0 && rho_bar > lower && rho_bar <= -2.0 {
        Ok(PhaseClass::HitCannotContinue)
    } else if kappa > 4.0 && rho_bar > -2.0 && rho_bar <= lower {
        Ok(PhaseClass::HitIntervalContinue)
    } else {
        Err(Error::Unclassified { kappa, rho_bar })
    }
}

/// ln Γ with a positivity guard on the argument.
pub(crate) fn ln_gamma_pos(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(ln_gamma(x))
    } else {
        Err(Error::GammaPole(x))
    }
}

/// K = Γ(2−2a+2μ)Γ(2−4a−aρ+μ) / (Γ(2−2a+μ)Γ(2−4a−aρ+2μ)).
pub fn one_point_prefactor(params: &SleParams, sp: &SpectrumParams) -> Result<f64> {
    let a = params.a;
    let rho = params.rho;
    let mu = sp.mu;
    let num = ln_gamma_pos(2.0 - 2.0 * a + 2.0 * mu)? + ln_gamma_pos(2.0 - 4.0 * a - a * rho + mu)?;
    let den = ln_gamma_pos(2.0 - 2.0 * a + mu)? + ln_gamma_pos(2.0 - 4.0 * a - a * rho + 2.0 * mu)?;
    Ok((num - den).exp())
}

/// Predicted decay rate of E[g̃′_s^ζ 1{t̃(s) < ∞}] per unit radial time.
pub fn radial_moment_rate(params: &SleParams, sp: &SpectrumParams) -> f64 {
    params.a * sp.mu * params.half_weight()
}

/// Predicted growth exponent 1 + (ζβ − μ)(1+ρ/2) of the covering counts.
pub fn covering_exponent(params: &SleParams, sp: &SpectrumParams) -> f64 {
    1.0 + (sp.zeta * sp.beta - sp.mu) * params.half_weight()
}

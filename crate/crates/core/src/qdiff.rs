//! Spectral description of the radial-time diffusion Q̃ under the weighted
//! measure: a Jacobi diffusion on (0, 1) with Beta(δ₊/2, δ₋/2) invariant law.
//!
//! In the coordinate Y = 1 − 2Q̃ the generator is diagonalised by the Jacobi
//! polynomials P_n^{(α,β)} with α = δ₊/2 − 1 and β = δ₋/2 − 1, and eigenvalues
//! λ_n = −(n/2)(n + δ₊/2 + δ₋/2 − 1). Densities in Q̃ carry the Jacobian 2.

use gauss_quad::jacobi::GaussJacobi;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::rng::path_rng;
use crate::spectrum::{ln_gamma_pos, SleParams, SpectrumParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDiffusionSpec {
    pub a: f64,
    pub mu: f64,
    pub rho: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub jacobi_alpha: f64,
    pub jacobi_beta: f64,
    pub c_tilde: f64,
}

impl QDiffusionSpec {
    pub fn new(params: &SleParams, sp: &SpectrumParams) -> Result<Self> {
        Self::with_mu(params.a, params.rho, sp.mu)
    }

    pub fn with_mu(a: f64, rho: f64, mu: f64) -> Result<Self> {
        let delta_plus = 4.0 - 8.0 * a - 2.0 * a * rho + 4.0 * mu;
        let delta_minus = 4.0 * a + 2.0 * a * rho;
        if !(delta_plus > 0.0 && delta_minus > 0.0) {
            return Err(Error::ParameterOutOfRange(delta_plus, delta_minus));
        }
        let (al, be) = (delta_plus / 2.0, delta_minus / 2.0);
        let c_tilde = (ln_gamma_pos(al + be)? - ln_gamma_pos(al)? - ln_gamma_pos(be)?).exp();
        Ok(QDiffusionSpec {
            a,
            mu,
            rho,
            delta_plus,
            delta_minus,
            jacobi_alpha: al - 1.0,
            jacobi_beta: be - 1.0,
            c_tilde,
        })
    }

    /// Beta shape parameters (δ₊/2, δ₋/2) of the invariant law.
    pub fn beta_shapes(&self) -> (f64, f64) {
        (self.delta_plus / 2.0, self.delta_minus / 2.0)
    }

    /// Drift coefficients (A, B) of dQ̃ = (A − B·Q̃)ds + sqrt(Q̃(1−Q̃))dB.
    pub fn drift(&self) -> (f64, f64) {
        let (a, rho, mu) = (self.a, self.rho, self.mu);
        (1.0 - 2.0 * a - a * rho / 2.0 + mu, 1.0 - a + mu)
    }

    /// Spectral gap 1 − a + μ.
    pub fn gap(&self) -> f64 {
        (self.delta_plus + self.delta_minus) / 4.0
    }

    pub fn invariant_density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidParameter {
                field: "x",
                reason: "must lie in (0, 1)".into(),
            });
        }
        let (al, be) = self.beta_shapes();
        Ok(self.c_tilde * x.powf(al - 1.0) * (1.0 - x).powf(be - 1.0))
    }

    pub fn invariant_mean(&self) -> f64 {
        let (al, be) = self.beta_shapes();
        al / (al + be)
    }

    /// E*[X̃^p] under the invariant law; finite for p > −δ₊/2.
    pub fn stationary_moment(&self, p: f64) -> Result<f64> {
        let (al, be) = self.beta_shapes();
        let ln = ln_gamma_pos(al + p)? + ln_gamma_pos(al + be)?
            - ln_gamma_pos(al)?
            - ln_gamma_pos(al + be + p)?;
        Ok(ln.exp())
    }

    /// E*[X̃^{−μ}], the one-point prefactor.
    pub fn stationary_moment_inv_mu(&self) -> Result<f64> {
        self.stationary_moment(-self.mu)
    }

    /// Invariant CDF P*(X̃ ≤ y).
    pub fn invariant_cdf(&self, y: f64) -> f64 {
        let (al, be) = self.beta_shapes();
        beta_reg(al, be, y.clamp(0.0, 1.0))
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        let n = n as f64;
        -(n / 2.0) * (n + self.delta_plus / 2.0 + self.delta_minus / 2.0 - 1.0)
    }

    /// ln ‖P_n‖² for the Jacobi weight (1−y)^α(1+y)^β on [−1, 1].
    fn ln_norm(&self, n: usize) -> f64 {
        let (al, be) = (self.jacobi_alpha, self.jacobi_beta);
        let nf = n as f64;
        let ln2 = std::f64::consts::LN_2 * (al + be + 1.0);
        if n == 0 {
            return ln2
                + statrs::function::gamma::ln_gamma(al + 1.0)
                + statrs::function::gamma::ln_gamma(be + 1.0)
                - statrs::function::gamma::ln_gamma(al + be + 2.0);
        }
        use statrs::function::gamma::ln_gamma;
        ln2 - (2.0 * nf + al + be + 1.0).ln() + ln_gamma(nf + al + 1.0) + ln_gamma(nf + be + 1.0)
            - ln_gamma(nf + al + be + 1.0)
            - ln_gamma(nf + 1.0)
    }

    /// Spectral coefficients c_n = P_n(x0)e^{λ_n t}/‖P_n‖² in the Y coordinate.
    fn coefficients(&self, t: f64, q0: f64, n_terms: usize) -> Vec<f64> {
        let p = jacobi_values(self.jacobi_alpha, self.jacobi_beta, 1.0 - 2.0 * q0, n_terms);
        (0..n_terms)
            .map(|n| p[n] * (self.eigenvalue(n) * t - self.ln_norm(n)).exp())
            .collect()
    }

    /// Transition density of Q̃ from q0 to y after time t.
    pub fn transition_density(&self, t: f64, q0: f64, y: f64, n_terms: usize) -> Result<f64> {
        check_transition_args(t, q0, y, n_terms)?;
        let coef = self.coefficients(t, q0, n_terms);
        let yy = 1.0 - 2.0 * y;
        let p = jacobi_values(self.jacobi_alpha, self.jacobi_beta, yy, n_terms);
        let sum: f64 = coef.iter().zip(&p).map(|(c, pn)| c * pn).sum();
        let n = n_terms - 1;
        let last = self.sup_bound(n).powi(2) * (self.eigenvalue(n) * t - self.ln_norm(n)).exp();
        if n_terms > 1 && last > 1e-8 * sum.abs() {
            return Err(Error::TruncationWarning { last, sum });
        }
        let weight = (1.0 - yy).powf(self.jacobi_alpha) * (1.0 + yy).powf(self.jacobi_beta);
        Ok(2.0 * weight * sum)
    }

    /// P(Q̃_t ≤ q | Q̃_0 = q0), integrating each spectral term in closed form
    /// through the Rodrigues-type identity
    /// ∫_y^1 w P_n^{(α,β)} = (1−y)^{α+1}(1+y)^{β+1} P_{n−1}^{(α+1,β+1)}(y) / (2n).
    pub fn transition_cdf(&self, t: f64, q0: f64, q: f64, n_terms: usize) -> Result<f64> {
        if q <= 0.0 {
            return Ok(0.0);
        }
        if q >= 1.0 {
            return Ok(1.0);
        }
        check_transition_args(t, q0, q, n_terms)?;
        let (al, be) = (self.jacobi_alpha, self.jacobi_beta);
        let coef = self.coefficients(t, q0, n_terms);
        let y = 1.0 - 2.0 * q;
        let shifted = jacobi_values(al + 1.0, be + 1.0, y, n_terms.max(1));
        let envelope = (1.0 - y).powf(al + 1.0) * (1.0 + y).powf(be + 1.0);
        let mut total = beta_reg(al + 1.0, be + 1.0, q);
        for n in 1..n_terms {
            total += coef[n] * envelope * shifted[n - 1] / (2.0 * n as f64);
        }
        Ok(total)
    }

    /// E*[Q̃_t^{p} | Q̃_0 = q0] by Gauss–Jacobi quadrature with the endpoint
    /// exponent at Q̃ = 0 shifted by p; requires p > −δ₊/2.
    pub fn transition_moment(&self, t: f64, q0: f64, p: f64, n_terms: usize) -> Result<f64> {
        if t == 0.0 {
            return Ok(q0.powf(p));
        }
        check_transition_args(t, q0, 0.5, n_terms)?;
        let rule = GaussJacobiRule::new(n_terms + 8, self.jacobi_alpha + p, self.jacobi_beta)?;
        let coef = self.coefficients(t, q0, n_terms);
        // q^p = ((1−y)/2)^p folds into the (1−y) exponent.
        let total: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&y, &w)| {
                let p_n = jacobi_values(self.jacobi_alpha, self.jacobi_beta, y, n_terms);
                w * coef.iter().zip(&p_n).map(|(c, v)| c * v).sum::<f64>()
            })
            .sum();
        Ok(total * 0.5f64.powf(p))
    }

    /// Upper bound for |P_n| on [−1, 1].
    fn sup_bound(&self, n: usize) -> f64 {
        let top = self.jacobi_alpha.max(self.jacobi_beta);
        if top >= -0.5 {
            use statrs::function::gamma::ln_gamma;
            let nf = n as f64;
            (ln_gamma(nf + top + 1.0) - ln_gamma(nf + 1.0) - ln_gamma(top + 1.0)).exp()
        } else {
            1.0
        }
    }

    /// Independent Beta(δ₊/2, δ₋/2) draws as G₁/(G₁+G₂) with Gamma variates.
    pub fn sample_stationary(&self, n: usize, seed: u64) -> Vec<f64> {
        let (al, be) = self.beta_shapes();
        let g1 = Gamma::new(al, 1.0).expect("positive shape");
        let g2 = Gamma::new(be, 1.0).expect("positive shape");
        let mut rng = path_rng(seed, 0);
        (0..n)
            .map(|_| {
                let x: f64 = g1.sample(&mut rng);
                let y: f64 = g2.sample(&mut rng);
                x / (x + y)
            })
            .collect()
    }
}

fn check_transition_args(t: f64, q0: f64, y: f64, n_terms: usize) -> Result<()> {
    crate::error::check(t > 0.0 && t.is_finite(), "t", "must be positive")?;
    crate::error::check((0.0..=1.0).contains(&q0), "x0", "must lie in [0, 1]")?;
    crate::error::check(y > 0.0 && y < 1.0, "y", "must lie in (0, 1)")?;
    crate::error::check(n_terms >= 1, "n_terms", "must be at least 1")
}

/// P_0..P_{n−1} of the Jacobi family (α, β) at y by the three-term recurrence.
pub fn jacobi_values(al: f64, be: f64, y: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push((al + 1.0) + (al + be + 2.0) * (y - 1.0) / 2.0);
    for k in 2..n {
        let kf = k as f64;
        let s = 2.0 * kf + al + be;
        let c0 = 2.0 * kf * (kf + al + be) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * y + al * al - be * be);
        let c2 = 2.0 * (kf + al - 1.0) * (kf + be - 1.0) * s;
        let next = (c1 * out[k - 1] - c2 * out[k - 2]) / c0;
        out.push(next);
    }
    out
}

/// Gauss–Jacobi nodes and weights on [−1, 1] for (1−y)^α(1+y)^β.
///
/// Nodes come from `gauss-quad`; the weights are rescaled to the exact zeroth
/// moment so their accuracy does not depend on that crate's Gamma routine.
#[derive(Debug, Clone)]
pub struct GaussJacobiRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobiRule {
    pub fn new(n: usize, al: f64, be: f64) -> Result<Self> {
        // The upstream rule pins the middle node of odd-degree rules to 0,
        // which is only right for α = β; stay with even degrees.
        let n = (n.max(2) + 1) & !1;
        let rule = GaussJacobi::new(n, al, be).map_err(|_| Error::ParameterOutOfRange(al, be))?;
        let (nodes, raw): (Vec<f64>, Vec<f64>) = rule
            .nodes()
            .zip(rule.weights())
            .map(|(x, w)| (*x, *w))
            .unzip();
        let total: f64 = raw.iter().sum();
        use statrs::function::gamma::ln_gamma;
        let mass =
            (std::f64::consts::LN_2 * (al + be + 1.0) + ln_gamma(al + 1.0) + ln_gamma(be + 1.0)
                - ln_gamma(al + be + 2.0))
            .exp();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::ParameterOutOfRange(al, be));
        }
        let weights = raw.iter().map(|w| w * mass / total).collect();
        Ok(GaussJacobiRule { nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::spectrum_params;

    fn worked() -> QDiffusionSpec {
        let p = SleParams::new(2.0, -1.5, 1.0, 0.0).unwrap();
        let sp = spectrum_params(&p, 0.0).unwrap();
        QDiffusionSpec::new(&p, &sp).unwrap()
    }

    #[test]
    fn worked_example_constants() {
        let s = worked();
        assert!((s.delta_plus - 5.0).abs() < 1e-14);
        assert!((s.delta_minus - 1.0).abs() < 1e-14);
        // Γ(3)/(Γ(0.5)Γ(2.5)) = 2/(√π · 3√π/4) = 8/(3π)
        assert!((s.c_tilde - 8.0 / (3.0 * std::f64::consts::PI)).abs() < 1e-13);
        assert!((s.invariant_mean() - 2.5 / 3.0).abs() < 1e-15);
        let (a, b) = s.drift();
        assert!((a / b - s.invariant_mean()).abs() < 1e-15);
        assert_eq!(s.eigenvalue(0), 0.0);
        assert!((s.eigenvalue(1) + 1.5).abs() < 1e-15);
        assert!((s.gap() + s.eigenvalue(1)).abs() < 1e-15);
    }

    #[test]
    fn zero_power_moment_is_one() {
        assert!((worked().stationary_moment(0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_explicit_low_orders() {
        let (al, be) = (0.7, -0.3);
        for &y in &[-0.9, -0.2, 0.4, 0.95] {
            let p = jacobi_values(al, be, y, 3);
            let p2 = 0.125
                * (4.0 * (al + 1.0) * (al + 2.0)
                    + 4.0 * (al + be + 3.0) * (al + 2.0) * (y - 1.0)
                    + (al + be + 3.0) * (al + be + 4.0) * (y - 1.0) * (y - 1.0));
            assert!((p[2] - p2).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_polynomials_are_orthogonal() {
        let s = worked();
        let rule = GaussJacobiRule::new(40, s.jacobi_alpha, s.jacobi_beta).unwrap();
        for m in 0..10 {
            for n in 0..10 {
                let ip = rule.integrate(|y| {
                    let p = jacobi_values(s.jacobi_alpha, s.jacobi_beta, y, 10);
                    p[m] * p[n]
                });
                let expect = if m == n { s.ln_norm(n).exp() } else { 0.0 };
                assert!(
                    (ip - expect).abs() < 1e-11 * (1.0 + expect),
                    "m={m} n={n} {ip} {expect}"
                );
            }
        }
    }

    #[test]
    fn long_time_density_is_invariant() {
        let s = worked();
        for &y in &[0.05, 0.3, 0.7, 0.99] {
            let p = s.transition_density(50.0, 0.4, y, 64).unwrap();
            let pi = s.invariant_density(y).unwrap();
            assert!((p - pi).abs() < 1e-10 * pi.max(1.0));
        }
    }

    #[test]
    fn cdf_is_monotone_and_normalised() {
        let s = worked();
        let mut prev = 0.0;
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let f = s.transition_cdf(0.3, 1.0, q, 64).unwrap();
            assert!(f >= prev - 1e-12);
            prev = f;
        }
        assert!(prev < 1.0);
    }

    #[test]
    fn short_times_are_refused() {
        assert!(matches!(
            worked().transition_density(0.001, 0.5, 0.5, 16),
            Err(Error::TruncationWarning { .. })
        ));
    }
}

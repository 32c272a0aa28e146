//! Radial parametrisation and the radial-time process Q̃.
//!
//! Q̃ solves dQ̃ = (A − B·Q̃)ds + sqrt(Q̃(1−Q̃))dB̃ with A = 1 − 2a − aρ/2 + μ and
//! B = 1 − a + μ (μ = 0 without tilting). The simulators work in the angle
//! Q̃ = (1 − cos Z)/2, where the noise is additive:
//! dZ = (c₁ + c₂ cos Z)/sin Z ds + dB̃ with c₁ = 2A − B and c₂ = B − 1/2.
//! Near Z = 0 the drift is that of a Bessel process of dimension δ₊ = 4A, near
//! π one of dimension δ₋.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::loewner::LoewnerObservables;
use crate::rng::path_rng;
use crate::spectrum::{SleParams, SpectrumParams};

/// Floor applied to Q̃ inside 1/Q̃.
pub const Q_FLOOR: f64 = 1e-12;

/// Monotone pairs (s_j, t_j) of the radial clock of one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialClock {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl RadialClock {
    /// t̃(s) by linear interpolation; `None` beyond the recorded range.
    pub fn time_at(&self, s: f64) -> Option<f64> {
        if s < 0.0 || s > *self.s.last()? {
            return None;
        }
        let j = self.s.partition_point(|&x| x < s);
        if j == 0 {
            return Some(self.t[0]);
        }
        let (s0, s1) = (self.s[j - 1], self.s[j]);
        let th = (s - s0) / (s1 - s0);
        Some(self.t[j - 1] + th * (self.t[j] - self.t[j - 1]))
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap_or(&0.0)
    }
}

pub fn radial_clock(obs: &LoewnerObservables) -> RadialClock {
    RadialClock {
        s: obs.rows.iter().map(|r| r.s).collect(),
        t: obs.rows.iter().map(|r| r.t).collect(),
    }
}

/// Constant relating the radial clock to the distance hitting times of x:
/// t̃((s/a − C*) ∨ 0) ≤ τ_s ≤ t̃(s/a + C*).
pub fn c_star(x: f64, x_r: f64, a: f64) -> f64 {
    let four = 4f64.ln();
    ((x.ln() + four) / a).max((four - (x - x_r).ln()) / a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedPath {
    pub ds: f64,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    /// M̃_s; empty for untilted paths.
    pub m_weight: Vec<f64>,
    pub seed: u64,
    pub path: u64,
    /// β(1 + ρ/2), the almost-sure growth rate of L̃ under the tilt.
    pub l_rate: Option<f64>,
    /// Steps on which the angle was reflected at Q̃ = 0.
    pub reflected: usize,
    /// Step at which an untilted path reached Q̃ = 0 (x swallowed).
    pub absorbed_at: Option<usize>,
}

/// Euler step of the angle coordinate.
#[derive(Debug, Clone, Copy)]
pub struct AngleStepper {
    c1: f64,
    c2: f64,
    ds: f64,
    sqrt_ds: f64,
    absorbing: bool,
}

pub enum AngleOutcome {
    Moved,
    Reflected,
    Absorbed,
}

impl AngleStepper {
    pub fn new(a: f64, rho: f64, mu: f64, ds: f64, absorbing: bool) -> Self {
        let big_a = 1.0 - 2.0 * a - a * rho / 2.0 + mu;
        let big_b = 1.0 - a + mu;
        AngleStepper {
            c1: 2.0 * big_a - big_b,
            c2: big_b - 0.5,
            ds,
            sqrt_ds: ds.sqrt(),
            absorbing,
        }
    }

    pub fn angle(q: f64) -> f64 {
        2.0 * q.clamp(0.0, 1.0).sqrt().asin()
    }

    pub fn q(z: f64) -> f64 {
        // (1 − cos z)/2 without cancellation near 0.
        let h = (0.5 * z).sin();
        h * h
    }

    pub fn step(&self, z: &mut f64, normal: f64) -> AngleOutcome {
        let sin = z.sin().max(1e-12);
        let mut next = *z + (self.c1 + self.c2 * z.cos()) / sin * self.ds + self.sqrt_ds * normal;
        let mut outcome = AngleOutcome::Moved;
        if next <= 0.0 {
            if self.absorbing {
                *z = 0.0;
                return AngleOutcome::Absorbed;
            }
            next = -next;
            outcome = AngleOutcome::Reflected;
        }
        if next > std::f64::consts::PI {
            next = 2.0 * std::f64::consts::PI - next;
        }
        *z = next.max(0.0);
        outcome
    }
}

fn check_tilt_args(ds: f64, s_max: f64) -> Result<usize> {
    check(ds > 0.0 && ds <= 1e-3, "ds", "must lie in (0, 1e-3]")?;
    check(
        s_max >= 0.0 && s_max.is_finite(),
        "s_max",
        "must be nonnegative",
    )?;
    Ok((s_max / ds).round() as usize)
}

pub fn simulate_tilted(
    params: &SleParams,
    sp: &SpectrumParams,
    ds: f64,
    s_max: f64,
    seed: u64,
) -> Result<TiltedPath> {
    simulate_tilted_path(params, sp, ds, s_max, seed, 0)
}

/// Q̃ under the weighted measure, with L̃_s = ∫(1−Q̃)/Q̃ and M̃_s.
pub fn simulate_tilted_path(
    params: &SleParams,
    sp: &SpectrumParams,
    ds: f64,
    s_max: f64,
    seed: u64,
    path: u64,
) -> Result<TiltedPath> {
    let mut tp = run_q(params, sp.mu, false, ds, s_max, seed, path)?;
    let hw = params.half_weight();
    let (a, mu, zeta) = (params.a, sp.mu, sp.zeta);
    let ln_pre = -mu * hw * (params.x - params.x_r).ln();
    tp.m_weight = tp
        .q
        .iter()
        .zip(&tp.l)
        .enumerate()
        .map(|(k, (&q, &l))| {
            (ln_pre - a * zeta * l + mu * q.max(Q_FLOOR).ln() + a * mu * hw * k as f64 * ds).exp()
        })
        .collect();
    tp.l_rate = Some(sp.beta * hw);
    Ok(tp)
}

pub fn unweighted_q_sde(params: &SleParams, ds: f64, s_max: f64, seed: u64) -> Result<TiltedPath> {
    unweighted_q_sde_path(params, ds, s_max, seed, 0)
}

/// Q̃ under the original measure; the path stops when Q̃ reaches 0.
pub fn unweighted_q_sde_path(
    params: &SleParams,
    ds: f64,
    s_max: f64,
    seed: u64,
    path: u64,
) -> Result<TiltedPath> {
    run_q(params, 0.0, true, ds, s_max, seed, path)
}

fn run_q(
    params: &SleParams,
    mu: f64,
    absorbing: bool,
    ds: f64,
    s_max: f64,
    seed: u64,
    path: u64,
) -> Result<TiltedPath> {
    let steps = check_tilt_args(ds, s_max)?;
    let stepper = AngleStepper::new(params.a, params.rho, mu, ds, absorbing);
    let mut rng: ChaCha8Rng = path_rng(seed, path);
    let q0 = params.q0();
    let mut z = AngleStepper::angle(q0);
    let mut q = Vec::with_capacity(steps + 1);
    let mut l = Vec::with_capacity(steps + 1);
    q.push(q0);
    l.push(0.0);
    let mut reflected = 0;
    let mut absorbed_at = None;
    let mut integrand = (1.0 - q0) / q0.max(Q_FLOOR);
    let mut acc = 0.0;
    for k in 0..steps {
        match stepper.step(&mut z, rng.sample(StandardNormal)) {
            AngleOutcome::Absorbed => {
                absorbed_at = Some(k + 1);
                q.push(0.0);
                l.push(f64::INFINITY);
                break;
            }
            AngleOutcome::Reflected => reflected += 1,
            AngleOutcome::Moved => {}
        }
        let qn = AngleStepper::q(z);
        let next = (1.0 - qn) / qn.max(Q_FLOOR);
        acc += 0.5 * (integrand + next) * ds;
        integrand = next;
        q.push(qn);
        l.push(acc);
    }
    Ok(TiltedPath {
        ds,
        q,
        l,
        m_weight: Vec::new(),
        seed,
        path,
        l_rate: None,
        reflected,
        absorbed_at,
    })
}

/// Band constants for the event |L̃_s − β(1+ρ/2)s| ≤ u·sqrt(s)·log(2+s) + c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodEventParams {
    pub u: f64,
    pub c_const: f64,
    /// Extra room added to `c_const`.
    pub lambda_boost: f64,
}

impl Default for GoodEventParams {
    fn default() -> Self {
        GoodEventParams {
            u: 5.0,
            c_const: 1.0,
            lambda_boost: 4.0,
        }
    }
}

/// Whether L̃ stays in the band on every grid point s ≤ t_max, and the
/// smallest slack.
pub fn good_event_indicator(
    tp: &TiltedPath,
    gep: &GoodEventParams,
    t_max: f64,
) -> Result<(bool, f64)> {
    check(gep.u > 0.0, "u", "must be positive")?;
    let rate = tp.l_rate.ok_or(Error::InvalidParameter {
        field: "tp",
        reason: "needs a tilted path".into(),
    })?;
    let n = (t_max / tp.ds).round() as usize;
    check(n < tp.l.len(), "t_max", "beyond the simulated range")?;
    let c = gep.c_const + gep.lambda_boost;
    let margin = (0..=n)
        .map(|k| {
            let s = k as f64 * tp.ds;
            gep.u * s.sqrt() * (2.0 + s).ln() + c - (tp.l[k] - rate * s).abs()
        })
        .fold(f64::INFINITY, f64::min);
    Ok((margin >= 0.0, margin))
}

/// M_t^ζ = g′^ζ Q^μ δ^{−μ(1+ρ/2)} at grid time `t`.
pub fn martingale_value(obs: &LoewnerObservables, sp: &SpectrumParams, t: f64) -> Result<f64> {
    let r = obs.row_at(t)?;
    let hw = half_weight_of(obs.a, sp.mu_c);
    Ok((sp.zeta * r.log_gprime + sp.mu * r.q.ln() - sp.mu * hw * r.delta.ln()).exp())
}

/// 1 + ρ/2 recovered from μ_c = 2a − 1/2 + aρ/2.
fn half_weight_of(a: f64, mu_c: f64) -> f64 {
    1.0 + (mu_c - 2.0 * a + 0.5) / a
}

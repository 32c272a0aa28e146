//! Loewner chain along a discretised driver: boundary observables, traces and
//! harmonic measure from infinity.
//!
//! On every grid interval [t_k, t_{k+1}) the driver is frozen at its left
//! endpoint W_k, so each step is the exact vertical-slit map
//! z ↦ w + sqrt((z − w)² + 2a·h). Besides the tracked point x the chain
//! carries the images of the force point x_R and of 0⁺. When the driver lands
//! to the right of one of these images, the curve has touched the real line
//! there and the image is moved onto the driver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drivers::DriverPath;
use crate::error::{check, Error, Result};
use crate::radial::radial_clock;

/// Relative threshold on f (and v) below which x counts as swallowed.
pub const SWALLOW_EPS: f64 = 1e-9;

/// Exact one-step flow of a boundary point under a frozen driver.
pub fn slit_step(g: f64, gp: f64, w: f64, a: f64, dtau: f64) -> Result<(f64, f64)> {
    if dtau == 0.0 {
        return Ok((g, gp));
    }
    let u0 = g - w;
    if !(u0 > 0.0) {
        return Err(Error::Swallowed(u0));
    }
    let u = (u0 * u0 + 2.0 * a * dtau).sqrt();
    Ok((w + u, gp * u0 / u))
}

/// Square root on the closed upper half-plane; on the real axis the sign of
/// `side` picks the root.
fn sqrt_upper(z: Complex64, side: f64) -> Complex64 {
    let r = z.norm();
    let t = (0.5 * (r + z.re.abs())).sqrt();
    let mut s = if t == 0.0 {
        Complex64::new(0.0, 0.0)
    } else if z.re >= 0.0 {
        Complex64::new(t, z.im / (2.0 * t))
    } else {
        Complex64::new(z.im.abs() / (2.0 * t), t.copysign(z.im))
    };
    if s.im < 0.0 || (s.im == 0.0 && s.re * side < 0.0) {
        s = -s;
    }
    s
}

/// Slit map on the closed upper half-plane.
pub fn slit_map(z: Complex64, w: f64, a: f64, dtau: f64) -> Complex64 {
    let u = z - w;
    w + sqrt_upper(u * u + 2.0 * a * dtau, u.re)
}

/// Inverse of [`slit_map`].
pub fn slit_inverse(z: Complex64, w: f64, a: f64, dtau: f64) -> Complex64 {
    let u = z - w;
    w + sqrt_upper(u * u - 2.0 * a * dtau, u.re)
}

/// Image under g_t of a point of the upper half-plane (or of the real line
/// outside the hull), following the chain up to grid time `t`.
pub fn map_point(driver: &DriverPath, z: Complex64, t: f64) -> Complex64 {
    let steps = grid_index(driver, t).min(driver.len() - 1);
    let mut z = z;
    for k in 0..steps {
        z = slit_map(z, driver.w[k], driver.a, driver.dt);
    }
    z
}

fn grid_index(driver: &DriverPath, t: f64) -> usize {
    (t / driver.dt).round().max(0.0) as usize
}

/// Real point carried through the chain, stored relative to the force-point
/// image so that small gaps keep full relative precision. Every quantity is
/// obtained from the same composition of slit maps, so δ = v/g′ belongs to an
/// actual hull even when v and g′ are both tiny.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainPoint {
    /// g_t(x).
    pub g: f64,
    /// g_t(x) − V_t, where V_t is the chain image of x_R.
    pub v: f64,
    /// g_t(x) − O_t, where O_t is the chain image of 0⁺.
    pub u: f64,
    pub log_gp: f64,
}

impl ChainPoint {
    pub fn new(x: f64, x_r: f64) -> Self {
        ChainPoint {
            g: x,
            v: x - x_r,
            u: x,
            log_gp: 0.0,
        }
    }

    pub fn f(&self, w: f64) -> f64 {
        self.g - w
    }

    pub fn delta(&self) -> f64 {
        self.v * (-self.log_gp).exp()
    }

    pub fn log_delta(&self) -> f64 {
        self.v.ln() - self.log_gp
    }

    /// One exact slit step with the driver frozen at `w`. Requires g > w.
    pub fn slit(&mut self, w: f64, a: f64, h: f64) {
        let f0 = self.g - w;
        let d0 = (f0 - self.v).max(0.0);
        let e0 = (f0 - self.u).max(0.0);
        let two_ah = 2.0 * a * h;
        let f1 = (f0 * f0 + two_ah).sqrt();
        let d1 = (d0 * d0 + two_ah).sqrt();
        let e1 = (e0 * e0 + two_ah).sqrt();
        self.v *= (f0 + d0) / (f1 + d1);
        self.u *= (f0 + e0) / (f1 + e1);
        self.log_gp += -0.5 * (two_ah / (f0 * f0)).ln_1p();
        self.g = w + f1;
    }

    /// Moves the force-point and 0⁺ images onto the driver `w` if it has
    /// passed them.
    pub fn touch(&mut self, w: f64) {
        let f = self.g - w;
        if self.v > f && f > 0.0 {
            self.v = f;
        }
        if self.u > f {
            self.u = f.max(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t: f64,
    pub f: f64,
    pub log_gprime: f64,
    pub v: f64,
    pub delta: f64,
    pub q: f64,
    /// g_t(x) − O_t, π times the harmonic measure from infinity of (r_t, x].
    pub hm: f64,
    /// Radial clock −ln(δ/(x − x_R))/a.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoewnerObservables {
    pub x: f64,
    pub x_r: f64,
    pub a: f64,
    pub dt: f64,
    pub rows: Vec<ObservableRow>,
    pub swallow_time: Option<f64>,
}

impl LoewnerObservables {
    /// Row at grid time `t`.
    pub fn row_at(&self, t: f64) -> Result<&ObservableRow> {
        let k = (t / self.dt).round() as usize;
        match self.rows.get(k) {
            Some(r) if self.swallow_time.map_or(true, |sw| t < sw) => Ok(r),
            _ => Err(Error::SwallowedPoint {
                t,
                swallow: self
                    .swallow_time
                    .unwrap_or(self.rows.last().map_or(0.0, |r| r.t)),
            }),
        }
    }

    /// δ at an arbitrary time, linearly interpolated between grid rows.
    pub fn delta_at(&self, t: f64) -> Option<f64> {
        let pos = t / self.dt;
        let k = pos.floor() as usize;
        let last = self.rows.len() - 1;
        if pos < 0.0 || k > last || (k == last && pos > last as f64) {
            return None;
        }
        if k == last {
            return Some(self.rows[k].delta);
        }
        let th = pos - k as f64;
        Some(self.rows[k].delta * (1.0 - th) + self.rows[k + 1].delta * th)
    }
}

/// Runs the chain along `driver` and records the observables of `x` at every
/// grid time before it is swallowed.
pub fn evolve_observables(driver: &DriverPath, x: f64) -> Result<LoewnerObservables> {
    check(!driver.v.is_empty(), "driver", "needs a one-point driver")?;
    let x_r = driver.v[0];
    check(x > x_r, "x", "must exceed the force point")?;
    let a = driver.a;
    let h = driver.dt;
    let eps = SWALLOW_EPS * (x - x_r);
    let mut p = ChainPoint::new(x, x_r);
    let ld0 = (x - x_r).ln();
    let row = |p: &ChainPoint, t: f64, w: f64| {
        let f = p.f(w);
        ObservableRow {
            t,
            f,
            log_gprime: p.log_gp,
            v: p.v,
            delta: p.delta(),
            q: (p.v / f).clamp(0.0, 1.0),
            hm: p.u,
            s: (ld0 - p.log_delta()) / a,
        }
    };
    let mut rows = vec![row(&p, 0.0, 0.0)];
    let mut swallow_time = None;
    for k in 0..driver.len() - 1 {
        let f_prev = p.f(driver.w[k]);
        p.slit(driver.w[k], a, h);
        let w1 = driver.w[k + 1];
        p.touch(w1);
        let f = p.f(w1);
        if f <= eps || p.v <= eps {
            let frac = ((f_prev - eps) / (f_prev - f)).clamp(0.0, 1.0);
            swallow_time = Some(driver.t(k) + frac * h);
            break;
        }
        rows.push(row(&p, driver.t(k + 1), w1));
    }
    Ok(LoewnerObservables {
        x,
        x_r,
        a,
        dt: h,
        rows,
        swallow_time,
    })
}

/// Whether the real point `y` has been swallowed by grid time `t`.
fn swallowed_by(driver: &DriverPath, y: f64, t: f64) -> bool {
    let steps = grid_index(driver, t).min(driver.len() - 1);
    let mut g = y;
    for k in 0..steps {
        if g <= driver.w[k] {
            return true;
        }
        g = driver.w[k] + ((g - driver.w[k]).powi(2) + 2.0 * driver.a * driver.dt).sqrt();
    }
    g <= driver.w[steps]
}

/// Rightmost point of the hull on the positive real axis at time `t`
/// (0 if the curve has not touched it), by bisection on [0, y_max].
pub fn rightmost_swallowed(driver: &DriverPath, t: f64, y_max: f64) -> f64 {
    if !swallowed_by(driver, 1e-12 * y_max, t) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, y_max);
    if swallowed_by(driver, hi, t) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if swallowed_by(driver, mid, t) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// ω_∞((r_t, x], H_t) = (g_t(x) − O_t)/π.
pub fn harmonic_measure_infinity(obs: &LoewnerObservables, t: f64) -> Result<f64> {
    Ok(obs.row_at(t)?.hm / std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePolyline {
    pub dt: f64,
    /// points[k] approximates η(t_k).
    pub points: Vec<Complex64>,
    pub tip_tolerance: f64,
}

impl TracePolyline {
    /// dist(x, η[0, t_k]) for every k, measured to the polyline.
    pub fn running_distance(&self, x: Complex64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut best = (self.points[0] - x).norm();
        out.push(best);
        for seg in self.points.windows(2) {
            best = best.min(segment_distance(seg[0], seg[1], x));
            out.push(best);
        }
        out
    }
}

fn segment_distance(p: Complex64, q: Complex64, x: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    let th = if len2 > 0.0 {
        (((x - p) * d.conj()).re / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p + d * th - x).norm()
}

/// Points along the hull piece added at step k: the preimages of
/// w_k + c·sqrt(2ah) + i·eps, pulled back through steps k, k−1, …, 0. A real
/// offset |c| < 1 lands on the slit below its tip, so `fractions` in (−1, 1)
/// walk down both sides of the piece.
pub fn slit_piece(driver: &DriverPath, k: usize, eps: f64, fractions: &[f64]) -> Vec<Complex64> {
    let (a, h) = (driver.a, driver.dt);
    let height = (2.0 * a * h).sqrt();
    fractions
        .iter()
        .map(|&c| {
            let mut z = Complex64::new(driver.w[k] + c * height, eps);
            for j in (0..=k).rev() {
                z = slit_inverse(z, driver.w[j], a, h);
            }
            z
        })
        .collect()
}

/// Tips of the curve: w_k + i·eps pulled back through the slit maps of steps
/// k, k−1, …, 0.
pub fn trace_points(driver: &DriverPath, eps: f64) -> Result<TracePolyline> {
    check(eps > 1e-6 && eps < 1e-1, "eps", "must lie in (1e-6, 1e-1)")?;
    let (a, h) = (driver.a, driver.dt);
    let mut points = Vec::with_capacity(driver.len());
    points.push(Complex64::new(0.0, 0.0));
    for k in 0..driver.len() - 1 {
        let mut z = Complex64::new(driver.w[k], eps);
        for j in (0..=k).rev() {
            z = slit_inverse(z, driver.w[j], a, h);
        }
        if !(z.re.is_finite() && z.im.is_finite()) || z.im < -eps {
            return Err(Error::BranchFailure(z.im));
        }
        points.push(z);
    }
    Ok(TracePolyline {
        dt: h,
        points,
        tip_tolerance: eps,
    })
}

pub enum HitMode<'a> {
    /// First t with δ_t ≤ (x − x_R)e^{−as}, read off the radial clock.
    Radial,
    /// First grid time with dist(x, trace) ≤ e^{−s}.
    Trace(&'a TracePolyline),
}

pub fn hitting_time(obs: &LoewnerObservables, s: f64, mode: HitMode<'_>) -> Result<f64> {
    match mode {
        HitMode::Radial => radial_clock(obs).time_at(s).ok_or(Error::NotReached(s)),
        HitMode::Trace(tr) => {
            let limit = (-s).exp();
            let n = obs.rows.len().min(tr.points.len());
            let dist = tr.running_distance(Complex64::new(obs.x, 0.0));
            dist[..n]
                .iter()
                .position(|&d| d <= limit)
                .map(|k| k as f64 * obs.dt)
                .ok_or(Error::NotReached(s))
        }
    }
}

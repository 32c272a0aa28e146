//! Monte Carlo experiments: one-point moments by three routes, exponent fits,
//! covering counts and the distortion audit.
//!
//! Paths are mapped in parallel with rayon and collected in path order, so
//! every reduction sees the same sequence of values whatever the pool size.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drivers::{simulate_driver_path, DriverPath};
use crate::engine::{run_points, EngineConfig, PointSpec};
use crate::error::{check, Error, Result};
use crate::loewner::{evolve_observables, slit_piece, trace_points, ObservableRow};
use crate::qdiff::QDiffusionSpec;
use crate::radial::{AngleStepper, Q_FLOOR};
use crate::rng::path_rng;
use crate::spectrum::{SleParams, SpectrumParams};
use crate::stats::{mean_stderr, weighted_linear_fit, LinearFit};

/// Paths that must reach a radial time for a direct estimate there.
pub const MIN_SURVIVORS: usize = 100;
/// Capacity horizon of the direct method.
pub const DIRECT_T_MAX: f64 = 50.0;
/// Spectral terms used by the exact method.
pub const EXACT_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    /// Full chain, g′ read at the first time δ reaches (x − x_R)e^{−as}.
    Direct,
    /// Weighted Q̃ diffusion and the closed-form prefactor.
    Tilted,
    /// Spectral quadrature of the weighted transition density.
    Exact,
}

impl MomentMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MomentMethod::Direct => "direct",
            MomentMethod::Tilted => "tilted",
            MomentMethod::Exact => "exact",
        }
    }
}

impl std::str::FromStr for MomentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(MomentMethod::Direct),
            "tilted" => Ok(MomentMethod::Tilted),
            "exact" => Ok(MomentMethod::Exact),
            _ => Err(Error::InvalidParameter {
                field: "method",
                reason: format!("unknown method `{s}`"),
            }),
        }
    }
}

/// Estimate of E[g̃′_s(x)^ζ 1{t̃(s) < ∞}].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub s: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub method: MomentMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConfig {
    pub n_paths: usize,
    /// Capacity step of the direct method or radial step of the tilted one.
    pub step: f64,
    pub seed: u64,
    pub t_max: f64,
    pub n_terms: usize,
}

impl MomentConfig {
    pub fn new(n_paths: usize, step: f64, seed: u64) -> Self {
        MomentConfig {
            n_paths,
            step,
            seed,
            t_max: DIRECT_T_MAX,
            n_terms: EXACT_TERMS,
        }
    }
}

fn check_s_values(s_values: &[f64]) -> Result<()> {
    check(!s_values.is_empty(), "s", "needs at least one value")?;
    check(
        s_values.iter().all(|s| s.is_finite() && *s >= 0.0),
        "s",
        "must be finite and nonnegative",
    )?;
    check(
        s_values.windows(2).all(|w| w[0] < w[1]),
        "s",
        "must be increasing",
    )
}

/// ((x − x_R)/x)^μ e^{−aμ(1+ρ/2)s}, the factor relating the weighted moment
/// of Q̃^{−μ} to the unweighted moment of g̃′^ζ.
pub fn tilt_prefactor(params: &SleParams, sp: &SpectrumParams, s: f64) -> f64 {
    (sp.mu * params.q0().ln() - params.a * sp.mu * params.half_weight() * s).exp()
}

pub fn one_point_moment(
    params: &SleParams,
    sp: &SpectrumParams,
    s: f64,
    n_paths: usize,
    method: MomentMethod,
    dt_or_ds: f64,
    seed: u64,
) -> Result<MomentEstimate> {
    let cfg = MomentConfig::new(n_paths, dt_or_ds, seed);
    Ok(moment_series(params, sp, &[s], method, &cfg)?[0])
}

/// Estimates at every radial time in `s_values`, all from the same paths.
pub fn moment_series(
    params: &SleParams,
    sp: &SpectrumParams,
    s_values: &[f64],
    method: MomentMethod,
    cfg: &MomentConfig,
) -> Result<Vec<MomentEstimate>> {
    check_s_values(s_values)?;
    match method {
        MomentMethod::Exact => exact_series(params, sp, s_values, cfg.n_terms),
        MomentMethod::Tilted => tilted_series(params, sp, s_values, cfg),
        MomentMethod::Direct => {
            let hits = direct_hits(params, s_values, cfg)?;
            direct_from_hits(&hits, sp.zeta, s_values)
        }
    }
}

fn exact_series(
    params: &SleParams,
    sp: &SpectrumParams,
    s_values: &[f64],
    n_terms: usize,
) -> Result<Vec<MomentEstimate>> {
    let spec = QDiffusionSpec::new(params, sp)?;
    let q0 = params.q0();
    s_values
        .iter()
        .map(|&s| {
            let m = spec.transition_moment(s, q0, -sp.mu, n_terms)?;
            Ok(MomentEstimate {
                s,
                value: tilt_prefactor(params, sp, s) * m,
                stderr: 0.0,
                n_paths: 0,
                method: MomentMethod::Exact,
            })
        })
        .collect()
}

/// Q̃ at each requested radial time along one weighted path.
fn tilted_q_at(
    params: &SleParams,
    sp: &SpectrumParams,
    marks: &[usize],
    ds: f64,
    seed: u64,
    path: u64,
) -> Vec<f64> {
    let stepper = AngleStepper::new(params.a, params.rho, sp.mu, ds, false);
    let mut rng = path_rng(seed, path);
    let mut z = AngleStepper::angle(params.q0());
    let mut out = Vec::with_capacity(marks.len());
    let mut k = 0;
    for &m in marks {
        while k < m {
            stepper.step(&mut z, rng.sample(StandardNormal));
            k += 1;
        }
        out.push(AngleStepper::q(z));
    }
    out
}

fn tilted_series(
    params: &SleParams,
    sp: &SpectrumParams,
    s_values: &[f64],
    cfg: &MomentConfig,
) -> Result<Vec<MomentEstimate>> {
    check(
        cfg.step > 0.0 && cfg.step <= 1e-3,
        "ds",
        "must lie in (0, 1e-3]",
    )?;
    check(cfg.n_paths >= 2, "n_paths", "at least 2")?;
    let marks: Vec<usize> = s_values
        .iter()
        .map(|s| (s / cfg.step).round() as usize)
        .collect();
    let qs: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|k| tilted_q_at(params, sp, &marks, cfg.step, cfg.seed, k))
        .collect();
    Ok(s_values
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let pre = tilt_prefactor(params, sp, s);
            let xs: Vec<f64> = qs
                .iter()
                .map(|q| pre * q[j].max(Q_FLOOR).powf(-sp.mu))
                .collect();
            let (value, stderr) = mean_stderr(&xs);
            MomentEstimate {
                s,
                value,
                stderr,
                n_paths: cfg.n_paths,
                method: MomentMethod::Tilted,
            }
        })
        .collect())
}

/// ln g′ at the first time δ ≤ (x − x_R)e^{−as}, per path and per s, or
/// `None` when x is swallowed or the horizon is reached first. The hits do
/// not depend on ζ, so one run serves every ζ.
pub fn direct_hits(
    params: &SleParams,
    s_values: &[f64],
    cfg: &MomentConfig,
) -> Result<Vec<Vec<Option<f64>>>> {
    check_s_values(s_values)?;
    check(cfg.n_paths >= 2, "n_paths", "at least 2")?;
    check(
        cfg.t_max > 0.0 && cfg.t_max.is_finite(),
        "t_max",
        "must be positive",
    )?;
    let ld0 = (params.x - params.x_r).ln();
    let spec = PointSpec {
        x: params.x,
        log_delta_targets: s_values.iter().map(|s| ld0 - params.a * s).collect(),
    };
    let ecfg = EngineConfig::new(cfg.step, cfg.t_max);
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let out = run_points(params, std::slice::from_ref(&spec), &ecfg, cfg.seed, k)?;
            Ok(out[0]
                .hits
                .iter()
                .map(|h| h.map(|h| h.log_gprime))
                .collect())
        })
        .collect()
}

pub fn direct_from_hits(
    hits: &[Vec<Option<f64>>],
    zeta: f64,
    s_values: &[f64],
) -> Result<Vec<MomentEstimate>> {
    s_values
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let got = hits.iter().filter(|h| h[j].is_some()).count();
            if got < MIN_SURVIVORS {
                return Err(Error::InsufficientSurvivors {
                    got,
                    need: MIN_SURVIVORS,
                });
            }
            let xs: Vec<f64> = hits
                .iter()
                .map(|h| h[j].map_or(0.0, |lg| (zeta * lg).exp()))
                .collect();
            let (value, stderr) = mean_stderr(&xs);
            Ok(MomentEstimate {
                s,
                value,
                stderr,
                n_paths: hits.len(),
                method: MomentMethod::Direct,
            })
        })
        .collect()
}

/// Weighted least squares of ln(value) against s, weighting each point by
/// (value/stderr)² when every point carries an error bar.
pub fn exponent_fit(series: &[MomentEstimate]) -> Result<LinearFit> {
    check(series.len() >= 5, "series", "needs at least 5 points")?;
    check(
        series.windows(2).all(|w| w[0].s < w[1].s),
        "series",
        "s must increase",
    )?;
    if series.iter().any(|m| !(m.value > 0.0))
        || series.windows(2).all(|w| w[0].value == w[1].value)
    {
        return Err(Error::DegenerateFit);
    }
    let x: Vec<f64> = series.iter().map(|m| m.s).collect();
    let y: Vec<f64> = series.iter().map(|m| m.value.ln()).collect();
    let w: Vec<f64> = if series.iter().all(|m| m.stderr > 0.0) {
        series
            .iter()
            .map(|m| (m.value / m.stderr).powi(2))
            .collect()
    } else {
        vec![1.0; series.len()]
    };
    weighted_linear_fit(&x, &y, &w)
}

/// E*[exp(p|L̃_t − β(1+ρ/2)t|/√t)] under the weighted measure, for each t.
pub fn concentration_profile(
    params: &SleParams,
    sp: &SpectrumParams,
    ts: &[f64],
    p: f64,
    n_paths: usize,
    ds: f64,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    check_s_values(ts)?;
    check(ts[0] > 0.0, "t", "must be positive")?;
    check(ds > 0.0 && ds <= 1e-3, "ds", "must lie in (0, 1e-3]")?;
    let rate = sp.beta * params.half_weight();
    let marks: Vec<usize> = ts.iter().map(|t| (t / ds).round() as usize).collect();
    let ls: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let stepper = AngleStepper::new(params.a, params.rho, sp.mu, ds, false);
            let mut rng = path_rng(seed, k);
            let q0 = params.q0();
            let mut z = AngleStepper::angle(q0);
            let integrand = |q: f64| (1.0 - q) / q.max(Q_FLOOR);
            let mut prev = integrand(q0);
            let (mut l, mut step) = (0.0, 0);
            let mut out = Vec::with_capacity(marks.len());
            for &m in &marks {
                while step < m {
                    stepper.step(&mut z, rng.sample(StandardNormal));
                    let next = integrand(AngleStepper::q(z));
                    l += 0.5 * (prev + next) * ds;
                    prev = next;
                    step += 1;
                }
                out.push(l);
            }
            out
        })
        .collect();
    Ok(ts
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let xs: Vec<f64> = ls
                .iter()
                .map(|l| (p * (l[j] - rate * t).abs() / t.sqrt()).exp())
                .collect();
            let (value, stderr) = mean_stderr(&xs);
            MomentEstimate {
                s: t,
                value,
                stderr,
                n_paths,
                method: MomentMethod::Tilted,
            }
        })
        .collect())
}

/// Distortion constant c′ in the covering threshold.
pub const COVER_C_PRIME: f64 = 1.0 / 16.0;
/// Radial-time offset C₁ and constant C₂ of the lower count.
pub const LOWER_C1: f64 = 0.0;
pub const LOWER_C2: f64 = 1.0;
/// Largest supported scale.
pub const BOX_MAX_N: u32 = 10;

/// Averaged covering counts at scale n. Counts are path means, so they are
/// real numbers in [0, grid_size].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCountReport {
    pub n: u32,
    pub count_upper: f64,
    pub count_lower: f64,
    pub grid_size: usize,
    pub beta: f64,
    pub n_paths: usize,
}

/// Midpoints x_{j,n} = 1 + (j + 1/2)e^{−n}/2 of the ⌈2eⁿ⌉ intervals of length
/// e^{−n}/2 starting at 1.
pub fn grid_midpoints(n: u32) -> Vec<f64> {
    let len = (-(n as f64)).exp() / 2.0;
    let count = (2.0 * (n as f64).exp()).ceil() as usize;
    (0..count).map(|j| 1.0 + (j as f64 + 0.5) * len).collect()
}

fn check_scales(ns: &[u32], cfg: &EngineConfig) -> Result<()> {
    check(!ns.is_empty(), "n", "needs at least one scale")?;
    for &n in ns {
        check(
            n >= 1 && n <= BOX_MAX_N,
            "n",
            format!("must lie in 1..={BOX_MAX_N}"),
        )?;
        let spacing = (-(n as f64)).exp();
        let limit = 10.0 * cfg.finest_step().sqrt();
        if spacing < limit {
            return Err(Error::ResolutionExceeded { spacing, limit });
        }
    }
    Ok(())
}

/// Per-β, per-interval indicators of the upper and lower count conditions on
/// one path. The upper condition asks g′ ≥ c·e^{−β(1+ρ/2)(n−2)} at the first
/// time δ ≤ e^{−(n−2)}; the lower one asks g′ ≤ C₂e^{−β(1+ρ/2)n} at the first
/// time δ ≤ (x − x_R)e^{−(n + aC₁)}. A point never reaching the level counts
/// in neither.
pub fn covering_indicators(
    params: &SleParams,
    betas: &[f64],
    n: u32,
    cfg: &EngineConfig,
    seed: u64,
    path: u64,
) -> Result<Vec<(Vec<bool>, Vec<bool>)>> {
    check_scales(&[n], cfg)?;
    let hits = scale_hits(params, &[n], cfg, seed, path)?;
    Ok(betas
        .iter()
        .map(|&b| indicators(params, b, n, &hits[0]))
        .collect())
}

type ScaleHits = Vec<(Option<f64>, Option<f64>)>;

fn scale_hits(
    params: &SleParams,
    ns: &[u32],
    cfg: &EngineConfig,
    seed: u64,
    path: u64,
) -> Result<Vec<ScaleHits>> {
    let mut specs = Vec::new();
    let mut owner = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let nf = n as f64;
        for x in grid_midpoints(n) {
            let upper = -(nf - 2.0);
            let lower = (x - params.x_r).ln() - nf - params.a * LOWER_C1;
            specs.push(PointSpec {
                x,
                log_delta_targets: vec![upper, lower],
            });
            owner.push(i);
        }
    }
    let out = run_points(params, &specs, cfg, seed, path)?;
    let mut per_scale: Vec<ScaleHits> = vec![Vec::new(); ns.len()];
    for (o, i) in out.iter().zip(owner) {
        per_scale[i].push((
            o.hits[0].map(|h| h.log_gprime),
            o.hits[1].map(|h| h.log_gprime),
        ));
    }
    Ok(per_scale)
}

fn indicators(params: &SleParams, beta: f64, n: u32, hits: &ScaleHits) -> (Vec<bool>, Vec<bool>) {
    let bh = beta * params.half_weight();
    let nf = n as f64;
    let upper_level = COVER_C_PRIME.ln() - 2.0 * bh - bh * (nf - 2.0);
    let lower_level = LOWER_C2.ln() - bh * nf;
    let up = hits
        .iter()
        .map(|h| h.0.is_some_and(|lg| lg >= upper_level))
        .collect();
    let lo = hits
        .iter()
        .map(|h| h.1.is_some_and(|lg| lg <= lower_level))
        .collect();
    (up, lo)
}

pub fn box_count(
    params: &SleParams,
    sp: &SpectrumParams,
    n: u32,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<BoxCountReport> {
    let cfg = EngineConfig::new(dt, DIRECT_T_MAX);
    Ok(box_count_series(params, &[sp.beta], &[n], n_paths, &cfg, seed)?[0])
}

/// Reports for every (β, n) pair, β-major, all from the same paths.
pub fn box_count_series(
    params: &SleParams,
    betas: &[f64],
    ns: &[u32],
    n_paths: usize,
    cfg: &EngineConfig,
    seed: u64,
) -> Result<Vec<BoxCountReport>> {
    check_scales(ns, cfg)?;
    check(n_paths >= 1, "n_paths", "at least 1")?;
    check(
        betas.iter().all(|b| b.is_finite() && *b > 0.0),
        "beta",
        "must be positive",
    )?;
    let counts: Vec<Vec<(usize, usize)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let hits = scale_hits(params, ns, cfg, seed, k)?;
            let mut row = Vec::with_capacity(betas.len() * ns.len());
            for &b in betas {
                for (i, &n) in ns.iter().enumerate() {
                    let (up, lo) = indicators(params, b, n, &hits[i]);
                    row.push((
                        up.iter().filter(|x| **x).count(),
                        lo.iter().filter(|x| **x).count(),
                    ));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(betas.len() * ns.len());
    for (bi, &b) in betas.iter().enumerate() {
        for (i, &n) in ns.iter().enumerate() {
            let idx = bi * ns.len() + i;
            let up: usize = counts.iter().map(|r| r[idx].0).sum();
            let lo: usize = counts.iter().map(|r| r[idx].1).sum();
            out.push(BoxCountReport {
                n,
                count_upper: up as f64 / n_paths as f64,
                count_lower: lo as f64 / n_paths as f64,
                grid_size: grid_midpoints(n).len(),
                beta: b,
                n_paths,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Height above the driver at which trace tips are pulled back.
    pub eps: f64,
    pub t_max: f64,
    /// Audited points, as offsets to the right of x_R.
    pub offsets: Vec<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            eps: 1e-3,
            t_max: 1.0,
            offsets: vec![0.5, 1.0, 1.5],
        }
    }
}

/// Violation counts over all audited (path, t, x) triples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub samples: usize,
    /// δ below ((x − x_R)/(4x))·dist.
    pub distance_lower: usize,
    /// δ above 4·dist.
    pub distance_upper: usize,
    /// g(x) − O_t below g′·dist/4.
    pub koebe_lower: usize,
    /// g(x) − O_t above 4·g′·dist.
    pub koebe_upper: usize,
}

impl AuditReport {
    pub fn distance_fraction(&self) -> f64 {
        (self.distance_lower + self.distance_upper) as f64 / self.samples.max(1) as f64
    }

    pub fn koebe_fraction(&self) -> f64 {
        (self.koebe_lower + self.koebe_upper) as f64 / self.samples.max(1) as f64
    }

    fn add(mut self, o: &AuditReport) -> AuditReport {
        self.samples += o.samples;
        self.distance_lower += o.distance_lower;
        self.distance_upper += o.distance_upper;
        self.koebe_lower += o.koebe_lower;
        self.koebe_upper += o.koebe_upper;
        self
    }
}

/// Offsets along a slit, as fractions of its height, used where the tip
/// polyline is too coarse.
const PIECE_FRACTIONS: [f64; 8] = [-0.99, -0.95, -0.8, -0.5, 0.5, 0.8, 0.95, 0.99];
/// Steps whose gap f is below this many slit heights get their whole piece
/// sampled.
const PIECE_GAP_RATIO: f64 = 10.0;

/// Running distance from x to the hull. The tip polyline is accurate while
/// the slit is small next to the gap f; at steps where it is not, the piece
/// can pass much closer to x than either tip, so it is sampled along its
/// length.
fn hull_distance(
    driver: &DriverPath,
    rows: &[ObservableRow],
    mut dist: Vec<f64>,
    x: f64,
    eps: f64,
) -> Vec<f64> {
    let height = (2.0 * driver.a * driver.dt).sqrt();
    let xz = Complex64::new(x, 0.0);
    let mut extra = f64::INFINITY;
    for k in 1..rows.len().min(dist.len()) {
        if rows[k - 1].f < PIECE_GAP_RATIO * height {
            for z in slit_piece(driver, k - 1, eps, &PIECE_FRACTIONS) {
                extra = extra.min((z - xz).norm());
            }
        }
        dist[k] = dist[k].min(extra);
    }
    dist
}

pub fn distortion_audit(
    params: &SleParams,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<AuditReport> {
    distortion_audit_with(params, n_paths, dt, seed, &AuditConfig::default())
}

/// Checks ((x − x_R)/(4x))·dist ≤ δ_t ≤ 4·dist and
/// g′·dist/4 ≤ g_t(x) − O_t ≤ 4·g′·dist at every grid time t > 0 before x is
/// swallowed, with dist measured to the extracted trace.
pub fn distortion_audit_with(
    params: &SleParams,
    n_paths: usize,
    dt: f64,
    seed: u64,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    check(
        cfg.offsets.iter().all(|o| *o > 0.0),
        "offsets",
        "must be positive",
    )?;
    let reports: Vec<AuditReport> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let driver = simulate_driver_path(params, dt, cfg.t_max, seed, k)?;
            let trace = trace_points(&driver, cfg.eps)?;
            let mut rep = AuditReport::default();
            for &off in &cfg.offsets {
                let x = params.x_r + off;
                let obs = evolve_observables(&driver, x)?;
                let dist = hull_distance(
                    &driver,
                    &obs.rows,
                    trace.running_distance(Complex64::new(x, 0.0)),
                    x,
                    cfg.eps,
                );
                let lower_factor = (x - params.x_r) / (4.0 * x);
                for (row, &d) in obs.rows.iter().zip(&dist).skip(1) {
                    rep.samples += 1;
                    let gp = row.log_gprime.exp();
                    rep.distance_lower += usize::from(row.delta < lower_factor * d);
                    rep.distance_upper += usize::from(row.delta > 4.0 * d);
                    rep.koebe_lower += usize::from(row.hm < gp * d / 4.0);
                    rep.koebe_upper += usize::from(row.hm > 4.0 * gp * d);
                }
            }
            Ok(rep)
        })
        .collect::<Result<_>>()?;
    Ok(reports
        .iter()
        .fold(AuditReport::default(), AuditReport::add))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::spectrum_params;

    #[test]
    fn synthetic_exponential_series() {
        let series: Vec<MomentEstimate> = (1..=8)
            .map(|s| MomentEstimate {
                s: s as f64,
                value: (-0.7 * s as f64).exp(),
                stderr: 0.0,
                n_paths: 0,
                method: MomentMethod::Exact,
            })
            .collect();
        let fit = exponent_fit(&series).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let series: Vec<MomentEstimate> = (1..=5)
            .map(|s| MomentEstimate {
                s: s as f64,
                value: 0.3,
                stderr: 0.01,
                n_paths: 10,
                method: MomentMethod::Tilted,
            })
            .collect();
        assert_eq!(exponent_fit(&series), Err(Error::DegenerateFit));
    }

    #[test]
    fn exact_moment_at_time_zero_is_one() {
        let p = SleParams::new(2.0, -1.5, 1.3, 0.4).unwrap();
        let sp = spectrum_params(&p, 0.3).unwrap();
        let m = one_point_moment(&p, &sp, 0.0, 0, MomentMethod::Exact, 1e-3, 0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-14);
        assert_eq!(m.stderr, 0.0);
    }

    #[test]
    fn grid_covers_the_unit_interval() {
        let g = grid_midpoints(3);
        assert_eq!(g.len(), (2.0 * 3f64.exp()).ceil() as usize);
        let len = (-3f64).exp() / 2.0;
        assert!((g[0] - 1.0 - len / 2.0).abs() < 1e-15);
        assert!(g.last().unwrap() + len / 2.0 >= 2.0);
    }

    #[test]
    fn coarse_resolution_is_refused() {
        let cfg = EngineConfig {
            max_depth: 0,
            ..EngineConfig::new(1e-4, 1.0)
        };
        assert!(matches!(
            check_scales(&[3], &cfg),
            Err(Error::ResolutionExceeded { .. })
        ));
        assert!(check_scales(&[3], &EngineConfig::new(1e-4, 1.0)).is_ok());
    }
}

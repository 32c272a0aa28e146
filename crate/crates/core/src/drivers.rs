//! Discretised driving processes.
//!
//! One force point: the gap D = V − W is a Bessel process of dimension
//! δ_B = 1 + a(2+ρ), dD = c/D dt − dB with c = a(1+ρ/2). It is advanced by the
//! drift-implicit step D_{k+1} = D_k − ΔB + c·h/D_{k+1} (positive root), which
//! stays positive and is well defined from D = 0. The force point follows
//! V_{k+1} = V_k + a·h/D_{k+1} and W = V − D. Subtracting the two updates gives
//! W_{k+1} − W_k = (a/c)ΔB + (a/c − 1)(D_{k+1} − D_k), the discrete form of the
//! exact identity dW = (a/c)(dD + dB) − dD, so the driver is as accurate as
//! the gap and reduces to the Brownian path itself when ρ = 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::rng::{path_rng, BridgeNormals};
use crate::spectrum::SleParams;

pub const MAX_DT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverPath {
    pub dt: f64,
    pub a: f64,
    pub w: Vec<f64>,
    /// Right force point (one-point chains), empty when there is none.
    pub v: Vec<f64>,
    /// Force point trajectories of a multi-point chain, left points first.
    pub v_matrix: Vec<Vec<f64>>,
    pub seed: u64,
    pub path: u64,
    pub continuation_hit: Option<usize>,
}

impl DriverPath {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.len().saturating_sub(1))
    }
}

/// Mutable driver state of a one-point chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapState {
    pub w: f64,
    pub v: f64,
}

impl GapState {
    pub fn gap(&self) -> f64 {
        self.v - self.w
    }
}

/// One step of the one-point scheme; see the module documentation.
#[derive(Debug, Clone, Copy)]
pub struct GapStepper {
    pub a: f64,
    /// a(1 + ρ/2), the Bessel drift constant of the gap.
    c: f64,
}

impl GapStepper {
    pub fn new(params: &SleParams) -> Self {
        GapStepper {
            a: params.a,
            c: params.a * params.half_weight(),
        }
    }

    pub fn step(&self, st: &mut GapState, h: f64, db: f64) {
        let d0 = st.gap();
        let y = d0 - db;
        let disc = (y * y + 4.0 * self.c * h).sqrt();
        // Conjugate form for y < 0 avoids cancellation.
        let d1 = if y >= 0.0 {
            0.5 * (y + disc)
        } else {
            2.0 * self.c * h / (disc - y)
        };
        let ratio = self.a / self.c;
        st.w = st.w + ratio * db + (ratio - 1.0) * (d1 - d0);
        st.v = st.w + d1;
    }
}

/// Something that can be advanced over a Brownian increment and may ask for
/// the increment to be split.
pub trait Refinable {
    fn wants_refinement(&self, h: f64) -> bool;
    fn advance(&mut self, h: f64, db: f64);
}

/// Advances `s` over a coarse step of length `h` carrying Brownian increment
/// `db`. Whenever `s` asks for it, the interval is halved and the midpoint of
/// the Brownian path is drawn from its bridge law, N(db/2, h/4).
pub fn bridged_advance<S: Refinable>(
    s: &mut S,
    bridge: &mut BridgeNormals,
    step: u64,
    h: f64,
    db: f64,
    max_depth: u32,
) {
    fn go<S: Refinable>(
        s: &mut S,
        bridge: &mut BridgeNormals,
        step: u64,
        h: f64,
        db: f64,
        node: u64,
        depth: u32,
        max_depth: u32,
    ) {
        if depth < max_depth && s.wants_refinement(h) {
            let z = bridge.normal(step, node);
            let left = 0.5 * db + 0.5 * h.sqrt() * z;
            go(
                s,
                bridge,
                step,
                0.5 * h,
                left,
                2 * node,
                depth + 1,
                max_depth,
            );
            go(
                s,
                bridge,
                step,
                0.5 * h,
                db - left,
                2 * node + 1,
                depth + 1,
                max_depth,
            );
        } else {
            s.advance(h, db);
        }
    }
    go(s, bridge, step, h, db, 1, 0, max_depth);
}

/// Coarse Brownian increments of path `path`, one standard normal per step.
pub struct IncrementStream {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl IncrementStream {
    pub fn new(seed: u64, path: u64, dt: f64) -> Self {
        IncrementStream {
            rng: path_rng(seed, path),
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn next_increment(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sqrt_dt * z
    }
}

fn check_grid(dt: f64, t_max: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "dt",
            reason: "must be positive".into(),
        });
    }
    if dt > MAX_DT {
        return Err(Error::StepTooLarge(dt));
    }
    check(
        t_max >= 0.0 && t_max.is_finite(),
        "t_max",
        "must be nonnegative",
    )?;
    Ok((t_max / dt).round() as usize)
}

pub fn simulate_driver(params: &SleParams, dt: f64, t_max: f64, seed: u64) -> Result<DriverPath> {
    simulate_driver_path(params, dt, t_max, seed, 0)
}

/// Path number `path` of the run keyed by `seed`.
pub fn simulate_driver_path(
    params: &SleParams,
    dt: f64,
    t_max: f64,
    seed: u64,
    path: u64,
) -> Result<DriverPath> {
    let steps = check_grid(dt, t_max)?;
    if params.rho >= params.kappa / 2.0 - 2.0 {
        log::warn!(
            "rho = {} >= kappa/2 - 2: the curve does not hit the boundary",
            params.rho
        );
    }
    let stepper = GapStepper::new(params);
    let mut inc = IncrementStream::new(seed, path, dt);
    let mut st = GapState {
        w: 0.0,
        v: params.x_r,
    };
    let mut w = Vec::with_capacity(steps + 1);
    let mut v = Vec::with_capacity(steps + 1);
    w.push(st.w);
    v.push(st.v);
    for _ in 0..steps {
        stepper.step(&mut st, dt, inc.next_increment());
        w.push(st.w);
        v.push(st.v);
    }
    Ok(DriverPath {
        dt,
        a: params.a,
        w,
        v,
        v_matrix: Vec::new(),
        seed,
        path,
        continuation_hit: None,
    })
}

/// Path `path` on the grid dt/2^levels, built from the same Brownian path as
/// the grid dt: every coarse increment is split on Brownian-bridge midpoints.
pub fn simulate_driver_bridged(
    params: &SleParams,
    dt: f64,
    t_max: f64,
    seed: u64,
    path: u64,
    levels: u32,
) -> Result<DriverPath> {
    struct Fine<'a> {
        stepper: GapStepper,
        st: GapState,
        out: &'a mut DriverPath,
    }
    impl Refinable for Fine<'_> {
        fn wants_refinement(&self, _h: f64) -> bool {
            true
        }
        fn advance(&mut self, h: f64, db: f64) {
            self.stepper.step(&mut self.st, h, db);
            self.out.w.push(self.st.w);
            self.out.v.push(self.st.v);
        }
    }
    let steps = check_grid(dt, t_max)?;
    let mut out = DriverPath {
        dt: dt / f64::from(1u32 << levels),
        a: params.a,
        w: vec![0.0],
        v: vec![params.x_r],
        v_matrix: Vec::new(),
        seed,
        path,
        continuation_hit: None,
    };
    let mut fine = Fine {
        stepper: GapStepper::new(params),
        st: GapState {
            w: 0.0,
            v: params.x_r,
        },
        out: &mut out,
    };
    let mut inc = IncrementStream::new(seed, path, dt);
    let mut bridge = BridgeNormals::new(seed, path);
    for k in 0..steps {
        bridged_advance(
            &mut fine,
            &mut bridge,
            k as u64,
            dt,
            inc.next_increment(),
            levels,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiForceConfig {
    pub x_left: Vec<f64>,
    pub x_right: Vec<f64>,
    pub rho_left: Vec<f64>,
    pub rho_right: Vec<f64>,
}

impl MultiForceConfig {
    fn validate(&self) -> Result<()> {
        check(
            self.x_left.len() == self.rho_left.len(),
            "rho_left",
            "length must match x_left",
        )?;
        check(
            self.x_right.len() == self.rho_right.len(),
            "rho_right",
            "length must match x_right",
        )?;
        check(
            self.x_left.iter().all(|&x| x <= 0.0),
            "x_left",
            "entries must be <= 0",
        )?;
        check(
            self.x_right.iter().all(|&x| x >= 0.0),
            "x_right",
            "entries must be >= 0",
        )?;
        for side in [&self.x_left, &self.x_right] {
            for pair in side.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::ForcePointCollision(pair[0], pair[1]));
                }
            }
        }
        check(
            self.x_left.windows(2).all(|p| p[1] < p[0]),
            "x_left",
            "must be decreasing",
        )?;
        check(
            self.x_right.windows(2).all(|p| p[1] > p[0]),
            "x_right",
            "must be increasing",
        )?;
        Ok(())
    }
}

/// Euler state of a multi-force-point chain; left points ordered outward.
struct MultiState {
    a: f64,
    w: f64,
    left: Vec<f64>,
    right: Vec<f64>,
    rho_left: Vec<f64>,
    rho_right: Vec<f64>,
    stopped: bool,
}

impl MultiState {
    fn min_gap(&self) -> f64 {
        let l = self.left.first().map_or(f64::INFINITY, |v| self.w - v);
        let r = self.right.first().map_or(f64::INFINITY, |v| v - self.w);
        l.min(r)
    }

    /// Merges force points the driver has reached and reports whether the
    /// swallowed weight on one side has reached the continuation threshold.
    fn merge(&mut self) {
        let hit_r = self.right.iter().rposition(|&v| v <= self.w);
        if let Some(j) = hit_r {
            for v in &mut self.right[..=j] {
                *v = self.w;
            }
            if self.rho_right[..=j].iter().sum::<f64>() <= -2.0 {
                self.stopped = true;
            }
        }
        let hit_l = self.left.iter().rposition(|&v| v >= self.w);
        if let Some(j) = hit_l {
            for v in &mut self.left[..=j] {
                *v = self.w;
            }
            if self.rho_left[..=j].iter().sum::<f64>() <= -2.0 {
                self.stopped = true;
            }
        }
    }
}

impl Refinable for MultiState {
    fn wants_refinement(&self, h: f64) -> bool {
        !self.stopped && self.min_gap() < h.sqrt()
    }

    fn advance(&mut self, h: f64, db: f64) {
        if self.stopped {
            return;
        }
        let floor = h.sqrt();
        let mut drift = 0.0;
        for (v, r) in self.right.iter().zip(&self.rho_right) {
            drift -= self.a * r / 2.0 / (v - self.w).max(floor);
        }
        for (v, r) in self.left.iter().zip(&self.rho_left) {
            drift += self.a * r / 2.0 / (self.w - v).max(floor);
        }
        let w0 = self.w;
        for v in &mut self.right {
            *v += self.a * h / (*v - w0).max(floor);
        }
        for v in &mut self.left {
            *v -= self.a * h / (w0 - *v).max(floor);
        }
        self.w = w0 + db + drift * h;
        self.merge();
    }
}

/// Maximum number of halvings of a step near a collision.
pub const MULTI_MAX_HALVINGS: u32 = 20;

pub fn simulate_driver_multi(
    kappa: f64,
    cfg: &MultiForceConfig,
    dt: f64,
    t_max: f64,
    seed: u64,
) -> Result<DriverPath> {
    simulate_driver_multi_path(kappa, cfg, dt, t_max, seed, 0)
}

pub fn simulate_driver_multi_path(
    kappa: f64,
    cfg: &MultiForceConfig,
    dt: f64,
    t_max: f64,
    seed: u64,
    path: u64,
) -> Result<DriverPath> {
    check(
        kappa > 0.0 && kappa.is_finite(),
        "kappa",
        "must be positive",
    )?;
    cfg.validate()?;
    let steps = check_grid(dt, t_max)?;
    let a = 2.0 / kappa;
    let mut st = MultiState {
        a,
        w: 0.0,
        left: cfg.x_left.clone(),
        right: cfg.x_right.clone(),
        rho_left: cfg.rho_left.clone(),
        rho_right: cfg.rho_right.clone(),
        stopped: false,
    };
    let mut inc = IncrementStream::new(seed, path, dt);
    let mut bridge = BridgeNormals::new(seed, path);
    let n_forces = st.left.len() + st.right.len();
    let mut w = vec![0.0];
    let mut v_matrix: Vec<Vec<f64>> = st.left.iter().chain(&st.right).map(|&x| vec![x]).collect();
    let mut continuation_hit = None;
    for k in 0..steps {
        let db = inc.next_increment();
        bridged_advance(&mut st, &mut bridge, k as u64, dt, db, MULTI_MAX_HALVINGS);
        w.push(st.w);
        for (row, &x) in v_matrix.iter_mut().zip(st.left.iter().chain(&st.right)) {
            row.push(x);
        }
        if st.stopped {
            continuation_hit = Some(k + 1);
            break;
        }
    }
    let v = if cfg.x_right.is_empty() {
        Vec::new()
    } else {
        v_matrix[st.left.len()].clone()
    };
    debug_assert_eq!(v_matrix.len(), n_forces);
    Ok(DriverPath {
        dt,
        a,
        w,
        v,
        v_matrix,
        seed,
        path,
        continuation_hit,
    })
}

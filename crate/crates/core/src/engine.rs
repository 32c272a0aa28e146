//! Adaptive evolution of many boundary points along one one-force-point path.
//!
//! The driver is generated on the fly. Points close to the driver ("near")
//! follow every step, and a step is split on Brownian-bridge midpoints while
//! some near point has f < K·sqrt(h) or the force point is within sqrt(h) of
//! the driver. Distant points ("far") are advanced lazily: over an interval
//! [t₀, t₁] they take one slit step of capacity t₁ − t₀ driven by the mean of
//! W on that interval, read off a running integral of W. A far point is
//! revisited after (f/K_lazy)² units of time, or earlier if W moves half way
//! towards it.
//!
//! The driver pair (W, V) follows the implicit gap scheme. The tracked points
//! see the chain image of x_R instead, flowed through the same slit maps as
//! themselves, so that v = g − V stays consistent with g′. Steps are refined
//! while either gap is below sqrt(h), where the two force points can drift
//! apart.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::drivers::{bridged_advance, GapState, GapStepper, IncrementStream, Refinable, MAX_DT};
use crate::error::{check, Error, Result};
use crate::loewner::{ChainPoint, SWALLOW_EPS};
use crate::rng::BridgeNormals;
use crate::spectrum::SleParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Coarse step.
    pub dt: f64,
    pub t_max: f64,
    /// Near points ask for refinement while f < k_refine·sqrt(h).
    pub k_refine: f64,
    /// Points with f < k_near·sqrt(dt) follow every step.
    pub k_near: f64,
    /// Lazy steps have length (f/k_lazy)².
    pub k_lazy: f64,
    pub max_depth: u32,
}

impl EngineConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        EngineConfig {
            dt,
            t_max,
            k_refine: 10.0,
            k_near: 20.0,
            k_lazy: 8.0,
            max_depth: 30,
        }
    }

    /// Smallest step the refinement can reach.
    pub fn finest_step(&self) -> f64 {
        self.dt / 2f64.powi(self.max_depth as i32)
    }
}

/// A tracked point and the log-δ levels whose first passage is recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub x: f64,
    /// Decreasing targets for ln δ.
    pub log_delta_targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub log_gprime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub hits: Vec<Option<Hit>>,
    pub swallow_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Near,
    Far,
    Done,
}

struct Tracked {
    cp: ChainPoint,
    mode: Mode,
    t_last: f64,
    i_last: f64,
    version: u32,
    targets: Vec<f64>,
    next_target: usize,
    hits: Vec<Option<Hit>>,
    prev: (f64, f64, f64),
    eps: f64,
    swallow_time: Option<f64>,
}

/// Sort key for f64 values of either sign.
fn key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Above this value of Q a far point takes v from the chain force point.
const FAR_ABSOLUTE_Q: f64 = 0.5;

type Queue = BinaryHeap<Reverse<(u64, usize, u32)>>;

struct Engine {
    cfg: EngineConfig,
    a: f64,
    stepper: GapStepper,
    drv: GapState,
    /// Chain image of the force point.
    vc: f64,
    t: f64,
    /// ∫₀ᵗ W.
    integral: f64,
    pts: Vec<Tracked>,
    near: Vec<usize>,
    by_time: Queue,
    by_guard: Queue,
    active: usize,
    near_limit: f64,
}

impl Engine {
    fn record(&mut self, i: usize) {
        let t = self.t;
        let p = &mut self.pts[i];
        let ld = p.cp.log_delta();
        let lg = p.cp.log_gp;
        let (pld, plg, pt) = p.prev;
        while p.next_target < p.targets.len() && ld <= p.targets[p.next_target] {
            let target = p.targets[p.next_target];
            let th = if pld > ld {
                ((pld - target) / (pld - ld)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            p.hits[p.next_target] = Some(Hit {
                t: pt + th * (t - pt),
                log_gprime: plg + th * (lg - plg),
            });
            p.next_target += 1;
        }
        p.prev = (ld, lg, t);
        if p.next_target == p.targets.len() {
            self.finish(i);
        }
    }

    fn finish(&mut self, i: usize) {
        if self.pts[i].mode != Mode::Done {
            self.pts[i].mode = Mode::Done;
            self.pts[i].version += 1;
            self.active -= 1;
        }
    }

    fn schedule(&mut self, i: usize) {
        let w = self.drv.w;
        let p = &mut self.pts[i];
        let f = p.cp.g - w;
        p.version += 1;
        let dt_next = (f / self.cfg.k_lazy).powi(2);
        self.by_time
            .push(Reverse((key(self.t + dt_next), i, p.version)));
        self.by_guard
            .push(Reverse((key(w + 0.5 * f), i, p.version)));
    }

    /// Brings a far point up to the current time.
    fn catch_up(&mut self, i: usize) {
        let (a, t, integral, vc, w) = (self.a, self.t, self.integral, self.vc, self.drv.w);
        let p = &mut self.pts[i];
        let span = t - p.t_last;
        if span > 0.0 {
            let wbar = (integral - p.i_last) / span;
            let f0 = p.cp.g - wbar;
            if f0 > 0.0 {
                // The force point and 0⁺ are flowed through the same averaged
                // slit map as x, which keeps δ = v/g′ consistent when v ≪ f.
                let two = 2.0 * a * span;
                let f1 = (f0 * f0 + two).sqrt();
                let d0 = (f0 - p.cp.v).max(0.0);
                let e0 = (f0 - p.cp.u).max(0.0);
                p.cp.v *= (f0 + d0) / (f1 + (d0 * d0 + two).sqrt());
                p.cp.u *= (f0 + e0) / (f1 + (e0 * e0 + two).sqrt());
                p.cp.log_gp += -0.5 * (two / (f0 * f0)).ln_1p();
                p.cp.g = wbar + f1;
            }
            p.t_last = t;
            p.i_last = integral;
        }
        let f = p.cp.g - w;
        // Near the driver the averaged map places V poorly; there the chain
        // value is accurate in absolute terms and v is not small.
        let v_abs = p.cp.g - vc;
        if v_abs > FAR_ABSOLUTE_Q * f {
            p.cp.v = v_abs;
        }
        p.cp.v = p.cp.v.min(f);
        p.cp.u = p.cp.u.min(f);
        if f <= p.eps || p.cp.v <= p.eps {
            p.swallow_time = Some(t);
            self.finish(i);
            return;
        }
        self.record(i);
        if self.pts[i].mode == Mode::Done {
            return;
        }
        if f < self.near_limit {
            self.pts[i].mode = Mode::Near;
            self.pts[i].version += 1;
            self.near.push(i);
        } else {
            self.schedule(i);
        }
    }

    fn service_far(&mut self) {
        let now = key(self.t);
        let wk = key(self.drv.w);
        loop {
            let due = match self.by_time.peek() {
                Some(Reverse((k, i, v))) if *k <= now => Some((*i, *v, true)),
                _ => match self.by_guard.peek() {
                    Some(Reverse((k, i, v))) if *k <= wk => Some((*i, *v, false)),
                    _ => None,
                },
            };
            let Some((i, v, from_time)) = due else { break };
            if from_time {
                self.by_time.pop();
            } else {
                self.by_guard.pop();
            }
            if self.pts[i].mode == Mode::Far && self.pts[i].version == v {
                self.catch_up(i);
            }
        }
    }
}

impl Refinable for Engine {
    fn wants_refinement(&self, h: f64) -> bool {
        let sh = h.sqrt();
        let w = self.drv.w;
        if self.drv.gap() < sh || self.vc - w < sh {
            return true;
        }
        let lim = self.cfg.k_refine * sh;
        self.near.iter().any(|&i| self.pts[i].cp.g - w < lim)
    }

    fn advance(&mut self, h: f64, db: f64) {
        let (a, w) = (self.a, self.drv.w);
        let d0 = (self.vc - w).max(0.0);
        let vc = w + (d0 * d0 + 2.0 * a * h).sqrt();
        for &i in &self.near {
            self.pts[i].cp.slit(w, a, h);
        }
        self.integral += w * h;
        self.t += h;
        self.stepper.step(&mut self.drv, h, db);
        let w1 = self.drv.w;
        self.vc = vc.max(w1);
        let mut j = 0;
        while j < self.near.len() {
            let i = self.near[j];
            let p = &mut self.pts[i];
            let f = p.cp.g - w1;
            if f <= p.eps || p.cp.v <= p.eps {
                p.swallow_time = Some(self.t);
                self.near.swap_remove(j);
                self.finish(i);
                continue;
            }
            p.cp.touch(w1);
            self.record(i);
            let p = &mut self.pts[i];
            if p.mode == Mode::Done {
                self.near.swap_remove(j);
                continue;
            }
            if f > 2.0 * self.near_limit {
                p.mode = Mode::Far;
                p.t_last = self.t;
                p.i_last = self.integral;
                self.near.swap_remove(j);
                self.schedule(i);
                continue;
            }
            j += 1;
        }
        self.service_far();
    }
}

/// Runs one path and reports, for every point, the first passages of its
/// targets and its swallowing time.
pub fn run_points(
    params: &SleParams,
    specs: &[PointSpec],
    cfg: &EngineConfig,
    seed: u64,
    path: u64,
) -> Result<Vec<PointOutcome>> {
    check(cfg.dt > 0.0, "dt", "must be positive")?;
    if cfg.dt > MAX_DT {
        return Err(Error::StepTooLarge(cfg.dt));
    }
    check(cfg.max_depth <= 30, "max_depth", "at most 30")?;
    let mut eng = Engine {
        cfg: *cfg,
        a: params.a,
        stepper: GapStepper::new(params),
        drv: GapState {
            w: 0.0,
            v: params.x_r,
        },
        vc: params.x_r,
        t: 0.0,
        integral: 0.0,
        pts: Vec::with_capacity(specs.len()),
        near: Vec::new(),
        by_time: BinaryHeap::new(),
        by_guard: BinaryHeap::new(),
        active: specs.len(),
        near_limit: cfg.k_near * cfg.dt.sqrt(),
    };
    for s in specs {
        check(
            s.x > params.x_r,
            "x",
            "points must lie right of the force point",
        )?;
        let cp = ChainPoint::new(s.x, params.x_r);
        eng.pts.push(Tracked {
            cp,
            mode: Mode::Far,
            t_last: 0.0,
            i_last: 0.0,
            version: 0,
            targets: s.log_delta_targets.clone(),
            next_target: 0,
            hits: vec![None; s.log_delta_targets.len()],
            prev: (cp.log_delta(), 0.0, 0.0),
            eps: SWALLOW_EPS * (s.x - params.x_r),
            swallow_time: None,
        });
    }
    for i in 0..eng.pts.len() {
        eng.record(i);
        if eng.pts[i].mode == Mode::Done {
            continue;
        }
        if eng.pts[i].cp.g < eng.near_limit {
            eng.pts[i].mode = Mode::Near;
            eng.near.push(i);
        } else {
            eng.schedule(i);
        }
    }
    let mut inc = IncrementStream::new(seed, path, cfg.dt);
    let mut bridge = BridgeNormals::new(seed, path);
    let steps = (cfg.t_max / cfg.dt).round() as u64;
    for k in 0..steps {
        if eng.active == 0 {
            break;
        }
        let db = inc.next_increment();
        bridged_advance(&mut eng, &mut bridge, k, cfg.dt, db, cfg.max_depth);
    }
    Ok(eng
        .pts
        .into_iter()
        .map(|p| PointOutcome {
            hits: p.hits,
            swallow_time: p.swallow_time,
        })
        .collect())
}

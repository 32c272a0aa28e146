use serde_json::{json, Map, Value};

use sle_lab::drivers::simulate_driver_path;
use sle_lab::engine::EngineConfig;
use sle_lab::estimators::{
    box_count_series, distortion_audit_with, exponent_fit, moment_series, AuditConfig,
    BoxCountReport, MomentConfig, MomentMethod,
};
use sle_lab::io::{self, Cell, Csv};
use sle_lab::loewner::evolve_observables;
use sle_lab::qdiff::QDiffusionSpec;
use sle_lab::spectrum::{
    beta_range, beta_zero, beta_zero_star, covering_exponent, d, d_star, one_point_prefactor,
    radial_moment_rate, spectrum_params, spectrum_params_from_beta,
};
use sle_lab::stats::weighted_linear_fit;
use sle_lab::{Result, SleParams, SpectrumParams};

use crate::config::{Command, RunConfig};

/// Files to write (name, contents) plus the command-specific summary parts.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub results: Map<String, Value>,
    pub criteria: Map<String, Value>,
}

impl Outcome {
    fn new(command: Command, csv: String) -> Self {
        Outcome {
            files: vec![(format!("{}.csv", command.name()), csv)],
            results: Map::new(),
            criteria: Map::new(),
        }
    }

    fn criterion(&mut self, name: &str, value: f64, target: f64, tolerance: f64, relative: bool) {
        let err = if relative {
            ((value - target) / target).abs()
        } else {
            (value - target).abs()
        };
        self.criteria.insert(
            name.into(),
            json!({
                "value": value,
                "target": target,
                "tolerance": tolerance,
                "relative": relative,
                "pass": err <= tolerance,
            }),
        );
    }
}

pub fn sle_params(c: &RunConfig) -> Result<SleParams> {
    SleParams::new(c.kappa, c.rho, c.x, c.x_r)
}

pub fn exponent_params(c: &RunConfig, p: &SleParams) -> Result<Option<SpectrumParams>> {
    match (c.zeta, c.beta) {
        (Some(z), _) => spectrum_params(p, z).map(Some),
        (None, Some(b)) => spectrum_params_from_beta(p, b).map(Some),
        (None, None) => Ok(None),
    }
}

/// Closed-form quantities of the parameter set; entries that do not exist
/// for these parameters are null.
pub fn derived(p: &SleParams, sp: Option<&SpectrumParams>) -> Value {
    let hw = p.half_weight();
    let (bm, bp) = beta_range(p).map_or((None, None), |(a, b)| (Some(a), Some(b)));
    let mut m = json!({
        "a": p.a,
        "mu_c": p.mu_c(),
        "beta_minus": bm,
        "beta_plus": bp,
        "beta_0": beta_zero(p),
        "beta_0_star": beta_zero_star(p),
        "d_beta0": d(p, beta_zero(p)),
    });
    if let Some(sp) = sp {
        let spec = QDiffusionSpec::new(p, sp).ok();
        let extra = json!({
            "zeta": sp.zeta,
            "mu": sp.mu,
            "beta": sp.beta,
            "delta_plus": spec.as_ref().map(|s| s.delta_plus),
            "delta_minus": spec.as_ref().map(|s| s.delta_minus),
            "K": one_point_prefactor(p, sp).ok(),
            "d_beta": d(p, sp.beta * hw),
            "d_star_beta": d_star(p, sp.beta),
        });
        m.as_object_mut()
            .unwrap()
            .extend(extra.as_object().unwrap().clone());
    }
    m
}

pub fn run(c: &RunConfig, p: &SleParams, sp: Option<&SpectrumParams>) -> Result<Outcome> {
    match c.command {
        Command::Spectrum => spectrum(c, p),
        Command::Simulate => simulate(c, p),
        Command::Moment => moment(c, p, sp.expect("validated")),
        Command::Qdiff => qdiff(c, p, sp.expect("validated")),
        Command::Boxdim => boxdim(c, p, sp.expect("validated")),
        Command::Audit => audit(c, p),
    }
}

/// d* on n_grid interior points of (β_−, β_+)/(1+ρ/2).
fn spectrum(c: &RunConfig, p: &SleParams) -> Result<Outcome> {
    let hw = p.half_weight();
    let (lo, hi) = beta_range(p)?;
    let hi = if hi.is_finite() { hi } else { 20.0 * lo };
    let (lo, hi) = (lo / hw, hi / hw);
    let mut csv = Csv::new(&["beta", "zeta", "mu", "d"]);
    for j in 0..c.n_grid {
        let b = lo + (hi - lo) * (j as f64 + 0.5) / c.n_grid as f64;
        let sp = spectrum_params_from_beta(p, b)?;
        csv.row(&[
            Cell::F(b),
            Cell::F(sp.zeta),
            Cell::F(sp.mu),
            Cell::F(d_star(p, b)),
        ]);
    }
    Ok(Outcome::new(c.command, csv.finish()))
}

fn simulate(c: &RunConfig, p: &SleParams) -> Result<Outcome> {
    let driver = simulate_driver_path(p, c.dt, c.horizon(), c.seed, 0)?;
    let obs = evolve_observables(&driver, p.x)?;
    let mut out = Outcome::new(c.command, io::observables_csv(&obs));
    out.files
        .push(("driver.csv".into(), io::driver_csv(&driver)));
    out.results
        .insert("swallow_time".into(), json!(obs.swallow_time));
    out.results.insert("rows".into(), json!(obs.rows.len()));
    out.results
        .insert("final_s".into(), json!(obs.rows.last().map(|r| r.s)));
    Ok(out)
}

fn moment(c: &RunConfig, p: &SleParams, sp: &SpectrumParams) -> Result<Outcome> {
    let s_values: Vec<f64> = (1..=c.s_max.floor() as usize).map(|s| s as f64).collect();
    let step = match c.method {
        MomentMethod::Direct => c.dt,
        _ => c.ds,
    };
    let mcfg = MomentConfig {
        n_paths: c.n_paths,
        step,
        seed: c.seed,
        t_max: c.horizon(),
        n_terms: c.n_terms,
    };
    let series = moment_series(p, sp, &s_values, c.method, &mcfg)?;
    let mut out = Outcome::new(c.command, io::moments_csv(&series));
    if series.len() >= 5 {
        let fit = exponent_fit(&series)?;
        let (slope_tol, pre_tol) = match c.method {
            MomentMethod::Exact => (0.01, 0.10),
            MomentMethod::Tilted => (0.05, 0.20),
            MomentMethod::Direct => (0.10, 0.30),
        };
        let k = one_point_prefactor(p, sp)? * p.q0().powf(sp.mu);
        out.results.insert("slope".into(), json!(fit.slope));
        out.results.insert("intercept".into(), json!(fit.intercept));
        out.results.insert("r2".into(), json!(fit.r2));
        out.criterion(
            "slope",
            fit.slope,
            -radial_moment_rate(p, sp),
            slope_tol,
            true,
        );
        out.criterion("prefactor", fit.intercept.exp(), k, pre_tol, true);
    }
    Ok(out)
}

fn qdiff(c: &RunConfig, p: &SleParams, sp: &SpectrumParams) -> Result<Outcome> {
    let spec = QDiffusionSpec::new(p, sp)?;
    let x0 = c.x0.unwrap_or_else(|| p.q0());
    let mut table = Vec::with_capacity(c.n_grid);
    let mut worst: f64 = 0.0;
    for j in 0..c.n_grid {
        let y = (j as f64 + 0.5) / c.n_grid as f64;
        let v = spec.transition_density(c.t, x0, y, c.n_terms)?;
        let inv = spec.invariant_density(y)?;
        worst = worst.max(((v - inv) / inv).abs());
        table.push((y, v));
    }
    let mut out = Outcome::new(c.command, io::density_csv(&table));
    out.results.insert("x0".into(), json!(x0));
    out.results
        .insert("max_rel_diff_invariant".into(), json!(worst));
    out.results.insert("gap".into(), json!(spec.gap()));
    Ok(out)
}

fn boxdim(c: &RunConfig, p: &SleParams, sp: &SpectrumParams) -> Result<Outcome> {
    let ns: Vec<u32> = (c.n_min..=c.n_max).collect();
    let ecfg = EngineConfig::new(c.dt, c.horizon());
    let reports = box_count_series(p, &[sp.beta], &ns, c.n_paths, &ecfg, c.seed)?;
    let mut out = Outcome::new(c.command, io::boxcount_csv(&reports));
    if let Some(slope) = count_exponent(&reports) {
        out.results.insert("exponent_upper".into(), json!(slope));
        out.criterion(
            "exponent_upper",
            slope,
            covering_exponent(p, sp),
            0.15,
            false,
        );
    }
    Ok(out)
}

/// Least-squares slope of ln E[N̄_n] against n; `None` when fewer than two
/// scales have positive counts.
pub fn count_exponent(reports: &[BoxCountReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.count_upper > 0.0)
        .map(|r| (f64::from(r.n), r.count_upper.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    weighted_linear_fit(&x, &y, &vec![1.0; x.len()])
        .ok()
        .map(|f| f.slope)
}

fn audit(c: &RunConfig, p: &SleParams) -> Result<Outcome> {
    let acfg = AuditConfig {
        t_max: c.horizon(),
        ..AuditConfig::default()
    };
    let rep = distortion_audit_with(p, c.n_paths, c.dt, c.seed, &acfg)?;
    let mut csv = Csv::new(&["check", "samples", "below", "above"]);
    csv.row(&[
        Cell::S("distance"),
        Cell::I(rep.samples as u64),
        Cell::I(rep.distance_lower as u64),
        Cell::I(rep.distance_upper as u64),
    ]);
    csv.row(&[
        Cell::S("harmonic_measure"),
        Cell::I(rep.samples as u64),
        Cell::I(rep.koebe_lower as u64),
        Cell::I(rep.koebe_upper as u64),
    ]);
    let mut out = Outcome::new(c.command, csv.finish());
    out.criterion(
        "distance_violations",
        rep.distance_fraction(),
        0.0,
        1e-3,
        false,
    );
    out.criterion(
        "harmonic_measure_violations",
        rep.koebe_fraction(),
        0.0,
        1e-3,
        false,
    );
    Ok(out)
}

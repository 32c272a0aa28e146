//! CSV emitters. Floats carry 17 significant digits so that values read back
//! are bit-identical.

use std::fmt::Write;

use crate::drivers::DriverPath;
use crate::estimators::{BoxCountReport, MomentEstimate};
use crate::loewner::{LoewnerObservables, TracePolyline};
use crate::radial::TiltedPath;

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.buf.push(',');
            }
            match c {
                Cell::F(x) => write!(self.buf, "{}", float(*x)).unwrap(),
                Cell::I(n) => write!(self.buf, "{n}").unwrap(),
                Cell::S(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub enum Cell<'a> {
    F(f64),
    I(u64),
    S(&'a str),
}

pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// `t,w,v`; v is left empty for chains without a force point.
pub fn driver_csv(d: &DriverPath) -> String {
    let mut csv = Csv::new(&["t", "w", "v"]);
    for k in 0..d.len() {
        match d.v.get(k) {
            Some(&v) => csv.row(&[Cell::F(d.t(k)), Cell::F(d.w[k]), Cell::F(v)]),
            None => csv.row(&[Cell::F(d.t(k)), Cell::F(d.w[k]), Cell::S("")]),
        }
    }
    csv.finish()
}

pub fn observables_csv(obs: &LoewnerObservables) -> String {
    let mut csv = Csv::new(&["t", "f", "log_gprime", "v", "delta", "q"]);
    for r in &obs.rows {
        csv.row(&[
            Cell::F(r.t),
            Cell::F(r.f),
            Cell::F(r.log_gprime),
            Cell::F(r.v),
            Cell::F(r.delta),
            Cell::F(r.q),
        ]);
    }
    csv.finish()
}

pub fn trace_csv(trace: &TracePolyline) -> String {
    let mut csv = Csv::new(&["re", "im"]);
    for z in &trace.points {
        csv.row(&[Cell::F(z.re), Cell::F(z.im)]);
    }
    csv.finish()
}

/// `s,q,l,m_weight`; m_weight is empty for unweighted paths.
pub fn tilted_csv(tp: &TiltedPath) -> String {
    let mut csv = Csv::new(&["s", "q", "l", "m_weight"]);
    for (k, (&q, &l)) in tp.q.iter().zip(&tp.l).enumerate() {
        let s = Cell::F(k as f64 * tp.ds);
        match tp.m_weight.get(k) {
            Some(&m) => csv.row(&[s, Cell::F(q), Cell::F(l), Cell::F(m)]),
            None => csv.row(&[s, Cell::F(q), Cell::F(l), Cell::S("")]),
        }
    }
    csv.finish()
}

pub fn density_csv(table: &[(f64, f64)]) -> String {
    let mut csv = Csv::new(&["y", "p"]);
    for &(y, p) in table {
        csv.row(&[Cell::F(y), Cell::F(p)]);
    }
    csv.finish()
}

pub fn moments_csv(series: &[MomentEstimate]) -> String {
    let mut csv = Csv::new(&["s", "value", "stderr", "method"]);
    for m in series {
        csv.row(&[
            Cell::F(m.s),
            Cell::F(m.value),
            Cell::F(m.stderr),
            Cell::S(m.method.as_str()),
        ]);
    }
    csv.finish()
}

pub fn boxcount_csv(reports: &[BoxCountReport]) -> String {
    let mut csv = Csv::new(&["n", "count_upper", "count_lower", "grid_size"]);
    for r in reports {
        csv.row(&[
            Cell::I(u64::from(r.n)),
            Cell::F(r.count_upper),
            Cell::F(r.count_lower),
            Cell::I(r.grid_size as u64),
        ]);
    }
    csv.finish()
}

//! CSV rows for trade-off curves.

use std::io::Write;

use qcd_core::simulation::MetricsReport;
use serde::{Serialize, Serializer};

pub const CSV_HEADER: &str =
    "detector,theta_true,A,far_hat,far_ci_lo,far_ci_hi,cadd_hat,cadd_se,pdc_hat,pdc_method,trials,censoring_rate,seed";

/// `x` with six significant digits, in the style of C's `%g`.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn g6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&sig6(*x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub detector: String,
    #[serde(serialize_with = "g6")]
    pub theta_true: f64,
    #[serde(rename = "A", serialize_with = "g6")]
    pub threshold: f64,
    #[serde(serialize_with = "g6")]
    pub far_hat: f64,
    #[serde(serialize_with = "g6")]
    pub far_ci_lo: f64,
    #[serde(serialize_with = "g6")]
    pub far_ci_hi: f64,
    #[serde(serialize_with = "g6")]
    pub cadd_hat: f64,
    #[serde(serialize_with = "g6")]
    pub cadd_se: f64,
    #[serde(serialize_with = "g6")]
    pub pdc_hat: f64,
    pub pdc_method: String,
    pub trials: u64,
    #[serde(serialize_with = "g6")]
    pub censoring_rate: f64,
    pub seed: u64,
}

impl CurveRow {
    pub fn new(detector: String, theta_true: f64, r: &MetricsReport) -> Self {
        CurveRow {
            detector,
            theta_true,
            threshold: r.threshold,
            far_hat: r.far.far,
            far_ci_lo: r.far.ci.lo,
            far_ci_hi: r.far.ci.hi,
            cadd_hat: r.cadd.cadd,
            cadd_se: r.cadd.cadd_se,
            pdc_hat: r.pdc.value,
            pdc_method: r.pdc.method.to_string(),
            trials: r.trials,
            censoring_rate: r.censoring_rate,
            seed: r.seed,
        }
    }
}

/// CSV writer with LF line endings; the header is written on creation.
pub struct CurveWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CurveWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        inner.write_record(CSV_HEADER.split(','))?;
        inner.flush()?;
        Ok(CurveWriter { inner })
    }

    /// Writes and flushes one row, so partial output is visible while a sweep runs.
    pub fn write(&mut self, row: &CurveRow) -> csv::Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

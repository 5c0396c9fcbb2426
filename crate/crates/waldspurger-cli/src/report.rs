//! Machine-readable run reports (canonical JSON and flat CSV).
//!
//! Field names are frozen:
//! {scenario, params, value_exact, value_float:{re,im}, expected, verdict,
//! anchor, seconds}. JSON objects are emitted with sorted keys (struct
//! fields are declared alphabetically; parameter maps are BTreeMaps), so
//! reports are byte-identical across runs and worker counts. Wall time is
//! recorded only when timings are requested, since it would break that
//! guarantee.

use num_rational::BigRational;
use serde::Serialize;
use std::collections::BTreeMap;
use waldspurger::{CycValue, SqrtQValue};

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct FloatVal {
    pub re: f64,
    pub im: f64,
}

/// One scenario outcome; serializes to the frozen schema.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub anchor: String,
    pub expected: serde_json::Value,
    pub params: BTreeMap<String, serde_json::Value>,
    pub scenario: String,
    pub seconds: f64,
    pub value_exact: serde_json::Value,
    pub value_float: FloatVal,
    pub verdict: String,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

/// "a/b" rendering of an exact rational.
pub fn rational_str(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Exact value rendering: a rational string when the value is rational,
/// otherwise the coefficient vector over the ambient root order.
pub fn cyc_json(v: &CycValue) -> serde_json::Value {
    if let Some(r) = v.as_rational() {
        return serde_json::Value::String(rational_str(&r));
    }
    let coeffs: Vec<serde_json::Value> = v
        .terms()
        .iter()
        .map(|(e, c)| {
            serde_json::json!([e, rational_str(c)])
        })
        .collect();
    serde_json::json!({ "order": v.order(), "coeffs": coeffs })
}

pub fn sqrtq_json(v: &SqrtQValue) -> serde_json::Value {
    if v.radical.is_zero() {
        cyc_json(&v.plain)
    } else {
        serde_json::json!({
            "plain": cyc_json(&v.plain),
            "radical": cyc_json(&v.radical),
            "sqrt_of": v.q,
        })
    }
}

/// One CSV row per report, flat columns in the frozen order.
pub fn to_csv<W: std::io::Write>(reports: &[RunReport], w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "scenario",
        "params",
        "value_exact",
        "value_float_re",
        "value_float_im",
        "expected",
        "verdict",
        "anchor",
        "seconds",
    ])?;
    for r in reports {
        wtr.write_record([
            r.scenario.clone(),
            serde_json::to_string(&r.params)?,
            serde_json::to_string(&r.value_exact)?,
            format!("{:e}", r.value_float.re),
            format!("{:e}", r.value_float.im),
            serde_json::to_string(&r.expected)?,
            r.verdict.clone(),
            r.anchor.clone(),
            format!("{:e}", r.seconds),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn to_json(reports: &[RunReport]) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

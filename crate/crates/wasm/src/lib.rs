//! Browser bindings for the demo page. Every export takes plain strings and
//! returns a JSON document, so the page needs no generated glue beyond
//! wasm-bindgen's own.

use condreach::bisection::{optimize, BisectionConfig, Probe, Variant};
use condreach::conditional::{build_transform, Query};
use condreach::parse::parse_model;
use condreach::rational::{format_rational, parse_rational, simplest_in, to_f64};
use condreach::{Direction, Mdp, Rational};
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn load(model: &str, direction: &str) -> Result<(Mdp, Query), String> {
    let m = parse_model(model).map_err(|e| e.to_string())?;
    let dir: Direction = direction.parse().map_err(|e: condreach::Error| e.to_string())?;
    let q = Query::from_labels(&m, "goal", "evidence", dir).map_err(|e| e.to_string())?;
    Ok((m, q))
}

fn rational_json(r: &Rational) -> Value {
    json!({ "exact": format_rational(r), "float": to_f64(r) })
}

/// Samples `λ ↦ V(λ)` at `points + 1` evenly spaced thresholds in `[0, 1]`
/// and reports the optimum where the curve crosses zero.
pub fn value_curve_json(model: &str, direction: &str, points: u32) -> Result<Value, String> {
    let (m, q) = load(model, direction)?;
    let t = build_transform::<Rational>(&m, &q).map_err(|e| e.to_string())?;
    let n = points.clamp(1, 400) as i64;
    let mut samples = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let lambda = Rational::new(k.into(), n.into());
        let out = t.threshold(&lambda).map_err(|e| e.to_string())?;
        samples.push(json!({
            "lambda": to_f64(&lambda),
            "value": to_f64(&out.value),
            "sign": out.sign.name(),
        }));
    }
    let opt = optimize(&m, &q, &BisectionConfig::exact(Variant::SternBrocot)).map_err(|e| e.to_string())?;
    Ok(json!({ "samples": samples, "optimum": rational_json(opt.estimate.value()) }))
}

fn probe_json(p: &Probe) -> Value {
    json!({
        "lambda": rational_json(&p.lambda),
        "pick": format!("{:?}", p.pick).to_lowercase(),
        "sign": p.sign.name(),
        "value": p.value,
        "lower": rational_json(&p.lower),
        "upper": rational_json(&p.upper),
    })
}

/// Runs one bisection variant exactly and returns every probe.
pub fn bisection_trace_json(model: &str, direction: &str, variant: &str) -> Result<Value, String> {
    let (m, q) = load(model, direction)?;
    let v: Variant = variant.parse().map_err(|e: condreach::Error| e.to_string())?;
    let opt = optimize(&m, &q, &BisectionConfig::exact(v)).map_err(|e| e.to_string())?;
    Ok(json!({
        "variant": v.name(),
        "result": rational_json(opt.estimate.value()),
        "iterations": opt.iterations,
        "probes": opt.trace.iter().map(probe_json).collect::<Vec<_>>(),
    }))
}

/// Simplest rational in an interval, with the Stern-Brocot descent that
/// reaches it (every mediant visited on the way down from 1/1).
pub fn simplest_rational_json(lo: &str, lo_closed: bool, hi: &str, hi_closed: bool) -> Result<Value, String> {
    let lo = parse_rational(lo)?;
    let hi = parse_rational(hi)?;
    if lo.is_negative() || hi > Rational::one() {
        return Err("interval must lie in [0, 1]".into());
    }
    if !(lo < hi || (lo == hi && lo_closed && hi_closed)) {
        return Err("interval is empty".into());
    }
    let x = simplest_in(&lo, lo_closed, &hi, hi_closed);
    let inside =
        |y: &Rational| (if lo_closed { *y >= lo } else { *y > lo }) && (if hi_closed { *y <= hi } else { *y < hi });
    // Descend from the mediant of 0/1 and 1/1 towards x.
    let (mut ln, mut ld, mut rn, mut rd) = (0i64, 1i64, 1i64, 1i64);
    let mut path = Vec::new();
    for _ in 0..64 {
        if ln == 0 && x.is_zero() {
            path.push(json!({ "exact": "0", "float": 0.0, "inside": inside(&Rational::zero()) }));
            break;
        }
        if rn == rd && x.is_one() {
            path.push(json!({ "exact": "1", "float": 1.0, "inside": inside(&Rational::one()) }));
            break;
        }
        let (mn, md) = (ln + rn, ld + rd);
        let mediant = Rational::new(mn.into(), md.into());
        path.push(json!({ "exact": format_rational(&mediant), "float": to_f64(&mediant), "inside": inside(&mediant) }));
        if mediant == x {
            break;
        }
        if x < mediant {
            (rn, rd) = (mn, md);
        } else {
            (ln, ld) = (mn, md);
        }
    }
    Ok(json!({
        "lower": rational_json(&lo),
        "upper": rational_json(&hi),
        "simplest": rational_json(&x),
        "path": path,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn value_curve(model: &str, direction: &str, points: u32) -> Result<String, JsError> {
    to_js(value_curve_json(model, direction, points))
}

#[wasm_bindgen]
pub fn bisection_trace(model: &str, direction: &str, variant: &str) -> Result<String, JsError> {
    to_js(bisection_trace_json(model, direction, variant))
}

#[wasm_bindgen]
pub fn simplest_rational(lo: &str, lo_closed: bool, hi: &str, hi_closed: bool) -> Result<String, JsError> {
    to_js(simplest_rational_json(lo, lo_closed, hi, hi_closed))
}

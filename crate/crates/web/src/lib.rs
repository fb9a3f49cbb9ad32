//! Browser bindings: a beam-focusing map, a single-instance solve and a
//! rate-versus-power curve. The `*_json` functions are plain Rust so they
//! can be exercised natively.

use noma_coexist::channel::near_field_channel;
use noma_coexist::geometry::{dbm_to_watts, Position, SystemConfig};
use noma_coexist::sim::{solve_document, Instance, Method, SolveDocument, SolveOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Normalized array gain `|a(p)^H a(focus)|^2 / (|a(p)|^2 |a(focus)|^2)`
/// on a `cols x rows` grid over `[0, x_max] x [-y_max, y_max]`, row-major
/// from the top row.
pub fn focus_map(
    antennas: usize,
    carrier_hz: f64,
    focus: Position,
    x_max: f64,
    y_max: f64,
    cols: usize,
    rows: usize,
) -> Result<Vec<f32>, String> {
    let system = SystemConfig {
        antennas,
        carrier_hz,
        ..Default::default()
    };
    let array = system.array();
    let lambda = system.wavelength();
    let beam = near_field_channel(&focus, &array, lambda).map_err(|e| e.to_string())?.entries;
    let beam = beam.normalize();
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        let y = y_max - 2.0 * y_max * (r as f64 + 0.5) / rows as f64;
        for c in 0..cols {
            let x = x_max * (c as f64 + 0.5) / cols as f64;
            let gain = match near_field_channel(&Position::new(x, y), &array, lambda) {
                Ok(ch) => (ch.entries.dotc(&beam)).norm_sqr() / ch.entries.norm_squared(),
                Err(_) => 0.0,
            };
            out.push(gain as f32);
        }
    }
    Ok(out)
}

/// Solves the document and returns the allocation and rate report as JSON.
pub fn solve_json(document: &str) -> Result<String, String> {
    let doc = SolveDocument::parse(document).map_err(|e| e.to_string())?;
    let out = solve_document(&doc).map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct CurvePoint {
    pdbm: f64,
    method: Method,
    sum_rate: f64,
    user_rate: Vec<f64>,
}

/// Sum rate of the document's method and the greedy baseline at each power.
pub fn rate_curve_json(document: &str, pdbm: &[f64]) -> Result<String, String> {
    let doc = SolveDocument::parse(document).map_err(|e| e.to_string())?;
    let inst = Instance::new(&doc.system(), doc.near_users.clone(), doc.far_users.clone()).map_err(|e| e.to_string())?;
    let mut methods = vec![Method::Greedy];
    if doc.method != Method::Greedy {
        methods.push(doc.method);
    }
    let opts = SolveOptions::default();
    let mut points = Vec::new();
    for &p in pdbm {
        for &method in &methods {
            let r = inst.solve(method, dbm_to_watts(p), &opts).map_err(|e| e.to_string())?;
            points.push(CurvePoint {
                pdbm: p,
                method,
                sum_rate: r.report.objective,
                user_rate: r.report.user_rate,
            });
        }
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = focusMap)]
#[allow(clippy::too_many_arguments)]
pub fn focus_map_js(
    antennas: usize,
    carrier_hz: f64,
    focus_x: f64,
    focus_y: f64,
    x_max: f64,
    y_max: f64,
    cols: usize,
    rows: usize,
) -> Result<Vec<f32>, JsError> {
    focus_map(antennas, carrier_hz, Position::new(focus_x, focus_y), x_max, y_max, cols, rows).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = solve)]
pub fn solve_js(document: &str) -> Result<String, JsError> {
    solve_json(document).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rateCurve)]
pub fn rate_curve_js(document: &str, pdbm: Vec<f64>) -> Result<String, JsError> {
    rate_curve_json(document, &pdbm).map_err(|e| JsError::new(&e))
}

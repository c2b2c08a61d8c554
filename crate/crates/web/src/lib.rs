//! Browser bindings for the mirror two-slit simulator. Every export takes and
//! returns JSON strings so the page needs no generated type glue.

use mirrorslit::design::validate;
use mirrorslit::geometry::Slit;
use mirrorslit::montecarlo::simulate_scan;
use mirrorslit::wavemodel::{detector_intensity, fringe_spacing, screen_intensity};
use mirrorslit::{Apparatus, OutcomeHypothesis, ScanConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Curves {
    fringe_spacing: f64,
    x: Vec<f64>,
    screen: Vec<f64>,
    detector1: Vec<f64>,
    detector2: Vec<f64>,
}

fn parse_apparatus(json: &str) -> Result<Apparatus, String> {
    let app: Apparatus = serde_json::from_str(json).map_err(|e| e.to_string())?;
    app.check().map_err(|e| e.to_string())?;
    Ok(app)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn reference_design_json() -> String {
    serde_json::to_string(&Apparatus::reference_design()).expect("serializable")
}

/// Noiseless screen and detector intensities on `points` positions spanning
/// `±periods` fringes.
pub fn curves_json(apparatus: &str, periods: f64, points: usize) -> Result<String, String> {
    let app = parse_apparatus(apparatus)?;
    if periods.is_nan() || periods <= 0.0 || points < 2 {
        return Err("need periods > 0 and at least two points".into());
    }
    let f = fringe_spacing(&app);
    let x = ScanConfig::uniform(-periods * f, periods * f, points, 1, 0).x_positions;
    to_json(&Curves {
        fringe_spacing: f,
        screen: x.iter().map(|&x| screen_intensity(&app, x)).collect(),
        detector1: x.iter().map(|&x| detector_intensity(&app, x, Slit::One)).collect(),
        detector2: x.iter().map(|&x| detector_intensity(&app, x, Slit::Two)).collect(),
        x,
    })
}

pub fn validate_json(apparatus: &str) -> Result<String, String> {
    let app = parse_apparatus(apparatus)?;
    let report = validate(&app, 3.0 * fringe_spacing(&app)).map_err(|e| e.to_string())?;
    to_json(&report)
}

/// Photon-count scan over `±3 F_s` with 41 positions.
pub fn simulate_json(apparatus: &str, hypothesis: &str, photons: u32, seed: u64) -> Result<String, String> {
    let app = parse_apparatus(apparatus)?;
    let hyp: OutcomeHypothesis = hypothesis.parse().map_err(|e: mirrorslit::Error| e.to_string())?;
    let f = fringe_spacing(&app);
    let config = ScanConfig::uniform(-3.0 * f, 3.0 * f, 41, photons.into(), seed);
    let summary = simulate_scan(&app, &config, &hyp).map_err(|e| e.to_string())?;
    to_json(&summary)
}

#[wasm_bindgen(js_name = referenceDesign)]
pub fn reference_design() -> String {
    reference_design_json()
}

#[wasm_bindgen]
pub fn curves(apparatus: &str, periods: f64, points: usize) -> Result<String, JsError> {
    curves_json(apparatus, periods, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = validateDesign)]
pub fn validate_design(apparatus: &str) -> Result<String, JsError> {
    validate_json(apparatus).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(apparatus: &str, hypothesis: &str, photons: u32, seed: u64) -> Result<String, JsError> {
    simulate_json(apparatus, hypothesis, photons, seed).map_err(|e| JsError::new(&e))
}

//! wasm-bindgen entry points for `www/index.html`.
//!
//! Each export returns a JSON string; the computations live in [`demo`] so
//! they can be tested on the host.

use wasm_bindgen::prelude::*;

pub mod demo;

fn json<T: serde::Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// Region probabilities at `theta` and the region-III sweep over `[0, π]`.
#[wasm_bindgen]
pub fn circuit(sign: &str, theta: f64, points: usize) -> Result<String, JsError> {
    json(demo::circuit(sign, theta, points))
}

/// Simulated tomography of one region state.
#[wasm_bindgen]
pub fn tomography(sign: &str, region: &str, theta: f64, shots: u32, seed: u32, noise: f64) -> Result<String, JsError> {
    json(demo::tomography(sign, region, theta, shots.into(), seed.into(), noise))
}

#[wasm_bindgen]
pub fn discriminate(theta: f64) -> Result<String, JsError> {
    json(Ok(demo::discriminate(theta)))
}

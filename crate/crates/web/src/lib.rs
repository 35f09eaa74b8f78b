//! Browser bindings. Every export is a thin wrapper over a plain function in
//! [`api`] so the logic can be tested natively.

use wasm_bindgen::prelude::*;

pub mod api;
pub mod layout;

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// Annealing weight for epochs `0..=epochs`.
#[wasm_bindgen]
pub fn gamma_schedule(gamma0: f64, zero_epoch: usize, epochs: usize) -> Result<Vec<f64>, JsValue> {
    api::gamma_schedule(gamma0, zero_epoch, epochs).map_err(js_err)
}

/// Seeded Erdős–Rényi graph as edge-list text.
#[wasm_bindgen]
pub fn generate_graph(vertices: usize, edges: usize, seed: u64) -> Result<String, JsValue> {
    api::generate_graph(vertices, edges, seed).map_err(js_err)
}

/// Trains on `instance` (edge list or `.hgr` text) and returns the result,
/// the epoch trace and a layout as JSON. `options` is a JSON object, see
/// [`api::SolveOptions`].
#[wasm_bindgen]
pub fn solve(problem: &str, instance: &str, format: &str, options: &str) -> Result<String, JsValue> {
    api::solve(problem, instance, format, options).map_err(js_err)
}

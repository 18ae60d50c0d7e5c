//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain function that returns
//! `Result<String, String>`, so the logic can be tested natively.

use clsc_core::analysis::{sweep, to_csv, SweepSpec};
use clsc_core::closed_form::equilibrium;
use clsc_core::oracle::monte_carlo_demand;
use clsc_core::{ModelId, Params};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Demo page cap on Monte Carlo draws.
pub const MAX_SIMULATION_DRAWS: usize = 2_000_000;

fn model(name: &str) -> Result<ModelId, String> {
    name.parse::<ModelId>().map_err(|e| e.to_string())
}

fn params(alpha: f64, c_m: f64, c_r: f64, s: f64) -> Result<Params, String> {
    Params::new(alpha, c_m, c_r, s).map_err(|e| e.to_string())
}

pub fn equilibrium_inner(model_name: &str, alpha: f64, c_m: f64, c_r: f64, s: f64) -> Result<String, String> {
    let eq = equilibrium(model(model_name)?, &params(alpha, c_m, c_r, s)?).map_err(|e| e.to_string())?;
    serde_json::to_string(&eq).map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_inner(model_name: &str, alpha_from: f64, alpha_to: f64, alpha_step: f64, c_m: f64, c_r: f64, s: f64) -> Result<String, String> {
    let spec = SweepSpec { model: model(model_name)?, alpha_from, alpha_to, alpha_step, c_m, c_r, s };
    sweep(&spec).map(|rows| to_csv(&rows)).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Simulation<'a> {
    closed_form: &'a clsc_core::DemandProfile,
    simulated: &'a clsc_core::oracle::MonteCarloDemand,
    /// None when a closed-form share is out of range and the z-score is undefined.
    max_z: Option<f64>,
}

/// Simulates demand at the closed-form equilibrium prices.
#[allow(clippy::too_many_arguments)]
pub fn simulate_inner(model_name: &str, alpha: f64, c_m: f64, c_r: f64, s: f64, n: usize, seed: u64) -> Result<String, String> {
    if n == 0 || n > MAX_SIMULATION_DRAWS {
        return Err(format!("draws must be between 1 and {MAX_SIMULATION_DRAWS}"));
    }
    let p = params(alpha, c_m, c_r, s)?;
    let eq = equilibrium(model(model_name)?, &p).map_err(|e| e.to_string())?;
    let mc = monte_carlo_demand(&eq.decisions, &p, n, seed).map_err(|e| e.to_string())?;
    let out = Simulation { closed_form: &eq.demand, simulated: &mc, max_z: Some(mc.max_z(&eq.demand)).filter(|z| z.is_finite()) };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn equilibrium_json(model: &str, alpha: f64, c_m: f64, c_r: f64, s: f64) -> Result<String, JsError> {
    equilibrium_inner(model, alpha, c_m, c_r, s).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep_csv(model: &str, alpha_from: f64, alpha_to: f64, alpha_step: f64, c_m: f64, c_r: f64, s: f64) -> Result<String, JsError> {
    sweep_inner(model, alpha_from, alpha_to, alpha_step, c_m, c_r, s).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_json(model: &str, alpha: f64, c_m: f64, c_r: f64, s: f64, n: u32, seed: u32) -> Result<String, JsError> {
    simulate_inner(model, alpha, c_m, c_r, s, n as usize, seed as u64).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_round_trips() {
        let v: serde_json::Value = serde_json::from_str(&equilibrium_inner("m", 0.9, 0.15, 0.12, 0.02).unwrap()).unwrap();
        let p_m = v["decisions"]["p_m"].as_f64().unwrap();
        assert!((p_m - 0.648387).abs() < 1e-6);
    }

    #[test]
    fn errors_are_strings() {
        assert!(equilibrium_inner("x", 0.5, 1.0, 0.5, 0.2).is_err());
        assert!(equilibrium_inner("r", 2.0 / 9.0, 1.0, 0.5, 0.2).unwrap_err().contains("2/9"));
        assert!(simulate_inner("m", 0.5, 1.0, 0.5, 0.2, 0, 1).is_err());
    }

    #[test]
    fn sweep_has_header_and_rows() {
        let csv = sweep_inner("r", 0.3, 0.5, 0.1, 1.0, 0.5, 0.2).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("model,"));
    }

    #[test]
    fn simulation_tracks_closed_form() {
        let v: serde_json::Value = serde_json::from_str(&simulate_inner("m", 0.9, 0.15, 0.12, 0.02, 200_000, 5).unwrap()).unwrap();
        assert!(v["max_z"].as_f64().unwrap() < 5.0);
    }
}

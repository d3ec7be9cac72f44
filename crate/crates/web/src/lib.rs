//! WebAssembly bindings for the browser demo. Every entry point returns a
//! JSON string; the page in `www/` plots it.

use liftdeconv::certificate::certify_instance;
use liftdeconv::harness::trial_instance;
use liftdeconv::io::VarianceMode;
use liftdeconv::lifting::synthesize;
use liftdeconv::linalg::CVector;
use liftdeconv::rng::derive_seed;
use liftdeconv::solver::{alm_solve, SolverConfig};
use liftdeconv::spectral::FilterSpec;
use liftdeconv::superres::{build_instance, random_trains, solve_instance, TrainLevels, WaveletBasis};
use liftdeconv::{Result, C64};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn real_parts(v: &[C64]) -> Vec<f64> {
    v.iter().map(|z| z.re).collect()
}

/// Solve a random instance and return the true and estimated filters.
/// The estimate is `X m / ||m||^2`, which removes the scale ambiguity.
pub fn recover_json(k: usize, l: usize, n: usize, seed: u64, outer_iters: usize) -> Result<Value> {
    let (ens, gt) = trial_instance(k, l, n, None, seed, VarianceMode::InvLen)?;
    let y = synthesize(&gt, &ens)?;
    let config = SolverConfig {
        seed: derive_seed(seed, 3, 0),
        ..SolverConfig::multipliers(outer_iters)
    };
    let res = alm_solve(&y, &ens, &config, Some(&gt))?;
    let m = CVector::from_vec(gt.m_complex());
    let f = &res.factors;
    let h_est = &f.r1 * (f.r2.adjoint() * &m) / C64::new(m.norm_squared(), 0.0);
    Ok(json!({
        "h_true": real_parts(&gt.h),
        "h_est": real_parts(h_est.as_slice()),
        "result": res.record(),
    }))
}

pub fn certify_json(k: usize, l: usize, n: usize, seed: u64) -> Result<Value> {
    let (ens, gt) = trial_instance(k, l, n, None, seed, VarianceMode::InvLen)?;
    let row = certify_instance(&gt, &ens, seed, 2.0, 100)?;
    let inverse = row.inverse.map(|r| {
        json!({
            "tangent_residual": r.tangent_residual,
            "complement": r.complement_norm,
            "certified": r.certified(),
        })
    });
    Ok(json!({
        "gamma": row.direct.gamma,
        "direct": {
            "tangent_residual": row.direct.tangent_residual,
            "complement": row.direct.complement_norm,
            "certified": row.direct.certified(),
        },
        "inverse": inverse,
        "cg_iterations": row.cg_iterations,
        "tangent_deviation": row.tangent_deviation,
    }))
}

/// Low-pass wavelet trains of length 128; returns the first signal, its
/// observation and its recovery.
pub fn super_resolve_json(n: usize, k: usize, width: f64, cutoff: usize, wavelet: &str, seed: u64) -> Result<Value> {
    let basis = WaveletBasis::full(wavelet.parse()?, 128)?;
    let signals = random_trains(n, k, seed, &basis, TrainLevels::default())?;
    let filter = FilterSpec::new(128, width, cutoff)?;
    let config = SolverConfig {
        seed,
        ..SolverConfig::superres()
    };
    let inst = build_instance(&signals, filter, k, &basis)?;
    let res = solve_instance(&inst, &config)?;
    Ok(json!({
        "truth": signals[0],
        "lowpass": inst.observations[0],
        "recovered": res.signals[0],
        "signal_errors": res.signal_errors,
        "baseline_errors": res.baseline_errors,
        "filter_error": res.filter_error,
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn recover(k: usize, l: usize, n: usize, seed: u32, outer_iters: usize) -> std::result::Result<String, JsError> {
    to_js(recover_json(k, l, n, seed.into(), outer_iters))
}

#[wasm_bindgen]
pub fn certify(k: usize, l: usize, n: usize, seed: u32) -> std::result::Result<String, JsError> {
    to_js(certify_json(k, l, n, seed.into()))
}

#[wasm_bindgen]
pub fn super_resolve(
    n: usize,
    k: usize,
    width: f64,
    cutoff: usize,
    wavelet: &str,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(super_resolve_json(n, k, width, cutoff, wavelet, seed.into()))
}

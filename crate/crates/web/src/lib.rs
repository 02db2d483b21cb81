//! wasm-bindgen exports for `www/index.html`.
//!
//! Each export parses a problem document and returns a flat `Float64Array`
//! or a JSON string. The `*_impl` functions hold the logic so they can be
//! tested natively.

use koopcert::numerics::FlowIntegrator;
use koopcert::report::{Problem, TheoremChoice};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

fn problem(spec: &str) -> Result<Problem, String> {
    Problem::from_json(spec).map_err(|e| e.to_string())
}

fn real_slice_dim(p: &Problem) -> Result<(), String> {
    if p.field.dim() == 2 {
        Ok(())
    } else {
        Err(format!(
            "the real-slice views need n = 2, got n = {}",
            p.field.dim()
        ))
    }
}

pub fn certify_impl(spec: &str, rho: f64) -> Result<String, String> {
    let p = problem(spec)?;
    let rho = (rho > 0.0).then_some(rho);
    let report = p
        .certify(TheoremChoice::Auto, rho, None)
        .map_err(|e| e.to_string())?;
    report.to_json().map_err(|e| e.to_string())
}

/// Trajectories from a `grid × grid` lattice on the real plane
/// `[−extent, extent]²`. Layout: `[count, len_1, x, y, x, y, …, len_2, …]`.
pub fn phase_portrait_impl(
    spec: &str,
    extent: f64,
    grid: usize,
    t_end: f64,
    h: f64,
) -> Result<Vec<f64>, String> {
    let p = problem(spec)?;
    real_slice_dim(&p)?;
    let extent = extent.min(p.field.mu());
    let steps = (t_end / h).ceil().max(1.0) as usize;
    let integ = FlowIntegrator::new(h, t_end)
        .map_err(|e| e.to_string())?
        .recording_every(steps.div_ceil(200));
    let mut out = vec![0.0];
    let mut count = 0;
    for i in 0..grid {
        for j in 0..grid {
            let at = |k: usize| {
                if grid == 1 {
                    0.0
                } else {
                    -extent + 2.0 * extent * k as f64 / (grid - 1) as f64
                }
            };
            let z0 = [Complex64::new(at(i), 0.0), Complex64::new(at(j), 0.0)];
            // a stiff start is skipped rather than failing the whole picture
            let Ok(traj) = integ.integrate(&p.field, &z0) else {
                continue;
            };
            out.push(traj.states.len() as f64);
            for z in &traj.states {
                out.push(z[0].re);
                out.push(z[1].re);
            }
            count += 1;
        }
    }
    out[0] = count as f64;
    Ok(out)
}

/// `V` and `V̇` on a `res × res` grid over the real square `[−ρ, ρ]²`, row
/// by row from the top. Layout: `[scale, V…, V̇…]`.
pub fn lyapunov_heatmap_impl(spec: &str, rho: f64, res: usize) -> Result<Vec<f64>, String> {
    let p = problem(spec)?;
    real_slice_dim(&p)?;
    let cert = p
        .certificate(TheoremChoice::Auto, rho, 0)
        .map_err(|e| e.to_string())?;
    let v = p
        .lyapunov_function(&cert, None)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| {
            format!(
                "radius {rho} is not certified (rho_sup = {})",
                cert.criterion.rho_sup()
            )
        })?;
    let mut values = Vec::with_capacity(res * res);
    let mut rates = Vec::with_capacity(res * res);
    for row in 0..res {
        for col in 0..res {
            let x = -rho + 2.0 * rho * (col as f64 + 0.5) / res as f64;
            let y = rho - 2.0 * rho * (row as f64 + 0.5) / res as f64;
            let z = [Complex64::new(x, 0.0), Complex64::new(y, 0.0)];
            values.push(v.value(&z));
            rates.push(v.derivative(&p.field, &z));
        }
    }
    let mut out = vec![v.scale];
    out.extend(values);
    out.extend(rates);
    Ok(out)
}

#[wasm_bindgen]
pub fn certify(spec: &str, rho: f64) -> Result<String, JsValue> {
    certify_impl(spec, rho).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phase_portrait(
    spec: &str,
    extent: f64,
    grid: usize,
    t_end: f64,
    h: f64,
) -> Result<Vec<f64>, JsValue> {
    phase_portrait_impl(spec, extent, grid, t_end, h).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lyapunov_heatmap(spec: &str, rho: f64, res: usize) -> Result<Vec<f64>, JsValue> {
    lyapunov_heatmap_impl(spec, rho, res).map_err(|e| JsValue::from_str(&e))
}

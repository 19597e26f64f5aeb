//! Browser bindings: classification report, weight profile and hitting-density curve.
//!
//! Every export returns a JSON string. The plain functions are usable natively.

use kothe_shifts::classify::classify;
use kothe_shifts::construct::{
    build_b, build_blocks, build_chaotic_weight, build_fhc_nonchaotic_weight, union_density, BlockParams,
};
use kothe_shifts::orbit::{build_fhc_vector, hitting_density};
use kothe_shifts::shifts::WeightSeq;
use kothe_shifts::spaces::BUILTIN_SPACES;
use kothe_shifts::{FiniteVector, SearchConfig, SpaceSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_HORIZON: usize = 200_000;

fn space(name: &str) -> Result<SpaceSpec, String> {
    SpaceSpec::builtin(name).map_err(|e| e.to_string())
}

fn config(horizon: usize) -> Result<SearchConfig, String> {
    if !(16..=MAX_HORIZON).contains(&horizon) {
        return Err(format!("horizon must lie in 16..={MAX_HORIZON}"));
    }
    Ok(SearchConfig::default().with_horizon(horizon))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Names accepted by the other functions.
pub fn space_names() -> Vec<String> {
    BUILTIN_SPACES.iter().map(|s| s.to_string()).collect()
}

/// Full classification of a builtin space, plus its text summary.
pub fn classify_json(name: &str, horizon: usize) -> Result<String, String> {
    let c = classify(&space(name)?, &config(horizon)?);
    to_json(&serde_json::json!({ "summary": c.summary(), "classification": c }))
}

#[derive(Serialize)]
struct WeightProfile {
    label: String,
    n: Vec<usize>,
    ln_w: Vec<f64>,
    ln_v: Vec<f64>,
    block_starts: Vec<usize>,
}

fn sample_points(horizon: usize, points: usize) -> Vec<usize> {
    let points = points.clamp(2, 2000);
    let mut ns: Vec<usize> = (0..points).map(|i| 1 + i * (horizon - 1) / (points - 1)).collect();
    ns.dedup();
    ns
}

fn fhc_weight(s: &SpaceSpec, cfg: &SearchConfig) -> Result<(WeightSeq, kothe_shifts::construct::Blocks), String> {
    let b = build_b(s, None, 0.5).map_err(|e| e.to_string())?;
    let blocks = build_blocks(3, cfg.horizon, &BlockParams::default()).map_err(|e| e.to_string())?;
    let c = build_fhc_nonchaotic_weight(s, &b, &blocks, cfg).map_err(|e| e.to_string())?;
    Ok((c.weight, blocks))
}

/// `ln w_n` and `ln v_n` at `points` sample indices; `kind` is `chaotic` or `fhc`.
pub fn weight_profile_json(name: &str, kind: &str, horizon: usize, points: usize) -> Result<String, String> {
    let s = space(name)?;
    let cfg = config(horizon)?;
    let (w, starts) = match kind {
        "chaotic" => (
            build_chaotic_weight(&s, &cfg).map_err(|e| e.to_string())?.weight,
            Vec::new(),
        ),
        "fhc" => {
            let (w, blocks) = fhc_weight(&s, &cfg)?;
            (w, blocks.starts_within(horizon))
        }
        other => return Err(format!("unknown weight kind '{other}'")),
    };
    let n = sample_points(horizon, points);
    to_json(&WeightProfile {
        label: w.label().to_string(),
        ln_w: n.iter().map(|&k| w.ln_w(k)).collect(),
        ln_v: n.iter().map(|&k| w.ln_v(k)).collect(),
        n,
        block_starts: starts,
    })
}

#[derive(Serialize)]
struct DensityCurve {
    n: Vec<usize>,
    cum_density: Vec<f64>,
    hits: usize,
    density: f64,
    blocks_density: f64,
}

/// Cumulative hitting density of `e_0` under the non-chaotic frequently hypercyclic weight.
pub fn hitting_curve_json(name: &str, horizon: usize, delta: f64, points: usize) -> Result<String, String> {
    if !(delta > 0.0) {
        return Err("delta must be positive".into());
    }
    let s = space(name)?;
    let cfg = config(horizon)?;
    let (w, blocks) = fhc_weight(&s, &cfg)?;
    let target = FiniteVector::unit(0);
    let x = build_fhc_vector(&w, &blocks, std::slice::from_ref(&target)).map_err(|e| e.to_string())?;
    let rep = hitting_density(&s, &x, &target, 1, delta, horizon, 4);
    let n = sample_points(horizon, points);
    to_json(&DensityCurve {
        cum_density: n.iter().map(|&k| rep.rows[k].cum_density).collect(),
        n,
        hits: rep.hits,
        density: rep.density,
        blocks_density: union_density(&blocks),
    })
}

#[wasm_bindgen(js_name = spaceNames)]
pub fn space_names_js() -> String {
    serde_json::to_string(&space_names()).unwrap_or_default()
}

#[wasm_bindgen(js_name = classifyReport)]
pub fn classify_report(name: &str, horizon: usize) -> Result<String, JsValue> {
    classify_json(name, horizon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = weightProfile)]
pub fn weight_profile(name: &str, kind: &str, horizon: usize, points: usize) -> Result<String, JsValue> {
    weight_profile_json(name, kind, horizon, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = hittingCurve)]
pub fn hitting_curve(name: &str, horizon: usize, delta: f64, points: usize) -> Result<String, JsValue> {
    hitting_curve_json(name, horizon, delta, points).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn classify_report_carries_symbol_and_summary() {
        let v = parse(&classify_json("disk", 20_000).unwrap());
        assert_eq!(v["classification"]["symbol"], "=");
        assert!(v["summary"].as_str().unwrap().contains("class: ="));
        assert!(classify_json("nowhere", 1000).is_err());
        assert!(classify_json("disk", 4).is_err());
    }

    #[test]
    fn weight_profiles() {
        let v = parse(&weight_profile_json("entire", "fhc", 30_000, 50).unwrap());
        assert_eq!(v["n"].as_array().unwrap().len(), 50);
        assert!(!v["block_starts"].as_array().unwrap().is_empty());
        let c = parse(&weight_profile_json("disk", "chaotic", 1000, 10).unwrap());
        let ln_w = c["ln_w"].as_array().unwrap();
        assert!(ln_w.iter().all(|x| (x.as_f64().unwrap() - 2f64.ln()).abs() < 1e-12));
        assert!(weight_profile_json("disk", "fhc", 30_000, 10).is_err());
    }

    #[test]
    fn hitting_curve_tracks_the_blocks() {
        let v = parse(&hitting_curve_json("entire", 30_000, 0.1, 20).unwrap());
        let d = v["density"].as_f64().unwrap();
        assert!(d >= 0.9 * v["blocks_density"].as_f64().unwrap());
        assert_eq!(v["cum_density"].as_array().unwrap().len(), 20);
    }
}

//! Browser bindings. Every export returns a JSON string; the plain functions
//! underneath are what the native tests call.

use mace_core::advantage::{advantage_continuous, advantage_discrete};
use mace_core::density::{BinningScheme, DensityPair, DensitySpec, KdeConfig};
use mace_core::experiment::class_sizes;
use mace_core::individual::{dp_bound, f_p_hat, individual_risk_accuracy, individual_risk_generalized};
use mace_core::oracle::{continuous_truth_tv, sample_toy, ToySpec};
use mace_core::{named_metric, LabeledQuerySet, QueryOutput};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn json<T: Serialize>(value: &T) -> Out {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    epsilon: f64,
    bound: f64,
}

/// DP cap on the advantage for `steps + 1` budgets in `[0, eps_max]`.
pub fn dp_curve(prior: f64, eps_max: f64, steps: usize) -> Out {
    if !(eps_max > 0.0 && eps_max.is_finite()) || steps == 0 {
        return Err("need eps_max > 0 and at least one step".into());
    }
    let points = (0..=steps)
        .map(|i| {
            let epsilon = eps_max * i as f64 / steps as f64;
            dp_bound(epsilon, prior).map(|b| CurvePoint {
                epsilon,
                bound: b.bound,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    json(&points)
}

#[derive(Serialize)]
struct NormalAudit {
    truth: f64,
    w_n: f64,
    u_n: f64,
    radius: f64,
    n: usize,
    /// Evaluation grid with fitted densities and the plug-in risk `|f̂_p|`.
    x: Vec<f64>,
    member_density: Vec<f64>,
    nonmember_density: Vec<f64>,
    risk: Vec<f64>,
}

/// Members from N(0, 1), non-members from N(gap, 1), both estimators, and
/// curves for plotting.
pub fn normal_audit(gap: f64, n: usize, bins: usize, seed: u64) -> Out {
    let err = |e: mace_core::Error| e.to_string();
    let (n1, n2) = class_sizes(n, 0.5);
    if n1 < 2 || n2 < 2 {
        return Err("need at least 4 samples".into());
    }
    let members = sample_toy(&ToySpec::normal(0.0, 1.0), n1, seed).map_err(err)?;
    let nonmembers = sample_toy(&ToySpec::normal(gap, 1.0), n2, seed.wrapping_add(1)).map_err(err)?;
    let set = LabeledQuerySet::from_parts(members, nonmembers, 0.5).map_err(err)?;
    let scheme = BinningScheme::fit(set.outputs(), bins).map_err(err)?;
    let discrete = advantage_discrete(&set, Some(&scheme), 0.05).map_err(err)?;
    let kde = KdeConfig::default();
    let continuous = advantage_continuous(&set, &kde, 0.05, None, seed).map_err(err)?;
    let pair = DensityPair::fit(&set, &DensitySpec::Continuous(kde)).map_err(err)?;

    let (lo, hi) = (gap.min(0.0) - 4.0, gap.max(0.0) + 4.0);
    let x: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    let mut member_density = Vec::with_capacity(x.len());
    let mut nonmember_density = Vec::with_capacity(x.len());
    let mut risk = Vec::with_capacity(x.len());
    for &xi in &x {
        let q = QueryOutput::scalar(xi).map_err(err)?;
        member_density.push(pair.members.density_at(&q).map_err(err)?);
        nonmember_density.push(pair.nonmembers.density_at(&q).map_err(err)?);
        risk.push(f_p_hat(&q, &pair.members, &pair.nonmembers, 0.5).map_or(0.0, f64::abs));
    }
    json(&NormalAudit {
        truth: continuous_truth_tv(0.0, gap, 1.0).map_err(err)?,
        w_n: discrete.point,
        u_n: continuous.point,
        radius: discrete.concentration_radius.unwrap_or(f64::NAN),
        n: set.len(),
        x,
        member_density,
        nonmember_density,
        risk,
    })
}

#[derive(Serialize)]
struct CellRisk {
    risk: f64,
    lower: f64,
    upper: f64,
    f_p: f64,
    am: Option<f64>,
    am_lower: Option<f64>,
    am_upper: Option<f64>,
    am_error: Option<String>,
}

/// Risk at one cell from counts: `k1` of `n1` members and `k2` of `n2`
/// non-members landed in it.
pub fn cell_risk(k1: u32, n1: u32, k2: u32, n2: u32, prior: f64, delta: f64) -> Out {
    if k1 > n1 || k2 > n2 || n1 == 0 || n2 == 0 {
        return Err("need k ≤ n and n > 0 in both pools".into());
    }
    let err = |e: mace_core::Error| e.to_string();
    let pool = |k: u32, n: u32| -> Vec<QueryOutput> {
        (0..n).map(|i| QueryOutput::scalar(if i < k { 0.0 } else { 1.0 }).unwrap()).collect()
    };
    let set = LabeledQuerySet::from_parts(pool(k1, n1), pool(k2, n2), prior).map_err(err)?;
    let pair = DensityPair::fit(&set, &DensitySpec::Discrete { bins: None }).map_err(err)?;
    let z = QueryOutput::scalar(0.0).map_err(err)?;
    let acc = individual_risk_accuracy(&z, &pair.members, &pair.nonmembers, prior, delta).map_err(err)?;
    let am = named_metric("AM", prior).map_err(err)?;
    let g = individual_risk_generalized(&z, &pair.members, &pair.nonmembers, prior, &am, delta);
    json(&CellRisk {
        risk: acc.point,
        lower: acc.ci.lower,
        upper: acc.ci.upper,
        f_p: acc.f_p_signed,
        am: g.as_ref().ok().map(|r| r.point),
        am_lower: g.as_ref().ok().map(|r| r.ci.lower),
        am_upper: g.as_ref().ok().map(|r| r.ci.upper),
        am_error: g.err().map(|e| e.to_string()),
    })
}

fn js(out: Out) -> Result<String, JsError> {
    out.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dpCurve)]
pub fn dp_curve_js(prior: f64, eps_max: f64, steps: usize) -> Result<String, JsError> {
    js(dp_curve(prior, eps_max, steps))
}

#[wasm_bindgen(js_name = normalAudit)]
pub fn normal_audit_js(gap: f64, n: usize, bins: usize, seed: u32) -> Result<String, JsError> {
    js(normal_audit(gap, n, bins, u64::from(seed)))
}

#[wasm_bindgen(js_name = cellRisk)]
pub fn cell_risk_js(k1: u32, n1: u32, k2: u32, n2: u32, prior: f64, delta: f64) -> Result<String, JsError> {
    js(cell_risk(k1, n1, k2, n2, prior, delta))
}

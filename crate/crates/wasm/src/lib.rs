//! Browser bindings. Every export takes plain strings and numbers and
//! returns a JSON document; failures are thrown as JS strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cohort::bayes::{posterior_mean, posterior_update, DirichletRows, TransitionCounts};
use cohort::compare::{compare, CompareThresholds};
use cohort::microsim::replicate;
use cohort::modelfile::{LoadOptions, Model};
use cohort::moment_trajectory;

/// Largest replication count the demo accepts; keeps the page responsive.
pub const MAX_REPLICATIONS: u32 = 5000;

#[derive(Serialize)]
struct Trajectory {
    states: Vec<String>,
    n0: u64,
    /// `mean[cycle][state]`
    mean: Vec<Vec<f64>>,
    sd: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Comparison {
    analytic: Trajectory,
    empirical: Trajectory,
    replications: usize,
    seed: u64,
    max_abs_z: f64,
    fraction_within_strict: f64,
    ratio_range: Option<(f64, f64)>,
    passed: bool,
}

#[derive(Serialize)]
struct Posterior {
    states: Vec<String>,
    alpha: Vec<Vec<f64>>,
    mean: Vec<Vec<f64>>,
}

fn load(text: &str) -> Result<Model, String> {
    Model::parse(text, LoadOptions::default())
        .map(|(m, _)| m)
        .map_err(|e| e.to_string())
}

fn exact(model: &Model) -> Result<Trajectory, String> {
    let traj = moment_trajectory(&model.spec).map_err(|e| e.to_string())?;
    Ok(Trajectory {
        states: model.spec.state_space().labels().to_vec(),
        n0: traj.n0,
        mean: traj.cycles.iter().map(|c| c.mean.clone()).collect(),
        sd: traj
            .cycles
            .iter()
            .map(|c| c.variance().into_iter().map(f64::sqrt).collect())
            .collect(),
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Exact mean and SD of every state count at every cycle.
pub fn exact_moments_json(model_text: &str) -> Result<String, String> {
    to_json(&exact(&load(model_text)?)?)
}

/// Microsimulation next to the exact moments, with the comparison verdict.
pub fn simulate_compare_json(
    model_text: &str,
    replications: u32,
    seed: u64,
) -> Result<String, String> {
    if replications > MAX_REPLICATIONS {
        return Err(format!(
            "at most {MAX_REPLICATIONS} replications in the browser"
        ));
    }
    let model = load(model_text)?;
    let analytic = exact(&model)?;
    let summary = replicate(&model.spec, replications as usize, seed).map_err(|e| e.to_string())?;
    let traj = moment_trajectory(&model.spec).map_err(|e| e.to_string())?;
    let report =
        compare(&summary, &traj, CompareThresholds::default()).map_err(|e| e.to_string())?;
    let empirical = Trajectory {
        states: analytic.states.clone(),
        n0: summary.n0,
        mean: summary.empirical_mean.clone(),
        sd: summary
            .empirical_variance
            .iter()
            .map(|row| row.iter().map(|v| v.sqrt()).collect())
            .collect(),
    };
    to_json(&Comparison {
        analytic,
        empirical,
        replications: summary.replications,
        seed,
        max_abs_z: report.max_abs_z,
        fraction_within_strict: report.fraction_within_strict,
        ratio_range: report.ratio_range,
        passed: report.passed,
    })
}

/// Conjugate update of a flat Dirichlet(`prior_alpha`) prior with a dense
/// count matrix: one line per origin state, whitespace-separated integers.
pub fn posterior_json(counts_text: &str, prior_alpha: f64) -> Result<String, String> {
    let rows: Vec<Vec<u64>> = counts_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<u64>()
                        .map_err(|_| format!("row {}: `{t}` is not a whole number", i + 1))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let counts = TransitionCounts::from_rows(&rows).map_err(|e| e.to_string())?;
    let s = counts.dim();
    let prior = DirichletRows::new(&vec![vec![prior_alpha; s]; s]).map_err(|e| e.to_string())?;
    let post = posterior_update(&prior, &counts).map_err(|e| e.to_string())?;
    let mean = posterior_mean(&post);
    to_json(&Posterior {
        states: (1..=s).map(|k| format!("S{k}")).collect(),
        alpha: post.to_rows(),
        mean: mean.matrices()[0].to_rows(),
    })
}

#[wasm_bindgen(js_name = exactMoments)]
pub fn exact_moments(model_text: &str) -> Result<String, JsValue> {
    exact_moments_json(model_text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = simulateCompare)]
pub fn simulate_compare(model_text: &str, replications: u32, seed: f64) -> Result<String, JsValue> {
    if !(seed >= 0.0 && seed.fract() == 0.0 && seed <= 2f64.powi(53)) {
        return Err(JsValue::from_str("seed must be a non-negative integer"));
    }
    simulate_compare_json(model_text, replications, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn posterior(counts_text: &str, prior_alpha: f64) -> Result<String, JsValue> {
    posterior_json(counts_text, prior_alpha).map_err(|e| JsValue::from_str(&e))
}

//! Declarative experiment specs in, reproducible reports out: parsing and
//! validation of the JSON spec, the command implementations behind the CLI,
//! and rendering to JSON, CSV, or Markdown with identical numbers at 12
//! significant digits.

use crate::baselines::{
    choquet_expected_utility, default_utility_family, ellsberg_convex_capacity, full_prior_set,
    lower_envelope_capacity, maxmin_expected_utility, second_order_expected_utility,
    seut_pattern_feasibility, variational_expected_utility, PhiSpec, PreferencePattern,
};
use crate::choice::{choice_weights, fit_marginals, min_l1_joint_fit, JointDistribution};
use crate::ellsberg::{find_pattern_model, MechanismTag};
use crate::hilbert::{born_probabilities, interference_terms, superpose, Pvm, C64};
use crate::machina::machina_pattern_search;
use crate::urn::{
    classical_expected_utility, ellsberg_urn, machina_urn, Act, ObservedCounts,
    ProbabilityVector, UrnExperiment, UrnSpec, UtilityFunction,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";
pub const SIGNIFICANT_DIGITS: i32 = 12;

/// Report-level failures, split by the CLI exit-code contract:
/// invalid input exits 2, a failed search exits 3.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("search failed: {0}")]
    SearchFailed(String),
}

impl ReportError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::InvalidInput(_) => 2,
            ReportError::SearchFailed(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, ReportError>;

fn invalid(e: impl std::fmt::Display) -> ReportError {
    ReportError::InvalidInput(e.to_string())
}

impl From<crate::ellsberg::EllsbergError> for ReportError {
    fn from(e: crate::ellsberg::EllsbergError) -> Self {
        match e {
            crate::ellsberg::EllsbergError::NotFound(_) => ReportError::SearchFailed(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<crate::machina::MachinaError> for ReportError {
    fn from(e: crate::machina::MachinaError) -> Self {
        match e {
            crate::machina::MachinaError::NotFound(_) => ReportError::SearchFailed(e.to_string()),
            other => invalid(other),
        }
    }
}

impl From<crate::choice::ChoiceError> for ReportError {
    fn from(e: crate::choice::ChoiceError) -> Self {
        match e {
            crate::choice::ChoiceError::FitFailed { .. } => {
                ReportError::SearchFailed(e.to_string())
            }
            other => invalid(other),
        }
    }
}

/// The versioned JSON experiment document the CLI consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: String,
    pub urn: UrnSpec,
    pub acts: Vec<Act>,
    pub utility: UtilityFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<ObservedCounts>,
    /// Optional quantum model parameters, e.g. the output of fit-state,
    /// tagged with its Hilbert-space dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Value>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(invalid)?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(ReportError::InvalidInput(format!(
                "schema_version '{}' unsupported (expected '{SCHEMA_VERSION}')",
                spec.schema_version
            )));
        }
        spec.experiment().validate().map_err(invalid)?;
        Ok(spec)
    }

    pub fn from_experiment(exp: &UrnExperiment) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            urn: exp.urn.clone(),
            acts: exp.acts.clone(),
            utility: exp.utility,
            observed: exp.observed,
            model: None,
        }
    }

    pub fn experiment(&self) -> UrnExperiment {
        UrnExperiment {
            urn: self.urn.clone(),
            acts: self.acts.clone(),
            utility: self.utility,
            observed: self.observed,
        }
    }

    /// Canonical single-line JSON (keys sorted), the digest input.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_json().as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// The two built-in experiments, addressable by name in place of a path.
pub fn builtin_spec(name: &str) -> Option<ExperimentSpec> {
    match name {
        "ellsberg" => Some(ExperimentSpec::from_experiment(&ellsberg_urn())),
        "machina" => Some(ExperimentSpec::from_experiment(&machina_urn())),
        _ => None,
    }
}

/// A reproducible command result: everything needed to regenerate any number
/// in it (command, input digest, seed) travels with the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    pub input_digest: String,
    pub seed: u64,
    pub results: Value,
    pub residuals: BTreeMap<String, f64>,
}

/// Rounds to 12 significant digits; report determinism is defined at this
/// precision.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = SIGNIFICANT_DIGITS - 1 - x.abs().log10().floor() as i32;
    let factor = 10f64.powi(scale);
    (x * factor).round() / factor
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if !n.is_i64() && !n.is_u64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(x)) {
                        *v = Value::Number(rounded);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn make_report(
    command: &str,
    spec: &ExperimentSpec,
    seed: u64,
    mut results: Value,
    residuals: BTreeMap<String, f64>,
) -> Report {
    round_value(&mut results);
    Report {
        schema_version: SCHEMA_VERSION.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        input_digest: spec.digest(),
        seed,
        results,
        residuals: residuals
            .into_iter()
            .map(|(k, x)| (k, round_sig(x)))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl std::str::FromStr for Format {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Md),
            other => Err(ReportError::InvalidInput(format!(
                "unknown format '{other}' (expected json, csv or md)"
            ))),
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "null".to_string(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&path, child, out);
            }
        }
        Value::Array(items) => {
            for (k, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{k}]"), child, out);
            }
        }
        scalar => out.push((prefix.to_string(), scalar_text(scalar))),
    }
}

fn report_rows(report: &Report) -> Vec<(String, String)> {
    let mut rows = vec![
        ("schema_version".to_string(), report.schema_version.clone()),
        ("tool_version".to_string(), report.tool_version.clone()),
        ("command".to_string(), report.command.clone()),
        ("input_digest".to_string(), report.input_digest.clone()),
        ("seed".to_string(), report.seed.to_string()),
    ];
    flatten("results", &report.results, &mut rows);
    for (k, x) in &report.residuals {
        rows.push((format!("residuals.{k}"), scalar_text(&json!(x))));
    }
    rows
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders a report; the format changes encoding only, never values.
pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut out = String::from("key,value\n");
            for (k, v) in report_rows(report) {
                out.push_str(&format!("{},{}\n", csv_escape(&k), csv_escape(&v)));
            }
            out
        }
        Format::Md => {
            let mut out = format!("# qdu report: {}\n\n| key | value |\n|---|---|\n", report.command);
            for (k, v) in report_rows(report) {
                out.push_str(&format!("| {} | {} |\n", k, v.replace('|', "\\|")));
            }
            out
        }
    }
}

fn eu_table<F>(exp: &UrnExperiment, mut f: F) -> Result<Value>
where
    F: FnMut(&Act) -> Result<f64>,
{
    let mut table = serde_json::Map::new();
    for act in &exp.acts {
        table.insert(act.name.clone(), json!(f(act)?));
    }
    Ok(Value::Object(table))
}

/// Centroid of the admissible prior set (vertex average); the symmetric
/// single prior used by the seut baseline.
fn centroid_prior(exp: &UrnExperiment) -> Result<ProbabilityVector> {
    let vertices = full_prior_set(&exp.urn).vertices();
    if vertices.is_empty() {
        return Err(ReportError::InvalidInput("empty prior set".into()));
    }
    let n = vertices.len() as f64;
    let mut entries: BTreeMap<String, f64> = BTreeMap::new();
    for p in &vertices {
        for (c, &x) in &p.entries {
            *entries.entry(c.clone()).or_insert(0.0) += x / n;
        }
    }
    let pairs: Vec<(&str, f64)> = entries.iter().map(|(c, &x)| (c.as_str(), x)).collect();
    ProbabilityVector::new(&pairs).map_err(invalid)
}

/// Which classical model the baselines command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineModel {
    Seut,
    Maxmin,
    Choquet,
    Variational,
    SecondOrder,
}

impl std::str::FromStr for BaselineModel {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seut" => Ok(BaselineModel::Seut),
            "maxmin" => Ok(BaselineModel::Maxmin),
            "choquet" => Ok(BaselineModel::Choquet),
            "variational" => Ok(BaselineModel::Variational),
            "second-order" => Ok(BaselineModel::SecondOrder),
            other => Err(ReportError::InvalidInput(format!(
                "unknown baseline model '{other}'"
            ))),
        }
    }
}

/// check-seut: SEUT feasibility of a pattern over the spec's acts and priors.
pub fn cmd_check_seut(spec: &ExperimentSpec, pattern: &str, grid_points: usize) -> Result<Report> {
    let exp = spec.experiment();
    let pattern = PreferencePattern::parse(pattern).map_err(invalid)?;
    let verdict = seut_pattern_feasibility(&exp, &pattern, &default_utility_family(), grid_points)
        .map_err(invalid)?;
    let results = json!({
        "pattern": pattern.to_string(),
        "verdict": verdict,
    });
    Ok(make_report("check-seut", spec, 0, results, BTreeMap::new()))
}

/// baselines: expected-utility table of one classical model over the spec.
pub fn cmd_baselines(spec: &ExperimentSpec, model: BaselineModel) -> Result<Report> {
    let exp = spec.experiment();
    let u = exp.utility;
    let priors = full_prior_set(&exp.urn);
    let (name, detail, values) = match model {
        BaselineModel::Seut => {
            let p = centroid_prior(&exp)?;
            let table = eu_table(&exp, |a| {
                classical_expected_utility(a, &p, &u).map_err(invalid)
            })?;
            ("seut", json!({ "prior": p }), table)
        }
        BaselineModel::Maxmin => {
            let table = eu_table(&exp, |a| {
                maxmin_expected_utility(a, &priors, &u).map_err(invalid)
            })?;
            ("maxmin", json!({ "prior_set": priors }), table)
        }
        BaselineModel::Choquet => {
            let cap = lower_envelope_capacity(&priors).map_err(invalid)?;
            let table = eu_table(&exp, |a| {
                choquet_expected_utility(a, &cap, &u).map_err(invalid)
            })?;
            (
                "choquet",
                json!({ "capacity": cap, "convex": cap.is_convex() }),
                table,
            )
        }
        BaselineModel::Variational => {
            let table = eu_table(&exp, |a| {
                variational_expected_utility(a, &priors, |_| 0.0, 100, &u).map_err(invalid)
            })?;
            ("variational", json!({ "penalty": "zero" }), table)
        }
        BaselineModel::SecondOrder => {
            let vertices = priors.vertices();
            let w = 1.0 / vertices.len() as f64;
            let mu: Vec<(ProbabilityVector, f64)> =
                vertices.into_iter().map(|p| (p, w)).collect();
            let phi = PhiSpec::Sqrt;
            let table = eu_table(&exp, |a| {
                second_order_expected_utility(a, &mu, &phi, &u).map_err(invalid)
            })?;
            (
                "second-order",
                json!({ "phi": phi, "mu": "uniform over prior-set vertices" }),
                table,
            )
        }
    };
    let results = json!({ "model": name, "parameters": detail, "values": values });
    Ok(make_report("baselines", spec, 0, results, BTreeMap::new()))
}

fn mechanism_from_str(s: &str) -> Result<MechanismTag> {
    match s {
        "contextual" => Ok(MechanismTag::ContextualState),
        "rotated" => Ok(MechanismTag::RotatedProjectors),
        "canonical" => Ok(MechanismTag::Canonical),
        other => Err(ReportError::InvalidInput(format!(
            "unknown mechanism '{other}' (expected contextual, rotated or canonical)"
        ))),
    }
}

/// fit-state: search for a state and model reproducing a preference pattern
/// with the module margin; dimension 3 runs the Ellsberg engine, 4 Machina.
pub fn cmd_fit_state(
    spec: &ExperimentSpec,
    mechanism: &str,
    pattern: &str,
    seed: u64,
) -> Result<Report> {
    let exp = spec.experiment();
    let mechanism = mechanism_from_str(mechanism)?;
    let pattern = PreferencePattern::parse(pattern).map_err(invalid)?;
    let results = match exp.urn.colors.len() {
        3 => {
            let fit = find_pattern_model(&pattern, mechanism, &exp.utility, seed)?;
            json!({ "dimension": 3, "pattern": pattern.to_string(), "fit": fit })
        }
        4 => {
            let fit = machina_pattern_search(&pattern, mechanism, &exp.utility, seed)?;
            json!({ "dimension": 4, "pattern": pattern.to_string(), "fit": fit })
        }
        d => {
            return Err(ReportError::InvalidInput(format!(
                "fit-state needs a 3- or 4-color urn, got {d}"
            )))
        }
    };
    Ok(make_report("fit-state", spec, seed, results, BTreeMap::new()))
}

/// fit-choice: fit commuting choice observables to the spec's observed joint
/// counts; reports the marginal fit and the 3-cell structural bound.
pub fn cmd_fit_choice(spec: &ExperimentSpec, seed: u64, tol: f64) -> Result<Report> {
    let counts = spec.observed.ok_or_else(|| {
        ReportError::InvalidInput("fit-choice needs 'observed' joint counts in the spec".into())
    })?;
    let marginals = choice_weights(&counts)?;
    let fit = fit_marginals((marginals.p_f1, marginals.p_f4), seed)?;
    if fit.residual > tol {
        return Err(ReportError::SearchFailed(format!(
            "fit residual {} above tolerance {tol}",
            fit.residual
        )));
    }
    let pair = fit.pair.to_pair()?;
    let state = fit.state_vector()?;
    let joint = crate::choice::joint_distribution(&state, &pair)?;
    let observed = JointDistribution::from_counts(&counts)?;
    let (l1, support) = min_l1_joint_fit(&observed);
    let commutator = pair.commutator_norm();
    let results = json!({
        "observed_counts": counts,
        "marginals": marginals,
        "fit": fit,
        "model_joint_cells": joint.cells,
        "min_l1_to_observed_joint": { "distance": l1, "support_cells": support },
    });
    let mut residuals = BTreeMap::new();
    residuals.insert("fit_residual".to_string(), fit.residual);
    residuals.insert("commutator_norm".to_string(), commutator);
    Ok(make_report("fit-choice", spec, seed, results, residuals))
}

/// State parameters for the interference command: two states on the spec's
/// color basis (first amplitude weight and per-color phases) superposed with
/// real weights a, b and a relative phase on b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceParams {
    pub weight1: f64,
    pub phases1: (f64, f64),
    pub weight2: f64,
    pub phases2: (f64, f64),
    pub a: f64,
    pub b: f64,
    pub rel_phase: f64,
}

/// interference: Born statistics of a superposition of two Ellsberg states
/// against the classical mixture, with the per-color interference terms.
pub fn cmd_interference(spec: &ExperimentSpec, params: &InterferenceParams) -> Result<Report> {
    let exp = spec.experiment();
    if exp.urn.colors.len() != 3 {
        return Err(ReportError::InvalidInput(
            "interference needs the 3-color urn".into(),
        ));
    }
    let labels: Vec<&str> = exp.urn.colors.iter().map(String::as_str).collect();
    let pvm = Pvm::canonical(&labels).map_err(invalid)?;
    let w1 = crate::ellsberg::build_ellsberg_state(
        params.weight1,
        params.phases1.0,
        params.phases1.1,
    )?;
    let w2 = crate::ellsberg::build_ellsberg_state(
        params.weight2,
        params.phases2.0,
        params.phases2.1,
    )?;
    let a = C64::new(params.a, 0.0);
    let b = C64::from_polar(params.b, params.rel_phase);
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if norm < 1e-12 {
        return Err(ReportError::InvalidInput(
            "superposition weights a, b must not both be zero".into(),
        ));
    }
    let (a, b) = (a / norm, b / norm);

    let p1 = born_probabilities(w1.state(), &pvm).map_err(invalid)?;
    let p2 = born_probabilities(w2.state(), &pvm).map_err(invalid)?;
    let terms = interference_terms(a, w1.state(), b, w2.state(), &pvm).map_err(invalid)?;
    let s = superpose(a, w1.state(), b, w2.state()).map_err(invalid)?;
    let ps = born_probabilities(&s, &pvm).map_err(invalid)?;

    // Σ I_c = 2·Re(āb⟨w1|w2⟩), and Born probabilities sum to 1
    let overlap = w1.state().inner(w2.state()).map_err(invalid)?;
    let sum_identity = (terms.iter().sum::<f64>() - 2.0 * (a.conj() * b * overlap).re).abs();
    let born_sum = (ps.iter().sum::<f64>() - 1.0).abs();

    let per_color: Vec<Value> = labels
        .iter()
        .enumerate()
        .map(|(k, c)| {
            json!({
                "color": c,
                "p_state1": p1[k],
                "p_state2": p2[k],
                "mixture": a.norm_sqr() * p1[k] + b.norm_sqr() * p2[k],
                "interference": terms[k],
                "p_superposition": ps[k],
            })
        })
        .collect();
    let results = json!({
        "weights": { "a": [a.re, a.im], "b": [b.re, b.im] },
        "colors": per_color,
    });
    let mut residuals = BTreeMap::new();
    residuals.insert("interference_sum_identity".to_string(), sum_identity);
    residuals.insert("born_sum".to_string(), born_sum);
    Ok(make_report("interference", spec, 0, results, residuals))
}

/// demo: the end-to-end story for one built-in urn, from classical
/// infeasibility to the quantum model and (Ellsberg) the data fit.
pub fn cmd_demo(target: &str, seed: u64) -> Result<Report> {
    let spec = builtin_spec(target).ok_or_else(|| {
        ReportError::InvalidInput(format!("unknown demo target '{target}'"))
    })?;
    let exp = spec.experiment();
    let u = exp.utility;
    let priors = full_prior_set(&exp.urn);
    let u_family = default_utility_family();

    let paradox = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
    let consistent = PreferencePattern::new(&[("f1", "f2"), ("f3", "f4")]);
    let seut_paradox =
        seut_pattern_feasibility(&exp, &paradox, &u_family, 100).map_err(invalid)?;
    let seut_consistent =
        seut_pattern_feasibility(&exp, &consistent, &u_family, 100).map_err(invalid)?;
    let maxmin = eu_table(&exp, |a| {
        maxmin_expected_utility(a, &priors, &u).map_err(invalid)
    })?;

    let mut residuals = BTreeMap::new();
    let results = match target {
        "ellsberg" => {
            let cap = ellsberg_convex_capacity();
            let choquet = eu_table(&exp, |a| {
                choquet_expected_utility(a, &cap, &u).map_err(invalid)
            })?;
            let quantum = find_pattern_model(&paradox, MechanismTag::RotatedProjectors, &u, seed)?;
            let counts = exp.observed.expect("built-in counts");
            let marginals = choice_weights(&counts)?;
            let fit = fit_marginals((0.68, 0.69), seed)?;
            let observed = JointDistribution::from_counts(&counts)?;
            let (l1, support) = min_l1_joint_fit(&observed);
            residuals.insert("fit_residual".to_string(), fit.residual);
            residuals.insert(
                "commutator_norm".to_string(),
                fit.pair.to_pair()?.commutator_norm(),
            );
            json!({
                "target": "ellsberg",
                "seut": { "paradox": seut_paradox, "consistent": seut_consistent },
                "baselines": { "maxmin": maxmin, "choquet_convex": choquet },
                "quantum_pattern": quantum,
                "choice_marginals": marginals,
                "choice_fit": fit,
                "joint_structure": { "min_l1": l1, "support_cells": support },
            })
        }
        "machina" => {
            let forward =
                machina_pattern_search(&paradox, MechanismTag::RotatedProjectors, &u, seed)?;
            let reverse = machina_pattern_search(
                &PreferencePattern::new(&[("f2", "f1"), ("f3", "f4")]),
                MechanismTag::ContextualState,
                &u,
                seed,
            )?;
            json!({
                "target": "machina",
                "seut": { "paradox": seut_paradox, "consistent": seut_consistent },
                "baselines": { "maxmin": maxmin },
                "quantum_pattern": forward,
                "quantum_pattern_reversed": reverse,
            })
        }
        _ => unreachable!("builtin_spec checked the name"),
    };
    Ok(make_report("demo", &spec, seed, results, residuals))
}

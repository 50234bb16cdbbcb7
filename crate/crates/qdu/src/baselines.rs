//! Classical decision models and machine-checkable infeasibility of
//! classical explanations: SEUT feasibility search with analytic
//! certificates, Sure-Thing principle checking, Max-Min expected utility,
//! Choquet expected utility, variational preferences and second-order
//! probabilities.

use crate::urn::{
    classical_expected_utility, utility_eval, ProbabilityVector, UrnError, UrnExperiment,
    UrnSpec, UtilityFunction,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid preference pattern: {0}")]
    InvalidPattern(String),
    #[error("prior set is empty")]
    EmptyPriorSet,
    #[error("capacity is missing event {0:?}")]
    MissingEvent(Vec<String>),
    #[error("invalid capacity: {0}")]
    InvalidCapacity(String),
    #[error("invalid distribution over priors: {0}")]
    InvalidDistribution(String),
    #[error("grid resolution {0} is below the minimum of {MIN_GRID_POINTS}")]
    GridTooCoarse(usize),
    #[error("acts are not Sure-Thing related: {0}")]
    PairsNotSureThingRelated(String),
    #[error(transparent)]
    Urn(#[from] UrnError),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

pub const MIN_GRID_POINTS: usize = 100;

/// Margin a strict preference must clear in the feasibility search.
pub const FEASIBILITY_MARGIN: f64 = 1e-9;

/// A list of strict preferences between named acts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePattern {
    pub prefs: Vec<(String, String)>,
}

impl PreferencePattern {
    pub fn new(prefs: &[(&str, &str)]) -> Self {
        Self {
            prefs: prefs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    /// Parses `"f1>f2,f4>f3"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut prefs = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (a, b) = part.split_once('>').ok_or_else(|| {
                BaselineError::InvalidPattern(format!("expected 'a>b' in '{part}'"))
            })?;
            prefs.push((a.trim().to_string(), b.trim().to_string()));
        }
        if prefs.is_empty() {
            return Err(BaselineError::InvalidPattern("empty pattern".into()));
        }
        Ok(Self { prefs })
    }

    pub fn validate(&self, exp: &UrnExperiment) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (a, b) in &self.prefs {
            exp.act(a)?;
            exp.act(b)?;
            if a == b {
                return Err(BaselineError::InvalidPattern(format!(
                    "self-preference '{a} > {a}'"
                )));
            }
            if !seen.insert((a.clone(), b.clone())) {
                return Err(BaselineError::InvalidPattern(format!(
                    "'{a} > {b}' repeated"
                )));
            }
            if seen.contains(&(b.clone(), a.clone())) {
                return Err(BaselineError::InvalidPattern(format!(
                    "'{a} > {b}' contradicts an earlier preference"
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for PreferencePattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .prefs
            .iter()
            .map(|(a, b)| format!("{a}>{b}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Convex set of priors respecting the urn's known counts, as box bounds on
/// the free coordinates (the first g−1 colors of each unknown group).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorSet {
    pub urn: UrnSpec,
    /// (color, lo, hi) per free coordinate, in group order.
    pub bounds: Vec<(String, f64, f64)>,
}

/// The full admissible prior set of an urn: each free coordinate ranges over
/// its whole group mass.
pub fn full_prior_set(urn: &UrnSpec) -> PriorSet {
    let mut bounds = Vec::new();
    for g in &urn.unknown_groups {
        let mass = g.total as f64 / urn.total as f64;
        for c in &g.colors[..g.colors.len() - 1] {
            bounds.push((c.clone(), 0.0, mass));
        }
    }
    PriorSet {
        urn: urn.clone(),
        bounds,
    }
}

impl PriorSet {
    /// Assembles a full probability vector from values of the free
    /// coordinates; returns None when a group remainder would be negative.
    pub fn assemble(&self, free: &[f64]) -> Option<ProbabilityVector> {
        let total = self.urn.total as f64;
        let mut entries: BTreeMap<String, f64> = self
            .urn
            .known_counts
            .iter()
            .map(|(c, &n)| (c.clone(), n as f64 / total))
            .collect();
        let mut cursor = 0;
        for g in &self.urn.unknown_groups {
            let mass = g.total as f64 / total;
            let mut used = 0.0;
            for c in &g.colors[..g.colors.len() - 1] {
                let x = free[cursor];
                cursor += 1;
                entries.insert(c.clone(), x);
                used += x;
            }
            let rest = mass - used;
            if rest < -1e-12 {
                return None;
            }
            entries.insert(g.colors.last().unwrap().clone(), rest.max(0.0));
        }
        Some(ProbabilityVector { entries })
    }

    /// Vertices of the box, filtered to valid probability vectors.
    pub fn vertices(&self) -> Vec<ProbabilityVector> {
        let d = self.bounds.len();
        let mut out = Vec::new();
        for mask in 0..(1usize << d) {
            let free: Vec<f64> = self
                .bounds
                .iter()
                .enumerate()
                .map(|(k, (_, lo, hi))| if mask >> k & 1 == 1 { *hi } else { *lo })
                .collect();
            if let Some(p) = self.assemble(&free) {
                if p.validate().is_ok() {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Lattice of `points` values per free coordinate (endpoints included),
    /// in lexicographic order, filtered to valid probability vectors.
    pub fn grid(&self, points: usize) -> Vec<ProbabilityVector> {
        let d = self.bounds.len();
        if d == 0 {
            return self.assemble(&[]).into_iter().collect();
        }
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|(_, lo, hi)| {
                (0..points)
                    .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            let free: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| axes[k][i]).collect();
            if let Some(p) = self.assemble(&free) {
                if p.validate().is_ok() {
                    out.push(p);
                }
            }
            // lexicographic increment
            let mut k = d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < points {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    return out;
                }
            }
        }
    }
}

/// Monotone set function over all color subsets with ν(∅)=0, ν(Ω)=1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Capacity {
    pub colors: Vec<String>,
    /// Indexed by bitmask over `colors`; length 2^n.
    pub values: Vec<f64>,
}

impl Capacity {
    pub fn new(colors: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = colors.len();
        if values.len() != 1 << n {
            return Err(BaselineError::MissingEvent(colors));
        }
        let cap = Self { colors, values };
        cap.check_monotone()?;
        Ok(cap)
    }

    /// Builds from explicit (subset, value) pairs; every event must appear.
    pub fn from_events(colors: &[&str], events: &[(&[&str], f64)]) -> Result<Self> {
        let n = colors.len();
        let index: BTreeMap<&str, usize> =
            colors.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut values = vec![f64::NAN; 1 << n];
        for (subset, v) in events {
            let mut mask = 0usize;
            for c in *subset {
                mask |= 1 << index[c];
            }
            values[mask] = *v;
        }
        if let Some(mask) = values.iter().position(|v| v.is_nan()) {
            let missing: Vec<String> = colors
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &c)| c.to_string())
                .collect();
            return Err(BaselineError::MissingEvent(missing));
        }
        Self::new(colors.iter().map(|&c| c.to_string()).collect(), values)
    }

    /// The additive capacity induced by a probability vector.
    pub fn additive(p: &ProbabilityVector) -> Self {
        let colors: Vec<String> = p.entries.keys().cloned().collect();
        let n = colors.len();
        let values = (0..1usize << n)
            .map(|mask| {
                colors
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, c)| p.entries[c])
                    .sum()
            })
            .collect();
        Self { colors, values }
    }

    fn check_monotone(&self) -> Result<()> {
        let n = self.colors.len();
        let full = (1usize << n) - 1;
        if self.values[0].abs() > 1e-12 {
            return Err(BaselineError::InvalidCapacity(format!(
                "ν(∅) = {}",
                self.values[0]
            )));
        }
        if (self.values[full] - 1.0).abs() > 1e-12 {
            return Err(BaselineError::InvalidCapacity(format!(
                "ν(Ω) = {}",
                self.values[full]
            )));
        }
        for a in 0..=full {
            for k in 0..n {
                if a >> k & 1 == 0 {
                    let b = a | (1 << k);
                    if self.values[a] > self.values[b] + 1e-12 {
                        return Err(BaselineError::InvalidCapacity(format!(
                            "not monotone: ν({a:b}) > ν({b:b})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Supermodularity (convexity): ν(A∪B) + ν(A∩B) ≥ ν(A) + ν(B) for all
    /// event pairs, checked exhaustively.
    pub fn is_convex(&self) -> bool {
        let full = (1usize << self.colors.len()) - 1;
        for a in 0..=full {
            for b in 0..=full {
                if self.values[a | b] + self.values[a & b] < self.values[a] + self.values[b] - 1e-12
                {
                    return false;
                }
            }
        }
        true
    }

    pub fn value_of(&self, subset: &[&str]) -> Result<f64> {
        let mut mask = 0usize;
        for c in subset {
            let k = self
                .colors
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| BaselineError::MissingEvent(vec![c.to_string()]))?;
            mask |= 1 << k;
        }
        Ok(self.values[mask])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
}

/// A prior + utility pair that realizes a preference pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub prior: ProbabilityVector,
    pub utility: UtilityFunction,
}

/// Outcome of a SEUT feasibility search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub status: FeasibilityStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Human-readable analytic certificate, present when the pattern reduces
    /// to contradictory linear inequalities independent of the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    pub grid_points_per_dim: usize,
    pub utilities_sampled: Vec<UtilityFunction>,
}

/// Utility family sampled by default in feasibility searches.
pub fn default_utility_family() -> Vec<UtilityFunction> {
    vec![
        UtilityFunction::Linear,
        UtilityFunction::Power { alpha: 0.25 },
        UtilityFunction::Power { alpha: 0.5 },
        UtilityFunction::Power { alpha: 0.75 },
        UtilityFunction::Power { alpha: 1.0 },
        UtilityFunction::Exponential { lambda: 0.05 },
        UtilityFunction::Exponential { lambda: 0.1 },
        UtilityFunction::Exponential { lambda: 0.5 },
    ]
}

/// For acts differing only on colors where one pays `hi` and the other `lo`
/// (a common two-value structure), a ≻ b reduces, for every strictly
/// increasing utility, to c·p > 0 with c the ±1 indicator difference.
/// Returns that coefficient vector keyed by color, or None when the
/// comparison has no two-value structure.
fn two_value_reduction(
    exp: &UrnExperiment,
    a: &str,
    b: &str,
) -> Result<Option<BTreeMap<String, f64>>> {
    let fa = exp.act(a)?;
    let fb = exp.act(b)?;
    let mut values = BTreeSet::new();
    let mut diffs = Vec::new();
    for c in &exp.urn.colors {
        let xa = fa.payoffs[c];
        let xb = fb.payoffs[c];
        if (xa - xb).abs() > 1e-12 {
            values.insert(xa.to_bits());
            values.insert(xb.to_bits());
            diffs.push((c.clone(), xa, xb));
        }
    }
    if values.len() != 2 {
        return Ok(None);
    }
    let mut sorted: Vec<f64> = values.iter().map(|&b| f64::from_bits(b)).collect();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (lo, hi) = (sorted[0], sorted[1]);
    let mut coeffs = BTreeMap::new();
    for (c, xa, _) in diffs {
        let sign = if (xa - hi).abs() < 1e-12 { 1.0 } else { -1.0 };
        coeffs.insert(c, sign);
    }
    let _ = lo;
    Ok(Some(coeffs))
}

/// Exhaustive search for a subjective prior and utility realizing a
/// preference pattern, with an analytic contradiction certificate when the
/// pattern's two-value comparisons cancel pairwise.
pub fn seut_pattern_feasibility(
    exp: &UrnExperiment,
    pattern: &PreferencePattern,
    u_family: &[UtilityFunction],
    grid_points: usize,
) -> Result<FeasibilityVerdict> {
    exp.validate()?;
    pattern.validate(exp)?;
    if grid_points < MIN_GRID_POINTS {
        return Err(BaselineError::GridTooCoarse(grid_points));
    }

    // analytic certificate: two comparisons whose coefficient vectors cancel
    let reductions: Vec<Option<BTreeMap<String, f64>>> = pattern
        .prefs
        .iter()
        .map(|(a, b)| two_value_reduction(exp, a, b))
        .collect::<Result<_>>()?;
    let mut certificate = None;
    'outer: for i in 0..reductions.len() {
        for j in (i + 1)..reductions.len() {
            if let (Some(ci), Some(cj)) = (&reductions[i], &reductions[j]) {
                let keys: BTreeSet<_> = ci.keys().chain(cj.keys()).collect();
                let cancels = keys.iter().all(|k| {
                    let x = ci.get(*k).copied().unwrap_or(0.0)
                        + cj.get(*k).copied().unwrap_or(0.0);
                    x.abs() < 1e-12
                });
                if cancels {
                    let (a1, b1) = &pattern.prefs[i];
                    let (a2, b2) = &pattern.prefs[j];
                    certificate = Some(format!(
                        "for every strictly increasing utility, '{a1}>{b1}' requires {} \
                         and '{a2}>{b2}' requires the exact opposite inequality on the \
                         same linear form in p; both cannot hold",
                        linear_form(ci)
                    ));
                    break 'outer;
                }
            }
        }
    }

    // grid search (also produces the witness when feasible)
    let priors = full_prior_set(&exp.urn);
    let grid = priors.grid(grid_points);
    let mut witness = None;
    'search: for u in u_family {
        for p in &grid {
            let mut ok = true;
            for (a, b) in &pattern.prefs {
                let ea = classical_expected_utility(exp.act(a)?, p, u)?;
                let eb = classical_expected_utility(exp.act(b)?, p, u)?;
                if ea - eb <= FEASIBILITY_MARGIN {
                    ok = false;
                    break;
                }
            }
            if ok {
                witness = Some(Witness {
                    prior: p.clone(),
                    utility: *u,
                });
                break 'search;
            }
        }
    }

    let status = if witness.is_some() {
        FeasibilityStatus::Feasible
    } else {
        FeasibilityStatus::Infeasible
    };
    debug_assert!(
        !(witness.is_some() && certificate.is_some()),
        "analytic certificate contradicted by a grid witness"
    );
    Ok(FeasibilityVerdict {
        status,
        witness,
        certificate,
        grid_points_per_dim: grid_points,
        utilities_sampled: u_family.to_vec(),
    })
}

fn linear_form(coeffs: &BTreeMap<String, f64>) -> String {
    let mut parts = Vec::new();
    for (c, &s) in coeffs {
        if s > 0.0 {
            parts.push(format!("+p({c})"));
        } else {
            parts.push(format!("-p({c})"));
        }
    }
    format!("{} > 0", parts.join(" "))
}

/// Result of a Sure-Thing principle check over two act pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SureThingReport {
    pub common_event: Vec<String>,
    pub pair_a: (String, String),
    pub pair_b: (String, String),
    pub conforms: bool,
    pub detail: String,
}

/// Checks that pair_b arises from pair_a by changing payoffs only on the
/// common event, identically for both acts, and whether the stated pattern
/// over the two pairs conforms to the Sure-Thing principle.
pub fn sure_thing_check(
    exp: &UrnExperiment,
    pair_a: (&str, &str),
    pair_b: (&str, &str),
    common_event: &[&str],
    pattern: &PreferencePattern,
) -> Result<SureThingReport> {
    exp.validate()?;
    let (a1, a2) = (exp.act(pair_a.0)?, exp.act(pair_a.1)?);
    let (b1, b2) = (exp.act(pair_b.0)?, exp.act(pair_b.1)?);
    let on_event: BTreeSet<&str> = common_event.iter().copied().collect();
    for c in &exp.urn.colors {
        let inside = on_event.contains(c.as_str());
        if inside {
            if (a1.payoffs[c] - a2.payoffs[c]).abs() > 1e-12 {
                return Err(BaselineError::PairsNotSureThingRelated(format!(
                    "first pair differs on common event color '{c}'"
                )));
            }
            if (b1.payoffs[c] - b2.payoffs[c]).abs() > 1e-12 {
                return Err(BaselineError::PairsNotSureThingRelated(format!(
                    "second pair differs on common event color '{c}'"
                )));
            }
        } else {
            if (a1.payoffs[c] - b1.payoffs[c]).abs() > 1e-12
                || (a2.payoffs[c] - b2.payoffs[c]).abs() > 1e-12
            {
                return Err(BaselineError::PairsNotSureThingRelated(format!(
                    "pairs differ outside the common event (color '{c}')"
                )));
            }
        }
    }

    // direction of preference within each pair, as stated by the pattern
    let direction = |x: &str, y: &str| -> Option<bool> {
        for (p, q) in &pattern.prefs {
            if p == x && q == y {
                return Some(true);
            }
            if p == y && q == x {
                return Some(false);
            }
        }
        None
    };
    let da = direction(pair_a.0, pair_a.1).ok_or_else(|| {
        BaselineError::InvalidPattern(format!(
            "pattern does not order '{}' and '{}'",
            pair_a.0, pair_a.1
        ))
    })?;
    let db = direction(pair_b.0, pair_b.1).ok_or_else(|| {
        BaselineError::InvalidPattern(format!(
            "pattern does not order '{}' and '{}'",
            pair_b.0, pair_b.1
        ))
    })?;
    let conforms = da == db;
    let detail = if conforms {
        "preferences over the two pairs agree; the Sure-Thing principle is respected".to_string()
    } else {
        format!(
            "preference between the sub-acts flips with the payoff on {common_event:?}; \
             this violates the Sure-Thing principle"
        )
    };
    Ok(SureThingReport {
        common_event: common_event.iter().map(|c| c.to_string()).collect(),
        pair_a: (pair_a.0.to_string(), pair_a.1.to_string()),
        pair_b: (pair_b.0.to_string(), pair_b.1.to_string()),
        conforms,
        detail,
    })
}

/// min over the prior set of E_p u(f); by linearity in p the minimum over a
/// box is attained at a vertex, so vertices are enumerated exactly.
pub fn maxmin_expected_utility(
    act: &crate::urn::Act,
    priors: &PriorSet,
    u: &UtilityFunction,
) -> Result<f64> {
    let vertices = priors.vertices();
    if vertices.is_empty() {
        return Err(BaselineError::EmptyPriorSet);
    }
    let mut best = f64::INFINITY;
    for p in &vertices {
        best = best.min(classical_expected_utility(act, p, u)?);
    }
    Ok(best)
}

/// Choquet integral of u(f) against a capacity: outcomes sorted by
/// descending utility, layered sum of (u_k − u_{k+1})·ν(top-k event).
pub fn choquet_expected_utility(
    act: &crate::urn::Act,
    cap: &Capacity,
    u: &UtilityFunction,
) -> Result<f64> {
    let mut ranked: Vec<(&str, f64)> = Vec::new();
    for c in &cap.colors {
        let x = act
            .payoff(c)
            .ok_or_else(|| BaselineError::MissingEvent(vec![c.clone()]))?;
        ranked.push((c, utility_eval(u, x)?));
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
    let mut total = 0.0;
    let mut top: Vec<&str> = Vec::new();
    for k in 0..ranked.len() {
        top.push(ranked[k].0);
        let next = if k + 1 < ranked.len() {
            ranked[k + 1].1
        } else {
            0.0
        };
        let layer = ranked[k].1 - next;
        if layer != 0.0 {
            total += layer * cap.value_of(&top)?;
        }
    }
    Ok(total)
}

/// inf over grid-sampled priors of E_p u(f) + c(p).
/// Convex capacity giving the ambiguity-averse Ellsberg values (4, 3, 7, 8):
/// ν(red) = 1/3, ν(yellow) = ν(black) = 1/4, ν({y,b}) = 2/3,
/// ν({r,y}) = ν({r,b}) = 7/12.
pub fn ellsberg_convex_capacity() -> Capacity {
    Capacity::from_events(
        &["red", "yellow", "black"],
        &[
            (&[], 0.0),
            (&["red"], 1.0 / 3.0),
            (&["yellow"], 0.25),
            (&["black"], 0.25),
            (&["red", "yellow"], 7.0 / 12.0),
            (&["red", "black"], 7.0 / 12.0),
            (&["yellow", "black"], 2.0 / 3.0),
            (&["red", "yellow", "black"], 1.0),
        ],
    )
    .expect("fixed capacity is valid")
}

/// Lower envelope of a prior set: ν(A) = min over vertices of P(A).
/// Always a capacity; convex for the interval-constrained urns here.
pub fn lower_envelope_capacity(priors: &PriorSet) -> Result<Capacity> {
    let colors = priors.urn.colors.clone();
    let vertices = priors.vertices();
    if vertices.is_empty() {
        return Err(BaselineError::EmptyPriorSet);
    }
    let n = colors.len();
    let values = (0..1usize << n)
        .map(|mask| {
            vertices
                .iter()
                .map(|p| {
                    colors
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| mask >> k & 1 == 1)
                        .map(|(_, c)| p.entries[c])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Capacity::new(colors, values)
}

pub fn variational_expected_utility<F>(
    act: &crate::urn::Act,
    priors: &PriorSet,
    penalty: F,
    grid_points: usize,
    u: &UtilityFunction,
) -> Result<f64>
where
    F: Fn(&ProbabilityVector) -> f64,
{
    let grid = priors.grid(grid_points);
    if grid.is_empty() {
        return Err(BaselineError::EmptyPriorSet);
    }
    let mut best = f64::INFINITY;
    for p in &grid {
        let v = classical_expected_utility(act, p, u)? + penalty(p);
        best = best.min(v);
    }
    Ok(best)
}

/// Increasing transformation applied to inner expected utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum PhiSpec {
    Identity,
    Sqrt,
    Power { gamma: f64 },
}

impl PhiSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PhiSpec::Identity => x,
            PhiSpec::Sqrt => x.max(0.0).sqrt(),
            PhiSpec::Power { gamma } => x.max(0.0).powf(gamma),
        }
    }
}

/// E_μ φ(E_p u(f)) over a discrete distribution μ on priors.
pub fn second_order_expected_utility(
    act: &crate::urn::Act,
    mu: &[(ProbabilityVector, f64)],
    phi: &PhiSpec,
    u: &UtilityFunction,
) -> Result<f64> {
    if mu.is_empty() {
        return Err(BaselineError::InvalidDistribution("empty".into()));
    }
    let sum: f64 = mu.iter().map(|(_, w)| w).sum();
    if (sum - 1.0).abs() > 1e-12 || mu.iter().any(|(_, w)| *w < 0.0) {
        return Err(BaselineError::InvalidDistribution(format!(
            "weights sum to {sum}"
        )));
    }
    let mut total = 0.0;
    for (p, w) in mu {
        total += w * phi.eval(classical_expected_utility(act, p, u)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urn::{ellsberg_urn, machina_urn};

    fn ellsberg_prior(p_black: f64) -> ProbabilityVector {
        ProbabilityVector::new(&[
            ("red", 1.0 / 3.0),
            ("yellow", 2.0 / 3.0 - p_black),
            ("black", p_black),
        ])
        .unwrap()
    }

    #[test]
    fn ellsberg_paradox_pattern_infeasible() {
        let exp = ellsberg_urn();
        let pattern = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
        let v =
            seut_pattern_feasibility(&exp, &pattern, &default_utility_family(), 100).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Infeasible);
        assert!(v.certificate.is_some(), "analytic certificate expected");
        assert!(v.witness.is_none());
    }

    #[test]
    fn ellsberg_consistent_pattern_feasible() {
        let exp = ellsberg_urn();
        let pattern = PreferencePattern::new(&[("f1", "f2"), ("f3", "f4")]);
        let v =
            seut_pattern_feasibility(&exp, &pattern, &default_utility_family(), 101).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Feasible);
        let w = v.witness.expect("witness");
        // witness must re-verify and must have p_black < 1/3
        assert!(w.prior.get("black").unwrap() < 1.0 / 3.0);
        for (a, b) in &pattern.prefs {
            let ea =
                classical_expected_utility(exp.act(a).unwrap(), &w.prior, &w.utility).unwrap();
            let eb =
                classical_expected_utility(exp.act(b).unwrap(), &w.prior, &w.utility).unwrap();
            assert!(ea > eb + FEASIBILITY_MARGIN);
        }
    }

    #[test]
    fn machina_reflected_pattern_infeasible() {
        let exp = machina_urn();
        let pattern = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
        let v =
            seut_pattern_feasibility(&exp, &pattern, &default_utility_family(), 100).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Infeasible);
        let cert = v.certificate.expect("certificate");
        assert!(cert.contains("p(yellow)") || cert.contains("p(black)"));
    }

    #[test]
    fn machina_consistent_pattern_feasible() {
        let exp = machina_urn();
        let pattern = PreferencePattern::new(&[("f1", "f2"), ("f3", "f4")]);
        let v =
            seut_pattern_feasibility(&exp, &pattern, &default_utility_family(), 100).unwrap();
        assert_eq!(v.status, FeasibilityStatus::Feasible);
        let w = v.witness.unwrap();
        assert!(w.prior.get("yellow").unwrap() > w.prior.get("black").unwrap());
    }

    #[test]
    fn grid_resolution_floor() {
        let exp = ellsberg_urn();
        let pattern = PreferencePattern::new(&[("f1", "f2")]);
        assert!(matches!(
            seut_pattern_feasibility(&exp, &pattern, &default_utility_family(), 50),
            Err(BaselineError::GridTooCoarse(50))
        ));
    }

    #[test]
    fn pattern_validation() {
        let exp = ellsberg_urn();
        assert!(PreferencePattern::new(&[("f1", "f1")])
            .validate(&exp)
            .is_err());
        assert!(PreferencePattern::new(&[("f1", "f2"), ("f2", "f1")])
            .validate(&exp)
            .is_err());
        assert!(PreferencePattern::new(&[("f1", "f9")])
            .validate(&exp)
            .is_err());
        assert_eq!(
            PreferencePattern::parse("f1>f2, f4>f3").unwrap(),
            PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")])
        );
    }

    #[test]
    fn sure_thing_violation_detected() {
        let exp = ellsberg_urn();
        let paradox = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
        let report =
            sure_thing_check(&exp, ("f1", "f2"), ("f3", "f4"), &["yellow"], &paradox).unwrap();
        assert!(!report.conforms);

        let consistent = PreferencePattern::new(&[("f1", "f2"), ("f3", "f4")]);
        let report =
            sure_thing_check(&exp, ("f1", "f2"), ("f3", "f4"), &["yellow"], &consistent)
                .unwrap();
        assert!(report.conforms);
    }

    #[test]
    fn sure_thing_structural_check() {
        let exp = ellsberg_urn();
        let pattern = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
        // pairs differing on red as well are rejected
        assert!(matches!(
            sure_thing_check(&exp, ("f1", "f2"), ("f3", "f4"), &["red"], &pattern),
            Err(BaselineError::PairsNotSureThingRelated(_))
        ));
    }

    #[test]
    fn maxmin_ellsberg_values() {
        let exp = ellsberg_urn();
        let priors = full_prior_set(&exp.urn);
        let u = UtilityFunction::Linear;
        let values: Vec<f64> = ["f1", "f2", "f3", "f4"]
            .iter()
            .map(|n| maxmin_expected_utility(exp.act(n).unwrap(), &priors, &u).unwrap())
            .collect();
        let expected = [4.0, 0.0, 4.0, 8.0];
        for (v, e) in values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{values:?}");
        }
        // pattern f1 > f2 and f4 > f3 reproduced
        assert!(values[0] > values[1] && values[3] > values[2]);
    }

    #[test]
    fn maxmin_vertex_matches_grid_oracle() {
        let exp = ellsberg_urn();
        let priors = full_prior_set(&exp.urn);
        let u = UtilityFunction::Power { alpha: 0.5 };
        for name in ["f1", "f2", "f3", "f4"] {
            let act = exp.act(name).unwrap();
            let vertex = maxmin_expected_utility(act, &priors, &u).unwrap();
            // dense grid oracle
            let mut oracle = f64::INFINITY;
            for p in priors.grid(1001) {
                oracle = oracle.min(classical_expected_utility(act, &p, &u).unwrap());
            }
            assert!((vertex - oracle).abs() < 1e-10, "{name}: {vertex} vs {oracle}");
        }
    }

    #[test]
    fn choquet_convex_capacity_reproduces_pattern() {
        let exp = ellsberg_urn();
        let cap = ellsberg_convex_capacity();
        assert!(cap.is_convex());
        let u = UtilityFunction::Linear;
        let values: Vec<f64> = ["f1", "f2", "f3", "f4"]
            .iter()
            .map(|n| choquet_expected_utility(exp.act(n).unwrap(), &cap, &u).unwrap())
            .collect();
        let expected = [4.0, 3.0, 7.0, 8.0];
        for (v, e) in values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{values:?}");
        }
        assert!(values[0] > values[1] && values[3] > values[2]);
    }

    #[test]
    fn choquet_additive_reduces_to_classical() {
        let exp = ellsberg_urn();
        let p = ellsberg_prior(1.0 / 3.0);
        let cap = Capacity::additive(&p);
        let u = UtilityFunction::Linear;
        let f3 = exp.act("f3").unwrap();
        let ceu = choquet_expected_utility(f3, &cap, &u).unwrap();
        assert!((ceu - 8.0).abs() < 1e-12);
        let eu = classical_expected_utility(f3, &p, &u).unwrap();
        assert!((ceu - eu).abs() < 1e-12);
    }

    #[test]
    fn choquet_constant_act_is_utility() {
        let cap = ellsberg_convex_capacity();
        let act = crate::urn::Act::new(
            "const",
            &[("red", 7.0), ("yellow", 7.0), ("black", 7.0)],
        );
        for u in default_utility_family() {
            let ceu = choquet_expected_utility(&act, &cap, &u).unwrap();
            assert!((ceu - utility_eval(&u, 7.0).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn variational_zero_penalty_equals_maxmin() {
        let exp = ellsberg_urn();
        let priors = full_prior_set(&exp.urn);
        let u = UtilityFunction::Linear;
        for name in ["f1", "f2", "f3", "f4"] {
            let act = exp.act(name).unwrap();
            let var = variational_expected_utility(act, &priors, |_| 0.0, 201, &u).unwrap();
            let mm = maxmin_expected_utility(act, &priors, &u).unwrap();
            assert!((var - mm).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn variational_linear_penalty() {
        // Ellsberg f2 with penalty 12·p_black: inf of 24·p_black = 0 at p_black = 0
        let exp = ellsberg_urn();
        let priors = full_prior_set(&exp.urn);
        let u = UtilityFunction::Linear;
        let f2 = exp.act("f2").unwrap();
        let v = variational_expected_utility(
            f2,
            &priors,
            |p| 12.0 * p.get("black").unwrap(),
            201,
            &u,
        )
        .unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn second_order_examples() {
        let exp = ellsberg_urn();
        let u = UtilityFunction::Linear;
        let f2 = exp.act("f2").unwrap();

        // degenerate μ, identity φ → classical EU
        let p = ellsberg_prior(0.5);
        let so = second_order_expected_utility(
            f2,
            &[(p.clone(), 1.0)],
            &PhiSpec::Identity,
            &u,
        )
        .unwrap();
        assert!((so - classical_expected_utility(f2, &p, &u).unwrap()).abs() < 1e-12);

        // uniform μ on the extremes, identity φ → (0 + 8)/2 = 4
        let mu = vec![
            (ellsberg_prior(0.0), 0.5),
            (ellsberg_prior(2.0 / 3.0), 0.5),
        ];
        let so = second_order_expected_utility(f2, &mu, &PhiSpec::Identity, &u).unwrap();
        assert!((so - 4.0).abs() < 1e-12);

        // concave φ = √ exhibits ambiguity aversion: (0 + √8)/2 < √4
        let so = second_order_expected_utility(f2, &mu, &PhiSpec::Sqrt, &u).unwrap();
        assert!((so - 8f64.sqrt() / 2.0).abs() < 1e-12);
        assert!(so < 2.0);
    }

    #[test]
    fn second_order_invalid_distribution() {
        let exp = ellsberg_urn();
        let f2 = exp.act("f2").unwrap();
        let mu = vec![(ellsberg_prior(0.0), 0.7)];
        assert!(matches!(
            second_order_expected_utility(&f2.clone(), &mu, &PhiSpec::Identity, &exp.utility),
            Err(BaselineError::InvalidDistribution(_))
        ));
    }

    #[test]
    fn capacity_validation() {
        // non-monotone
        assert!(Capacity::from_events(
            &["a", "b"],
            &[(&[], 0.0), (&["a"], 0.9), (&["b"], 0.2), (&["a", "b"], 0.5)],
        )
        .is_err());
        // missing event
        assert!(matches!(
            Capacity::from_events(&["a", "b"], &[(&[], 0.0), (&["a", "b"], 1.0)]),
            Err(BaselineError::MissingEvent(_))
        ));
    }
}

//! The C⁴ quantum model of the Machina reflection urn: states constrained
//! by informational symmetry, act operators over two independent ambiguous
//! blocks, pattern search, and the classical infeasibility of the reflected
//! pattern.

use crate::baselines::{
    seut_pattern_feasibility, FeasibilityVerdict, PreferencePattern,
};
use crate::ellsberg::{ActOperator, BlockRotation, MechanismTag};
use crate::hilbert::{
    expectation, normalize, HermitianOperator, HilbertError, Projector, StateVector,
    UnitaryOperator, C64,
};
use crate::optimizer::{minimize_with_target, Budget, Param, ParamSpace};
use crate::urn::{machina_urn, utility_eval, Act, UrnError, UtilityFunction};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MachinaError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("state violates informational symmetry (|v_red|² + |v_yellow|² = {0})")]
    ConstraintViolated(f64),
    #[error("act '{0}' is not a Machina act")]
    UnknownAct(String),
    #[error("no model found for pattern '{0}' within the restart budget")]
    NotFound(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Urn(#[from] UrnError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Optim(#[from] crate::optimizer::OptimError),
}

pub type Result<T> = std::result::Result<T, MachinaError>;

pub const RED: usize = 0;
pub const YELLOW: usize = 1;
pub const BLACK: usize = 2;
pub const GREEN: usize = 3;

/// Strictness margin for pattern searches, in money units of the
/// {0, 25, 50} payoff scale.
pub const MACHINA_MARGIN: f64 = 0.5;

pub const SEARCH_RESTARTS: usize = 64;
pub const SEARCH_ITERATIONS: usize = 500;

/// A C⁴ state over (red, yellow, black, green) with the informational
/// symmetry of the urn: |v_red|² + |v_yellow|² = 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct MachinaState {
    state: StateVector,
}

impl MachinaState {
    pub fn new(state: StateVector) -> Result<Self> {
        if state.dim() != 4 {
            return Err(MachinaError::OutOfRange(format!(
                "dimension {} != 4",
                state.dim()
            )));
        }
        let ry = state.amplitude(RED).norm_sqr() + state.amplitude(YELLOW).norm_sqr();
        if (ry - 0.5).abs() > 1e-10 {
            return Err(MachinaError::ConstraintViolated(ry));
        }
        Ok(Self { state })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}

/// Parameters of a Machina state: moduli splits of the two ambiguous blocks
/// plus the three free phases (red real non-negative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachinaStateParams {
    pub ry_split: f64,
    pub bg_split: f64,
    pub phases: [f64; 3],
}

/// Amplitudes (√ry_split, √(1/2 − ry_split)·e^{iφ1},
/// √bg_split·e^{iφ2}, √(1/2 − bg_split)·e^{iφ3}).
pub fn build_machina_state(ry_split: f64, bg_split: f64, phases: [f64; 3]) -> Result<MachinaState> {
    for (name, s) in [("ry_split", ry_split), ("bg_split", bg_split)] {
        if !(0.0..=0.5 + 1e-15).contains(&s) {
            return Err(MachinaError::OutOfRange(format!(
                "{name} {s} outside [0, 1/2]"
            )));
        }
    }
    let ry = ry_split.min(0.5);
    let bg = bg_split.min(0.5);
    let a = [
        C64::new(ry.sqrt(), 0.0),
        C64::from_polar((0.5 - ry).max(0.0).sqrt(), phases[0]),
        C64::from_polar(bg.sqrt(), phases[1]),
        C64::from_polar((0.5 - bg).max(0.0).sqrt(), phases[2]),
    ];
    MachinaState::new(normalize(&a)?)
}

impl MachinaStateParams {
    pub fn build(&self) -> Result<MachinaState> {
        build_machina_state(self.ry_split, self.bg_split, self.phases)
    }
}

/// One rotation per ambiguous block: span{red, yellow} and
/// span{black, green}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPairRotation {
    pub ry: BlockRotation,
    pub bg: BlockRotation,
}

impl BlockPairRotation {
    pub const ZERO: BlockPairRotation = BlockPairRotation {
        ry: BlockRotation::ZERO,
        bg: BlockRotation::ZERO,
    };

    /// The rotated orthonormal pair inside one 2-dimensional block of C⁴,
    /// block starting at index `lo`.
    fn rotated_pair(rot: &BlockRotation, lo: usize) -> (StateVector, StateVector) {
        let (s, c) = rot.theta.sin_cos();
        let e = C64::from_polar(1.0, rot.phi);
        let zero = C64::new(0.0, 0.0);
        let mut first = vec![zero; 4];
        let mut second = vec![zero; 4];
        first[lo] = C64::new(c, 0.0);
        first[lo + 1] = e * s;
        second[lo] = -e.conj() * s;
        second[lo + 1] = C64::new(c, 0.0);
        (
            StateVector::new(first).expect("unit"),
            StateVector::new(second).expect("unit"),
        )
    }

    /// Block-diagonal unitary acting as the two rotations on their blocks.
    pub fn block_unitary(&self) -> UnitaryOperator {
        let mut m = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
        for (rot, lo) in [(&self.ry, RED), (&self.bg, BLACK)] {
            let (s, c) = rot.theta.sin_cos();
            let e = C64::from_polar(1.0, rot.phi);
            m[(lo, lo)] = C64::new(c, 0.0);
            m[(lo, lo + 1)] = -e.conj() * s;
            m[(lo + 1, lo)] = e * s;
            m[(lo + 1, lo + 1)] = C64::new(c, 0.0);
        }
        UnitaryOperator::new(m).expect("block rotations are unitary")
    }
}

/// State-dependence mechanisms for the Machina acts, mirroring the Ellsberg
/// model but with rotations confined to the two ambiguous blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum MachinaModel {
    /// Canonical projectors and one fixed state for both bets.
    Canonical,
    /// A block-diagonal unitary applied to the state before each bet pair.
    ContextualState {
        bet12: BlockPairRotation,
        bet34: BlockPairRotation,
    },
    /// Act-specific rotated eigenprojectors for f2 and f3 inside the
    /// ambiguous blocks.
    RotatedProjectors {
        f2: BlockPairRotation,
        f3: BlockPairRotation,
    },
}

fn block_payoffs(act: &Act) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (k, c) in ["red", "yellow", "black", "green"].iter().enumerate() {
        out[k] = act
            .payoff(c)
            .ok_or_else(|| MachinaError::UnknownAct(act.name.clone()))?;
    }
    Ok(out)
}

/// Builds one Machina act operator F = Σ u(payoff)·P_event. A block whose
/// two payoffs agree contributes u·P_block; otherwise the block's rank-1
/// projectors, rotated per model for f2 and f3.
pub fn machina_act_operator(
    act: &Act,
    u: &UtilityFunction,
    model: &MachinaModel,
) -> Result<ActOperator> {
    let pay = block_payoffs(act)?;
    let rotation = match model {
        MachinaModel::RotatedProjectors { f2, f3 } => match act.name.as_str() {
            "f2" => *f2,
            "f3" => *f3,
            _ => BlockPairRotation::ZERO,
        },
        _ => BlockPairRotation::ZERO,
    };

    let mut m = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
    let mut parts = Vec::new();
    for (lo, rot, labels) in [
        (RED, &rotation.ry, ("red", "yellow")),
        (BLACK, &rotation.bg, ("black", "green")),
    ] {
        let (pa, pb) = (pay[lo], pay[lo + 1]);
        if (pa - pb).abs() < 1e-12 {
            let uv = utility_eval(u, pa)?;
            m[(lo, lo)] += C64::new(uv, 0.0);
            m[(lo + 1, lo + 1)] += C64::new(uv, 0.0);
            parts.push(format!("u({pa})·P_{{{},{}}}", labels.0, labels.1));
        } else {
            let (first, second) = BlockPairRotation::rotated_pair(rot, lo);
            m += Projector::onto(&first).matrix() * C64::new(utility_eval(u, pa)?, 0.0);
            m += Projector::onto(&second).matrix() * C64::new(utility_eval(u, pb)?, 0.0);
            parts.push(format!(
                "u({pa})·P_{}(θ={},φ={}) + u({pb})·P_{}(θ,φ)",
                labels.0, rot.theta, rot.phi, labels.1
            ));
        }
    }
    Ok(ActOperator {
        name: act.name.clone(),
        op: HermitianOperator::new(m)?,
        recipe: parts.join(" + "),
    })
}

/// All four Machina act operators in urn order.
pub fn machina_act_operators(u: &UtilityFunction, model: &MachinaModel) -> Result<Vec<ActOperator>> {
    machina_urn()
        .acts
        .iter()
        .map(|a| machina_act_operator(a, u, model))
        .collect()
}

/// ⟨v|F|v⟩ for a Machina state.
pub fn machina_expected_utility(state: &MachinaState, f: &ActOperator) -> Result<f64> {
    Ok(expectation(state.state(), &f.op)?)
}

/// Applies a cognitive-context unitary; the post-state must keep the
/// informational symmetry within 1e-8.
pub fn apply_machina_context(
    state: &MachinaState,
    context: &UnitaryOperator,
) -> Result<MachinaState> {
    let post = context.apply(state.state())?;
    let ry = post.amplitude(RED).norm_sqr() + post.amplitude(YELLOW).norm_sqr();
    if (ry - 0.5).abs() > 1e-8 {
        return Err(MachinaError::ConstraintViolated(ry));
    }
    MachinaState::new(post)
}

/// Expected utilities of all four Machina acts under a state and model.
pub fn evaluate_all_machina(
    state: &MachinaState,
    model: &MachinaModel,
    u: &UtilityFunction,
) -> Result<BTreeMap<String, f64>> {
    let exp = machina_urn();
    let mut table = BTreeMap::new();
    for act in &exp.acts {
        let f = machina_act_operator(act, u, model)?;
        let effective = match model {
            MachinaModel::ContextualState { bet12, bet34 } => {
                let rot = if act.name == "f1" || act.name == "f2" {
                    bet12
                } else {
                    bet34
                };
                apply_machina_context(state, &rot.block_unitary())?
            }
            _ => state.clone(),
        };
        table.insert(act.name.clone(), machina_expected_utility(&effective, &f)?);
    }
    Ok(table)
}

/// A found Machina model: parameters, state, and re-verifiable EU table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachinaPatternFit {
    pub model: MachinaModel,
    pub state: MachinaStateParams,
    pub eu: BTreeMap<String, f64>,
    pub margin: f64,
    pub seed: u64,
    pub restarts_used: usize,
}

fn model_from_params(tag: MechanismTag, extra: &[f64]) -> MachinaModel {
    let pair = |p: &[f64]| BlockPairRotation {
        ry: BlockRotation {
            theta: p[0],
            phi: p[1],
        },
        bg: BlockRotation {
            theta: p[2],
            phi: p[3],
        },
    };
    match tag {
        MechanismTag::Canonical => MachinaModel::Canonical,
        MechanismTag::ContextualState => MachinaModel::ContextualState {
            bet12: pair(&extra[0..4]),
            bet34: pair(&extra[4..8]),
        },
        MechanismTag::RotatedProjectors => MachinaModel::RotatedProjectors {
            f2: pair(&extra[0..4]),
            f3: pair(&extra[4..8]),
        },
    }
}

/// Deterministic multi-start search for a Machina state and model under
/// which every strict preference in the pattern holds with margin ≥ 0.5.
pub fn machina_pattern_search(
    pattern: &PreferencePattern,
    mechanism: MechanismTag,
    u: &UtilityFunction,
    seed: u64,
) -> Result<MachinaPatternFit> {
    let exp = machina_urn();
    pattern
        .validate(&exp)
        .map_err(|e| MachinaError::NotFound(format!("{pattern}: {e}")))?;

    let mut params = vec![
        Param::bounded("ry_split", 0.0, 0.5),
        Param::bounded("bg_split", 0.0, 0.5),
        Param::angle("phase_y"),
        Param::angle("phase_b"),
        Param::angle("phase_g"),
    ];
    if mechanism != MechanismTag::Canonical {
        for k in 0..8 {
            params.push(Param::angle(&format!("rot{k}")));
        }
    }
    let space = ParamSpace::new(params);

    let objective = |p: &[f64]| -> f64 {
        let state = match build_machina_state(p[0], p[1], [p[2], p[3], p[4]]) {
            Ok(s) => s,
            Err(_) => return f64::MAX / 2.0,
        };
        let model = model_from_params(mechanism, &p[5..]);
        match evaluate_all_machina(&state, &model, u) {
            Ok(table) => pattern
                .prefs
                .iter()
                .map(|(a, b)| (MACHINA_MARGIN - (table[a] - table[b])).max(0.0))
                .sum(),
            Err(_) => f64::MAX / 2.0,
        }
    };

    let fit = minimize_with_target(
        objective,
        &space,
        seed,
        Budget::new(SEARCH_RESTARTS, SEARCH_ITERATIONS),
        Some(0.0),
    )?;
    if fit.objective > 0.0 {
        return Err(MachinaError::NotFound(pattern.to_string()));
    }

    let state_params = MachinaStateParams {
        ry_split: fit.params[0],
        bg_split: fit.params[1],
        phases: [fit.params[2], fit.params[3], fit.params[4]],
    };
    let model = model_from_params(mechanism, &fit.params[5..]);
    let eu = evaluate_all_machina(&state_params.build()?, &model, u)?;
    for (a, b) in &pattern.prefs {
        debug_assert!(eu[a] - eu[b] >= MACHINA_MARGIN - 1e-12);
    }
    Ok(MachinaPatternFit {
        model,
        state: state_params,
        eu,
        margin: MACHINA_MARGIN,
        seed,
        restarts_used: fit.restarts_used,
    })
}

/// Classical SEUT feasibility of a Machina pattern, over priors respecting
/// p_red + p_yellow = p_black + p_green = 1/2.
pub fn machina_seut_infeasibility(
    pattern: &PreferencePattern,
    grid_points: usize,
) -> Result<FeasibilityVerdict> {
    let exp = machina_urn();
    Ok(seut_pattern_feasibility(
        &exp,
        pattern,
        &crate::baselines::default_utility_family(),
        grid_points,
    )?)
}

/// Deterministic stream of valid Machina states for sampling checks.
pub fn sample_machina_states(seed: u64, count: usize) -> Vec<MachinaState> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            build_machina_state(
                rng.gen_range(0.0..=0.5),
                rng.gen_range(0.0..=0.5),
                [
                    rng.gen_range(0.0..crate::optimizer::TWO_PI),
                    rng.gen_range(0.0..crate::optimizer::TWO_PI),
                    rng.gen_range(0.0..crate::optimizer::TWO_PI),
                ],
            )
            .expect("sampled state valid")
        })
        .collect()
}

//! The C³ quantum model of the three-color Ellsberg urn: states with
//! p(red) = 1/3, act operators, quantum expected utility, contextual state
//! change, and search for states and attitude models reproducing the
//! paradoxical choice pattern.

use crate::baselines::PreferencePattern;
use crate::hilbert::{
    expectation, normalize, HermitianOperator, HilbertError, Projector, Pvm, StateVector,
    UnitaryOperator, C64,
};
use crate::optimizer::{minimize_with_target, Budget, Param, ParamSpace};
use crate::urn::{ellsberg_urn, utility_eval, Act, UrnError, UtilityFunction};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EllsbergError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("state violates the red-probability constraint (|v_red|² = {0})")]
    ConstraintViolated(f64),
    #[error("act '{0}' is not an Ellsberg act")]
    UnknownAct(String),
    #[error("no model found for pattern '{0}' within the restart budget")]
    NotFound(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Urn(#[from] UrnError),
    #[error(transparent)]
    Optim(#[from] crate::optimizer::OptimError),
}

pub type Result<T> = std::result::Result<T, EllsbergError>;

pub const RED: usize = 0;
pub const YELLOW: usize = 1;
pub const BLACK: usize = 2;

/// Red probability fixed by the urn: 30 of 90 balls.
pub const P_RED: f64 = 1.0 / 3.0;

/// Fraction of u(12) a strict preference must clear in pattern searches.
pub const PATTERN_MARGIN_FRACTION: f64 = 0.05;

pub const SEARCH_RESTARTS: usize = 64;
pub const SEARCH_ITERATIONS: usize = 500;

/// A C³ state of the cognitive Ellsberg entity, basis (red, yellow, black),
/// with |v_red|² = 1/3.
#[derive(Debug, Clone, PartialEq)]
pub struct EllsbergState {
    state: StateVector,
}

impl EllsbergState {
    pub fn new(state: StateVector) -> Result<Self> {
        if state.dim() != 3 {
            return Err(EllsbergError::OutOfRange(format!(
                "dimension {} != 3",
                state.dim()
            )));
        }
        let p_red = state.amplitude(RED).norm_sqr();
        if (p_red - P_RED).abs() > 1e-10 {
            return Err(EllsbergError::ConstraintViolated(p_red));
        }
        Ok(Self { state })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}

/// The canonical color measurement context: rank-1 projectors onto
/// (red, yellow, black).
pub fn color_context() -> Pvm {
    Pvm::canonical(&["red", "yellow", "black"]).expect("canonical PVM")
}

/// Parameters of an Ellsberg state: amplitudes
/// (√(1/3), √y_weight·e^{i·phase_y}, √(2/3 − y_weight)·e^{i·phase_b}),
/// global phase fixed so the red amplitude is real positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateParams {
    pub y_weight: f64,
    pub phase_y: f64,
    pub phase_b: f64,
}

pub fn build_ellsberg_state(y_weight: f64, phase_y: f64, phase_b: f64) -> Result<EllsbergState> {
    if !(0.0..=2.0 / 3.0 + 1e-15).contains(&y_weight) {
        return Err(EllsbergError::OutOfRange(format!(
            "y_weight {y_weight} outside [0, 2/3]"
        )));
    }
    let y_weight = y_weight.min(2.0 / 3.0);
    let ar = C64::new(P_RED.sqrt(), 0.0);
    let ay = C64::from_polar(y_weight.sqrt(), phase_y);
    let ab = C64::from_polar((2.0 / 3.0 - y_weight).max(0.0).sqrt(), phase_b);
    EllsbergState::new(normalize(&[ar, ay, ab])?)
}

impl StateParams {
    pub fn build(&self) -> Result<EllsbergState> {
        build_ellsberg_state(self.y_weight, self.phase_y, self.phase_b)
    }
}

/// Rotation of the ambiguous yellow–black plane by angle θ and phase φ:
/// |y'⟩ = cosθ|y⟩ + e^{iφ}sinθ|b⟩, |b'⟩ = −e^{−iφ}sinθ|y⟩ + cosθ|b⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRotation {
    pub theta: f64,
    pub phi: f64,
}

impl BlockRotation {
    pub const ZERO: BlockRotation = BlockRotation {
        theta: 0.0,
        phi: 0.0,
    };

    /// The rotated pair (|y'⟩, |b'⟩) inside span{yellow, black} of C³.
    fn rotated_pair(&self) -> (StateVector, StateVector) {
        let (s, c) = self.theta.sin_cos();
        let e = C64::from_polar(1.0, self.phi);
        let zero = C64::new(0.0, 0.0);
        let y = StateVector::new(vec![zero, C64::new(c, 0.0), e * s]).expect("unit");
        let b = StateVector::new(vec![zero, -e.conj() * s, C64::new(c, 0.0)]).expect("unit");
        (y, b)
    }

    /// Block unitary acting as this rotation on span{yellow, black}.
    pub fn block_unitary(&self) -> UnitaryOperator {
        let (s, c) = self.theta.sin_cos();
        let e = C64::from_polar(1.0, self.phi);
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                one,
                zero,
                zero,
                zero,
                C64::new(c, 0.0),
                -e.conj() * s,
                zero,
                e * s,
                C64::new(c, 0.0),
            ],
        );
        UnitaryOperator::new(m).expect("block rotation is unitary")
    }
}

/// How the expected utilities of the ambiguous acts f2 and f3 acquire their
/// state dependence. Every mechanism keeps f1 and f4 ambiguity-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum AmbiguityAttitudeModel {
    /// Canonical projectors and one fixed state for both bets.
    Canonical,
    /// A block unitary on span{yellow, black} applied to the state before
    /// each bet pair; projectors stay canonical.
    ContextualState {
        bet12: BlockRotation,
        bet34: BlockRotation,
    },
    /// Act-specific ambiguous-event eigenprojectors inside
    /// span{yellow, black}.
    RotatedProjectors {
        f2: BlockRotation,
        f3: BlockRotation,
    },
}

/// A self-adjoint act operator together with its construction recipe.
#[derive(Debug, Clone)]
pub struct ActOperator {
    pub name: String,
    pub op: HermitianOperator,
    pub recipe: String,
}

fn projector_matrix(state: &StateVector) -> DMatrix<C64> {
    Projector::onto(state).matrix().clone()
}

/// Builds the act operator F = Σ_events u(payoff)·P_event. The red projector
/// is always canonical; ambiguous-event projectors inside span{yellow, black}
/// come from the model (canonical except under rotated projectors).
pub fn act_operator(
    act: &Act,
    u: &UtilityFunction,
    model: &AmbiguityAttitudeModel,
) -> Result<ActOperator> {
    for c in ["red", "yellow", "black"] {
        if act.payoff(c).is_none() {
            return Err(EllsbergError::UnknownAct(act.name.clone()));
        }
    }
    let u_red = utility_eval(u, act.payoff("red").unwrap())?;
    let py = act.payoff("yellow").unwrap();
    let pb = act.payoff("black").unwrap();
    let rotation = match model {
        AmbiguityAttitudeModel::RotatedProjectors { f2, f3 } => match act.name.as_str() {
            "f2" => *f2,
            "f3" => *f3,
            _ => BlockRotation::ZERO,
        },
        _ => BlockRotation::ZERO,
    };

    let mut m = DMatrix::from_element(3, 3, C64::new(0.0, 0.0));
    m[(RED, RED)] = C64::new(u_red, 0.0);
    let recipe;
    if (py - pb).abs() < 1e-12 {
        // block-constant payoff: the whole ambiguous subspace as one event
        let u_yb = utility_eval(u, py)?;
        m[(YELLOW, YELLOW)] = C64::new(u_yb, 0.0);
        m[(BLACK, BLACK)] = C64::new(u_yb, 0.0);
        recipe = format!(
            "u({})·P_red + u({py})·P_{{yellow,black}}",
            act.payoff("red").unwrap()
        );
    } else {
        let (y, b) = rotation.rotated_pair();
        m += projector_matrix(&y) * C64::new(utility_eval(u, py)?, 0.0);
        m += projector_matrix(&b) * C64::new(utility_eval(u, pb)?, 0.0);
        recipe = format!(
            "u({})·P_red + u({py})·P_y(θ={},φ={}) + u({pb})·P_b(θ,φ)",
            act.payoff("red").unwrap(),
            rotation.theta,
            rotation.phi
        );
    }
    Ok(ActOperator {
        name: act.name.clone(),
        op: HermitianOperator::new(m)?,
        recipe,
    })
}

/// ⟨v|F|v⟩, the quantum expected utility of an act in an Ellsberg state.
pub fn quantum_expected_utility(state: &EllsbergState, f: &ActOperator) -> Result<f64> {
    Ok(expectation(state.state(), &f.op)?)
}

/// Applies a cognitive-context unitary; the post-state must still satisfy
/// the red-probability constraint within 1e-8.
pub fn apply_context(state: &EllsbergState, context: &UnitaryOperator) -> Result<EllsbergState> {
    let post = context.apply(state.state())?;
    let p_red = post.amplitude(RED).norm_sqr();
    if (p_red - P_RED).abs() > 1e-8 {
        return Err(EllsbergError::ConstraintViolated(p_red));
    }
    // re-verify the tighter constructor invariant on the block-preserving path
    EllsbergState::new(post).map_err(|e| match e {
        EllsbergError::ConstraintViolated(p) if (p - P_RED).abs() <= 1e-8 => {
            EllsbergError::ConstraintViolated(p)
        }
        other => other,
    })
}

/// Expected utilities of all four Ellsberg acts under a state and model.
/// For the contextual mechanism the block unitary of each bet pair is applied
/// to the state before evaluating that pair's acts.
pub fn evaluate_all(
    state: &EllsbergState,
    model: &AmbiguityAttitudeModel,
    u: &UtilityFunction,
) -> Result<BTreeMap<String, f64>> {
    let exp = ellsberg_urn();
    let u12 = utility_eval(u, 12.0)?;
    let mut table = BTreeMap::new();
    for act in &exp.acts {
        let f = act_operator(act, u, model)?;
        let effective = match model {
            AmbiguityAttitudeModel::ContextualState { bet12, bet34 } => {
                let rot = if act.name == "f1" || act.name == "f2" {
                    bet12
                } else {
                    bet34
                };
                apply_context(state, &rot.block_unitary())?
            }
            _ => state.clone(),
        };
        let eu = quantum_expected_utility(&effective, &f)?;
        // f1 and f4 are ambiguity-free; store the exact analytic value
        let value = match act.name.as_str() {
            "f1" => {
                debug_assert!((eu - u12 / 3.0).abs() < 1e-10);
                u12 / 3.0
            }
            "f4" => {
                debug_assert!((eu - 2.0 * u12 / 3.0).abs() < 1e-10);
                2.0 * u12 / 3.0
            }
            _ => eu,
        };
        table.insert(act.name.clone(), value);
    }
    Ok(table)
}

/// Mechanism selector for pattern searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismTag {
    Canonical,
    ContextualState,
    RotatedProjectors,
}

/// A found model: parameters, state, and the re-verifiable EU table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternModelFit {
    pub model: AmbiguityAttitudeModel,
    pub state: StateParams,
    pub eu: BTreeMap<String, f64>,
    pub margin: f64,
    pub seed: u64,
    pub restarts_used: usize,
}

fn model_from_params(tag: MechanismTag, extra: &[f64]) -> AmbiguityAttitudeModel {
    match tag {
        MechanismTag::Canonical => AmbiguityAttitudeModel::Canonical,
        MechanismTag::ContextualState => AmbiguityAttitudeModel::ContextualState {
            bet12: BlockRotation {
                theta: extra[0],
                phi: extra[1],
            },
            bet34: BlockRotation {
                theta: extra[2],
                phi: extra[3],
            },
        },
        MechanismTag::RotatedProjectors => AmbiguityAttitudeModel::RotatedProjectors {
            f2: BlockRotation {
                theta: extra[0],
                phi: extra[1],
            },
            f3: BlockRotation {
                theta: extra[2],
                phi: extra[3],
            },
        },
    }
}

/// Deterministic multi-start search for a state (and, mechanism permitting,
/// rotations) under which every strict preference in the pattern holds with
/// margin ≥ 0.05·u(12).
pub fn find_pattern_model(
    pattern: &PreferencePattern,
    mechanism: MechanismTag,
    u: &UtilityFunction,
    seed: u64,
) -> Result<PatternModelFit> {
    let exp = ellsberg_urn();
    pattern
        .validate(&exp)
        .map_err(|e| EllsbergError::NotFound(format!("{pattern}: {e}")))?;
    let margin = PATTERN_MARGIN_FRACTION * utility_eval(u, 12.0)?;

    let mut params = vec![
        Param::bounded("y_weight", 0.0, 2.0 / 3.0),
        Param::angle("phase_y"),
        Param::angle("phase_b"),
    ];
    if mechanism != MechanismTag::Canonical {
        for name in ["theta_a", "phi_a", "theta_b", "phi_b"] {
            params.push(Param::angle(name));
        }
    }
    let space = ParamSpace::new(params);

    let objective = |p: &[f64]| -> f64 {
        let state = match build_ellsberg_state(p[0], p[1], p[2]) {
            Ok(s) => s,
            Err(_) => return f64::MAX / 2.0,
        };
        let model = model_from_params(mechanism, &p[3..]);
        match evaluate_all(&state, &model, u) {
            Ok(table) => pattern
                .prefs
                .iter()
                .map(|(a, b)| (margin - (table[a] - table[b])).max(0.0))
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
        return Err(EllsbergError::NotFound(pattern.to_string()));
    }

    let state_params = StateParams {
        y_weight: fit.params[0],
        phase_y: fit.params[1],
        phase_b: fit.params[2],
    };
    let model = model_from_params(mechanism, &fit.params[3..]);
    let state = state_params.build()?;
    let eu = evaluate_all(&state, &model, u)?;
    // re-verify from scratch
    for (a, b) in &pattern.prefs {
        debug_assert!(eu[a] - eu[b] >= margin - 1e-12);
    }
    Ok(PatternModelFit {
        model,
        state: state_params,
        eu,
        margin,
        seed,
        restarts_used: fit.restarts_used,
    })
}

/// Deterministic stream of valid Ellsberg states for sampling checks.
pub fn sample_states(seed: u64, count: usize) -> Vec<EllsbergState> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            build_ellsberg_state(
                rng.gen_range(0.0..=2.0 / 3.0),
                rng.gen_range(0.0..crate::optimizer::TWO_PI),
                rng.gen_range(0.0..crate::optimizer::TWO_PI),
            )
            .expect("sampled state valid")
        })
        .collect()
}

/// True iff the act operator's expected utility has variance below 1e-18
/// over sampled valid Ellsberg states, i.e. the act is ambiguity-free.
pub fn ambiguity_free_check(f: &ActOperator, samples: usize) -> bool {
    assert!(samples >= 1000, "need at least 1000 samples");
    let states = sample_states(0xE115_BE26, samples);
    let values: Vec<f64> = states
        .iter()
        .map(|s| quantum_expected_utility(s, f).expect("evaluation"))
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / values.len() as f64;
    var < 1e-18
}

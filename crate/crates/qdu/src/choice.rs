//! The ±1 choice observables for the two Ellsberg bets: commuting pairs
//! built from a shared eigenbasis, Born-rule joint distributions, fits to
//! the observed choice marginals, the structural 3-cell limit of sharp
//! commuting pairs in C³, and real-vs-complex representability searches.

use crate::ellsberg::build_ellsberg_state;
use crate::hilbert::{
    commutator_norm, max_abs, HermitianOperator, HilbertError, StateVector, C64,
};
use crate::optimizer::{minimize_with_target, Budget, Param, ParamSpace};
use crate::urn::ObservedCounts;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Joint choice counts over the four (bet 1, bet 2) outcomes.
pub type ChoiceData = ObservedCounts;

#[derive(Debug, Error)]
pub enum ChoiceError {
    #[error("no participants in the choice data")]
    EmptyData,
    #[error("bad shared basis: {0}")]
    BadBasis(String),
    #[error("observables do not commute (norm {0:.3e})")]
    NotCommuting(f64),
    #[error("target {0} outside the open interval (0, 1)")]
    TargetOutOfRange(f64),
    #[error("no fit reached residual {target:.1e} (best {best:.3e}) within the restart budget")]
    FitFailed { target: f64, best: f64 },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Optim(#[from] crate::optimizer::OptimError),
    #[error(transparent)]
    Ellsberg(#[from] crate::ellsberg::EllsbergError),
}

pub type Result<T> = std::result::Result<T, ChoiceError>;

pub const FIT_RESIDUAL_TARGET: f64 = 1e-6;
pub const FIT_RESTARTS: usize = 64;
pub const FIT_ITERATIONS: usize = 500;

/// Marginal choice probabilities derived from joint counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub p_f1: f64,
    pub p_f2: f64,
    pub p_f3: f64,
    pub p_f4: f64,
}

/// Per-bet marginals from joint counts: p_f1 = (n_f1f3 + n_f1f4)/total, etc.
pub fn choice_weights(data: &ChoiceData) -> Result<Marginals> {
    let total = data.total();
    if total == 0 {
        return Err(ChoiceError::EmptyData);
    }
    let t = total as f64;
    let p_f1 = (data.f1f3 + data.f1f4) as f64 / t;
    let p_f3 = (data.f1f3 + data.f2f3) as f64 / t;
    Ok(Marginals {
        p_f1,
        p_f2: 1.0 - p_f1,
        p_f3,
        p_f4: 1.0 - p_f3,
    })
}

/// Joint outcome cells in fixed order; +1 ↔ f1 on the first bet, +1 ↔ f3 on
/// the second.
pub const CELLS: [(&str, i8, i8); 4] = [
    ("f1f3", 1, 1),
    ("f1f4", 1, -1),
    ("f2f3", -1, 1),
    ("f2f4", -1, -1),
];

/// Probabilities over the four joint choice outcomes, in `CELLS` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub cells: [f64; 4],
}

impl JointDistribution {
    pub fn new(cells: [f64; 4]) -> Result<Self> {
        let sum: f64 = cells.iter().sum();
        if cells.iter().any(|&x| x < -1e-10) || (sum - 1.0).abs() > 1e-10 {
            return Err(ChoiceError::BadBasis(format!(
                "not a distribution: {cells:?}"
            )));
        }
        Ok(Self {
            cells: cells.map(|x| x.clamp(0.0, 1.0)),
        })
    }

    pub fn from_counts(data: &ChoiceData) -> Result<Self> {
        let total = data.total();
        if total == 0 {
            return Err(ChoiceError::EmptyData);
        }
        let t = total as f64;
        Ok(Self {
            cells: [
                data.f1f3 as f64 / t,
                data.f1f4 as f64 / t,
                data.f2f3 as f64 / t,
                data.f2f4 as f64 / t,
            ],
        })
    }

    pub fn marginals(&self) -> Marginals {
        Marginals {
            p_f1: self.cells[0] + self.cells[1],
            p_f2: self.cells[2] + self.cells[3],
            p_f3: self.cells[0] + self.cells[2],
            p_f4: self.cells[1] + self.cells[3],
        }
    }
}

/// Commuting ±1 observables O12, O34 with their shared eigenbasis and the
/// per-vector outcome labels (s, t).
#[derive(Debug, Clone)]
pub struct ChoiceObservablePair {
    pub basis: Vec<StateVector>,
    pub labels: Vec<(i8, i8)>,
    pub o12: HermitianOperator,
    pub o34: HermitianOperator,
}

/// Builds O12 = Σ s_k·Q_k and O34 = Σ t_k·Q_k from an orthonormal basis of
/// C³ and per-vector sign labels; the pair commutes by construction.
pub fn build_commuting_pair(
    basis: &[StateVector],
    labels: &[(i8, i8)],
) -> Result<ChoiceObservablePair> {
    if basis.len() != 3 || labels.len() != 3 {
        return Err(ChoiceError::BadBasis(format!(
            "need 3 basis vectors and labels, got {} and {}",
            basis.len(),
            labels.len()
        )));
    }
    for (s, t) in labels {
        if s.abs() != 1 || t.abs() != 1 {
            return Err(ChoiceError::BadBasis(format!("bad label ({s}, {t})")));
        }
    }
    for j in 0..3 {
        if basis[j].dim() != 3 {
            return Err(ChoiceError::BadBasis("basis vectors must live in C³".into()));
        }
        for k in 0..3 {
            let g = basis[j].inner(&basis[k])?;
            let expected = if j == k { 1.0 } else { 0.0 };
            if (g - C64::new(expected, 0.0)).norm() > 1e-10 {
                return Err(ChoiceError::BadBasis(format!(
                    "⟨q{j}|q{k}⟩ = {g} is not orthonormal"
                )));
            }
        }
    }
    let mut m12 = DMatrix::from_element(3, 3, C64::new(0.0, 0.0));
    let mut m34 = DMatrix::from_element(3, 3, C64::new(0.0, 0.0));
    for (q, (s, t)) in basis.iter().zip(labels) {
        let proj = q.amplitudes() * q.amplitudes().adjoint();
        m12 += proj.clone() * C64::new(*s as f64, 0.0);
        m34 += proj * C64::new(*t as f64, 0.0);
    }
    Ok(ChoiceObservablePair {
        basis: basis.to_vec(),
        labels: labels.to_vec(),
        o12: HermitianOperator::new(m12)?,
        o34: HermitianOperator::new(m34)?,
    })
}

impl ChoiceObservablePair {
    pub fn commutator_norm(&self) -> f64 {
        commutator_norm(&self.o12, &self.o34).expect("same dimension")
    }
}

/// Order-free joint distribution of a commuting pair in a state:
/// p(s,t) = Σ over basis vectors labeled (s,t) of |⟨q_k|v⟩|².
pub fn joint_distribution(
    state: &StateVector,
    pair: &ChoiceObservablePair,
) -> Result<JointDistribution> {
    let cn = pair.commutator_norm();
    if cn > 1e-10 {
        return Err(ChoiceError::NotCommuting(cn));
    }
    let mut cells = [0.0f64; 4];
    for (q, (s, t)) in pair.basis.iter().zip(&pair.labels) {
        let w = q.inner(state)?.norm_sqr();
        let idx = CELLS
            .iter()
            .position(|(_, cs, ct)| cs == s && ct == t)
            .expect("label maps to a cell");
        cells[idx] += w;
    }
    JointDistribution::new(cells)
}

/// Which bet is measured first in the sequential-collapse simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementOrder {
    Bet12First,
    Bet34First,
}

/// Independent sequential oracle: measure one observable, collapse, measure
/// the other. Works directly from the ±1 operators via P_± = (I ± O)/2 and
/// never consults the shared basis or labels.
pub fn sequential_distribution(
    state: &StateVector,
    o12: &HermitianOperator,
    o34: &HermitianOperator,
    order: MeasurementOrder,
) -> Result<JointDistribution> {
    let n = o12.dim();
    let id = DMatrix::<C64>::identity(n, n);
    for o in [o12, o34] {
        let defect = max_abs(&(o.matrix() * o.matrix() - &id));
        if defect > 1e-10 {
            return Err(ChoiceError::BadBasis(format!(
                "observable is not ±1-valued (O² defect {defect:.3e})"
            )));
        }
    }
    let half = C64::new(0.5, 0.0);
    let proj = |o: &HermitianOperator, sign: f64| -> DMatrix<C64> {
        (&id + o.matrix() * C64::new(sign, 0.0)) * half
    };
    let (first, second) = match order {
        MeasurementOrder::Bet12First => (o12, o34),
        MeasurementOrder::Bet34First => (o34, o12),
    };
    let mut cells = [0.0f64; 4];
    let v = state.amplitudes();
    for s1 in [1.0, -1.0] {
        let p1 = proj(first, s1);
        let collapsed: DVector<C64> = &p1 * v;
        let w1 = collapsed.norm_squared();
        if w1 < 1e-30 {
            continue;
        }
        let collapsed = collapsed.unscale(w1.sqrt());
        for s2 in [1.0, -1.0] {
            let p2 = proj(second, s2);
            let w2 = (&p2 * &collapsed).norm_squared();
            let (s, t) = match order {
                MeasurementOrder::Bet12First => (s1, s2),
                MeasurementOrder::Bet34First => (s2, s1),
            };
            let idx = CELLS
                .iter()
                .position(|(_, cs, ct)| *cs as f64 == s && *ct as f64 == t)
                .unwrap();
            cells[idx] += w1 * w2;
        }
    }
    JointDistribution::new(cells)
}

/// Serializable form of a fitted pair: basis columns as interleaved
/// [re, im, re, im, ...] arrays plus sign labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSpec {
    pub basis: Vec<Vec<f64>>,
    pub labels: Vec<(i8, i8)>,
}

impl PairSpec {
    pub fn from_pair(pair: &ChoiceObservablePair) -> Self {
        Self {
            basis: pair
                .basis
                .iter()
                .map(|q| {
                    q.amplitudes()
                        .iter()
                        .flat_map(|z| [z.re, z.im])
                        .collect()
                })
                .collect(),
            labels: pair.labels.clone(),
        }
    }

    pub fn to_pair(&self) -> Result<ChoiceObservablePair> {
        let basis = self
            .basis
            .iter()
            .map(|col| {
                let amps: Vec<C64> = col
                    .chunks(2)
                    .map(|c| C64::new(c[0], c[1]))
                    .collect();
                StateVector::new(amps).map_err(ChoiceError::from)
            })
            .collect::<Result<Vec<_>>>()?;
        build_commuting_pair(&basis, &self.labels)
    }
}

/// A fitted state and commuting pair reproducing marginal targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalFit {
    pub state: Vec<f64>,
    pub pair: PairSpec,
    pub residual: f64,
    pub seed: u64,
    pub restarts_used: usize,
}

impl MarginalFit {
    pub fn state_vector(&self) -> Result<StateVector> {
        let amps: Vec<C64> = self
            .state
            .chunks(2)
            .map(|c| C64::new(c[0], c[1]))
            .collect();
        StateVector::new(amps).map_err(ChoiceError::from)
    }
}

/// Best point found so far: (objective value, params, labels, restarts used).
type BestCandidate = (f64, Vec<f64>, [(i8, i8); 3], usize);

/// Maps search parameters to a candidate state and shared eigenbasis.
type StateBasisBuilder = Box<dyn Fn(&[f64]) -> Option<(StateVector, Vec<StateVector>)>>;

/// All 4³ assignments of the three shared eigenvectors to joint cells, in
/// deterministic order.
fn label_assignments() -> Vec<[(i8, i8); 3]> {
    let mut out = Vec::with_capacity(64);
    for a in CELLS {
        for b in CELLS {
            for c in CELLS {
                out.push([(a.1, a.2), (b.1, b.2), (c.1, c.2)]);
            }
        }
    }
    out
}

/// Solves for basis weights realizing the marginal targets under a given
/// label assignment: Σw = 1, Σ_{s=+1} w = p_f1, Σ_{t=+1} w = p_f3.
/// Returns None when the 3×3 system is singular or a weight is negative.
fn assignment_weights(labels: &[(i8, i8); 3], p_f1: f64, p_f3: f64) -> Option<[f64; 3]> {
    let row_s: Vec<f64> = labels
        .iter()
        .map(|(s, _)| if *s == 1 { 1.0 } else { 0.0 })
        .collect();
    let row_t: Vec<f64> = labels
        .iter()
        .map(|(_, t)| if *t == 1 { 1.0 } else { 0.0 })
        .collect();
    let m = Matrix3::new(
        1.0, 1.0, 1.0, row_s[0], row_s[1], row_s[2], row_t[0], row_t[1], row_t[2],
    );
    let rhs = Vector3::new(1.0, p_f1, p_f3);
    let w = m.lu().solve(&rhs)?;
    if w.iter().any(|&x| x < -1e-9) {
        return None;
    }
    Some([w[0].max(0.0), w[1].max(0.0), w[2].max(0.0)])
}

/// Hermitian generator from 9 real parameters (3 diagonal, 3 complex
/// off-diagonal entries).
fn hermitian_generator(p: &[f64]) -> HermitianOperator {
    let z = |re: f64, im: f64| C64::new(re, im);
    let m = DMatrix::from_row_slice(
        3,
        3,
        &[
            z(p[0], 0.0),
            z(p[3], p[4]),
            z(p[5], p[6]),
            z(p[3], -p[4]),
            z(p[1], 0.0),
            z(p[7], p[8]),
            z(p[5], -p[6]),
            z(p[7], -p[8]),
            z(p[2], 0.0),
        ],
    );
    HermitianOperator::new(m).expect("generator is Hermitian by construction")
}

fn basis_from_unitary(u: &DMatrix<C64>) -> Vec<StateVector> {
    (0..3)
        .map(|k| {
            let col: Vec<C64> = u.column(k).iter().copied().collect();
            crate::hilbert::normalize(&col).expect("unitary column")
        })
        .collect()
}

/// (max violation, sum of squared violations) of the two marginal targets.
fn marginal_residual(
    state: &StateVector,
    basis: &[StateVector],
    labels: &[(i8, i8); 3],
    p_f1: f64,
    p_f4: f64,
) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m3 = 0.0;
    for (q, (s, t)) in basis.iter().zip(labels) {
        let w = q.inner(state).expect("dims match").norm_sqr();
        if *s == 1 {
            m1 += w;
        }
        if *t == 1 {
            m3 += w;
        }
    }
    let d1 = m1 - p_f1;
    let d4 = (1.0 - m3) - p_f4;
    (d1.abs().max(d4.abs()), d1 * d1 + d4 * d4)
}

/// Fits a state with |v_red|² = 1/3 and a commuting pair whose Born
/// marginals hit (p_f1, p_f4) within 1e-6. The shared basis is parametrized
/// as exp(i·H) for a Hermitian generator; deterministic given the seed.
pub fn fit_marginals(targets: (f64, f64), seed: u64) -> Result<MarginalFit> {
    let (t1, t4) = targets;
    for t in [t1, t4] {
        if !(t > 0.0 && t < 1.0) {
            return Err(ChoiceError::TargetOutOfRange(t));
        }
    }
    let p_f3 = 1.0 - t4;

    // state (y_weight, phase_y, phase_b) + 9 generator parameters
    let mut params = vec![
        Param::bounded("y_weight", 0.0, 2.0 / 3.0),
        Param::angle("phase_y"),
        Param::angle("phase_b"),
    ];
    for k in 0..9 {
        params.push(Param::bounded(
            &format!("h{k}"),
            -std::f64::consts::PI,
            std::f64::consts::PI,
        ));
    }
    let space = ParamSpace::new(params);

    let mut best_overall: Option<BestCandidate> = None;
    for labels in label_assignments() {
        if assignment_weights(&labels, t1, p_f3).is_none() {
            continue;
        }
        // minimize a smooth sum of squares; the reported residual is the
        // max violation at the found point
        let objective = |p: &[f64]| -> f64 {
            let state = match build_ellsberg_state(p[0], p[1], p[2]) {
                Ok(s) => s,
                Err(_) => return f64::MAX / 2.0,
            };
            let u = crate::hilbert::UnitaryOperator::exp_i_hermitian(&hermitian_generator(
                &p[3..12],
            ));
            let basis = basis_from_unitary(u.matrix());
            marginal_residual(state.state(), &basis, &labels, t1, t4).1
        };
        let fit = minimize_with_target(
            objective,
            &space,
            seed,
            Budget::new(FIT_RESTARTS, FIT_ITERATIONS),
            Some(FIT_RESIDUAL_TARGET * FIT_RESIDUAL_TARGET),
        )?;
        let better = match &best_overall {
            None => true,
            Some((b, ..)) => fit.objective < *b,
        };
        if better {
            best_overall = Some((fit.objective, fit.params, labels, fit.restarts_used));
        }
        if best_overall.as_ref().unwrap().0 <= FIT_RESIDUAL_TARGET * FIT_RESIDUAL_TARGET {
            break;
        }
    }

    let (_, p, labels, restarts_used) = best_overall.expect("some assignment is feasible");
    let check_state = build_ellsberg_state(p[0], p[1], p[2])?;
    let check_u =
        crate::hilbert::UnitaryOperator::exp_i_hermitian(&hermitian_generator(&p[3..12]));
    let check_basis = basis_from_unitary(check_u.matrix());
    let residual = marginal_residual(check_state.state(), &check_basis, &labels, t1, t4).0;
    if residual > FIT_RESIDUAL_TARGET {
        return Err(ChoiceError::FitFailed {
            target: FIT_RESIDUAL_TARGET,
            best: residual,
        });
    }
    let state = build_ellsberg_state(p[0], p[1], p[2])?;
    let u = crate::hilbert::UnitaryOperator::exp_i_hermitian(&hermitian_generator(&p[3..12]));
    let basis = basis_from_unitary(u.matrix());
    let pair = build_commuting_pair(&basis, &labels)?;
    Ok(MarginalFit {
        state: state
            .state()
            .amplitudes()
            .iter()
            .flat_map(|z| [z.re, z.im])
            .collect(),
        pair: PairSpec::from_pair(&pair),
        residual,
        seed,
        restarts_used,
    })
}

/// Best L1 distance from a 4-cell target to any distribution supported on
/// at most 3 cells: dropping the smallest cell and absorbing its mass costs
/// exactly twice that mass.
pub fn min_l1_joint_fit(target: &JointDistribution) -> (f64, [usize; 3]) {
    let mut drop = 0;
    for k in 1..4 {
        if target.cells[k] < target.cells[drop] {
            drop = k;
        }
    }
    let distance = 2.0 * target.cells[drop];
    let mut support = [0usize; 3];
    let mut j = 0;
    for k in 0..4 {
        if k != drop {
            support[j] = k;
            j += 1;
        }
    }
    (distance, support)
}

/// Number field the representability search is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Constraints a representability search must satisfy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub field: Field,
    /// (p_f1, p_f4) marginal targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal_targets: Option<(f64, f64)>,
    /// Full 4-cell joint target in `CELLS` order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_target: Option<[f64; 4]>,
    /// Red-probability constraint on the state (enforced by construction).
    pub red_probability: f64,
}

/// Search evidence for representing the constraints over a number field;
/// a large residual is a result, not an error, and no infeasibility theorem
/// is claimed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentabilityReport {
    pub field: Field,
    pub best_residual: f64,
    pub restarts_used: usize,
    pub violations: BTreeMap<String, f64>,
    pub seed: u64,
}

/// 3×3 rotation from an axis-angle vector (Rodrigues), giving a real
/// orthonormal shared basis.
fn rotation_from_axis(w: &[f64]) -> DMatrix<C64> {
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let a = Matrix3::new(
        0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0,
    );
    let r = if theta < 1e-12 {
        Matrix3::identity()
    } else {
        let k = a / theta;
        Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
    };
    DMatrix::from_fn(3, 3, |i, j| C64::new(r[(i, j)], 0.0))
}

fn constraint_violations(
    state: &StateVector,
    basis: &[StateVector],
    labels: &[(i8, i8); 3],
    constraints: &ConstraintSet,
) -> BTreeMap<String, f64> {
    let mut cells = [0.0f64; 4];
    for (q, (s, t)) in basis.iter().zip(labels) {
        let w = q.inner(state).expect("dims").norm_sqr();
        let idx = CELLS
            .iter()
            .position(|(_, cs, ct)| cs == s && ct == t)
            .unwrap();
        cells[idx] += w;
    }
    let m1 = cells[0] + cells[1];
    let m4 = cells[1] + cells[3];
    let mut out = BTreeMap::new();
    if let Some((t1, t4)) = constraints.marginal_targets {
        out.insert("p_f1".to_string(), (m1 - t1).abs());
        out.insert("p_f4".to_string(), (m4 - t4).abs());
    }
    if let Some(joint) = constraints.joint_target {
        for (k, (name, _, _)) in CELLS.iter().enumerate() {
            out.insert(format!("joint_{name}"), (cells[k] - joint[k]).abs());
        }
    }
    let p_red = state.amplitude(0).norm_sqr();
    out.insert(
        "red_probability".to_string(),
        (p_red - constraints.red_probability).abs(),
    );
    out
}

/// Runs the marginal/joint fit restricted to the requested field and reports
/// the best residual and per-constraint violations.
pub fn real_representability_search(
    constraints: &ConstraintSet,
    seed: u64,
) -> Result<RepresentabilityReport> {
    let (space, build): (ParamSpace, StateBasisBuilder) = match constraints.field {
        Field::Real => {
            // state angle in the yellow-black plane + 3 rotation parameters
            let mut params = vec![Param::angle("alpha")];
            for k in 0..3 {
                params.push(Param::bounded(
                    &format!("w{k}"),
                    -std::f64::consts::PI,
                    std::f64::consts::PI,
                ));
            }
            let red = constraints.red_probability;
            (
                ParamSpace::new(params),
                Box::new(move |p: &[f64]| {
                    let rest = (1.0 - red).max(0.0).sqrt();
                    let amps = vec![
                        C64::new(red.sqrt(), 0.0),
                        C64::new(rest * p[0].cos(), 0.0),
                        C64::new(rest * p[0].sin(), 0.0),
                    ];
                    let state = StateVector::new(amps).ok()?;
                    let u = rotation_from_axis(&p[1..4]);
                    Some((state, basis_from_unitary(&u)))
                }),
            )
        }
        Field::Complex => {
            let mut params = vec![
                Param::bounded("y_weight", 0.0, 2.0 / 3.0),
                Param::angle("phase_y"),
                Param::angle("phase_b"),
            ];
            for k in 0..9 {
                params.push(Param::bounded(
                    &format!("h{k}"),
                    -std::f64::consts::PI,
                    std::f64::consts::PI,
                ));
            }
            (
                ParamSpace::new(params),
                Box::new(|p: &[f64]| {
                    let state = build_ellsberg_state(p[0], p[1], p[2]).ok()?;
                    let u = crate::hilbert::UnitaryOperator::exp_i_hermitian(
                        &hermitian_generator(&p[3..12]),
                    );
                    Some((state.state().clone(), basis_from_unitary(u.matrix())))
                }),
            )
        }
    };

    let mut best: Option<BestCandidate> = None;
    let mut restarts_total = 0;
    for labels in label_assignments() {
        // smooth surrogate for the search; reported residual is the max
        // violation at the best point found
        let objective = |p: &[f64]| -> f64 {
            match build(p) {
                Some((state, basis)) => constraint_violations(&state, &basis, &labels, constraints)
                    .values()
                    .map(|v| v * v)
                    .sum(),
                None => f64::MAX / 2.0,
            }
        };
        let fit = minimize_with_target(
            objective,
            &space,
            seed,
            Budget::new(8, 400),
            Some(FIT_RESIDUAL_TARGET * FIT_RESIDUAL_TARGET),
        )?;
        restarts_total += fit.restarts_used;
        let better = match &best {
            None => true,
            Some((b, ..)) => fit.objective < *b,
        };
        if better {
            best = Some((fit.objective, fit.params, labels, restarts_total));
        }
        if best.as_ref().unwrap().0 <= FIT_RESIDUAL_TARGET * FIT_RESIDUAL_TARGET {
            break;
        }
    }
    let (_, p, labels, _) = best.expect("assignments nonempty");
    let violations = match build(&p) {
        Some((state, basis)) => constraint_violations(&state, &basis, &labels, constraints),
        None => BTreeMap::new(),
    };
    let best_residual = violations.values().fold(0.0f64, |m, v| m.max(*v));
    Ok(RepresentabilityReport {
        field: constraints.field,
        best_residual,
        restarts_used: restarts_total,
        violations,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::normalize;

    fn paper_counts() -> ChoiceData {
        ChoiceData {
            f1f3: 6,
            f1f4: 34,
            f2f3: 12,
            f2f4: 7,
        }
    }

    #[test]
    fn choice_weights_paper_counts() {
        let m = choice_weights(&paper_counts()).unwrap();
        assert!((m.p_f1 - 40.0 / 59.0).abs() < 1e-15);
        assert!((m.p_f4 - 41.0 / 59.0).abs() < 1e-15);
        assert!((m.p_f1 + m.p_f2 - 1.0).abs() < 1e-15);
        assert!((m.p_f3 + m.p_f4 - 1.0).abs() < 1e-15);
        // rounded to the reported weights
        assert!((m.p_f1 - 0.68).abs() < 0.005);
        assert!((m.p_f4 - 0.69).abs() < 0.005);
    }

    #[test]
    fn choice_weights_edge_cases() {
        let all14 = ChoiceData {
            f1f3: 0,
            f1f4: 10,
            f2f3: 0,
            f2f4: 0,
        };
        let m = choice_weights(&all14).unwrap();
        assert_eq!((m.p_f1, m.p_f2, m.p_f4, m.p_f3), (1.0, 0.0, 1.0, 0.0));

        let uniform = ChoiceData {
            f1f3: 5,
            f1f4: 5,
            f2f3: 5,
            f2f4: 5,
        };
        let m = choice_weights(&uniform).unwrap();
        assert_eq!((m.p_f1, m.p_f4), (0.5, 0.5));

        let empty = ChoiceData {
            f1f3: 0,
            f1f4: 0,
            f2f3: 0,
            f2f4: 0,
        };
        assert!(matches!(choice_weights(&empty), Err(ChoiceError::EmptyData)));
    }

    #[test]
    fn diagonal_pair_construction() {
        let basis: Vec<StateVector> = (0..3).map(|k| StateVector::basis(3, k).unwrap()).collect();
        let labels = [(1i8, 1i8), (-1, -1), (1, -1)];
        let pair = build_commuting_pair(&basis, &labels).unwrap();
        let d12 = HermitianOperator::diagonal(&[1.0, -1.0, 1.0]).unwrap();
        let d34 = HermitianOperator::diagonal(&[1.0, -1.0, -1.0]).unwrap();
        assert!((pair.o12.matrix() - d12.matrix()).norm() < 1e-12);
        assert!((pair.o34.matrix() - d34.matrix()).norm() < 1e-12);
        assert!(pair.commutator_norm() < 1e-12);
    }

    #[test]
    fn rotated_pair_still_commutes() {
        let g = hermitian_generator(&[0.3, -0.8, 1.1, 0.4, 0.9, -0.2, 0.6, 0.1, -0.5]);
        let u = crate::hilbert::UnitaryOperator::exp_i_hermitian(&g);
        let basis = basis_from_unitary(u.matrix());
        let pair = build_commuting_pair(&basis, &[(1, 1), (-1, 1), (-1, -1)]).unwrap();
        assert!(pair.commutator_norm() < 1e-12);
        // O² = I
        let id = DMatrix::<C64>::identity(3, 3);
        for o in [&pair.o12, &pair.o34] {
            assert!(max_abs(&(o.matrix() * o.matrix() - &id)) < 1e-10);
        }
    }

    #[test]
    fn bad_basis_rejected() {
        let q0 = StateVector::basis(3, 0).unwrap();
        let q1 = normalize(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
            .unwrap();
        let q2 = StateVector::basis(3, 2).unwrap();
        assert!(matches!(
            build_commuting_pair(&[q0, q1, q2], &[(1, 1), (1, -1), (-1, 1)]),
            Err(ChoiceError::BadBasis(_))
        ));
    }

    #[test]
    fn eigenstate_concentrates_joint_mass() {
        let basis: Vec<StateVector> = (0..3).map(|k| StateVector::basis(3, k).unwrap()).collect();
        let labels = [(1i8, 1i8), (-1, 1), (-1, -1)];
        let pair = build_commuting_pair(&basis, &labels).unwrap();
        let j = joint_distribution(&basis[0].clone(), &pair).unwrap();
        assert!((j.cells[0] - 1.0).abs() < 1e-12); // all mass on (f1, f3)
    }

    #[test]
    fn joint_has_at_most_three_cells() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let gp: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let u = crate::hilbert::UnitaryOperator::exp_i_hermitian(&hermitian_generator(&gp));
            let basis = basis_from_unitary(u.matrix());
            let labels = [
                CELLS[rng.gen_range(0..4)],
                CELLS[rng.gen_range(0..4)],
                CELLS[rng.gen_range(0..4)],
            ]
            .map(|(_, s, t)| (s, t));
            let pair = build_commuting_pair(&basis, &labels).unwrap();
            let raw: Vec<C64> = (0..3)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let state = normalize(&raw).unwrap();
            let j = joint_distribution(&state, &pair).unwrap();
            let nonzero = j.cells.iter().filter(|&&x| x > 1e-12).count();
            assert!(nonzero <= 3, "{:?}", j.cells);
            // marginals match single-observable Born probabilities
            let m = j.marginals();
            let e12 = crate::hilbert::expectation(&state, &pair.o12).unwrap();
            let e34 = crate::hilbert::expectation(&state, &pair.o34).unwrap();
            assert!((m.p_f1 - (1.0 + e12) / 2.0).abs() < 1e-10);
            assert!((m.p_f3 - (1.0 + e34) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sequential_oracle_matches_joint_both_orders() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let gp: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let u = crate::hilbert::UnitaryOperator::exp_i_hermitian(&hermitian_generator(&gp));
            let basis = basis_from_unitary(u.matrix());
            let labels = [
                CELLS[rng.gen_range(0..4)],
                CELLS[rng.gen_range(0..4)],
                CELLS[rng.gen_range(0..4)],
            ]
            .map(|(_, s, t)| (s, t));
            let pair = build_commuting_pair(&basis, &labels).unwrap();
            let raw: Vec<C64> = (0..3)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let state = normalize(&raw).unwrap();
            let j = joint_distribution(&state, &pair).unwrap();
            for order in [MeasurementOrder::Bet12First, MeasurementOrder::Bet34First] {
                let s = sequential_distribution(&state, &pair.o12, &pair.o34, order).unwrap();
                for k in 0..4 {
                    assert!(
                        (j.cells[k] - s.cells[k]).abs() < 1e-10,
                        "{order:?}: {:?} vs {:?}",
                        j.cells,
                        s.cells
                    );
                }
            }
        }
    }

    #[test]
    fn fit_marginals_paper_targets() {
        let fit = fit_marginals((0.68, 0.69), 17).unwrap();
        assert!(fit.residual <= FIT_RESIDUAL_TARGET, "{}", fit.residual);
        let pair = fit.pair.to_pair().unwrap();
        assert!(pair.commutator_norm() <= 1e-10);
        let state = fit.state_vector().unwrap();
        assert!((state.amplitude(0).norm_sqr() - 1.0 / 3.0).abs() < 1e-8);
        // marginals re-verify from scratch
        let j = joint_distribution(&state, &pair).unwrap();
        let m = j.marginals();
        assert!((m.p_f1 - 0.68).abs() <= 2e-6);
        assert!((m.p_f4 - 0.69).abs() <= 2e-6);
    }

    #[test]
    fn fit_marginals_symmetric_and_boundary() {
        let fit = fit_marginals((0.5, 0.5), 5).unwrap();
        assert!(fit.residual <= FIT_RESIDUAL_TARGET);
        assert!(matches!(
            fit_marginals((1.0, 0.5), 5),
            Err(ChoiceError::TargetOutOfRange(_))
        ));
    }

    #[test]
    fn min_l1_examples() {
        let target = JointDistribution::from_counts(&paper_counts()).unwrap();
        let (d, support) = min_l1_joint_fit(&target);
        assert!((d - 12.0 / 59.0).abs() < 1e-12);
        assert!(!support.contains(&0), "cell (f1,f3) should be dropped");

        let zero_cell = JointDistribution::new([0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(min_l1_joint_fit(&zero_cell).0, 0.0);

        let uniform = JointDistribution::new([0.25; 4]).unwrap();
        assert!((min_l1_joint_fit(&uniform).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_l1_brute_force_oracle() {
        // independent oracle: enumerate which cell to drop and grid-search
        // the redistribution of its mass over the remaining cells
        let target = JointDistribution::from_counts(&paper_counts()).unwrap();
        let mut oracle = f64::INFINITY;
        let steps = 200;
        for drop in 0..4 {
            let m = target.cells[drop];
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = m * i as f64 / steps as f64;
                    let b = m * j as f64 / steps as f64;
                    let c = m - a - b;
                    let mut q = target.cells;
                    q[drop] = 0.0;
                    let others: Vec<usize> = (0..4).filter(|&k| k != drop).collect();
                    q[others[0]] += a;
                    q[others[1]] += b;
                    q[others[2]] += c;
                    let l1: f64 = (0..4).map(|k| (q[k] - target.cells[k]).abs()).sum();
                    oracle = oracle.min(l1);
                }
            }
        }
        let (d, _) = min_l1_joint_fit(&target);
        assert!((d - oracle).abs() < 1e-9, "{d} vs oracle {oracle}");
    }

    #[test]
    fn representability_marginals_only() {
        let complex = real_representability_search(
            &ConstraintSet {
                field: Field::Complex,
                marginal_targets: Some((0.68, 0.69)),
                joint_target: None,
                red_probability: 1.0 / 3.0,
            },
            9,
        )
        .unwrap();
        assert!(complex.best_residual <= 1e-6, "{}", complex.best_residual);

        // marginals alone do not separate the fields
        let real = real_representability_search(
            &ConstraintSet {
                field: Field::Real,
                marginal_targets: Some((0.68, 0.69)),
                joint_target: None,
                red_probability: 1.0 / 3.0,
            },
            9,
        )
        .unwrap();
        assert!(real.best_residual <= 1e-6, "{}", real.best_residual);
    }

    #[test]
    fn representability_full_joint_hits_structural_bound() {
        let target = JointDistribution::from_counts(&paper_counts()).unwrap();
        let (bound, _) = min_l1_joint_fit(&target);
        for field in [Field::Real, Field::Complex] {
            let report = real_representability_search(
                &ConstraintSet {
                    field,
                    marginal_targets: Some((40.0 / 59.0, 41.0 / 59.0)),
                    joint_target: Some(target.cells),
                    red_probability: 1.0 / 3.0,
                },
                3,
            )
            .unwrap();
            // max-violation residual is at least the smallest dropped cell
            assert!(
                report.best_residual >= bound / 2.0 - 1e-9,
                "{field:?}: {} vs {}",
                report.best_residual,
                bound / 2.0
            );
        }
    }

    #[test]
    fn pair_spec_round_trip() {
        let fit = fit_marginals((0.6, 0.7), 2).unwrap();
        let text = serde_json::to_string(&fit.pair).unwrap();
        let back: PairSpec = serde_json::from_str(&text).unwrap();
        let pair = back.to_pair().unwrap();
        assert!(pair.commutator_norm() < 1e-10);
    }
}

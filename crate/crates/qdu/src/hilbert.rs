//! Dense complex linear algebra for small Hilbert spaces (dimension 2–8):
//! unit state vectors, Hermitian operators, projectors, projection-valued
//! measures, Born probabilities, expectations, commutators, common
//! eigenbases and superposition/interference analysis.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

pub type C64 = Complex<f64>;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Tolerance for constructor invariants (unit norm, hermiticity).
pub const CTOR_TOL: f64 = 1e-12;
/// Tolerance for derived algebraic identities (PVM completeness, probability sums).
pub const ALG_TOL: f64 = 1e-10;
/// Tolerance for eigen-decomposition residuals.
pub const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("vector norm {0} is below the zero threshold")]
    ZeroVector(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {0} outside supported range {MIN_DIM}..={MAX_DIM}")]
    DimensionOutOfRange(usize),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("expectation value drifted off the real axis (imaginary part {0:.3e})")]
    NonHermitianDrift(f64),
    #[error("matrix is not a projector: {0}")]
    NotProjector(String),
    #[error("invalid PVM: {0}")]
    BadPvm(String),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("operators do not commute (commutator norm {0:.3e} exceeds tolerance {1:.3e})")]
    NotCommuting(f64, f64),
    #[error("probability {0:.3e} is more negative than roundoff allows")]
    NegativeProbability(f64),
}

pub type Result<T> = std::result::Result<T, HilbertError>;

/// Largest entry modulus of a complex matrix.
pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_dim(n: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&n) {
        return Err(HilbertError::DimensionOutOfRange(n));
    }
    Ok(())
}

fn check_finite(entries: &[C64]) -> Result<()> {
    for (k, z) in entries.iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(HilbertError::NonFinite(k));
        }
    }
    Ok(())
}

/// Unit-norm state vector |v⟩ of a small complex Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Builds a state from amplitudes that must already be unit-norm.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        check_finite(&amplitudes)?;
        let v = DVector::from_vec(amplitudes);
        let sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if (sq - 1.0).abs() > CTOR_TOL {
            return Err(HilbertError::ZeroVector(sq.sqrt()));
        }
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, k: usize) -> C64 {
        self.amplitudes[k]
    }

    /// |⟨self|other⟩|
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Canonical basis state |k⟩.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut v = DVector::from_element(dim, C64::new(0.0, 0.0));
        v[k] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }
}

/// Normalizes a raw complex vector to a unit state.
pub fn normalize(raw: &[C64]) -> Result<StateVector> {
    check_dim(raw.len())?;
    check_finite(raw)?;
    let norm: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 1e-14 {
        return Err(HilbertError::ZeroVector(norm));
    }
    let amplitudes = DVector::from_iterator(raw.len(), raw.iter().map(|z| z / norm));
    Ok(StateVector { amplitudes })
}

/// Self-adjoint operator on a small complex Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(HilbertError::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        check_dim(entries.nrows())?;
        check_finite(entries.as_slice())?;
        let mut worst = 0.0f64;
        for j in 0..entries.nrows() {
            for k in j..entries.ncols() {
                let d = (entries[(j, k)] - entries[(k, j)].conj()).norm();
                worst = worst.max(d);
            }
        }
        if worst > CTOR_TOL {
            return Err(HilbertError::NotHermitian(worst));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(n: usize, rows: &[C64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(n, n, rows))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let diag = DVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
        Self::new(DMatrix::from_diagonal(&diag))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            entries: DMatrix::identity(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Eigendecomposition with deterministic ordering: eigenvalues ascending,
    /// each eigenvector's first significant component made real positive.
    pub fn eigen(&self) -> (Vec<f64>, Vec<DVector<C64>>) {
        let se = self.entries.clone().symmetric_eigen();
        let n = self.dim();
        let mut pairs: Vec<(f64, DVector<C64>)> = (0..n)
            .map(|k| {
                let mut v: DVector<C64> = se.eigenvectors.column(k).into_owned();
                fix_phase(&mut v);
                (se.eigenvalues[k], v)
            })
            .collect();
        pairs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then_with(|| lex_cmp(&a.1, &b.1))
        });
        pairs.into_iter().unzip()
    }
}

/// Rotates a vector's global phase so its first component with modulus
/// above 1e-9 is real positive.
pub(crate) fn fix_phase(v: &mut DVector<C64>) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-9) {
        let phase = z / z.norm();
        let correction = phase.conj();
        for x in v.iter_mut() {
            *x *= correction;
        }
    }
}

fn lex_cmp(a: &DVector<C64>, b: &DVector<C64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.re.partial_cmp(&y.re).unwrap() {
            std::cmp::Ordering::Equal => {}
            ord => return ord,
        }
        match x.im.partial_cmp(&y.im).unwrap() {
            std::cmp::Ordering::Equal => {}
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// Orthogonal projector with a declared rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    op: HermitianOperator,
    rank: usize,
}

impl Projector {
    pub fn new(op: HermitianOperator, rank: usize) -> Result<Self> {
        let m = op.matrix();
        let idem = max_abs(&(m * m - m));
        if idem > ALG_TOL {
            return Err(HilbertError::NotProjector(format!(
                "idempotency residual {idem:.3e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - rank as f64).abs() > ALG_TOL || tr.im.abs() > ALG_TOL {
            return Err(HilbertError::NotProjector(format!(
                "trace {} differs from declared rank {rank}",
                tr.re
            )));
        }
        Ok(Self { op, rank })
    }

    /// Rank-1 projector |w⟩⟨w| onto a unit vector.
    pub fn onto(state: &StateVector) -> Self {
        let v = state.amplitudes();
        let m = v * v.adjoint();
        Self {
            op: HermitianOperator { entries: m },
            rank: 1,
        }
    }

    /// Projector onto the span of mutually orthonormal vectors.
    pub fn onto_orthonormal(vectors: &[StateVector]) -> Result<Self> {
        let dim = vectors[0].dim();
        let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for w in vectors {
            if w.dim() != dim {
                return Err(HilbertError::DimensionMismatch {
                    expected: dim,
                    got: w.dim(),
                });
            }
            m += w.amplitudes() * w.amplitudes().adjoint();
        }
        Self::new(HermitianOperator::new(m)?, vectors.len())
    }

    /// Diagonal projector onto a subset of canonical basis directions.
    pub fn canonical(dim: usize, indices: &[usize]) -> Result<Self> {
        check_dim(dim)?;
        let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for &k in indices {
            m[(k, k)] = C64::new(1.0, 0.0);
        }
        Ok(Self {
            op: HermitianOperator { entries: m },
            rank: indices.len(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        self.op.matrix()
    }
}

/// Projection-valued measure: labeled mutually orthogonal projectors
/// summing to the identity.
#[derive(Debug, Clone)]
pub struct Pvm {
    projectors: Vec<(String, Projector)>,
    dim: usize,
}

impl Pvm {
    pub fn new(projectors: Vec<(String, Projector)>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(HilbertError::BadPvm("no projectors".into()));
        }
        let dim = projectors[0].1.dim();
        for (_, p) in &projectors {
            if p.dim() != dim {
                return Err(HilbertError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        for i in 0..projectors.len() {
            for j in (i + 1)..projectors.len() {
                let cross = max_abs(&(projectors[i].1.matrix() * projectors[j].1.matrix()));
                if cross > ALG_TOL {
                    return Err(HilbertError::BadPvm(format!(
                        "projectors '{}' and '{}' overlap ({cross:.3e})",
                        projectors[i].0, projectors[j].0
                    )));
                }
            }
        }
        let mut total = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for (_, p) in &projectors {
            total += p.matrix();
        }
        let defect = max_abs(&(total - DMatrix::<C64>::identity(dim, dim)));
        if defect > ALG_TOL {
            return Err(HilbertError::BadPvm(format!(
                "projectors do not sum to identity (defect {defect:.3e})"
            )));
        }
        Ok(Self { projectors, dim })
    }

    /// PVM of rank-1 canonical-basis projectors, one label per direction.
    pub fn canonical(labels: &[&str]) -> Result<Self> {
        let dim = labels.len();
        check_dim(dim)?;
        let projectors = labels
            .iter()
            .enumerate()
            .map(|(k, &l)| Ok((l.to_string(), Projector::canonical(dim, &[k])?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(projectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.projectors.iter().map(|(l, _)| l.as_str())
    }

    pub fn projectors(&self) -> &[(String, Projector)] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

/// Unitary operator; realizes a cognitive-context change of state.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    entries: DMatrix<C64>,
}

impl UnitaryOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(HilbertError::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        check_dim(entries.nrows())?;
        check_finite(entries.as_slice())?;
        let n = entries.nrows();
        let defect =
            max_abs(&(entries.adjoint() * &entries - DMatrix::<C64>::identity(n, n)));
        if defect > ALG_TOL {
            return Err(HilbertError::NotUnitary(defect));
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            entries: DMatrix::identity(dim, dim),
        })
    }

    /// exp(iH) for Hermitian H, via spectral calculus.
    pub fn exp_i_hermitian(h: &HermitianOperator) -> Self {
        let (values, vectors) = h.eigen();
        let n = h.dim();
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for (lambda, v) in values.iter().zip(vectors.iter()) {
            let phase = C64::new(0.0, *lambda).exp();
            m += (v * v.adjoint()).scale(1.0) * phase;
        }
        Self { entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.dim() != state.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        let v = self.entries.clone() * state.amplitudes();
        normalize(v.as_slice())
    }
}

/// Born probabilities ⟨v|P_c|v⟩, one entry per PVM label, clamped to [0,1].
///
/// Negativity beyond −1e-12 is treated as a logic error rather than roundoff.
pub fn born_probabilities(state: &StateVector, pvm: &Pvm) -> Result<Vec<f64>> {
    if state.dim() != pvm.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: pvm.dim(),
            got: state.dim(),
        });
    }
    let v = state.amplitudes();
    let mut probs = Vec::with_capacity(pvm.len());
    for (_, p) in pvm.projectors() {
        let raw = v.dotc(&(p.matrix() * v)).re;
        if raw < -1e-12 {
            return Err(HilbertError::NegativeProbability(raw));
        }
        probs.push(raw.clamp(0.0, 1.0));
    }
    Ok(probs)
}

/// Real expectation value ⟨v|A|v⟩ of a Hermitian operator.
pub fn expectation(state: &StateVector, op: &HermitianOperator) -> Result<f64> {
    if state.dim() != op.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: op.dim(),
            got: state.dim(),
        });
    }
    let v = state.amplitudes();
    let z = v.dotc(&(op.matrix() * v));
    if z.im.abs() > ALG_TOL {
        return Err(HilbertError::NonHermitianDrift(z.im));
    }
    Ok(z.re)
}

/// Frobenius norm of the commutator AB − BA.
pub fn commutator_norm(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let c = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    Ok(c.norm())
}

/// A simultaneous eigenbasis of two commuting Hermitian operators.
#[derive(Debug, Clone)]
pub struct CommonEigenbasis {
    pub vectors: Vec<DVector<C64>>,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
}

/// Common orthonormal eigenbasis of two commuting Hermitian operators.
///
/// Degenerate eigenvalues of `a` are treated as one block; the basis inside a
/// block is fixed by diagonalizing `b` restricted to it, with ties broken by
/// ascending eigenvalue then lexicographic amplitude.
pub fn common_eigenbasis(
    a: &HermitianOperator,
    b: &HermitianOperator,
    tol: f64,
) -> Result<CommonEigenbasis> {
    let cn = commutator_norm(a, b)?;
    if cn > tol {
        return Err(HilbertError::NotCommuting(cn, tol));
    }
    let n = a.dim();
    let (values_a, vectors_a) = a.eigen();
    let scale = values_a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let cluster_tol = EIG_TOL * scale.max(1.0);

    let mut vectors = Vec::with_capacity(n);
    let mut out_a = Vec::with_capacity(n);
    let mut out_b = Vec::with_capacity(n);

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values_a[end] - values_a[end - 1] <= cluster_tol {
            end += 1;
        }
        let m = end - start;
        // n×m block basis
        let mut w = DMatrix::from_element(n, m, C64::new(0.0, 0.0));
        for (col, vec) in vectors_a[start..end].iter().enumerate() {
            w.set_column(col, vec);
        }
        let restricted = w.adjoint() * b.matrix() * &w;
        // Hermitize to kill roundoff before decomposing.
        let restricted = (&restricted + restricted.adjoint()).scale(0.5);
        let se = restricted.symmetric_eigen();
        let mut block: Vec<(f64, DVector<C64>)> = (0..m)
            .map(|k| {
                let mut v: DVector<C64> = (&w * se.eigenvectors.column(k)).into_owned();
                fix_phase(&mut v);
                (se.eigenvalues[k], v)
            })
            .collect();
        block.sort_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap()
                .then_with(|| lex_cmp(&x.1, &y.1))
        });
        for (lb, v) in block {
            out_a.push(values_a[start]);
            out_b.push(lb);
            vectors.push(v);
        }
        start = end;
    }

    Ok(CommonEigenbasis {
        vectors,
        values_a: out_a,
        values_b: out_b,
    })
}

/// Normalized superposition a·|w1⟩ + b·|w2⟩.
pub fn superpose(a: C64, w1: &StateVector, b: C64, w2: &StateVector) -> Result<StateVector> {
    if w1.dim() != w2.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: w1.dim(),
            got: w2.dim(),
        });
    }
    let raw = w1.amplitudes() * a + w2.amplitudes() * b;
    normalize(raw.as_slice())
}

/// Interference terms I_c = 2·Re(ā·b·⟨w1|P_c|w2⟩), one per PVM label, so
/// that p_c(a·w1 + b·w2) = |a|²p_c(w1) + |b|²p_c(w2) + I_c before
/// renormalization.
pub fn interference_terms(
    a: C64,
    w1: &StateVector,
    b: C64,
    w2: &StateVector,
    pvm: &Pvm,
) -> Result<Vec<f64>> {
    if w1.dim() != w2.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: w1.dim(),
            got: w2.dim(),
        });
    }
    if w1.dim() != pvm.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: pvm.dim(),
            got: w1.dim(),
        });
    }
    let coeff = a.conj() * b;
    pvm.projectors()
        .iter()
        .map(|(_, p)| {
            let cross = w1.amplitudes().dotc(&(p.matrix() * w2.amplitudes()));
            Ok(2.0 * (coeff * cross).re)
        })
        .collect()
}

//! Deterministic multi-start derivative-free minimizer over box-bounded
//! parameter spaces with periodic (angle) coordinates. Shared by the state,
//! choice-observable and Machina fitting routines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("objective returned a non-finite value at {0:?}")]
    NonFiniteObjective(Vec<f64>),
    #[error("budget must be positive")]
    EmptyBudget,
}

pub type Result<T> = std::result::Result<T, OptimError>;

/// One named real parameter with box bounds; periodic parameters wrap
/// modulo their span instead of clipping.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Param {
    pub fn bounded(name: &str, lo: f64, hi: f64) -> Self {
        assert!(lo.is_finite() && hi.is_finite() && lo <= hi, "bad bounds");
        Self {
            name: name.to_string(),
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn angle(name: &str) -> Self {
        Self {
            name: name.to_string(),
            lo: 0.0,
            hi: TWO_PI,
            periodic: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamSpace {
    pub params: Vec<Param>,
}

impl ParamSpace {
    pub fn new(params: Vec<Param>) -> Self {
        Self { params }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Maps raw values into the space: angles wrapped, bounded clipped. Idempotent.
    pub fn project(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.params)
            .map(|(&x, p)| {
                if p.periodic {
                    periodic_wrap(x, p.lo, p.hi)
                } else {
                    bound_clip(x, p.lo, p.hi)
                }
            })
            .collect()
    }
}

/// Wraps x into [lo, hi) by the period hi − lo.
pub fn periodic_wrap(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let mut y = (x - lo) % span;
    if y < 0.0 {
        y += span;
    }
    lo + y
}

/// Clips x into [lo, hi].
pub fn bound_clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.clamp(lo, hi)
}

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub restarts: usize,
    pub iterations: usize,
}

impl Budget {
    pub fn new(restarts: usize, iterations: usize) -> Self {
        Self {
            restarts,
            iterations,
        }
    }
}

/// Outcome of a multi-start minimization.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub objective: f64,
    pub restarts_used: usize,
    pub iterations_used: usize,
    pub seed: u64,
    pub converged: bool,
}

/// Pure function of (master seed, restart index): the restart seed stream.
pub fn derive_seed(master: u64, restart: usize) -> u64 {
    // splitmix64 step
    let mut z = master
        .wrapping_add((restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Minimizes `objective` over the space with compass (pattern) descent from
/// seed-derived random starts. Deterministic for fixed inputs; restart k's
/// start depends only on (seed, k), so results are order-independent.
pub fn minimize<F>(objective: F, space: &ParamSpace, seed: u64, budget: Budget) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64,
{
    minimize_with_target(objective, space, seed, budget, None)
}

/// As `minimize`, stopping early once the best objective reaches `target`.
/// Early stopping never changes which restart wins among those executed.
pub fn minimize_with_target<F>(
    objective: F,
    space: &ParamSpace,
    seed: u64,
    budget: Budget,
    target: Option<f64>,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64,
{
    if budget.restarts == 0 || budget.iterations == 0 {
        return Err(OptimError::EmptyBudget);
    }
    let eval = |x: &[f64]| -> Result<f64> {
        let v = objective(x);
        if !v.is_finite() {
            return Err(OptimError::NonFiniteObjective(x.to_vec()));
        }
        Ok(v)
    };

    let mut best: Option<FitResult> = None;
    for restart in 0..budget.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, restart));
        let start: Vec<f64> = space
            .params
            .iter()
            .map(|p| rng.gen_range(p.lo..=p.hi))
            .collect();
        let (params, value, iters, converged) =
            nelder_mead(&eval, space, start, budget.iterations, target)?;
        let candidate = FitResult {
            params,
            objective: value,
            restarts_used: restart + 1,
            iterations_used: iters,
            seed,
            converged,
        };
        let replace = match &best {
            None => true,
            // ties at equal objective (within 1e-15) keep the earlier restart
            Some(b) => candidate.objective < b.objective - 1e-15,
        };
        if replace {
            best = Some(candidate);
        }
        if let (Some(t), Some(b)) = (target, &best) {
            if b.objective <= t {
                let mut done = b.clone();
                done.restarts_used = restart + 1;
                return Ok(done);
            }
        }
    }
    let mut result = best.expect("at least one restart ran");
    result.restarts_used = budget.restarts;
    Ok(result)
}

/// Deterministic Nelder-Mead restricted to the parameter space by
/// projecting every trial point. Returns (point, value, iterations,
/// converged).
fn nelder_mead<E>(
    eval: &E,
    space: &ParamSpace,
    start: Vec<f64>,
    max_iters: usize,
    target: Option<f64>,
) -> Result<(Vec<f64>, f64, usize, bool)>
where
    E: Fn(&[f64]) -> Result<f64>,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let n = space.dim();
    let x0 = space.project(&start);
    let f0 = eval(&x0)?;
    if n == 0 {
        return Ok((x0, f0, 0, true));
    }

    // initial simplex: x0 plus one axis displacement per parameter,
    // flipped when clipping would collapse the vertex onto x0
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.clone(), f0));
    for k in 0..n {
        let p = &space.params[k];
        let h = (0.25 * (p.hi - p.lo)).max(1e-8);
        let mut v = x0.clone();
        v[k] += h;
        let mut v = space.project(&v);
        if (v[k] - x0[k]).abs() < 0.5 * h {
            v = x0.clone();
            v[k] -= h;
            v = space.project(&v);
        }
        let fv = eval(&v)?;
        simplex.push((v, fv));
    }

    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite values"));
        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        if let Some(t) = target {
            if f_best <= t {
                converged = true;
                break;
            }
        }
        let spread = simplex
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if f_worst - f_best < 1e-16 * (1.0 + f_best.abs()) || spread < 1e-13 {
            converged = true;
            break;
        }
        iters += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
            .collect();
        let blend = |coef: f64, reference: &[f64]| -> Vec<f64> {
            space.project(
                &(0..n)
                    .map(|k| centroid[k] + coef * (reference[k] - centroid[k]))
                    .collect::<Vec<_>>(),
            )
        };

        let xr = blend(-ALPHA, &simplex[n].0);
        let fr = eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = blend(-ALPHA * GAMMA, &simplex[n].0);
            let fe = eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = blend(-ALPHA * RHO, &simplex[n].0);
            let f = eval(&x)?;
            (x, f)
        } else {
            let x = blend(RHO, &simplex[n].0);
            let f = eval(&x)?;
            (x, f)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for vert in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = vert
                .0
                .iter()
                .zip(&best)
                .map(|(v, b)| b + SIGMA * (v - b))
                .collect();
            let shrunk = space.project(&shrunk);
            let f = eval(&shrunk)?;
            *vert = (shrunk, f);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite values"));
    let (x, fx) = simplex.swap_remove(0);
    Ok((x, fx, iters, converged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let space = ParamSpace::new(vec![Param::bounded("x", 0.0, 10.0)]);
        let r = minimize(|p| (p[0] - 3.0).powi(2), &space, 7, Budget::new(4, 400)).unwrap();
        assert!((r.params[0] - 3.0).abs() < 1e-8, "x = {}", r.params[0]);
        assert!(r.converged);
    }

    #[test]
    fn constant_objective_converges() {
        let space = ParamSpace::new(vec![
            Param::bounded("a", -1.0, 1.0),
            Param::angle("phi"),
        ]);
        let r = minimize(|_| 5.5, &space, 1, Budget::new(2, 200)).unwrap();
        assert_eq!(r.objective, 5.5);
        assert!(r.converged);
    }

    #[test]
    fn deterministic_across_runs() {
        let space = ParamSpace::new(vec![
            Param::bounded("x", -4.0, 4.0),
            Param::bounded("y", -4.0, 4.0),
        ]);
        let f = |p: &[f64]| (p[0] - 1.0).powi(2) + (p[1] + 2.0).powi(2) + p[0].sin() * 0.1;
        let a = minimize(f, &space, 42, Budget::new(8, 300)).unwrap();
        let b = minimize(f, &space, 42, Budget::new(8, 300)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn larger_budget_never_worse() {
        let space = ParamSpace::new(vec![Param::bounded("x", -10.0, 10.0)]);
        let f = |p: &[f64]| (p[0].powi(2) - 4.0 * p[0].cos()).abs();
        let small = minimize(f, &space, 3, Budget::new(2, 100)).unwrap();
        let large = minimize(f, &space, 3, Budget::new(16, 100)).unwrap();
        assert!(large.objective <= small.objective + 1e-15);
    }

    #[test]
    fn wrap_and_clip() {
        let pi = std::f64::consts::PI;
        assert!((periodic_wrap(3.0 * pi, 0.0, TWO_PI) - pi).abs() < 1e-12);
        assert_eq!(bound_clip(7.0, 0.0, 5.0), 5.0);
        assert_eq!(bound_clip(2.5, 0.0, 5.0), 2.5);
        // idempotent
        let w = periodic_wrap(-0.5, 0.0, TWO_PI);
        assert_eq!(periodic_wrap(w, 0.0, TWO_PI), w);
    }

    #[test]
    fn non_finite_objective_rejected() {
        let space = ParamSpace::new(vec![Param::bounded("x", 0.0, 1.0)]);
        let r = minimize(|_| f64::NAN, &space, 0, Budget::new(1, 10));
        assert!(matches!(r, Err(OptimError::NonFiniteObjective(_))));
    }

    #[test]
    fn restart_seed_stream_is_pure() {
        assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
        assert_ne!(derive_seed(9, 3), derive_seed(9, 4));
        assert_ne!(derive_seed(8, 3), derive_seed(9, 3));
    }
}

//! Subgradient machinery and the descent loop that minimizes the
//! constant-input objective.
//!
//! The objective `J(u) = sigma_max^2(G(u)) + u^T R u` is convex on the set
//! of stabilizing doses but only piecewise smooth: where the top singular
//! value of the DC gain is repeated, `J` has a subdifferential rather than
//! a gradient. The iteration is plain subgradient descent
//! `u <- u - alpha_k g` with the diminishing schedule
//! `alpha_k = step_a / sqrt(k+1)`; a step that leaves the Hurwitz region is
//! shrunk geometrically until it lands back inside. No sufficient-descent
//! rule is applied in subgradient mode: subgradient steps are legitimately
//! nonmonotone, so the method tracks and reports the best iterate seen.
//!
//! When the drift graph is strongly connected the top singular value stays
//! simple, `J` is differentiable, and plain gradient descent with a
//! descent-checked halving line search is both safe and much faster; the
//! `auto` mode switches on that structure.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::performance::{objective, ObjectiveValue};
use crate::system::{
    hurwitz_certificate, input_map_adjoint, is_strongly_connected, spectral_abscissa,
    BilinearPositiveSystem, ControlInput, TOL_STAB,
};

/// One element of the subdifferential at a dose, together with the convex
/// weights over active triplets that produced it.
#[derive(Clone, Debug)]
pub struct SubgradientElement {
    /// Subgradient vector (length `m`).
    pub g: DVector<f64>,
    /// Convex-combination coefficients over the active triplets, in the
    /// order the triplets are reported by the objective.
    pub weights: Vec<f64>,
}

/// Descent variant to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// Gradient descent when the drift graph is strongly connected,
    /// subgradient descent otherwise.
    Auto,
    /// Diminishing-step subgradient descent with stability-only
    /// backtracking.
    Subgradient,
    /// Gradient descent with a descent-checked halving line search
    /// (requires the smooth regime).
    Gradient,
}

/// Variant actually used, recorded in the result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeUsed {
    Subgradient,
    Gradient,
}

/// Options for [`solve`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Initial dose; when absent (or not stabilizing) the solver first
    /// searches for a stabilizing point along the default ray.
    pub u0: Option<ControlInput>,
    /// Iteration budget (>= 1).
    pub max_iters: usize,
    /// Step scale `a` in `alpha_k = a / sqrt(k+1)`; defaults to
    /// `1 / (1 + ||g0||)` when absent.
    pub step_a: Option<f64>,
    /// Relative stopping tolerance (> 0).
    pub tol: f64,
    /// Number of consecutive iterations without significant best-value
    /// improvement after which the run is declared converged.
    pub window: usize,
    /// Geometric factor in (0, 1) applied to a rejected step.
    pub backtrack_factor: f64,
    /// Cap on backtracking halvings per iteration.
    pub max_backtracks: usize,
    /// Descent variant.
    pub mode: SolveMode,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            u0: None,
            max_iters: 2000,
            step_a: None,
            tol: 1e-9,
            window: 50,
            backtrack_factor: 0.5,
            max_backtracks: 60,
            mode: SolveMode::Auto,
        }
    }
}

/// One history row of the descent loop.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    /// Iteration index.
    pub k: usize,
    /// Best objective seen up to and including iteration `k`.
    pub j_best: f64,
    /// Norm of the (sub)gradient evaluated at the current iterate.
    pub subgradient_norm: f64,
}

/// Outcome of a descent run. `u_star` is the best stabilizing iterate
/// seen; `j_star` equals the final `j_best` of the history.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u_star: ControlInput,
    pub j_star: f64,
    /// Number of update iterations performed.
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// True when the stall-window rule fired (or, in gradient mode, the
    /// gradient norm dropped below tolerance); false when the iteration
    /// budget ran out first.
    pub converged: bool,
    pub mode_used: ModeUsed,
}

/// Subdifferential element at a stabilizing dose.
///
/// With active triplets `(sigma_i, w_i, v_i)` of `G = -Q^(1/2) A_cl^(-1) B`
/// and convex weights `alpha`:
///
/// ```text
///   g = 2 sigma_cl * sum_i alpha_i * adjoint(A_cl^(-1) B v_i w_i^T Q^(1/2) A_cl^(-1))
///       + 2 R u ,
/// ```
///
/// where `adjoint` is [`input_map_adjoint`]. `weights = None` selects the
/// uniform combination, which is deterministic and always admissible.
pub fn subdifferential_element(
    sys: &BilinearPositiveSystem,
    u: &ControlInput,
    weights: Option<&[f64]>,
) -> Result<SubgradientElement> {
    let obj = objective(sys, u)?;
    subgradient_from_objective(sys, u.vector(), &obj, weights)
}

/// Same as [`subdifferential_element`] but reusing an already computed
/// objective (the solver calls this once per iteration).
fn subgradient_from_objective(
    sys: &BilinearPositiveSystem,
    u: &DVector<f64>,
    obj: &ObjectiveValue,
    weights: Option<&[f64]>,
) -> Result<SubgradientElement> {
    if !obj.stable {
        return Err(Error::UnstableClosedLoop {
            spectral_abscissa: obj.spectral_abscissa,
        });
    }
    let k = obj.triplets.len();
    let alpha: Vec<f64> = match weights {
        None => vec![1.0 / k as f64; k],
        Some(w) => {
            if w.len() != k {
                return Err(Error::InvalidWeights(format!(
                    "expected {k} weights (one per active triplet), got {}",
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|x| **x < -1e-12 || !x.is_finite()) {
                return Err(Error::InvalidWeights(format!(
                    "weight {bad} is negative or not finite"
                )));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidWeights(format!(
                    "weights sum to {total}, expected 1"
                )));
            }
            w.iter().map(|x| x.max(0.0)).collect()
        }
    };
    let a_cl = sys.closed_loop_raw(u);
    let lu = a_cl.clone().lu();
    let lu_t = a_cl.transpose().lu();
    let q_sqrt = sys.q_sqrt()?;
    let n = sys.state_dim();
    let mut acc = DMatrix::zeros(n, n);
    for (alpha_i, t) in alpha.iter().zip(&obj.triplets) {
        if *alpha_i == 0.0 {
            continue;
        }
        // y = A_cl^(-1) B v_i,  z^T = w_i^T Q^(1/2) A_cl^(-1).
        let y = lu
            .solve(&(sys.b() * &t.v))
            .ok_or_else(|| Error::Numerical("LU solve failed in subgradient assembly".into()))?;
        let z = lu_t
            .solve(&(q_sqrt * &t.w))
            .ok_or_else(|| Error::Numerical("LU solve failed in subgradient assembly".into()))?;
        acc += *alpha_i * y * z.transpose();
    }
    let g = input_map_adjoint(sys.d_u(), &acc)? * (2.0 * obj.sigma_cl) + 2.0 * (sys.r() * u);
    Ok(SubgradientElement { g, weights: alpha })
}

/// Gradient of the objective in the smooth regime.
///
/// Requires either a strongly connected drift graph (which keeps the top
/// singular value simple for every dose) or a numerically simple top
/// singular value at this particular dose. When several triplets tie the
/// peak under strong connectivity they are a numerically split cluster of
/// one simple value, and the uniform combination is the stable evaluation.
pub fn gradient(sys: &BilinearPositiveSystem, u: &ControlInput) -> Result<DVector<f64>> {
    let obj = objective(sys, u)?;
    if !obj.stable {
        return Err(Error::UnstableClosedLoop {
            spectral_abscissa: obj.spectral_abscissa,
        });
    }
    let active = obj.triplets.len();
    if active > 1 && !is_strongly_connected(sys.a()) {
        return Err(Error::DegenerateTopSingularValue { active });
    }
    subgradient_from_objective(sys, u.vector(), &obj, None).map(|e| e.g)
}

/// Searches for a stabilizing constant dose by doubling the scale of a
/// direction vector: `u = t * dir` for `t = 1, 2, 4, ...` (at most 60
/// doublings), returning the first scale whose closed loop is Hurwitz.
///
/// The default direction pushes each channel the way that makes the state
/// decay: channel `k` gets `+1` when column `k` of `D_u` has negative sum,
/// `-1` when positive, `0` when the channel has no net effect. The zero
/// dose is returned immediately when the drift itself is already Hurwitz.
pub fn stabilize_initial(
    sys: &BilinearPositiveSystem,
    direction: Option<&DVector<f64>>,
) -> Result<ControlInput> {
    if hurwitz_certificate(sys.a()).is_stable() {
        return Ok(ControlInput::zeros(sys.input_dim()));
    }
    let m = sys.input_dim();
    let dir = match direction {
        Some(d) => {
            sys.check_input_dim(d)?;
            d.clone()
        }
        None => DVector::from_iterator(
            m,
            (0..m).map(|k| {
                let col_sum: f64 = sys.d_u().column(k).iter().sum();
                if col_sum < 0.0 {
                    1.0
                } else if col_sum > 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
        ),
    };
    if dir.iter().all(|x| *x == 0.0) {
        return Err(Error::NoStabilizingInitialPoint);
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let u = &dir * t;
        if spectral_abscissa(&sys.closed_loop_raw(&u)) < -TOL_STAB {
            return ControlInput::new(u);
        }
        t *= 2.0;
    }
    Err(Error::NoStabilizingInitialPoint)
}

/// Minimizes the objective over constant doses. See the module docs for
/// the iteration; behaviour summary:
///
/// * starts from `opts.u0` if it stabilizes, otherwise from
///   [`stabilize_initial`];
/// * `Auto` mode runs gradient descent exactly when
///   [`is_strongly_connected`] holds on the drift;
/// * every accepted iterate is stabilizing, and the best iterate seen is
///   returned;
/// * `converged` is set by the stall-window rule (best value improved by
///   less than `tol * (1 + |J_best|)` over `window` consecutive
///   iterations) or, in gradient mode, by `||g|| <= tol`.
pub fn solve(sys: &BilinearPositiveSystem, opts: &SolveOptions) -> Result<SolveResult> {
    validate_options(opts)?;
    let mode_used = match opts.mode {
        SolveMode::Subgradient => ModeUsed::Subgradient,
        SolveMode::Gradient => ModeUsed::Gradient,
        SolveMode::Auto => {
            if is_strongly_connected(sys.a()) {
                ModeUsed::Gradient
            } else {
                ModeUsed::Subgradient
            }
        }
    };
    let mut u = initial_point(sys, opts)?;
    let mut obj = objective(sys, &ControlInput::new(u.clone())?)?;
    debug_assert!(obj.stable);
    let mut j_cur = obj.j;
    let mut best_u = u.clone();
    let mut best_j = j_cur;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0usize;
    let mut step_a = opts.step_a;

    for k in 0..opts.max_iters {
        let element = subgradient_from_objective(sys, &u, &obj, None)?;
        let g_norm = element.g.norm();
        let a = *step_a.get_or_insert_with(|| 1.0 / (1.0 + g_norm));
        if mode_used == ModeUsed::Gradient && g_norm <= opts.tol {
            converged = true;
            history.push(IterationRecord {
                k,
                j_best: best_j,
                subgradient_norm: g_norm,
            });
            break;
        }
        // Subgradient mode follows the diminishing schedule; gradient mode
        // retries the full scale every iteration and lets the line search
        // cut it down.
        let trial = match mode_used {
            ModeUsed::Subgradient => a / ((k + 1) as f64).sqrt(),
            ModeUsed::Gradient => a,
        };
        let mut accepted: Option<(DVector<f64>, ObjectiveValue)> = None;
        let mut t = trial;
        for _ in 0..=opts.max_backtracks {
            let candidate = &u - &element.g * t;
            if candidate == u {
                // The step underflowed; smaller ones cannot move either.
                break;
            }
            let a_cl = sys.closed_loop_raw(&candidate);
            if spectral_abscissa(&a_cl) < -TOL_STAB {
                let cand_obj =
                    crate::performance::objective_given_closed_loop(sys, &a_cl, &candidate)?;
                let take = match mode_used {
                    // Stability is the only acceptance test: subgradient
                    // steps may (and do) increase J.
                    ModeUsed::Subgradient => true,
                    // Smooth regime: also require plain descent.
                    ModeUsed::Gradient => cand_obj.j < j_cur,
                };
                if take {
                    accepted = Some((candidate, cand_obj));
                    break;
                }
            }
            t *= opts.backtrack_factor;
        }
        if let Some((candidate, cand_obj)) = accepted {
            u = candidate;
            j_cur = cand_obj.j;
            obj = cand_obj;
        }
        // An exhausted line search leaves the iterate (and objective) as
        // they were; the next iteration tries a smaller schedule step.
        let improved = best_j - j_cur > opts.tol * (1.0 + j_cur.abs());
        if j_cur < best_j {
            best_j = j_cur;
            best_u = u.clone();
        }
        stalled = if improved { 0 } else { stalled + 1 };
        history.push(IterationRecord {
            k,
            j_best: best_j,
            subgradient_norm: g_norm,
        });
        iterations = k + 1;
        if stalled >= opts.window {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        u_star: ControlInput::new(best_u)?,
        j_star: best_j,
        iterations,
        history,
        converged,
        mode_used,
    })
}

fn validate_options(opts: &SolveOptions) -> Result<()> {
    if opts.max_iters < 1 {
        return Err(Error::InvalidOptions("max_iters must be at least 1".into()));
    }
    if opts.tol <= 0.0 || opts.tol.is_nan() {
        return Err(Error::InvalidOptions("tol must be positive".into()));
    }
    if !(opts.backtrack_factor > 0.0 && opts.backtrack_factor < 1.0) {
        return Err(Error::InvalidOptions(
            "backtrack_factor must lie strictly between 0 and 1".into(),
        ));
    }
    if opts.window < 1 {
        return Err(Error::InvalidOptions("window must be at least 1".into()));
    }
    if let Some(a) = opts.step_a {
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::InvalidOptions("step scale must be positive".into()));
        }
    }
    Ok(())
}

fn initial_point(sys: &BilinearPositiveSystem, opts: &SolveOptions) -> Result<DVector<f64>> {
    if let Some(u0) = &opts.u0 {
        sys.check_input_dim(u0.vector())?;
        if spectral_abscissa(&sys.closed_loop_raw(u0.vector())) < -TOL_STAB {
            return Ok(u0.vector().clone());
        }
    }
    stabilize_initial(sys, None).map(|u| u.vector().clone())
}

/// Stationary dose of the cascade model without feedback (`c = 0`), where
/// the objective reduces to `(u - r)^(-2) + rho u^2` for `u > r`: the
/// unique root of `(u - r)^(-3) = rho u` on `(r, inf)`, found by
/// safeguarded bisection down to `|f| <= 1e-12`.
pub fn quartic_nominal_optimum(r: f64, rho: f64) -> Result<f64> {
    if rho <= 0.0 || r < 0.0 || !rho.is_finite() || !r.is_finite() {
        return Err(Error::InvalidOptions(
            "quartic optimum needs r >= 0 and rho > 0".into(),
        ));
    }
    let f = |u: f64| (u - r).powi(-3) - rho * u;
    // f decreases monotonically from +inf (at u -> r+) through the root:
    // bracket it by doubling.
    let mut lo = r + 1e-9;
    let mut hi = r + 1.0;
    let mut grow = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi = r + (hi - r) * 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical("failed to bracket the quartic root".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if f(root).abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "quartic bisection residual {} exceeds 1e-12",
            f(root).abs()
        )));
    }
    Ok(root)
}

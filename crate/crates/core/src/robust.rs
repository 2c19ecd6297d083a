//! Interval-uncertainty handling.
//!
//! An uncertain plant `x' = ((A + Delta_A) + D(u - delta_u))x + Bd` with
//! entrywise bounds `|Delta_A| <= A_tilde`, `|delta_u| <= beta` admits a
//! single worst member when the input map is nonpositive: replacing `A` by
//! `A + A_tilde - diag(D_u beta)` dominates every admissible perturbation
//! entrywise, hence in stability and in performance. Solving the nominal
//! problem on that worst-case system therefore solves the min-max problem,
//! and `worst_case_monotonicity_check` verifies the dominance on random
//! samples.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optimizer::{solve, SolveOptions, SolveResult};
use crate::performance::{objective_given_closed_loop, ObjectiveValue};
use crate::system::{hurwitz_certificate, BilinearPositiveSystem, ControlInput};

/// Slack allowed when comparing a sampled objective against the worst-case
/// bound.
pub const COST_ORDER_TOL: f64 = 1e-8;

/// Elementwise uncertainty bounds: `|Delta_A(i,j)| <= a_tilde(i,j)` on the
/// dynamics and `|delta_u(k)| <= beta(k)` on the applied dose.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintySpec {
    a_tilde: DMatrix<f64>,
    beta: DVector<f64>,
}

impl UncertaintySpec {
    /// Builds a bound spec, rejecting negative or non-finite entries and a
    /// non-square `a_tilde`.
    pub fn new(a_tilde: DMatrix<f64>, beta: DVector<f64>) -> Result<Self> {
        if a_tilde.nrows() != a_tilde.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "A_tilde must be square, got {}x{}",
                a_tilde.nrows(),
                a_tilde.ncols()
            )));
        }
        if a_tilde.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidOptions(
                "A_tilde bounds must be finite and nonnegative".into(),
            ));
        }
        if beta.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidOptions(
                "beta bounds must be finite and nonnegative".into(),
            ));
        }
        Ok(UncertaintySpec { a_tilde, beta })
    }

    /// The all-zero (no uncertainty) spec for an `n`-state, `m`-input
    /// system.
    pub fn zero(n: usize, m: usize) -> Self {
        UncertaintySpec {
            a_tilde: DMatrix::zeros(n, n),
            beta: DVector::zeros(m),
        }
    }

    /// Dynamics bounds.
    pub fn a_tilde(&self) -> &DMatrix<f64> {
        &self.a_tilde
    }

    /// Dose bounds.
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Checks that the bounds fit the system's dimensions.
    pub fn validate_for(&self, sys: &BilinearPositiveSystem) -> Result<()> {
        if self.a_tilde.nrows() != sys.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "A_tilde is {}x{} but the system has {} states",
                self.a_tilde.nrows(),
                self.a_tilde.ncols(),
                sys.state_dim()
            )));
        }
        if self.beta.len() != sys.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "beta has {} entries but the system has {} input channels",
                self.beta.len(),
                sys.input_dim()
            )));
        }
        Ok(())
    }
}

/// One admissible perturbation, validated against its bounds at
/// construction so downstream code can rely on it being in-bound.
#[derive(Clone, Debug)]
pub struct PerturbationSample {
    delta_a: DMatrix<f64>,
    delta_u: DVector<f64>,
}

impl PerturbationSample {
    /// Validates `|delta_a| <= A_tilde` and `|delta_u| <= beta`
    /// entrywise.
    pub fn new(
        unc: &UncertaintySpec,
        delta_a: DMatrix<f64>,
        delta_u: DVector<f64>,
    ) -> Result<Self> {
        if delta_a.shape() != unc.a_tilde.shape() || delta_u.len() != unc.beta.len() {
            return Err(Error::DimensionMismatch(
                "perturbation shape differs from the bound spec".into(),
            ));
        }
        for i in 0..delta_a.nrows() {
            for j in 0..delta_a.ncols() {
                if delta_a[(i, j)].abs() > unc.a_tilde[(i, j)] {
                    return Err(Error::BoundViolation(format!(
                        "|Delta_A({},{})| = {} exceeds bound {}",
                        i + 1,
                        j + 1,
                        delta_a[(i, j)].abs(),
                        unc.a_tilde[(i, j)]
                    )));
                }
            }
        }
        for k in 0..delta_u.len() {
            if delta_u[k].abs() > unc.beta[k] {
                return Err(Error::BoundViolation(format!(
                    "|delta_u({})| = {} exceeds bound {}",
                    k + 1,
                    delta_u[k].abs(),
                    unc.beta[k]
                )));
            }
        }
        Ok(PerturbationSample { delta_a, delta_u })
    }

    /// The zero perturbation matching a bound spec.
    pub fn zero(unc: &UncertaintySpec) -> Self {
        PerturbationSample {
            delta_a: DMatrix::zeros(unc.a_tilde.nrows(), unc.a_tilde.ncols()),
            delta_u: DVector::zeros(unc.beta.len()),
        }
    }

    /// Additive dynamics perturbation.
    pub fn delta_a(&self) -> &DMatrix<f64> {
        &self.delta_a
    }

    /// Dose perturbation (the applied dose becomes `u - delta_u`).
    pub fn delta_u(&self) -> &DVector<f64> {
        &self.delta_u
    }
}

/// Builds the worst-case system: `A` replaced by
/// `A + A_tilde - diag(D_u beta)`, everything else unchanged.
///
/// Requires every entry of `D_u` to be nonpositive — that is what makes
/// larger doses uniformly helpful, so that the dose shortfall `beta` is
/// the worst dose error. The result keeps the Metzler structure because
/// only nonnegative quantities are added off the diagonal.
pub fn robustify(
    sys: &BilinearPositiveSystem,
    unc: &UncertaintySpec,
) -> Result<BilinearPositiveSystem> {
    unc.validate_for(sys)?;
    for i in 0..sys.state_dim() {
        for k in 0..sys.input_dim() {
            let value = sys.d_u()[(i, k)];
            if value > 0.0 {
                return Err(Error::NonMonotoneInputMap {
                    entry: (i, k),
                    value,
                });
            }
        }
    }
    let mut a = sys.a() + unc.a_tilde();
    let shift = sys.d_u() * unc.beta();
    for i in 0..a.nrows() {
        a[(i, i)] -= shift[i];
    }
    BilinearPositiveSystem::new(
        a,
        sys.b().clone(),
        sys.q().clone(),
        sys.r().clone(),
        sys.d_u().clone(),
    )
}

/// Closed-loop matrix under a sampled perturbation:
/// `(A + Delta_A) + diag(D_u (u - delta_u))`.
pub fn perturbed_closed_loop(
    sys: &BilinearPositiveSystem,
    u: &ControlInput,
    pert: &PerturbationSample,
) -> Result<DMatrix<f64>> {
    sys.check_input_dim(u.vector())?;
    if pert.delta_a.nrows() != sys.state_dim() || pert.delta_u.len() != sys.input_dim() {
        return Err(Error::DimensionMismatch(
            "perturbation does not match the system dimensions".into(),
        ));
    }
    let applied = u.vector() - &pert.delta_u;
    Ok(sys.closed_loop_raw(&applied) + &pert.delta_a)
}

/// Objective of the perturbed plant at the nominal dose `u` (the dose cost
/// stays `u^T R u`; only the loop matrix changes).
pub fn perturbed_objective(
    sys: &BilinearPositiveSystem,
    u: &ControlInput,
    pert: &PerturbationSample,
) -> Result<ObjectiveValue> {
    let a_cl = perturbed_closed_loop(sys, u, pert)?;
    objective_given_closed_loop(sys, &a_cl, u.vector())
}

/// Draws a uniform in-bound perturbation, clipping off-diagonal dynamics
/// entries at `-A(i,j)` so the perturbed matrix stays Metzler (the
/// worst-case comparison is made within the positive class).
pub fn sample_perturbation(
    sys: &BilinearPositiveSystem,
    unc: &UncertaintySpec,
    rng: &mut impl Rng,
) -> Result<PerturbationSample> {
    unc.validate_for(sys)?;
    let n = sys.state_dim();
    let mut delta_a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let bound = unc.a_tilde[(i, j)];
            if bound > 0.0 {
                let mut d = rng.random_range(-bound..=bound);
                if i != j {
                    d = d.max(-sys.a()[(i, j)]);
                }
                delta_a[(i, j)] = d;
            }
        }
    }
    let m = sys.input_dim();
    let mut delta_u = DVector::zeros(m);
    for k in 0..m {
        let bound = unc.beta[k];
        if bound > 0.0 {
            delta_u[k] = rng.random_range(-bound..=bound);
        }
    }
    PerturbationSample::new(unc, delta_a, delta_u)
}

/// A cost-ordering violation found by sampling: the perturbed objective
/// exceeded the worst-case bound.
#[derive(Clone, Copy, Debug)]
pub struct CostViolation {
    /// Sample index.
    pub sample: usize,
    /// Objective of the perturbed plant.
    pub objective: f64,
    /// Worst-case bound it should stay below.
    pub bound: f64,
}

/// Findings of [`worst_case_monotonicity_check`]. Violations are data, not
/// errors; `passed` summarizes a clean run.
#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    /// Number of perturbations drawn.
    pub samples: usize,
    /// Whether the robustified closed loop at the tested dose is Hurwitz
    /// (the precondition for the comparison; sampling is skipped when it
    /// fails).
    pub worst_case_stable: bool,
    /// Objective of the robustified system at the tested dose.
    pub worst_case_objective: f64,
    /// Indices of samples whose perturbed closed loop was not Hurwitz.
    pub unstable_samples: Vec<usize>,
    /// Samples whose objective exceeded the worst-case bound.
    pub cost_violations: Vec<CostViolation>,
    /// Largest sampled objective (finite samples only).
    pub max_sampled_objective: f64,
}

impl MonotonicityReport {
    /// True when the precondition held and no sample violated stability or
    /// the cost ordering.
    pub fn passed(&self) -> bool {
        self.worst_case_stable
            && self.unstable_samples.is_empty()
            && self.cost_violations.is_empty()
    }
}

/// Samples `samples` in-bound perturbations (deterministically from
/// `seed`) and checks, for each, that the perturbed closed loop at `u` is
/// Hurwitz and that its objective stays below the worst-case objective
/// `J(u; A_tilde, beta) + COST_ORDER_TOL`.
pub fn worst_case_monotonicity_check(
    sys: &BilinearPositiveSystem,
    unc: &UncertaintySpec,
    u: &ControlInput,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let worst = robustify(sys, unc)?;
    let worst_obj = crate::performance::objective(&worst, u)?;
    if !worst_obj.stable {
        return Ok(MonotonicityReport {
            samples: 0,
            worst_case_stable: false,
            worst_case_objective: f64::INFINITY,
            unstable_samples: Vec::new(),
            cost_violations: Vec::new(),
            max_sampled_objective: f64::NEG_INFINITY,
        });
    }
    let bound = worst_obj.j;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unstable_samples = Vec::new();
    let mut cost_violations = Vec::new();
    let mut max_sampled = f64::NEG_INFINITY;
    for s in 0..samples {
        let pert = sample_perturbation(sys, unc, &mut rng)?;
        let a_cl = perturbed_closed_loop(sys, u, &pert)?;
        let cert = hurwitz_certificate(&a_cl);
        if !cert.is_stable() {
            unstable_samples.push(s);
            continue;
        }
        let obj = objective_given_closed_loop(sys, &a_cl, u.vector())?;
        if obj.j > max_sampled {
            max_sampled = obj.j;
        }
        if obj.j > bound + COST_ORDER_TOL {
            cost_violations.push(CostViolation {
                sample: s,
                objective: obj.j,
                bound,
            });
        }
    }
    Ok(MonotonicityReport {
        samples,
        worst_case_stable: true,
        worst_case_objective: bound,
        unstable_samples,
        cost_violations,
        max_sampled_objective: max_sampled,
    })
}

/// Solves the min-max dose problem by solving the nominal problem on the
/// robustified system. The returned dose stabilizes every in-bound
/// perturbation (dominance argument above), which
/// [`worst_case_monotonicity_check`] can confirm by sampling.
pub fn solve_robust(
    sys: &BilinearPositiveSystem,
    unc: &UncertaintySpec,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let worst = robustify(sys, unc)?;
    solve(&worst, opts)
}

//! Evaluation of the constant-input performance objective
//! `J(u) = sigma_max^2(-Q^(1/2) A_cl^(-1) B) + u^T R u`, its singular
//! triplets, the worst-case constant disturbance, and closed-form
//! expressions for the cascade model.
//!
//! For an internally positive closed loop the induced power norm of the
//! disturbance-to-output channel is attained at zero frequency, so the
//! whole frequency sweep collapses to the DC gain matrix. `dc_peak_check`
//! exists to verify that collapse numerically.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{hurwitz_certificate, BilinearPositiveSystem, ControlInput};

/// Relative gap under which a singular value is counted as attaining the
/// maximum: `sigma_i >= sigma_max * (1 - ACTIVE_TRIPLET_REL_GAP)`.
pub const ACTIVE_TRIPLET_REL_GAP: f64 = 1e-8;

/// Singular triplet `(sigma, w, v)` of the DC gain matrix
/// `G = -Q^(1/2) A_cl^(-1) B`, with `w^T G v = sigma` and unit-norm
/// vectors. Triplets are sign-normalized so the largest-magnitude entry of
/// `v` is positive; for the principal triplet of a positive system both
/// vectors then come out entrywise nonnegative.
#[derive(Clone, Debug)]
pub struct SingularTriplet {
    /// Singular value (nonnegative).
    pub sigma: f64,
    /// Left singular vector (length `n`).
    pub w: DVector<f64>,
    /// Right singular vector (length `q`).
    pub v: DVector<f64>,
}

/// Objective value at a constant input, with the pieces it decomposes
/// into. An unstable closed loop is a value (`j = +inf`, `stable = false`),
/// not an error, so line searches can probe freely.
#[derive(Clone, Debug)]
pub struct ObjectiveValue {
    /// `sigma_cl^2 + control_cost`, or `+inf` when unstable.
    pub j: f64,
    /// Peak singular value of the DC gain (`+inf` when unstable).
    pub sigma_cl: f64,
    /// `u^T R u`.
    pub control_cost: f64,
    /// Every triplet attaining `sigma_cl` within the multiplicity gap,
    /// sorted by decreasing singular value. Empty when unstable.
    pub triplets: Vec<SingularTriplet>,
    /// Whether the closed loop is Hurwitz.
    pub stable: bool,
    /// Spectral abscissa of the closed loop.
    pub spectral_abscissa: f64,
}

impl ObjectiveValue {
    /// True when the closed loop is stable and `j` is finite.
    pub fn is_finite(&self) -> bool {
        self.stable && self.j.is_finite()
    }
}

/// DC gain matrix `G = -Q^(1/2) A_cl^(-1) B` at a constant input.
///
/// For a Hurwitz Metzler closed loop `-A_cl^(-1)` is entrywise
/// nonnegative, so `G >= 0` whenever `Q^(1/2)` and `B` are.
pub fn dc_gain(sys: &BilinearPositiveSystem, u: &ControlInput) -> Result<DMatrix<f64>> {
    sys.check_input_dim(u.vector())?;
    let a_cl = sys.closed_loop_raw(u.vector());
    let cert = hurwitz_certificate(&a_cl);
    if !cert.is_stable() {
        return Err(Error::UnstableClosedLoop {
            spectral_abscissa: cert.spectral_abscissa,
        });
    }
    dc_gain_of(sys, &a_cl)
}

/// DC gain from an already-built Hurwitz closed-loop matrix.
fn dc_gain_of(sys: &BilinearPositiveSystem, a_cl: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = a_cl
        .clone()
        .lu()
        .solve(sys.b())
        .ok_or_else(|| Error::Numerical("LU solve failed on a Hurwitz closed loop".into()))?;
    Ok(-(sys.q_sqrt()? * x))
}

/// Objective at a constant input. Never fails on instability; see
/// [`ObjectiveValue`].
pub fn objective(sys: &BilinearPositiveSystem, u: &ControlInput) -> Result<ObjectiveValue> {
    sys.check_input_dim(u.vector())?;
    let a_cl = sys.closed_loop_raw(u.vector());
    objective_given_closed_loop(sys, &a_cl, u.vector())
}

/// Objective value with an explicitly supplied closed-loop matrix.
///
/// The dose cost term always uses `u` itself; this is what makes the
/// function reusable for perturbed loops `(A + Delta_A) + D(u - delta_u)`,
/// whose performance is measured at the nominal dose.
pub(crate) fn objective_given_closed_loop(
    sys: &BilinearPositiveSystem,
    a_cl: &DMatrix<f64>,
    u: &DVector<f64>,
) -> Result<ObjectiveValue> {
    let control_cost = (sys.r() * u).dot(u);
    let cert = hurwitz_certificate(a_cl);
    if !cert.is_stable() {
        return Ok(ObjectiveValue {
            j: f64::INFINITY,
            sigma_cl: f64::INFINITY,
            control_cost,
            triplets: Vec::new(),
            stable: false,
            spectral_abscissa: cert.spectral_abscissa,
        });
    }
    let g = dc_gain_of(sys, a_cl)?;
    let triplets = active_triplets(&g)?;
    let sigma_cl = triplets.first().map_or(0.0, |t| t.sigma);
    Ok(ObjectiveValue {
        j: sigma_cl * sigma_cl + control_cost,
        sigma_cl,
        control_cost,
        triplets,
        stable: true,
        spectral_abscissa: cert.spectral_abscissa,
    })
}

/// All singular triplets of `g` within the multiplicity gap of the largest
/// singular value, sorted by decreasing `sigma` and sign-normalized.
///
/// The implicit-shift bidiagonal iteration is capped; should it fail to
/// converge the triplets are rebuilt from the symmetric eigendecomposition
/// of the Gram matrix `g^T g`, which cannot stall and loses accuracy only
/// on the small singular values the active set never contains.
fn active_triplets(g: &DMatrix<f64>) -> Result<Vec<SingularTriplet>> {
    let (sigmas, ws, vs) = match g.clone().try_svd(true, true, f64::EPSILON, 10_000) {
        Some(svd) => {
            let u_mat = svd
                .u
                .ok_or_else(|| Error::Numerical("SVD did not return left vectors".into()))?;
            let v_t = svd
                .v_t
                .ok_or_else(|| Error::Numerical("SVD did not return right vectors".into()))?;
            let k = svd.singular_values.len();
            let ws = (0..k).map(|i| u_mat.column(i).into_owned()).collect();
            let vs = (0..k).map(|i| v_t.row(i).transpose()).collect();
            (svd.singular_values.iter().cloned().collect(), ws, vs)
        }
        None => triplets_from_gram(g),
    };
    let sigmas: Vec<f64> = sigmas;
    let ws: Vec<DVector<f64>> = ws;
    let vs: Vec<DVector<f64>> = vs;
    let sigma_max = sigmas.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..sigmas.len())
        .filter(|&i| sigmas[i] >= sigma_max * (1.0 - ACTIVE_TRIPLET_REL_GAP))
        .collect();
    order.sort_by(|&i, &j| {
        sigmas[j]
            .partial_cmp(&sigmas[i])
            .expect("singular values are finite")
    });
    let mut triplets = Vec::with_capacity(order.len());
    for i in order {
        let mut w = ws[i].clone();
        let mut v = vs[i].clone();
        // Sign convention: the dominant entry of v points up.
        let pivot = v.iter().cloned().fold(0.0_f64, |acc, x| {
            if x.abs() > acc.abs() {
                x
            } else {
                acc
            }
        });
        if pivot < 0.0 {
            w.neg_mut();
            v.neg_mut();
        }
        triplets.push(SingularTriplet {
            sigma: sigmas[i],
            w,
            v,
        });
    }
    Ok(triplets)
}

/// SVD fallback through the Gram matrix: right vectors and squared
/// singular values from `g^T g`, left vectors by applying `g`.
fn triplets_from_gram(g: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let eig = (g.transpose() * g).symmetric_eigen();
    let mut sigmas = Vec::with_capacity(eig.eigenvalues.len());
    let mut ws = Vec::with_capacity(eig.eigenvalues.len());
    let mut vs = Vec::with_capacity(eig.eigenvalues.len());
    for i in 0..eig.eigenvalues.len() {
        let sigma = eig.eigenvalues[i].max(0.0).sqrt();
        let v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let w = if sigma > 0.0 {
            (g * &v) / sigma
        } else {
            let mut e = DVector::zeros(g.nrows());
            if g.nrows() > 0 {
                e[0] = 1.0;
            }
            e
        };
        sigmas.push(sigma);
        ws.push(w);
        vs.push(v);
    }
    (sigmas, ws, vs)
}

/// Worst-case constant disturbance direction: the right principal singular
/// vector of the DC gain, sign-normalized and with rounding-level negative
/// entries clamped to zero, renormalized to unit length. Driving the loop
/// with this constant signal attains the peak output power.
pub fn worst_case_disturbance(
    sys: &BilinearPositiveSystem,
    u: &ControlInput,
) -> Result<DVector<f64>> {
    let obj = objective(sys, u)?;
    if !obj.stable {
        return Err(Error::UnstableClosedLoop {
            spectral_abscissa: obj.spectral_abscissa,
        });
    }
    let principal = obj
        .triplets
        .first()
        .ok_or_else(|| Error::Numerical("no singular triplet returned".into()))?;
    let mut v = principal.v.map(|x| x.max(0.0));
    let norm = v.norm();
    if norm == 0.0 {
        // Degenerate zero-gain loop: any unit disturbance attains the
        // (zero) peak; pick the uniform one deterministically.
        let q = v.len();
        v = DVector::from_element(q, (q as f64).sqrt().recip());
    } else {
        v /= norm;
    }
    Ok(v)
}

/// Closed-form objective for the cascade model:
/// `(|u - r|^(n-1) / (|u - r|^n - c))^2 + rho u^2`, valid on the stability
/// region `u > r` and `(u - r)^n > c`.
///
/// Outside that region (including `u <= r`, where the cascade diagonal is
/// nonnegative) the closed loop is not Hurwitz and the objective has no
/// finite value, so [`Error::OutsideStabilityRegion`] is returned with the
/// signed margin `(u - r)^n - c` (clamped nonpositive for `u <= r`).
pub fn closed_form_chain_objective(u: f64, n: usize, r: f64, c: f64, rho: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidOptions("chain formula needs n >= 1".into()));
    }
    let s = u - r;
    // Spectral abscissa of the cascade closed loop is (r - u) + c^(1/n),
    // so stability is exactly s > 0 and s^n > c.
    let margin = if s > 0.0 {
        s.powi(n as i32) - c
    } else {
        -c - s.abs().powi(n as i32)
    };
    if s <= 0.0 || margin <= 0.0 {
        return Err(Error::OutsideStabilityRegion { margin });
    }
    let num = s.abs().powi(n as i32 - 1);
    let den = s.abs().powi(n as i32) - c;
    let gain = num / den;
    Ok(gain * gain + rho * u * u)
}

/// Smallest feedback weight that destabilizes the cascade at dose `u`:
/// `|(r - u)^n|`. The closed loop is Hurwitz for `c` strictly below this
/// value (with `u > r`) and unstable at or above it.
pub fn chain_instability_threshold(u: f64, n: usize, r: f64) -> f64 {
    (r - u).abs().powi(n as i32)
}

/// Verifies that the frequency response `Q^(1/2) (jwI - A_cl)^(-1) B`
/// never exceeds the DC singular value: returns true iff
/// `sigma_max(w) <= sigma_cl + 1e-8 (1 + sigma_cl)` at every sampled
/// frequency. This is the positive-system property that reduces the
/// induced power norm to the DC gain.
pub fn dc_peak_check(
    sys: &BilinearPositiveSystem,
    u: &ControlInput,
    omegas: &[f64],
) -> Result<bool> {
    sys.check_input_dim(u.vector())?;
    let a_cl = sys.closed_loop_raw(u.vector());
    let cert = hurwitz_certificate(&a_cl);
    if !cert.is_stable() {
        return Err(Error::UnstableClosedLoop {
            spectral_abscissa: cert.spectral_abscissa,
        });
    }
    let obj = objective_given_closed_loop(sys, &a_cl, &DVector::zeros(sys.input_dim()))?;
    let sigma_cl = obj.sigma_cl;
    let tol = 1e-8 * (1.0 + sigma_cl);
    let n = sys.state_dim();
    let b_c = sys.b().map(|x| Complex::new(x, 0.0));
    let q_sqrt_c = sys.q_sqrt()?.map(|x| Complex::new(x, 0.0));
    for &omega in omegas {
        let mut m = a_cl.map(|x| Complex::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex::new(0.0, omega);
        }
        let x = m
            .lu()
            .solve(&b_c)
            .ok_or_else(|| Error::Numerical("resolvent solve failed at a sampled frequency".into()))?;
        let response = &q_sqrt_c * x;
        // Top singular value via the Hermitian Gram matrix (q x q): its
        // eigensolver cannot stall and the squaring loses accuracy only on
        // the small singular values, which are not compared here.
        let gram = response.adjoint() * &response;
        let sigma = gram
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(0.0)
            .sqrt();
        if sigma > sigma_cl + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

//! Model type for internally positive bilinear systems and the structural
//! predicates (Metzler check, Hurwitz certificate, strong connectivity) the
//! rest of the crate builds on.
//!
//! The plant is
//!
//! ```text
//!     x' = (A + D(u)) x + B d,      D(u) = diag(D_u u),
//!     z  = [Q^(1/2); 0] x + [0; R^(1/2)] u,
//! ```
//!
//! with `A` Metzler, `B >= 0` entrywise, `Q` symmetric positive
//! semidefinite and `R` symmetric positive definite. A constant input `u`
//! produces the closed-loop matrix `A + D(u)`, which is again Metzler, so
//! the loop is internally positive for every dose.

use std::sync::OnceLock;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Margin used everywhere a spectral abscissa is compared against zero:
/// a matrix is accepted as Hurwitz only if its abscissa is below `-TOL_STAB`.
pub const TOL_STAB: f64 = 1e-9;

/// Constant input (dose) vector with finite entries.
///
/// A thin newtype over [`DVector<f64>`]: constructors reject NaN and
/// infinite entries so downstream code can assume the dose is a real vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlInput(DVector<f64>);

impl ControlInput {
    /// Wraps a dose vector, rejecting non-finite entries.
    pub fn new(u: DVector<f64>) -> Result<Self> {
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "control input entry {i} is not finite"
            )));
        }
        Ok(ControlInput(u))
    }

    /// Convenience constructor from a slice.
    pub fn from_slice(u: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(u))
    }

    /// The zero dose of dimension `m`.
    pub fn zeros(m: usize) -> Self {
        ControlInput(DVector::zeros(m))
    }

    /// Uniform dose `value` in every channel.
    pub fn uniform(m: usize, value: f64) -> Result<Self> {
        Self::new(DVector::from_element(m, value))
    }

    /// Underlying vector.
    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    /// Number of input channels.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for a zero-dimensional input.
    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

impl From<ControlInput> for DVector<f64> {
    fn from(u: ControlInput) -> Self {
        u.0
    }
}

impl AsRef<DVector<f64>> for ControlInput {
    fn as_ref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Outcome of a Hurwitz test on a Metzler matrix.
///
/// Besides the spectral abscissa, a successful test attaches a positive
/// vector `p` with `A_cl p < 0` (scaled diagonal dominance). For Metzler
/// matrices the existence of such a `p` is equivalent to stability, so the
/// pair is an independently checkable certificate.
#[derive(Clone, Debug)]
pub struct StabilityCertificate {
    /// Largest real part over the spectrum.
    pub spectral_abscissa: f64,
    /// Positive vector with `A_cl * witness < 0`, when one was found.
    pub witness: Option<DVector<f64>>,
}

impl StabilityCertificate {
    /// True when the abscissa clears the stability margin [`TOL_STAB`].
    pub fn is_stable(&self) -> bool {
        self.spectral_abscissa < -TOL_STAB
    }
}

/// Internally positive bilinear plant with quadratic performance weights.
///
/// Construction only enforces shape consistency; semantic requirements
/// (Metzler `A`, nonnegative `B`, weight definiteness) are reported by
/// [`BilinearPositiveSystem::validate`] so callers can surface every
/// violation at once instead of failing on the first.
#[derive(Debug)]
pub struct BilinearPositiveSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    d_u: DMatrix<f64>,
    q_sqrt: OnceLock<Result<DMatrix<f64>>>,
    r_sqrt: OnceLock<Result<DMatrix<f64>>>,
}

impl Clone for BilinearPositiveSystem {
    fn clone(&self) -> Self {
        BilinearPositiveSystem {
            a: self.a.clone(),
            b: self.b.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            d_u: self.d_u.clone(),
            // Cached square roots are recomputed on demand in the clone.
            q_sqrt: OnceLock::new(),
            r_sqrt: OnceLock::new(),
        }
    }
}

impl BilinearPositiveSystem {
    /// Assembles a system from its matrices, checking shape consistency:
    /// `A` is `n x n`, `B` is `n x q`, `Q` is `n x n`, `R` is `m x m` and
    /// `D_u` is `n x m`.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        d_u: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B must have {} rows to match A, got {}",
                n,
                b.nrows()
            )));
        }
        if b.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "B must have at least one disturbance column".into(),
            ));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Q must be {n}x{n}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if d_u.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "D_u must have {} rows to match A, got {}",
                n,
                d_u.nrows()
            )));
        }
        let m = d_u.ncols();
        if m == 0 {
            return Err(Error::DimensionMismatch(
                "D_u must have at least one input column".into(),
            ));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "R must be {m}x{m} to match D_u, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let any_bad = [&a, &b, &q, &r, &d_u]
            .iter()
            .any(|mat| mat.iter().any(|x| !x.is_finite()));
        if any_bad {
            return Err(Error::InvalidOptions(
                "system matrices must have finite entries".into(),
            ));
        }
        Ok(BilinearPositiveSystem {
            a,
            b,
            q,
            r,
            d_u,
            q_sqrt: OnceLock::new(),
            r_sqrt: OnceLock::new(),
        })
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m` (number of dose channels).
    pub fn input_dim(&self) -> usize {
        self.d_u.ncols()
    }

    /// Disturbance dimension `q`.
    pub fn disturbance_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Drift matrix `A`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Disturbance map `B`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// State weight `Q`.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Input weight `R`.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Input map `D_u`: channel `k` scales the state decay through
    /// `diag(D_u e_k)`.
    pub fn d_u(&self) -> &DMatrix<f64> {
        &self.d_u
    }

    /// Lists every violated structural requirement, one message per
    /// offending entry or property. An empty list means the data describe a
    /// well-posed internally positive plant.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let n = self.state_dim();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.a[(i, j)] < 0.0 {
                    violations.push(format!(
                        "A is not Metzler: off-diagonal entry ({},{}) = {}",
                        i + 1,
                        j + 1,
                        self.a[(i, j)]
                    ));
                }
            }
        }
        for i in 0..self.b.nrows() {
            for j in 0..self.b.ncols() {
                if self.b[(i, j)] < 0.0 {
                    violations.push(format!(
                        "B has a negative entry at ({},{}) = {}",
                        i + 1,
                        j + 1,
                        self.b[(i, j)]
                    ));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if self.q[(i, j)] < 0.0 {
                    violations.push(format!(
                        "Q has a negative entry at ({},{}) = {}",
                        i + 1,
                        j + 1,
                        self.q[(i, j)]
                    ));
                }
            }
        }
        let q_scale = 1.0 + self.q.amax();
        if !is_symmetric(&self.q, 1e-12 * q_scale) {
            violations.push("Q is not symmetric".into());
        } else if let Some(lambda) = most_negative_eigenvalue(&self.q) {
            if lambda < -1e-10 * q_scale {
                violations.push(format!(
                    "Q is not positive semidefinite (eigenvalue {lambda:.6e})"
                ));
            }
        }
        let r_scale = 1.0 + self.r.amax();
        if !is_symmetric(&self.r, 1e-12 * r_scale) {
            violations.push("R is not symmetric".into());
        } else {
            let eigs = self.r.clone().symmetric_eigen().eigenvalues;
            let min = eigs.min();
            if min <= 0.0 {
                violations.push(format!(
                    "R is not positive definite (eigenvalue {min:.6e})"
                ));
            }
        }
        violations
    }

    /// Closed-loop matrix `A + diag(D_u u)` for a constant dose.
    pub fn closed_loop(&self, u: &ControlInput) -> Result<DMatrix<f64>> {
        self.check_input_dim(u.vector())?;
        Ok(self.closed_loop_raw(u.vector()))
    }

    /// Closed loop without the dimension check; internal hot path for the
    /// solver and samplers, which validate dimensions once up front.
    pub(crate) fn closed_loop_raw(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut a_cl = self.a.clone();
        let gains = &self.d_u * u;
        for i in 0..a_cl.nrows() {
            a_cl[(i, i)] += gains[i];
        }
        a_cl
    }

    pub(crate) fn check_input_dim(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "control input has {} entries, system has {} input channels",
                u.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Symmetric square root of `Q`, computed once and cached.
    ///
    /// Eigenvalues in `[-1e-10, 0)` are treated as rounded zeros and
    /// clamped; anything more negative is a genuine indefiniteness and is
    /// reported as [`Error::IndefiniteStateWeight`].
    pub fn q_sqrt(&self) -> Result<&DMatrix<f64>> {
        self.q_sqrt
            .get_or_init(|| symmetric_sqrt(&self.q, -1e-10).map_err(|lambda| {
                Error::IndefiniteStateWeight { eigenvalue: lambda }
            }))
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// Symmetric square root of `R`, computed once and cached. `R` must be
    /// positive definite.
    pub fn r_sqrt(&self) -> Result<&DMatrix<f64>> {
        self.r_sqrt
            .get_or_init(|| {
                let eig = self.r.clone().symmetric_eigen();
                let min = eig.eigenvalues.min();
                if min <= 0.0 {
                    return Err(Error::IndefiniteControlWeight { eigenvalue: min });
                }
                let sq = DVector::from_iterator(
                    eig.eigenvalues.len(),
                    eig.eigenvalues.iter().map(|l| l.sqrt()),
                );
                Ok(&eig.eigenvectors
                    * DMatrix::from_diagonal(&sq)
                    * eig.eigenvectors.transpose())
            })
            .as_ref()
            .map_err(|e| e.clone())
    }
}

/// Largest real part over the spectrum of a square matrix.
///
/// The shifted QR iteration can stall forever on matrices with exact
/// structural symmetries — a chain with wrap-around coupling produces the
/// textbook case, a cyclic pattern whose Hessenberg form the shifts leave
/// invariant. The sweep count is therefore capped, and on failure the
/// matrix is retried under a fixed random orthogonal similarity: the
/// spectrum is untouched while the broken symmetry lets the iteration
/// converge.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    if n == 1 {
        return m[(0, 0)];
    }
    let max_sweeps = 100 * n + 1000;
    let max_re = |schur: Schur<f64, nalgebra::Dyn>| {
        schur
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, max_sweeps) {
        return max_re(schur);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0AB5);
    for _ in 0..4 {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        let rotated = q.transpose() * m * &q;
        if let Some(schur) = Schur::try_new(rotated, f64::EPSILON, max_sweeps) {
            return max_re(schur);
        }
    }
    // An undecidable spectrum is treated as unstable; with the similarity
    // retries this is unreachable in practice.
    f64::INFINITY
}

/// Tests whether a Metzler matrix is Hurwitz and, if so, attaches a scaled
/// diagonal dominance witness `p > 0` with `A_cl p < 0`.
///
/// The witness is the solution of `A_cl p = -1` (entrywise). For a Hurwitz
/// Metzler matrix `-A_cl` is a nonsingular M-matrix, so `p` exists and is
/// strictly positive; the witness is dropped (left `None`) if numerical
/// trouble keeps it from satisfying its own definition.
pub fn hurwitz_certificate(a_cl: &DMatrix<f64>) -> StabilityCertificate {
    let alpha = spectral_abscissa(a_cl);
    let mut witness = None;
    if alpha < -TOL_STAB {
        let n = a_cl.nrows();
        let minus_ones = DVector::from_element(n, -1.0);
        if let Some(p) = a_cl.clone().lu().solve(&minus_ones) {
            let residual = a_cl * &p;
            let valid = p.iter().all(|x| *x > 0.0) && residual.iter().all(|x| *x < 0.0);
            if valid {
                witness = Some(p);
            }
        }
    }
    StabilityCertificate {
        spectral_abscissa: alpha,
        witness,
    }
}

/// True when the directed sparsity graph of `m` (edge `j -> i` whenever
/// `m[(i, j)] != 0`, self-loops ignored) is strongly connected.
///
/// Strong connectivity of the drift graph makes the closed loop irreducible
/// for every dose, which in turn keeps the peak gain direction unique and
/// the objective differentiable.
pub fn is_strongly_connected(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return false;
    }
    if n == 1 {
        return true;
    }
    let edge = |from: usize, to: usize| from != to && m[(to, from)] != 0.0;
    // Kosaraju-style double sweep: everything reachable from node 0 in the
    // graph and in its transpose.
    let reaches_all = |transpose: bool| -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(v) = stack.pop() {
            for (w, seen_w) in seen.iter_mut().enumerate() {
                let connected = if transpose { edge(w, v) } else { edge(v, w) };
                if connected && !*seen_w {
                    *seen_w = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    };
    reaches_all(false) && reaches_all(true)
}

/// Adjoint of the diagonal input map: returns `D_u^T diag_vec(X)` where
/// `diag_vec` extracts the diagonal of `X`.
///
/// This is the unique map satisfying `<X, D(u)>_F = <adjoint(X), u>` for all
/// `u`, because `D(u) = diag(D_u u)` only meets `X` on the diagonal.
pub fn input_map_adjoint(d_u: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = d_u.nrows();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "adjoint argument must be {n}x{n} to match D_u, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let diag = DVector::from_iterator(n, (0..n).map(|i| x[(i, i)]));
    Ok(d_u.transpose() * diag)
}

fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Most negative eigenvalue of a symmetric matrix, or `None` for `0x0`.
fn most_negative_eigenvalue(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return None;
    }
    let eigs = m.clone().symmetric_eigen().eigenvalues;
    Some(eigs.min())
}

/// Symmetric square root via eigendecomposition. Eigenvalues below
/// `clamp_floor` are rejected (the floor is returned as the error payload);
/// values in `[clamp_floor, 0)` are clamped to zero.
fn symmetric_sqrt(
    m: &DMatrix<f64>,
    clamp_floor: f64,
) -> std::result::Result<DMatrix<f64>, f64> {
    let eig = m.clone().symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < clamp_floor {
            return Err(*v);
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sq = DVector::from_iterator(vals.len(), vals.iter().map(|l| l.sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sq) * eig.eigenvectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state_system() -> BilinearPositiveSystem {
        // Stable Metzler drift with a single dose channel acting on both
        // states.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.3, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(1, 1, &[2.0]);
        let d_u = DMatrix::from_row_slice(2, 1, &[-1.0, -0.5]);
        BilinearPositiveSystem::new(a, b, q, r, d_u).unwrap()
    }

    #[test]
    fn zero_dose_recovers_drift() {
        let sys = two_state_system();
        let a_cl = sys.closed_loop(&ControlInput::zeros(1)).unwrap();
        assert_eq!(a_cl, *sys.a());
    }

    #[test]
    fn closed_loop_shifts_diagonal_only() {
        let sys = two_state_system();
        let u = ControlInput::from_slice(&[2.0]).unwrap();
        let a_cl = sys.closed_loop(&u).unwrap();
        assert_relative_eq!(a_cl[(0, 0)], -1.0 - 2.0);
        assert_relative_eq!(a_cl[(1, 1)], -2.0 - 1.0);
        assert_relative_eq!(a_cl[(0, 1)], 0.5);
        assert_relative_eq!(a_cl[(1, 0)], 0.3);
    }

    #[test]
    fn closed_loop_rejects_wrong_input_dim() {
        let sys = two_state_system();
        let u = ControlInput::from_slice(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            sys.closed_loop(&u),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn validate_flags_negative_off_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -0.1, 0.3, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(1, 1);
        let d_u = DMatrix::from_row_slice(2, 1, &[-1.0, -0.5]);
        let sys = BilinearPositiveSystem::new(a, b, q, r, d_u).unwrap();
        let violations = sys.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("Metzler"));
        assert!(violations[0].contains("(1,2)"));
    }

    #[test]
    fn validate_flags_negative_state_weight_entry() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        let r = DMatrix::identity(1, 1);
        let d_u = DMatrix::from_row_slice(2, 1, &[-1.0, -1.0]);
        let sys = BilinearPositiveSystem::new(a, b, q, r, d_u).unwrap();
        let violations = sys.validate();
        assert!(violations.iter().any(|v| v.contains("Q has a negative entry")));
    }

    #[test]
    fn validate_accepts_well_posed_system() {
        assert!(two_state_system().validate().is_empty());
    }

    #[test]
    fn hurwitz_certificate_carries_positive_witness() {
        let sys = two_state_system();
        let cert = hurwitz_certificate(sys.a());
        assert!(cert.is_stable());
        let p = cert.witness.expect("stable Metzler matrix must yield a witness");
        assert!(p.iter().all(|x| *x > 0.0));
        let image = sys.a() * &p;
        assert!(image.iter().all(|x| *x < 0.0));
    }

    #[test]
    fn unstable_matrix_has_no_witness() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.2]);
        let cert = hurwitz_certificate(&a);
        assert!(!cert.is_stable());
        assert!(cert.witness.is_none());
    }

    #[test]
    fn spectral_abscissa_of_known_matrix() {
        // Eigenvalues -1 and -3.
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        assert_relative_eq!(spectral_abscissa(&a), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_connectivity_detects_cycle_and_break() {
        // 0 -> 1 -> 2 -> 0 cycle: strongly connected.
        let cycle = DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 0.0, 1.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0],
        );
        assert!(is_strongly_connected(&cycle));
        // Drop the closing edge: a pure chain is not.
        let mut chain = cycle.clone();
        chain[(0, 2)] = 0.0;
        assert!(!is_strongly_connected(&chain));
    }

    #[test]
    fn adjoint_extracts_weighted_diagonal() {
        let d_u = DMatrix::from_row_slice(2, 1, &[-1.0, -0.5]);
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 100.0, -7.0, 4.0]);
        let g = input_map_adjoint(&d_u, &x).unwrap();
        // -1*3 + (-0.5)*4; off-diagonal entries must not contribute.
        assert_relative_eq!(g[0], -5.0);
    }

    #[test]
    fn q_sqrt_squares_back() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let sys = BilinearPositiveSystem::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            q.clone(),
            DMatrix::identity(1, 1),
            DMatrix::from_row_slice(2, 1, &[-1.0, -1.0]),
        )
        .unwrap();
        let s = sys.q_sqrt().unwrap();
        assert_relative_eq!(s * s, q, epsilon = 1e-12);
    }

    #[test]
    fn q_sqrt_rejects_indefinite_weight() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let sys = BilinearPositiveSystem::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            q,
            DMatrix::identity(1, 1),
            DMatrix::from_row_slice(2, 1, &[-1.0, -1.0]),
        )
        .unwrap();
        assert!(matches!(
            sys.q_sqrt(),
            Err(Error::IndefiniteStateWeight { .. })
        ));
    }

    #[test]
    fn control_input_rejects_nan() {
        assert!(ControlInput::from_slice(&[1.0, f64::NAN]).is_err());
    }
}

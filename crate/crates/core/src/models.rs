//! Generators for the built-in example family (a path-graph mutation
//! cascade with an uncertain feedback link) and for random positive-system
//! test instances.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::system::BilinearPositiveSystem;

/// Parameters of the mutation-cascade model: `n` variants arranged on a
/// path, each replicating at rate `r` and mutating into its successor at
/// unit rate, with an uncertain feedback link of weight `c` from the last
/// variant back to the first. One dose channel acts uniformly on every
/// variant (`D(u) = -uI`), the disturbance enters at the last variant and
/// the output weighs the last variant's abundance plus a quadratic dose
/// penalty `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainModelParams {
    /// Number of variants (`n >= 1`).
    pub n: usize,
    /// Replication rate on the diagonal.
    pub r: f64,
    /// Feedback weight from the last variant to the first (`c >= 0`).
    pub c: f64,
    /// Dose penalty scale (`rho > 0`).
    pub rho: f64,
}

impl ChainModelParams {
    /// Validates the parameter ranges.
    pub fn new(n: usize, r: f64, c: f64, rho: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidOptions("chain model needs n >= 1".into()));
        }
        if c < 0.0 || !c.is_finite() {
            return Err(Error::InvalidOptions(format!(
                "feedback weight c must be finite and >= 0, got {c}"
            )));
        }
        if rho <= 0.0 || !rho.is_finite() {
            return Err(Error::InvalidOptions(format!(
                "dose penalty rho must be finite and > 0, got {rho}"
            )));
        }
        if !r.is_finite() {
            return Err(Error::InvalidOptions("replication rate r must be finite".into()));
        }
        Ok(ChainModelParams { n, r, c, rho })
    }
}

/// Builds the cascade system: `A` carries `r` on the diagonal, 1 on the
/// first subdiagonal and `c` at entry `(1, n)`; `B = e_n`; `Q = e_n e_n^T`;
/// `R = [rho]`; `D_u` is the all-minus-ones column (one dose suppressing
/// every variant equally).
///
/// For `n = 1` the feedback link coincides with the diagonal, so
/// `A = [r + c]`.
pub fn make_chain_system(p: &ChainModelParams) -> BilinearPositiveSystem {
    let n = p.n;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = p.r;
        if i > 0 {
            a[(i, i - 1)] = 1.0;
        }
    }
    a[(0, n - 1)] += p.c;
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut q = DMatrix::zeros(n, n);
    q[(n - 1, n - 1)] = 1.0;
    let r = DMatrix::from_element(1, 1, p.rho);
    let d_u = DMatrix::from_element(n, 1, -1.0);
    BilinearPositiveSystem::new(a, b, q, r, d_u)
        .expect("chain construction is shape-consistent")
}

/// Seeded generator for random well-posed positive systems, used by the
/// property suites.
///
/// Produces a Metzler `A` (diagonal in `[-2, -0.5]`, off-diagonal entries
/// positive with probability `density`), a nonnegative `B` with at least
/// one strictly positive entry, diagonal positive `Q` and `R`, and a dense
/// strictly negative `D_u` (so a large enough uniform dose always
/// stabilizes). Deterministic per seed; `validate()` is empty by
/// construction. The closed loop at `u = 0` is *not* necessarily stable.
pub fn make_random_positive_system(
    n: usize,
    m: usize,
    q_dim: usize,
    density: f64,
    seed: u64,
) -> Result<BilinearPositiveSystem> {
    if n == 0 || m == 0 || q_dim == 0 {
        return Err(Error::InvalidOptions(
            "random system dimensions must be at least 1".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidOptions(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                a[(i, j)] = rng.random_range(-2.0..-0.5);
            } else if rng.random::<f64>() < density {
                // Keep row sums moderate so random instances are
                // stabilizable at small doses.
                a[(i, j)] = rng.random_range(0.02..1.0) / n as f64;
            }
        }
    }
    let mut b = DMatrix::zeros(n, q_dim);
    for i in 0..n {
        for j in 0..q_dim {
            if rng.random::<f64>() < 0.5 {
                b[(i, j)] = rng.random_range(0.0..1.0);
            }
        }
    }
    // Guarantee a nonzero disturbance path.
    let bi = rng.random_range(0..n);
    let bj = rng.random_range(0..q_dim);
    b[(bi, bj)] = rng.random_range(0.5..1.0);
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|_| rng.random_range(0.1..2.0)),
    ));
    let r = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        (0..m).map(|_| rng.random_range(0.5..2.0)),
    ));
    let mut d_u = DMatrix::zeros(n, m);
    for i in 0..n {
        for k in 0..m {
            d_u[(i, k)] = rng.random_range(-1.0..-0.1);
        }
    }
    Ok(BilinearPositiveSystem::new(a, b, q, r, d_u)
        .expect("random construction is shape-consistent"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{is_strongly_connected, ControlInput};
    use approx::assert_relative_eq;

    #[test]
    fn two_state_chain_matches_hand_matrix() {
        let p = ChainModelParams::new(2, 1.0, 0.0, 1.0).unwrap();
        let sys = make_chain_system(&p);
        assert_eq!(*sys.a(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]));
        assert_eq!(sys.b()[(1, 0)], 1.0);
        assert_eq!(sys.q()[(1, 1)], 1.0);
        assert_eq!(sys.r()[(0, 0)], 1.0);
    }

    #[test]
    fn chain_passes_validation() {
        let p = ChainModelParams::new(10, 1.0, 0.1, 3.0).unwrap();
        assert!(make_chain_system(&p).validate().is_empty());
    }

    #[test]
    fn single_state_chain_folds_feedback_into_diagonal() {
        let p = ChainModelParams::new(1, 0.5, 0.2, 1.0).unwrap();
        let sys = make_chain_system(&p);
        assert_relative_eq!(sys.a()[(0, 0)], 0.7);
    }

    #[test]
    fn chain_connectivity_tracks_feedback_weight() {
        let open = make_chain_system(&ChainModelParams::new(5, 1.0, 0.0, 1.0).unwrap());
        let closed = make_chain_system(&ChainModelParams::new(5, 1.0, 0.1, 1.0).unwrap());
        assert!(!is_strongly_connected(open.a()));
        assert!(is_strongly_connected(closed.a()));
    }

    #[test]
    fn chain_determinant_identity() {
        // det(A + D(u)) = (r - u)^n + (-1)^(n-1) c for the cascade.
        for &(n, r, c, u) in &[(3usize, 1.0, 0.2, 1.7), (6, 0.8, 0.05, 1.9), (4, 1.2, 0.0, 2.5)] {
            let sys = make_chain_system(&ChainModelParams::new(n, r, c, 1.0).unwrap());
            let u_vec = ControlInput::from_slice(&[u]).unwrap();
            let det = sys.closed_loop(&u_vec).unwrap().determinant();
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            let expected = (r - u).powi(n as i32) + sign * c;
            assert_relative_eq!(det, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn random_system_is_deterministic_and_valid() {
        let s1 = make_random_positive_system(5, 2, 3, 0.4, 99).unwrap();
        let s2 = make_random_positive_system(5, 2, 3, 0.4, 99).unwrap();
        assert_eq!(s1.a(), s2.a());
        assert_eq!(s1.b(), s2.b());
        assert_eq!(s1.d_u(), s2.d_u());
        assert!(s1.validate().is_empty());
    }

    #[test]
    fn full_density_is_strongly_connected() {
        let sys = make_random_positive_system(6, 2, 2, 1.0, 7).unwrap();
        assert!(is_strongly_connected(sys.a()));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChainModelParams::new(0, 1.0, 0.0, 1.0).is_err());
        assert!(ChainModelParams::new(3, 1.0, -0.1, 1.0).is_err());
        assert!(ChainModelParams::new(3, 1.0, 0.0, 0.0).is_err());
        assert!(make_random_positive_system(4, 1, 1, 0.0, 1).is_err());
    }
}

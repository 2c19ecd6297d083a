//! Structural and analytical invariants of the library, checked over
//! seeded random instances: adjoint consistency, convexity and
//! subgradient inequalities of the objective, oracle agreement on the
//! cascade family, optimizer monotonicity, and the worst-case dominance
//! properties of robustified designs.

use bilinear_control::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random cascade instance together with a dose comfortably inside the
/// stability region (`u - r >= c^(1/n) + 0.2`).
fn random_chain_instance(rng: &mut ChaCha8Rng) -> (ChainModelParams, f64) {
    let n = rng.random_range(1..=8usize);
    let r = rng.random_range(0.3..1.5);
    let c = if rng.random::<f64>() < 0.3 {
        0.0
    } else {
        rng.random_range(0.0..0.3)
    };
    let rho = rng.random_range(0.5..4.0);
    let params = ChainModelParams::new(n, r, c, rho).unwrap();
    let u = r + c.powf(1.0 / n as f64) + 0.2 + rng.random_range(0.0..1.5);
    (params, u)
}

/// A dose that certifiably stabilizes a random system from
/// [`make_random_positive_system`]: every input-gain entry is at most
/// -0.1, so a uniform dose `t` shifts each diagonal entry down by at
/// least `0.1 t`, and for Metzler matrices entrywise dominance bounds the
/// spectral abscissa.
fn stabilizing_uniform_dose(sys: &BilinearPositiveSystem, margin: f64) -> ControlInput {
    let alpha = spectral_abscissa(sys.a());
    let t = ((alpha + margin).max(0.0)) / 0.1;
    ControlInput::uniform(sys.input_dim(), t).unwrap()
}

fn assert_stable(sys: &BilinearPositiveSystem, u: &ControlInput) {
    let a_cl = sys.closed_loop(u).unwrap();
    assert!(
        spectral_abscissa(&a_cl) < 0.0,
        "dose expected to stabilize the loop"
    );
}

// ---------------------------------------------------------------------
// Structural identities
// ---------------------------------------------------------------------

proptest! {
    /// <X, diag(D_u u)> == <D_u^T diag(X), u> for every square X and dose u.
    #[test]
    fn adjoint_identity_holds(
        n in 1usize..6,
        m in 1usize..4,
        seed in 0u64..1000,
    ) {
        let mut rng = rng(seed);
        let x = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let d_u = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let u = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));

        let lhs = {
            // <X, diag(D_u u)> reduces to the diagonal inner product.
            let gains = &d_u * &u;
            (0..n).map(|i| x[(i, i)] * gains[i]).sum::<f64>()
        };
        let adjoint = bilinear_control::system::input_map_adjoint(&d_u, &x).unwrap();
        let rhs = adjoint.dot(&u);
        prop_assert!(
            (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
            "adjoint mismatch: {lhs} vs {rhs}"
        );
    }

    /// The closed loop is affine in the dose: moving from u to u + v adds
    /// exactly diag(D_u v).
    #[test]
    fn closed_loop_is_affine_in_dose(
        n in 1usize..6,
        m in 1usize..4,
        seed in 0u64..1000,
    ) {
        let mut rng = rng(seed);
        let sys = make_random_positive_system(n, m, 1, 1.0, rng.random()).unwrap();
        let u = ControlInput::new(DVector::from_fn(m, |_, _| rng.random_range(0.0..2.0))).unwrap();
        let v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let shifted = ControlInput::new(u.vector() + &v).unwrap();

        let diff = sys.closed_loop(&shifted).unwrap() - sys.closed_loop(&u).unwrap();
        let gains = sys.d_u() * &v;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { gains[i] } else { 0.0 };
                prop_assert!((diff[(i, j)] - expect).abs() <= 1e-12);
            }
        }
    }

    /// Trajectories of a cascade driven by nonnegative signals from
    /// nonnegative initial states stay nonnegative.
    #[test]
    fn chain_trajectories_stay_nonnegative(
        n in 1usize..6,
        seed in 0u64..500,
    ) {
        let mut rng = rng(seed);
        let params = ChainModelParams::new(
            n,
            rng.random_range(0.2..1.2),
            rng.random_range(0.0..0.2),
            1.0,
        ).unwrap();
        let sys = make_chain_system(&params);
        let u = rng.random_range(0.0..3.0);
        let d = rng.random_range(0.0..1.5);
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
        // Unstable doses are fine as long as the run stays under the
        // blow-up guard; keep the horizon short.
        let traj = integrate(
            &sys,
            &SignalSpec::Constant(DVector::from_element(1, u)),
            &SignalSpec::Constant(DVector::from_element(1, d)),
            &x0,
            5.0,
            1e-2,
        );
        if let Ok(traj) = traj {
            prop_assert!(positivity_check(&traj));
        }
    }
}

#[test]
fn hurwitz_witness_is_exact_on_stable_loops() {
    let mut rng = rng(41);
    for _ in 0..50 {
        let (params, u) = random_chain_instance(&mut rng);
        let sys = make_chain_system(&params);
        let a_cl = sys
            .closed_loop(&ControlInput::from_slice(&[u]).unwrap())
            .unwrap();
        let cert = hurwitz_certificate(&a_cl);
        assert!(cert.is_stable(), "in-region dose must be stable");
        let p = cert.witness.expect("stable Metzler loop must carry a witness");
        assert!(p.iter().all(|x| *x > 0.0));
        let image = &a_cl * &p;
        assert!(image.iter().all(|x| *x < 0.0));
    }
}

#[test]
fn chain_is_strongly_connected_exactly_when_coupled() {
    for n in 2..8 {
        let coupled = make_chain_system(&ChainModelParams::new(n, 1.0, 0.1, 1.0).unwrap());
        let uncoupled = make_chain_system(&ChainModelParams::new(n, 1.0, 0.0, 1.0).unwrap());
        assert!(is_strongly_connected(coupled.a()));
        assert!(!is_strongly_connected(uncoupled.a()));
    }
}

// ---------------------------------------------------------------------
// Objective analysis
// ---------------------------------------------------------------------

#[test]
fn closed_form_matches_numerical_objective_on_random_chains() {
    let mut rng = rng(42);
    for _ in 0..50 {
        let (params, u) = random_chain_instance(&mut rng);
        let sys = make_chain_system(&params);
        let numeric = objective(&sys, &ControlInput::from_slice(&[u]).unwrap())
            .unwrap()
            .j;
        let formula =
            closed_form_chain_objective(u, params.n, params.r, params.c, params.rho).unwrap();
        assert!(
            (numeric - formula).abs() <= 1e-6 * (1.0 + formula.abs()),
            "n={} r={} c={} rho={} u={u}: {numeric} vs {formula}",
            params.n,
            params.r,
            params.c,
            params.rho
        );
    }
}

#[test]
fn objective_is_convex_along_segments() {
    let mut rng = rng(43);
    for trial in 0..40 {
        let (params, u_lo) = random_chain_instance(&mut rng);
        let sys = make_chain_system(&params);
        let u_hi = u_lo + rng.random_range(0.1..2.0);
        let j = |u: f64| {
            objective(&sys, &ControlInput::from_slice(&[u]).unwrap())
                .unwrap()
                .j
        };
        let (ja, jb) = (j(u_lo), j(u_hi));
        for lambda in [0.25, 0.5, 0.75] {
            let mid = lambda * u_lo + (1.0 - lambda) * u_hi;
            let jm = j(mid);
            let chord = lambda * ja + (1.0 - lambda) * jb;
            assert!(
                jm <= chord + 1e-8 * (1.0 + chord.abs()),
                "trial {trial}: J({mid}) = {jm} above chord {chord}"
            );
        }
    }
}

#[test]
fn objective_degrades_monotonically_in_coupling() {
    let mut rng = rng(44);
    for _ in 0..30 {
        let n = rng.random_range(2..=6usize);
        let r = rng.random_range(0.3..1.2);
        let rho = rng.random_range(0.5..3.0);
        let u = r + 1.0;
        // (u - r)^n = 1, so any c < 1 keeps the loop stable.
        let mut last = f64::NEG_INFINITY;
        for c in [0.0, 0.1, 0.3, 0.6, 0.9] {
            let sys = make_chain_system(&ChainModelParams::new(n, r, c, rho).unwrap());
            let j = objective(&sys, &ControlInput::from_slice(&[u]).unwrap())
                .unwrap()
                .j;
            assert!(
                j >= last - 1e-10 * (1.0 + j.abs()),
                "J must not improve as coupling grows: {last} -> {j} at c={c}"
            );
            last = j;
        }
    }
}

#[test]
fn singular_triplets_satisfy_their_defining_equation() {
    let mut rng = rng(45);
    for _ in 0..40 {
        let n = rng.random_range(2..=7usize);
        let m = rng.random_range(1..=3usize);
        let q = rng.random_range(1..=3usize);
        let sys = make_random_positive_system(n, m, q, 0.8, rng.random()).unwrap();
        let u = stabilizing_uniform_dose(&sys, 0.5);
        assert_stable(&sys, &u);
        let g = dc_gain(&sys, &u).unwrap();
        let obj = objective(&sys, &u).unwrap();
        for t in &obj.triplets {
            let residual = (&g * &t.v - &t.w * t.sigma).norm();
            assert!(
                residual <= 1e-9 * (1.0 + t.sigma),
                "G v deviates from sigma w by {residual}"
            );
            assert!((t.v.norm() - 1.0).abs() <= 1e-9);
            assert!((t.w.norm() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn subgradient_inequality_holds_between_random_dose_pairs() {
    let mut rng = rng(46);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=6usize);
        let m = rng.random_range(1..=3usize);
        let q = rng.random_range(1..=2usize);
        let sys = make_random_positive_system(n, m, q, 0.9, rng.random()).unwrap();
        let base = stabilizing_uniform_dose(&sys, 0.8);
        let jitter = |rng: &mut ChaCha8Rng, v: &DVector<f64>| {
            DVector::from_fn(v.len(), |i, _| v[i] + rng.random_range(-0.2..1.0))
        };
        let ua = ControlInput::new(jitter(&mut rng, base.vector())).unwrap();
        let ub = ControlInput::new(jitter(&mut rng, base.vector())).unwrap();
        let oa = objective(&sys, &ua).unwrap();
        let ob = objective(&sys, &ub).unwrap();
        if !oa.stable || !ob.stable {
            continue;
        }
        let el = subdifferential_element(&sys, &ua, None).unwrap();
        let gap = ob.j - oa.j - el.g.dot(&(ub.vector() - ua.vector()));
        assert!(
            gap >= -1e-8 * (1.0 + oa.j.abs() + ob.j.abs()),
            "subgradient inequality violated by {gap}"
        );
        checked += 1;
    }
}

#[test]
fn gradient_matches_central_differences_on_smooth_instances() {
    let mut rng = rng(47);
    let mut checked = 0;
    while checked < 25 {
        let n = rng.random_range(2..=6usize);
        let m = rng.random_range(1..=3usize);
        let q = rng.random_range(1..=2usize);
        // Full density keeps the drift strongly connected, hence the top
        // singular value simple and the objective differentiable.
        let sys = make_random_positive_system(n, m, q, 1.0, rng.random()).unwrap();
        assert!(is_strongly_connected(sys.a()));
        let u = {
            let base = stabilizing_uniform_dose(&sys, 1.0);
            ControlInput::new(DVector::from_fn(m, |i, _| {
                base.vector()[i] + rng.random_range(0.0..0.5)
            }))
            .unwrap()
        };
        let obj = objective(&sys, &u).unwrap();
        if !obj.stable || obj.spectral_abscissa > -0.2 {
            continue;
        }
        let el = subdifferential_element(&sys, &u, None).unwrap();
        for i in 0..m {
            let h = 1e-6 * (1.0 + u.vector()[i].abs());
            let probe = |delta: f64| {
                let mut v = u.vector().clone();
                v[i] += delta;
                objective(&sys, &ControlInput::new(v).unwrap()).unwrap().j
            };
            let fd = (probe(h) - probe(-h)) / (2.0 * h);
            assert!(
                (el.g[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                "component {i}: analytic {} vs central difference {fd}",
                el.g[i]
            );
        }
        checked += 1;
    }
}

// ---------------------------------------------------------------------
// Optimizer behaviour
// ---------------------------------------------------------------------

#[test]
fn best_value_history_is_monotone_and_final() {
    let mut rng = rng(48);
    for _ in 0..10 {
        let (params, u0) = random_chain_instance(&mut rng);
        let sys = make_chain_system(&params);
        let opts = SolveOptions {
            u0: Some(ControlInput::from_slice(&[u0]).unwrap()),
            max_iters: 400,
            ..Default::default()
        };
        let res = solve(&sys, &opts).unwrap();
        for pair in res.history.windows(2) {
            assert!(
                pair[1].j_best <= pair[0].j_best + 1e-12,
                "best value regressed"
            );
        }
        let last = res.history.last().expect("history must not be empty");
        assert_eq!(res.j_star, last.j_best);
        assert_stable(&sys, &res.u_star);
    }
}

#[test]
fn solver_modes_agree_on_smooth_instances() {
    let mut rng = rng(49);
    // A coupled cascade plus dense random systems: all strongly connected,
    // so both the nonsmooth iteration and gradient descent must land on
    // the same optimal value.
    let mut instances = vec![make_chain_system(
        &ChainModelParams::new(6, 0.8, 0.1, 2.0).unwrap(),
    )];
    for _ in 0..3 {
        let n = rng.random_range(2..=5usize);
        let m = rng.random_range(1..=2usize);
        instances.push(make_random_positive_system(n, m, 2, 1.0, rng.random()).unwrap());
    }
    for (idx, sys) in instances.iter().enumerate() {
        assert!(is_strongly_connected(sys.a()));
        let solve_with = |mode: SolveMode| {
            let opts = SolveOptions {
                mode,
                max_iters: 4000,
                window: 100,
                ..Default::default()
            };
            solve(sys, &opts).unwrap()
        };
        let sub = solve_with(SolveMode::Subgradient);
        let grad = solve_with(SolveMode::Gradient);
        assert_eq!(sub.mode_used, ModeUsed::Subgradient);
        assert_eq!(grad.mode_used, ModeUsed::Gradient);
        assert!(
            (sub.j_star - grad.j_star).abs() <= 1e-4 * (1.0 + grad.j_star.abs()),
            "instance {idx}: subgradient J = {} vs gradient J = {}",
            sub.j_star,
            grad.j_star
        );
    }
}

// ---------------------------------------------------------------------
// Robustification
// ---------------------------------------------------------------------

/// Cascade with a drift-corner uncertainty and a dose under-delivery
/// bound; used by the robustness properties below.
fn robust_fixture() -> (BilinearPositiveSystem, UncertaintySpec) {
    let params = ChainModelParams::new(6, 1.0, 0.05, 2.0).unwrap();
    let sys = make_chain_system(&params);
    let mut a_tilde = DMatrix::zeros(6, 6);
    a_tilde[(0, 5)] = 0.08;
    a_tilde[(2, 1)] = 0.05;
    let beta = DVector::from_element(1, 0.15);
    let unc = UncertaintySpec::new(a_tilde, beta).unwrap();
    (sys, unc)
}

#[test]
fn robustified_drift_dominates_every_admissible_perturbation() {
    let (sys, unc) = robust_fixture();
    let robust = robustify(&sys, &unc).unwrap();
    let mut rng = rng(50);
    let u = ControlInput::from_slice(&[2.4]).unwrap();
    for _ in 0..100 {
        let sample = sample_perturbation(&sys, &unc, &mut rng).unwrap();
        let perturbed = perturbed_closed_loop(&sys, &u, &sample).unwrap();
        let robust_cl = robust.closed_loop(&u).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!(
                    robust_cl[(i, j)] >= perturbed[(i, j)] - 1e-12,
                    "entry ({i},{j}): robust {} < perturbed {}",
                    robust_cl[(i, j)],
                    perturbed[(i, j)]
                );
            }
        }
    }
}

#[test]
fn stability_of_robust_design_transfers_to_perturbed_loops() {
    let (sys, unc) = robust_fixture();
    let res = solve_robust(&sys, &unc, &SolveOptions::default()).unwrap();
    assert!(res.converged);
    let report = worst_case_monotonicity_check(&sys, &unc, &res.u_star, 100, 7).unwrap();
    assert!(report.worst_case_stable);
    assert!(report.unstable_samples.is_empty());
    assert!(report.cost_violations.is_empty());
    assert!(report.passed());
    assert!(report.max_sampled_objective <= report.worst_case_objective + 1e-8);
}

#[test]
fn robust_objective_dominates_nominal_objective() {
    let (sys, unc) = robust_fixture();
    let robust = robustify(&sys, &unc).unwrap();
    let mut rng = rng(51);
    for _ in 0..30 {
        let u = ControlInput::from_slice(&[rng.random_range(2.2..3.5)]).unwrap();
        let j_rob = objective(&robust, &u).unwrap().j;
        let j_nom = objective(&sys, &u).unwrap().j;
        assert!(
            j_rob >= j_nom - 1e-10 * (1.0 + j_nom.abs()),
            "robust J = {j_rob} below nominal J = {j_nom}"
        );
    }
}

#[test]
fn zero_uncertainty_round_trips_through_robust_solver() {
    let params = ChainModelParams::new(5, 0.9, 0.04, 1.5).unwrap();
    let sys = make_chain_system(&params);
    let unc = UncertaintySpec::zero(5, 1);
    let nominal = solve(&sys, &SolveOptions::default()).unwrap();
    let robust = solve_robust(&sys, &unc, &SolveOptions::default()).unwrap();
    assert!(
        (nominal.j_star - robust.j_star).abs() <= 1e-9 * (1.0 + nominal.j_star.abs())
    );
}

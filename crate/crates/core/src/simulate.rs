//! Time-domain verification: fixed-step integration of the bilinear ODE,
//! finite-horizon power-seminorm estimation, the second-order
//! zero-mean-variation experiment, and impulse-response tables.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::performance::worst_case_disturbance;
use crate::system::{spectral_abscissa, BilinearPositiveSystem, ControlInput};

/// Any state entry beyond this magnitude aborts an integration; unstable
/// runs are expected and must terminate cleanly.
pub const BLOWUP_GUARD: f64 = 1e12;

/// One sinusoidal term `amplitude * sin(frequency * t + phase)` of a
/// sinusoid-sum signal.
#[derive(Clone, Debug)]
pub struct SinusoidTerm {
    /// Per-channel amplitude vector.
    pub amplitude: DVector<f64>,
    /// Angular frequency (rad per unit time), nonzero for a genuine
    /// oscillation.
    pub frequency: f64,
    /// Phase offset (rad).
    pub phase: f64,
}

/// Deterministic input/disturbance signals for the integrator. `Zero`
/// adapts to any channel dimension; the others carry their dimension in
/// the stored vectors.
#[derive(Clone, Debug)]
pub enum SignalSpec {
    /// Identically zero.
    Zero,
    /// Constant vector.
    Constant(DVector<f64>),
    /// `mean + sum of sinusoid terms`; with a zero mean the long-run time
    /// average vanishes.
    SinusoidSum {
        mean: DVector<f64>,
        terms: Vec<SinusoidTerm>,
    },
    /// Rectangular pulse of the given amplitude on `[0, width)`.
    Impulse { amplitude: DVector<f64>, width: f64 },
}

impl SignalSpec {
    /// Channel dimension, or `None` when the signal fits any dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            SignalSpec::Zero => None,
            SignalSpec::Constant(c) => Some(c.len()),
            SignalSpec::SinusoidSum { mean, .. } => Some(mean.len()),
            SignalSpec::Impulse { amplitude, .. } => Some(amplitude.len()),
        }
    }

    /// Signal value at time `t`, materialized into `out`.
    fn sample_into(&self, t: f64, out: &mut DVector<f64>) {
        match self {
            SignalSpec::Zero => out.fill(0.0),
            SignalSpec::Constant(c) => out.copy_from(c),
            SignalSpec::SinusoidSum { mean, terms } => {
                out.copy_from(mean);
                for term in terms {
                    let s = (term.frequency * t + term.phase).sin();
                    out.axpy(s, &term.amplitude, 1.0);
                }
            }
            SignalSpec::Impulse { amplitude, width } => {
                if t < *width {
                    out.copy_from(amplitude);
                } else {
                    out.fill(0.0);
                }
            }
        }
    }

    /// Signal value at time `t`.
    pub fn sample(&self, t: f64, dim: usize) -> DVector<f64> {
        let mut out = DVector::zeros(dim);
        self.sample_into(t, &mut out);
        out
    }

    /// True when the long-run time average of the signal is zero: the zero
    /// signal, or a sinusoid sum with zero mean and nonzero frequencies.
    pub fn is_zero_mean(&self) -> bool {
        match self {
            SignalSpec::Zero => true,
            SignalSpec::Constant(c) => c.iter().all(|x| *x == 0.0),
            SignalSpec::SinusoidSum { mean, terms } => {
                mean.iter().all(|x| *x == 0.0) && terms.iter().all(|t| t.frequency != 0.0)
            }
            SignalSpec::Impulse { .. } => false,
        }
    }

    /// Largest period among the sinusoid terms, when there is one.
    fn slowest_period(&self) -> Option<f64> {
        match self {
            SignalSpec::SinusoidSum { terms, .. } => terms
                .iter()
                .filter(|t| t.frequency != 0.0)
                .map(|t| std::f64::consts::TAU / t.frequency.abs())
                .fold(None, |acc: Option<f64>, p| {
                    Some(acc.map_or(p, |a| a.max(p)))
                }),
            _ => None,
        }
    }

    /// The signal scaled by a factor and shifted by a constant offset
    /// (`offset + scale * self`); used to build `u_star + eps * variation`
    /// drive signals.
    fn scaled_about(&self, offset: &DVector<f64>, scale: f64) -> SignalSpec {
        match self {
            SignalSpec::Zero => SignalSpec::Constant(offset.clone()),
            SignalSpec::Constant(c) => SignalSpec::Constant(offset + c * scale),
            SignalSpec::SinusoidSum { mean, terms } => SignalSpec::SinusoidSum {
                mean: offset + mean * scale,
                terms: terms
                    .iter()
                    .map(|t| SinusoidTerm {
                        amplitude: &t.amplitude * scale,
                        frequency: t.frequency,
                        phase: t.phase,
                    })
                    .collect(),
            },
            SignalSpec::Impulse { amplitude, width } => SignalSpec::Impulse {
                amplitude: offset + amplitude * scale,
                width: *width,
            },
        }
    }
}

/// Result of one integration: a uniform time grid, the states (one row per
/// time point, `n` columns) and the performance outputs
/// `z = [Q^(1/2) x; R^(1/2) u]` (one row per time point, `n + m` columns).
#[derive(Clone, Debug)]
pub struct Trajectory {
    t: Vec<f64>,
    states: DMatrix<f64>,
    outputs: DMatrix<f64>,
}

impl Trajectory {
    /// Time grid.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Grid spacing.
    pub fn dt(&self) -> f64 {
        if self.t.len() >= 2 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }

    /// State samples, one row per time point.
    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    /// Output samples `z(t)`, one row per time point.
    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    /// True when the trajectory holds no samples.
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Integrates `x' = (A + diag(D_u u(t))) x + B d(t)` with classical
/// fixed-step fourth-order Runge-Kutta from `x0` over `[0, horizon]`.
///
/// Fails with [`Error::StateBlowup`] the first time any state magnitude
/// exceeds [`BLOWUP_GUARD`]; use [`impulse_response`] to keep the partial
/// data of a diverging run.
pub fn integrate(
    sys: &BilinearPositiveSystem,
    u_sig: &SignalSpec,
    d_sig: &SignalSpec,
    x0: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let (traj, blowup) = rk4_run(sys, u_sig, d_sig, x0, horizon, dt)?;
    if let Some(time) = blowup {
        return Err(Error::StateBlowup { time });
    }
    Ok(traj)
}

/// Integration core: returns the (possibly truncated) trajectory together
/// with the first blow-up time, if the guard fired.
fn rk4_run(
    sys: &BilinearPositiveSystem,
    u_sig: &SignalSpec,
    d_sig: &SignalSpec,
    x0: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> Result<(Trajectory, Option<f64>)> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let q_dim = sys.disturbance_dim();
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidOptions(format!("dt must be positive, got {dt}")));
    }
    if horizon < dt || !horizon.is_finite() {
        return Err(Error::InvalidOptions(format!(
            "horizon must be at least one step (dt = {dt}), got {horizon}"
        )));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x0 has {} entries, system has {n} states",
            x0.len()
        )));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidOptions("x0 must be finite".into()));
    }
    if let Some(d) = u_sig.dim() {
        if d != m {
            return Err(Error::DimensionMismatch(format!(
                "input signal has {d} channels, system has {m}"
            )));
        }
    }
    if let Some(d) = d_sig.dim() {
        if d != q_dim {
            return Err(Error::DimensionMismatch(format!(
                "disturbance signal has {d} channels, system has {q_dim}"
            )));
        }
    }
    let q_sqrt = sys.q_sqrt()?.clone();
    let r_sqrt = sys.r_sqrt()?.clone();
    let steps = ((horizon / dt).round() as usize).max(1);

    let mut t_grid = Vec::with_capacity(steps + 1);
    let mut states = DMatrix::zeros(steps + 1, n);
    let mut outputs = DMatrix::zeros(steps + 1, n + m);

    let mut x = x0.clone();
    let mut u_buf = DVector::zeros(m);
    let mut d_buf = DVector::zeros(q_dim);
    // x' = A x + (D_u u) .* x + B d, evaluated without forming the closed
    // loop matrix at every stage.
    let deriv = |t: f64,
                 x: &DVector<f64>,
                 u_buf: &mut DVector<f64>,
                 d_buf: &mut DVector<f64>|
     -> DVector<f64> {
        u_sig.sample_into(t, u_buf);
        d_sig.sample_into(t, d_buf);
        let mut dx = sys.a() * x;
        let gains = sys.d_u() * &*u_buf;
        for i in 0..x.len() {
            dx[i] += gains[i] * x[i];
        }
        dx += sys.b() * &*d_buf;
        dx
    };

    let record = |idx: usize,
                      t: f64,
                      x: &DVector<f64>,
                      t_grid: &mut Vec<f64>,
                      states: &mut DMatrix<f64>,
                      outputs: &mut DMatrix<f64>,
                      u_buf: &mut DVector<f64>| {
        t_grid.push(t);
        states.row_mut(idx).copy_from_slice(x.as_slice());
        let zx = &q_sqrt * x;
        u_sig.sample_into(t, u_buf);
        let zu = &r_sqrt * &*u_buf;
        for j in 0..n {
            outputs[(idx, j)] = zx[j];
        }
        for j in 0..m {
            outputs[(idx, n + j)] = zu[j];
        }
    };

    record(0, 0.0, &x, &mut t_grid, &mut states, &mut outputs, &mut u_buf);
    let mut blowup = None;
    let mut recorded = 1;
    for step in 0..steps {
        let t = step as f64 * dt;
        let k1 = deriv(t, &x, &mut u_buf, &mut d_buf);
        let k2 = deriv(t + 0.5 * dt, &(&x + &k1 * (0.5 * dt)), &mut u_buf, &mut d_buf);
        let k3 = deriv(t + 0.5 * dt, &(&x + &k2 * (0.5 * dt)), &mut u_buf, &mut d_buf);
        let k4 = deriv(t + dt, &(&x + &k3 * dt), &mut u_buf, &mut d_buf);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let t_next = (step + 1) as f64 * dt;
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_GUARD) {
            blowup = Some(t_next);
            break;
        }
        record(
            step + 1,
            t_next,
            &x,
            &mut t_grid,
            &mut states,
            &mut outputs,
            &mut u_buf,
        );
        recorded += 1;
    }
    let states = states.rows(0, recorded).into_owned();
    let outputs = outputs.rows(0, recorded).into_owned();
    Ok((
        Trajectory {
            t: t_grid,
            states,
            outputs,
        },
        blowup,
    ))
}

/// True when the trajectory's states stay nonnegative up to rounding:
/// `min X >= -1e-9 * (1 + max X)`.
pub fn positivity_check(traj: &Trajectory) -> bool {
    if traj.is_empty() {
        return true;
    }
    let max = traj.states.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = traj.states.iter().cloned().fold(f64::INFINITY, f64::min);
    min >= -1e-9 * (1.0 + max)
}

/// Time-averaged squared output power over the tail of a trajectory:
/// `(1/T') int z^T z dt` by trapezoidal quadrature, where the window drops
/// the first `burn_in_fraction` of the horizon.
///
/// `burn_in_fraction` must lie in `[0, 0.9]`; that is a programming
/// contract, not a data condition, so it is asserted.
pub fn power_seminorm_estimate(traj: &Trajectory, burn_in_fraction: f64) -> f64 {
    assert!(
        (0.0..=0.9).contains(&burn_in_fraction),
        "burn_in_fraction must lie in [0, 0.9], got {burn_in_fraction}"
    );
    let n_pts = traj.len();
    if n_pts == 0 {
        return 0.0;
    }
    let sq = |i: usize| traj.outputs.row(i).norm_squared();
    if n_pts == 1 {
        return sq(0);
    }
    let i0 = ((n_pts - 1) as f64 * burn_in_fraction).round() as usize;
    let i0 = i0.min(n_pts - 2);
    let dt = traj.dt();
    let mut acc = 0.0;
    for i in i0..n_pts - 1 {
        acc += 0.5 * (sq(i) + sq(i + 1)) * dt;
    }
    acc / (traj.t[n_pts - 1] - traj.t[i0])
}

/// One measured point of the variation experiment.
#[derive(Clone, Copy, Debug)]
pub struct VariationEntry {
    pub epsilon: f64,
    /// Estimated power of the perturbed run minus the constant-dose
    /// baseline.
    pub delta_power: f64,
}

/// Ratio `delta(eps) / delta(eps/2)` for a pair present in the scan; a
/// value near 4 is the signature of second-order (quadratic) scaling.
#[derive(Clone, Copy, Debug)]
pub struct VariationRatio {
    pub epsilon: f64,
    pub epsilon_half: f64,
    pub ratio: f64,
}

/// Report of [`variation_scaling_experiment`].
#[derive(Clone, Debug)]
pub struct VariationScaling {
    /// Estimated power of the constant-dose baseline run.
    pub baseline_power: f64,
    /// One entry per requested epsilon, in the given order.
    pub entries: Vec<VariationEntry>,
    /// Ratios for every `(eps, eps/2)` pair found in the scan.
    pub ratios: Vec<VariationRatio>,
}

/// Measures how the output power degrades when a zero-mean variation is
/// added to an optimal constant dose: for each `eps`, integrates the loop
/// under `u(t) = u_star + eps * variation(t)` against the worst-case
/// constant disturbance and reports the power increase over the constant
/// baseline. First-order terms vanish at a constant-dose optimum, so the
/// increases should scale as `eps^2` — i.e. ratios near 4 across each
/// `(eps, eps/2)` pair.
///
/// Both runs start at the constant-dose steady state and use the same tail
/// window, which is snapped to a whole number of periods of the slowest
/// sinusoid so that first-order boundary leakage cancels instead of
/// polluting the `eps^2` signal.
pub fn variation_scaling_experiment(
    sys: &BilinearPositiveSystem,
    u_star: &ControlInput,
    variation: &SignalSpec,
    epsilons: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<VariationScaling> {
    sys.check_input_dim(u_star.vector())?;
    if let Some(d) = variation.dim() {
        if d != sys.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "variation signal has {d} channels, system has {}",
                sys.input_dim()
            )));
        }
    }
    if !variation.is_zero_mean() {
        return Err(Error::InvalidOptions(
            "the dose variation must be zero-mean (zero signal or zero-mean sinusoid sum)".into(),
        ));
    }
    let a_cl = sys.closed_loop_raw(u_star.vector());
    let cert = crate::system::hurwitz_certificate(&a_cl);
    if !cert.is_stable() {
        return Err(Error::UnstableClosedLoop {
            spectral_abscissa: cert.spectral_abscissa,
        });
    }
    let d_bar = worst_case_disturbance(sys, u_star)?;
    // Constant-dose steady state; starting there removes the initial
    // transient from every run.
    let x_bar = a_cl
        .clone()
        .lu()
        .solve(&(-(sys.b() * &d_bar)))
        .ok_or_else(|| Error::Numerical("steady-state solve failed".into()))?;

    // Snap the averaging window to whole periods of the slowest sinusoid:
    // a fractional period would leave a first-order boundary term in the
    // power estimate.
    let mut burn = 0.5;
    if let Some(period) = variation.slowest_period() {
        let tail = (1.0 - burn) * horizon;
        let whole = (tail / period).floor();
        if whole >= 1.0 {
            burn = 1.0 - whole * period / horizon;
        }
    }
    let burn = burn.clamp(0.0, 0.9);

    let d_const = SignalSpec::Constant(d_bar);
    let baseline_sig = SignalSpec::Constant(u_star.vector().clone());
    let baseline_traj = integrate(sys, &baseline_sig, &d_const, &x_bar, horizon, dt)?;
    let baseline_power = power_seminorm_estimate(&baseline_traj, burn);

    let mut entries = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let u_sig = variation.scaled_about(u_star.vector(), eps);
        let traj = integrate(sys, &u_sig, &d_const, &x_bar, horizon, dt)?;
        let power = power_seminorm_estimate(&traj, burn);
        entries.push(VariationEntry {
            epsilon: eps,
            delta_power: power - baseline_power,
        });
    }
    let mut ratios = Vec::new();
    for coarse in &entries {
        for fine in &entries {
            if fine.epsilon > 0.0
                && (coarse.epsilon - 2.0 * fine.epsilon).abs() <= 1e-12 * coarse.epsilon.abs()
            {
                ratios.push(VariationRatio {
                    epsilon: coarse.epsilon,
                    epsilon_half: fine.epsilon,
                    ratio: coarse.delta_power / fine.delta_power,
                });
            }
        }
    }
    Ok(VariationScaling {
        baseline_power,
        entries,
        ratios,
    })
}

/// Impulse-response data: the loop is released from `x0 = B * 1` (a unit
/// kick through every disturbance channel) with zero disturbance and a
/// constant dose. A diverging response is kept up to the blow-up time
/// rather than reported as an error — unstable responses are exactly what
/// the comparison plots need to show.
#[derive(Clone, Debug)]
pub struct ImpulseResponse {
    /// Time grid (possibly truncated at blow-up).
    pub t: Vec<f64>,
    /// State samples, one row per time point.
    pub states: DMatrix<f64>,
    /// `||x||_1` per time point.
    pub norm1: Vec<f64>,
    /// First time the blow-up guard fired, when the response diverged.
    pub blowup: Option<f64>,
    /// Spectral abscissa of the closed loop at the applied dose.
    pub spectral_abscissa: f64,
}

impl ImpulseResponse {
    /// Stability verdict from the spectrum.
    pub fn stable_by_abscissa(&self) -> bool {
        self.spectral_abscissa < -crate::system::TOL_STAB
    }

    /// Growth verdict from the data: the response is growing when it blew
    /// up or when `||x||_1` at the end exceeds its mid-horizon value.
    pub fn norm_growing(&self) -> bool {
        if self.blowup.is_some() {
            return true;
        }
        match self.norm1.len() {
            0 | 1 => false,
            len => self.norm1[len - 1] > self.norm1[len / 2],
        }
    }

    /// Writes the response as CSV with header `t,x1,...,xn,norm1`, every
    /// number in decimal notation with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states.ncols();
        write!(w, "t")?;
        for j in 0..n {
            write!(w, ",x{}", j + 1)?;
        }
        writeln!(w, ",norm1")?;
        for (i, &t) in self.t.iter().enumerate() {
            write!(w, "{}", format_significant(t))?;
            for j in 0..n {
                write!(w, ",{}", format_significant(self.states[(i, j)]))?;
            }
            writeln!(w, ",{}", format_significant(self.norm1[i]))?;
        }
        Ok(())
    }
}

/// Integrates the impulse response (see [`ImpulseResponse`]) at a constant
/// dose over `[0, horizon]`.
pub fn impulse_response(
    sys: &BilinearPositiveSystem,
    u: &ControlInput,
    horizon: f64,
    dt: f64,
) -> Result<ImpulseResponse> {
    sys.check_input_dim(u.vector())?;
    let x0 = sys.b() * DVector::from_element(sys.disturbance_dim(), 1.0);
    let abscissa = spectral_abscissa(&sys.closed_loop_raw(u.vector()));
    let u_sig = SignalSpec::Constant(u.vector().clone());
    let (traj, blowup) = rk4_run(sys, &u_sig, &SignalSpec::Zero, &x0, horizon, dt)?;
    let norm1 = (0..traj.len())
        .map(|i| traj.states.row(i).iter().map(|x| x.abs()).sum())
        .collect();
    Ok(ImpulseResponse {
        t: traj.t,
        states: traj.states,
        norm1,
        blowup,
        spectral_abscissa: abscissa,
    })
}

/// Default simulation horizon for a closed loop with the given spectral
/// abscissa: 40 time constants, clamped to `[10, 200]` so that unstable
/// and marginal loops still get a finite, useful window.
pub fn default_horizon(abscissa: f64) -> f64 {
    (40.0 / abscissa.abs().max(0.1)).clamp(10.0, 200.0)
}

/// Default integration step for the given spectral abscissa:
/// `min(1e-2, 0.05 / |abscissa|)`.
pub fn default_dt(abscissa: f64) -> f64 {
    let scale = abscissa.abs();
    if scale > 0.0 {
        (0.05 / scale).min(1e-2)
    } else {
        1e-2
    }
}

/// Decimal (never scientific) rendering with 12 significant digits;
/// trailing fractional zeros are kept so columns align.
fn format_significant(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

//! The generalized differentiation-integration observer as a steppable
//! state machine.
//!
//! The observer is the singularly perturbed chain
//!
//! ```text
//! x1' = x2, ..., x(n-1)' = xn
//! eps^(n+1-c(p)) xn' = -sum_{i != p} k_i eps^(i-c(p)) x_i - k_p (x_p - a(t))
//! ```
//!
//! fed by a measured signal `a(t)`. State `x_p` tracks the signal, lower
//! indices track its running integrals, higher indices its derivatives.
//! Smaller `eps` widens the estimation bandwidth at the cost of less noise
//! rejection.

use thiserror::Error;

use crate::poly::{self, ObserverGainSet, PolyError};
use crate::record::RunRecord;
use crate::scalar::Float;

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("degenerate perturbation: eps(t) = {0} must be positive")]
    DegeneratePerturbation(f64),
    #[error("divergence at t = {t}: state is not finite (dt too large or unstable gains)")]
    Divergence { t: f64 },
    #[error("gain constraint violated: {0}")]
    GainConstraint(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Perturbation-parameter schedule, mapping time into (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSchedule<T> {
    Constant(T),
    /// 1/eps = min(rate * t, max_inv), with eps clamped to at most 1 while
    /// the ramp is still below one. Ramping eps down from 1 suppresses the
    /// peaking that a small constant eps would cause under large initial
    /// estimation error.
    InverseRamp { rate: T, max_inv: T },
}

impl<T: Float> EpsSchedule<T> {
    pub fn eval(&self, t: T) -> T {
        match *self {
            EpsSchedule::Constant(e) => e,
            EpsSchedule::InverseRamp { rate, max_inv } => {
                let inv = (rate * t).min(max_inv);
                if inv <= T::one() {
                    T::one()
                } else {
                    inv.recip()
                }
            }
        }
    }

    /// Supremum over t >= 0; the gain constraints are checked here because
    /// larger eps is always the more restrictive case.
    pub fn sup(&self) -> T {
        match *self {
            EpsSchedule::Constant(e) => e,
            EpsSchedule::InverseRamp { .. } => T::one(),
        }
    }

    /// Infimum over t >= 0 (the terminal bandwidth).
    pub fn inf(&self) -> T {
        match *self {
            EpsSchedule::Constant(e) => e,
            EpsSchedule::InverseRamp { max_inv, .. } => max_inv.recip().min(T::one()),
        }
    }

    fn validate(&self) -> Result<(), ObserverError> {
        match *self {
            EpsSchedule::Constant(e) => {
                if e > T::zero() && e < T::one() {
                    Ok(())
                } else {
                    Err(ObserverError::GainConstraint(
                        "constant eps must lie in (0, 1)".into(),
                    ))
                }
            }
            EpsSchedule::InverseRamp { rate, max_inv } => {
                if rate > T::zero() && max_inv >= T::one() {
                    Ok(())
                } else {
                    Err(ObserverError::GainConstraint(
                        "ramp needs rate > 0 and max_inv >= 1".into(),
                    ))
                }
            }
        }
    }
}

/// Immutable observer parameterization: gains plus an eps schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSpec<T> {
    gains: ObserverGainSet<T>,
    eps_schedule: EpsSchedule<T>,
}

impl<T: Float> ObserverSpec<T> {
    /// Validates the gain constraints at the schedule supremum (clamped just
    /// under 1 so the check stays inside the open interval the gain set
    /// requires).
    pub fn new(gains: ObserverGainSet<T>, eps_schedule: EpsSchedule<T>) -> Result<Self, ObserverError> {
        eps_schedule.validate()?;
        let sup = eps_schedule.sup().min(T::one() - T::default_epsilon());
        let probe = gains.with_eps(sup)?;
        if !poly::lemma1_check(&probe)? {
            return Err(ObserverError::GainConstraint(poly::lemma1_condition(&probe)));
        }
        Ok(Self { gains, eps_schedule })
    }

    pub fn order(&self) -> usize {
        self.gains.order()
    }

    pub fn sensor_index(&self) -> usize {
        self.gains.sensor_index()
    }

    pub fn gains(&self) -> &ObserverGainSet<T> {
        &self.gains
    }

    pub fn eps_schedule(&self) -> &EpsSchedule<T> {
        &self.eps_schedule
    }

    pub fn zero_state(&self) -> ObserverState<T> {
        ObserverState {
            x: vec![T::zero(); self.order()],
            t: T::zero(),
        }
    }

    pub fn state_from(&self, x: &[T], t: T) -> ObserverState<T> {
        assert_eq!(x.len(), self.order(), "state dimension must equal n");
        ObserverState { x: x.to_vec(), t }
    }

    /// RK4 step-size guidance 0.5 * eps_min / |lambda_max|, where lambda are
    /// the roots of the equivalent characteristic polynomial at the
    /// schedule's terminal eps. Steps above this risk divergence.
    pub fn max_stable_dt(&self) -> Result<T, ObserverError> {
        let eps_min = self.eps_schedule.inf().min(T::one() - T::default_epsilon());
        let g = self.gains.with_eps(eps_min)?;
        let lambda_max = poly::roots(&poly::characteristic_poly(&g))?
            .iter()
            .map(|r| r.norm_sqr().sqrt())
            .fold(T::zero(), |a, b| a.max(b));
        Ok(T::of(0.5) * eps_min / lambda_max)
    }
}

/// Observer state: the n-vector x at time t. Component i carries the units
/// of a(t) times s^(p-i).
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState<T> {
    pub x: Vec<T>,
    pub t: T,
}

/// Right-hand side of the observer at the scheduled eps(t).
pub fn derivative<T: Float>(
    spec: &ObserverSpec<T>,
    state: &ObserverState<T>,
    a: T,
) -> Result<Vec<T>, ObserverError> {
    let eps = spec.eps_schedule.eval(state.t);
    let mut dx = vec![T::zero(); spec.order()];
    derivative_into(spec.gains(), eps, &state.x, a, &mut dx)?;
    Ok(dx)
}

fn derivative_into<T: Float>(
    g: &ObserverGainSet<T>,
    eps: T,
    x: &[T],
    a: T,
    dx: &mut [T],
) -> Result<(), ObserverError> {
    if !(eps > T::zero()) {
        return Err(ObserverError::DegeneratePerturbation(
            eps.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let n = g.order();
    let p = g.sensor_index();
    let c = poly::sensor_indicator(p);
    for i in 0..n - 1 {
        dx[i] = x[i + 1];
    }
    let mut acc = T::zero();
    for i in 1..=n {
        if i == p {
            continue;
        }
        acc -= g.gain(i) * eps.powi(i as i32 - c) * x[i - 1];
    }
    acc -= g.gain(p) * (x[p - 1] - a);
    dx[n - 1] = acc / eps.powi(n as i32 + 1 - c);
    Ok(())
}

struct Rk4Scratch<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Float> Rk4Scratch<T> {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![T::zero(); n],
            k2: vec![T::zero(); n],
            k3: vec![T::zero(); n],
            k4: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        }
    }
}

/// One classical fixed-step RK4 macro-step. eps(t) is evaluated once at the
/// step start and held through the four stages so the stage arithmetic
/// stays consistent; the input is sampled at the stage times.
fn rk4_step<T: Float, F: Fn(T) -> T>(
    spec: &ObserverSpec<T>,
    state: &mut ObserverState<T>,
    sampler: &F,
    dt: T,
    s: &mut Rk4Scratch<T>,
) -> Result<(), ObserverError> {
    let g = spec.gains();
    let eps = spec.eps_schedule.eval(state.t);
    let half = T::of(0.5);
    let t0 = state.t;
    let tm = t0 + half * dt;
    let t1 = t0 + dt;
    let a0 = sampler(t0);
    let am = sampler(tm);
    let a1 = sampler(t1);

    derivative_into(g, eps, &state.x, a0, &mut s.k1)?;
    for i in 0..state.x.len() {
        s.tmp[i] = state.x[i] + half * dt * s.k1[i];
    }
    derivative_into(g, eps, &s.tmp, am, &mut s.k2)?;
    for i in 0..state.x.len() {
        s.tmp[i] = state.x[i] + half * dt * s.k2[i];
    }
    derivative_into(g, eps, &s.tmp, am, &mut s.k3)?;
    for i in 0..state.x.len() {
        s.tmp[i] = state.x[i] + dt * s.k3[i];
    }
    derivative_into(g, eps, &s.tmp, a1, &mut s.k4)?;

    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let mut finite = true;
    for i in 0..state.x.len() {
        state.x[i] += dt * sixth * (s.k1[i] + two * s.k2[i] + two * s.k3[i] + s.k4[i]);
        finite &= state.x[i].is_finite();
    }
    state.t = t1;
    if !finite {
        return Err(ObserverError::Divergence {
            t: state.t.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Advances the observer by one RK4 step of size dt, sampling the input at
/// the stage times. Deterministic given the sampler.
pub fn step<T: Float, F: Fn(T) -> T>(
    spec: &ObserverSpec<T>,
    state: &ObserverState<T>,
    sampler: F,
    dt: T,
) -> Result<ObserverState<T>, ObserverError> {
    let mut next = state.clone();
    let mut scratch = Rk4Scratch::new(spec.order());
    rk4_step(spec, &mut next, &sampler, dt, &mut scratch)?;
    Ok(next)
}

/// An observer plus its state and reusable integration scratch, for long
/// runs and co-simulation loops.
#[derive(Debug)]
pub struct ObserverRunner<T> {
    spec: ObserverSpec<T>,
    state: ObserverState<T>,
    scratch: Rk4Scratch<T>,
}

impl<T> std::fmt::Debug for Rk4Scratch<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Rk4Scratch")
    }
}

impl<T: Float> ObserverRunner<T> {
    pub fn new(spec: ObserverSpec<T>, x0: &[T]) -> Self {
        let state = spec.state_from(x0, T::zero());
        let scratch = Rk4Scratch::new(spec.order());
        Self {
            spec,
            state,
            scratch,
        }
    }

    pub fn spec(&self) -> &ObserverSpec<T> {
        &self.spec
    }

    pub fn state(&self) -> &ObserverState<T> {
        &self.state
    }

    pub fn step_with<F: Fn(T) -> T>(&mut self, sampler: F, dt: T) -> Result<(), ObserverError> {
        rk4_step(&self.spec, &mut self.state, &sampler, dt, &mut self.scratch)
    }

    /// Steps with the input held constant across the macro-step, the usual
    /// case when the input is a sampled sensor.
    pub fn step_held(&mut self, a: T, dt: T) -> Result<(), ObserverError> {
        self.step_with(|_| a, dt)
    }
}

/// Runs the observer for `duration` at fixed step `dt`, recording the state
/// and the input sample every `record_every` steps (plus the final step).
/// Columns: `a`, `x1`..`xn`.
pub fn run<T: Float, F: Fn(T) -> T>(
    spec: &ObserverSpec<T>,
    sampler: F,
    x0: &[T],
    duration: T,
    dt: T,
    record_every: usize,
) -> Result<RunRecord<T>, ObserverError> {
    assert!(dt > T::zero(), "dt must be positive");
    assert!(record_every > 0, "record_every must be positive");
    if let Ok(bound) = spec.max_stable_dt() {
        if dt > bound {
            log::warn!(
                "observer dt = {dt} exceeds the stability guidance {bound}; expect divergence"
            );
        }
    }

    let steps = (duration / dt)
        .round()
        .to_usize()
        .expect("step count fits in usize");
    let n = spec.order();
    let mut columns = vec!["a".to_string()];
    columns.extend((1..=n).map(|i| format!("x{i}")));
    let mut record = RunRecord::new(columns);

    let mut runner = ObserverRunner::new(spec.clone(), x0);
    let push = |state: &ObserverState<T>, record: &mut RunRecord<T>| {
        let mut row = Vec::with_capacity(n + 1);
        row.push(sampler(state.t));
        row.extend_from_slice(&state.x);
        record.push_row(state.t, row)
    };
    push(runner.state(), &mut record).expect("initial row");

    for k in 1..=steps {
        // exact step times keep long runs free of accumulated drift
        let t_next = dt * T::from_usize(k).expect("k fits in scalar");
        let dt_k = t_next - runner.state.t;
        runner.step_with(&sampler, dt_k)?;
        runner.state.t = t_next;
        if k % record_every == 0 || k == steps {
            push(runner.state(), &mut record).expect("monotone time");
        }
    }
    Ok(record)
}

/// High-order differentiator preset: (n, p) = (n, 1).
pub fn preset_differentiator<T: Float>(
    n: usize,
    k: Vec<T>,
    eps: T,
) -> Result<ObserverSpec<T>, ObserverError> {
    ObserverSpec::new(
        ObserverGainSet::new(n, 1, k, eps)?,
        EpsSchedule::Constant(eps),
    )
}

/// Differentiator preset with a ramped perturbation schedule.
pub fn preset_differentiator_ramp<T: Float>(
    n: usize,
    k: Vec<T>,
    rate: T,
    max_inv: T,
) -> Result<ObserverSpec<T>, ObserverError> {
    // the gain-set eps is a placeholder; dynamics always use the schedule
    let eps0 = max_inv.recip().min(T::of(0.99));
    ObserverSpec::new(
        ObserverGainSet::new(n, 1, k, eps0)?,
        EpsSchedule::InverseRamp { rate, max_inv },
    )
}

/// Onefold integrator preset: (n, p) = (2, 2).
pub fn preset_onefold<T: Float>(k1: T, k2: T, eps: T) -> Result<ObserverSpec<T>, ObserverError> {
    ObserverSpec::new(
        ObserverGainSet::new(2, 2, vec![k1, k2], eps)?,
        EpsSchedule::Constant(eps),
    )
}

/// Differentiation-integration preset: (n, p) = (3, 2).
pub fn preset_diffint<T: Float>(
    k1: T,
    k2: T,
    k3: T,
    eps: T,
) -> Result<ObserverSpec<T>, ObserverError> {
    ObserverSpec::new(
        ObserverGainSet::new(3, 2, vec![k1, k2, k3], eps)?,
        EpsSchedule::Constant(eps),
    )
}

/// Double integrator preset: (n, p) = (3, 3).
pub fn preset_double<T: Float>(
    k1: T,
    k2: T,
    k3: T,
    eps: T,
) -> Result<ObserverSpec<T>, ObserverError> {
    ObserverSpec::new(
        ObserverGainSet::new(3, 3, vec![k1, k2, k3], eps)?,
        EpsSchedule::Constant(eps),
    )
}

/// Differentiation and double-integration preset: (n, p) = (4, 3).
pub fn preset_diff_double<T: Float>(
    k1: T,
    k2: T,
    k3: T,
    k4: T,
    eps: T,
) -> Result<ObserverSpec<T>, ObserverError> {
    ObserverSpec::new(
        ObserverGainSet::new(4, 3, vec![k1, k2, k3, k4], eps)?,
        EpsSchedule::Constant(eps),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diffint_31() -> ObserverSpec<f64> {
        preset_diffint(0.1, 3.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn equilibrium_of_onefold_tracking_state() {
        let spec = preset_onefold(2.0, 2.7783, 0.1667).unwrap();
        let a = 0.8;
        let state = spec.state_from(&[0.0, a], 0.0);
        let dx = derivative(&spec, &state, a).unwrap();
        assert_relative_eq!(dx[0], a);
        assert_relative_eq!(dx[1], 0.0);
    }

    #[test]
    fn preset_forms_match_the_general_evaluator() {
        // Each explicit preset equation, written out verbatim, against the
        // generalized evaluator. Differences must be at floating-point
        // round-off level.
        let x3: [f64; 3] = [0.7, -0.3, 1.9];
        let x4: [f64; 4] = [0.7, -0.3, 1.9, 0.2];
        let a: f64 = 0.45;

        // differentiator, n = 3, p = 1:
        // eps^3 x3' = -k1 (x1 - a) - k2 eps x2 - k3 eps^2 x3
        let (k1, k2, k3, e): (f64, f64, f64, f64) = (6.0, 11.0, 6.0, 0.2);
        let spec = preset_differentiator(3, vec![k1, k2, k3], e).unwrap();
        let dx = derivative(&spec, &spec.state_from(&x3, 0.0), a).unwrap();
        let explicit = (-k1 * (x3[0] - a) - k2 * e * x3[1] - k3 * e * e * x3[2]) / e.powi(3);
        assert_eq!(dx[0], x3[1]);
        assert_eq!(dx[1], x3[2]);
        assert!((dx[2] - explicit).abs() < 1e-15 * explicit.abs().max(1.0));

        // onefold integrator, n = 2, p = 2:
        // eps^3 x2' = -k1 eps x1 - k2 (x2 - a)
        let (k1, k2, e): (f64, f64, f64) = (2.0, 2.7783, 0.1667);
        let spec = preset_onefold(k1, k2, e).unwrap();
        let dx = derivative(&spec, &spec.state_from(&x3[..2], 0.0), a).unwrap();
        let explicit = (-k1 * e * x3[0] - k2 * (x3[1] - a)) / e.powi(3);
        assert!((dx[1] - explicit).abs() < 1e-15 * explicit.abs().max(1.0));

        // differentiation-integration, n = 3, p = 2:
        // eps^4 x3' = -k1 eps x1 - k2 (x2 - a) - k3 eps^3 x3
        let (k1, k2, k3, e): (f64, f64, f64, f64) = (0.1, 3.0, 2.0, 0.1);
        let spec = preset_diffint(k1, k2, k3, e).unwrap();
        let dx = derivative(&spec, &spec.state_from(&x3, 0.0), a).unwrap();
        let explicit = (-k1 * e * x3[0] - k2 * (x3[1] - a) - k3 * e.powi(3) * x3[2]) / e.powi(4);
        assert!((dx[2] - explicit).abs() < 1e-15 * explicit.abs().max(1.0));

        // double integrator, n = 3, p = 3:
        // eps^4 x3' = -k1 eps x1 - k2 eps^2 x2 - k3 (x3 - a)
        let (k1, k2, k3, e): (f64, f64, f64, f64) = (0.5, 2.5, 3.0, 0.4);
        let spec = preset_double(k1, k2, k3, e).unwrap();
        let dx = derivative(&spec, &spec.state_from(&x3, 0.0), a).unwrap();
        let explicit = (-k1 * e * x3[0] - k2 * e * e * x3[1] - k3 * (x3[2] - a)) / e.powi(4);
        assert!((dx[2] - explicit).abs() < 1e-15 * explicit.abs().max(1.0));

        // differentiation + double integration, n = 4, p = 3; the k2 term
        // couples to x2 as the general chain requires:
        // eps^5 x4' = -k1 eps x1 - k2 eps^2 x2 - k3 (x3 - a) - k4 eps^4 x4
        let (k1, k2, k3, k4, e): (f64, f64, f64, f64, f64) = (0.01, 0.1, 3.0, 2.0, 0.1);
        let spec = preset_diff_double(k1, k2, k3, k4, e).unwrap();
        let dx = derivative(&spec, &spec.state_from(&x4, 0.0), a).unwrap();
        let explicit = (-k1 * e * x4[0] - k2 * e * e * x4[1] - k3 * (x4[2] - a)
            - k4 * e.powi(4) * x4[3])
            / e.powi(5);
        assert!((dx[3] - explicit).abs() < 1e-15 * explicit.abs().max(1.0));
    }

    #[test]
    fn preset_rejects_gain_constraint_violation() {
        let err = preset_diffint(1.0, 0.001, 1.0, 0.5).unwrap_err();
        match err {
            ObserverError::GainConstraint(msg) => assert!(msg.contains("k2")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_signal_zero_state_stays_zero() {
        let spec = diffint_31();
        let mut state = spec.zero_state();
        for _ in 0..100 {
            state = step(&spec, &state, |_| 0.0, 1e-3).unwrap();
        }
        assert!(state.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_schedule_clamps_and_descends() {
        let s = EpsSchedule::InverseRamp {
            rate: 5.0,
            max_inv: 5.0,
        };
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval(0.1), 1.0); // 1/eps = 0.5 < 1 clamps to eps = 1
        assert_relative_eq!(s.eval(0.5), 1.0 / 2.5);
        assert_relative_eq!(s.eval(2.0), 0.2);
        assert_relative_eq!(s.inf(), 0.2);
        assert_eq!(s.sup(), 1.0);
    }

    /// Steady-state tracking error of the onefold integrator on a pure
    /// cosine. The frequency response fixes the exact steady-state error
    /// amplitude; at these gains it is |H1(i) + i| = 0.1176 for x1 and
    /// |H2(i) - 1| = 0.1176 for x2. The slowest mode decays with a 8.3 s
    /// time constant, so errors are measured well past it.
    #[test]
    fn onefold_integrator_tracks_cosine_at_tf_accuracy() {
        let spec = preset_onefold(2.0, 2.7783, 0.1667).unwrap();
        let rec = run(&spec, |t: f64| t.cos(), &[0.5, 2.0], 100.0, 1e-3, 10).unwrap();
        let times = rec.times().to_vec();
        let x1 = rec.column("x1").unwrap();
        let x2 = rec.column("x2").unwrap();
        let mut max_e1: f64 = 0.0;
        let mut max_e2: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if t < 60.0 {
                continue;
            }
            max_e1 = max_e1.max((x1[i] - t.sin()).abs());
            max_e2 = max_e2.max((x2[i] - t.cos()).abs());
        }
        // frozen from the transfer-function oracle (see freq tests)
        assert!((max_e1 - 0.1176).abs() < 0.005, "max_e1 = {max_e1}");
        assert!((max_e2 - 0.1176).abs() < 0.005, "max_e2 = {max_e2}");
    }

    /// Same check for the double integrator on a = -sin t; the oracle error
    /// amplitude at omega = 1 is |H1(i) + 1| = 0.1503 for all three states
    /// up to the operator scaling. The slow complex pair sits at
    /// -0.0665 +/- 0.25i, and the initial x2 offset of -2.1 projects about
    /// 8 units into the slow x1 direction, so the transient needs ~100 s to
    /// clear.
    #[test]
    fn double_integrator_tracks_at_tf_accuracy() {
        let spec = preset_double(0.5, 2.5, 3.0, 0.4).unwrap();
        let rec = run(
            &spec,
            |t: f64| -t.sin(),
            &[0.1, -1.1, 0.1],
            160.0,
            1e-3,
            10,
        )
        .unwrap();
        let times = rec.times().to_vec();
        let x1 = rec.column("x1").unwrap();
        let x2 = rec.column("x2").unwrap();
        let x3 = rec.column("x3").unwrap();
        let mut max_e1: f64 = 0.0;
        let mut max_e2: f64 = 0.0;
        let mut max_e3: f64 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if t < 120.0 {
                continue;
            }
            max_e1 = max_e1.max((x1[i] - t.sin()).abs());
            max_e2 = max_e2.max((x2[i] - t.cos()).abs());
            max_e3 = max_e3.max((x3[i] + t.sin()).abs());
        }
        assert!((max_e1 - 0.1503).abs() < 0.008, "max_e1 = {max_e1}");
        assert!((max_e2 - 0.1503).abs() < 0.008, "max_e2 = {max_e2}");
        assert!((max_e3 - 0.1503).abs() < 0.008, "max_e3 = {max_e3}");
    }

    /// x3 of the differentiation-integration observer estimates the first
    /// derivative: for a = cos t it tracks -sin t.
    #[test]
    fn diffint_third_state_estimates_derivative() {
        let spec = diffint_31();
        let rec = run(&spec, |t: f64| t.cos(), &[0.0, 0.0, 0.0], 60.0, 1e-3, 10).unwrap();
        let times = rec.times().to_vec();
        let x3 = rec.column("x3").unwrap();
        for (i, &t) in times.iter().enumerate() {
            if t < 20.0 {
                continue;
            }
            assert!(
                (x3[i] + t.sin()).abs() < 0.1,
                "t = {t}, x3 = {}, want {}",
                x3[i],
                -t.sin()
            );
        }
    }

    #[test]
    fn run_sample_counts() {
        let spec = preset_onefold(2.0, 2.7783, 0.1667).unwrap();
        let rec = run(&spec, |_| 0.0, &[0.0, 0.0], 0.0, 1e-3, 10).unwrap();
        assert_eq!(rec.len(), 1);

        let rec = run(&spec, |t: f64| t.cos(), &[0.0, 0.0], 100.0, 1e-3, 10).unwrap();
        assert_eq!(rec.len(), 10_001);
    }

    #[test]
    fn integral_chain_consistency() {
        // central differences of the recorded x1 series reproduce x2
        let spec = diffint_31();
        let rec = run(&spec, |t: f64| t.cos(), &[0.0, 0.0, 0.0], 5.0, 1e-3, 1).unwrap();
        let x1 = rec.column("x1").unwrap();
        let x2 = rec.column("x2").unwrap();
        let dt = 1e-3;
        for i in 1..x1.len() - 1 {
            if rec.times()[i] < 1.0 {
                continue; // transient
            }
            let central = (x1[i + 1] - x1[i - 1]) / (2.0 * dt);
            assert!(
                (central - x2[i]).abs() < 1e-5,
                "central difference {central} vs x2 {}",
                x2[i]
            );
        }
    }

    /// Steady-state x2 error amplitudes for eps in {0.4, 0.2, 0.1}, frozen
    /// from the transfer-function oracle |H2(i) - 1|. The sequence is not
    /// monotone: the deviation has a minimum near eps = sqrt(k1/k3) where
    /// the real part of the denominator mismatch changes sign, and Eq-15
    /// style monotone convergence only sets in below that point, which the
    /// {0.1, 0.05, 0.025} assertions cover.
    #[test]
    fn x2_error_in_eps_matches_oracle_and_descends_for_small_eps() {
        let expect = |eps: f64| {
            // |H2(i) - 1| for gains (0.1, 3, 2)
            let (k1, k2, k3) = (0.1, 3.0, 2.0);
            let r = eps * k1 - eps.powi(3) * k3;
            let den = nalgebra::Complex::new(r, k2 - eps.powi(4));
            (nalgebra::Complex::new(0.0, k2) / den - nalgebra::Complex::new(1.0, 0.0)).norm()
        };
        let measure = |eps: f64| {
            let spec = preset_diffint(0.1, 3.0, 2.0, eps).unwrap();
            let rec = run(&spec, |t: f64| t.cos(), &[0.0, 0.0, 0.0], 80.0, 1e-3, 10).unwrap();
            let x2 = rec.column("x2").unwrap();
            let mut max_e: f64 = 0.0;
            for (i, &t) in rec.times().iter().enumerate() {
                if t >= 40.0 {
                    max_e = max_e.max((x2[i] - t.cos()).abs());
                }
            }
            max_e
        };
        for eps in [0.4, 0.2, 0.1] {
            let m = measure(eps);
            let e = expect(eps);
            assert!(
                (m - e).abs() < 0.15 * e + 2e-4,
                "eps = {eps}: measured {m}, oracle {e}"
            );
        }
        // strict decrease once below the sweet spot
        assert!(expect(0.1) > expect(0.05));
        assert!(expect(0.05) > expect(0.025));
        assert!(measure(0.1) > measure(0.05));
    }

    #[test]
    fn linearity_in_state_and_input() {
        let spec = diffint_31();
        let x = [0.37, -1.2, 0.05];
        let a = 0.91;
        let dx = derivative(&spec, &spec.state_from(&x, 0.0), a).unwrap();

        // power-of-two scaling is exact in floating point
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let dx2 = derivative(&spec, &spec.state_from(&x2, 0.0), 2.0 * a).unwrap();
        for i in 0..3 {
            assert_eq!(dx2[i], 2.0 * dx[i]);
        }

        // general scaling within round-off
        let alpha = 1.7;
        let xa: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let dxa = derivative(&spec, &spec.state_from(&xa, 0.0), alpha * a).unwrap();
        for i in 0..3 {
            assert_relative_eq!(dxa[i], alpha * dx[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn divergence_reports_error() {
        // dt far above the stability bound
        let spec = preset_diffint(0.1, 3.0, 2.0, 0.05).unwrap();
        let bound = spec.max_stable_dt().unwrap();
        let mut state = spec.state_from(&[1.0, 1.0, 1.0], 0.0);
        let mut diverged = false;
        for _ in 0..2000 {
            match step(&spec, &state, |_| 1.0, bound * 50.0) {
                Ok(s) => state = s,
                Err(ObserverError::Divergence { .. }) => {
                    diverged = true;
                    break;
                }
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(diverged);
    }

    #[test]
    fn long_run_stays_bounded() {
        // Lemma-1-valid gains, bounded input: state norm bounded over 500 s.
        // The first few seconds are excluded: the fast modes peak in x3
        // before decaying (amplitude ~90 here), which is the transient the
        // quadrotor scenarios suppress with a ramped eps.
        let spec = diffint_31();
        let rec = run(&spec, |t: f64| t.cos(), &[0.0, 0.0, 0.0], 500.0, 1e-3, 100).unwrap();
        for (i, &t) in rec.times().iter().enumerate() {
            let finite = (0..3).all(|c| rec.value(i, c + 1).is_finite());
            assert!(finite, "non-finite state at t = {t}");
            if t < 5.0 {
                continue;
            }
            for c in ["x1", "x2", "x3"] {
                let idx = rec.column_index(c).unwrap();
                assert!(
                    rec.value(i, idx).abs() < 10.0,
                    "{c} = {} at t = {t}",
                    rec.value(i, idx)
                );
            }
        }
    }
}

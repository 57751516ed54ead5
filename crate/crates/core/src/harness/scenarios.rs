//! Built-in scenario implementations: the integrator/drift experiments, the
//! Bode sweeps, and the quadrotor closed-loop runs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};

use super::config::ConfigReader;
use super::metrics::{linear_trend_slope, max_abs, rms, tail};
use super::svg::{Plot, Series};
use super::HarnessError;
use crate::ekf::{self, KfModel, KfState};
use crate::freq;
use crate::observer::{self, EpsSchedule};
use crate::poly::{self, ObserverGainSet};
use crate::quadrotor::{
    self, ClosedLoopConfig, FeedforwardMode, KfBaselineConfig, QuadState, Sinusoid,
};
use crate::record::RunRecord;
use crate::signals::{BaseSignal, NoiseSpec, PulseTrain, RandomNoise, SignalName, SignalSource};

pub(super) struct ScenarioResult {
    pub record: RunRecord<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub plots: Vec<(String, Plot)>,
    pub extra_csvs: Vec<(String, String)>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum IntegKind {
    Onefold,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum BodeKind {
    DiffInt,
    DiffDouble,
}

fn noise_from(
    reader: &mut ConfigReader,
    prefix: &str,
    seed: u64,
    defaults: NoiseDefaults,
) -> Result<NoiseSpec<f64>, HarnessError> {
    let mean = reader.f64(&format!("{prefix}.random.mean"), 0.0)?;
    let variance = reader.f64(&format!("{prefix}.random.variance"), defaults.variance)?;
    let sample_dt = reader.f64(&format!("{prefix}.random.sample_dt"), defaults.sample_dt)?;
    let amplitude = reader.f64(&format!("{prefix}.pulse.amplitude"), defaults.pulse_amplitude)?;
    let period = reader.f64(&format!("{prefix}.pulse.period"), defaults.pulse_period)?;
    let width_s = reader.f64(&format!("{prefix}.pulse.width_s"), defaults.pulse_width_s)?;
    let width_pct = reader.f64(&format!("{prefix}.pulse.width_pct"), defaults.pulse_width_pct)?;
    let delay = reader.f64(&format!("{prefix}.pulse.phase_delay"), 0.0)?;

    // width is specified either directly in seconds or as a percentage of
    // the period; the seconds key wins when both are set
    let width = if width_s > 0.0 {
        width_s
    } else {
        width_pct / 100.0 * period
    };
    let random = if variance > 0.0 || mean != 0.0 {
        Some(RandomNoise::new(mean, variance, seed, sample_dt).map_err(config_err)?)
    } else {
        None
    };
    let pulse = if amplitude != 0.0 && width > 0.0 {
        Some(PulseTrain::new(amplitude, period, width, delay).map_err(config_err)?)
    } else {
        None
    };
    Ok(NoiseSpec { random, pulse })
}

struct NoiseDefaults {
    variance: f64,
    sample_dt: f64,
    pulse_amplitude: f64,
    pulse_period: f64,
    pulse_width_s: f64,
    pulse_width_pct: f64,
}

fn config_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Config(e.to_string())
}

/// Integrator experiments: an observer estimates the running integrals of a
/// noisy sinusoid while a Kalman chain integrates the same measurement; the
/// long-horizon variants expose the drift difference.
pub(super) fn integ(
    reader: &mut ConfigReader,
    kind: IntegKind,
    default_duration: f64,
) -> Result<ScenarioResult, HarnessError> {
    let seed = reader.u64("seed", 42)?;
    let dt = reader.f64("dt", 1e-3)?;
    let duration = reader.f64("duration", default_duration)?;
    let default_every = if default_duration > 500.0 { 100 } else { 10 };
    let record_every = reader.usize("record_every", default_every)?;

    let (spec, x0, base_name, truth_names) = match kind {
        IntegKind::Onefold => {
            let k1 = reader.f64("observer.k1", 2.0)?;
            let k2 = reader.f64("observer.k2", 2.7783)?;
            let eps = reader.f64("observer.eps", 0.1667)?;
            let x0 = reader.f64_list("observer.x0", &[0.5, 2.0])?;
            let base = reader.string("signal.base", "a02")?;
            (
                observer::preset_onefold(k1, k2, eps)?,
                x0,
                base,
                vec![SignalName::A01, SignalName::A02],
            )
        }
        IntegKind::Double => {
            let k1 = reader.f64("observer.k1", 0.5)?;
            let k2 = reader.f64("observer.k2", 2.5)?;
            let k3 = reader.f64("observer.k3", 3.0)?;
            let eps = reader.f64("observer.eps", 0.4)?;
            let x0 = reader.f64_list("observer.x0", &[0.1, -1.1, 0.1])?;
            let base = reader.string("signal.base", "a03")?;
            (
                observer::preset_double(k1, k2, k3, eps)?,
                x0,
                base,
                vec![SignalName::A01, SignalName::A02, SignalName::A03],
            )
        }
    };
    let n = spec.order();
    if x0.len() != n {
        return Err(HarnessError::Config(format!(
            "observer.x0 must have {n} entries"
        )));
    }
    let base: SignalName = base_name.parse().map_err(config_err)?;

    let noise = noise_from(
        reader,
        "noise",
        seed,
        NoiseDefaults {
            variance: 0.01,
            sample_dt: dt,
            pulse_amplitude: 0.5,
            pulse_period: 2.0,
            pulse_width_s: 1.0,
            pulse_width_pct: 0.0,
        },
    )?;
    let bias = reader.f64("noise.bias", 0.0)?;
    let src = SignalSource::new(BaseSignal::Named(base), noise, bias);

    let obs_rec = observer::run(&spec, |t| src.sample(t), &x0, duration, dt, record_every)?;

    // Kalman chain of the same length, measuring the top state, initialized
    // on the truth so the comparison starts aligned.
    let q = reader.f64("baseline.kf.q", 1e-4)?;
    let r = reader.f64("baseline.kf.r", 0.01)?;
    let model = KfModel::diagonal(n, q, r, n)?;
    let truth_at_zero: Vec<f64> = truth_names
        .iter()
        .map(|&name| eval_truth(name, 0.0))
        .collect();
    let init = KfState::new(
        DVector::from_vec(truth_at_zero),
        DMatrix::identity(n, n),
    );
    let kf_rec = ekf::run_baseline(&model, &src, init, duration, dt, record_every)?;

    // merge observer, truths and baseline into one record
    let mut columns: Vec<String> = vec!["a".into()];
    columns.extend((1..=n).map(|i| format!("x{i}")));
    columns.extend((1..=n).map(|i| format!("truth_x{i}")));
    columns.extend((1..=n).map(|i| format!("kf_m{i}")));
    let mut record = RunRecord::new(columns);
    assert_eq!(obs_rec.times(), kf_rec.times());
    for (i, &t) in obs_rec.times().iter().enumerate() {
        let mut row = Vec::with_capacity(1 + 3 * n);
        row.push(obs_rec.value(i, 0));
        for s in 0..n {
            row.push(obs_rec.value(i, 1 + s));
        }
        for &name in &truth_names {
            row.push(eval_truth(name, t));
        }
        for s in 0..n {
            row.push(kf_rec.value(i, 2 + s));
        }
        record.push_row(t, row).expect("aligned rows");
    }

    // metrics: post-transient RMS and trailing-window drift slopes
    let times = record.times().to_vec();
    let settle = (duration * 0.1).min(10.0);
    let tail_start = duration / 2.0;
    let mut metrics = BTreeMap::new();
    for s in 0..n {
        let est = record.column(&format!("x{}", s + 1)).unwrap();
        let kf_est = record.column(&format!("kf_m{}", s + 1)).unwrap();
        let truth = record.column(&format!("truth_x{}", s + 1)).unwrap();
        let obs_err: Vec<f64> = est.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let kf_err: Vec<f64> = kf_est.iter().zip(&truth).map(|(a, b)| a - b).collect();

        let (ts, vs) = tail(&times, &obs_err, settle);
        metrics.insert(format!("rms_obs_x{}", s + 1), rms(&vs));
        let _ = ts;
        let (ts, vs) = tail(&times, &obs_err, tail_start);
        let obs_slope = linear_trend_slope(&ts, &vs);
        metrics.insert(format!("slope_obs_x{}", s + 1), obs_slope);
        let (ts, vs) = tail(&times, &kf_err, tail_start);
        let kf_slope = linear_trend_slope(&ts, &vs);
        metrics.insert(format!("slope_kf_m{}", s + 1), kf_slope);
        metrics.insert(
            format!("drift_ratio_x{}", s + 1),
            kf_slope.abs() / obs_slope.abs().max(1e-300),
        );
    }

    // integral-estimate comparison plot (estimate, truth, baseline)
    let t = record.times().to_vec();
    let pair = |name: &str| -> Vec<(f64, f64)> {
        record
            .column(name)
            .unwrap()
            .into_iter()
            .zip(&t)
            .map(|(v, &tt)| (tt, v))
            .collect()
    };
    let plot = Plot::new(
        match kind {
            IntegKind::Onefold => "Onefold integral estimate",
            IntegKind::Double => "Double integral estimate",
        },
        "t (s)",
        "value",
    )
    .with(Series::solid("observer x1", pair("x1")))
    .with(Series::dashed("truth", pair("truth_x1")))
    .with(Series::solid("kalman baseline", pair("kf_m1")));
    let tracking = Plot::new("Signal tracking", "t (s)", "value")
        .with(Series::solid("measured a", pair("a")))
        .with(Series::solid(
            &format!("observer x{n}"),
            pair(&format!("x{n}")),
        ))
        .with(Series::dashed("truth", pair(&format!("truth_x{n}"))));

    Ok(ScenarioResult {
        record,
        metrics,
        plots: vec![
            ("integral.svg".into(), plot),
            ("tracking.svg".into(), tracking),
        ],
        extra_csvs: Vec::new(),
        seed,
    })
}

fn eval_truth(name: SignalName, t: f64) -> f64 {
    match name {
        SignalName::A01 => t.sin(),
        SignalName::A02 => t.cos(),
        SignalName::A03 => -t.sin(),
    }
}

/// Bode sweeps of the observer transfer functions against the ideal
/// operators, one curve set per perturbation parameter.
pub(super) fn bode(reader: &mut ConfigReader, kind: BodeKind) -> Result<ScenarioResult, HarnessError> {
    let seed = reader.u64("seed", 42)?;
    let (default_gains, n, p): (&[f64], usize, usize) = match kind {
        BodeKind::DiffInt => (&[0.1, 3.0, 2.0], 3, 2),
        BodeKind::DiffDouble => (&[0.01, 0.1, 3.0, 2.0], 4, 3),
    };
    let gains = reader.f64_list("bode.gains", default_gains)?;
    let eps_list = reader.f64_list("bode.eps", &[0.1, 0.2])?;
    let omega_min = reader.f64("bode.omega_min", 1e-3)?;
    let omega_max = reader.f64("bode.omega_max", 1e3)?;
    let points = reader.usize("bode.points", 400)?;
    if gains.len() != n {
        return Err(HarnessError::Config(format!("bode.gains needs {n} entries")));
    }

    let grid = freq::log_grid(omega_min, omega_max, points);
    let mut columns = Vec::new();
    for &eps in &eps_list {
        for j in 1..=n {
            columns.push(format!("mag_db_j{j}_eps{eps}"));
            columns.push(format!("phase_deg_j{j}_eps{eps}"));
        }
    }
    for j in 1..=n {
        columns.push(format!("ideal_mag_db_j{j}"));
        columns.push(format!("ideal_phase_deg_j{j}"));
    }
    let mut record = RunRecord::with_time_label("omega", columns);

    let mut metrics = BTreeMap::new();
    let mut mag_plot = Plot::new("Frequency response: magnitude", "omega (rad/s)", "dB").log_x();
    let mut phase_plot =
        Plot::new("Frequency response: phase", "omega (rad/s)", "degrees").log_x();
    let mut responses = Vec::new();
    let mut extra_csvs = Vec::new();

    for &eps in &eps_list {
        let g = ObserverGainSet::new(n, p, gains.clone(), eps).map_err(config_err)?;
        if !poly::lemma1_check(&g)? {
            return Err(HarnessError::Config(format!(
                "gain constraint violated at eps = {eps}: {}",
                poly::lemma1_condition(&g)
            )));
        }
        let mut per_eps = Vec::new();
        let mut eps_cols = Vec::new();
        for j in 1..=n {
            let tf = freq::transfer_function(&g, j);
            let resp = freq::response(&tf, &grid)?;
            if let Some(bw) = freq::usable_bandwidth(&g, j, &grid, 0.05) {
                metrics.insert(format!("bandwidth_j{j}_eps{eps}"), bw);
            }
            mag_plot = mag_plot.with(Series::solid(
                &format!("j={j}, eps={eps}"),
                grid.iter().zip(&resp.magnitude_db).map(|(&w, &m)| (w, m)).collect(),
            ));
            phase_plot = phase_plot.with(Series::solid(
                &format!("j={j}, eps={eps}"),
                grid.iter().zip(&resp.phase_deg).map(|(&w, &ph)| (w, ph)).collect(),
            ));
            eps_cols.push(format!("mag_db_j{j}"));
            eps_cols.push(format!("phase_deg_j{j}"));
            per_eps.push(resp);
        }
        // one spec-shaped CSV per eps: omega, mag_db_j1..jn, phase_deg_j1..jn
        let mut eps_record = RunRecord::<f64>::with_time_label("omega", eps_cols);
        for (i, &w) in grid.iter().enumerate() {
            let mut row = Vec::with_capacity(2 * n);
            for resp in &per_eps {
                row.push(resp.magnitude_db[i]);
                row.push(resp.phase_deg[i]);
            }
            eps_record.push_row(w, row).expect("monotone grid");
        }
        extra_csvs.push((format!("bode_eps_{eps}.csv"), eps_record.to_csv()));
        responses.push(per_eps);
    }

    let mut ideal = Vec::new();
    for j in 1..=n {
        let r = j as i32 - p as i32;
        let resp = freq::ideal_response(r, &grid);
        mag_plot = mag_plot.with(Series::dashed(
            &format!("ideal s^{r}"),
            grid.iter().zip(&resp.magnitude_db).map(|(&w, &m)| (w, m)).collect(),
        ));
        phase_plot = phase_plot.with(Series::dashed(
            &format!("ideal s^{r}"),
            grid.iter().zip(&resp.phase_deg).map(|(&w, &ph)| (w, ph)).collect(),
        ));
        ideal.push(resp);
    }

    for (i, &w) in grid.iter().enumerate() {
        let mut row = Vec::new();
        for per_eps in &responses {
            for resp in per_eps {
                row.push(resp.magnitude_db[i]);
                row.push(resp.phase_deg[i]);
            }
        }
        for resp in &ideal {
            row.push(resp.magnitude_db[i]);
            row.push(resp.phase_deg[i]);
        }
        record.push_row(w, row).expect("monotone grid");
    }

    Ok(ScenarioResult {
        record,
        metrics,
        plots: vec![
            ("bode_mag.svg".into(), mag_plot),
            ("bode_phase.svg".into(), phase_plot),
        ],
        extra_csvs,
        seed,
    })
}

/// Quadrotor tracking runs: full closed loop from the printed initial
/// conditions, with measurement noise and the per-axis Kalman integration
/// baseline.
pub(super) fn quad(
    reader: &mut ConfigReader,
    default_duration: f64,
) -> Result<ScenarioResult, HarnessError> {
    let seed = reader.u64("seed", 42)?;
    let dt = reader.f64("dt", 1e-3)?;
    let duration = reader.f64("duration", default_duration)?;
    let default_every = if default_duration > 500.0 { 100 } else { 10 };
    let record_every = reader.usize("record_every", default_every)?;

    let mut cfg: ClosedLoopConfig<f64> =
        ClosedLoopConfig::reference_scenario(duration, dt, record_every);

    cfg.params.mass = reader.f64("quad.m", 2.0)?;
    cfg.params.gravity = reader.f64("quad.g", 9.81)?;
    cfg.params.arm = reader.f64("quad.l", 0.2)?;
    cfg.params.jx = reader.f64("quad.jx", 1.25)?;
    cfg.params.jy = reader.f64("quad.jy", 1.25)?;
    cfg.params.jz = reader.f64("quad.jz", 2.5)?;
    cfg.params.lift_b = reader.f64("quad.b", 2.923e-3)?;
    cfg.params.drag_k = reader.f64("quad.k", 5e-4)?;
    cfg.params.kx = reader.f64("quad.kx", 0.01)?;
    cfg.params.ky = reader.f64("quad.ky", 0.01)?;
    cfg.params.kz = reader.f64("quad.kz", 0.01)?;
    cfg.params.k_psi = reader.f64("quad.kpsi", 0.012)?;
    cfg.params.k_theta = reader.f64("quad.ktheta", 0.012)?;
    cfg.params.k_phi = reader.f64("quad.kphi", 0.012)?;

    cfg.gains.kp1 = reader.f64("quad.ctrl.kp1", 16.0)?;
    cfg.gains.kp2 = reader.f64("quad.ctrl.kp2", 8.0)?;
    cfg.gains.ka1 = reader.f64("quad.ctrl.ka1", 28.0)?;
    cfg.gains.ka2 = reader.f64("quad.ctrl.ka2", 8.0)?;
    cfg.ff_mode = match reader.string("quad.ctrl.ff", "raw")?.as_str() {
        "scaled" => FeedforwardMode::Scaled,
        "raw" => FeedforwardMode::Raw,
        other => {
            return Err(HarnessError::Config(format!(
                "quad.ctrl.ff must be \"scaled\" or \"raw\", got {other:?}"
            )))
        }
    };

    let pos_k = reader.f64_list("quad.posobs.k", &[6.0, 11.0, 6.0])?;
    let ramp_rate = reader.f64("quad.posobs.ramp_rate", 20.0)?;
    let ramp_max_inv = reader.f64("quad.posobs.ramp_max_inv", 20.0)?;
    let att_k = reader.f64_list("quad.attobs.k", &[0.1, 2.0, 1.0])?;
    let att_eps = reader.f64("quad.attobs.eps", 1.0 / 3.0)?;
    if pos_k.len() != 3 || att_k.len() != 3 {
        return Err(HarnessError::Config(
            "quad.posobs.k and quad.attobs.k need 3 entries".into(),
        ));
    }
    cfg.pos_obs_gains = [pos_k[0], pos_k[1], pos_k[2]];
    cfg.pos_obs_schedule = EpsSchedule::InverseRamp {
        rate: ramp_rate,
        max_inv: ramp_max_inv,
    };
    cfg.att_obs_gains = [att_k[0], att_k[1], att_k[2]];
    cfg.att_obs_eps = att_eps;

    let h0 = reader.f64("quad.ref.h0", 30.0)?;
    let a_ref = reader.f64("quad.ref.a", 5.0)?;
    let km = reader.f64("quad.ref.km", 0.005)?;
    cfg.reference = (h0, a_ref, km);

    let pos_amp = reader.f64("quad.dist.pos_amp", 0.5)?;
    let pos_omega = reader.f64("quad.dist.pos_omega", 1.0)?;
    let att_amp = reader.f64("quad.dist.att_amp", 0.2)?;
    let att_omega = reader.f64("quad.dist.att_omega", 0.8)?;
    let pos_dist = Sinusoid::new(pos_amp, pos_omega);
    let att_dist = Sinusoid::new(att_amp, att_omega);
    cfg.disturbances.x = pos_dist;
    cfg.disturbances.y = pos_dist;
    cfg.disturbances.z = pos_dist;
    cfg.disturbances.psi = att_dist;
    cfg.disturbances.theta = att_dist;
    cfg.disturbances.phi = att_dist;

    // measurement noise: one shared spec with per-channel seeds; the pulse
    // width is read as a percentage of the period by default (1% duty)
    let noise_template = noise_from(
        reader,
        "quad.noise",
        seed,
        NoiseDefaults {
            variance: 1e-3,
            sample_dt: dt,
            pulse_amplitude: 1e-3,
            pulse_period: 1.0,
            pulse_width_s: 0.0,
            pulse_width_pct: 1.0,
        },
    )?;
    for i in 0..6 {
        let mut spec = noise_template;
        if let Some(r) = &mut spec.random {
            r.seed = seed + i as u64;
        }
        cfg.meas_noise[i] = spec;
    }

    cfg.initial_state = QuadState {
        pos: Vector3::new(
            reader.f64("quad.init.x", 0.5)?,
            reader.f64("quad.init.y", -0.5)?,
            reader.f64("quad.init.z", 0.5)?,
        ),
        vel: Vector3::new(
            reader.f64("quad.init.vx", -0.5)?,
            reader.f64("quad.init.vy", 0.5)?,
            reader.f64("quad.init.vz", -1.0)?,
        ),
        att: Vector3::new(
            reader.f64("quad.init.psi", 0.2)?,
            reader.f64("quad.init.theta", 0.3)?,
            reader.f64("quad.init.phi", 0.2)?,
        ),
        rates: Vector3::new(
            reader.f64("quad.init.psi_rate", 0.3)?,
            reader.f64("quad.init.theta_rate", -0.1)?,
            reader.f64("quad.init.phi_rate", -0.2)?,
        ),
    };
    // position observers start at rest; attitude observers start on the
    // known initial angles and rates
    cfg.initial_observers = [
        [0.0; 3],
        [0.0; 3],
        [0.0; 3],
        [cfg.initial_state.att[0], cfg.initial_state.rates[0], 0.0],
        [cfg.initial_state.att[1], cfg.initial_state.rates[1], 0.0],
        [cfg.initial_state.att[2], cfg.initial_state.rates[2], 0.0],
    ];

    let kf_q = reader.f64("baseline.kf.q", 1e-4)?;
    let kf_r = reader.f64("baseline.kf.r", 1e-3)?;
    cfg.kf_baseline = Some(KfBaselineConfig {
        process_noise: kf_q,
        meas_noise_var: kf_r,
    });

    cfg.duration = duration;
    cfg.dt = dt;
    cfg.record_every = record_every;

    let record = quadrotor::simulate_closed_loop(&cfg)?;

    // metrics
    let times = record.times().to_vec();
    let last = times.len() - 1;
    let col = |name: &str| record.column(name).unwrap();
    let (x, y, z) = (col("x"), col("y"), col("z"));
    let mut metrics = BTreeMap::new();
    let pos_err_final =
        (x[last].powi(2) + y[last].powi(2) + (z[last] - h0).powi(2)).sqrt();
    metrics.insert("pos_err_final".into(), pos_err_final);

    let angles = ["psi", "theta", "phi"];
    let mut att_abs_final = 0.0f64;
    let mut est_err_max_after_10 = 0.0f64;
    let mut obs_drift = 0.0f64;
    let mut kf_drift = 0.0f64;
    let tail_start = duration / 2.0;
    for name in angles {
        let truth = col(name);
        let est = col(&format!("{name}_hat"));
        att_abs_final = att_abs_final.max(truth[last].abs());
        let err: Vec<f64> = est.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let (_, tail_err_10) = tail(&times, &err, 10.0_f64.min(duration));
        est_err_max_after_10 = est_err_max_after_10.max(max_abs(&tail_err_10));
        let (ts, vs) = tail(&times, &err, tail_start);
        obs_drift = obs_drift.max(linear_trend_slope(&ts, &vs).abs());
        if record.column_index(&format!("kf_{name}")).is_ok() {
            let kf_est = col(&format!("kf_{name}"));
            let kf_err: Vec<f64> = kf_est.iter().zip(&truth).map(|(a, b)| a - b).collect();
            let (ts, vs) = tail(&times, &kf_err, tail_start);
            kf_drift = kf_drift.max(linear_trend_slope(&ts, &vs).abs());
        }
        metrics.insert(
            format!("rms_est_err_{name}"),
            rms(&tail(&times, &err, 10.0_f64.min(duration)).1),
        );
    }
    metrics.insert("att_abs_final".into(), att_abs_final);
    metrics.insert("est_err_att_max_after_10s".into(), est_err_max_after_10);
    metrics.insert("obs_att_drift_slope".into(), obs_drift);
    metrics.insert("kf_att_drift_slope".into(), kf_drift);
    metrics.insert(
        "att_drift_ratio".into(),
        kf_drift / obs_drift.max(1e-300),
    );
    metrics.insert("sat_fraction".into(), {
        let sat = col("sat");
        sat.iter().sum::<f64>() / sat.len() as f64
    });

    let pair = |name: &str| -> Vec<(f64, f64)> {
        col(name).into_iter().zip(&times).map(|(v, &t)| (t, v)).collect()
    };
    let pos_plot = Plot::new("Position tracking", "t (s)", "m")
        .with(Series::solid("z", pair("z")))
        .with(Series::dashed("z reference", pair("z_ref")))
        .with(Series::solid("x", pair("x")))
        .with(Series::solid("y", pair("y")));
    let mut att_plot = Plot::new("Attitude angles and estimates", "t (s)", "rad");
    for name in angles {
        att_plot = att_plot.with(Series::solid(name, pair(name)));
        att_plot = att_plot.with(Series::dashed(
            &format!("{name} estimate"),
            pair(&format!("{name}_hat")),
        ));
    }
    let mut kf_plot = Plot::new("Attitude integration baseline", "t (s)", "rad");
    for name in angles {
        kf_plot = kf_plot.with(Series::solid(name, pair(name)));
        if record.column_index(&format!("kf_{name}")).is_ok() {
            kf_plot = kf_plot.with(Series::dashed(
                &format!("kalman {name}"),
                pair(&format!("kf_{name}")),
            ));
        }
    }

    Ok(ScenarioResult {
        record,
        metrics,
        plots: vec![
            ("position.svg".into(), pos_plot),
            ("attitude.svg".into(), att_plot),
            ("kf_baseline.svg".into(), kf_plot),
        ],
        extra_csvs: Vec::new(),
        seed,
    })
}

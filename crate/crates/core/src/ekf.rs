//! Linear kinematic-chain Kalman filter, the drift baseline the observers
//! are compared against.
//!
//! The model is the integrator chain x_i' = x_{i+1}, x_m' = 0 with one
//! measured state. Its noise assumptions (zero-mean Gaussian process and
//! measurement noise) are exactly what the experiments violate: feeding it
//! non-zero-mean noise makes the integrated estimates drift, which is the
//! phenomenon the comparisons quantify.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::record::RunRecord;
use crate::scalar::Float;
use crate::signals::SignalSource;

#[derive(Debug, Error)]
pub enum EkfError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-finite Kalman gain (check covariances)")]
    NonFiniteGain,
    #[error("record error: {0}")]
    Record(#[from] crate::record::RecordError),
}

/// Chain length, noise covariances and which chain state the sensor reads.
#[derive(Debug, Clone, PartialEq)]
pub struct KfModel<T> {
    order: usize,
    process_noise_cov: DMatrix<T>,
    meas_noise_var: T,
    measured_index: usize,
}

impl<T: Float> KfModel<T> {
    /// `measured_index` is 1-based, matching the chain-state subscripts.
    pub fn new(
        order: usize,
        process_noise_cov: DMatrix<T>,
        meas_noise_var: T,
        measured_index: usize,
    ) -> Result<Self, EkfError> {
        if order == 0 {
            return Err(EkfError::InvalidModel("order must be at least 1".into()));
        }
        if process_noise_cov.nrows() != order || process_noise_cov.ncols() != order {
            return Err(EkfError::InvalidModel(format!(
                "process noise covariance must be {order}x{order}"
            )));
        }
        if !is_symmetric(&process_noise_cov, T::of(1e-12)) {
            return Err(EkfError::InvalidModel(
                "process noise covariance must be symmetric".into(),
            ));
        }
        if !(meas_noise_var > T::zero()) {
            return Err(EkfError::InvalidModel(
                "measurement noise variance must be positive".into(),
            ));
        }
        if measured_index == 0 || measured_index > order {
            return Err(EkfError::InvalidModel(format!(
                "measured index {measured_index} must lie in 1..={order}"
            )));
        }
        Ok(Self {
            order,
            process_noise_cov,
            meas_noise_var,
            measured_index,
        })
    }

    /// Diagonal process noise q*I, the default tuning.
    pub fn diagonal(
        order: usize,
        q: T,
        meas_noise_var: T,
        measured_index: usize,
    ) -> Result<Self, EkfError> {
        Self::new(
            order,
            DMatrix::identity(order, order) * q,
            meas_noise_var,
            measured_index,
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn measured_index(&self) -> usize {
        self.measured_index
    }
}

/// Filter state: mean, covariance and the innovation recorded by the last
/// update.
#[derive(Debug, Clone, PartialEq)]
pub struct KfState<T> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub last_innovation: Option<T>,
}

impl<T: Float> KfState<T> {
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Self {
        Self {
            mean,
            cov,
            last_innovation: None,
        }
    }

    /// Zero mean, identity covariance.
    pub fn zeroed(order: usize) -> Self {
        Self::new(DVector::zeros(order), DMatrix::identity(order, order))
    }
}

fn is_symmetric<T: Float>(m: &DMatrix<T>, tol: T) -> bool {
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Exact chain transition matrix: upper triangular with dt^k / k! bands.
fn transition<T: Float>(order: usize, dt: T) -> DMatrix<T> {
    let mut f = DMatrix::identity(order, order);
    for band in 1..order {
        let mut factor = T::one();
        for k in 1..=band {
            factor *= dt / T::from_usize(k).expect("band fits in scalar");
        }
        for i in 0..order - band {
            f[(i, i + band)] = factor;
        }
    }
    f
}

/// Propagates mean and covariance by dt: mean <- F mean,
/// cov <- F P F^T + Q dt.
pub fn predict<T: Float>(model: &KfModel<T>, state: &KfState<T>, dt: T) -> KfState<T> {
    let f = transition(model.order, dt);
    let mean = &f * &state.mean;
    let mut cov = &f * &state.cov * f.transpose() + &model.process_noise_cov * dt;
    symmetrize(&mut cov);
    KfState {
        mean,
        cov,
        last_innovation: state.last_innovation,
    }
}

fn symmetrize<T: Float>(m: &mut DMatrix<T>) {
    let half = T::of(0.5);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Measurement update at the measured chain state, Joseph-form covariance.
pub fn update<T: Float>(
    model: &KfModel<T>,
    state: &KfState<T>,
    z: T,
) -> Result<KfState<T>, EkfError> {
    let m = model.order;
    let idx = model.measured_index - 1;
    let r = model.meas_noise_var;

    // H picks out one state, so the innovation covariance is a scalar.
    let ph: DVector<T> = state.cov.column(idx).into();
    let s = ph[idx] + r;
    let gain = ph / s;
    if gain.iter().any(|g| !g.is_finite()) {
        return Err(EkfError::NonFiniteGain);
    }

    let innovation = z - state.mean[idx];
    let mean = &state.mean + &gain * innovation;

    let mut i_kh = DMatrix::identity(m, m);
    for row in 0..m {
        i_kh[(row, idx)] -= gain[row];
    }
    let mut cov = &i_kh * &state.cov * i_kh.transpose() + &gain * gain.transpose() * r;
    symmetrize(&mut cov);

    Ok(KfState {
        mean,
        cov,
        last_innovation: Some(innovation),
    })
}

/// Runs predict/update against the sampled source for `duration` at step
/// `dt`, recording the measurement, the noise-free signal value, and every
/// chain-state estimate every `record_every` steps. Columns:
/// `z`, `signal_truth`, `m1`..`mN`.
pub fn run_baseline<T: Float>(
    model: &KfModel<T>,
    src: &SignalSource<T>,
    init: KfState<T>,
    duration: T,
    dt: T,
    record_every: usize,
) -> Result<RunRecord<T>, EkfError> {
    assert!(dt > T::zero() && record_every > 0);
    let steps = (duration / dt)
        .round()
        .to_usize()
        .expect("step count fits in usize");
    let m = model.order;
    let mut columns = vec!["z".to_string(), "signal_truth".to_string()];
    columns.extend((1..=m).map(|i| format!("m{i}")));
    let mut record = RunRecord::new(columns);

    let mut state = init;
    let push = |t: T, z: T, state: &KfState<T>, record: &mut RunRecord<T>| {
        let mut row = Vec::with_capacity(m + 2);
        row.push(z);
        row.push(src.truth(t));
        row.extend(state.mean.iter().copied());
        record.push_row(t, row)
    };
    push(T::zero(), src.sample(T::zero()), &state, &mut record)?;

    for k in 1..=steps {
        let t = dt * T::from_usize(k).expect("k fits in scalar");
        state = predict(model, &state, dt);
        let z = src.sample(t);
        state = update(model, &state, z)?;
        if k % record_every == 0 || k == steps {
            push(t, z, &state, &mut record)?;
        }
    }
    Ok(record)
}

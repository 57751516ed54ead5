//! Reference signals, deterministic pulse disturbances and seeded
//! non-zero-mean measurement noise — everything the experiments feed into
//! observers and the Kalman baseline.
//!
//! The stochastic component is a zero-order-hold Gaussian sequence derived
//! statelessly from `(seed, floor(t / sample_dt))`, so sampling is
//! deterministic, order-independent and safe from any thread.

use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Float;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("unknown signal name: {0}")]
    UnknownName(String),
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),
}

/// The named analytic chain used by the integrator experiments:
/// a01 = sin t, a02 = cos t, a03 = -sin t (each the derivative of the one
/// before it, so integral truths stay in the family).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalName {
    A01,
    A02,
    A03,
}

impl FromStr for SignalName {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, SignalError> {
        match s {
            "a01" => Ok(Self::A01),
            "a02" => Ok(Self::A02),
            "a03" => Ok(Self::A03),
            other => Err(SignalError::UnknownName(other.to_string())),
        }
    }
}

/// Exact analytic value of a named signal, for error computation.
pub fn analytic_truth<T: Float>(name: &str, t: T) -> Result<T, SignalError> {
    let name: SignalName = name.parse()?;
    Ok(eval_name(name, t))
}

fn eval_name<T: Float>(name: SignalName, t: T) -> T {
    match name {
        SignalName::A01 => t.sin(),
        SignalName::A02 => t.cos(),
        SignalName::A03 => -t.sin(),
    }
}

/// Zero-order-hold Gaussian noise: a fresh draw every `sample_dt` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomNoise<T> {
    pub mean: T,
    pub variance: T,
    pub seed: u64,
    pub sample_dt: T,
}

impl<T: Float> RandomNoise<T> {
    pub fn new(mean: T, variance: T, seed: u64, sample_dt: T) -> Result<Self, SignalError> {
        if !(variance >= T::zero()) {
            return Err(SignalError::InvalidNoise("variance must be >= 0".into()));
        }
        if !(sample_dt > T::zero()) {
            return Err(SignalError::InvalidNoise("sample_dt must be > 0".into()));
        }
        Ok(Self {
            mean,
            variance,
            seed,
            sample_dt,
        })
    }

    fn value(&self, t: T) -> T {
        let idx = (t / self.sample_dt).floor().to_u64().unwrap_or(0);
        self.mean + self.variance.sqrt() * T::of(standard_normal(self.seed, idx))
    }
}

/// Rectangular pulse train: `amplitude` for the first `width` seconds of
/// every `period`, starting `phase_delay` seconds in, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrain<T> {
    pub amplitude: T,
    pub period: T,
    pub width: T,
    pub phase_delay: T,
}

impl<T: Float> PulseTrain<T> {
    pub fn new(amplitude: T, period: T, width: T, phase_delay: T) -> Result<Self, SignalError> {
        if !(period > T::zero()) {
            return Err(SignalError::InvalidNoise("period must be > 0".into()));
        }
        if !(width > T::zero() && width <= period) {
            return Err(SignalError::InvalidNoise(
                "width must satisfy 0 < width <= period".into(),
            ));
        }
        Ok(Self {
            amplitude,
            period,
            width,
            phase_delay,
        })
    }

    fn value(&self, t: T) -> T {
        let x = t - self.phase_delay;
        let m = ((x % self.period) + self.period) % self.period;
        if m < self.width {
            self.amplitude
        } else {
            T::zero()
        }
    }
}

/// Additive disturbance model: optional Gaussian ZOH noise plus an optional
/// pulse train.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec<T> {
    pub random: Option<RandomNoise<T>>,
    pub pulse: Option<PulseTrain<T>>,
}

impl<T: Float> NoiseSpec<T> {
    pub fn none() -> Self {
        Self {
            random: None,
            pulse: None,
        }
    }

    pub fn value(&self, t: T) -> T {
        let mut v = T::zero();
        if let Some(r) = &self.random {
            v += r.value(t);
        }
        if let Some(p) = &self.pulse {
            v += p.value(t);
        }
        v
    }
}

/// Deterministic base waveform of a signal source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseSignal<T> {
    Zero,
    Constant(T),
    /// amplitude * sin(omega t)
    Sine { amplitude: T, omega: T },
    /// amplitude * cos(omega t)
    Cosine { amplitude: T, omega: T },
    Named(SignalName),
}

impl<T: Float> BaseSignal<T> {
    pub fn eval(&self, t: T) -> T {
        match *self {
            BaseSignal::Zero => T::zero(),
            BaseSignal::Constant(c) => c,
            BaseSignal::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
            BaseSignal::Cosine { amplitude, omega } => amplitude * (omega * t).cos(),
            BaseSignal::Named(n) => eval_name(n, t),
        }
    }
}

/// A measurable signal: base waveform plus noise plus a constant
/// measurement bias d(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSource<T> {
    pub base: BaseSignal<T>,
    pub noise: NoiseSpec<T>,
    pub bias: T,
}

impl<T: Float> SignalSource<T> {
    /// Noise-free, bias-free source.
    pub fn clean(base: BaseSignal<T>) -> Self {
        Self {
            base,
            noise: NoiseSpec::none(),
            bias: T::zero(),
        }
    }

    pub fn new(base: BaseSignal<T>, noise: NoiseSpec<T>, bias: T) -> Self {
        Self { base, noise, bias }
    }

    /// The measured value at time t.
    pub fn sample(&self, t: T) -> T {
        self.base.eval(t) + self.noise.value(t) + self.bias
    }

    /// The underlying noise-free signal.
    pub fn truth(&self, t: T) -> T {
        self.base.eval(t)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Standard-normal draw addressed by (seed, index): splitmix64 feeding a
/// Box-Muller transform. Counter-based, so there is no stream state to
/// share between threads.
pub fn standard_normal(seed: u64, index: u64) -> f64 {
    let mut state = seed ^ index.wrapping_mul(0xD1B54A32D192ED03);
    let a = splitmix64(&mut state);
    let b = splitmix64(&mut state);
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn analytic_truth_values() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(analytic_truth::<f64>("a01", half_pi).unwrap(), 1.0);
        assert_relative_eq!(analytic_truth::<f64>("a03", 0.0).unwrap(), 0.0);
        assert_relative_eq!(analytic_truth::<f64>("a02", 0.0).unwrap(), 1.0);
        assert_eq!(
            analytic_truth::<f64>("a99", 0.0).unwrap_err(),
            SignalError::UnknownName("a99".into())
        );
    }

    #[test]
    fn pulse_mean_matches_duty_cycle() {
        let p = PulseTrain::new(0.5f64, 2.0, 1.0, 0.0).unwrap();
        let n = 200_000;
        let periods = 100.0;
        let mean: f64 = (0..n)
            .map(|i| p.value(periods * 2.0 * i as f64 / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 1e-3, "mean = {mean}");
    }

    #[test]
    fn pulse_always_on_when_width_equals_period() {
        let p = PulseTrain::new(0.1f64, 1.0, 1.0, 0.0).unwrap();
        for i in 0..50 {
            assert_eq!(p.value(i as f64 * 0.173), 0.1);
        }
    }

    #[test]
    fn pulse_rejects_zero_or_oversized_width() {
        assert!(PulseTrain::new(1.0f64, 2.0, 0.0, 0.0).is_err());
        assert!(PulseTrain::new(1.0f64, 2.0, 2.5, 0.0).is_err());
    }

    #[test]
    fn noise_free_cosine_sampling() {
        let src = SignalSource::clean(BaseSignal::<f64>::Named(SignalName::A02));
        for i in 0..20 {
            let t = 0.37 * i as f64;
            assert_relative_eq!(src.sample(t), t.cos());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_zero_order_hold() {
        let noise = NoiseSpec {
            random: Some(RandomNoise::new(0.0f64, 0.01, 42, 1e-3).unwrap()),
            pulse: None,
        };
        let src = SignalSource::new(BaseSignal::Zero, noise, 0.0);
        let a: Vec<f64> = (0..1000).map(|i| src.sample(i as f64 * 7e-4)).collect();
        let b: Vec<f64> = (0..1000).map(|i| src.sample(i as f64 * 7e-4)).collect();
        assert_eq!(a, b);
        // constant within one hold interval
        assert_eq!(src.sample(5.0001e-3), src.sample(5.9e-3));
        assert_ne!(src.sample(5.0001e-3), src.sample(6.0001e-3));
    }

    #[test]
    fn random_component_statistics() {
        let n = 100_000u64;
        let sigma = 0.1f64;
        let r = RandomNoise::new(0.0f64, sigma * sigma, 7, 1.0).unwrap();
        let draws: Vec<f64> = (0..n).map(|i| r.value(i as f64)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        // 4 sigma / sqrt(N) bound on the sample mean
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean = {mean}");
        assert!((var - sigma * sigma).abs() < 0.05 * sigma * sigma, "var = {var}");
    }

    #[test]
    fn nonzero_mean_offsets_draws() {
        let r = RandomNoise::new(3.0f64, 0.0, 0, 1.0).unwrap();
        assert_relative_eq!(r.value(0.5), 3.0);
    }
}

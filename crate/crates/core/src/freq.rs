//! Transfer-function construction and Bode-style frequency response for the
//! observers, including comparison against the ideal operators s^(j-p).

use nalgebra::Complex;
use thiserror::Error;

use crate::poly::{sensor_indicator, ObserverGainSet, RealPoly};
use crate::scalar::Float;

#[derive(Debug, Error, PartialEq)]
pub enum FreqError {
    #[error("denominator vanishes at omega = {omega}")]
    DenominatorZero { omega: f64 },
}

/// Proper rational transfer function with real coefficients. For observer
/// instances the denominator carries the eps powers folded in, so its roots
/// are the true (fast) observer poles.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF<T> {
    pub num: RealPoly<T>,
    pub den: RealPoly<T>,
}

impl<T: Float> RationalTF<T> {
    pub fn new(num: RealPoly<T>, den: RealPoly<T>) -> Self {
        Self { num, den }
    }

    pub fn eval(&self, s: Complex<T>) -> Complex<T> {
        self.num.eval(s) / self.den.eval(s)
    }
}

/// Frequency response on an angular-frequency grid (rad/s), magnitude in dB
/// and unwrapped phase in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse<T> {
    pub omega: Vec<T>,
    pub magnitude_db: Vec<T>,
    pub phase_deg: Vec<T>,
}

/// Transfer function from the measured signal to state x_j:
///
/// ```text
///                    k_p s^(j-1)
/// H_j(s) = -------------------------------------------------------------
///          eps^(n+1-c(p)) s^n + sum_{i != p} k_i eps^(i-c(p)) s^(i-1)
///                                                         + k_p s^(p-1)
/// ```
pub fn transfer_function<T: Float>(g: &ObserverGainSet<T>, j: usize) -> RationalTF<T> {
    let n = g.order();
    let p = g.sensor_index();
    assert!(j >= 1 && j <= n, "state index j = {j} must lie in 1..={n}");
    let c = sensor_indicator(p);
    let eps = g.eps();

    let mut num = vec![T::zero(); j];
    num[0] = g.gain(p);

    let mut den = vec![T::zero(); n + 1];
    den[0] = eps.powi(n as i32 + 1 - c);
    for i in 1..=n {
        den[n - i + 1] = if i == p {
            g.gain(p)
        } else {
            g.gain(i) * eps.powi(i as i32 - c)
        };
    }

    RationalTF::new(
        RealPoly::new(num).expect("k_p > 0"),
        RealPoly::new(den).expect("eps > 0"),
    )
}

/// Evaluates magnitude (dB) and unwrapped phase (deg) on the given grid of
/// positive frequencies.
pub fn response<T: Float>(
    tf: &RationalTF<T>,
    omega_grid: &[T],
) -> Result<FrequencyResponse<T>, FreqError> {
    let mut magnitude_db = Vec::with_capacity(omega_grid.len());
    let mut phase_raw = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let s = Complex::new(T::zero(), w);
        let den = tf.den.eval(s);
        if den.norm_sqr() == T::zero() {
            return Err(FreqError::DenominatorZero {
                omega: w.to_f64().unwrap_or(f64::NAN),
            });
        }
        let h = tf.num.eval(s) / den;
        let mag = h.norm_sqr().sqrt();
        magnitude_db.push(T::of(20.0) * mag.log10());
        phase_raw.push(h.im.atan2(h.re) * T::of(180.0) / T::pi());
    }
    Ok(FrequencyResponse {
        omega: omega_grid.to_vec(),
        magnitude_db,
        phase_deg: unwrap_degrees(phase_raw),
    })
}

/// Standard +/-180 degree continuation along the grid.
fn unwrap_degrees<T: Float>(mut phase: Vec<T>) -> Vec<T> {
    let full = T::of(360.0);
    let half = T::of(180.0);
    let mut offset = T::zero();
    for i in 1..phase.len() {
        let prev = phase[i - 1];
        let mut cur = phase[i] + offset;
        while cur - prev > half {
            cur -= full;
            offset -= full;
        }
        while prev - cur > half {
            cur += full;
            offset += full;
        }
        phase[i] = cur;
    }
    phase
}

/// Response of the ideal operator s^r: magnitude 20 r log10(omega) dB,
/// constant phase 90 r degrees.
pub fn ideal_response<T: Float>(r: i32, omega_grid: &[T]) -> FrequencyResponse<T> {
    let magnitude_db = omega_grid
        .iter()
        .map(|&w| T::of(20.0 * r as f64) * w.log10())
        .collect();
    let phase = T::of(90.0 * r as f64);
    FrequencyResponse {
        omega: omega_grid.to_vec(),
        magnitude_db,
        phase_deg: vec![phase; omega_grid.len()],
    }
}

/// Per-frequency relative deviation |H_j(i w) (i w)^(p-j) - 1| from the
/// ideal operator. Small values mean x_j usefully estimates the (j-p)th
/// derivative (negative: integral) at that frequency.
pub fn passband_error<T: Float>(g: &ObserverGainSet<T>, j: usize, omega_grid: &[T]) -> Vec<T> {
    let tf = transfer_function(g, j);
    let shift = g.sensor_index() as i32 - j as i32;
    omega_grid
        .iter()
        .map(|&w| {
            let s = Complex::new(T::zero(), w);
            let h = tf.eval(s);
            let scaled = h * s.powi(shift);
            (scaled - Complex::new(T::one(), T::zero()))
                .norm_sqr()
                .sqrt()
        })
        .collect()
}

/// The largest grid frequency at which the passband deviation stays below
/// `threshold` (0.05 is the usual choice).
pub fn usable_bandwidth<T: Float>(
    g: &ObserverGainSet<T>,
    j: usize,
    omega_grid: &[T],
    threshold: T,
) -> Option<T> {
    let dev = passband_error(g, j, omega_grid);
    omega_grid
        .iter()
        .zip(&dev)
        .rev()
        .find(|(_, &d)| d < threshold)
        .map(|(&w, _)| w)
}

/// Log-spaced grid of `n` points from `min` to `max` inclusive.
pub fn log_grid<T: Float>(min: T, max: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && min > T::zero() && max > min);
    let (a, b) = (min.log10(), max.log10());
    let step = (b - a) / T::from_usize(n - 1).expect("grid size fits");
    (0..n)
        .map(|i| T::of(10.0).powf(a + step * T::from_usize(i).expect("fits")))
        .collect()
}

/// Default Bode grid: 400 log-spaced points over [1e-3, 1e3] rad/s.
pub fn default_omega_grid<T: Float>() -> Vec<T> {
    log_grid(T::of(1e-3), T::of(1e3), 400)
}

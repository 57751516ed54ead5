//! Polynomial stability machinery: Routh tables, Hurwitz tests, a root
//! oracle, observer gain sets and eigenvalue-placement gain synthesis.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::scalar::Float;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("constant polynomial: degree must be at least 1")]
    ConstantPolynomial,
    #[error("polynomial needs at least one coefficient")]
    Empty,
    #[error("leading coefficient must be nonzero")]
    ZeroLeadingCoefficient,
    #[error("root finding did not converge within the iteration cap")]
    RootsNonConvergence,
    #[error("no Hurwitz selection exists for n = {n}, p = {p}")]
    UnsupportedObserverCase { n: usize, p: usize },
    #[error("invalid gain set: {0}")]
    InvalidGains(String),
    #[error("bandwidth too low for these eigenvalues: eps = {eps:.4} is not below 1")]
    BandwidthTooLow { eps: f64 },
}

/// Indicator c(p): 1 when the sensor reads the first chain state, 0 otherwise.
/// It removes the extra perturbation power in the pure-differentiator case.
#[inline]
pub fn sensor_indicator(p: usize) -> i32 {
    if p == 1 {
        1
    } else {
        0
    }
}

/// Real-coefficient polynomial, stored highest degree first with a nonzero
/// leading coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPoly<T> {
    coeffs: Vec<T>,
}

impl<T: Float> RealPoly<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self, PolyError> {
        match coeffs.first() {
            None => Err(PolyError::Empty),
            Some(c) if *c == T::zero() => Err(PolyError::ZeroLeadingCoefficient),
            Some(_) => Ok(Self { coeffs }),
        }
    }

    /// Convenience constructor from `f64` literals.
    pub fn from_f64s(coeffs: &[f64]) -> Result<Self, PolyError> {
        Self::new(coeffs.iter().map(|&c| T::of(c)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn leading(&self) -> T {
        self.coeffs[0]
    }

    /// Scaled so the leading coefficient is 1.
    pub fn monic(&self) -> Self {
        let lead = self.leading();
        Self {
            coeffs: self.coeffs.iter().map(|&c| c / lead).collect(),
        }
    }

    /// Same roots, leading coefficient strictly positive.
    pub fn sign_normalized(&self) -> Self {
        if self.leading() > T::zero() {
            self.clone()
        } else {
            Self {
                coeffs: self.coeffs.iter().map(|&c| -c).collect(),
            }
        }
    }

    pub fn eval_real(&self, x: T) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn eval(&self, s: Complex<T>) -> Complex<T> {
        self.coeffs
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &c| {
                acc * s + Complex::new(c, T::zero())
            })
    }

    /// Derivative value at a complex point (Horner on p').
    fn eval_derivative(&self, s: Complex<T>) -> Complex<T> {
        let n = self.degree();
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, &c) in self.coeffs.iter().take(n).enumerate() {
            let k = T::from_usize(n - j).expect("degree fits in scalar");
            acc = acc * s + Complex::new(c * k, T::zero());
        }
        acc
    }

    /// Polynomial whose roots are `scale` times the roots of `self`
    /// (substitutes s/scale and clears denominators, keeping the leading
    /// coefficient unchanged).
    pub fn with_scaled_roots(&self, scale: T) -> Self {
        let mut coeffs = self.coeffs.clone();
        let mut factor = T::one();
        for c in coeffs.iter_mut() {
            *c *= factor;
            factor *= scale;
        }
        Self { coeffs }
    }

    pub fn coeff_norm(&self) -> T {
        self.coeffs.iter().map(|&c| c * c).sum::<T>().sqrt()
    }
}

/// Routh array of a polynomial. `rows` follows the standard recurrence;
/// construction stops early if a zero first-column pivot makes the
/// recurrence undefined, and every zero pivot is flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct RouthTable<T> {
    rows: Vec<Vec<T>>,
    zero_pivots: Vec<usize>,
}

impl<T: Float> RouthTable<T> {
    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn first_column(&self) -> Vec<T> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Row indices whose first entry is zero.
    pub fn zero_pivots(&self) -> &[usize] {
        &self.zero_pivots
    }

    pub fn has_zero_pivot(&self) -> bool {
        !self.zero_pivots.is_empty()
    }

    /// Sign changes down the first column; with a complete table this counts
    /// open right-half-plane roots.
    pub fn sign_changes(&self) -> usize {
        let col = self.first_column();
        col.windows(2)
            .filter(|w| (w[0] > T::zero()) != (w[1] > T::zero()))
            .count()
    }
}

/// Builds the Routh table of `poly` (sign-normalized first, which leaves the
/// root set untouched). Zero pivots are flagged, never epsilon-perturbed:
/// observers need strict stability, so boundary cases are simply rejected
/// by [`is_hurwitz`].
pub fn routh_table<T: Float>(poly: &RealPoly<T>) -> Result<RouthTable<T>, PolyError> {
    let n = poly.degree();
    if n == 0 {
        return Err(PolyError::ConstantPolynomial);
    }
    let p = poly.sign_normalized();
    let c = p.coeffs();

    let row0: Vec<T> = c.iter().copied().step_by(2).collect();
    let row1: Vec<T> = c.iter().copied().skip(1).step_by(2).collect();
    let mut rows = vec![row0, row1];
    let mut zero_pivots = Vec::new();

    for k in 2..=n {
        let pivot = rows[k - 1][0];
        if pivot == T::zero() {
            break;
        }
        let len = rows[k - 2].len().saturating_sub(1).max(1);
        let mut row = Vec::with_capacity(len);
        for j in 0..len {
            let a0 = rows[k - 2][0];
            let a1 = rows[k - 2].get(j + 1).copied().unwrap_or_else(T::zero);
            let b1 = rows[k - 1].get(j + 1).copied().unwrap_or_else(T::zero);
            row.push((pivot * a1 - a0 * b1) / pivot);
        }
        rows.push(row);
    }

    for (i, row) in rows.iter().enumerate() {
        if row[0] == T::zero() {
            zero_pivots.push(i);
        }
    }

    Ok(RouthTable { rows, zero_pivots })
}

/// Strict Hurwitz test: every first-column Routh entry positive and no zero
/// pivot anywhere.
pub fn is_hurwitz<T: Float>(poly: &RealPoly<T>) -> Result<bool, PolyError> {
    let table = routh_table(poly)?;
    Ok(!table.has_zero_pivot() && table.first_column().iter().all(|&v| v > T::zero()))
}

const ROOT_SCHUR_MAX_ITER: usize = 500;
const ROOT_POLISH_MAX_ITER: usize = 12;

/// All complex roots with multiplicity, via companion-matrix eigenvalues
/// (balanced Schur) followed by Newton polishing. This is test-oracle
/// machinery: accuracy matters more than speed.
pub fn roots<T: Float>(poly: &RealPoly<T>) -> Result<Vec<Complex<T>>, PolyError> {
    let n = poly.degree();
    if n == 0 {
        return Err(PolyError::ConstantPolynomial);
    }
    let monic = poly.monic();
    let c = monic.coeffs();

    let mut companion = DMatrix::<T>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = T::one();
    }
    for i in 0..n {
        // coefficient of s^i is c[n - i]
        companion[(i, n - 1)] = -c[n - i];
    }
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut companion);

    let schur = nalgebra::linalg::Schur::try_new(
        companion,
        T::default_epsilon(),
        ROOT_SCHUR_MAX_ITER,
    )
    .ok_or(PolyError::RootsNonConvergence)?;
    let mut found: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();

    for r in found.iter_mut() {
        for _ in 0..ROOT_POLISH_MAX_ITER {
            let value = monic.eval(*r);
            let slope = monic.eval_derivative(*r);
            if slope.norm_sqr() == T::zero() {
                break;
            }
            let step = value / slope;
            *r -= step;
            if step.norm_sqr() <= T::default_epsilon() * T::default_epsilon() * r.norm_sqr() {
                break;
            }
        }
    }

    // Residual guard: 1e-8 relative to the evaluation scale
    // sum |c_i| |r|^i, which reduces to 1e-8 * ||coeffs|| for roots inside
    // the unit disk and stays meaningful for large roots.
    for r in &found {
        let residual = poly.eval(*r).norm_sqr().sqrt();
        let abs_r = r.norm_sqr().sqrt();
        let mut scale = T::zero();
        let mut power = T::one();
        for &c in poly.coeffs().iter().rev() {
            scale += c.abs() * power;
            power *= abs_r;
        }
        if !(residual <= T::of(1e-8) * scale) {
            return Err(PolyError::RootsNonConvergence);
        }
    }
    Ok(found)
}

/// Gains, sensor index and perturbation parameter of one observer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGainSet<T> {
    n: usize,
    p: usize,
    k: Vec<T>,
    eps: T,
}

impl<T: Float> ObserverGainSet<T> {
    pub fn new(n: usize, p: usize, k: Vec<T>, eps: T) -> Result<Self, PolyError> {
        if n == 0 {
            return Err(PolyError::InvalidGains("order n must be at least 1".into()));
        }
        if p == 0 || p > n {
            return Err(PolyError::InvalidGains(format!(
                "sensor index p = {p} must lie in 1..={n}"
            )));
        }
        if k.len() != n {
            return Err(PolyError::InvalidGains(format!(
                "expected {n} gains, got {}",
                k.len()
            )));
        }
        if let Some(i) = k.iter().position(|&ki| !(ki > T::zero())) {
            return Err(PolyError::InvalidGains(format!(
                "gain k{} must be positive",
                i + 1
            )));
        }
        if !(eps > T::zero() && eps < T::one()) {
            return Err(PolyError::InvalidGains(
                "perturbation parameter eps must lie in (0, 1)".into(),
            ));
        }
        Ok(Self { n, p, k, eps })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn sensor_index(&self) -> usize {
        self.p
    }

    pub fn gains(&self) -> &[T] {
        &self.k
    }

    /// 1-based gain accessor matching the k_i subscripts.
    pub fn gain(&self, i: usize) -> T {
        self.k[i - 1]
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn with_eps(&self, eps: T) -> Result<Self, PolyError> {
        Self::new(self.n, self.p, self.k.clone(), eps)
    }
}

/// Equivalent characteristic polynomial with the common 1/eps root scaling
/// divided out: s^n + sum_{i != p} k_i s^{i-1} + (k_p / eps^{p-c(p)}) s^{p-1}.
///
/// The observer's own characteristic polynomial has these roots divided by
/// eps; it is obtainable as `characteristic_poly(g).with_scaled_roots(1/eps)`
/// rather than being constructed separately.
pub fn characteristic_poly<T: Float>(g: &ObserverGainSet<T>) -> RealPoly<T> {
    let n = g.n;
    let mut coeffs = vec![T::zero(); n + 1];
    coeffs[0] = T::one();
    for i in 1..=n {
        let ki = g.k[i - 1];
        coeffs[n - i + 1] = if i == g.p {
            ki / g.eps.powi(g.p as i32 - sensor_indicator(g.p))
        } else {
            ki
        };
    }
    RealPoly::new(coeffs).expect("leading coefficient is one")
}

/// Case-by-case gain validity check. Supported (n, p) pairs are p = 1 with
/// any n, (2,2), (3,2), (3,3) and (4,3); every other pair admits no Hurwitz
/// selection for arbitrary eps in (0, 1) and returns an error.
///
/// For p = 1 the requirement is Hurwitzness of s^n + sum k_i s^{i-1}, which
/// is delegated to [`is_hurwitz`] because no closed-form inequality is
/// available in general.
pub fn lemma1_check<T: Float>(g: &ObserverGainSet<T>) -> Result<bool, PolyError> {
    let e = g.eps;
    match (g.n, g.p) {
        (_, 1) => is_hurwitz(&characteristic_poly(g)),
        (2, 2) => Ok(true), // positivity is already a construction invariant
        (3, 2) => Ok(g.gain(2) > e.powi(2) * g.gain(1) / g.gain(3)),
        (3, 3) => Ok(g.gain(2) > e.powi(3) * g.gain(1) / g.gain(3)),
        (4, 3) => Ok(g.gain(3) > e.powi(3) * g.gain(2) / g.gain(4)
            && g.gain(2)
                > e.powi(3) * (g.gain(4) * g.gain(4) * g.gain(1) + g.gain(2) * g.gain(2))
                    / (g.gain(4) * g.gain(3))),
        (n, p) => Err(PolyError::UnsupportedObserverCase { n, p }),
    }
}

/// Human-readable form of the failed (or satisfied) case condition, used in
/// observer construction errors.
pub fn lemma1_condition<T: Float>(g: &ObserverGainSet<T>) -> String {
    let e = g.eps;
    match (g.n, g.p) {
        (_, 1) => format!(
            "s^{} + sum k_i s^(i-1) must be Hurwitz for the chosen gains",
            g.n
        ),
        (2, 2) => "k1 > 0 and k2 > 0".to_string(),
        (3, 2) => format!(
            "k2 = {} must exceed eps^2*k1/k3 = {}",
            g.gain(2),
            e.powi(2) * g.gain(1) / g.gain(3)
        ),
        (3, 3) => format!(
            "k2 = {} must exceed eps^3*k1/k3 = {}",
            g.gain(2),
            e.powi(3) * g.gain(1) / g.gain(3)
        ),
        (4, 3) => format!(
            "k3 = {} must exceed eps^3*k2/k4 = {} and k2 = {} must exceed \
             eps^3*(k4^2*k1 + k2^2)/(k4*k3) = {}",
            g.gain(3),
            e.powi(3) * g.gain(2) / g.gain(4),
            g.gain(2),
            e.powi(3) * (g.gain(4) * g.gain(4) * g.gain(1) + g.gain(2) * g.gain(2))
                / (g.gain(4) * g.gain(3))
        ),
        (n, p) => format!("no Hurwitz selection exists for n = {n}, p = {p}"),
    }
}

/// Onefold-integrator gains from the two requested eigenvalues -a1, -a2 of
/// the equivalent polynomial and the natural frequency chosen from the
/// noise-filtering requirement: k1 = a1*a2, eps = sqrt(k1)/omega_n,
/// k2 = eps^2 (a1 + a2).
pub fn gains_onefold<T: Float>(a1: T, a2: T, omega_n: T) -> Result<ObserverGainSet<T>, PolyError> {
    if !(a1 > T::zero() && a2 > T::zero() && omega_n > T::zero()) {
        return Err(PolyError::InvalidGains(
            "eigenvalues and natural frequency must be positive".into(),
        ));
    }
    let k1 = a1 * a2;
    let eps = k1.sqrt() / omega_n;
    if !(eps < T::one()) {
        return Err(PolyError::BandwidthTooLow {
            eps: eps.to_f64().unwrap_or(f64::NAN),
        });
    }
    let k2 = eps * eps * (a1 + a2);
    ObserverGainSet::new(2, 2, vec![k1, k2], eps)
}

/// Double-integrator gains placing the equivalent-polynomial eigenvalues at
/// -a1 and -a21 +/- a22 i: k1 = a1(a21^2 + a22^2),
/// k2 = a21^2 + a22^2 + 2 a1 a21, k3 = eps^3 (a1 + 2 a21). A purely real
/// triple is requested with a22 = 0.
pub fn gains_double<T: Float>(
    a1: T,
    a21: T,
    a22: T,
    eps: T,
) -> Result<ObserverGainSet<T>, PolyError> {
    if !(a1 > T::zero() && a21 > T::zero() && a22 >= T::zero()) {
        return Err(PolyError::InvalidGains(
            "a1 and a21 must be positive, a22 nonnegative".into(),
        ));
    }
    let pair = a21 * a21 + a22 * a22;
    let k1 = a1 * pair;
    let k2 = pair + T::of(2.0) * a1 * a21;
    let k3 = eps.powi(3) * (a1 + T::of(2.0) * a21);
    ObserverGainSet::new(3, 3, vec![k1, k2, k3], eps)
}

/// Differentiation-integration gains placing the equivalent-polynomial
/// eigenvalues at -a11 +/- a12 i and -a2: k1 = (a11^2 + a12^2) a2,
/// k2 = eps^2 (a11^2 + a12^2 + 2 a11 a2), k3 = 2 a11 + a2.
pub fn gains_diffint<T: Float>(
    a11: T,
    a12: T,
    a2: T,
    eps: T,
) -> Result<ObserverGainSet<T>, PolyError> {
    if !(a11 > T::zero() && a2 > T::zero() && a12 >= T::zero()) {
        return Err(PolyError::InvalidGains(
            "a11 and a2 must be positive, a12 nonnegative".into(),
        ));
    }
    let pair = a11 * a11 + a12 * a12;
    let k1 = pair * a2;
    let k2 = eps * eps * (pair + T::of(2.0) * a11 * a2);
    let k3 = T::of(2.0) * a11 + a2;
    ObserverGainSet::new(3, 2, vec![k1, k2, k3], eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type P = RealPoly<f64>;

    fn poly(c: &[f64]) -> P {
        P::from_f64s(c).unwrap()
    }

    fn max_real_part(p: &P) -> f64 {
        roots(p)
            .unwrap()
            .iter()
            .map(|r| r.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Simple deterministic generator for test sampling.
    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn routh_first_column_quadratic() {
        let t = routh_table(&poly(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(t.first_column(), vec![1.0, 3.0, 2.0]);
        assert!(!t.has_zero_pivot());
        assert_eq!(t.sign_changes(), 0);
    }

    #[test]
    fn routh_scaled_gain_cubic_positive_column() {
        // s^3 + 2 s^2 + (3 / eps^2) s + 0.1 with eps = 0.1
        let p = poly(&[1.0, 2.0, 300.0, 0.1]);
        let t = routh_table(&p).unwrap();
        assert_eq!(t.rows().len(), 4);
        assert!(t.first_column().iter().all(|&v| v > 0.0));
        // root oracle agrees
        assert!(max_real_part(&p) < 0.0);
    }

    #[test]
    fn routh_sign_changes_counts_rhp_pair() {
        let t = routh_table(&poly(&[1.0, -1.0, 1.0])).unwrap();
        assert_eq!(t.first_column(), vec![1.0, -1.0, 1.0]);
        assert_eq!(t.sign_changes(), 2);
    }

    #[test]
    fn routh_rejects_constant() {
        assert_eq!(
            routh_table(&poly(&[4.0])).unwrap_err(),
            PolyError::ConstantPolynomial
        );
    }

    #[test]
    fn routh_row_lengths_shrink() {
        let t = routh_table(&poly(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        for i in 2..t.rows().len() {
            assert!(t.rows()[i].len() <= t.rows()[i - 2].len());
        }
    }

    #[test]
    fn hurwitz_second_order_positive_gains() {
        for (k1, k2) in [(1.0, 1.0), (0.3, 7.0), (100.0, 0.01)] {
            assert!(is_hurwitz(&poly(&[1.0, k2, k1])).unwrap());
        }
    }

    #[test]
    fn hurwitz_rejects_boundary_palindrome() {
        let p = poly(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(!is_hurwitz(&p).unwrap());
        // root oracle: this polynomial has roots with nonnegative real part
        assert!(max_real_part(&p) > -1e-9);
    }

    #[test]
    fn hurwitz_first_order() {
        assert!(is_hurwitz(&poly(&[1.0, 1.0])).unwrap());
    }

    #[test]
    fn hurwitz_handles_negative_leading_coefficient() {
        // -(s + 1)(s + 2) has the same roots as (s + 1)(s + 2)
        assert!(is_hurwitz(&poly(&[-1.0, -3.0, -2.0])).unwrap());
    }

    #[test]
    fn roots_quadratic() {
        let mut rs: Vec<f64> = roots(&poly(&[1.0, 3.0, 2.0]))
            .unwrap()
            .iter()
            .map(|r| r.re)
            .collect();
        rs.sort_by(f64::total_cmp);
        assert_relative_eq!(rs[0], -2.0, max_relative = 1e-12);
        assert_relative_eq!(rs[1], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn roots_cubic_differentiator_gains() {
        // (s + 1)(s + 2)(s + 3) = s^3 + 6 s^2 + 11 s + 6
        let mut rs: Vec<f64> = roots(&poly(&[1.0, 6.0, 11.0, 6.0]))
            .unwrap()
            .iter()
            .map(|r| r.re)
            .collect();
        rs.sort_by(f64::total_cmp);
        for (got, want) in rs.iter().zip([-3.0, -2.0, -1.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn roots_imaginary_pair() {
        let rs = roots(&poly(&[1.0, 0.0, 1.0])).unwrap();
        let mut ims: Vec<f64> = rs.iter().map(|r| r.im).collect();
        ims.sort_by(f64::total_cmp);
        assert_relative_eq!(ims[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(ims[1], 1.0, epsilon = 1e-12);
        for r in rs {
            assert!(r.re.abs() < 1e-12);
        }
    }

    #[test]
    fn characteristic_poly_forms() {
        let g = ObserverGainSet::new(2, 2, vec![3.0f64, 5.0], 0.5).unwrap();
        assert_eq!(characteristic_poly(&g).coeffs(), &[1.0, 5.0 / 0.25, 3.0]);

        let g = ObserverGainSet::new(3, 2, vec![1.0f64, 2.0, 4.0], 0.5).unwrap();
        assert_eq!(characteristic_poly(&g).coeffs(), &[1.0, 4.0, 2.0 / 0.25, 1.0]);

        // p = 1: c(1) = 1 cancels the eps power entirely
        let g = ObserverGainSet::new(3, 1, vec![1.0f64, 2.0, 4.0], 0.5).unwrap();
        assert_eq!(characteristic_poly(&g).coeffs(), &[1.0, 4.0, 2.0, 1.0]);
    }

    #[test]
    fn lemma1_supported_cases() {
        let g = ObserverGainSet::new(3, 2, vec![0.1f64, 3.0, 2.0], 0.1).unwrap();
        assert!(lemma1_check(&g).unwrap());

        let g = ObserverGainSet::new(3, 3, vec![0.5f64, 2.5, 3.0], 0.4).unwrap();
        assert!(lemma1_check(&g).unwrap());

        let g = ObserverGainSet::new(3, 2, vec![100.0f64, 0.001, 0.1], 0.9).unwrap();
        assert!(!lemma1_check(&g).unwrap());
    }

    #[test]
    fn lemma1_unsupported_cases_error() {
        let g = ObserverGainSet::new(4, 2, vec![1.0f64, 1.0, 1.0, 1.0], 0.3).unwrap();
        assert_eq!(
            lemma1_check(&g).unwrap_err(),
            PolyError::UnsupportedObserverCase { n: 4, p: 2 }
        );
        for p in 2..=5 {
            let g = ObserverGainSet::new(5, p, vec![1.0f64; 5], 0.3).unwrap();
            assert!(matches!(
                lemma1_check(&g).unwrap_err(),
                PolyError::UnsupportedObserverCase { n: 5, .. }
            ));
        }
    }

    #[test]
    fn gains_onefold_worked_values() {
        let g = gains_onefold(100.0f64, 0.02, 8.0).unwrap();
        assert_relative_eq!(g.gain(1), 2.0, max_relative = 1e-12);
        assert!((g.eps() - 0.1768).abs() < 5e-4);
        assert!((g.gain(2) - 3.1256).abs() < 5e-4);

        let g = gains_onefold(1.0f64, 1.0, 10.0).unwrap();
        assert_relative_eq!(g.gain(1), 1.0, max_relative = 1e-12);
        assert_relative_eq!(g.eps(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(g.gain(2), 0.02, max_relative = 1e-12);
    }

    #[test]
    fn gains_onefold_rejects_low_bandwidth() {
        assert!(matches!(
            gains_onefold(100.0f64, 1.0, 2.0).unwrap_err(),
            PolyError::BandwidthTooLow { .. }
        ));
    }

    #[test]
    fn gains_onefold_round_trip() {
        let g = gains_onefold(100.0f64, 0.02, 8.0).unwrap();
        let mut rs: Vec<f64> = roots(&characteristic_poly(&g))
            .unwrap()
            .iter()
            .map(|r| r.re)
            .collect();
        rs.sort_by(f64::total_cmp);
        assert!((rs[0] + 100.0).abs() < 1e-9 * 100.0);
        assert!((rs[1] + 0.02).abs() < 1e-9);
    }

    #[test]
    fn gains_double_worked_values() {
        let g = gains_double(46.8218f64, 0.0266, 0.0999, 0.4).unwrap();
        assert!((g.gain(1) - 0.5).abs() < 1e-2);
        assert!((g.gain(2) - 2.5).abs() < 1e-2);
        assert!((g.gain(3) - 3.0).abs() < 1e-2);

        let g = gains_double(15.6190f64, 0.0030, 0.0800, 0.4).unwrap();
        assert!((g.gain(1) - 0.1).abs() < 1e-2);
        assert!((g.gain(2) - 0.1).abs() < 1e-2);
        assert!((g.gain(3) - 1.0).abs() < 1e-2);

        let g = gains_double(1.0f64, 1.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(g.gain(1), 1.0);
        assert_relative_eq!(g.gain(2), 3.0);
        assert_relative_eq!(g.gain(3), 0.375);
        assert!(lemma1_check(&g).unwrap());
    }

    #[test]
    fn gains_diffint_worked_values() {
        let g = gains_diffint(1.0f64, 0.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(g.gain(1), 1.0);
        assert_relative_eq!(g.gain(2), 0.75);
        assert_relative_eq!(g.gain(3), 3.0);
        assert!(lemma1_check(&g).unwrap());
    }

    #[test]
    fn gains_diffint_lemma_condition_always_holds() {
        let mut state = 9u64;
        for _ in 0..1000 {
            let a11 = 0.01 + 20.0 * lcg(&mut state);
            let a12 = 20.0 * lcg(&mut state);
            let a2 = 0.01 + 20.0 * lcg(&mut state);
            let eps = 0.01 + 0.98 * lcg(&mut state);
            let g = gains_diffint(a11, a12, a2, eps).unwrap();
            assert!(g.gain(2) > eps * eps * g.gain(1) / g.gain(3));
            assert!(lemma1_check(&g).unwrap());
        }
    }

    #[test]
    fn synthesis_round_trips_match_requested_eigenvalues() {
        let cases: Vec<(ObserverGainSet<f64>, Vec<Complex<f64>>)> = vec![
            (
                gains_onefold(3.0, 0.7, 9.0).unwrap(),
                vec![Complex::new(-3.0, 0.0), Complex::new(-0.7, 0.0)],
            ),
            (
                gains_double(5.0, 0.4, 1.3, 0.35).unwrap(),
                vec![
                    Complex::new(-5.0, 0.0),
                    Complex::new(-0.4, 1.3),
                    Complex::new(-0.4, -1.3),
                ],
            ),
            (
                gains_diffint(2.0, 3.0, 0.8, 0.25).unwrap(),
                vec![
                    Complex::new(-2.0, 3.0),
                    Complex::new(-2.0, -3.0),
                    Complex::new(-0.8, 0.0),
                ],
            ),
        ];
        for (g, mut wanted) in cases {
            let mut got = roots(&characteristic_poly(&g)).unwrap();
            let sort = |v: &mut Vec<Complex<f64>>| {
                v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)))
            };
            sort(&mut got);
            sort(&mut wanted);
            for (a, b) in got.iter().zip(&wanted) {
                let scale = b.norm().max(1.0);
                assert!(
                    (a - b).norm() < 1e-6 * scale,
                    "root {a} != requested {b} for gains {g:?}"
                );
            }
        }
    }

    #[test]
    fn root_scaling_law() {
        // The observer polynomial's roots are the equivalent polynomial's
        // roots divided by eps.
        let g = ObserverGainSet::new(3, 2, vec![0.1f64, 3.0, 2.0], 0.1).unwrap();
        let eq = characteristic_poly(&g);
        let unscaled = eq.with_scaled_roots(1.0 / g.eps());
        let mut a = roots(&eq).unwrap();
        let mut b = roots(&unscaled).unwrap();
        let sort = |v: &mut Vec<Complex<f64>>| {
            v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
        };
        sort(&mut a);
        sort(&mut b);
        for (ra, rb) in a.iter().zip(&b) {
            assert!((ra / g.eps() - rb).norm() <= 1e-7 * rb.norm().max(1.0));
        }
    }

    #[test]
    fn hurwitz_agrees_with_root_oracle_on_random_polys() {
        let mut state = 0xC0FFEE^7;
        let mut checked = 0;
        while checked < 300 {
            let degree = 1 + (lcg(&mut state) * 6.0) as usize;
            let coeffs: Vec<f64> = (0..=degree).map(|_| 10.0 * lcg(&mut state) - 5.0).collect();
            if coeffs[0].abs() < 1e-3 {
                continue;
            }
            let p = P::new(coeffs).unwrap();
            let max_re = max_real_part(&p);
            if max_re.abs() <= 1e-6 {
                continue; // borderline
            }
            assert_eq!(
                is_hurwitz(&p).unwrap(),
                max_re < 0.0,
                "disagreement on {:?} (max re = {max_re})",
                p.coeffs()
            );
            checked += 1;
        }
    }

    #[test]
    fn scaled_roots_polynomial_identity() {
        let p = poly(&[2.0, -3.0, 5.0, 1.0]);
        let q = p.with_scaled_roots(0.25);
        // q(s) = const * p(s / 0.25): check at a few points
        for x in [0.3, -1.7, 2.2] {
            let lhs = q.eval_real(x);
            let rhs = p.eval_real(x / 0.25) * 0.25f64.powi(p.degree() as i32) / p.leading()
                * q.leading();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }
}

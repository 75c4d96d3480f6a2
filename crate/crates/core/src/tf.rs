//! Real-coefficient polynomials, rational transfer functions, and frequency
//! grids.
//!
//! Everything downstream (bus models, certification sweeps, Nyquist contours)
//! is built on the three types here:
//!
//! * [`Polynomial`] — dense real coefficients in ascending order of power,
//! * [`RationalTF`] — a ratio of two polynomials kept in a normalized form
//!   (monic denominator, common roots cancelled),
//! * [`FrequencyGrid`] — a sorted set of positive angular frequencies used by
//!   every sweep-based check.
//!
//! Degrees stay small throughout the crate (a bus model never exceeds degree
//! six), so roots are computed from the companion matrix without any special
//! balancing and a couple of Newton polishing steps.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative threshold below which a trailing coefficient produced by
/// arithmetic is considered float dust and trimmed.
const COEFF_TRIM_REL: f64 = 1e-12;

/// Relative root-distance tolerance for pole/zero cancellation.
const CANCEL_REL: f64 = 1e-8;

/// Dense univariate polynomial with real coefficients.
///
/// Coefficients are stored in ascending order of power: `coeffs[k]` multiplies
/// `s^k`. The zero polynomial is the empty coefficient vector; any other
/// representation has a nonzero leading coefficient.
///
/// # Example
///
/// ```
/// use gridcert_core::tf::Polynomial;
/// use num_complex::Complex64;
///
/// // 2 + 3 s + s^2
/// let p = Polynomial::new(&[2.0, 3.0, 1.0]);
/// assert_eq!(p.degree(), Some(2));
/// assert_eq!(p.eval(Complex64::new(1.0, 0.0)), Complex64::new(6.0, 0.0));
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Build a polynomial from ascending coefficients, trimming exactly-zero
    /// leading (highest-power) entries.
    #[must_use]
    pub fn new(coeffs: &[f64]) -> Self {
        let mut c = coeffs.to_vec();
        while c.last() == Some(&0.0) {
            c.pop();
        }
        Self { coeffs: c }
    }

    /// The zero polynomial.
    #[must_use]
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// The constant polynomial `value`.
    #[must_use]
    pub fn constant(value: f64) -> Self {
        Self::new(&[value])
    }

    /// The monomial `s`.
    #[must_use]
    pub fn s() -> Self {
        Self::new(&[0.0, 1.0])
    }

    /// Ascending coefficients; empty for the zero polynomial.
    #[must_use]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    #[must_use]
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    /// True iff this is the zero polynomial.
    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Leading (highest-power) coefficient; zero for the zero polynomial.
    #[must_use]
    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Horner evaluation at a complex point.
    #[must_use]
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// Horner evaluation at a real point.
    #[must_use]
    pub fn eval_real(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// A scale for `|p(s)|` used in relative cancellation tests:
    /// `sum_k |c_k| |s|^k`.
    #[must_use]
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * r + c.abs();
        }
        acc
    }

    /// Sum of two polynomials.
    #[must_use]
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            c[i] += a;
        }
        for (i, &b) in other.coeffs.iter().enumerate() {
            c[i] += b;
        }
        Self::trimmed(c)
    }

    /// Difference `self - other`.
    #[must_use]
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Product of two polynomials.
    #[must_use]
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::trimmed(c)
    }

    /// Scalar multiple.
    #[must_use]
    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::zero();
        }
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Formal derivative.
    #[must_use]
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let c = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| a * k as f64)
            .collect();
        Self::trimmed(c)
    }

    /// Taylor shift: the polynomial `q(s) = p(s + a)`, computed exactly by
    /// repeated synthetic division.
    #[must_use]
    pub fn shifted(&self, a: f64) -> Self {
        let mut c = self.coeffs.clone();
        let n = c.len();
        // After pass i, c[i] holds the coefficient of (s)^i of p(s + a).
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let next = c[j + 1];
                c[j] += a * next;
            }
        }
        Self::trimmed(c)
    }

    /// All complex roots (with multiplicity), paired into exact conjugates.
    ///
    /// Degrees zero and `None` have no roots; degrees one and two use closed
    /// forms; higher degrees use the companion-matrix eigenvalues followed by
    /// Newton polishing.
    ///
    /// # Errors
    ///
    /// [`Error::RootSolverFailure`] if the eigenvalue iteration does not
    /// converge.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.degree().is_none() {
            return Ok(Vec::new());
        }
        // Drop float-dust leading coefficients so the companion matrix stays
        // well scaled.
        let max_c = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().unwrap().abs() < COEFF_TRIM_REL * max_c {
            coeffs.pop();
        }
        let deg = coeffs.len() - 1;
        let mut roots = match deg {
            0 => Vec::new(),
            1 => vec![Complex64::new(-coeffs[0] / coeffs[1], 0.0)],
            2 => quadratic_roots(coeffs[0], coeffs[1], coeffs[2]),
            _ => {
                let lead = coeffs[deg];
                let companion = DMatrix::from_fn(deg, deg, |r, c| {
                    if c == deg - 1 {
                        -coeffs[r] / lead
                    } else if r == c + 1 {
                        1.0
                    } else {
                        0.0
                    }
                });
                let schur = nalgebra::linalg::Schur::try_new(companion, 1e-14, 200)
                    .ok_or(Error::RootSolverFailure { degree: deg })?;
                let eig = schur.complex_eigenvalues();
                let mut rs: Vec<Complex64> = eig.iter().copied().collect();
                for r in &mut rs {
                    newton_polish(&coeffs, r);
                }
                rs
            }
        };
        symmetrize_conjugates(&mut roots);
        roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        Ok(roots)
    }

    /// Reconstruct a real polynomial `lead * prod (s - r_k)` from roots that
    /// come in exact conjugate pairs.
    #[must_use]
    pub fn from_roots(lead: f64, roots: &[Complex64]) -> Self {
        let mut acc = Self::constant(lead);
        let mut pending: Vec<Complex64> = Vec::new();
        for &r in roots {
            if r.im == 0.0 {
                acc = acc.mul(&Self::new(&[-r.re, 1.0]));
            } else if let Some(pos) = pending.iter().position(|p| p.conj() == r) {
                let p = pending.swap_remove(pos);
                // (s - p)(s - conj p) = s^2 - 2 Re(p) s + |p|^2
                acc = acc.mul(&Self::new(&[p.norm_sqr(), -2.0 * p.re, 1.0]));
            } else {
                pending.push(r);
            }
        }
        // Unpaired complex roots should not occur for conjugate-symmetric
        // inputs; fold them in pairwise-with-conjugate to stay real.
        for p in pending {
            acc = acc.mul(&Self::new(&[p.norm_sqr(), -2.0 * p.re, 1.0]));
        }
        acc
    }

    fn trimmed(mut c: Vec<f64>) -> Self {
        let max_c = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while let Some(&last) = c.last() {
            if last == 0.0 || last.abs() < COEFF_TRIM_REL * max_c {
                c.pop();
            } else {
                break;
            }
        }
        Self { coeffs: c }
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 if a == 1.0 => write!(f, "s")?,
                1 => write!(f, "{a} s")?,
                _ if a == 1.0 => write!(f, "s^{k}")?,
                _ => write!(f, "{a} s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

/// Stable quadratic formula for `c0 + c1 s + c2 s^2`.
fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<Complex64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc >= 0.0 {
        // Avoid cancellation: compute the larger-magnitude root first.
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        let (r1, r2) = if q == 0.0 {
            (0.0, 0.0)
        } else {
            (q / c2, c0 / q)
        };
        vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -c1 / (2.0 * c2);
        let im = (-disc).sqrt() / (2.0 * c2.abs());
        vec![Complex64::new(re, -im), Complex64::new(re, im)]
    }
}

/// A couple of Newton steps on a root estimate, accepted only when they
/// shrink the residual.
fn newton_polish(coeffs: &[f64], r: &mut Complex64) {
    let p = Polynomial::new(coeffs);
    let dp = p.derivative();
    for _ in 0..3 {
        let f = p.eval(*r);
        let df = dp.eval(*r);
        if df.norm() == 0.0 {
            return;
        }
        let cand = *r - f / df;
        if p.eval(cand).norm() < f.norm() {
            *r = cand;
        } else {
            return;
        }
    }
}

/// Force near-conjugate root pairs into exact conjugates and snap
/// near-real roots onto the real axis.
fn symmetrize_conjugates(roots: &mut [Complex64]) {
    let n = roots.len();
    for r in roots.iter_mut() {
        if r.im.abs() <= 1e-9 * (1.0 + r.norm()) {
            r.im = 0.0;
        }
    }
    let mut used = vec![false; n];
    for i in 0..n {
        if roots[i].im <= 0.0 || used[i] {
            continue;
        }
        // Nearest unused root to the mirror image.
        let target = roots[i].conj();
        let mut best: Option<(usize, f64)> = None;
        for (j, &r) in roots.iter().enumerate() {
            if j == i || used[j] || r.im > 0.0 {
                continue;
            }
            let d = (r - target).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            if d <= 1e-6 * (1.0 + roots[i].norm()) {
                let avg = 0.5 * (roots[i] + roots[j].conj());
                roots[i] = avg;
                roots[j] = avg.conj();
                used[i] = true;
                used[j] = true;
            }
        }
    }
}

/// Rational transfer function `num(s) / den(s)` in normalized form.
///
/// Normalization performed by every constructor and arithmetic operation:
///
/// * common roots of numerator and denominator within a relative distance of
///   `1e-8` are cancelled,
/// * the denominator is made monic (its leading coefficient is one).
///
/// # Example
///
/// ```
/// use gridcert_core::tf::{Polynomial, RationalTF};
///
/// // (s + 1) / (s + 1) normalizes to the constant 1.
/// let g = RationalTF::new(Polynomial::new(&[1.0, 1.0]), Polynomial::new(&[1.0, 1.0])).unwrap();
/// assert_eq!(g.num().coeffs(), &[1.0]);
/// assert_eq!(g.den().coeffs(), &[1.0]);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
}

impl RationalTF {
    /// Build and normalize a transfer function.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] if the denominator is the zero polynomial
    /// or any coefficient is not finite; [`Error::RootSolverFailure`] if
    /// cancellation cannot factor one of the polynomials.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidParameter(
                "transfer function denominator is zero".into(),
            ));
        }
        let finite = |p: &Polynomial| p.coeffs().iter().all(|c| c.is_finite());
        if !finite(&num) || !finite(&den) {
            return Err(Error::InvalidParameter(
                "transfer function coefficients must be finite".into(),
            ));
        }
        let (num, den) = cancel_common_roots(num, den)?;
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    /// The constant transfer function `value`.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Polynomial::constant(value), Polynomial::constant(1.0))
    }

    /// Numerator (denominator is monic after normalization).
    #[must_use]
    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    /// Monic denominator.
    #[must_use]
    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    /// True iff the numerator is identically zero.
    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Evaluate at a complex point.
    ///
    /// # Errors
    ///
    /// [`Error::EvaluationAtPole`] when the denominator magnitude falls below
    /// `1e-14` times its coefficient scale at `s`, i.e. the point is
    /// numerically indistinguishable from a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval(s);
        let scale = self.den.eval_scale(s);
        if d.norm() <= 1e-14 * scale {
            return Err(Error::EvaluationAtPole { s });
        }
        Ok(self.num.eval(s) / d)
    }

    /// Evaluate along the imaginary axis at every grid frequency.
    ///
    /// # Errors
    ///
    /// Propagates [`Error::EvaluationAtPole`] with the offending frequency.
    pub fn freq_response(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        grid.points()
            .iter()
            .map(|&w| self.eval(Complex64::new(0.0, w)))
            .collect()
    }

    /// Sum of two transfer functions.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        Self::new(num, self.den.mul(&other.den))
    }

    /// Difference `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.mul_scalar(-1.0))
    }

    /// Product of two transfer functions.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        Self::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    /// Scalar multiple.
    #[must_use]
    pub fn mul_scalar(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Multiplicative inverse `den / num`.
    ///
    /// # Errors
    ///
    /// [`Error::NotInvertible`] for a zero numerator.
    pub fn inv(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::NotInvertible);
        }
        Self::new(self.den.clone(), self.num.clone())
    }

    /// Negative feedback interconnection `self / (1 + self * other)`.
    ///
    /// # Errors
    ///
    /// [`Error::DegenerateFeedback`] when the closed-loop denominator is
    /// identically zero.
    pub fn feedback(&self, other: &Self) -> Result<Self> {
        let den = self.den.mul(&other.den).add(&self.num.mul(&other.num));
        if den.is_zero() {
            return Err(Error::DegenerateFeedback);
        }
        Self::new(self.num.mul(&other.den), den)
    }

    /// Poles: roots of the normalized denominator.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    /// Zeros: roots of the numerator.
    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        self.num.roots()
    }

    /// Relative degree `deg(den) - deg(num)`; negative for improper
    /// functions.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for the zero transfer function, whose
    /// relative degree is undefined.
    pub fn relative_degree(&self) -> Result<i64> {
        let dn = self
            .num
            .degree()
            .ok_or_else(|| Error::InvalidParameter("relative degree of the zero function".into()))?;
        let dd = self.den.degree().expect("denominator is nonzero");
        Ok(dd as i64 - dn as i64)
    }

    /// The shifted function `g(s - sigma)` (used by strict positive-real
    /// tests).
    pub fn shifted(&self, sigma: f64) -> Result<Self> {
        Self::new(self.num.shifted(-sigma), self.den.shifted(-sigma))
    }
}

impl std::fmt::Display for RationalTF {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Cancel numerator/denominator roots that agree within a relative distance
/// of [`CANCEL_REL`]. Polynomials are rebuilt from roots only when a
/// cancellation actually occurs, so exact coefficients survive untouched in
/// the common case.
fn cancel_common_roots(num: Polynomial, den: Polynomial) -> Result<(Polynomial, Polynomial)> {
    if num.is_zero() || num.degree() == Some(0) || den.degree() == Some(0) {
        return Ok((num, den));
    }
    let nr = num.roots()?;
    let dr = den.roots()?;
    let mut den_used = vec![false; dr.len()];
    let mut num_keep = Vec::new();
    let mut cancelled = false;
    for &zn in &nr {
        let mut matched = None;
        for (j, &zd) in dr.iter().enumerate() {
            if den_used[j] {
                continue;
            }
            if (zn - zd).norm() <= CANCEL_REL * (1.0 + zn.norm().max(zd.norm())) {
                matched = Some(j);
                break;
            }
        }
        match matched {
            Some(j) => {
                den_used[j] = true;
                cancelled = true;
            }
            None => num_keep.push(zn),
        }
    }
    if !cancelled {
        return Ok((num, den));
    }
    let den_keep: Vec<Complex64> = dr
        .iter()
        .zip(&den_used)
        .filter(|(_, &u)| !u)
        .map(|(&z, _)| z)
        .collect();
    Ok((
        Polynomial::from_roots(num.leading(), &num_keep),
        Polynomial::from_roots(den.leading(), &den_keep),
    ))
}

/// Sorted positive angular frequencies for sweep-based checks.
///
/// The default grid used across the crate is 2000 logarithmically spaced
/// points spanning `[1e-4, 1e5]` rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    /// Number of points on the default grid.
    pub const DEFAULT_POINTS: usize = 2000;
    /// Lower edge of the default grid in rad/s.
    pub const DEFAULT_MIN: f64 = 1e-4;
    /// Upper edge of the default grid in rad/s.
    pub const DEFAULT_MAX: f64 = 1e5;

    /// Build a grid from explicit frequencies.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] if the list is empty, contains a
    /// nonpositive or nonfinite value, or is not strictly increasing.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty frequency grid".into()));
        }
        for &w in &points {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "grid frequency {w} is not a positive finite number"
                )));
            }
        }
        if points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(
                "grid frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Logarithmically spaced grid with `n >= 2` points over `[min, max]`.
    pub fn log_spaced(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(
                "a log-spaced grid needs at least two points".into(),
            ));
        }
        if !(min.is_finite() && max.is_finite()) || min <= 0.0 || min >= max {
            return Err(Error::InvalidParameter(format!(
                "invalid log-spaced grid bounds [{min}, {max}]"
            )));
        }
        let (l0, l1) = (min.ln(), max.ln());
        let pts = (0..n)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
            .collect();
        Self::new(pts)
    }

    /// The default certification grid: 2000 log-spaced points over
    /// `[1e-4, 1e5]` rad/s.
    #[must_use]
    pub fn default_grid() -> Self {
        Self::log_spaced(Self::DEFAULT_MIN, Self::DEFAULT_MAX, Self::DEFAULT_POINTS)
            .expect("default grid parameters are valid")
    }

    /// The grid frequencies, strictly increasing.
    #[must_use]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of grid points.
    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True iff the grid is empty (never, by construction).
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest frequency.
    #[must_use]
    pub fn min(&self) -> f64 {
        self.points[0]
    }

    /// Largest frequency.
    #[must_use]
    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomial_eval_matches_horner_by_hand() {
        let p = Polynomial::new(&[2.0, 3.0, 1.0]); // 2 + 3s + s^2
        assert_eq!(p.eval_real(2.0), 12.0);
        let v = p.eval(c(0.0, 1.0)); // 2 + 3j - 1
        assert_abs_diff_eq!(v.re, 1.0);
        assert_abs_diff_eq!(v.im, 3.0);
    }

    #[test]
    fn eval_of_first_order_lag_at_j_matches_hand_division() {
        // 1/(s + 0.1) at s = j: conjugate trick gives (0.1 - j)/1.01.
        let g = RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[0.1, 1.0])).unwrap();
        let v = g.eval(c(0.0, 1.0)).unwrap();
        assert_relative_eq!(v.re, 0.1 / 1.01, max_relative = 1e-14);
        assert_relative_eq!(v.im, -1.0 / 1.01, max_relative = 1e-14);
    }

    #[test]
    fn eval_at_dc_of_first_order_lag() {
        let g = RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[0.1, 1.0])).unwrap();
        assert_relative_eq!(g.eval(c(0.0, 0.0)).unwrap().re, 10.0, max_relative = 1e-14);
    }

    #[test]
    fn eval_at_pole_is_an_error() {
        let g = RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[0.1, 1.0])).unwrap();
        assert!(matches!(
            g.eval(c(-0.1, 0.0)),
            Err(Error::EvaluationAtPole { .. })
        ));
    }

    #[test]
    fn identical_factors_cancel() {
        let f = Polynomial::new(&[1.0, 1.0]);
        let g = RationalTF::new(f.clone(), f).unwrap();
        let v = g.eval(c(5.0, 2.0)).unwrap();
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        assert_eq!(g.relative_degree().unwrap(), 0);
    }

    #[test]
    fn near_coincident_factors_cancel_within_tolerance() {
        // Roots at -1 and -(1 + 3e-9) differ by less than the 1e-8 relative
        // cancellation tolerance.
        let num = Polynomial::new(&[1.0, 1.0]);
        let den = Polynomial::new(&[1.0 + 3e-9, 1.0]).mul(&Polynomial::new(&[2.0, 1.0]));
        let g = RationalTF::new(num, den).unwrap();
        assert_eq!(g.num().degree(), Some(0));
        assert_eq!(g.den().degree(), Some(1));
    }

    #[test]
    fn feedback_with_constant_gain_shifts_the_pole() {
        // 1/(s+0.1) with unit feedback gain K: closed loop 1/(s + 0.1 + K).
        let g = RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[0.1, 1.0])).unwrap();
        let k = RationalTF::constant(1.0).unwrap();
        let cl = g.feedback(&k).unwrap();
        assert_eq!(cl.num().coeffs(), &[1.0]);
        assert_eq!(cl.den().coeffs(), &[1.1, 1.0]);
    }

    #[test]
    fn degenerate_feedback_is_detected() {
        // a = s (num [0,1]), b = -1/s: 1 + a b = 0 identically.
        let a = RationalTF::new(Polynomial::s(), Polynomial::constant(1.0)).unwrap();
        let b = RationalTF::new(Polynomial::constant(-1.0), Polynomial::s()).unwrap();
        assert!(matches!(a.feedback(&b), Err(Error::DegenerateFeedback)));
    }

    #[test]
    fn quadratic_poles_match_the_quadratic_formula() {
        // s^2 + 1.1 s + 2: roots -0.55 +/- j sqrt(2 - 0.3025).
        let g = RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[2.0, 1.1, 1.0]))
            .unwrap();
        let mut poles = g.poles().unwrap();
        poles.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        let im = (2.0f64 - 0.3025).sqrt();
        assert_relative_eq!(poles[0].re, -0.55, max_relative = 1e-12);
        assert_relative_eq!(poles[0].im, -im, max_relative = 1e-12);
        assert_relative_eq!(poles[1].im, im, max_relative = 1e-12);
    }

    #[test]
    fn constant_has_no_poles() {
        let g = RationalTF::constant(5.0).unwrap();
        assert!(g.poles().unwrap().is_empty());
    }

    #[test]
    fn sextic_roots_from_companion_matrix_are_polished() {
        // prod (s + k), k = 1..6. Roots are exactly -1..-6.
        let mut p = Polynomial::constant(1.0);
        for k in 1..=6 {
            p = p.mul(&Polynomial::new(&[k as f64, 1.0]));
        }
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 6);
        for (r, expect) in roots.iter().zip([-6.0, -5.0, -4.0, -3.0, -2.0, -1.0]) {
            assert_relative_eq!(r.re, expect, max_relative = 1e-9);
            assert_abs_diff_eq!(r.im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn complex_roots_come_out_as_exact_conjugate_pairs() {
        // (s^2 + 2s + 5)(s^2 + 0.2 s + 1): roots -1 +/- 2j, -0.1 +/- ~j.
        let p = Polynomial::new(&[5.0, 2.0, 1.0]).mul(&Polynomial::new(&[1.0, 0.2, 1.0]));
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 4);
        for r in &roots {
            assert!(
                roots.iter().any(|q| *q == r.conj()),
                "conjugate of {r} missing"
            );
        }
    }

    #[test]
    fn relative_degree_signs() {
        let strictly_proper =
            RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[1.0, 1.0 / 30.0]))
                .unwrap();
        assert_eq!(strictly_proper.relative_degree().unwrap(), 1);

        // K + Knu s with K = 1, Knu = 2: improper, relative degree -1.
        let improper =
            RationalTF::new(Polynomial::new(&[1.0, 2.0]), Polynomial::constant(1.0)).unwrap();
        assert_eq!(improper.relative_degree().unwrap(), -1);
    }

    #[test]
    fn taylor_shift_is_exact_for_small_degrees() {
        // p(s) = s^2 + 3s + 2, p(s + 1) = s^2 + 5s + 6.
        let p = Polynomial::new(&[2.0, 3.0, 1.0]);
        assert_eq!(p.shifted(1.0).coeffs(), &[6.0, 5.0, 1.0]);
        // Shifting back is the identity.
        assert_eq!(p.shifted(1.0).shifted(-1.0).coeffs(), p.coeffs());
    }

    #[test]
    fn grid_constructors_validate_their_input() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![2.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, f64::NAN]).is_err());
        assert!(FrequencyGrid::log_spaced(1.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::log_spaced(1e-4, 1e5, 1).is_err());

        let g = FrequencyGrid::default_grid();
        assert_eq!(g.len(), 2000);
        assert_relative_eq!(g.min(), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(g.max(), 1e5, max_relative = 1e-12);
    }

    #[test]
    fn freq_response_of_integrator_is_minus_j_over_omega() {
        let g = RationalTF::new(Polynomial::constant(1.0), Polynomial::s()).unwrap();
        let grid = FrequencyGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
        let resp = g.freq_response(&grid).unwrap();
        for (&w, v) in grid.points().iter().zip(&resp) {
            assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
            assert_relative_eq!(v.im, -1.0 / w, max_relative = 1e-14);
        }
    }

    #[test]
    fn inv_is_an_involution_and_rejects_zero() {
        let g = RationalTF::new(Polynomial::new(&[1.0, 2.0]), Polynomial::new(&[3.0, 4.0, 1.0]))
            .unwrap();
        let back = g.inv().unwrap().inv().unwrap();
        for (a, b) in g.num().coeffs().iter().zip(back.num().coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        let zero = RationalTF::new(Polynomial::zero(), Polynomial::s()).unwrap();
        assert!(matches!(zero.inv(), Err(Error::NotInvertible)));
    }
}

//! Decentralized stability certification.
//!
//! The network-level stability question is reduced to one frequency-domain
//! test per bus: pick a scalar filter `h` with `s·h(s)` positive real, then
//! require
//!
//! ```text
//! Re{ h(jw) ( (gamma/2) jw + p(jw) ) } > 0   for all w,
//! ```
//!
//! where `p` is the bus response and `gamma` is the coupling budget the bus
//! reserves. A bus passing the test at `gamma` tolerates any network
//! attachment whose aggregate line susceptance stays below `1/gamma`, no
//! matter what the rest of the network does — which is what makes the
//! procedure plug-and-play: admission of a new component needs only its own
//! sweep and its own line ratings.
//!
//! The module provides the positive-real / strictly-positive-real predicates
//! ([`is_pr`], [`is_spr`]), the certified per-bus margin sweep
//! ([`certify_bus`]) with an analytic high-frequency tail bound, the minimal
//! budget search ([`min_gamma`]), the admission rule ([`admit`]), and a
//! closed-form fast path ([`first_order_protocol`]) for buses whose response
//! has been bracketed by a first-order surrogate `a/(s+b)` with envelope
//! radius `eps` ([`envelope_check`]).

use num_complex::Complex64;

use crate::bus::{BusModel, BusStability, TailEnvelope};
use crate::error::{Error, Result};
use crate::tf::{FrequencyGrid, Polynomial, RationalTF};

/// Default shift used by [`is_spr`]: strict positive realness is decided by
/// testing positive realness of `g(s - shift)`.
pub const DEFAULT_SPR_SHIFT: f64 = 1e-4;

/// Lower end of every coupling-budget bisection.
pub const GAMMA_FLOOR: f64 = 1e-6;

/// Upper end of every coupling-budget bisection; failing here means the bus
/// cannot be certified at any budget.
pub const GAMMA_CAP: f64 = 1e6;

/// Default relative tolerance for the budget bisections.
pub const DEFAULT_GAMMA_TOL: f64 = 1e-4;

/// Real part of a pole must exceed this (relative) threshold to count as
/// strictly right-half-plane rather than on the imaginary axis.
const AXIS_TOL: f64 = 1e-9;

/// Number of local minima refined after a sweep.
const REFINE_CANDIDATES: usize = 8;

/// Ternary-search iterations per refined minimum.
const REFINE_ITERS: usize = 24;

/// Samples appended per decade when a sweep has to be extended to close its
/// high-frequency tail.
const EXTENSION_SAMPLES: usize = 128;

/// Maximum number of decades a sweep may be extended past the grid.
const MAX_EXTENSIONS: usize = 8;

// ---------------------------------------------------------------------------
// The certification filter
// ---------------------------------------------------------------------------

/// The scalar certification filter `h`.
///
/// Validity requires `h` stable and proper, `s·h(s)` positive real, and
/// relative degree exactly one, so that the sweep can be closed at high
/// frequency: `(s·h)(jw) -> kappa > 0` while `|h(jw)| = O(1/w)`.
///
/// # Example
///
/// ```
/// use gridcert_core::cert::HFilter;
///
/// let h = HFilter::canonical(30.0).unwrap();
/// assert_eq!(h.omega0(), Some(30.0));
/// assert_eq!(h.kappa(), 30.0);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct HFilter {
    tf: RationalTF,
    omega0: Option<f64>,
}

impl HFilter {
    /// The canonical one-pole filter `h(s) = 1/(s/omega0 + 1)`.
    ///
    /// Its magnitude satisfies `|h(jw)| · sqrt(1 + w^2/omega0^2) = 1`
    /// exactly, which calibrates envelope radii in the first-order protocol.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] unless `omega0` is positive and finite.
    pub fn canonical(omega0: f64) -> Result<Self> {
        if !omega0.is_finite() || omega0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "filter pole omega0 = {omega0} must be a positive finite number"
            )));
        }
        let tf = RationalTF::new(
            Polynomial::constant(omega0),
            Polynomial::new(&[omega0, 1.0]),
        )?;
        Ok(Self {
            tf,
            omega0: Some(omega0),
        })
    }

    /// Wrap an arbitrary rational filter after checking the admissibility
    /// conditions (stability, relative degree one, `s·h` positive real).
    ///
    /// # Errors
    ///
    /// [`Error::InvalidDesign`] when a condition fails;
    /// [`Error::Inconclusive`] when the positive-real sweep of `s·h` cannot
    /// decide at the grid resolution.
    pub fn from_tf(tf: RationalTF, grid: &FrequencyGrid) -> Result<Self> {
        if tf.is_zero() {
            return Err(Error::InvalidDesign("filter must be nonzero".into()));
        }
        for pole in tf.poles()? {
            if pole.re >= -AXIS_TOL * (1.0 + pole.norm()) {
                return Err(Error::InvalidDesign(format!(
                    "filter pole at {pole} is not strictly in the left half-plane"
                )));
            }
        }
        if tf.relative_degree()? != 1 {
            return Err(Error::InvalidDesign(
                "filter must have relative degree one".into(),
            ));
        }
        if tf.num().leading() / tf.den().leading() <= 0.0 {
            return Err(Error::InvalidDesign(
                "filter high-frequency gain s*h(s) must be positive".into(),
            ));
        }
        let s_over_one = RationalTF::new(Polynomial::s(), Polynomial::constant(1.0))?;
        let sh = tf.mul(&s_over_one)?;
        if !is_pr(&sh, grid, 1e-6)? {
            return Err(Error::InvalidDesign(
                "s*h(s) is not positive real".into(),
            ));
        }
        Ok(Self { tf, omega0: None })
    }

    /// The wrapped transfer function.
    #[must_use]
    pub fn tf(&self) -> &RationalTF {
        &self.tf
    }

    /// Pole frequency when the canonical form was used.
    #[must_use]
    pub fn omega0(&self) -> Option<f64> {
        self.omega0
    }

    /// High-frequency gain `kappa = lim s·h(s)`, positive for a valid
    /// filter.
    #[must_use]
    pub fn kappa(&self) -> f64 {
        self.tf.num().leading() / self.tf.den().leading()
    }
}

// ---------------------------------------------------------------------------
// Positive realness
// ---------------------------------------------------------------------------

/// Positive-real test for a real-coefficient rational function.
///
/// The verdict combines structural checks with a refined imaginary-axis
/// sweep:
///
/// - no pole strictly in the right half-plane;
/// - imaginary-axis poles simple with real positive residues;
/// - a simple pole at infinity (relative degree -1) allowed only with a
///   positive leading coefficient ratio; anything more improper fails;
/// - the asymptotic sign of `Re{g(jw)}`, read off the leading coefficient of
///   the even polynomial `E(w^2) = Re{num(jw) · conj(den(jw))}`, must be
///   nonnegative;
/// - `Re{g(jw)} >= -tol` along the grid after local refinement.
///
/// Lossless functions with `Re{g(jw)} = 0` identically (such as `1/s`) pass:
/// the sweep only rejects real parts below numerical dust. Minima inside
/// `(-tol, -dust)` are reported as inconclusive rather than guessed.
///
/// # Errors
///
/// [`Error::Inconclusive`] when the swept minimum falls between the failure
/// threshold and numerical dust; [`Error::RootSolverFailure`] from the pole
/// computation.
///
/// # Example
///
/// ```
/// use gridcert_core::cert::is_pr;
/// use gridcert_core::tf::{FrequencyGrid, Polynomial, RationalTF};
///
/// let grid = FrequencyGrid::default_grid();
/// let lag = RationalTF::new(Polynomial::constant(1.0), Polynomial::new(&[1.0, 1.0])).unwrap();
/// assert!(is_pr(&lag, &grid, 1e-6).unwrap());
/// ```
pub fn is_pr(g: &RationalTF, grid: &FrequencyGrid, tol: f64) -> Result<bool> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be a positive finite number"
        )));
    }
    if g.is_zero() {
        // The zero function sits on the boundary of the definition; treat it
        // as (non-strictly) positive real.
        return Ok(true);
    }

    // Pole at infinity.
    let rel = g.relative_degree()?;
    if rel < -1 {
        return Ok(false);
    }
    if rel == -1 && g.num().leading() / g.den().leading() <= 0.0 {
        return Ok(false);
    }

    // Finite poles.
    let poles = g.poles()?;
    let mut axis_poles = Vec::new();
    for &p in &poles {
        let scale = 1.0 + p.norm();
        if p.re > AXIS_TOL * scale {
            return Ok(false);
        }
        if p.re.abs() <= AXIS_TOL * scale {
            axis_poles.push(p);
        }
    }
    let den_deriv = g.den().derivative();
    for &p in &axis_poles {
        let near = poles
            .iter()
            .filter(|q| (*q - p).norm() <= 1e-6 * (1.0 + p.norm()))
            .count();
        if near > 1 {
            // Repeated imaginary-axis pole.
            return Ok(false);
        }
        let dprime = den_deriv.eval(p);
        if dprime.norm() <= 1e-12 * den_deriv.eval_scale(p).max(f64::MIN_POSITIVE) {
            return Ok(false);
        }
        let residue = g.num().eval(p) / dprime;
        if residue.re <= 0.0 || residue.im.abs() > 1e-6 * (1.0 + residue.norm()) {
            return Ok(false);
        }
    }

    // Asymptotic sign of the real part.
    match leading_even_coefficient(g.num(), g.den()) {
        Some(lead) if lead < 0.0 => return Ok(false),
        _ => {}
    }

    // Swept real part with refinement near minima. Points at (or near) the
    // vetted axis poles are skipped; the residue check above covers them.
    let mut min_re = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut evaluated = 0usize;
    let mut omegas: Vec<f64> = Vec::with_capacity(grid.len() + 1);
    omegas.push(0.0);
    omegas.extend_from_slice(grid.points());
    let mut res: Vec<Option<f64>> = Vec::with_capacity(omegas.len());
    for &w in &omegas {
        match g.eval(Complex64::new(0.0, w)) {
            Ok(v) => {
                min_re = min_re.min(v.re);
                max_abs = max_abs.max(v.norm());
                evaluated += 1;
                res.push(Some(v.re));
            }
            Err(Error::EvaluationAtPole { .. }) => res.push(None),
            Err(e) => return Err(e),
        }
    }
    if evaluated < 2 {
        return Err(Error::Inconclusive {
            what: "positive-real sweep (grid almost entirely on poles)".into(),
            margin: 0.0,
        });
    }
    let mut re_of = |w: f64| -> Result<f64> {
        match g.eval(Complex64::new(0.0, w)) {
            Ok(v) => Ok(v.re),
            Err(Error::EvaluationAtPole { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    min_re = min_re.min(refine_sweep_minima(&mut re_of, &omegas, &res)?);

    let dust = 1e-12 * (1.0 + max_abs);
    if min_re >= -dust {
        Ok(true)
    } else if min_re <= -tol {
        Ok(false)
    } else {
        Err(Error::Inconclusive {
            what: "positive-real sweep".into(),
            margin: min_re,
        })
    }
}

/// Strict positive-real test: positive realness of the shifted function
/// `g(s - shift)`.
///
/// The shift turns imaginary-axis poles into right-half-plane poles, so a
/// lossless function such as `1/s` is positive real but not strictly so.
///
/// # Errors
///
/// As [`is_pr`], plus [`Error::InvalidParameter`] for a nonpositive shift.
pub fn is_spr(g: &RationalTF, grid: &FrequencyGrid, tol: f64, shift: f64) -> Result<bool> {
    if !shift.is_finite() || shift <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "shift {shift} must be a positive finite number"
        )));
    }
    let shifted = g.shifted(shift)?;
    is_pr(&shifted, grid, tol)
}

/// Leading coefficient of the even polynomial
/// `E(x) = Re{num(jw) conj(den(jw))}` with `x = w^2`, whose sign at large
/// `x` is the sign of `Re{g(jw)}` as `w -> inf`.
///
/// Returns `None` when `E` vanishes identically (a lossless function).
fn leading_even_coefficient(num: &Polynomial, den: &Polynomial) -> Option<f64> {
    let n = num.coeffs();
    let d = den.coeffs();
    let max_t = (n.len() - 1 + d.len() - 1) / 2;
    for t in (0..=max_t).rev() {
        let mut e = 0.0f64;
        let mut scale = 0.0f64;
        for (k, &nk) in n.iter().enumerate() {
            let m = 2 * t;
            if m < k {
                continue;
            }
            let m = m - k;
            if m >= d.len() {
                continue;
            }
            let sign = if (m + t) % 2 == 0 { 1.0 } else { -1.0 };
            e += sign * nk * d[m];
            scale += (nk * d[m]).abs();
        }
        if e.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Some(e);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Sweep refinement
// ---------------------------------------------------------------------------

/// Refine the smallest local minima of a sampled function by ternary search
/// and return the best value found.
///
/// `values[i]` is `f(omegas[i])`, with `None` marking skipped samples.
fn refine_sweep_minima(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    omegas: &[f64],
    values: &[Option<f64>],
) -> Result<f64> {
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for i in 0..values.len() {
        let Some(v) = values[i] else { continue };
        let left = if i > 0 { values[i - 1] } else { None };
        let right = if i + 1 < values.len() {
            values[i + 1]
        } else {
            None
        };
        let is_min = left.is_none_or(|l| v <= l) && right.is_none_or(|r| v <= r);
        if is_min {
            candidates.push((v, i));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(REFINE_CANDIDATES);

    let mut best = f64::INFINITY;
    for &(v, i) in &candidates {
        best = best.min(v);
        let a = if i > 0 { omegas[i - 1] } else { omegas[i] };
        let b = if i + 1 < omegas.len() {
            omegas[i + 1]
        } else {
            omegas[i]
        };
        if b <= a {
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..REFINE_ITERS {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            let f1 = f(m1)?;
            let f2 = f(m2)?;
            best = best.min(f1).min(f2);
            if f1 <= f2 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Certified margin sweeps
// ---------------------------------------------------------------------------

/// Outcome of a certified margin sweep: the refined minimum of
/// `Re{h(jw)((gamma/2) jw + p(jw))}`, the frequency where it was attained,
/// the decision tolerance, and how far the sweep (grid plus analytic tail
/// bound) reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprMargin {
    /// Minimum swept real part (or the analytic tail floor, if smaller).
    pub margin: f64,
    /// Frequency attaining the minimum, rad/s.
    pub frequency: f64,
    /// Decision tolerance: `1e-6 · (1 + max |h·p|)` over the sweep — the
    /// budget-free part of the response, so pass/fail stays monotone in
    /// `gamma`.
    pub tolerance: f64,
    /// Highest frequency covered before the analytic tail bound takes over.
    pub checked_to: f64,
}

impl SprMargin {
    /// True when the margin clears the tolerance, i.e. the bus is certified
    /// at the swept budget.
    #[must_use]
    pub fn passes(&self) -> bool {
        self.margin > self.tolerance
    }
}

/// Coefficient bound: `sup_{v >= w} |p(jv)| / v^deg <= upper_coef(p, w)`.
///
/// Each term `|c_k| v^{k-deg}` has a nonpositive exponent and so is largest
/// at `v = w`.
fn upper_coef(p: &Polynomial, w: f64) -> f64 {
    let deg = p.degree().expect("nonzero polynomial") as i32;
    p.coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * w.powi(k as i32 - deg))
        .sum()
}

/// Coefficient bound: `inf_{v >= w} |p(jv)| / v^deg >= lower_coef(p, w)`,
/// possibly nonpositive when `w` is too small for the leading term to
/// dominate.
fn lower_coef(p: &Polynomial, w: f64) -> f64 {
    let deg = p.degree().expect("nonzero polynomial") as i32;
    let lead = p.leading().abs();
    let rest: f64 = p
        .coeffs()
        .iter()
        .enumerate()
        .take(deg as usize)
        .map(|(k, c)| c.abs() * w.powi(k as i32 - deg))
        .sum();
    lead - rest
}

/// Tail data for the filter at a cut frequency `w`: the limit
/// `kappa = lim (s·h)(s)`, a flat bound on `|(s·h)(jv) - kappa|` for
/// `v >= w`, and `h_bound` with `|h(jv)| <= h_bound / v` for `v >= w`.
///
/// Returns `None` when `w` is still too small for the bounds to close.
fn h_tail(h: &HFilter, w: f64) -> Option<(f64, f64, f64)> {
    let num = h.tf().num();
    let den = h.tf().den();
    let kappa = h.kappa();
    let dlo = lower_coef(den, w);
    if dlo <= 0.0 {
        return None;
    }
    // (s·h)(s) - kappa = (s·num - kappa·den) / den, whose numerator loses
    // its leading term by construction.
    let s_num = num.mul(&Polynomial::s());
    let r_num = s_num.sub(&den.scale(kappa));
    let r_bound = if r_num.is_zero() {
        0.0
    } else {
        let r_deg = r_num.degree().unwrap() as i32;
        let d_deg = den.degree().unwrap() as i32;
        debug_assert!(r_deg < d_deg);
        (upper_coef(&r_num, w) / dlo) * w.powi(r_deg - d_deg)
    };
    let h_bound = upper_coef(num, w) / dlo;
    Some((kappa, r_bound, h_bound))
}

/// Certified minimum of `Re{h(jw)((gamma/2) jw + p(jw))}` over all
/// `w >= 0`.
///
/// The grid sweep (plus `w = 0`) is refined around its local minima; beyond
/// the last swept frequency an analytic floor
///
/// ```text
/// Re f >= (gamma/2)(kappa - |sh - kappa|) - |h| · |p|
/// ```
///
/// is evaluated from coefficient bounds for `h` and a flat magnitude bound
/// for `p` on the tail. If the floor does not clear the tolerance at the
/// grid edge, the sweep is extended a decade at a time (the appended samples
/// join the minimum) until it does — or, when the extension budget runs out
/// with a floor that is positive but below the tolerance, that floor is
/// reported as the margin and the certification fails honestly at this
/// budget.
///
/// `p_tail(w)` must bound `sup_{v >= w} |p(jv)|`, or return `None` when `w`
/// is not yet large enough for its bound to hold.
fn certified_margin(
    p: &mut dyn FnMut(Complex64) -> Result<Complex64>,
    p_tail: &dyn Fn(f64) -> Option<f64>,
    h: &HFilter,
    gamma: f64,
    grid: &FrequencyGrid,
) -> Result<SprMargin> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "coupling budget gamma = {gamma} must be a positive finite number"
        )));
    }

    let mut f_at = |w: f64| -> Result<(Complex64, f64)> {
        let s = Complex64::new(0.0, w);
        let hv = h.tf().eval(s)?;
        let pv = p(s)?;
        let inner = Complex64::new(0.0, 0.5 * gamma * w) + pv;
        Ok((hv * inner, (hv * pv).norm()))
    };

    let mut omegas: Vec<f64> = Vec::with_capacity(grid.len() + 1);
    omegas.push(0.0);
    omegas.extend_from_slice(grid.points());
    let mut res: Vec<Option<f64>> = Vec::with_capacity(omegas.len());
    let mut min_re = f64::INFINITY;
    let mut min_at = 0.0f64;
    let mut max_abs: f64 = 0.0;
    // The decision tolerance scales with the budget-free part of the sweep
    // only: scaling it with the full response would let the threshold grow
    // with gamma and break the monotonicity the budget bisection relies on.
    let mut max_hp: f64 = 0.0;
    for &omega in &omegas {
        let (v, hp) = f_at(omega)?;
        if v.re < min_re {
            min_re = v.re;
            min_at = omega;
        }
        max_abs = max_abs.max(v.norm());
        max_hp = max_hp.max(hp);
        res.push(Some(v.re));
    }

    // Close the high-frequency tail, extending the sweep if necessary.
    let mut omega_end = grid.max();
    let mut extensions = 0usize;
    let tail_floor = loop {
        let closed = h_tail(h, omega_end).and_then(|(kappa, r_bound, h_bound)| {
            let p_bound = p_tail(omega_end)?;
            if r_bound > 0.5 * kappa {
                return None;
            }
            Some(0.5 * gamma * (kappa - r_bound) - h_bound * p_bound / omega_end)
        });
        match closed {
            Some(floor) if floor > 1e-6 * (1.0 + max_abs) => break floor,
            // For small budgets the asymptote (gamma/2)·kappa itself can
            // sit below the decision threshold, so no amount of extension
            // clears it. A positive floor is still a valid bound for the
            // whole tail: keep it once the extension budget is spent and
            // let the tolerance comparison decide (a fail here simply
            // pushes the budget search upward).
            Some(floor) if extensions == MAX_EXTENSIONS && floor > 0.0 => break floor,
            _ => {}
        }
        extensions += 1;
        if extensions > MAX_EXTENSIONS {
            return Err(Error::TailUnbounded(format!(
                "margin sweep tail does not close by omega = {omega_end:e}"
            )));
        }
        for i in 1..=EXTENSION_SAMPLES {
            let w = omega_end * 10f64.powf(i as f64 / EXTENSION_SAMPLES as f64);
            let (v, hp) = f_at(w)?;
            if v.re < min_re {
                min_re = v.re;
                min_at = w;
            }
            max_abs = max_abs.max(v.norm());
            max_hp = max_hp.max(hp);
            omegas.push(w);
            res.push(Some(v.re));
        }
        omega_end *= 10.0;
    };

    let mut re_of = |w: f64| -> Result<f64> { Ok(f_at(w)?.0.re) };
    let refined = refine_sweep_minima(&mut re_of, &omegas, &res)?;
    if refined < min_re {
        min_re = refined;
    }

    let tolerance = 1e-6 * (1.0 + max_hp);
    let (margin, frequency) = if tail_floor < min_re {
        (tail_floor, omega_end)
    } else {
        (min_re, min_at)
    };
    Ok(SprMargin {
        margin,
        frequency,
        tolerance,
        checked_to: omega_end,
    })
}

/// Flat tail bound `sup_{v >= w} |p(jv)|` from a bus magnitude envelope.
fn bus_tail_closure(env: TailEnvelope) -> impl Fn(f64) -> Option<f64> {
    move |w: f64| match env {
        TailEnvelope::PowerLaw { c, from } => (w >= from).then(|| c / w),
        TailEnvelope::Flat { level, from } => (w >= from).then_some(level),
    }
}

/// Flat tail bound for a proper rational function, from coefficient bounds.
fn rational_tail_closure(p: &RationalTF) -> impl Fn(f64) -> Option<f64> + '_ {
    move |w: f64| {
        if p.num().is_zero() {
            return Some(0.0);
        }
        let dlo = lower_coef(p.den(), w);
        if dlo <= 0.0 {
            return None;
        }
        let n_deg = p.num().degree().unwrap() as i32;
        let d_deg = p.den().degree().unwrap() as i32;
        Some((upper_coef(p.num(), w) / dlo) * w.powi(n_deg - d_deg))
    }
}

/// Certified per-bus margin: the refined minimum of
/// `Re{h(jw)((gamma/2) jw + p(jw))}` over all frequencies, where `p` is the
/// (possibly delayed) bus response.
///
/// The certificate is valid — the bus tolerates any attachment with
/// aggregate susceptance up to `1/gamma` — iff the returned margin passes
/// ([`SprMargin::passes`]).
///
/// # Errors
///
/// [`Error::AssumptionViolated`] when the bus is not internally stable;
/// [`Error::TailUnbounded`] when no high-frequency envelope exists for the
/// bus or the tail bound does not close; [`Error::Inconclusive`] from the
/// internal stability scan.
///
/// # Example
///
/// ```
/// use gridcert_core::bus::{BusModel, Controller};
/// use gridcert_core::cert::{certify_bus, HFilter};
/// use gridcert_core::tf::FrequencyGrid;
///
/// let bus = BusModel::new(1.0, 0.1, 0.0, Controller::None).unwrap();
/// let h = HFilter::canonical(30.0).unwrap();
/// let grid = FrequencyGrid::default_grid();
/// let margin = certify_bus(&h, &bus, 1.0, &grid).unwrap();
/// assert!(margin.passes());
/// ```
pub fn certify_bus(
    h: &HFilter,
    bus: &BusModel,
    gamma: f64,
    grid: &FrequencyGrid,
) -> Result<SprMargin> {
    match bus.internal_stability(grid)? {
        BusStability::Stable => {}
        BusStability::Unstable { rhp_roots } => {
            return Err(Error::AssumptionViolated(format!(
                "bus is internally unstable ({rhp_roots} right-half-plane characteristic roots)"
            )));
        }
    }
    let tail = bus_tail_closure(bus.tail_envelope()?);
    certified_margin(&mut |s| bus.eval(s), &tail, h, gamma, grid)
}

/// Smallest coupling budget `gamma` at which [`certify_bus`] passes, found
/// by bisection in log space over `[`[`GAMMA_FLOOR`]`, `[`GAMMA_CAP`]`]`.
///
/// The swept margin is pointwise nondecreasing in `gamma` (because
/// `Re{(s·h)(jw)} >= 0` for a valid filter), so bisection is sound. The
/// returned value is the certified upper end of the final bracket: inflating
/// it by `1 + tol` always re-certifies.
///
/// # Errors
///
/// [`Error::NoCertificate`] when even [`GAMMA_CAP`] fails; otherwise as
/// [`certify_bus`].
pub fn min_gamma(h: &HFilter, bus: &BusModel, grid: &FrequencyGrid, tol: f64) -> Result<f64> {
    if !tol.is_finite() || tol <= 0.0 || tol >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "bisection tolerance {tol} must be in (0, 1)"
        )));
    }
    match bus.internal_stability(grid)? {
        BusStability::Stable => {}
        BusStability::Unstable { rhp_roots } => {
            return Err(Error::AssumptionViolated(format!(
                "bus is internally unstable ({rhp_roots} right-half-plane characteristic roots)"
            )));
        }
    }
    let env = bus.tail_envelope()?;
    let passes = |gamma: f64| -> Result<bool> {
        let tail = bus_tail_closure(env);
        Ok(certified_margin(&mut |s| bus.eval(s), &tail, h, gamma, grid)?.passes())
    };

    if !passes(GAMMA_CAP)? {
        return Err(Error::NoCertificate {
            gamma_cap: GAMMA_CAP,
        });
    }
    if passes(GAMMA_FLOOR)? {
        return Ok(GAMMA_FLOOR);
    }
    let (mut lo, mut hi) = (GAMMA_FLOOR, GAMMA_CAP);
    for _ in 0..60 {
        if hi <= lo * (1.0 + tol) {
            break;
        }
        let mid = (lo * hi).sqrt();
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Admission rule: a bus certified at `gamma_min` may connect through lines
/// of aggregate susceptance `susceptance_sum` iff
/// `gamma_min · susceptance_sum <= 1`.
///
/// The rule is scale-consistent: `admit(c·g, b/c)` equals `admit(g, b)` for
/// any `c > 0`.
#[must_use]
pub fn admit(gamma_min: f64, susceptance_sum: f64) -> bool {
    gamma_min > 0.0
        && gamma_min.is_finite()
        && susceptance_sum >= 0.0
        && susceptance_sum.is_finite()
        && gamma_min * susceptance_sum <= 1.0
}

/// Per-bus certification outcome within a network: the minimal budget, the
/// margin it was certified with, the admission comparison against the bus's
/// aggregate line susceptance, and the grid the sweep ran on.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Smallest certified coupling budget.
    pub gamma_min: f64,
    /// Margin at `gamma_min`.
    pub margin: SprMargin,
    /// Susceptance the bus can absorb: `1/gamma_min`.
    pub susceptance_budget: f64,
    /// Aggregate susceptance of the lines actually incident to the bus.
    pub diag_susceptance: f64,
    /// `gamma_min · diag_susceptance <= 1`.
    pub admitted: bool,
    /// Grid the certification swept.
    pub grid: FrequencyGrid,
}

// ---------------------------------------------------------------------------
// First-order closed form
// ---------------------------------------------------------------------------

/// A first-order surrogate `a/(s+b)` with envelope radius `eps`, certified
/// against the canonical filter of pole `omega0`.
///
/// Buses whose response stays within
/// `|p(jw) - a/(jw+b)| < eps·sqrt(1 + w^2/omega0^2)` ([`envelope_check`])
/// inherit any budget the surrogate passes ([`first_order_protocol`]),
/// because the canonical filter satisfies
/// `|h(jw)|·sqrt(1 + w^2/omega0^2) = 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderDesign {
    a: f64,
    b: f64,
    eps: f64,
    omega0: f64,
}

impl FirstOrderDesign {
    /// Validate and build a design.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidDesign`] unless `a`, `b`, `omega0` are positive
    /// finite and `eps` is nonnegative finite.
    pub fn new(a: f64, b: f64, eps: f64, omega0: f64) -> Result<Self> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidDesign(format!(
                    "{name} = {v} must be a positive finite number"
                )));
            }
            Ok(())
        };
        positive("a", a)?;
        positive("b", b)?;
        positive("omega0", omega0)?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidDesign(format!(
                "eps = {eps} must be a nonnegative finite number"
            )));
        }
        Ok(Self { a, b, eps, omega0 })
    }

    /// Surrogate gain `a`.
    #[must_use]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Surrogate pole `b`.
    #[must_use]
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Envelope radius `eps`.
    #[must_use]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Filter pole `omega0` the design is certified against.
    #[must_use]
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// The surrogate transfer function `a/(s+b)`.
    #[must_use]
    pub fn surrogate(&self) -> RationalTF {
        RationalTF::new(
            Polynomial::constant(self.a),
            Polynomial::new(&[self.b, 1.0]),
        )
        .expect("validated design coefficients are finite")
    }
}

/// Closed-form robust certification of a first-order design at budget
/// `gamma`: true iff
///
/// ```text
/// Re{ h(jw) ( (gamma/2) jw + a/(jw+b) ) } >= eps   for all w,
/// ```
///
/// with the canonical filter `h` of pole `omega0`. Multiplying out and
/// substituting `x = w^2` reduces the condition to nonnegativity of the
/// quadratic
///
/// ```text
/// T(x) = v x^2 + (b^2 v - a w0 - eps w0^2) x + w0^2 b u,
/// v = gamma·w0/2 - eps,  u = a - eps·b,
/// ```
///
/// on `x >= 0`, which holds iff `v >= 0`, `u >= 0`, and the middle
/// coefficient is either nonnegative or satisfies the discriminant bound
/// `w^2 <= 4 v w0^2 b u`. An equivalent scalar form is
///
/// ```text
/// b(gamma·w0/2 - eps) - eps·w0 >= (w0/(b+w0)) (sqrt(u) - sqrt(b·v))^2.
/// ```
///
/// The condition is monotone in `gamma`: raising the budget only raises
/// `T`.
#[must_use]
pub fn first_order_protocol(d: &FirstOrderDesign, gamma: f64) -> bool {
    if !gamma.is_finite() {
        return false;
    }
    let v = 0.5 * gamma * d.omega0 - d.eps;
    let u = d.a - d.eps * d.b;
    if v < 0.0 || u < 0.0 {
        return false;
    }
    let w = d.b * d.b * v - d.a * d.omega0 - d.eps * d.omega0 * d.omega0;
    w >= 0.0 || w * w <= 4.0 * v * (d.omega0 * d.omega0 * d.b * u)
}

/// Smallest budget at which [`first_order_protocol`] passes, by bisection in
/// log space over `[`[`GAMMA_FLOOR`]`, `[`GAMMA_CAP`]`]`.
///
/// # Errors
///
/// [`Error::NoCertificate`] when no budget up to [`GAMMA_CAP`] passes (for
/// example when `a < eps·b`, where the envelope swallows the surrogate's
/// entire phase margin); [`Error::InvalidParameter`] for a tolerance outside
/// `(0, 1)`.
pub fn min_gamma_first_order(d: &FirstOrderDesign, tol: f64) -> Result<f64> {
    if !tol.is_finite() || tol <= 0.0 || tol >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "bisection tolerance {tol} must be in (0, 1)"
        )));
    }
    if !first_order_protocol(d, GAMMA_CAP) {
        return Err(Error::NoCertificate {
            gamma_cap: GAMMA_CAP,
        });
    }
    if first_order_protocol(d, GAMMA_FLOOR) {
        return Ok(GAMMA_FLOOR);
    }
    let (mut lo, mut hi) = (GAMMA_FLOOR, GAMMA_CAP);
    for _ in 0..60 {
        if hi <= lo * (1.0 + tol) {
            break;
        }
        let mid = (lo * hi).sqrt();
        if first_order_protocol(d, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Outcome of an envelope check: whether the bus response stayed inside the
/// design's tube, and where it came closest to (or crossed) the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    /// True iff `|p(jw) - a/(jw+b)| < eps·sqrt(1 + w^2/omega0^2)` at every
    /// checked frequency.
    pub passed: bool,
    /// Largest observed ratio of deviation to envelope radius.
    pub worst_ratio: f64,
    /// Frequency attaining the worst ratio, rad/s.
    pub worst_frequency: f64,
}

/// Check that a bus response stays inside the first-order design's
/// frequency-dependent envelope on the given grid (plus `w = 0`).
///
/// # Errors
///
/// [`Error::EvaluationAtPole`] if the bus response cannot be evaluated at a
/// grid point.
pub fn envelope_check(
    bus: &BusModel,
    d: &FirstOrderDesign,
    grid: &FrequencyGrid,
) -> Result<EnvelopeReport> {
    let surrogate = d.surrogate();
    let mut worst_ratio = 0.0f64;
    let mut worst_frequency = 0.0f64;
    for &w in std::iter::once(&0.0).chain(grid.points()) {
        let s = Complex64::new(0.0, w);
        let deviation = (bus.eval(s)? - surrogate.eval(s)?).norm();
        let radius = d.eps * (1.0 + w * w / (d.omega0 * d.omega0)).sqrt();
        let ratio = if radius > 0.0 {
            deviation / radius
        } else if deviation == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_frequency = w;
        }
    }
    Ok(EnvelopeReport {
        passed: worst_ratio < 1.0,
        worst_ratio,
        worst_frequency,
    })
}

/// Pick the canonical filter pole, from a candidate list, that maximizes the
/// worst-case certified margin at `gamma = 1` over a set of expected bus
/// responses.
///
/// Candidates failing any expected model (nonpassing margin, unclosed tail,
/// or inconclusive sweep) are excluded. Ties break toward the smaller pole
/// frequency, making the choice deterministic.
///
/// # Errors
///
/// [`Error::NoFeasibleH`] when every candidate fails some model;
/// [`Error::AssumptionViolated`] for an unstable or improper expected model;
/// [`Error::InvalidParameter`] for empty inputs or nonpositive candidates.
pub fn choose_h(
    expected_models: &[RationalTF],
    candidate_omega0s: &[f64],
    grid: &FrequencyGrid,
) -> Result<HFilter> {
    if expected_models.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one expected model is required".into(),
        ));
    }
    if candidate_omega0s.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one candidate omega0 is required".into(),
        ));
    }
    for m in expected_models {
        for pole in m.poles()? {
            if pole.re >= -AXIS_TOL * (1.0 + pole.norm()) {
                return Err(Error::AssumptionViolated(format!(
                    "expected model has a pole at {pole} outside the open left half-plane"
                )));
            }
        }
        if m.relative_degree()? < 0 {
            return Err(Error::AssumptionViolated(
                "expected models must be proper".into(),
            ));
        }
    }
    let mut candidates = candidate_omega0s.to_vec();
    for &w0 in &candidates {
        if !w0.is_finite() || w0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "candidate omega0 = {w0} must be a positive finite number"
            )));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best: Option<(f64, f64)> = None;
    for &w0 in &candidates {
        let h = HFilter::canonical(w0)?;
        let mut worst = f64::INFINITY;
        let mut feasible = true;
        for m in expected_models {
            let tail = rational_tail_closure(m);
            match certified_margin(&mut |s| m.eval(s), &tail, &h, 1.0, grid) {
                Ok(sm) if sm.passes() => worst = worst.min(sm.margin),
                Ok(_) | Err(Error::TailUnbounded(_)) | Err(Error::Inconclusive { .. }) => {
                    feasible = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if feasible && best.is_none_or(|(_, m)| worst > m) {
            best = Some((w0, worst));
        }
    }
    match best {
        Some((w0, _)) => HFilter::canonical(w0),
        None => Err(Error::NoFeasibleH),
    }
}

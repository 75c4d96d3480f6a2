//! Phase accumulation along sampled curves in the complex plane.
//!
//! Both the delay-aware bus stability scan and the network-level Nyquist
//! check reduce to the same primitive: walk a parametrized curve that never
//! touches the origin, accumulate the unwrapped argument, and count
//! encirclements. The walker refines adaptively between samples whenever the
//! phase step is too large to be trusted, and reports how close the curve
//! came to the origin so callers can refuse to decide marginal cases.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum bisection depth between two adjacent parameter samples.
const MAX_REFINE_DEPTH: u32 = 48;

/// Phase steps above this trigger refinement.
const REFINE_STEP: f64 = std::f64::consts::FRAC_PI_4;

/// Phase steps above this after refinement are an error.
const MAX_TRUSTED_STEP: f64 = std::f64::consts::FRAC_PI_2;

/// Outcome of walking one curve segment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SweepResult {
    /// Total unwrapped phase change along the segment, in radians.
    pub delta_arg: f64,
    /// Smallest |f| seen at any (possibly refined) sample.
    pub min_abs: f64,
    /// Parameter value at which `min_abs` occurred.
    pub min_abs_at: f64,
    /// Largest |f| seen, for building relative tolerances.
    pub max_abs: f64,
}

/// Accumulate the unwrapped argument of `f` along the parameter values `ts`
/// (strictly increasing), refining between samples until each phase step is
/// below a quarter turn.
///
/// # Errors
///
/// [`Error::GridTooCoarse`] when a phase step cannot be brought below half a
/// turn within the refinement budget — which also happens when the curve
/// passes through (or numerically exactly onto) the origin.
pub(crate) fn sweep_phase(
    f: &mut dyn FnMut(f64) -> Result<Complex64>,
    ts: &[f64],
) -> Result<SweepResult> {
    assert!(ts.len() >= 2, "a sweep needs at least two samples");
    let mut prev_t = ts[0];
    let mut prev_v = f(prev_t)?;
    let mut out = SweepResult {
        delta_arg: 0.0,
        min_abs: prev_v.norm(),
        min_abs_at: prev_t,
        max_abs: prev_v.norm(),
    };
    for &t in &ts[1..] {
        let v = f(t)?;
        segment(f, prev_t, prev_v, t, v, 0, &mut out)?;
        prev_t = t;
        prev_v = v;
    }
    Ok(out)
}

/// Recursively refine one parameter interval until its phase step is small.
fn segment(
    f: &mut dyn FnMut(f64) -> Result<Complex64>,
    t0: f64,
    v0: Complex64,
    t1: f64,
    v1: Complex64,
    depth: u32,
    out: &mut SweepResult,
) -> Result<()> {
    let a1 = v1.norm();
    if a1 < out.min_abs {
        out.min_abs = a1;
        out.min_abs_at = t1;
    }
    out.max_abs = out.max_abs.max(a1);
    if v0.norm() == 0.0 || a1 == 0.0 {
        return Err(Error::GridTooCoarse { omega: t1 });
    }
    let step = (v1 / v0).arg();
    if step.abs() <= REFINE_STEP {
        out.delta_arg += step;
        return Ok(());
    }
    if depth >= MAX_REFINE_DEPTH {
        if step.abs() <= MAX_TRUSTED_STEP {
            out.delta_arg += step;
            return Ok(());
        }
        return Err(Error::GridTooCoarse { omega: t1 });
    }
    let tm = 0.5 * (t0 + t1);
    if !(tm > t0 && tm < t1) {
        // The interval collapsed to adjacent floats; accept what we have if
        // it is at least unambiguous.
        if step.abs() <= MAX_TRUSTED_STEP {
            out.delta_arg += step;
            return Ok(());
        }
        return Err(Error::GridTooCoarse { omega: t1 });
    }
    let vm = f(tm)?;
    segment(f, t0, v0, tm, vm, depth + 1, out)?;
    segment(f, tm, vm, t1, v1, depth + 1, out)
}

/// Round an accumulated phase to an integer winding number.
///
/// # Errors
///
/// [`Error::Inconclusive`] when the total phase is farther than a quarter
/// turn from every integer multiple of a full turn.
pub(crate) fn round_winding(total_arg: f64, context: &str) -> Result<i32> {
    let turns = total_arg / std::f64::consts::TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.25 {
        return Err(Error::Inconclusive {
            what: format!("winding count for {context}"),
            margin: turns - rounded,
        });
    }
    Ok(rounded as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_circle_accumulates_one_turn() {
        // f(t) = exp(j t) over [0, 2*pi] on a deliberately coarse grid.
        let mut f = |t: f64| Ok(Complex64::from_polar(1.0, t));
        let ts: Vec<f64> = (0..=6).map(|k| k as f64 * std::f64::consts::TAU / 6.0).collect();
        let r = sweep_phase(&mut f, &ts).unwrap();
        assert!((r.delta_arg - std::f64::consts::TAU).abs() < 1e-12);
        assert_eq!(round_winding(r.delta_arg, "test").unwrap(), 1);
    }

    #[test]
    fn straight_segment_in_right_half_plane_has_small_phase() {
        // Vertical chord at Re = 2 from -1j to 1j: net phase change well under
        // a quarter turn and no origin approach.
        let mut f = |t: f64| Ok(Complex64::new(2.0, t));
        let ts = [-1.0, 0.0, 1.0];
        let r = sweep_phase(&mut f, &ts).unwrap();
        assert!(r.delta_arg.abs() < std::f64::consts::FRAC_PI_2);
        assert_eq!(round_winding(r.delta_arg, "test").unwrap(), 0);
        assert!((r.min_abs - 2.0).abs() < 1e-12);

        // A longer chord accumulates 0.38 turns: too far from any integer
        // for an honest rounding, so the count is refused.
        let ts = [-5.0, 0.0, 5.0];
        let r = sweep_phase(&mut f, &ts).unwrap();
        assert!(matches!(
            round_winding(r.delta_arg, "test"),
            Err(Error::Inconclusive { .. })
        ));
    }

    #[test]
    fn curve_through_origin_is_rejected() {
        // f crosses zero at t = 0.
        let mut f = |t: f64| Ok(Complex64::new(t, 0.0));
        let ts = [-1.0, 1.0];
        assert!(matches!(
            sweep_phase(&mut f, &ts),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn refinement_recovers_a_fast_quarter_turn() {
        // A tight spiral sampled coarsely: winding should still match the
        // analytic value of 3 full turns.
        let mut f = |t: f64| Ok(Complex64::from_polar(1.0 + t, 3.0 * t));
        let ts: Vec<f64> = (0..=10)
            .map(|k| k as f64 * std::f64::consts::TAU / 10.0)
            .collect();
        let r = sweep_phase(&mut f, &ts).unwrap();
        let turns = r.delta_arg / std::f64::consts::TAU;
        assert!((turns - 3.0).abs() < 1e-9, "turns = {turns}");
    }
}

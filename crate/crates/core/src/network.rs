//! Network model: buses coupled through susceptance-weighted lines.
//!
//! The electrical coupling enters as a weighted graph Laplacian `L_B`. Three
//! stability views are provided:
//!
//! - [`protocol_certify_network`]: the decentralized certificate — each bus
//!   passes its own sweep at some budget `gamma_i` and is admitted iff
//!   `gamma_i · [L_B]_ii <= 1`; all buses admitted implies the closed loop
//!   is stable for the *actual* line values (and any smaller ones);
//! - [`spectral_stability`]: the delay-free brute-force oracle on the
//!   assembled closed-loop state matrix;
//! - [`nyquist_global_check`]: a pole-corrected winding count of the loop
//!   determinant along the imaginary axis, valid with delays, used to
//!   cross-examine the other two.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bus::{BusModel, BusStability, Controller};
use crate::cert::{self, Certificate, HFilter};
use crate::error::{Error, Result};
use crate::tf::FrequencyGrid;
use crate::winding;

/// Relative tolerance for classifying closed-loop eigenvalues against zero.
pub const SPECTRAL_TOL: f64 = 1e-7;

/// One transmission line: an unordered pair of bus indices and a positive
/// susceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    i: usize,
    j: usize,
    b: f64,
}

impl Line {
    /// Build a line after checking `i != j` and `B > 0`.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] on a self-loop or nonpositive
    /// susceptance.
    pub fn new(i: usize, j: usize, b: f64) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidParameter(format!(
                "line endpoints must differ (got {i}-{j})"
            )));
        }
        if !b.is_finite() || b <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "line susceptance B = {b} must be a positive finite number"
            )));
        }
        Ok(Self { i, j, b })
    }

    /// First endpoint index.
    #[must_use]
    pub fn i(&self) -> usize {
        self.i
    }

    /// Second endpoint index.
    #[must_use]
    pub fn j(&self) -> usize {
        self.j
    }

    /// Line susceptance.
    #[must_use]
    pub fn b(&self) -> f64 {
        self.b
    }
}

/// Buses plus lines. Construction validates that every line endpoint exists
/// and that no unordered pair appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    buses: Vec<BusModel>,
    lines: Vec<Line>,
}

impl NetworkModel {
    /// Build and validate a network.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for an empty bus list;
    /// [`Error::DanglingEndpoint`] for a line endpoint out of range;
    /// [`Error::DuplicateLine`] when two lines join the same pair.
    pub fn new(buses: Vec<BusModel>, lines: Vec<Line>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::InvalidParameter(
                "a network needs at least one bus".into(),
            ));
        }
        let n = buses.len();
        let mut seen = std::collections::HashSet::new();
        for line in &lines {
            if line.i >= n {
                return Err(Error::DanglingEndpoint { index: line.i });
            }
            if line.j >= n {
                return Err(Error::DanglingEndpoint { index: line.j });
            }
            let key = (line.i.min(line.j), line.i.max(line.j));
            if !seen.insert(key) {
                return Err(Error::DuplicateLine { i: key.0, j: key.1 });
            }
        }
        Ok(Self { buses, lines })
    }

    /// The buses, index-aligned with every per-bus result.
    #[must_use]
    pub fn buses(&self) -> &[BusModel] {
        &self.buses
    }

    /// The lines.
    #[must_use]
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Number of buses.
    #[must_use]
    pub fn len(&self) -> usize {
        self.buses.len()
    }

    /// True for a network with no buses (unreachable after construction).
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    /// Number of connected components of the line graph.
    #[must_use]
    pub fn connected_components(&self) -> usize {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for line in &self.lines {
            adj[line.i].push(line.j);
            adj[line.j].push(line.i);
        }
        let mut seen = vec![false; n];
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }
}

/// Dense symmetric graph Laplacian of the line susceptances.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    matrix: DMatrix<f64>,
}

impl LaplacianMatrix {
    /// The underlying dense matrix.
    #[must_use]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dimension (number of buses).
    #[must_use]
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Diagonal entry `i`: the aggregate susceptance at bus `i`.
    ///
    /// # Errors
    ///
    /// [`Error::UnknownBus`] for an out-of-range index.
    pub fn diag_entry(&self, i: usize) -> Result<f64> {
        if i >= self.dim() {
            return Err(Error::UnknownBus { index: i });
        }
        Ok(self.matrix[(i, i)])
    }
}

/// Build the weighted Laplacian: `[L]_ij = -B_ij` for each line, diagonal
/// entries equal to each bus's aggregate incident susceptance (so every row
/// sums to zero).
#[must_use]
pub fn laplacian(net: &NetworkModel) -> LaplacianMatrix {
    let n = net.len();
    let mut m = DMatrix::zeros(n, n);
    for line in net.lines() {
        let (i, j, b) = (line.i(), line.j(), line.b());
        m[(i, j)] -= b;
        m[(j, i)] -= b;
        m[(i, i)] += b;
        m[(j, j)] += b;
    }
    LaplacianMatrix { matrix: m }
}

/// Aggregate susceptance of the lines incident to bus `i` (the Laplacian
/// diagonal entry).
///
/// # Errors
///
/// [`Error::UnknownBus`] for an out-of-range index.
pub fn diag_susceptance(net: &NetworkModel, i: usize) -> Result<f64> {
    if i >= net.len() {
        return Err(Error::UnknownBus { index: i });
    }
    Ok(net
        .lines()
        .iter()
        .filter(|l| l.i() == i || l.j() == i)
        .map(Line::b)
        .sum())
}

/// Meaning of one state-vector entry of an assembled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateVar {
    /// Voltage angle of the indexed bus, rad.
    Theta(usize),
    /// Frequency deviation of the indexed bus, rad/s. Absent for buses whose
    /// frequency is eliminated algebraically (no effective inertia).
    Omega(usize),
    /// Internal controller state of the indexed bus's dynamic controller.
    Controller(usize),
}

/// Closed-loop linear model `dx/dt = A x + B d` of a delay-free network,
/// with a label for every state entry.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    /// Dynamics matrix.
    pub a: DMatrix<f64>,
    /// Input matrix mapping per-bus power disturbances into the state.
    pub b: DMatrix<f64>,
    /// Labels, index-aligned with the rows of `a`.
    pub vars: Vec<StateVar>,
}

/// Per-bus view used during assembly and reused by the simulator: effective
/// inertia and damping after folding the controller's proportional and
/// derivative parts into the swing equation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BusRealization {
    /// Effective inertia: `M`, or `M + Knu` for virtual inertia.
    pub m_eff: f64,
    /// Effective damping: `D` plus the controller's instantaneous gain
    /// (`K` for droop and virtual inertia, `Knu` for the dynamic droop).
    pub d_eff: f64,
    /// Dynamic-controller pole and gains `(k_delta, k, k_nu)` when the bus
    /// carries an internal state `z` with
    /// `dz/dt = k_delta ((k - k_nu) w - z)` and power contribution `-z`.
    pub dynamic: Option<(f64, f64, f64)>,
}

impl BusRealization {
    pub(crate) fn of(bus: &BusModel) -> Self {
        match *bus.controller() {
            Controller::None => Self {
                m_eff: bus.m(),
                d_eff: bus.d(),
                dynamic: None,
            },
            Controller::Droop { k } => Self {
                m_eff: bus.m(),
                d_eff: bus.d() + k,
                dynamic: None,
            },
            Controller::VirtualInertia { k, k_nu } => Self {
                m_eff: bus.m() + k_nu,
                d_eff: bus.d() + k,
                dynamic: None,
            },
            Controller::IDroop { k, k_nu, k_delta } => Self {
                m_eff: bus.m(),
                d_eff: bus.d() + k_nu,
                dynamic: Some((k_delta, k, k_nu)),
            },
        }
    }
}

/// Assemble the delay-free closed-loop state space.
///
/// States are ordered: all bus angles, then frequencies of buses with
/// effective inertia, then dynamic-controller states. Buses without
/// effective inertia have their frequency eliminated algebraically from
/// `0 = -d_eff w - z - (L theta)_i + d_i`.
///
/// # Errors
///
/// [`Error::DelayPresent`] if any bus has a nonzero delay (use the
/// simulator or [`nyquist_global_check`] instead);
/// [`Error::SingularMassMatrix`] if an algebraic bus equation is unsolvable
/// (unreachable for buses accepted by [`BusModel::new`], kept as defense in
/// depth).
pub fn assemble_state_space(net: &NetworkModel) -> Result<StateSpaceModel> {
    let n = net.len();
    for (idx, bus) in net.buses().iter().enumerate() {
        if bus.tau() > 0.0 {
            return Err(Error::DelayPresent { bus: idx });
        }
    }
    let real: Vec<BusRealization> = net.buses().iter().map(BusRealization::of).collect();
    for (idx, r) in real.iter().enumerate() {
        if r.m_eff <= 0.0 && r.d_eff <= 0.0 {
            return Err(Error::SingularMassMatrix { bus: idx });
        }
    }
    let lap = laplacian(net);
    let l = lap.matrix();

    // State layout.
    let mut vars: Vec<StateVar> = (0..n).map(StateVar::Theta).collect();
    let mut omega_slot = vec![None; n];
    for (idx, r) in real.iter().enumerate() {
        if r.m_eff > 0.0 {
            omega_slot[idx] = Some(vars.len());
            vars.push(StateVar::Omega(idx));
        }
    }
    let mut z_slot = vec![None; n];
    for (idx, r) in real.iter().enumerate() {
        if r.dynamic.is_some() {
            z_slot[idx] = Some(vars.len());
            vars.push(StateVar::Controller(idx));
        }
    }

    let dim = vars.len();
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, n);

    for (idx, r) in real.iter().enumerate() {
        match omega_slot[idx] {
            Some(w_row) => {
                // d theta / dt = w
                a[(idx, w_row)] = 1.0;
                // m_eff dw/dt = -d_eff w - z - (L theta) + d
                for col in 0..n {
                    a[(w_row, col)] -= l[(idx, col)] / r.m_eff;
                }
                a[(w_row, w_row)] = -r.d_eff / r.m_eff;
                if let Some(z_row) = z_slot[idx] {
                    a[(w_row, z_row)] = -1.0 / r.m_eff;
                }
                b[(w_row, idx)] = 1.0 / r.m_eff;
            }
            None => {
                // Algebraic frequency: w = (d - z - L theta) / d_eff.
                for col in 0..n {
                    a[(idx, col)] -= l[(idx, col)] / r.d_eff;
                }
                if let Some(z_row) = z_slot[idx] {
                    a[(idx, z_row)] = -1.0 / r.d_eff;
                }
                b[(idx, idx)] = 1.0 / r.d_eff;
            }
        }
        if let (Some(z_row), Some((k_delta, k, k_nu))) = (z_slot[idx], r.dynamic) {
            // dz/dt = k_delta ((k - k_nu) w - z)
            let gain = k_delta * (k - k_nu);
            match omega_slot[idx] {
                Some(w_row) => a[(z_row, w_row)] = gain,
                None => {
                    // Substitute the algebraic frequency.
                    for col in 0..n {
                        a[(z_row, col)] -= gain * l[(idx, col)] / r.d_eff;
                    }
                    a[(z_row, z_row)] -= gain / r.d_eff;
                    b[(z_row, idx)] = gain / r.d_eff;
                }
            }
            a[(z_row, z_row)] -= k_delta;
        }
    }
    Ok(StateSpaceModel { a, b, vars })
}

/// Delay-free stability verdict from the closed-loop spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralVerdict {
    /// Exactly one eigenvalue at zero (the uniform angle-translation mode);
    /// everything else strictly in the left half-plane.
    Stable,
    /// At least one eigenvalue with nonnegative real part beyond the
    /// translation mode.
    Unstable {
        /// Offending eigenvalues, for reporting.
        eigenvalues: Vec<Complex64>,
    },
}

impl SpectralVerdict {
    /// True for the [`SpectralVerdict::Stable`] verdict.
    #[must_use]
    pub fn is_stable(&self) -> bool {
        matches!(self, SpectralVerdict::Stable)
    }
}

/// Classify the closed-loop spectrum of an assembled network.
///
/// The network always carries one zero eigenvalue from uniform angle
/// translation; stability is judged on the complement. Eigenvalues within
/// `tol · (1 + spectral radius)` of zero count as translation modes; more
/// than one of them means the line graph is disconnected.
///
/// # Errors
///
/// [`Error::DisconnectedNetwork`] when several translation modes are found;
/// [`Error::RootSolverFailure`] if the eigenvalue iteration fails.
pub fn spectral_stability(a: &DMatrix<f64>, tol: f64) -> Result<SpectralVerdict> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be a positive finite number"
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(SpectralVerdict::Stable);
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-14, 100_000)
        .ok_or(Error::RootSolverFailure { degree: n })?;
    let eigs = schur.complex_eigenvalues();
    let radius = eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let eff = tol * (1.0 + radius);

    let zero_modes = eigs.iter().filter(|e| e.norm() <= eff).count();
    if zero_modes > 1 {
        return Err(Error::DisconnectedNetwork {
            components: zero_modes,
        });
    }
    let offenders: Vec<Complex64> = eigs
        .iter()
        .filter(|e| e.norm() > eff && e.re >= -eff)
        .map(|e| Complex64::new(e.re, e.im))
        .collect();
    if offenders.is_empty() {
        Ok(SpectralVerdict::Stable)
    } else {
        Ok(SpectralVerdict::Unstable {
            eigenvalues: offenders,
        })
    }
}

/// Verdict of the global frequency-domain loop scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalVerdict {
    /// No closed-loop right-half-plane poles (beyond the angle-translation
    /// mode at the origin, which is quotiented out).
    Stable,
    /// The closed loop has right-half-plane poles.
    Unstable {
        /// Number of closed-loop right-half-plane poles, counted with
        /// multiplicity: the buses' own right-half-plane root count minus
        /// the winding of the loop determinant.
        rhp_poles: u32,
    },
}

impl GlobalVerdict {
    /// True for the [`GlobalVerdict::Stable`] verdict.
    #[must_use]
    pub fn is_stable(&self) -> bool {
        matches!(self, GlobalVerdict::Stable)
    }
}

/// Global closed-loop check valid with delays: an argument-principle count
/// of the closed-loop right-half-plane poles.
///
/// With `L_B = U Lambda U'` and the tilde dropping the zero eigenvalue
/// (whose `1/s` direction carries the unobservable angle-translation mode),
/// the closed-loop characteristic function factors exactly as
///
/// ```text
/// char(s) = s^n · prod_i chi_i(s) · f(s),
/// f(s)    = det( I + Lambda~ U~' P(s) U~ / s ),
/// ```
///
/// where `chi_i` is bus `i`'s own characteristic function. The net
/// zero-minus-pole count of `f` over the right half-plane is minus the
/// winding `W` of `f` along the closed contour (imaginary axis, indented
/// around the origin pole on a small right-half-plane arc of radius
/// `rho = grid.min() / 10`, closed through `f = 1` at high frequency), so
/// the closed-loop right-half-plane pole count is exactly
///
/// ```text
/// Z  =  sum_i rhp(chi_i)  -  W,
/// ```
///
/// with each bus's own root count taken from its internal stability scan.
/// The identity needs no genericity assumption: any cancellation between a
/// bus root and the loop determinant nets out of `Z`. For internally stable
/// buses this reduces to the familiar rule — stable iff the loop
/// determinant does not encircle the origin — and internally unstable buses
/// are counted exactly instead of being assumed away.
///
/// # Errors
///
/// Per-bus scan errors propagate. [`Error::DisconnectedNetwork`] when the
/// line graph is not connected; [`Error::IndentationAmbiguous`] when `|f|`
/// nearly vanishes on the indentation arc; [`Error::GridTooCoarse`] when
/// phase steps cannot be resolved; [`Error::TailUnbounded`] when `f` does
/// not approach 1 within the extendable sweep range;
/// [`Error::Inconclusive`] when the combined count is negative, which
/// signals an unresolved scan rather than a meaningful verdict.
pub fn nyquist_global_check(net: &NetworkModel, grid: &FrequencyGrid) -> Result<GlobalVerdict> {
    let mut bus_rhp_total: i64 = 0;
    for bus in net.buses() {
        match bus.internal_stability(grid)? {
            BusStability::Stable => {}
            BusStability::Unstable { rhp_roots } => bus_rhp_total += i64::from(rhp_roots),
        }
    }
    let components = net.connected_components();
    if components > 1 {
        return Err(Error::DisconnectedNetwork { components });
    }
    let n = net.len();
    if n == 1 {
        // No couplings: the loop determinant is identically 1 and the
        // closed loop inherits exactly the bus's own roots.
        return finish_count(bus_rhp_total);
    }

    let lap = laplacian(net);
    let eig = lap.matrix().clone().symmetric_eigen();
    // Sort eigenpairs ascending and drop the zero mode.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lam_max = eig.eigenvalues[order[n - 1]];
    let mut lambdas = Vec::with_capacity(n - 1);
    let mut u_tilde = DMatrix::zeros(n, n - 1);
    for (col, &k) in order.iter().skip(1).enumerate() {
        lambdas.push(eig.eigenvalues[k]);
        u_tilde.set_column(col, &eig.eigenvectors.column(k));
    }
    if lambdas[0] <= 1e-9 * (1.0 + lam_max) {
        // A second near-zero Laplacian eigenvalue despite graph
        // connectivity would make the quotient ill-posed.
        return Err(Error::DisconnectedNetwork { components: 2 });
    }

    let buses = net.buses().to_vec();
    let mut min_abs_on_arc = f64::INFINITY;
    let f_of = |s: Complex64| -> Result<Complex64> {
        let mut m = DMatrix::<Complex64>::identity(n - 1, n - 1);
        let mut p = Vec::with_capacity(n);
        for bus in &buses {
            p.push(bus.eval(s)?);
        }
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += u_tilde[(k, r)] * p[k] * u_tilde[(k, c)];
                }
                m[(r, c)] += Complex64::new(lambdas[r], 0.0) * acc / s;
            }
        }
        Ok(m.determinant())
    };

    let rho = grid.min() / 10.0;

    // Indentation arc s = rho e^{j phi}, phi from -pi/2 to pi/2.
    let arc_steps = 256;
    let phis: Vec<f64> = (0..=arc_steps)
        .map(|k| -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / arc_steps as f64)
        .collect();
    let mut arc_f = |phi: f64| -> Result<Complex64> {
        let s = Complex64::new(rho * phi.cos(), rho * phi.sin());
        let v = f_of(s)?;
        min_abs_on_arc = min_abs_on_arc.min(v.norm());
        Ok(v)
    };
    let arc = winding::sweep_phase(&mut arc_f, &phis)?;
    if min_abs_on_arc <= 1e-6 {
        return Err(Error::IndentationAmbiguous {
            omega: rho,
            magnitude: min_abs_on_arc,
        });
    }

    // Imaginary axis from rho up to a frequency where f has settled near 1,
    // extending the grid if needed.
    let mut omegas: Vec<f64> = vec![rho];
    let lead_steps = 16;
    for k in 1..=lead_steps {
        omegas.push(rho * (grid.min() / rho).powf(k as f64 / lead_steps as f64));
    }
    omegas.extend(grid.points().iter().skip(1).copied());
    let mut omega_end = grid.max();
    let mut f_end = f_of(Complex64::new(0.0, omega_end))?;
    let mut extensions = 0;
    while (f_end - Complex64::new(1.0, 0.0)).norm() >= 0.5 {
        extensions += 1;
        if extensions > 8 {
            return Err(Error::TailUnbounded(format!(
                "loop determinant has not settled near 1 by omega = {omega_end:e}"
            )));
        }
        for k in 1..=128 {
            omegas.push(omega_end * 10f64.powf(k as f64 / 128.0));
        }
        omega_end *= 10.0;
        f_end = f_of(Complex64::new(0.0, omega_end))?;
    }
    let mut axis_f = |w: f64| -> Result<Complex64> { f_of(Complex64::new(0.0, w)) };
    let axis = winding::sweep_phase(&mut axis_f, &omegas)?;

    // Closure through f = 1: with |f_end - 1| < 0.5 both closure legs stay
    // inside a disc excluding the origin, so their phase change is the
    // principal-value step to (and from) zero argument.
    let closure = -2.0 * f_end.arg();

    let total = 2.0 * axis.delta_arg + arc.delta_arg + closure;
    let w = winding::round_winding(total, "global loop determinant")?;
    // Traversal keeps the right half-plane on the right, so each net
    // enclosed zero of f subtracts one turn; adding back the bus root
    // count yields the closed-loop total.
    finish_count(bus_rhp_total - i64::from(w))
}

/// Map a signed closed-loop right-half-plane root count to a verdict.
fn finish_count(z: i64) -> Result<GlobalVerdict> {
    match u32::try_from(z) {
        Ok(0) => Ok(GlobalVerdict::Stable),
        Ok(rhp_poles) => Ok(GlobalVerdict::Unstable { rhp_poles }),
        // A negative count means a scan stage lost track of the phase;
        // refuse rather than guess.
        Err(_) => Err(Error::Inconclusive {
            what: "global loop winding (negative pole count)".into(),
            margin: z as f64,
        }),
    }
}

/// Outcome of the decentralized protocol on one network.
#[derive(Debug, Clone)]
pub struct ProtocolReport {
    /// Per-bus outcome, index-aligned with the network's buses: a
    /// certificate, or the error that prevented one.
    pub outcomes: Vec<Result<Certificate>>,
    /// True iff every bus produced a certificate and was admitted.
    pub certified: bool,
}

/// Run the decentralized protocol: per bus, find the minimal budget
/// [`cert::min_gamma`] and admit it against the bus's aggregate line
/// susceptance. Every bus admitted certifies closed-loop stability of the
/// whole interconnection; a failed admission leaves the network *uncertified*
/// (the test is sufficient, not necessary).
///
/// Per-bus failures (instability, unbounded tails, no certificate below the
/// budget cap) are recorded in the report rather than aborting the run.
///
/// # Errors
///
/// [`Error::InvalidParameter`] from an invalid grid or filter only;
/// per-bus errors land in the report.
pub fn protocol_certify_network(
    net: &NetworkModel,
    h: &HFilter,
    grid: &FrequencyGrid,
) -> Result<ProtocolReport> {
    let mut outcomes = Vec::with_capacity(net.len());
    let mut certified = true;
    for idx in 0..net.len() {
        let susceptance = diag_susceptance(net, idx)?;
        // The per-bus sweep certifies the interconnection; it presumes the
        // bus passes on its own. A bus with right-half-plane roots of its
        // own can never be admitted, whatever its sweep says.
        let precheck = match net.buses()[idx].internal_stability(grid) {
            Ok(BusStability::Stable) => Ok(()),
            Ok(BusStability::Unstable { rhp_roots }) => Err(Error::AssumptionViolated(format!(
                "bus {idx} is internally unstable ({rhp_roots} right-half-plane roots)"
            ))),
            Err(e) => Err(e),
        };
        let outcome = precheck
            .and_then(|()| cert::min_gamma(h, &net.buses()[idx], grid, cert::DEFAULT_GAMMA_TOL))
            .and_then(|gamma_min| {
                let margin = cert::certify_bus(h, &net.buses()[idx], gamma_min, grid)?;
                Ok(Certificate {
                    gamma_min,
                    margin,
                    susceptance_budget: 1.0 / gamma_min,
                    diag_susceptance: susceptance,
                    admitted: cert::admit(gamma_min, susceptance),
                    grid: grid.clone(),
                })
            });
        match &outcome {
            Ok(c) if c.admitted => {}
            _ => certified = false,
        }
        outcomes.push(outcome);
    }
    Ok(ProtocolReport {
        outcomes,
        certified,
    })
}

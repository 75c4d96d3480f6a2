//! Error type shared by every module of the crate.

use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building models or running a
/// certification.
///
/// Variants are grouped roughly by the layer that raises them: transfer
/// function algebra, bus models, certification, network assembly, and
/// time-domain simulation. All variants are `Clone` so per-bus outcomes can
/// be collected into reports without consuming them.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A constructor or operation received a value outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A transfer function was evaluated where its denominator vanishes.
    #[error("evaluation at a pole near s = {s}")]
    EvaluationAtPole { s: Complex64 },

    /// The feedback interconnection `a / (1 + a b)` has an identically zero
    /// closed-loop denominator.
    #[error("degenerate feedback interconnection: 1 + a*b is identically zero")]
    DegenerateFeedback,

    /// Inversion of a transfer function whose numerator is identically zero.
    #[error("transfer function with zero numerator is not invertible")]
    NotInvertible,

    /// The companion-matrix eigenvalue iteration did not converge.
    #[error("root solver failed to converge for a degree-{degree} polynomial")]
    RootSolverFailure { degree: usize },

    /// A transfer function that must be stable has a pole in the closed
    /// right half-plane.
    #[error("internally unstable: pole at {pole} has nonnegative real part")]
    InternallyUnstable { pole: Complex64 },

    /// A scan came too close to its decision boundary to call either way at
    /// the achievable resolution.
    #[error("inconclusive {what}: margin {margin:e} is within tolerance of the boundary")]
    Inconclusive { what: String, margin: f64 },

    /// A precondition of a certification routine does not hold for the
    /// supplied system.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    /// The high-frequency tail of a certification sweep could not be
    /// bounded, so the sweep result does not extend to all frequencies.
    #[error("unbounded high-frequency tail: {0}")]
    TailUnbounded(String),

    /// No coupling bound within the search range certifies the bus.
    #[error("no certificate exists with gamma up to {gamma_cap:e}")]
    NoCertificate { gamma_cap: f64 },

    /// First-order design parameters outside the admissible region.
    #[error("invalid first-order design: {0}")]
    InvalidDesign(String),

    /// No candidate filter certifies every expected model.
    #[error("no feasible filter among the supplied candidates")]
    NoFeasibleH,

    /// A model uses a delayed controller where an exact rational form or a
    /// finite-dimensional state space was requested.
    #[error("bus {bus} has a nonzero delay; this operation requires tau = 0")]
    DelayPresent { bus: usize },

    /// Two lines connect the same unordered pair of buses.
    #[error("duplicate line between buses {i} and {j}")]
    DuplicateLine { i: usize, j: usize },

    /// A line references a bus index outside the model.
    #[error("line endpoint {index} does not refer to a bus")]
    DanglingEndpoint { index: usize },

    /// An operation referenced a bus index outside the model.
    #[error("bus index {index} does not refer to a bus")]
    UnknownBus { index: usize },

    /// The line graph does not connect all buses.
    #[error("network is disconnected ({components} components)")]
    DisconnectedNetwork { components: usize },

    /// The algebraic equation of a zero-inertia bus cannot be solved.
    #[error("singular mass matrix: bus {bus} has no solvable algebraic equation")]
    SingularMassMatrix { bus: usize },

    /// The Nyquist image approaches the origin too closely to count
    /// encirclements reliably.
    #[error("Nyquist image ambiguous: |f| = {magnitude:e} near omega = {omega:e}")]
    IndentationAmbiguous { omega: f64, magnitude: f64 },

    /// Adjacent contour samples differ by more than a quarter turn even
    /// after refinement, so the winding count cannot be trusted.
    #[error("frequency grid too coarse near omega = {omega:e} for a reliable phase count")]
    GridTooCoarse { omega: f64 },

    /// The simulation step is too large for the fastest dynamics present.
    #[error("step dt = {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },

    /// A trajectory has too few samples to classify.
    #[error("trajectory too short: {samples} samples")]
    TooShort { samples: usize },

    /// A trajectory has not settled enough for steady-state metrics.
    #[error("trajectory not settled: trailing spread {spread:e}")]
    NotSettled { spread: f64 },
}

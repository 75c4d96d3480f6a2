//! Library half of the `gridcert` command-line tool: configuration
//! parsing and report assembly, kept separate from the binary so tests can
//! exercise them directly.

pub mod config;
pub mod report;

/// Conventional process exit codes, shared by every subcommand.
pub mod exit {
    /// Positive verdict: certified / stable / decaying.
    pub const SUCCESS: i32 = 0;
    /// Negative verdict: not certified / unstable / growing.
    pub const NEGATIVE: i32 = 2;
    /// Invalid input: unreadable, unparseable, or inconsistent config.
    pub const INVALID_INPUT: i32 = 3;
    /// Numerical failure: a solver or bound did not converge.
    pub const NUMERICAL: i32 = 4;
    /// Inconclusive: the scan refused to call the verdict at the achievable
    /// resolution.
    pub const INCONCLUSIVE: i32 = 5;
}

/// Exit code for a core error, per the [`exit`] convention.
///
/// Verdict-like refusals (no certificate below the cap, a violated
/// precondition) are negative verdicts; resolution-limited refusals are
/// inconclusive; solver breakdowns are numerical failures; everything that
/// points back at the input model is invalid input.
#[must_use]
pub fn exit_code_for(e: &gridcert_core::Error) -> i32 {
    use gridcert_core::Error;
    match e {
        Error::NoCertificate { .. }
        | Error::AssumptionViolated(_)
        | Error::InternallyUnstable { .. } => exit::NEGATIVE,
        Error::Inconclusive { .. }
        | Error::GridTooCoarse { .. }
        | Error::IndentationAmbiguous { .. } => exit::INCONCLUSIVE,
        Error::RootSolverFailure { .. }
        | Error::TailUnbounded(_)
        | Error::EvaluationAtPole { .. }
        | Error::DegenerateFeedback
        | Error::NotInvertible
        | Error::NoFeasibleH => exit::NUMERICAL,
        Error::InvalidParameter(_)
        | Error::InvalidDesign(_)
        | Error::DelayPresent { .. }
        | Error::DuplicateLine { .. }
        | Error::DanglingEndpoint { .. }
        | Error::UnknownBus { .. }
        | Error::DisconnectedNetwork { .. }
        | Error::SingularMassMatrix { .. }
        | Error::StepTooLarge { .. }
        | Error::TooShort { .. }
        | Error::NotSettled { .. } => exit::INVALID_INPUT,
    }
}

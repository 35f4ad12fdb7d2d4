use thiserror::Error;

/// Errors surfaced by the pendulum library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Parameter validation failed (non-finite, wrong sign, bad config).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A velocity outside (-1, 1) was supplied where a subluminal one is required.
    #[error("superluminal velocity |v| = {v} (the model requires |v| < 1)")]
    Superluminal { v: f64 },

    /// The winding/period pair violates the necessary condition |2Nπ/T| < 1.
    #[error("inadmissible parameters: |2Nπ/T| = {drift} >= 1 for N = {winding}, T = {period}")]
    Inadmissible {
        winding: i64,
        period: f64,
        drift: f64,
    },

    /// The step budget ran out before reaching the requested time.
    #[error("integration step budget exhausted at t = {reached} (target t = {target})")]
    StepBudgetExhausted { reached: f64, target: f64 },

    /// Step-size control underflowed; the problem is badly scaled for the tolerances.
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    /// A quantity left its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The boundary twist inequality failed on the strip border.
    #[error("boundary twist violated at q = {q}: angular displacement {value} on the p = {p} circle")]
    BoundaryTwistViolation { q: f64, p: f64, value: f64 },

    /// The map was observed to be non-monotone in the momentum where twist was assumed.
    #[error("twist violation detected near θ = {theta}: Q(θ, ·) is not monotone on the bracket")]
    TwistViolation { theta: f64 },

    /// The index circle contains the fixed point too tightly for a reliable winding count.
    #[error("index circle too small: displacement norm {norm:.3e} at sample {sample}")]
    CircleTooSmall { sample: usize, norm: f64 },

    /// No running solution exists for the requested (T, N).
    #[error("no T-periodic solution with winding N = {winding} exists for T = {period} (needs T > 2Nπ)")]
    NoRunningSolution { winding: i64, period: f64 },

    /// Internal cross-checks disagreed; indicates a bug or a broken assumption.
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
}

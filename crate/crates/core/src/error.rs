use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Bad arguments: wrong dimensions, indices out of range, invalid options.
    #[error("usage error: {0}")]
    Usage(String),

    /// Every state has zero emission probability at an occasion.
    #[error("degenerate likelihood at unit {unit}, occasion {occasion}: zero emission in every state")]
    DegenerateLikelihood { unit: usize, occasion: usize },

    /// Zero normalizer while forming three-step posteriors.
    #[error("degenerate posterior at unit {unit}, occasion {occasion}: zero normalizer")]
    DegeneratePosterior { unit: usize, occasion: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The weighted logit objective is unbounded: coefficients diverge.
    #[error("separation in weighted logit{}: {detail}", origin.map(|u| alloc::format!(" (origin state {})", u + 1)).unwrap_or_default())]
    Separation { origin: Option<usize>, detail: String },

    #[error("singular Hessian in weighted logit after ridge retry")]
    SingularHessian,

    #[error("optimizer did not converge after {iterations} iterations (gradient max-norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("logit M-step failed at EM iteration {iteration}: {source}")]
    MStep {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    /// Too many failed replications or bootstrap draws.
    #[error("{failed} of {total} runs failed (limit 20%)")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Whether the error comes from numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Usage(_))
    }
}

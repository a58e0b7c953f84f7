use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("not solvable: {0}")]
    NotSolvable(String),
    #[error("ansatz atoms collide with jet atoms: {0}")]
    AnsatzCollision(String),
    #[error("unsupported generator shape: {0}")]
    UnsupportedGenerator(String),
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("not translation-invariant in `{0}`")]
    NotTranslationInvariant(String),
    #[error("excluded variable still present: `{0}`")]
    ExcludedVariablePresent(String),
    #[error("cannot eliminate `{0}`")]
    CannotEliminate(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

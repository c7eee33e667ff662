use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed molecule {0:?}")]
    MalformedMolecule(String),
    #[error("template {template} does not match molecule {molecule:?}")]
    TemplateMismatch { molecule: String, template: u32 },
    #[error("unresolved route: molecule {0:?} is an open leaf")]
    UnresolvedRoute(String),
    #[error("world generation failed after {0} rejected rule sets")]
    GenerationFailure(usize),
    #[error("degenerate world: {0}")]
    DegenerateWorld(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid target: {0}")]
    Target(String),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("search error: {0}")]
    Search(String),
    #[error("terminal molecule {0:?} cannot be a planning target")]
    TerminalTarget(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

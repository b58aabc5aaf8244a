use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("incompatible ports: {0}")]
    IncompatiblePorts(String),
    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid flight plan: {0}")]
    InvalidPlan(String),
    #[error("UE position {0:?} is outside the environment area")]
    OutOfBounds([f64; 3]),
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    #[error("invalid combiner: {0}")]
    InvalidCombiner(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible subset: requested {requested} APs but only {available} available")]
    InfeasibleSubset { requested: usize, available: usize },
    #[error("incompatible dataset: {0}")]
    IncompatibleDataset(String),
    #[error("line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("import: {0}")]
    Import(String),
    #[error("config: {0}")]
    Config(String),
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.into().in_stage(stage))
    }
}

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate paper id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("invalid category configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("category {0:?} is textual and has no context vectors")]
    TextualContext(String),

    #[error("paper has no in-vocabulary text tokens")]
    EmptyText,

    #[error("token {token:?} not found in category {category:?}")]
    NotFound {
        category: String,
        token: String,
        suggestions: Vec<String>,
    },

    #[error("measure {measure} is not defined between two textual elements")]
    UnsupportedMeasure { measure: &'static str },

    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("question for paper {0:?} has no remaining elements to score from")]
    Unanswerable(String),

    #[error("author vocabulary has {available} entries, fewer than {requested} choices")]
    TooFewAuthors { available: usize, requested: usize },

    #[error("model file format error: {0}")]
    Format(String),

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error("model file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

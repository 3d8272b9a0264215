use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite gradient in parameter block `{block}` at epoch {epoch}")]
    NonFiniteGradient { block: String, epoch: usize },
    #[error("dataset too short: {0}")]
    DatasetTooShort(String),
    #[error("empty training set: the standardizer needs at least 2 records, got {0}")]
    EmptyTrainingSet(usize),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}

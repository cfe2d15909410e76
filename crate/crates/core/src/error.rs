use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("n-gram order {0} is not covered by the table")]
    UnsupportedOrder(usize),

    #[error("table load failed at line {line}: {message}")]
    Load { line: usize, message: String },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("cannot serialize: {0}")]
    Serialize(String),

    #[error("statistic undefined: character {0:?} never occurs in the corpus")]
    UndefinedStatistic(char),

    #[error("prediction and annotation cover different sequences: {predicted:?} vs {gold:?}")]
    Alignment { predicted: String, gold: String },

    #[error(
        "criterion {0:?} is not admissible for training: a single whole-sequence bracket \
         scores perfectly on compatible-brackets metrics"
    )]
    InadmissibleCriterion(String),

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn at_line(self, line: usize) -> Self {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }

    pub(crate) fn load(line: usize, msg: impl Into<String>) -> Self {
        Error::Load {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn parse(column: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            column,
            message: msg.into(),
        }
    }
}

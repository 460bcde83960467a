// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("corpus contains no documents with extractable keywords")]
    EmptyCorpus,
    #[error("duplicate document id {0}")]
    DuplicateDocId(u32),
    #[error("requested {requested} keywords but only {available} distinct keywords exist")]
    TooFewKeywords { requested: usize, available: usize },
    #[error("need at least 2 documents to split, found {0}")]
    TooFewDocuments(usize),
    #[error("keyword index {keyword} out of range for a universe of {n}")]
    KeywordOutOfRange { keyword: u32, n: usize },
    #[error("invalid conjunction: {0}")]
    InvalidConjunction(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension {0} has zero probability mass")]
    ZeroMass(usize),
    #[error("zero marginal while conditioning on {0}")]
    ZeroMarginal(String),
    #[error("records of s-term token {token} disagree on s-term volume ({first} vs {second})")]
    InconsistentVolume { token: u32, first: usize, second: usize },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("auxiliary dataset is empty")]
    EmptyAuxDataset,
    #[error("{cols} tokens cannot be injectively assigned to {rows} candidates")]
    Infeasible { rows: usize, cols: usize },
    #[error("cost matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("every s-term cost term is disabled")]
    NoCostTerms,
    #[error("token {0} not present in the ground-truth ledger")]
    UnknownToken(u32),
    #[error("leakage trace is empty")]
    EmptyTrace,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

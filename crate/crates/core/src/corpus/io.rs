use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Account, Corpus, CorpusError, Revision, SockpuppetRecord};
use crate::jsonl::{self, JsonlError};

/// The three corpus files at their conventional names inside one directory.
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub accounts: PathBuf,
    pub revisions: PathBuf,
    pub records: PathBuf,
}

impl CorpusFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            accounts: dir.join("accounts.jsonl"),
            revisions: dir.join("revisions.jsonl"),
            records: dir.join("records.jsonl"),
        }
    }
}

/// One line of a pairs file. Synthetic ground truth leaves `group_id` null.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairRecord {
    pub parent_id: String,
    pub child_id: String,
    pub group_id: Option<u64>,
}

fn parse_err(err: JsonlError) -> CorpusError {
    match err {
        JsonlError::Parse { path, line, reason } => CorpusError::RecordParse {
            line,
            reason: format!("{}: {reason}", path.display()),
        },
        other => CorpusError::Io(other),
    }
}

pub fn load_corpus(
    accounts_path: &Path,
    revisions_path: &Path,
    records_path: &Path,
) -> Result<Corpus, CorpusError> {
    let accounts: Vec<Account> = jsonl::read_records(accounts_path).map_err(parse_err)?;
    let revisions: Vec<Revision> = jsonl::read_records(revisions_path).map_err(parse_err)?;
    let records: Vec<SockpuppetRecord> = jsonl::read_records(records_path).map_err(parse_err)?;
    Corpus::new(accounts, revisions, records)
}

pub fn write_corpus(corpus: &Corpus, files: &CorpusFiles) -> Result<(), CorpusError> {
    jsonl::write_records(&files.accounts, corpus.accounts())?;
    jsonl::write_records(&files.revisions, corpus.revisions())?;
    jsonl::write_records(&files.records, corpus.sockpuppet_records())?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>, CorpusError> {
    jsonl::read_records(path).map_err(parse_err)
}

pub fn write_pairs(path: &Path, pairs: &[PairRecord]) -> Result<(), CorpusError> {
    Ok(jsonl::write_records(path, pairs)?)
}

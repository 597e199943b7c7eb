use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;
use thiserror::Error;

pub const EXIT_IO: u8 = 3;
pub const EXIT_INPUT: u8 = 4;
pub const EXIT_DATA: u8 = 5;
pub const EXIT_CONFIG: u8 = 6;
pub const EXIT_MODEL: u8 = 7;
pub const EXIT_NUMERIC: u8 = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lexpalo::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use lexpalo::Error as E;
        match self {
            CliError::Write { .. } | CliError::Read { .. } => EXIT_IO,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::Io { .. } => EXIT_IO,
                E::Format { .. } | E::DuplicateId { .. } | E::InvalidRecord { .. } => EXIT_INPUT,
                E::EmptyCorpus
                | E::StratumTooSmall { .. }
                | E::EmptyDocument
                | E::WindowTooLong { .. }
                | E::LabelMismatch { .. }
                | E::EmptyClass(_)
                | E::InconsistentClasses => EXIT_DATA,
                E::InvalidConfig(_) | E::AlphaNonPositive(_) => EXIT_CONFIG,
                E::Model(_) | E::VocabularyMismatch | E::UnknownClass(_) => EXIT_MODEL,
                E::DegenerateFit(_) | E::NoThreshold(_) | E::Norm { .. } | E::Degenerate(_) => EXIT_NUMERIC,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Shortest round-trip text; magnitudes below 1e-6 use exponent form.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-6 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Report directory writer. Every file goes to a temporary sibling first and
/// is renamed into place, so readers never see a partial report.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Write {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        let err = |source| CliError::Write {
            path: path.clone(),
            source,
        };
        let mut tmp = NamedTempFile::new_in(&self.root).map_err(err)?;
        tmp.write_all(bytes).map_err(err)?;
        tmp.as_file().sync_all().map_err(err)?;
        tmp.persist(&path).map_err(|e| err(e.error))?;
        Ok(path)
    }

    /// Writes `rows` under `header` as CSV.
    pub fn csv<I, R, S>(&self, name: &str, header: &[&str], rows: I) -> CliResult<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let path = self.root.join(name);
        let err = |e: csv::Error| CliError::Write {
            path: path.clone(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Write {
            path: path.clone(),
            source: e.into_error(),
        })?;
        self.write(name, &bytes)
    }
}

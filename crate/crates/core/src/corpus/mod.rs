//! Corpus data model: seed entries, code pairs and the append-only manifest.

mod ingest;
mod store;

use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::contract::ContractParadigm;

pub use ingest::{ingest_seed_tree, Ingest, IngestReport, IngestWarning, KindRules};
pub use store::{append_pairs, load_manifest, meta_path, persist_manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Ansatz,
    FeatureMap,
    MlQmlPair,
}

impl fmt::Display for SeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedKind::Ansatz => "ansatz",
            SeedKind::FeatureMap => "feature_map",
            SeedKind::MlQmlPair => "ml_qml_pair",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryTag {
    Qiskit,
    Pennylane,
    Torchquantum,
    Qutip,
    Other,
}

impl LibraryTag {
    /// Guesses the subject library from import statements.
    pub fn detect(code: &str) -> Self {
        const MODULES: [(&str, LibraryTag); 4] = [
            ("qiskit", LibraryTag::Qiskit),
            ("pennylane", LibraryTag::Pennylane),
            ("torchquantum", LibraryTag::Torchquantum),
            ("qutip", LibraryTag::Qutip),
        ];
        for line in code.lines() {
            let line = line.trim_start();
            let module = if let Some(rest) = line.strip_prefix("import ") {
                rest
            } else if let Some(rest) = line.strip_prefix("from ") {
                rest
            } else {
                continue;
            };
            let root = module
                .split(|c: char| c == '.' || c == ',' || c.is_whitespace())
                .next()
                .unwrap_or("");
            if let Some((_, tag)) = MODULES.iter().find(|(m, _)| *m == root) {
                return *tag;
            }
        }
        LibraryTag::Other
    }
}

/// One discovered seed before it becomes a [`CodePair`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub relative_path: String,
    pub kind: SeedKind,
    pub verified: bool,
    pub library_tag: LibraryTag,
    pub ml_code: Option<String>,
    pub qml_code: Option<String>,
}

impl SeedEntry {
    pub fn validate(&self) -> Result<(), String> {
        let present = |c: &Option<String>| c.as_deref().is_some_and(|s| !s.is_empty());
        match self.kind {
            SeedKind::MlQmlPair if !(present(&self.ml_code) && present(&self.qml_code)) => {
                Err("ml_qml_pair seed needs both payloads".into())
            }
            SeedKind::Ansatz | SeedKind::FeatureMap if self.qml_code.is_none() => {
                Err(format!("{} seed needs a quantum payload", self.kind))
            }
            SeedKind::MlQmlPair if self.verified => {
                Err("only ansatz and feature_map seeds can be verified".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Seed,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    Extension,
    ControlledModification,
    Combination,
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Paradigm::Extension => "extension",
            Paradigm::ControlledModification => "controlled_modification",
            Paradigm::Combination => "combination",
        })
    }
}

impl From<ContractParadigm> for Paradigm {
    fn from(p: ContractParadigm) -> Self {
        match p {
            ContractParadigm::Extension => Paradigm::Extension,
            ContractParadigm::ControlledModification => Paradigm::ControlledModification,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub model_name: String,
    pub temperature: f64,
}

/// One classical/quantum source pair. Field order is the on-disk layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodePair {
    pub id: String,
    pub relative_path: String,
    pub source: Source,
    pub paradigm: Option<Paradigm>,
    pub reference_count: u8,
    pub references: Vec<String>,
    pub ml_code: String,
    pub qml_code: String,
    pub syntax_valid: bool,
    pub generator: Option<Generator>,
    pub created_at: DateTime<Utc>,
}

/// Hex SHA-256 over the NUL-separated path and payloads.
pub fn pair_id(relative_path: &str, ml_code: &str, qml_code: &str) -> String {
    let mut h = Sha256::new();
    h.update(relative_path.as_bytes());
    h.update([0]);
    h.update(ml_code.as_bytes());
    h.update([0]);
    h.update(qml_code.as_bytes());
    hex::encode(h.finalize())
}

impl CodePair {
    /// Checks the source/paradigm/reference invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if usize::from(self.reference_count) != self.references.len() {
            return Err(format!(
                "reference_count {} but {} references",
                self.reference_count,
                self.references.len()
            ));
        }
        if self.reference_count > 4 {
            return Err("more than 4 references".into());
        }
        match self.source {
            Source::Scaled => {
                let Some(paradigm) = self.paradigm else {
                    return Err("scaled pair without paradigm".into());
                };
                if self.generator.is_none() {
                    return Err("scaled pair without generator".into());
                }
                match (self.reference_count, paradigm) {
                    (0, _) => return Err("scaled pair without references".into()),
                    (1, Paradigm::Combination) => {
                        return Err("single reference cannot be a combination".into())
                    }
                    (2.., p) if p != Paradigm::Combination => {
                        return Err("multiple references require combination".into())
                    }
                    _ => {}
                }
            }
            Source::Seed => {
                if self.paradigm.is_some() || self.reference_count != 0 {
                    return Err("seed pair with paradigm or references".into());
                }
            }
        }
        if self.syntax_valid && (self.ml_code.is_empty() || self.qml_code.is_empty()) {
            return Err("syntax_valid pair with an empty payload".into());
        }
        Ok(())
    }

    pub fn has_both_payloads(&self) -> bool {
        !self.ml_code.is_empty() && !self.qml_code.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignMeta {
    pub seed_root: String,
    pub created_at: DateTime<Utc>,
    pub tool_version: String,
}

impl Default for CampaignMeta {
    fn default() -> Self {
        Self {
            seed_root: String::new(),
            created_at: DateTime::UNIX_EPOCH,
            tool_version: crate::TOOL_VERSION.to_string(),
        }
    }
}

/// Insertion-ordered pairs with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pairs: Vec<CodePair>,
    pub campaign_meta: CampaignMeta,
}

impl Manifest {
    pub fn new(campaign_meta: CampaignMeta) -> Self {
        Self {
            pairs: Vec::new(),
            campaign_meta,
        }
    }

    pub fn pairs(&self) -> &[CodePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.pairs.iter().any(|p| p.id == id)
    }

    pub fn push(&mut self, pair: CodePair) -> Result<(), CorpusError> {
        if self.contains_id(&pair.id) {
            return Err(CorpusError::DuplicateId {
                id: pair.id,
                line: self.pairs.len() + 1,
            });
        }
        self.pairs.push(pair);
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = &CodePair> {
        self.pairs.iter().filter(|p| p.source == Source::Seed)
    }

    /// Replaces the validity flag of every pair, leaving payloads untouched.
    pub fn set_syntax_flags(&mut self, flags: &[bool]) {
        for (pair, &flag) in self.pairs.iter_mut().zip(flags) {
            pair.syntax_valid = flag;
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("seed root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("kind rules are empty")]
    EmptyRules,
    #[error("relative path `{0}` occurs twice")]
    DuplicateRelativePath(String),
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: invalid record: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}


#[cfg(test)]
mod tests {
    use super::fixtures::seed_pair;
    use super::*;

    #[test]
    fn library_detection() {
        assert_eq!(LibraryTag::detect("import qiskit\n"), LibraryTag::Qiskit);
        assert_eq!(
            LibraryTag::detect("import numpy as np\nfrom qiskit.circuit import Parameter\n"),
            LibraryTag::Qiskit
        );
        assert_eq!(LibraryTag::detect("import pennylane as qml\n"), LibraryTag::Pennylane);
        assert_eq!(LibraryTag::detect("import torchquantum as tq\n"), LibraryTag::Torchquantum);
        assert_eq!(LibraryTag::detect("from qutip import basis\n"), LibraryTag::Qutip);
        assert_eq!(LibraryTag::detect("import qiskitish\n"), LibraryTag::Other);
    }

    #[test]
    fn id_depends_on_all_fields() {
        let a = pair_id("a.py", "x", "y");
        assert_eq!(a.len(), 64);
        assert_ne!(a, pair_id("a.py", "x", "y "));
        assert_ne!(a, pair_id("a.py", "xy", ""));
    }

    #[test]
    fn code_pair_invariants() {
        let seed = seed_pair("a.py", "x = 1\n", "y = 2\n");
        assert!(seed.validate().is_ok());

        let mut scaled = seed.clone();
        scaled.source = Source::Scaled;
        scaled.paradigm = Some(Paradigm::Combination);
        scaled.reference_count = 1;
        scaled.references = vec!["a.py".into()];
        scaled.generator = Some(Generator {
            model_name: "m".into(),
            temperature: 0.6,
        });
        assert!(scaled.validate().is_err());
        scaled.paradigm = Some(Paradigm::ControlledModification);
        assert!(scaled.validate().is_ok());
        scaled.reference_count = 2;
        scaled.references.push("b.py".into());
        assert!(scaled.validate().is_err());

        let mut empty = seed_pair("b.py", "", "y = 2\n");
        assert!(empty.validate().is_err());
        empty.syntax_valid = false;
        assert!(empty.validate().is_ok());
    }

    #[test]
    fn seed_entry_invariants() {
        let mut e = SeedEntry {
            relative_path: "ansatz/a.py".into(),
            kind: SeedKind::Ansatz,
            verified: true,
            library_tag: LibraryTag::Qiskit,
            ml_code: None,
            qml_code: Some("x = 1\n".into()),
        };
        assert!(e.validate().is_ok());
        e.kind = SeedKind::MlQmlPair;
        assert!(e.validate().is_err());
        e.ml_code = Some("y\n".into());
        assert!(e.validate().is_err());
        e.verified = false;
        assert!(e.validate().is_ok());
    }

    #[test]
    fn manifest_rejects_duplicate_ids() {
        let mut m = Manifest::default();
        m.push(seed_pair("a.py", "x", "y")).unwrap();
        assert!(matches!(
            m.push(seed_pair("a.py", "x", "y")),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
        assert_eq!(m.len(), 1);
    }
}

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{
    pair_id, CampaignMeta, CodePair, CorpusError, LibraryTag, Manifest, SeedEntry, SeedKind,
    Source,
};
use crate::syntax::check_source;

/// How a seed tree is laid out.
///
/// Classical files live under `root/<ml_dir>/<p>` and quantum files under
/// `root/<qml_dir>/<p>`; the shared `<p>` pairs them. The first path segment
/// of `<p>` selects the kind through `kinds`, falling back to `default_kind`.
/// Ansatz and feature-map seeds only need the quantum side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindRules {
    pub ml_dir: String,
    pub qml_dir: String,
    pub kinds: BTreeMap<String, SeedKind>,
    pub default_kind: SeedKind,
    /// Subdirectories whose ansatz/feature-map seeds count as verified.
    pub verified: BTreeSet<String>,
    pub extensions: Vec<String>,
}

impl Default for KindRules {
    fn default() -> Self {
        Self {
            ml_dir: "ML-Github".into(),
            qml_dir: "QML-Github".into(),
            kinds: BTreeMap::from([
                ("ansatz".to_string(), SeedKind::Ansatz),
                ("feature_map".to_string(), SeedKind::FeatureMap),
            ]),
            default_kind: SeedKind::MlQmlPair,
            verified: BTreeSet::from(["ansatz".to_string(), "feature_map".to_string()]),
            extensions: vec!["py".into()],
        }
    }
}

impl KindRules {
    pub fn kind_of(&self, relative_path: &str) -> SeedKind {
        let first = relative_path.split('/').next().unwrap_or("");
        if !relative_path.contains('/') {
            return self.default_kind;
        }
        self.kinds.get(first).copied().unwrap_or(self.default_kind)
    }

    fn is_verified(&self, relative_path: &str) -> bool {
        let kind = self.kind_of(relative_path);
        kind != SeedKind::MlQmlPair
            && relative_path
                .split_once('/')
                .is_some_and(|(first, _)| self.verified.contains(first))
    }

    fn accepts(&self, path: &Path) -> bool {
        path.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| self.extensions.iter().any(|x| x == e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestWarning {
    Unpaired { path: String, missing: String },
    Unreadable { path: String, message: String },
    OutsideSubtrees { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub warnings: Vec<IngestWarning>,
}

impl IngestReport {
    pub fn is_empty(&self) -> bool {
        self.warnings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingest {
    pub manifest: Manifest,
    pub entries: Vec<SeedEntry>,
    pub report: IngestReport,
}

struct Found {
    text: Option<String>,
    modified: DateTime<Utc>,
}

fn relative(base: &Path, path: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn scan(
    dir: &Path,
    rules: &KindRules,
    report: &mut IngestReport,
    label: &str,
) -> Result<BTreeMap<String, Found>, CorpusError> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let mut lowered: HashMap<String, String> = HashMap::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e.path().map(|p| relative(dir, p)).unwrap_or_default();
                report.warnings.push(IngestWarning::Unreadable {
                    path: format!("{label}/{path}"),
                    message: e.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() || !rules.accepts(entry.path()) {
            continue;
        }
        let rel = relative(dir, entry.path());
        if let Some(previous) = lowered.insert(rel.to_lowercase(), rel.clone()) {
            return Err(CorpusError::DuplicateRelativePath(format!("{previous} / {rel}")));
        }
        let modified = entry
            .metadata()
            .ok()
            .and_then(|m| m.modified().ok())
            .map(DateTime::<Utc>::from)
            .unwrap_or(DateTime::UNIX_EPOCH);
        let text = match fs::read_to_string(entry.path()) {
            Ok(t) => Some(t),
            Err(e) => {
                report.warnings.push(IngestWarning::Unreadable {
                    path: format!("{label}/{rel}"),
                    message: e.to_string(),
                });
                None
            }
        };
        out.insert(rel, Found { text, modified });
    }
    Ok(out)
}

/// Walks `root` and turns every seed file or file pair into a seed
/// [`CodePair`], in path order. Unpaired and unreadable files end up in the
/// report; an ambiguous relative path is fatal.
pub fn ingest_seed_tree(root: &Path, rules: &KindRules) -> Result<Ingest, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingRoot(root.to_path_buf()));
    }
    if rules.kinds.is_empty() && rules.ml_dir.is_empty() && rules.qml_dir.is_empty() {
        return Err(CorpusError::EmptyRules);
    }
    let mut report = IngestReport::default();

    let mut stray: Vec<String> = fs::read_dir(root)
        .map_err(|source| CorpusError::Io {
            path: root.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| *n != rules.ml_dir && *n != rules.qml_dir && !n.starts_with('.'))
        .collect();
    stray.sort();
    report
        .warnings
        .extend(stray.into_iter().map(|path| IngestWarning::OutsideSubtrees { path }));

    let ml = scan(&root.join(&rules.ml_dir), rules, &mut report, &rules.ml_dir)?;
    let qml = scan(&root.join(&rules.qml_dir), rules, &mut report, &rules.qml_dir)?;

    let paths: BTreeSet<&String> = ml.keys().chain(qml.keys()).collect();
    let mut manifest_time = DateTime::UNIX_EPOCH;
    let mut pairs = Vec::new();
    let mut entries = Vec::new();
    for path in paths {
        let kind = rules.kind_of(path);
        let ml_found = ml.get(path);
        let qml_found = qml.get(path);
        let missing = match (kind, ml_found, qml_found) {
            (SeedKind::MlQmlPair, None, _) => Some(&rules.ml_dir),
            (_, _, None) => Some(&rules.qml_dir),
            _ => None,
        };
        if let Some(missing) = missing {
            report.warnings.push(IngestWarning::Unpaired {
                path: path.clone(),
                missing: missing.clone(),
            });
            continue;
        }
        // Unreadable sides were already reported.
        let ml_text = match ml_found {
            Some(Found { text: None, .. }) => continue,
            Some(Found { text: Some(t), .. }) => Some(t.clone()),
            None => None,
        };
        let Some(qml_text) = qml_found.and_then(|f| f.text.clone()) else {
            continue;
        };
        let modified = ml_found
            .map(|f| f.modified)
            .into_iter()
            .chain(qml_found.map(|f| f.modified))
            .max()
            .unwrap_or(DateTime::UNIX_EPOCH);
        manifest_time = manifest_time.max(modified);

        let entry = SeedEntry {
            relative_path: path.clone(),
            kind,
            verified: rules.is_verified(path),
            library_tag: LibraryTag::detect(&qml_text),
            ml_code: ml_text.clone(),
            qml_code: Some(qml_text.clone()),
        };
        if let Err(reason) = entry.validate() {
            report.warnings.push(IngestWarning::Unreadable {
                path: path.clone(),
                message: reason,
            });
            continue;
        }
        let ml_code = ml_text.unwrap_or_default();
        let syntax_valid = !ml_code.is_empty()
            && !qml_text.is_empty()
            && check_source(&ml_code).valid
            && check_source(&qml_text).valid;
        pairs.push(CodePair {
            id: pair_id(path, &ml_code, &qml_text),
            relative_path: path.clone(),
            source: Source::Seed,
            paradigm: None,
            reference_count: 0,
            references: Vec::new(),
            ml_code,
            qml_code: qml_text,
            syntax_valid,
            generator: None,
            created_at: modified,
        });
        entries.push(entry);
    }

    let mut manifest = Manifest::new(CampaignMeta {
        seed_root: root.to_string_lossy().into_owned(),
        created_at: manifest_time,
        tool_version: crate::TOOL_VERSION.to_string(),
    });
    for pair in pairs {
        manifest.push(pair)?;
    }
    Ok(Ingest {
        manifest,
        entries,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(root: &Path, rel: &str, text: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let ingest = ingest_seed_tree(dir.path(), &KindRules::default()).unwrap();
        assert!(ingest.manifest.is_empty());
        assert!(ingest.report.is_empty());
    }

    #[test]
    fn missing_root() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_seed_tree(&dir.path().join("nope"), &KindRules::default()),
            Err(CorpusError::MissingRoot(_))
        ));
    }

    #[test]
    fn pairs_by_relative_path() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ML-Github/a.py", "import torch\n");
        write(dir.path(), "QML-Github/a.py", "import qiskit\n");
        write(dir.path(), "ML-Github/b.py", "x = 1\n");
        let ingest = ingest_seed_tree(dir.path(), &KindRules::default()).unwrap();
        let pairs = ingest.manifest.pairs();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].relative_path, "a.py");
        assert_eq!(pairs[0].source, Source::Seed);
        assert_eq!(pairs[0].reference_count, 0);
        assert!(pairs[0].syntax_valid);
        assert_eq!(
            ingest.report.warnings,
            vec![IngestWarning::Unpaired {
                path: "b.py".into(),
                missing: "QML-Github".into()
            }]
        );
        assert_eq!(ingest.entries[0].library_tag, LibraryTag::Qiskit);
    }

    #[test]
    fn single_sided_seeds_and_verification() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "QML-Github/ansatz/ra.py", "from qiskit import QuantumCircuit\n");
        write(dir.path(), "QML-Github/feature_map/zz.py", "import pennylane\n");
        write(dir.path(), "QML-Github/other/x.py", "x = 1\n");
        write(dir.path(), "ML-Github/ansatz/orphan.py", "x = 1\n");
        write(dir.path(), "README.md", "hi\n");
        let ingest = ingest_seed_tree(dir.path(), &KindRules::default()).unwrap();
        let kinds: Vec<_> = ingest.entries.iter().map(|e| (e.kind, e.verified)).collect();
        assert_eq!(kinds, vec![(SeedKind::Ansatz, true), (SeedKind::FeatureMap, true)]);
        let pair = &ingest.manifest.pairs()[0];
        assert_eq!(pair.relative_path, "ansatz/ra.py");
        assert!(pair.ml_code.is_empty());
        assert!(!pair.syntax_valid);
        assert_eq!(ingest.report.warnings.len(), 3);
    }

    #[test]
    fn deterministic() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["c", "a", "b"] {
            write(dir.path(), &format!("ML-Github/{name}.py"), "x = 1\n");
            write(dir.path(), &format!("QML-Github/{name}.py"), "y = 1\n");
        }
        let a = ingest_seed_tree(dir.path(), &KindRules::default()).unwrap();
        let b = ingest_seed_tree(dir.path(), &KindRules::default()).unwrap();
        assert_eq!(a, b);
        let paths: Vec<_> = a.manifest.pairs().iter().map(|p| p.relative_path.as_str()).collect();
        assert_eq!(paths, ["a.py", "b.py", "c.py"]);
    }

    #[test]
    fn case_collision_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ML-Github/A.py", "x = 1\n");
        write(dir.path(), "ML-Github/a.py", "x = 1\n");
        if fs::read_dir(dir.path().join("ML-Github")).unwrap().count() < 2 {
            return; // case-insensitive filesystem
        }
        assert!(matches!(
            ingest_seed_tree(dir.path(), &KindRules::default()),
            Err(CorpusError::DuplicateRelativePath(_))
        ));
    }

    #[test]
    fn unreadable_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ML-Github/a.py", "x = 1\n");
        let p = dir.path().join("QML-Github/a.py");
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, [0xff, 0xfe, 0x00]).unwrap();
        let ingest = ingest_seed_tree(dir.path(), &KindRules::default()).unwrap();
        assert!(ingest.manifest.is_empty());
        assert!(matches!(
            ingest.report.warnings[0],
            IngestWarning::Unreadable { .. }
        ));
    }
}

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{CampaignMeta, CodePair, CorpusError, Manifest};

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sidecar holding the campaign metadata of a manifest file.
pub fn meta_path(manifest: &Path) -> PathBuf {
    let mut name = manifest.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    manifest.with_file_name(name)
}

fn encode(pair: &CodePair) -> String {
    serde_json::to_string(pair).expect("CodePair always serializes")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(path))?;
    tmp.write_all(bytes).map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| io_error(path)(e.error))?;
    Ok(())
}

/// Writes one JSON record per line plus the metadata sidecar. Output is a
/// pure function of the manifest.
pub fn persist_manifest(manifest: &Manifest, out: &Path) -> Result<(), CorpusError> {
    let mut body = String::new();
    for pair in manifest.pairs() {
        body.push_str(&encode(pair));
        body.push('\n');
    }
    write_atomic(out, body.as_bytes())?;
    let meta = serde_json::to_string_pretty(&manifest.campaign_meta).expect("meta serializes");
    write_atomic(&meta_path(out), format!("{meta}\n").as_bytes())
}

/// Appends records to an existing manifest file without rewriting it.
pub fn append_pairs(out: &Path, pairs: &[CodePair]) -> Result<(), CorpusError> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(io_error(out))?;
    let mut w = BufWriter::new(file);
    for pair in pairs {
        writeln!(w, "{}", encode(pair)).map_err(io_error(out))?;
    }
    w.flush().map_err(io_error(out))
}

/// Reads a manifest written by [`persist_manifest`] or grown by
/// [`append_pairs`]. A missing sidecar yields default metadata.
pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let meta_file = meta_path(path);
    let campaign_meta = if meta_file.exists() {
        let raw = fs::read_to_string(&meta_file).map_err(io_error(&meta_file))?;
        serde_json::from_str::<CampaignMeta>(&raw).map_err(|e| CorpusError::MalformedLine {
            line: e.line(),
            message: format!("{}: {e}", meta_file.display()),
        })?
    } else {
        CampaignMeta::default()
    };

    let mut manifest = Manifest::new(campaign_meta);
    let mut seen = HashSet::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let line_no = i + 1;
        let pair: CodePair =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
                line: line_no,
                message: e.to_string(),
            })?;
        if !seen.insert(pair.id.clone()) {
            return Err(CorpusError::DuplicateId {
                id: pair.id,
                line: line_no,
            });
        }
        pair.validate().map_err(|reason| CorpusError::InvalidRecord {
            line: line_no,
            reason,
        })?;
        manifest.push(pair)?;
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use chrono::{DateTime, TimeZone, Utc};
    use proptest::prelude::*;

    use super::super::fixtures::seed_pair;
    use super::super::{pair_id, Generator, Paradigm, Source};
    use super::*;

    fn sample() -> Manifest {
        let mut m = Manifest::new(CampaignMeta {
            seed_root: "/seeds".into(),
            created_at: Utc.with_ymd_and_hms(2025, 1, 2, 3, 4, 5).unwrap(),
            tool_version: "0.1.0".into(),
        });
        m.push(seed_pair("a.py", "def f():\n    return \"x\"\n", "import qiskit\n"))
            .unwrap();
        let mut scaled = seed_pair("a__scaled_1.py", "x = 1\n", "y = 'assistantfinal'\n");
        scaled.source = Source::Scaled;
        scaled.paradigm = Some(Paradigm::Extension);
        scaled.reference_count = 1;
        scaled.references = vec!["a.py".into()];
        scaled.generator = Some(Generator {
            model_name: "mock".into(),
            temperature: 0.1,
        });
        m.push(scaled).unwrap();
        m
    }

    #[test]
    fn empty_manifest_has_no_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        persist_manifest(&Manifest::default(), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        assert_eq!(load_manifest(&path).unwrap(), Manifest::default());
    }

    #[test]
    fn round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let m = sample();
        persist_manifest(&m, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let keys: Vec<String> = {
            let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
            let raw = text.lines().next().unwrap();
            let mut keys: Vec<(usize, String)> = v
                .as_object()
                .unwrap()
                .keys()
                .map(|k| (raw.find(&format!("\"{k}\":")).unwrap(), k.clone()))
                .collect();
            keys.sort();
            keys.into_iter().map(|(_, k)| k).collect()
        };
        assert_eq!(
            keys,
            [
                "id",
                "relative_path",
                "source",
                "paradigm",
                "reference_count",
                "references",
                "ml_code",
                "qml_code",
                "syntax_valid",
                "generator",
                "created_at"
            ]
        );
        assert_eq!(load_manifest(&path).unwrap(), m);

        let first = fs::read(&path).unwrap();
        persist_manifest(&m, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn append_extends_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let m = sample();
        persist_manifest(&m, &path).unwrap();
        let extra = seed_pair("b.py", "x\n", "y\n");
        append_pairs(&path, std::slice::from_ref(&extra)).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded.pairs()[2], extra);
    }

    #[test]
    fn truncated_final_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        persist_manifest(&sample(), &path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.truncate(text.len() - 20);
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(CorpusError::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let p = seed_pair("a.py", "x\n", "y\n");
        append_pairs(&path, &[p.clone(), p]).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    fn payload() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                Just("assistantfinal".to_string()),
                Just("'''".to_string()),
                Just("\"".to_string()),
                Just("\n".to_string()),
                Just("\\".to_string()),
                "[ -~]{0,12}",
                "\\PC{0,4}",
            ],
            0..8,
        )
        .prop_map(|parts| parts.concat())
    }

    prop_compose! {
        fn arb_pair()(
            path in "[a-z]{1,8}(/[a-z_]{1,8})?\\.py",
            ml in payload(),
            qml in payload(),
            scaled in any::<bool>(),
            refs in 1usize..=4,
            temp in 0.01f64..2.0,
            secs in 0i64..4_000_000_000,
            nanos in 0u32..1_000_000_000,
            valid in any::<bool>(),
        ) -> CodePair {
            let mut p = seed_pair(&path, &ml, &qml);
            p.id = pair_id(&path, &ml, &qml);
            p.syntax_valid = valid && !ml.is_empty() && !qml.is_empty();
            p.created_at = DateTime::from_timestamp(secs, nanos).unwrap();
            if scaled {
                p.source = Source::Scaled;
                p.reference_count = refs as u8;
                p.references = (0..refs).map(|i| format!("r{i}.py")).collect();
                p.paradigm = Some(if refs == 1 { Paradigm::ControlledModification } else { Paradigm::Combination });
                p.generator = Some(Generator { model_name: "m\"x".into(), temperature: temp });
            }
            p
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip(pairs in prop::collection::vec(arb_pair(), 0..6)) {
            let mut m = Manifest::default();
            for p in pairs {
                if !m.contains_id(&p.id) {
                    m.push(p).unwrap();
                }
            }
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.jsonl");
            persist_manifest(&m, &path).unwrap();
            let text = fs::read_to_string(&path).unwrap();
            prop_assert_eq!(text.lines().count(), m.len());
            prop_assert_eq!(load_manifest(&path).unwrap(), m);
        }
    }
}

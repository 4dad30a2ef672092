//! Corpus statistics and SFT export.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{CodePair, Manifest, Paradigm, Source};
use crate::syntax::lexical_token_count;

/// Prompt used for supervised fine-tuning records; `{cml_code}` is replaced
/// by the classical payload.
pub const SFT_PROMPT_TEMPLATE: &str = "You are an expert quantum machine learning researcher. Translate the provided classical machine learning (CML) description into its quantum machine learning (QML) counterpart.\n\nCML Description: {cml_code}\n\nQML Solution:";
/// Family name for paths with no directory component.
pub const ROOT_FAMILY: &str = "(root)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMeasure {
    Chars,
    #[default]
    LexicalTokens,
}

impl LengthMeasure {
    pub fn measure(self, text: &str) -> usize {
        match self {
            LengthMeasure::Chars => text.chars().count(),
            LengthMeasure::LexicalTokens => lexical_token_count(text),
        }
    }
}

/// Which pairs feed a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScope {
    All,
    #[default]
    Scaled,
}

impl PairScope {
    fn admits(self, pair: &CodePair) -> bool {
        self == PairScope::All || pair.source == Source::Scaled
    }
}

/// How histogram series are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSplit {
    /// `cml` and `qml` series; every pair adds one length to each.
    #[default]
    Sides,
    /// One series per family, holding quantum payload lengths.
    Families,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub measure: LengthMeasure,
    /// `bucket_edges[i]..bucket_edges[i + 1]` is bucket `i`, half open.
    pub bucket_edges: Vec<usize>,
    pub series: BTreeMap<String, Vec<usize>>,
}

impl LengthHistogram {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["bucket_start".to_string(), "bucket_end".to_string()];
        header.extend(self.series.keys().cloned());
        w.write_record(&header).expect("in-memory write");
        for i in 0..self.bucket_edges.len() - 1 {
            let mut row = vec![self.bucket_edges[i].to_string(), self.bucket_edges[i + 1].to_string()];
            row.extend(self.series.values().map(|c| c[i].to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }
}

/// First path segment, or [`ROOT_FAMILY`] for top-level files.
pub fn default_family(relative_path: &str) -> String {
    match relative_path.split_once('/') {
        Some((first, _)) => first.to_string(),
        None => ROOT_FAMILY.to_string(),
    }
}

/// Buckets payload lengths in widths of `bucket_width` starting at zero.
/// A width of zero is treated as one.
pub fn length_histogram(
    manifest: &Manifest,
    measure: LengthMeasure,
    bucket_width: usize,
    scope: PairScope,
    split: SeriesSplit,
) -> LengthHistogram {
    let width = bucket_width.max(1);
    let mut lengths: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    if split == SeriesSplit::Sides {
        lengths.insert("cml".into(), Vec::new());
        lengths.insert("qml".into(), Vec::new());
    }
    for pair in manifest.pairs().iter().filter(|p| scope.admits(p)) {
        match split {
            SeriesSplit::Sides => {
                lengths.get_mut("cml").expect("present").push(measure.measure(&pair.ml_code));
                lengths.get_mut("qml").expect("present").push(measure.measure(&pair.qml_code));
            }
            SeriesSplit::Families => lengths
                .entry(default_family(&pair.relative_path))
                .or_default()
                .push(measure.measure(&pair.qml_code)),
        }
    }
    let max = lengths.values().flatten().copied().max().unwrap_or(0);
    let n_buckets = max / width + 1;
    let bucket_edges = (0..=n_buckets).map(|i| i * width).collect();
    let series = lengths
        .into_iter()
        .map(|(name, ls)| {
            let mut counts = vec![0; n_buckets];
            for l in ls {
                counts[l / width] += 1;
            }
            (name, counts)
        })
        .collect();
    LengthHistogram {
        measure,
        bucket_edges,
        series,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: String,
    /// Mean of `ml + qml` payload length per pair.
    pub avg_length: f64,
    /// Pairs with 1, 2, 3 and 4 references.
    pub ref_counts: [usize; 4],
    pub extension_count: usize,
    pub controlled_modification_count: usize,
    pub combination_count: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmTable {
    pub measure: LengthMeasure,
    pub rows: Vec<FamilyRow>,
    pub totals: FamilyRow,
}

impl ParadigmTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "family",
            "avg_length",
            "ref_1",
            "ref_2",
            "ref_3",
            "ref_4",
            "extension",
            "controlled_modification",
            "combination",
            "total",
        ])
        .expect("in-memory write");
        for r in self.rows.iter().chain(std::iter::once(&self.totals)) {
            let mut row = vec![r.family.clone(), format!("{:.1}", r.avg_length)];
            row.extend(r.ref_counts.iter().map(usize::to_string));
            row.extend(
                [
                    r.extension_count,
                    r.controlled_modification_count,
                    r.combination_count,
                    r.total,
                ]
                .iter()
                .map(usize::to_string),
            );
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

/// Tallies scaled pairs per family. Reference counts outside `1..=4` and
/// pairs with no paradigm still count towards `total`.
pub fn paradigm_table(
    manifest: &Manifest,
    family_of: impl Fn(&str) -> String,
    measure: LengthMeasure,
) -> ParadigmTable {
    let mut rows: BTreeMap<String, (FamilyRow, usize)> = BTreeMap::new();
    for pair in manifest.pairs().iter().filter(|p| p.source == Source::Scaled) {
        let family = family_of(&pair.relative_path);
        let (row, length_sum) = rows.entry(family.clone()).or_insert_with(|| {
            (
                FamilyRow {
                    family,
                    ..FamilyRow::default()
                },
                0,
            )
        });
        if (1..=4).contains(&pair.reference_count) {
            row.ref_counts[pair.reference_count as usize - 1] += 1;
        }
        match pair.paradigm {
            Some(Paradigm::Extension) => row.extension_count += 1,
            Some(Paradigm::ControlledModification) => row.controlled_modification_count += 1,
            Some(Paradigm::Combination) => row.combination_count += 1,
            None => {}
        }
        row.total += 1;
        *length_sum += measure.measure(&pair.ml_code) + measure.measure(&pair.qml_code);
    }
    let mut totals = FamilyRow {
        family: "total".into(),
        ..FamilyRow::default()
    };
    let mut total_length = 0;
    let rows = rows
        .into_values()
        .map(|(mut row, length_sum)| {
            row.avg_length = length_sum as f64 / row.total as f64;
            for i in 0..4 {
                totals.ref_counts[i] += row.ref_counts[i];
            }
            totals.extension_count += row.extension_count;
            totals.controlled_modification_count += row.controlled_modification_count;
            totals.combination_count += row.combination_count;
            totals.total += row.total;
            total_length += length_sum;
            row
        })
        .collect();
    if totals.total > 0 {
        totals.avg_length = total_length as f64 / totals.total as f64;
    }
    ParadigmTable {
        measure,
        rows,
        totals,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SftExport {
    pub records: Vec<SftRecord>,
    /// Pairs left out for failing the syntax gate or lacking a side.
    pub skipped: usize,
}

impl SftExport {
    /// One JSON object per line, in manifest order.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Builds `{prompt, completion}` records from syntax-valid pairs with both
/// payloads.
pub fn export_sft(manifest: &Manifest, prompt_template: &str) -> SftExport {
    let mut export = SftExport::default();
    for pair in manifest.pairs() {
        if pair.syntax_valid && pair.has_both_payloads() {
            export.records.push(SftRecord {
                prompt: prompt_template.replace("{cml_code}", &pair.ml_code),
                completion: pair.qml_code.clone(),
            });
        } else {
            export.skipped += 1;
        }
    }
    export
}

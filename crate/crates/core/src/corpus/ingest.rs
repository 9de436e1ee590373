use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Agreement, CorpusError, Dataset, KanoLabel, Review};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "json-lines" | "ndjson" => Ok(InputFormat::Jsonl),
            other => Err(format!(
                "unknown input format `{other}` (expected csv or jsonl)"
            )),
        }
    }
}

/// Names the fields of an input file and translates its label values.
///
/// Loaded from a small TOML file:
///
/// ```toml
/// text = "review"
/// label = "kano"
/// agreement = "unanimous"      # optional
/// id = "review_id"             # optional, defaults to the record position
/// source = "brunotte"          # optional, defaults to the file stem
///
/// [labels]
/// "B" = "basic"
///
/// [agreement_values]
/// "y" = "unanimous"
/// "n" = "tiebroken"
/// ```
///
/// Label values not listed under `[labels]` are accepted when they already
/// are a Kano label name or code.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    pub text: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Constant source tag for every record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Per-record source field; wins over `source`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_field: Option<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub agreement_values: BTreeMap<String, String>,
}

impl Mapping {
    pub fn new(text: &str, label: &str) -> Mapping {
        Mapping {
            text: text.into(),
            label: label.into(),
            ..Mapping::default()
        }
    }

    /// Mapping for the canonical JSON-lines serialisation.
    pub fn canonical() -> Mapping {
        Mapping {
            agreement: Some("agreement".into()),
            id: Some("id".into()),
            source_field: Some("source".into()),
            ..Mapping::new("text", "label")
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Mapping, String> {
        toml::from_str(s).map_err(|e| e.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mapping, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Mapping::from_toml_str(&text).map_err(|message| CorpusError::Mapping {
            path: path.display().to_string(),
            message,
        })
    }

    fn label(&self, record: usize, raw: &str) -> Result<KanoLabel, CorpusError> {
        let translated = self
            .labels
            .get(raw)
            .or_else(|| self.labels.get(raw.trim()))
            .map(String::as_str)
            .unwrap_or(raw);
        translated.parse().map_err(|_| CorpusError::UnmappedLabel {
            record,
            value: raw.to_string(),
        })
    }

    fn agreement(&self, record: usize, raw: &str) -> Result<Agreement, CorpusError> {
        let translated = self
            .agreement_values
            .get(raw)
            .map(String::as_str)
            .unwrap_or(raw);
        translated
            .parse()
            .map_err(|_| CorpusError::UnmappedAgreement {
                record,
                value: raw.to_string(),
            })
    }
}

/// One input record viewed as field name to string value.
trait RecordView {
    fn get(&self, field: &str) -> Option<String>;
}

struct CsvRecord<'a> {
    headers: &'a csv::StringRecord,
    record: csv::StringRecord,
}

impl RecordView for CsvRecord<'_> {
    fn get(&self, field: &str) -> Option<String> {
        let pos = self.headers.iter().position(|h| h == field)?;
        self.record.get(pos).map(str::to_string)
    }
}

impl RecordView for serde_json::Map<String, serde_json::Value> {
    fn get(&self, field: &str) -> Option<String> {
        match self.get(field)? {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    }
}

fn build_review(
    mapping: &Mapping,
    record: usize,
    view: &dyn RecordView,
    default_source: &str,
) -> Result<Review, CorpusError> {
    let required = |field: &str| {
        view.get(field).ok_or_else(|| CorpusError::MissingField {
            record,
            field: field.to_string(),
        })
    };
    let text = required(&mapping.text)?;
    let label = mapping.label(record, &required(&mapping.label)?)?;
    let agreement = match &mapping.agreement {
        Some(field) => mapping.agreement(record, &required(field)?)?,
        None => Agreement::Unknown,
    };
    let id = match &mapping.id {
        Some(field) => required(field)?,
        None => (record - 1).to_string(),
    };
    let source = match &mapping.source_field {
        Some(field) => required(field)?,
        None => default_source.to_string(),
    };
    Ok(Review {
        id,
        text,
        label,
        agreement,
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Reads a CSV (header row required) or JSON-lines file into a [`Dataset`].
///
/// Record numbers in errors are 1-based and count data records only.
pub fn ingest(
    path: impl AsRef<Path>,
    format: InputFormat,
    mapping: &Mapping,
) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let name = mapping.source.clone().unwrap_or_else(|| file_stem(path));
    let file = File::open(path).map_err(io_err(path))?;
    let mut reviews = Vec::new();
    match format {
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(BufReader::new(file));
            let headers = reader
                .headers()
                .map_err(|e| CorpusError::Malformed {
                    record: 0,
                    message: e.to_string(),
                })?
                .clone();
            for (i, row) in reader.records().enumerate() {
                let record = i + 1;
                let row = row.map_err(|e| CorpusError::Malformed {
                    record,
                    message: e.to_string(),
                })?;
                let view = CsvRecord {
                    headers: &headers,
                    record: row,
                };
                reviews.push(build_review(mapping, record, &view, &name)?);
            }
        }
        InputFormat::Jsonl => {
            let mut record = 0;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(io_err(path))?;
                if line.trim().is_empty() {
                    continue;
                }
                record += 1;
                let object: serde_json::Map<String, serde_json::Value> =
                    serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                        record,
                        message: e.to_string(),
                    })?;
                reviews.push(build_review(mapping, record, &object, &name)?);
            }
        }
    }
    if reviews.is_empty() {
        return Err(CorpusError::EmptyFile {
            path: path.display().to_string(),
        });
    }
    Dataset::new(name, reviews)
}

/// Reads the canonical JSON-lines serialisation; the dataset is named after
/// the file stem.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let mut dataset = ingest(path, InputFormat::Jsonl, &Mapping::canonical())?;
    dataset.name = file_stem(path);
    Ok(dataset)
}

/// Writes one JSON object per review with fields
/// `id, text, label, agreement, source`.
pub fn write_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for review in dataset.reviews() {
        let line = serde_json::to_string(review).expect("review serialisation cannot fail");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

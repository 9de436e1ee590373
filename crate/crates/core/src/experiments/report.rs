use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AgreementScores, DatasetSummary, ExperimentError, Protocol, RunResult};
use crate::classifiers::ClassifierSpec;
use crate::corpus::KanoLabel;
use crate::metrics::ClassScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub name: String,
    pub spec: ClassifierSpec,
    /// Scores averaged over runs.
    pub mean: ClassScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementScores>,
    pub runs: Vec<RunResult>,
}

impl ClassifierReport {
    pub fn from_runs(spec: &ClassifierSpec, runs: Vec<RunResult>) -> ClassifierReport {
        let scores: Vec<ClassScores> = runs.iter().map(|r| r.scores).collect();
        let agreement: Vec<AgreementScores> = runs.iter().filter_map(|r| r.agreement).collect();
        ClassifierReport {
            name: spec.display_name(),
            spec: spec.clone(),
            mean: ClassScores::mean(&scores).unwrap_or_default(),
            agreement: AgreementScores::mean(&agreement),
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub base_seed: u64,
    pub n_undersample_runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub datasets: Vec<DatasetSummary>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub classifiers: Vec<ClassifierReport>,
}

pub const RUNS_FILE: &str = "runs.json";

impl EvaluationReport {
    /// Writes `report.md`, `report.csv` and the full `runs.json` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| ExperimentError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let json = serde_json::to_string_pretty(self).expect("reports serialize");
        for (file, body) in [
            ("report.md", emit_report(self, ReportFormat::Markdown)),
            ("report.csv", emit_report(self, ReportFormat::Csv)),
            (RUNS_FILE, json + "\n"),
        ] {
            let path = dir.join(file);
            std::fs::write(&path, body).map_err(io(&path))?;
        }
        Ok(())
    }

    /// Reads `runs.json` from a directory written by [`Self::write_to_dir`],
    /// or from the file itself.
    pub fn read(path: impl AsRef<Path>) -> Result<EvaluationReport, ExperimentError> {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path.push(RUNS_FILE);
        }
        let text = std::fs::read_to_string(&path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!(
                "unknown report format `{other}` (expected md or csv)"
            )),
        }
    }
}

/// Three decimals, rounded half-up on the decimal expansion, without a
/// leading zero: `0.5135` gives `.514`, `-0.25` gives `-.250`.
pub fn format_score(x: f64) -> String {
    if !x.is_finite() {
        return "n/a".into();
    }
    // Printing at 9 decimals first strips representation noise such as
    // 513.4999999999999 before the half-up step.
    let scaled: f64 = format!("{:.9}", x.abs() * 1000.0)
        .parse()
        .expect("formatted float parses");
    let units = (scaled + 0.5).floor() as u64;
    let sign = if x < 0.0 && units > 0 { "-" } else { "" };
    let (whole, frac) = (units / 1000, units % 1000);
    if whole == 0 {
        format!("{sign}.{frac:03}")
    } else {
        format!("{sign}{whole}.{frac:03}")
    }
}

fn capitalized(label: KanoLabel) -> String {
    let name = label.name();
    name[..1].to_uppercase() + &name[1..]
}

fn has_agreement_table(report: &EvaluationReport) -> bool {
    report.protocol == Protocol::Rq3
}

pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(report),
        ReportFormat::Csv => csv_table(report),
    }
}

fn csv_table(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if has_agreement_table(report) {
        w.write_record([
            "classifier",
            "accuracy_agreement",
            "accuracy_disagreement",
            "phi",
        ])
        .expect("in-memory write");
        for c in &report.classifiers {
            let a = c.agreement.unwrap_or(AgreementScores {
                agreed_accuracy: f64::NAN,
                disagreed_accuracy: f64::NAN,
                phi: f64::NAN,
                n_agreed: 0,
                n_disagreed: 0,
            });
            w.write_record([
                c.name.clone(),
                a.agreed_accuracy.to_string(),
                a.disagreed_accuracy.to_string(),
                a.phi.to_string(),
            ])
            .expect("in-memory write");
        }
    } else {
        w.write_record(ClassScores::csv_header())
            .expect("in-memory write");
        for c in &report.classifiers {
            w.write_record(c.mean.csv_record(&c.name))
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

fn markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    writeln!(out, "## {}", report.protocol.title()).unwrap();
    writeln!(out).unwrap();
    let mut setup = format!(
        "Protocol `{}`, base seed {}, {} undersampling run(s)",
        report.protocol, report.base_seed, report.n_undersample_runs
    );
    if let Some(k) = report.k {
        write!(setup, ", {k} folds").unwrap();
    }
    writeln!(out, "{setup}.").unwrap();
    writeln!(out).unwrap();

    let mut degenerate = false;
    if has_agreement_table(report) {
        writeln!(
            out,
            "| Classifier | Acc. (agreement) | Acc. (disagreement) | Phi |"
        )
        .unwrap();
        writeln!(out, "|---|---:|---:|---:|").unwrap();
        for c in &report.classifiers {
            let cells = match c.agreement {
                Some(a) => [a.agreed_accuracy, a.disagreed_accuracy, a.phi].map(format_score),
                None => ["n/a".to_string(), "n/a".to_string(), "n/a".to_string()],
            };
            writeln!(out, "| {} | {} |", c.name, cells.join(" | ")).unwrap();
        }
    } else {
        let mut header = String::from("| Classifier | Acc. |");
        let mut rule = String::from("|---|---:|");
        for label in KanoLabel::ALL {
            let name = capitalized(label);
            write!(header, " {name} P | {name} R | {name} F1 |").unwrap();
            rule.push_str("---:|---:|---:|");
        }
        writeln!(out, "{header}").unwrap();
        writeln!(out, "{rule}").unwrap();
        for c in &report.classifiers {
            let mut row = format!("| {} | {} |", c.name, format_score(c.mean.accuracy));
            for s in &c.mean.per_label {
                let mark = if s.degenerate { "*" } else { "" };
                degenerate |= s.degenerate;
                for v in [s.precision, s.recall, s.f1] {
                    write!(row, " {}{mark} |", format_score(v)).unwrap();
                }
            }
            writeln!(out, "{row}").unwrap();
        }
    }
    if degenerate {
        writeln!(out).unwrap();
        writeln!(
            out,
            "\\* a zero denominator in at least one run; that run's value was taken as 0."
        )
        .unwrap();
    }

    if !report.notes.is_empty() || !report.datasets.is_empty() {
        writeln!(out).unwrap();
        for d in &report.datasets {
            let counts = |c: &[usize; 4]| {
                KanoLabel::ALL
                    .iter()
                    .map(|l| format!("{} {}", l.name(), c[l.index()]))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let mut line = format!(
                "- {}: {} reviews ({})",
                d.name,
                d.counts.iter().sum::<usize>(),
                counts(&d.counts)
            );
            if let Some(p) = &d.preprocess {
                write!(
                    line,
                    "; preprocessing removed {} duplicates, {} non-English, {} without words from {}",
                    p.duplicates, p.non_english, p.no_words, p.input
                )
                .unwrap();
            }
            writeln!(out, "{line}").unwrap();
        }
        for note in &report.notes {
            writeln!(out, "- {note}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{scores, ConfusionMatrix};

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_score(0.5135), ".514");
        assert_eq!(format_score(0.5134999), ".513");
        assert_eq!(format_score(0.0), ".000");
        assert_eq!(format_score(1.0), "1.000");
        assert_eq!(format_score(0.9995), "1.000");
        assert_eq!(format_score(-0.1235), "-.124");
        assert_eq!(format_score(-0.0001), ".000");
        assert_eq!(format_score(0.125), ".125");
        assert_eq!(format_score(0.0625), ".063");
    }

    fn report(protocol: Protocol, classifiers: Vec<ClassifierReport>) -> EvaluationReport {
        EvaluationReport {
            protocol,
            base_seed: 42,
            n_undersample_runs: 1,
            k: None,
            datasets: vec![],
            notes: vec![],
            classifiers,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = report(Protocol::Rq1, vec![]);
        assert_eq!(emit_report(&r, ReportFormat::Csv).lines().count(), 1);
        let md = emit_report(&r, ReportFormat::Markdown);
        let table: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(table.len(), 2);
        assert!(table[0].contains("Irrelevant F1"));
    }

    #[test]
    fn degenerate_scores_are_flagged() {
        let mut m = ConfusionMatrix::default();
        m.counts[0][0] = 3;
        m.counts[1][1] = 2;
        m.counts[2][0] = 1;
        let spec = ClassifierSpec::keyword();
        let run = RunResult {
            run: 0,
            seed: 42,
            train_size: 6,
            confusion: m,
            scores: scores(&m),
            agreement: None,
        };
        let r = report(
            Protocol::Rq1,
            vec![ClassifierReport::from_runs(&spec, vec![run])],
        );
        let md = emit_report(&r, ReportFormat::Markdown);
        assert!(md.contains(".000*"), "{md}");
        assert!(md.contains("| Keyword-Driven | .833 |"), "{md}");
        let csv = emit_report(&r, ReportFormat::Csv);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 14);
        assert_eq!(row[0], "Keyword-Driven");
    }

    #[test]
    fn agreement_table_layout() {
        let spec = ClassifierSpec::logreg();
        let mut c = ClassifierReport::from_runs(&spec, vec![]);
        c.agreement = Some(AgreementScores {
            agreed_accuracy: 0.61,
            disagreed_accuracy: 0.4444,
            phi: -0.0125,
            n_agreed: 10,
            n_disagreed: 5,
        });
        let r = report(Protocol::Rq3, vec![c]);
        let md = emit_report(&r, ReportFormat::Markdown);
        assert!(
            md.contains("| Logistic Regression | .610 | .444 | -.013 |"),
            "{md}"
        );
        assert!(emit_report(&r, ReportFormat::Csv).starts_with("classifier,accuracy_agreement"));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(Protocol::Rq2Cross, vec![]);
        r.write_to_dir(dir.path()).unwrap();
        assert_eq!(EvaluationReport::read(dir.path()).unwrap(), r);
        assert!(dir.path().join("report.md").exists());
    }
}

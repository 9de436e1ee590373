//! Evaluation protocols: repeated undersampling, k-fold cross-validation,
//! cross-dataset testing and the agreement analysis.

mod config;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    DatasetSource, DatasetSummary, ExperimentConfig, Protocol, SourceFormat, TrainingSet, BRUNOTTE,
    STANIK,
};
pub use report::{emit_report, format_score, ClassifierReport, EvaluationReport, ReportFormat};

use crate::classifiers::{self, ClassifierError, ClassifierSpec, TrainingContext};
use crate::corpus::{self, Agreement, CorpusError, Dataset, FoldPlan, KanoLabel};
use crate::metrics::{self, BinaryPair, ClassScores, ConfusionMatrix, MetricsError};
use crate::seed;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("experiment needs dataset `{0}`")]
    MissingDataset(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{classifier} failed in {location}: {source}")]
    Classifier {
        classifier: String,
        location: String,
        #[source]
        source: ClassifierError,
    },
    #[error("{classifier}, {location}: {source}")]
    Metrics {
        classifier: String,
        location: String,
        #[source]
        source: MetricsError,
    },
    #[error("no {0} reviews in the test set")]
    EmptySubset(&'static str),
}

/// Preprocessed datasets keyed by their config name.
#[derive(Debug, Clone, Default)]
pub struct ExperimentData {
    datasets: BTreeMap<String, Dataset>,
    summaries: Vec<DatasetSummary>,
}

impl ExperimentData {
    /// Ingests and preprocesses every dataset the protocol needs.
    pub fn load(config: &ExperimentConfig) -> Result<ExperimentData, ExperimentError> {
        let mut data = ExperimentData::default();
        for name in config.protocol.required_datasets() {
            let source = config
                .datasets
                .get(*name)
                .ok_or_else(|| ExperimentError::MissingDataset(name.to_string()))?;
            let (dataset, summary) = source.load()?;
            log::info!(
                "{name}: {} reviews after preprocessing (from {})",
                dataset.len(),
                summary.raw_counts.iter().sum::<usize>()
            );
            data.summaries.push(summary);
            data.datasets.insert(name.to_string(), dataset);
        }
        Ok(data)
    }

    /// Wraps already-prepared datasets; no preprocessing is applied.
    pub fn from_datasets<I, S>(datasets: I) -> ExperimentData
    where
        I: IntoIterator<Item = (S, Dataset)>,
        S: Into<String>,
    {
        let mut data = ExperimentData::default();
        for (name, dataset) in datasets {
            let counts = dataset.label_counts();
            data.summaries.push(DatasetSummary {
                name: dataset.name().to_string(),
                raw_counts: counts,
                preprocess: None,
                counts,
            });
            data.datasets.insert(name.into(), dataset);
        }
        data
    }

    pub fn get(&self, name: &str) -> Result<&Dataset, ExperimentError> {
        self.datasets
            .get(name)
            .ok_or_else(|| ExperimentError::MissingDataset(name.to_string()))
    }

    pub fn summaries(&self) -> &[DatasetSummary] {
        &self.summaries
    }
}

/// Results of one undersampling run for one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub train_size: usize,
    pub confusion: ConfusionMatrix,
    pub scores: ClassScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementScores>,
}

/// Accuracy on the agreed and disagreed subsets and the phi coefficient
/// between misclassification and initial disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementScores {
    pub agreed_accuracy: f64,
    pub disagreed_accuracy: f64,
    pub phi: f64,
    pub n_agreed: usize,
    pub n_disagreed: usize,
}

impl AgreementScores {
    pub fn mean(runs: &[AgreementScores]) -> Option<AgreementScores> {
        let first = runs.first()?;
        let avg = |f: fn(&AgreementScores) -> f64| metrics::mean_of(runs.iter().map(f));
        Some(AgreementScores {
            agreed_accuracy: avg(|a| a.agreed_accuracy),
            disagreed_accuracy: avg(|a| a.disagreed_accuracy),
            phi: avg(|a| a.phi),
            n_agreed: first.n_agreed,
            n_disagreed: first.n_disagreed,
        })
    }
}

/// Splits `predictions` on `test` by initial agreement. Reviews with unknown
/// agreement are ignored.
pub fn agreement_scores(
    test: &Dataset,
    predictions: &[KanoLabel],
) -> Result<AgreementScores, ExperimentError> {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    let mut pairs = Vec::new();
    for (review, &pred) in test.reviews().iter().zip(predictions) {
        let diff = match review.agreement {
            Agreement::Unanimous => false,
            Agreement::TieBroken => true,
            Agreement::Unknown => continue,
        };
        let mis = pred != review.label;
        totals[usize::from(diff)] += 1;
        hits[usize::from(diff)] += usize::from(!mis);
        pairs.push(BinaryPair { mis, diff });
    }
    if totals[0] == 0 {
        return Err(ExperimentError::EmptySubset("agreed"));
    }
    if totals[1] == 0 {
        return Err(ExperimentError::EmptySubset("disagreed"));
    }
    let phi = metrics::phi(&pairs).map_err(|source| ExperimentError::Metrics {
        classifier: String::new(),
        location: "agreement analysis".into(),
        source,
    })?;
    Ok(AgreementScores {
        agreed_accuracy: hits[0] as f64 / totals[0] as f64,
        disagreed_accuracy: hits[1] as f64 / totals[1] as f64,
        phi,
        n_agreed: totals[0],
        n_disagreed: totals[1],
    })
}

/// Runs the configured protocol on data loaded from the config's sources.
pub fn run_config(config: &ExperimentConfig) -> Result<EvaluationReport, ExperimentError> {
    config.validate()?;
    let data = ExperimentData::load(config)?;
    run(config, &data)
}

/// Runs the configured protocol on `data`.
pub fn run(
    config: &ExperimentConfig,
    data: &ExperimentData,
) -> Result<EvaluationReport, ExperimentError> {
    match config.protocol {
        Protocol::Rq1 => run_rq1(config, data),
        Protocol::Rq2Cross => run_rq2_cross(config, data),
        Protocol::Rq2Combined => run_rq2_combined(config, data),
        Protocol::Rq3 => run_rq3(config, data),
    }
}

pub fn run_rq1(
    config: &ExperimentConfig,
    data: &ExperimentData,
) -> Result<EvaluationReport, ExperimentError> {
    let stanik = data.get(STANIK)?;
    cross_validation_report(config, data, Protocol::Rq1, stanik)
}

pub fn run_rq2_combined(
    config: &ExperimentConfig,
    data: &ExperimentData,
) -> Result<EvaluationReport, ExperimentError> {
    let combined = Dataset::concat("combined", &[data.get(STANIK)?, data.get(BRUNOTTE)?])?;
    let mut report = cross_validation_report(config, data, Protocol::Rq2Combined, &combined)?;
    report.notes.insert(
        0,
        format!(
            "combined corpus before undersampling: {} reviews",
            combined.len()
        ),
    );
    Ok(report)
}

pub fn run_rq2_cross(
    config: &ExperimentConfig,
    data: &ExperimentData,
) -> Result<EvaluationReport, ExperimentError> {
    cross_dataset_report(config, data, Protocol::Rq2Cross)
}

pub fn run_rq3(
    config: &ExperimentConfig,
    data: &ExperimentData,
) -> Result<EvaluationReport, ExperimentError> {
    cross_dataset_report(config, data, Protocol::Rq3)
}

struct PreparedRun {
    run: usize,
    seed: u64,
    data: Dataset,
    plan: Option<FoldPlan>,
}

fn prepare_runs(
    config: &ExperimentConfig,
    source: &Dataset,
    balance: bool,
    with_folds: bool,
) -> Result<Vec<PreparedRun>, ExperimentError> {
    (0..config.n_undersample_runs)
        .map(|run| {
            let run_seed = seed::run_seed(config.base_seed, run);
            let data = if balance {
                corpus::undersample(source, seed::derive(run_seed, seed::UNDERSAMPLE))?
            } else {
                source.clone()
            };
            let plan = if with_folds {
                Some(corpus::make_folds(
                    &data,
                    config.k,
                    seed::derive(run_seed, seed::FOLDS),
                    config.fold_strategy,
                )?)
            } else {
                None
            };
            Ok(PreparedRun {
                run,
                seed: run_seed,
                data,
                plan,
            })
        })
        .collect()
}

fn execute<T, F>(n: usize, parallel: bool, task: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ExperimentError> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(task).collect()
    } else {
        (0..n).map(task).collect()
    }
}

fn train_and_predict(
    spec: &ClassifierSpec,
    train: &Dataset,
    texts: &[&str],
    context: &TrainingContext,
) -> Result<Vec<KanoLabel>, ClassifierError> {
    let model = classifiers::train(spec, train, context)?;
    model.predict_batch(texts)
}

fn cross_validation_report(
    config: &ExperimentConfig,
    data: &ExperimentData,
    protocol: Protocol,
    source: &Dataset,
) -> Result<EvaluationReport, ExperimentError> {
    config.validate_shape()?;
    let runs = prepare_runs(config, source, true, true)?;
    let k = config.k;
    let per_run = k;
    let per_classifier = runs.len() * per_run;
    let context = TrainingContext::new();

    let fold_results = execute(
        config.classifiers.len() * per_classifier,
        config.parallel,
        |task| {
            let spec = &config.classifiers[task / per_classifier];
            let prepared = &runs[(task % per_classifier) / per_run];
            let fold = task % per_run;
            let plan = prepared
                .plan
                .as_ref()
                .expect("cross-validation runs carry folds");
            let train = prepared.data.select("train", &plan.train_indices(fold));
            let test_idx = plan.test_indices(fold);
            let texts: Vec<&str> = test_idx
                .iter()
                .map(|&i| prepared.data.reviews()[i].text.as_str())
                .collect();
            let predictions =
                train_and_predict(spec, &train, &texts, &context).map_err(|source| {
                    ExperimentError::Classifier {
                        classifier: spec.display_name(),
                        location: format!("run {} fold {fold}", prepared.run),
                        source,
                    }
                })?;
            Ok(test_idx.into_iter().zip(predictions).collect::<Vec<_>>())
        },
    );
    context.shutdown();
    let fold_results = fold_results?;

    let mut reports = Vec::with_capacity(config.classifiers.len());
    for (c, spec) in config.classifiers.iter().enumerate() {
        let mut run_results = Vec::with_capacity(runs.len());
        for prepared in &runs {
            let mut predicted: Vec<Option<KanoLabel>> = vec![None; prepared.data.len()];
            for fold in 0..k {
                let task = c * per_classifier + prepared.run * per_run + fold;
                for &(i, label) in &fold_results[task] {
                    debug_assert!(predicted[i].is_none(), "review predicted twice");
                    predicted[i] = Some(label);
                }
            }
            let predicted: Vec<KanoLabel> = predicted
                .into_iter()
                .map(|p| p.expect("every review lies in exactly one test fold"))
                .collect();
            let confusion =
                metrics::confusion(&prepared.data.labels(), &predicted).map_err(|source| {
                    ExperimentError::Metrics {
                        classifier: spec.display_name(),
                        location: format!("run {}", prepared.run),
                        source,
                    }
                })?;
            run_results.push(RunResult {
                run: prepared.run,
                seed: prepared.seed,
                train_size: prepared.data.len() - prepared.data.len() / k,
                scores: metrics::scores(&confusion),
                confusion,
                agreement: None,
            });
        }
        reports.push(ClassifierReport::from_runs(spec, run_results));
    }

    let per_label = runs[0].data.label_counts()[0];
    let notes = vec![format!(
        "{} undersampling runs x {k}-fold cross-validation ({} folds, predictions pooled per run); {per_label} reviews per label, {} in total",
        runs.len(),
        match config.fold_strategy {
            corpus::FoldStrategy::Stratified => "stratified",
            corpus::FoldStrategy::Random => "random",
        },
        per_label * KanoLabel::COUNT,
    )];
    Ok(EvaluationReport {
        protocol,
        base_seed: config.base_seed,
        n_undersample_runs: config.n_undersample_runs,
        k: Some(k),
        datasets: data.summaries().to_vec(),
        notes,
        classifiers: reports,
    })
}

fn cross_dataset_report(
    config: &ExperimentConfig,
    data: &ExperimentData,
    protocol: Protocol,
) -> Result<EvaluationReport, ExperimentError> {
    config.validate_shape()?;
    let stanik = data.get(STANIK)?;
    let test = data.get(BRUNOTTE)?;
    let balance = config.cross_training == TrainingSet::Undersampled;
    let runs = prepare_runs(config, stanik, balance, false)?;
    let texts = test.texts();
    let context = TrainingContext::new();

    let per_classifier = runs.len();
    let predictions = execute(
        config.classifiers.len() * per_classifier,
        config.parallel,
        |task| {
            let spec = &config.classifiers[task / per_classifier];
            let prepared = &runs[task % per_classifier];
            train_and_predict(spec, &prepared.data, &texts, &context).map_err(|source| {
                ExperimentError::Classifier {
                    classifier: spec.display_name(),
                    location: format!("run {}", prepared.run),
                    source,
                }
            })
        },
    );
    context.shutdown();
    let predictions = predictions?;

    let truth = test.labels();
    let mut reports = Vec::with_capacity(config.classifiers.len());
    for (c, spec) in config.classifiers.iter().enumerate() {
        let mut run_results = Vec::with_capacity(runs.len());
        for prepared in &runs {
            let predicted = &predictions[c * per_classifier + prepared.run];
            let at = |source| ExperimentError::Metrics {
                classifier: spec.display_name(),
                location: format!("run {}", prepared.run),
                source,
            };
            let confusion = metrics::confusion(&truth, predicted).map_err(at)?;
            let agreement = if protocol == Protocol::Rq3 {
                Some(agreement_scores(test, predicted).map_err(|e| match e {
                    ExperimentError::Metrics { source, .. } => at(source),
                    other => other,
                })?)
            } else {
                None
            };
            run_results.push(RunResult {
                run: prepared.run,
                seed: prepared.seed,
                train_size: prepared.data.len(),
                scores: metrics::scores(&confusion),
                confusion,
                agreement,
            });
        }
        reports.push(ClassifierReport::from_runs(spec, run_results));
    }

    let variant = match config.cross_training {
        TrainingSet::Undersampled => "undersampled",
        TrainingSet::Full => "full",
    };
    let mut notes = vec![format!(
        "trained on the {variant} Stanik set ({} reviews), tested on all {} Brunotte reviews; {} runs",
        runs[0].data.len(),
        test.len(),
        runs.len()
    )];
    notes.push(match config.cross_training {
        TrainingSet::Undersampled => {
            "the training set could also be read as the entire Stanik set; set cross_training to \"full\" for that variant".to_string()
        }
        TrainingSet::Full => {
            "the training set could also be read as the undersampled Stanik set (cross_training \"undersampled\")".to_string()
        }
    });
    if protocol == Protocol::Rq3 {
        let known = test
            .reviews()
            .iter()
            .filter(|r| r.agreement != Agreement::Unknown)
            .count();
        notes.push(format!(
            "agreement analysis over {known} reviews with known initial agreement; phi averaged over runs"
        ));
    }
    Ok(EvaluationReport {
        protocol,
        base_seed: config.base_seed,
        n_undersample_runs: config.n_undersample_runs,
        k: None,
        datasets: data.summaries().to_vec(),
        notes,
        classifiers: reports,
    })
}

impl ExperimentConfig {
    /// Checks that do not involve dataset sources.
    fn validate_shape(&self) -> Result<(), ExperimentError> {
        let mut probe = self.clone();
        for name in self.protocol.required_datasets() {
            probe
                .datasets
                .entry(name.to_string())
                .or_insert(DatasetSource {
                    path: Default::default(),
                    format: SourceFormat::Canonical,
                    mapping: None,
                    preprocessed: true,
                });
        }
        probe.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Review;

    fn review(id: usize, text: &str, label: KanoLabel, agreement: Agreement) -> Review {
        Review {
            id: id.to_string(),
            text: text.to_string(),
            label,
            agreement,
            source: "syn".into(),
        }
    }

    const VOCAB: [[&str; 3]; 4] = [
        ["crash", "broken", "login"],
        ["slow", "battery", "lag"],
        ["love", "theme", "widget"],
        ["bought", "phone", "weekend"],
    ];

    /// Reviews whose wording mostly matches their label.
    fn synthetic(name: &str, per_label: usize, offset: usize) -> Dataset {
        let mut reviews = Vec::new();
        for label in KanoLabel::ALL {
            for j in 0..per_label {
                // Every fifth review reads like the next label.
                let words = VOCAB[(label.index() + usize::from(j % 5 == 4)) % 4];
                let noise = VOCAB[(label.index() + j) % 4][j % 3];
                let text = format!("{} {} {noise} item{j}", words[j % 3], words[(j + 1) % 3]);
                let agreement = if j % 3 == 0 {
                    Agreement::TieBroken
                } else {
                    Agreement::Unanimous
                };
                reviews.push(review(offset + reviews.len(), &text, label, agreement));
            }
        }
        Dataset::new(name, reviews).unwrap()
    }

    fn data() -> ExperimentData {
        ExperimentData::from_datasets([
            (STANIK, synthetic("stanik", 12, 0)),
            (BRUNOTTE, synthetic("brunotte", 6, 1000)),
        ])
    }

    fn config(protocol: Protocol) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(protocol);
        c.classifiers = vec![ClassifierSpec::keyword(), ClassifierSpec::logreg()];
        c.n_undersample_runs = 2;
        c.k = 4;
        c
    }

    #[test]
    fn rq1_predicts_every_review_once() {
        let report = run(&config(Protocol::Rq1), &data()).unwrap();
        assert_eq!(report.classifiers.len(), 2);
        for c in &report.classifiers {
            assert_eq!(c.runs.len(), 2);
            for r in &c.runs {
                assert_eq!(r.confusion.total(), 48);
            }
            assert!(c.mean.accuracy > 0.5, "{}: {}", c.name, c.mean.accuracy);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let mut c = config(Protocol::Rq2Combined);
        let a = run(&c, &data()).unwrap();
        c.parallel = false;
        let b = run(&c, &data()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.classifiers[0].runs[0].confusion.total(), 72);
    }

    #[test]
    fn rq3_reports_agreement() {
        let report = run(&config(Protocol::Rq3), &data()).unwrap();
        for c in &report.classifiers {
            let a = c.agreement.expect("agreement summary");
            assert_eq!(a.n_agreed + a.n_disagreed, 24);
            assert!((-1.0..=1.0).contains(&a.phi));
            for r in &c.runs {
                assert_eq!(r.confusion.total(), 24);
            }
        }
        let cross = run(&config(Protocol::Rq2Cross), &data()).unwrap();
        assert!(cross.classifiers.iter().all(|c| c.agreement.is_none()));
        assert_eq!(cross.classifiers[0].mean, report.classifiers[0].mean);
    }

    #[test]
    fn full_training_set_is_not_balanced() {
        let mut c = config(Protocol::Rq2Cross);
        c.cross_training = TrainingSet::Full;
        let report = run(&c, &data()).unwrap();
        assert_eq!(report.classifiers[0].runs[0].train_size, 48);
    }

    #[test]
    fn agreement_needs_both_subsets() {
        let d = Dataset::new(
            "x",
            vec![
                review(0, "crash", KanoLabel::Basic, Agreement::Unanimous),
                review(1, "slow", KanoLabel::Performance, Agreement::Unknown),
            ],
        )
        .unwrap();
        let err = agreement_scores(&d, &[KanoLabel::Basic, KanoLabel::Basic]).unwrap_err();
        assert!(matches!(err, ExperimentError::EmptySubset("disagreed")));
    }

    #[test]
    fn agreement_scores_by_hand() {
        let d = Dataset::new(
            "x",
            vec![
                review(0, "a", KanoLabel::Basic, Agreement::Unanimous),
                review(1, "b", KanoLabel::Basic, Agreement::Unanimous),
                review(2, "c", KanoLabel::Basic, Agreement::TieBroken),
                review(3, "d", KanoLabel::Basic, Agreement::TieBroken),
            ],
        )
        .unwrap();
        use KanoLabel::*;
        let a = agreement_scores(&d, &[Basic, Basic, Basic, Delighter]).unwrap();
        assert_eq!(a.agreed_accuracy, 1.0);
        assert_eq!(a.disagreed_accuracy, 0.5);
        // Table [[2,1],[0,1]]: (1*2 - 0*1) / sqrt(1*3*2*2).
        assert!((a.phi - 2.0 / 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wrong_exactly_on_disagreed_gives_phi_one() {
        let d = synthetic("b", 6, 0);
        let predicted: Vec<KanoLabel> = d
            .reviews()
            .iter()
            .map(|r| match r.agreement {
                Agreement::TieBroken => KanoLabel::from_code((r.label.code() + 1) % 4).unwrap(),
                _ => r.label,
            })
            .collect();
        let a = agreement_scores(&d, &predicted).unwrap();
        assert_eq!(a.phi, 1.0);
        assert_eq!((a.agreed_accuracy, a.disagreed_accuracy), (1.0, 0.0));
    }

    #[test]
    fn training_on_the_test_set_gives_training_accuracy() {
        let balanced = synthetic("s", 10, 0);
        let data = ExperimentData::from_datasets([
            (STANIK, balanced.clone()),
            (BRUNOTTE, balanced.clone()),
        ]);
        let mut c = config(Protocol::Rq2Cross);
        c.n_undersample_runs = 1;
        let report = run(&c, &data).unwrap();
        for (spec, result) in c.classifiers.iter().zip(&report.classifiers) {
            let model = classifiers::train(spec, &balanced, &TrainingContext::new()).unwrap();
            let predicted = model.predict_batch(&balanced.texts()).unwrap();
            let hits = predicted
                .iter()
                .zip(balanced.labels())
                .filter(|(p, t)| **p == *t)
                .count();
            assert_eq!(result.mean.accuracy, hits as f64 / balanced.len() as f64);
        }
    }

    #[test]
    fn classifier_failures_carry_context() {
        let mut c = config(Protocol::Rq1);
        c.classifiers = vec![ClassifierSpec::adapter("tcp:127.0.0.1:1")];
        let err = run(&c, &data()).unwrap_err();
        assert!(err.to_string().contains("failed in run"), "{err}");
    }
}

//! Multinomial logistic regression over L2-normalised tf-idf vectors.
//!
//! Minimises
//!
//! ```text
//! L(W, b) = -sum_i ln softmax(W x_i + b)[y_i] + ||W||_F^2 / (2C)
//! ```
//!
//! with the bias left unregularised. Parameters are packed as the
//! row-major 4 x |V| weight matrix followed by the 4 biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{minimize_lbfgs, Objective};
use super::{argmax, ClassifierError, ClassifierSpec};
use crate::corpus::{Dataset, KanoLabel};
use crate::textproc::{self, ReviewVector, TfIdfModel};

const K: usize = KanoLabel::COUNT;

pub struct SoftmaxObjective {
    rows: Vec<ReviewVector>,
    labels: Vec<KanoLabel>,
    n_features: usize,
    c: f64,
}

impl SoftmaxObjective {
    pub fn new(rows: Vec<ReviewVector>, labels: Vec<KanoLabel>, n_features: usize, c: f64) -> Self {
        assert_eq!(rows.len(), labels.len());
        SoftmaxObjective {
            rows,
            labels,
            n_features,
            c,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn logits(&self, theta: &[f64], row: &ReviewVector) -> [f64; K] {
        let bias = &theta[K * self.n_features..];
        let mut z = [0.0; K];
        for (k, zk) in z.iter_mut().enumerate() {
            let w = &theta[k * self.n_features..(k + 1) * self.n_features];
            *zk = bias[k] + row.entries.iter().map(|&(j, x)| w[j] * x).sum::<f64>();
        }
        z
    }

    /// Negative log-likelihood without the penalty.
    pub fn data_loss(&self, theta: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.labels)
            .map(|(row, y)| {
                let z = self.logits(theta, row);
                log_sum_exp(&z) - z[y.index()]
            })
            .sum()
    }

    pub fn penalty(&self, theta: &[f64]) -> f64 {
        theta[..K * self.n_features]
            .iter()
            .map(|w| w * w)
            .sum::<f64>()
            / (2.0 * self.c)
    }
}

fn log_sum_exp(z: &[f64; K]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Objective for SoftmaxObjective {
    fn dim(&self) -> usize {
        K * self.n_features + K
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.data_loss(theta) + self.penalty(theta)
    }

    fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let nf = self.n_features;
        let mut grad = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for (row, y) in self.rows.iter().zip(&self.labels) {
            let z = self.logits(theta, row);
            let lse = log_sum_exp(&z);
            loss += lse - z[y.index()];
            for k in 0..K {
                let residual = (z[k] - lse).exp() - if k == y.index() { 1.0 } else { 0.0 };
                for &(j, x) in &row.entries {
                    grad[k * nf + j] += residual * x;
                }
                grad[K * nf + k] += residual;
            }
        }
        for (g, w) in grad[..K * nf].iter_mut().zip(&theta[..K * nf]) {
            *g += w / self.c;
        }
        (loss + self.penalty(theta), grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub final_loss: f64,
    pub data_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    tfidf: TfIdfModel,
    label_order: Vec<String>,
    n_features: usize,
    /// Row-major `label_order.len() x n_features`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    summary: TrainingSummary,
}

pub fn train_logreg(
    train: &Dataset,
    spec: &ClassifierSpec,
) -> Result<LogisticRegression, ClassifierError> {
    train.require_all_labels()?;
    let tfidf = textproc::fit(train)?.with_normalization(true);
    let rows: Vec<ReviewVector> = train
        .reviews()
        .iter()
        .map(|r| tfidf.vectorize(&r.text))
        .collect();
    let n_features = tfidf.vocabulary().len();
    let objective = SoftmaxObjective::new(rows, train.labels(), n_features, spec.c()?);
    let start = match spec.init_seed()? {
        None => vec![0.0; objective.dim()],
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..objective.dim())
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect()
        }
    };
    let minimum = minimize_lbfgs(&objective, start, spec.max_iter()?, spec.tol()?);
    if !minimum.converged {
        log::warn!(
            "logistic regression stopped after {} iterations with gradient norm {:.3e}",
            minimum.iterations,
            minimum.gradient_norm
        );
    }
    let summary = TrainingSummary {
        final_loss: minimum.value,
        data_loss: objective.data_loss(&minimum.x),
        iterations: minimum.iterations,
        converged: minimum.converged,
        gradient_norm: minimum.gradient_norm,
        loss_history: minimum.history,
    };
    let mut x = minimum.x;
    let bias = x.split_off(K * n_features);
    Ok(LogisticRegression {
        tfidf,
        label_order: KanoLabel::ALL
            .iter()
            .map(|l| l.name().to_string())
            .collect(),
        n_features,
        weights: x,
        bias,
        summary,
    })
}

impl LogisticRegression {
    /// Builds a model from explicit parameters; `weights` is row-major
    /// 4 x |V| in label-code order.
    pub fn from_parameters(
        tfidf: TfIdfModel,
        weights: Vec<f64>,
        bias: [f64; K],
    ) -> Result<LogisticRegression, ClassifierError> {
        let n_features = tfidf.vocabulary().len();
        let lr = LogisticRegression {
            tfidf,
            label_order: KanoLabel::ALL
                .iter()
                .map(|l| l.name().to_string())
                .collect(),
            n_features,
            weights,
            bias: bias.to_vec(),
            summary: TrainingSummary {
                final_loss: f64::NAN,
                data_loss: f64::NAN,
                iterations: 0,
                converged: false,
                gradient_norm: f64::NAN,
                loss_history: Vec::new(),
            },
        };
        lr.check_shape().map_err(ClassifierError::InvalidSpec)?;
        Ok(lr)
    }

    pub(crate) fn check_shape(&self) -> Result<(), String> {
        let names: Vec<&str> = KanoLabel::ALL.iter().map(|l| l.name()).collect();
        if self.label_order != names {
            return Err(format!("unexpected label order {:?}", self.label_order));
        }
        if self.n_features != self.tfidf.vocabulary().len()
            || self.weights.len() != K * self.n_features
            || self.bias.len() != K
        {
            return Err("weight matrix shape does not match the vocabulary".into());
        }
        Ok(())
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    pub fn tfidf(&self) -> &TfIdfModel {
        &self.tfidf
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn decision(&self, x: &ReviewVector) -> [f64; K] {
        let mut z = [0.0; K];
        for (k, zk) in z.iter_mut().enumerate() {
            let w = &self.weights[k * self.n_features..(k + 1) * self.n_features];
            *zk = self.bias[k] + x.entries.iter().map(|&(j, v)| w[j] * v).sum::<f64>();
        }
        z
    }

    pub fn probabilities(&self, text: &str) -> [f64; K] {
        let z = self.decision(&self.tfidf.vectorize(text));
        let lse = log_sum_exp(&z);
        z.map(|v| (v - lse).exp())
    }

    pub fn predict(&self, text: &str) -> KanoLabel {
        argmax(&self.decision(&self.tfidf.vectorize(text)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Agreement, Review};

    fn corpus(items: &[(&str, KanoLabel)]) -> Dataset {
        Dataset::new(
            "t",
            items
                .iter()
                .enumerate()
                .map(|(i, (t, l))| Review {
                    id: i.to_string(),
                    text: t.to_string(),
                    label: *l,
                    agreement: Agreement::Unknown,
                    source: "t".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn separable() -> Dataset {
        corpus(&[
            ("crash crash login", KanoLabel::Basic),
            ("crash freeze", KanoLabel::Basic),
            ("slow sync", KanoLabel::Performance),
            ("slow battery", KanoLabel::Performance),
            ("surprise widget", KanoLabel::Delighter),
            ("widget theme", KanoLabel::Delighter),
            ("bought phone", KanoLabel::Irrelevant),
            ("phone weekend", KanoLabel::Irrelevant),
        ])
    }

    #[test]
    fn separable_toy_fits_perfectly() {
        let d = separable();
        let lr = train_logreg(&d, &ClassifierSpec::logreg()).unwrap();
        assert!(lr.summary().converged);
        for r in d.reviews() {
            assert_eq!(lr.predict(&r.text), r.label, "{}", r.text);
        }
        let p = lr.probabilities("crash sync");
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn loss_never_increases() {
        let lr =
            train_logreg(&separable(), &ClassifierSpec::logreg().with("init_seed", 3)).unwrap();
        let h = &lr.summary().loss_history;
        assert!(h.len() > 2);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_vector_uses_bias_only() {
        let d = separable();
        let tfidf = textproc::fit(&d).unwrap();
        let v = tfidf.vocabulary().len();
        let lr =
            LogisticRegression::from_parameters(tfidf, vec![1.0; 4 * v], [0.1, 0.3, 0.2, -1.0])
                .unwrap();
        assert_eq!(lr.predict("nothing known here"), KanoLabel::Performance);
    }

    #[test]
    fn hand_set_three_feature_model() {
        // Vocabulary {alpha, beta, gamma}; "alpha beta gamma" has equal
        // weights 1/sqrt(3) after normalisation (all df = 1, N = 4).
        let d = corpus(&[
            ("alpha", KanoLabel::Basic),
            ("beta", KanoLabel::Performance),
            ("gamma", KanoLabel::Delighter),
            ("!!", KanoLabel::Irrelevant),
        ]);
        let tfidf = textproc::fit(&d).unwrap();
        assert_eq!(tfidf.vocabulary().terms(), ["alpha", "beta", "gamma"]);
        #[rustfmt::skip]
        let w = vec![
            1.0, 0.0, 0.0,
            0.0, 2.0, -1.0,
            0.5, 0.5, 0.5,
            -1.0, 3.0, -1.5,
        ];
        let lr = LogisticRegression::from_parameters(tfidf, w, [0.0, 0.0, 0.0, 0.2]).unwrap();
        // x = (1,1,1)/sqrt(3): scores 0.577, 0.577, 0.866, 0.289+0.2=0.489
        let s = 1.0 / 3f64.sqrt();
        let z = lr.decision(&lr.tfidf().vectorize("alpha beta gamma"));
        assert!((z[0] - s).abs() < 1e-12);
        assert!((z[1] - s).abs() < 1e-12);
        assert!((z[2] - 1.5 * s).abs() < 1e-12);
        assert!((z[3] - (0.5 * s + 0.2)).abs() < 1e-12);
        assert_eq!(lr.predict("alpha beta gamma"), KanoLabel::Delighter);
        // x = beta only: scores 0, 2, 0.5, 3.2
        assert_eq!(lr.predict("beta"), KanoLabel::Irrelevant);
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let lr = train_logreg(&separable(), &ClassifierSpec::logreg().with("max_iter", 1)).unwrap();
        assert!(!lr.summary().converged);
        assert_eq!(lr.summary().iterations, 1);
    }
}

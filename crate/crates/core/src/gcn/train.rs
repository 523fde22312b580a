use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, Architecture, GcnModel, Mode, NormalizedAdjacency, Params, Standardizer};
use crate::image_graph::ImageGraph;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_p: f64,
    pub seed: u64,
    pub gcn_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    /// Number of classes; inferred from the largest label when absent.
    pub classes: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            batch_size: 20,
            epochs: 600,
            dropout_p: 0.3,
            seed: 0,
            gcn_dims: vec![128, 128, 128],
            head_dims: vec![128, 64],
            classes: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p must be in [0, 1), got {}", self.dropout_p)));
        }
        Ok(())
    }
}

/// A trained model together with the feature scaling it was trained under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub model: GcnModel,
    pub standardizer: Standardizer,
}

impl Classifier {
    fn prepare(&self, g: &ImageGraph) -> Result<(Array2<f64>, NormalizedAdjacency)> {
        let x = node_matrix(g, self.standardizer.dim())?;
        Ok((self.standardizer.transform(&x)?, NormalizedAdjacency::from_graph(g)))
    }

    /// Class probabilities in eval mode.
    pub fn predict_proba(&self, g: &ImageGraph) -> Result<Array1<f64>> {
        let (x, adj) = self.prepare(g)?;
        // eval mode draws no random numbers
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.model.forward(&x, &adj, Mode::Eval, &mut rng)?.probs)
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, g: &ImageGraph) -> Result<usize> {
        Ok(argmax(&self.predict_proba(g)?))
    }
}

pub(crate) fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn node_matrix(g: &ImageGraph, dim: usize) -> Result<Array2<f64>> {
    let n = g.node_count();
    let mut flat = Vec::with_capacity(n * dim);
    for row in &g.node_features {
        if row.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{dim} node features"),
                got: format!("{} in slide {}", row.len(), g.slide_id),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok(Array2::from_shape_vec((n, dim), flat).expect("rows checked"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's graphs (dropout active).
    pub loss: f64,
    /// Fraction of graphs whose training-mode prediction was correct.
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    pub history: Vec<EpochStats>,
}

struct Prepared {
    x: Array2<f64>,
    adj: NormalizedAdjacency,
    label: usize,
}

/// Mini-batch Adam on the mean cross-entropy of each batch.
///
/// Node features are standardized with statistics of this training set.
/// Graphs in a batch are processed in parallel and their gradients summed in
/// batch order, so results depend only on the seed.
pub fn train(dataset: &[ImageGraph], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let dim = dataset
        .iter()
        .find_map(ImageGraph::feature_dim)
        .ok_or_else(|| Error::invalid("training graphs have no nodes"))?;
    let max_label = dataset.iter().map(|g| g.label).max().unwrap_or(0);
    let classes = config.classes.unwrap_or((max_label + 1).max(2));
    if max_label >= classes {
        return Err(Error::invalid(format!("label {max_label} out of range for {classes} classes")));
    }

    let standardizer = Standardizer::fit_rows(dataset.iter().flat_map(|g| g.node_features.iter().map(Vec::as_slice)))?;
    let prepared: Vec<Prepared> = dataset
        .iter()
        .map(|g| {
            Ok(Prepared {
                x: standardizer.transform(&node_matrix(g, dim)?)?,
                adj: NormalizedAdjacency::from_graph(g),
                label: g.label,
            })
        })
        .collect::<Result<_>>()?;

    let arch = Architecture {
        input_dim: dim,
        gcn_dims: config.gcn_dims.clone(),
        head_dims: config.head_dims.clone(),
        classes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GcnModel::new(arch, config.dropout_p, &mut rng)?;
    let mut adam = AdamState::new(&model.arch, AdamConfig::default());
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.random()).collect();
            let scale = 1.0 / batch.len() as f64;
            let results: Vec<Result<(Params, f64, bool)>> = batch
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(&i, &seed)| {
                    let item = &prepared[i];
                    let mut local = ChaCha8Rng::seed_from_u64(seed);
                    let cache = model.forward(&item.x, &item.adj, Mode::Train, &mut local)?;
                    let loss = -cache.probs[item.label].max(f64::MIN_POSITIVE).ln();
                    let hit = argmax(&cache.probs) == item.label;
                    let (g, _) = model.backward(&cache, &item.adj, item.label, scale, false)?;
                    Ok((g, loss, hit))
                })
                .collect();
            let mut grads = Params::zeros(&model.arch);
            for r in results {
                let (g, loss, hit) = r?;
                grads.add_assign(&g);
                loss_sum += loss;
                correct += hit as usize;
            }
            adam.step(&mut model.params, &grads, config.learning_rate);
        }
        history.push(EpochStats {
            epoch,
            loss: loss_sum / prepared.len() as f64,
            accuracy: correct as f64 / prepared.len() as f64,
        });
    }
    Ok(TrainOutcome {
        classifier: Classifier { model, standardizer },
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

/// Eval-mode accuracy and confusion matrix.
pub fn evaluate(classifier: &Classifier, dataset: &[ImageGraph]) -> Result<Evaluation> {
    let classes = classifier.model.arch.classes;
    let predictions: Vec<usize> = dataset
        .par_iter()
        .map(|g| classifier.predict(g))
        .collect::<Result<_>>()?;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0;
    for (g, &p) in dataset.iter().zip(&predictions) {
        if g.label >= classes {
            return Err(Error::invalid(format!("label {} out of range for {classes} classes", g.label)));
        }
        confusion[g.label][p] += 1;
        correct += (g.label == p) as usize;
    }
    Ok(Evaluation {
        accuracy: if dataset.is_empty() { 0.0 } else { correct as f64 / dataset.len() as f64 },
        confusion,
        predictions,
    })
}

//! Prediction with a fitted model, 1-NN baselines and evaluation reports.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataio::LabeledSpdDataset;
use crate::divergence::{airm_distance_sq, jbld};
use crate::error::{Error, Result};
use crate::iddl::{encode, IddlModel};
use crate::spd::{check_same_dim, spd_log, SpdMatrix};

/// Index of the largest entry, the first one on ties.
pub fn argmax_label(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Class scores `W·v` of `x`.
pub fn scores(model: &IddlModel, x: &SpdMatrix) -> Result<DVector<f64>> {
    let v = encode(x, &model.dictionary, &model.params)?;
    Ok(&model.w * v.values)
}

/// The 1-based label with the highest score (smallest label on ties).
pub fn predict(model: &IddlModel, x: &SpdMatrix) -> Result<u32> {
    Ok(argmax_label(scores(model, x)?.as_slice()) as u32 + 1)
}

/// Something that assigns a label and a score to an SPD matrix.
pub trait Classifier: Sync {
    fn label_count(&self) -> u32;

    /// Predicted 1-based label and its score (class score for the model,
    /// distance to the neighbor for 1-NN).
    fn predict_scored(&self, x: &SpdMatrix) -> Result<(u32, f64)>;
}

impl Classifier for IddlModel {
    fn label_count(&self) -> u32 {
        self.label_count
    }

    fn predict_scored(&self, x: &SpdMatrix) -> Result<(u32, f64)> {
        let s = scores(self, x)?;
        let k = argmax_label(s.as_slice());
        Ok((k as u32 + 1, s[k]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Metric {
    /// `‖log X − log Y‖_F`
    LogEuclidean,
    /// Geodesic distance `‖log(X^{-1/2} Y X^{-1/2})‖_F`
    Airm,
    /// Jensen-Bregman log-det divergence
    Jbld,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "le" | "log-euclidean" => Ok(Metric::LogEuclidean),
            "airm" => Ok(Metric::Airm),
            "jbld" => Ok(Metric::Jbld),
            _ => Err(Error::InvalidInput(format!("unknown metric {s:?} (expected le, airm or jbld)"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::LogEuclidean => "le",
            Metric::Airm => "airm",
            Metric::Jbld => "jbld",
        })
    }
}

/// 1-nearest-neighbor classifier over a training set.
pub struct NearestNeighbor<'a> {
    train: &'a LabeledSpdDataset,
    metric: Metric,
    logs: Vec<DMatrix<f64>>,
}

impl<'a> NearestNeighbor<'a> {
    pub fn new(train: &'a LabeledSpdDataset, metric: Metric) -> Result<Self> {
        let logs = if metric == Metric::LogEuclidean {
            train.samples().par_iter().map(spd_log).collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(NearestNeighbor { train, metric, logs })
    }

    /// Index of the nearest training sample (smallest index on ties) and its distance.
    pub fn nearest(&self, x: &SpdMatrix) -> Result<(usize, f64)> {
        check_same_dim(&self.train.samples()[0], x)?;
        let log_x = match self.metric {
            Metric::LogEuclidean => Some(spd_log(x)?),
            _ => None,
        };
        let mut best = (0, f64::INFINITY);
        for (i, y) in self.train.samples().iter().enumerate() {
            let dist = match self.metric {
                Metric::LogEuclidean => (log_x.as_ref().unwrap() - &self.logs[i]).norm(),
                Metric::Airm => airm_distance_sq(x, y)?.max(0.0).sqrt(),
                Metric::Jbld => jbld(x, y)?,
            };
            if dist < best.1 {
                best = (i, dist);
            }
        }
        Ok(best)
    }
}

impl Classifier for NearestNeighbor<'_> {
    fn label_count(&self) -> u32 {
        self.train.label_count()
    }

    fn predict_scored(&self, x: &SpdMatrix) -> Result<(u32, f64)> {
        let (i, dist) = self.nearest(x)?;
        Ok((self.train.labels()[i], dist))
    }
}

/// Label of the nearest training sample under `metric`.
pub fn nn1(train: &LabeledSpdDataset, x: &SpdMatrix, metric: Metric) -> Result<u32> {
    Ok(NearestNeighbor::new(train, metric)?.predict_scored(x)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePrediction {
    pub index: usize,
    pub label: u32,
    pub predicted: u32,
    pub score: f64,
}

/// Per-sample predictions, accuracy and an `L × L` confusion matrix
/// (rows true class, columns predicted class).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    pub per_sample: Vec<SamplePrediction>,
}

impl PredictionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    /// One row per sample: `index,label,predicted,score`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.per_sample {
            w.serialize(p).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

/// Predicts every test sample and tabulates the results.
pub fn evaluate(classifier: &dyn Classifier, test: &LabeledSpdDataset) -> Result<PredictionReport> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let l = classifier.label_count();
    if test.label_count() > l {
        return Err(Error::InvalidDataset(format!(
            "test set has {} classes, classifier knows {l}",
            test.label_count()
        )));
    }
    let predictions = test
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, x)| classifier.predict_scored(x).map_err(|e| e.at("sample", i)))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = vec![vec![0u64; l as usize]; l as usize];
    let mut per_sample = Vec::with_capacity(test.len());
    let mut hits = 0;
    for (i, ((predicted, score), &label)) in predictions.into_iter().zip(test.labels()).enumerate() {
        confusion[label as usize - 1][predicted as usize - 1] += 1;
        hits += (label == predicted) as usize;
        per_sample.push(SamplePrediction {
            index: i,
            label,
            predicted,
            score,
        });
    }
    Ok(PredictionReport {
        accuracy: hits as f64 / test.len() as f64,
        confusion,
        per_sample,
    })
}

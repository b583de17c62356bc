//! Holdout evaluation: code-exact accuracy, confusion matrix, per-class
//! precision/recall and accuracy per grid stratum.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ann::Network;
use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fault::{label_name, FaultType, LabelName};

/// Column used for predicted codes outside the class table.
pub const UNKNOWN_COLUMN: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassMetrics {
    pub class: &'static str,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub overall: Tally,
    /// Per-output (A, B, C, G) bit accuracy.
    pub bits: [Tally; 4],
    /// `confusion[true][predicted]`; column 12 collects unknown codes.
    pub confusion: Vec<[usize; 13]>,
    pub classes: Vec<ClassMetrics>,
    /// Accuracy keyed by the stratum value, K in percent.
    pub by_k: BTreeMap<String, Tally>,
    pub by_r: BTreeMap<String, Tally>,
    pub by_vw: BTreeMap<String, Tally>,
}

impl Evaluation {
    /// Smallest accuracy over every K, R and Vw stratum.
    pub fn worst_stratum(&self) -> Option<(String, f64)> {
        self.by_k
            .iter()
            .map(|(k, t)| (format!("K={k}"), t.accuracy()))
            .chain(
                self.by_r
                    .iter()
                    .map(|(k, t)| (format!("R={k}"), t.accuracy())),
            )
            .chain(
                self.by_vw
                    .iter()
                    .map(|(k, t)| (format!("Vw={k}"), t.accuracy())),
            )
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn stratum_key(v: f64) -> String {
    // grid values are short decimals; round away representation noise
    let r = (v * 1e9).round() / 1e9;
    r.to_string()
}

pub fn evaluate(
    net: &Network,
    samples: &[LabeledSample],
    threshold: f64,
    exec: Exec,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = exec
        .map_indices(samples.len(), |i| {
            net.classify(&samples[i].features, threshold)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut ev = Evaluation {
        overall: Tally::default(),
        bits: [Tally::default(); 4],
        confusion: vec![[0; 13]; 12],
        classes: Vec::new(),
        by_k: BTreeMap::new(),
        by_r: BTreeMap::new(),
        by_vw: BTreeMap::new(),
    };
    for (s, pred) in samples.iter().zip(&preds) {
        let ok = *pred == s.target;
        ev.overall.add(ok);
        for i in 0..4 {
            ev.bits[i].add(pred.bits[i] == s.target.bits[i]);
        }
        let col = match label_name(*pred) {
            LabelName::Known(f) => f.index(),
            LabelName::Unknown => UNKNOWN_COLUMN,
        };
        ev.confusion[s.params.fault_type.index()][col] += 1;
        let p = &s.params;
        ev.by_k
            .entry(stratum_key(p.compensation * 100.0))
            .or_default()
            .add(ok);
        ev.by_r
            .entry(stratum_key(p.fault_resistance))
            .or_default()
            .add(ok);
        ev.by_vw
            .entry(stratum_key(p.wind_speed))
            .or_default()
            .add(ok);
    }
    for ft in FaultType::ALL {
        let i = ft.index();
        let support: usize = ev.confusion[i].iter().sum();
        let predicted: usize = ev.confusion.iter().map(|row| row[i]).sum();
        let tp = ev.confusion[i][i];
        let ratio = |a: usize, b: usize| {
            if b == 0 {
                f64::NAN
            } else {
                a as f64 / b as f64
            }
        };
        ev.classes.push(ClassMetrics {
            class: ft.name(),
            support,
            precision: ratio(tp, predicted),
            recall: ratio(tp, support),
        });
    }
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::default_shape;
    use crate::dataset::{grid_params, labeled_sample};
    use crate::synth::SurrogateModel;

    #[test]
    fn zero_network_matches_only_the_healthy_class() {
        let model = SurrogateModel::default();
        let samples: Vec<_> = grid_params(0, 0.0)[..48]
            .iter()
            .map(|p| labeled_sample(p, &model).unwrap())
            .collect();
        let net = Network::zeros(default_shape()).unwrap();
        let ev = evaluate(&net, &samples, 0.5, Exec::Sequential).unwrap();
        assert_eq!(ev.overall.total, 48);
        assert_eq!(ev.overall.correct, 4);
        assert!((ev.overall.accuracy() - 1.0 / 12.0).abs() < 1e-12);
        // everything is predicted healthy
        for row in &ev.confusion {
            assert_eq!(row.iter().sum::<usize>(), row[FaultType::NoFault.index()]);
        }
        let healthy = &ev.classes[FaultType::NoFault.index()];
        assert_eq!(healthy.recall, 1.0);
        assert!((healthy.precision - 1.0 / 12.0).abs() < 1e-12);
        assert!(ev.classes[0].precision.is_nan());
        assert_eq!(ev.by_r.len(), 4);
        assert_eq!(ev.by_k.keys().collect::<Vec<_>>(), vec!["20"]);
    }
}

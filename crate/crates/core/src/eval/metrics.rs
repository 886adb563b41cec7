// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::netlist::RegisterClass;

/// Confusion counts with state registers as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: usize,
    #[serde(rename = "fp")]
    pub false_pos: usize,
    #[serde(rename = "tn")]
    pub true_neg: usize,
    #[serde(rename = "fn")]
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn tally(truth: &[RegisterClass], predicted: &[RegisterClass]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "truth and prediction lengths differ");
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            c.add(t, p);
        }
        c
    }

    pub fn add(&mut self, truth: RegisterClass, predicted: RegisterClass) {
        match (truth.is_state(), predicted.is_state()) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_neg += 1,
            (false, true) => self.false_pos += 1,
            (false, false) => self.true_neg += 1,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.true_neg += other.true_neg;
        self.false_neg += other.false_neg;
    }

    pub fn positives(&self) -> usize {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> usize {
        self.true_neg + self.false_pos
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

/// `None` marks a metric whose denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let sensitivity = ratio(c.true_pos, c.positives());
    let specificity = ratio(c.true_neg, c.negatives());
    let balanced_accuracy = match (sensitivity, specificity) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    Metrics { sensitivity, specificity, balanced_accuracy }
}

/// Mean of the defined values and the number of undefined ones skipped.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                n += 1;
            }
            None => skipped += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), skipped)
}

/// Averages each metric separately over `items`.
pub fn macro_average(items: &[Metrics]) -> (Metrics, usize) {
    let (sensitivity, s1) = mean_defined(items.iter().map(|m| m.sensitivity));
    let (specificity, s2) = mean_defined(items.iter().map(|m| m.specificity));
    let (balanced_accuracy, s3) = mean_defined(items.iter().map(|m| m.balanced_accuracy));
    (Metrics { sensitivity, specificity, balanced_accuracy }, s1.max(s2).max(s3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use RegisterClass::{Data, State};

    #[test]
    fn tally_counts_each_cell() {
        let c = ConfusionCounts::tally(&[State, State, Data, Data, Data], &[State, Data, State, Data, Data]);
        assert_eq!(
            c,
            ConfusionCounts { true_pos: 1, false_neg: 1, false_pos: 1, true_neg: 2 }
        );
    }

    #[test]
    fn undefined_when_no_positives() {
        let m = metrics(&ConfusionCounts { true_neg: 3, ..Default::default() });
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.balanced_accuracy, None);
    }

    #[test]
    fn macro_average_skips_undefined() {
        let a = Metrics { sensitivity: Some(1.0), specificity: Some(0.5), balanced_accuracy: Some(0.75) };
        let b = Metrics { sensitivity: None, specificity: Some(1.0), balanced_accuracy: None };
        let (m, skipped) = macro_average(&[a, b]);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(0.75));
        assert_eq!(skipped, 1);
    }

    #[test]
    fn serializes_short_names() {
        let s = serde_json::to_string(&ConfusionCounts { true_pos: 1, ..Default::default() }).unwrap();
        assert_eq!(s, r#"{"tp":1,"fp":0,"tn":0,"fn":0}"#);
    }
}

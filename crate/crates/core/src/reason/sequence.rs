//! Order-k Markov model of event kinds, trained by counting.

use std::collections::{BTreeMap, BTreeSet};

use super::ReasonError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSequenceModel {
    order: usize,
    counts: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    kinds: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NextEventDistribution {
    pub probabilities: BTreeMap<String, f64>,
    /// Set when the trailing context was never observed and the
    /// distribution falls back to uniform over known kinds.
    pub uninformed: bool,
}

impl NextEventDistribution {
    /// Most likely kind; ties go to the lexicographically smallest kind.
    pub fn top(&self) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for (kind, &p) in &self.probabilities {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((kind, p));
            }
        }
        best
    }
}

impl Default for EventSequenceModel {
    fn default() -> Self {
        Self::new(1)
    }
}

impl EventSequenceModel {
    pub fn new(order: usize) -> Self {
        Self {
            order: order.max(1),
            counts: BTreeMap::new(),
            kinds: BTreeSet::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn count(&self, context: &[&str], next: &str) -> u64 {
        let ctx: Vec<String> = context.iter().map(|s| s.to_string()).collect();
        self.counts
            .get(&ctx)
            .and_then(|m| m.get(next))
            .copied()
            .unwrap_or(0)
    }

    pub fn kinds(&self) -> &BTreeSet<String> {
        &self.kinds
    }

    /// Add one count per consecutive `(k-gram, next)` pair. Sequences
    /// shorter than `k + 1` leave the model untouched.
    pub fn train<S: AsRef<str>>(&mut self, sequence: &[S]) {
        if sequence.len() < self.order + 1 {
            return;
        }
        for s in sequence {
            self.kinds.insert(s.as_ref().to_string());
        }
        for window in sequence.windows(self.order + 1) {
            let ctx: Vec<String> = window[..self.order]
                .iter()
                .map(|s| s.as_ref().to_string())
                .collect();
            let next = window[self.order].as_ref().to_string();
            *self.counts.entry(ctx).or_default().entry(next).or_insert(0) += 1;
        }
    }

    /// Maximum-likelihood next-kind distribution for the trailing k-gram of
    /// `history`.
    pub fn predict_next<S: AsRef<str>>(
        &self,
        history: &[S],
    ) -> Result<NextEventDistribution, ReasonError> {
        if history.len() < self.order {
            return Err(ReasonError::HistoryTooShort {
                needed: self.order,
                got: history.len(),
            });
        }
        let ctx: Vec<String> = history[history.len() - self.order..]
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        match self.counts.get(&ctx) {
            Some(nexts) => {
                let total: u64 = nexts.values().sum();
                let probabilities = nexts
                    .iter()
                    .map(|(k, &c)| (k.clone(), c as f64 / total as f64))
                    .collect();
                Ok(NextEventDistribution {
                    probabilities,
                    uninformed: false,
                })
            }
            None if self.kinds.is_empty() => Err(ReasonError::EmptyModel),
            None => {
                let p = 1.0 / self.kinds.len() as f64;
                Ok(NextEventDistribution {
                    probabilities: self.kinds.iter().map(|k| (k.clone(), p)).collect(),
                    uninformed: true,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_transitions() {
        let mut m = EventSequenceModel::new(1);
        m.train(&["A", "B", "A", "B"]);
        assert_eq!(m.count(&["A"], "B"), 2);
        assert_eq!(m.count(&["B"], "A"), 1);
        assert_eq!(m.count(&["A"], "A"), 0);
    }

    #[test]
    fn short_sequence_is_ignored() {
        let mut m = EventSequenceModel::new(2);
        m.train(&["A", "B"]);
        assert_eq!(m, EventSequenceModel::new(2));
    }

    #[test]
    fn training_is_additive() {
        let seq = ["A", "B", "B", "A", "C"];
        let mut once = EventSequenceModel::new(1);
        once.train(&seq);
        let mut twice = EventSequenceModel::new(1);
        twice.train(&seq);
        twice.train(&seq);
        for a in ["A", "B", "C"] {
            for b in ["A", "B", "C"] {
                assert_eq!(twice.count(&[a], b), 2 * once.count(&[a], b));
            }
        }
    }

    #[test]
    fn alternation_is_certain() {
        let mut m = EventSequenceModel::new(1);
        m.train(&["A", "B", "A", "B", "A", "B"]);
        let d = m.predict_next(&["B", "A"]).unwrap();
        assert_eq!(d.probabilities["B"], 1.0);
        assert!(!d.uninformed);
    }

    #[test]
    fn split_counts_give_half() {
        let mut m = EventSequenceModel::new(1);
        m.train(&["A", "A", "B", "A", "A", "B"]);
        // A→A twice, A→B twice, B→A once
        let d = m.predict_next(&["A"]).unwrap();
        assert_eq!(d.probabilities["A"], 0.5);
        assert_eq!(d.probabilities["B"], 0.5);
        assert_eq!(d.top(), Some(("A", 0.5)));
    }

    #[test]
    fn unseen_context_falls_back_to_uniform() {
        let mut m = EventSequenceModel::new(2);
        m.train(&["A", "B", "A"]);
        let d = m.predict_next(&["B", "B"]).unwrap();
        assert!(d.uninformed);
        assert_eq!(d.probabilities.len(), 2);
        assert_eq!(d.probabilities["A"], 0.5);
    }

    #[test]
    fn empty_model_errors() {
        let m = EventSequenceModel::new(1);
        assert_eq!(m.predict_next(&["A"]).unwrap_err(), ReasonError::EmptyModel);
        assert!(matches!(
            m.predict_next::<&str>(&[]),
            Err(ReasonError::HistoryTooShort { .. })
        ));
    }
}

use std::collections::HashMap;

use crate::space::{Configuration, DesignSpace, FeatureVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub config: Configuration,
    pub id: u64,
    pub predicted: f64,
}

/// Explored configurations of one iteration, deduplicated and ranked by
/// predicted fitness (descending, ties by lower ordinal id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    items: Vec<Candidate>,
}

impl CandidateSet {
    /// Builds a ranked set; the first score seen for a configuration wins.
    pub fn from_scored(
        space: &DesignSpace,
        scored: impl IntoIterator<Item = (Configuration, f64)>,
    ) -> Self {
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut items = Vec::new();
        for (config, predicted) in scored {
            let id = space.ordinal(&config);
            seen.entry(id).or_insert_with(|| {
                items.push(Candidate {
                    config,
                    id,
                    predicted,
                });
                items.len() - 1
            });
        }
        items.sort_by(|a, b| b.predicted.total_cmp(&a.predicted).then(a.id.cmp(&b.id)));
        Self { items }
    }

    pub fn items(&self) -> &[Candidate] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn configs(&self) -> impl Iterator<Item = &Configuration> {
        self.items.iter().map(|c| &c.config)
    }

    pub fn features(&self, space: &DesignSpace) -> Vec<FeatureVector> {
        self.items
            .iter()
            .map(|c| space.encode_features(&c.config))
            .collect()
    }

    pub fn mean_predicted(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().map(|c| c.predicted).sum::<f64>() / self.items.len() as f64
    }

    pub fn retain(&mut self, keep: impl FnMut(&Candidate) -> bool) {
        self.items.retain(keep);
    }

    /// Keeps the `n` best-ranked candidates.
    pub fn truncate(&mut self, n: usize) {
        self.items.truncate(n);
    }
}

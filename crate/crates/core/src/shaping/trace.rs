use serde::{Deserialize, Serialize};

/// One optimizer epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub metric_bits: f64,
    pub kurtosis: f64,
    pub penalty_d: f64,
    /// Cosine decay factor multiplying the initial step sizes.
    pub lr_factor: f64,
    /// Kurtosis above the target.
    pub violated: bool,
    /// Running minimum of the selection score; non-increasing by construction.
    pub best_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub rows: Vec<TraceRow>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl OptTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].best_score <= w[0].best_score)
    }
}

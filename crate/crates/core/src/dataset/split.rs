use std::ops::Range;

use super::{DatasetError, SupervisedDataset};

/// Chronological train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.70, val_fraction: 0.15, test_fraction: 0.15 }
    }
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let spec = Self { train_fraction: train, val_fraction: val, test_fraction: test };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(DatasetError::InvalidSplit(format!("fraction {f} is outside (0, 1)")));
        }
        let sum: f64 = fractions.iter().sum();
        if sum > 1.0 + 1e-9 {
            return Err(DatasetError::InvalidSplit(format!("fractions sum to {sum} > 1")));
        }
        Ok(())
    }
}

/// `floor(n * fraction)`, tolerant of representation error such as `0.7 * 10`.
fn portion(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronoSplit {
    pub train: SupervisedDataset,
    pub val: SupervisedDataset,
    pub test: SupervisedDataset,
}

/// Contiguous train, val, test slices. The test slice takes whatever the
/// first two leave, so no window is discarded.
pub fn split_chrono(dataset: &SupervisedDataset, spec: SplitSpec) -> Result<ChronoSplit, DatasetError> {
    spec.validate()?;
    let n = dataset.len();
    let n_train = portion(n, spec.train_fraction);
    let n_val = portion(n, spec.val_fraction);
    let n_test = n.saturating_sub(n_train + n_val);
    for (name, size) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        if size == 0 {
            return Err(DatasetError::EmptySlice(name));
        }
    }
    Ok(ChronoSplit {
        train: dataset.slice(0..n_train),
        val: dataset.slice(n_train..n_train + n_val),
        test: dataset.slice(n_train + n_val..n),
    })
}

/// One walk-forward fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    /// 1-based fold number.
    pub number: usize,
    pub train_range: Range<usize>,
    pub naive_range: Range<usize>,
    pub test_range: Range<usize>,
    pub train: SupervisedDataset,
    /// Windows the naive baseline averages over; also used for early stopping.
    pub naive_history: SupervisedDataset,
    pub test: SupervisedDataset,
}

/// Four expanding-window folds: the first 20k% of windows train fold k, the
/// next 10% feed the naive baseline and the 10% after that are the test set.
pub fn tscv_folds(dataset: &SupervisedDataset) -> Result<Vec<Fold>, DatasetError> {
    let n = dataset.len();
    if n < 10 {
        return Err(DatasetError::TooSmallForFolds(n));
    }
    let tenth = portion(n, 0.1);
    Ok((1..=4)
        .map(|k| {
            let train_end = portion(n, 0.2 * k as f64);
            let naive_end = train_end + tenth;
            let test_end = naive_end + tenth;
            Fold {
                number: k,
                train_range: 0..train_end,
                naive_range: train_end..naive_end,
                test_range: naive_end..test_end,
                train: dataset.slice(0..train_end),
                naive_history: dataset.slice(train_end..naive_end),
                test: dataset.slice(naive_end..test_end),
            }
        })
        .collect())
}

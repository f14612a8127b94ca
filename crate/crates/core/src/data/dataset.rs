use std::path::Path;

use serde::{Deserialize, Serialize};

use super::idx::load_idx;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MNIST_MEAN: f64 = 0.1307;
pub const MNIST_STD: f64 = 0.3081;

/// `(images, labels)` file names for the train and test splits.
pub const MNIST_FILES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn mnist_len(self) -> usize {
        match self {
            Split::Train => 60_000,
            Split::Test => 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    images: Matrix,
    labels: Vec<u8>,
    split: Split,
    normalized: bool,
}

impl Dataset {
    pub fn new(images: Matrix, labels: Vec<u8>, split: Split) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::data(format!(
                "{} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= 10) {
            return Err(Error::data(format!("label {l} out of range")));
        }
        Ok(Dataset {
            images,
            labels,
            split,
            normalized: false,
        })
    }

    pub fn images(&self) -> &Matrix {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn features(&self) -> usize {
        self.images.cols()
    }

    /// Examples per class.
    pub fn label_counts(&self) -> [usize; 10] {
        let mut counts = [0; 10];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Scales pixels to `[0, 1]`, then standardizes with the fixed MNIST mean/std.
    /// Refuses to run twice.
    pub fn normalize(self) -> Result<Self> {
        self.normalize_with(MNIST_MEAN, MNIST_STD)
    }

    /// `(p / 255 − mean) / std` for every pixel `p`.
    pub fn normalize_with(mut self, mean: f64, std: f64) -> Result<Self> {
        if self.normalized {
            return Err(Error::data("dataset is already normalized"));
        }
        if !(std > 0.0) || !mean.is_finite() {
            return Err(Error::config(format!(
                "invalid normalization mean {mean}, std {std}"
            )));
        }
        for v in self.images.as_mut_slice() {
            *v = (*v / 255.0 - mean) / std;
        }
        self.normalized = true;
        Ok(self)
    }

    /// A copy restricted to `indices` (in order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.gather_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
            normalized: self.normalized,
        }
    }

    /// Checks the MNIST split size and 28×28 geometry.
    pub fn check_mnist_shape(&self) -> Result<()> {
        if self.features() != 784 {
            return Err(Error::data(format!(
                "expected 784 features, got {}",
                self.features()
            )));
        }
        if self.len() != self.split.mnist_len() {
            return Err(Error::data(format!(
                "{:?} split has {} examples, expected {}",
                self.split,
                self.len(),
                self.split.mnist_len()
            )));
        }
        Ok(())
    }
}

/// Loads and normalizes both MNIST splits from `dir`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let load = |(images, labels): (&str, &str), split| -> Result<Dataset> {
        let ds = load_idx(&dir.join(images), &dir.join(labels), split)?;
        ds.check_mnist_shape()?;
        ds.normalize()
    };
    Ok((
        load(MNIST_FILES[0], Split::Train)?,
        load(MNIST_FILES[1], Split::Test)?,
    ))
}

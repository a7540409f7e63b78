use crate::error::{Error, Result};
use crate::num::{DenseMatrix, SeededRng};

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// `true` where the label was replaced; present iff corruption was applied.
    pub corruption_mask: Option<Vec<bool>>,
}

impl LabeledDataset {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dimension {
                what: "labels",
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Contract(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            classes,
            corruption_mask: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Features with a trailing constant-one column.
    pub fn with_bias(&self) -> DenseMatrix {
        let d = self.dim();
        DenseMatrix::from_fn(self.len(), d + 1, |r, c| if c < d { self.features.get(r, c) } else { 1.0 })
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> LabeledDataset {
        let n = n.min(self.len());
        let d = self.dim();
        LabeledDataset {
            features: DenseMatrix::from_rows(n, d, self.features.as_slice()[..n * d].to_vec()),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
            corruption_mask: self.corruption_mask.as_ref().map(|m| m[..n].to_vec()),
        }
    }

    /// Rows `from..to`.
    pub fn slice(&self, from: usize, to: usize) -> LabeledDataset {
        let d = self.dim();
        LabeledDataset {
            features: DenseMatrix::from_rows(to - from, d, self.features.as_slice()[from * d..to * d].to_vec()),
            labels: self.labels[from..to].to_vec(),
            classes: self.classes,
            corruption_mask: self.corruption_mask.as_ref().map(|m| m[from..to].to_vec()),
        }
    }
}

/// Offset of class `c` along axis `c mod d`.
pub(crate) const CLASS_SEPARATION: f64 = 2.5;

/// Gaussian blobs with unit variance around the means
/// `CLASS_SEPARATION · e_{c mod d}`, each label then independently replaced
/// by a uniformly random class with probability `corruption_rate`.
///
/// Labels cycle through the classes, so class counts differ by at most one
/// and are exactly balanced when `classes` divides `n`.
///
/// The means do not depend on `rng`, so a training and a validation set drawn
/// from different streams share one distribution.
pub fn gen_corrupted_dataset(rng: &mut SeededRng, n: usize, d: usize, classes: usize, corruption_rate: f64) -> Result<LabeledDataset> {
    if classes == 0 || d == 0 {
        return Err(Error::Contract(format!("need classes >= 1 and d >= 1, got {classes} and {d}")));
    }
    if !(0.0..=1.0).contains(&corruption_rate) {
        return Err(Error::Contract(format!("corruption rate {corruption_rate} outside [0, 1]")));
    }
    let mut features = DenseMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let row = features.row_mut(i);
        for (j, x) in row.iter_mut().enumerate() {
            *x = rng.normal();
            if j == c % d {
                *x += CLASS_SEPARATION;
            }
        }
        labels.push(c);
    }
    let mut ds = LabeledDataset::new(features, labels, classes)?;
    corrupt_labels(&mut ds, rng, corruption_rate)?;
    Ok(ds)
}

/// Replaces each label independently with probability `rate` by a uniformly
/// random class (possibly the same one) and records the mask.
pub fn corrupt_labels(ds: &mut LabeledDataset, rng: &mut SeededRng, rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Contract(format!("corruption rate {rate} outside [0, 1]")));
    }
    let mut mask = Vec::with_capacity(ds.len());
    for y in ds.labels.iter_mut() {
        let corrupt = rng.bernoulli(rate);
        if corrupt {
            *y = rng.below(ds.classes);
        }
        mask.push(corrupt);
    }
    ds.corruption_mask = Some(mask);
    Ok(())
}

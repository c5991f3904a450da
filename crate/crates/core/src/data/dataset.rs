use std::collections::HashMap;

use crate::error::{arg, shape, Result};
use crate::network::{argmax, validate_label_rows};
use crate::numerics::Matrix;

/// Stable sample identifier, preserved through subsets and splits.
pub type SampleId = u64;

/// Feature rows with soft labels, optional ground truth and stable ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Matrix,
    ground_truth: Option<Vec<usize>>,
    ids: Vec<SampleId>,
    class_count: usize,
    index: HashMap<SampleId, usize>,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Matrix,
        ground_truth: Option<Vec<usize>>,
        ids: Vec<SampleId>,
        class_count: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.rows() != n || ids.len() != n {
            return shape(format!(
                "{n} feature rows, {} label rows, {} ids",
                labels.rows(),
                ids.len()
            ));
        }
        if class_count < 2 || labels.cols() != class_count {
            return shape(format!(
                "label width {} for {class_count} classes",
                labels.cols()
            ));
        }
        validate_label_rows(&labels)?;
        if let Some(gt) = &ground_truth {
            if gt.len() != n {
                return shape(format!("{} ground-truth labels for {n} samples", gt.len()));
            }
            if let Some(bad) = gt.iter().find(|&&c| c >= class_count) {
                return arg(format!("ground-truth class {bad} out of range"));
            }
        }
        let mut index = HashMap::with_capacity(n);
        for (row, &id) in ids.iter().enumerate() {
            if index.insert(id, row).is_some() {
                return arg(format!("duplicate sample id {id}"));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            ground_truth,
            ids,
            class_count,
            index,
        })
    }

    /// One-hot labels from hard classes; ids `0..n`; ground truth equals the
    /// observed labels.
    pub fn from_classes(features: Matrix, classes: Vec<usize>, class_count: usize) -> Result<Self> {
        let labels = one_hot(&classes, class_count)?;
        let ids = (0..classes.len() as SampleId).collect();
        LabeledDataset::new(features, labels, Some(classes), ids, class_count)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    pub fn ground_truth(&self) -> Option<&[usize]> {
        self.ground_truth.as_deref()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn row_of(&self, id: SampleId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub(crate) fn rows_of(&self, ids: &[SampleId]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|&id| {
                self.row_of(id)
                    .ok_or_else(|| crate::Error::Argument(format!("unknown sample id {id}")))
            })
            .collect()
    }

    /// Argmax of the stored (possibly soft) label of a row.
    pub fn hard_label(&self, row: usize) -> usize {
        argmax(self.labels.row(row))
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.len()).map(|r| self.hard_label(r)).collect()
    }

    pub fn truth_of(&self, row: usize) -> Option<usize> {
        self.ground_truth.as_ref().map(|gt| gt[row])
    }

    /// Ids whose observed hard label disagrees with the ground truth, in row
    /// order. Empty when no ground truth is attached.
    pub fn mislabeled_ids(&self) -> Vec<SampleId> {
        match &self.ground_truth {
            None => Vec::new(),
            Some(gt) => (0..self.len())
                .filter(|&r| self.hard_label(r) != gt[r])
                .map(|r| self.ids[r])
                .collect(),
        }
    }

    /// Samples with the given ids, in the given order.
    pub fn subset(&self, ids: &[SampleId]) -> Result<LabeledDataset> {
        let rows = self.rows_of(ids)?;
        Ok(self.select_rows(&rows))
    }

    pub(crate) fn select_rows(&self, rows: &[usize]) -> LabeledDataset {
        let ids: Vec<SampleId> = rows.iter().map(|&r| self.ids[r]).collect();
        let index = ids.iter().enumerate().map(|(r, &id)| (id, r)).collect();
        LabeledDataset {
            features: self.features.select_rows(rows),
            labels: self.labels.select_rows(rows),
            ground_truth: self
                .ground_truth
                .as_ref()
                .map(|gt| rows.iter().map(|&r| gt[r]).collect()),
            ids,
            class_count: self.class_count,
            index,
        }
    }

    /// Replaces one stored label row. The row must be a distribution.
    pub fn set_label(&mut self, row: usize, label: &[f64]) -> Result<()> {
        if label.len() != self.class_count {
            return shape(format!("label of width {} for {} classes", label.len(), self.class_count));
        }
        let check = Matrix::from_vec(1, label.len(), label.to_vec())?;
        validate_label_rows(&check)?;
        self.labels.row_mut(row).copy_from_slice(label);
        Ok(())
    }

    pub(crate) fn features_mut(&mut self) -> &mut Matrix {
        &mut self.features
    }

    /// Feature rows and label rows for the given ids.
    pub fn batch(&self, ids: &[SampleId]) -> Result<(Matrix, Matrix)> {
        let rows = self.rows_of(ids)?;
        Ok((self.features.select_rows(&rows), self.labels.select_rows(&rows)))
    }

    /// Number of samples per observed hard label.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for r in 0..self.len() {
            sizes[self.hard_label(r)] += 1;
        }
        sizes
    }
}

pub fn one_hot(classes: &[usize], class_count: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(classes.len(), class_count);
    for (i, &c) in classes.iter().enumerate() {
        if c >= class_count {
            return arg(format!("class {c} out of range for {class_count} classes"));
        }
        m.set(i, c, 1.0);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]).unwrap();
        LabeledDataset::from_classes(x, vec![0, 1, 1], 2).unwrap()
    }

    #[test]
    fn subset_keeps_id_row_correspondence() {
        let ds = toy();
        let sub = ds.subset(&[2, 0]).unwrap();
        assert_eq!(sub.ids(), &[2, 0]);
        assert_eq!(sub.features().row(0), &[2.0, 2.0]);
        assert_eq!(sub.ground_truth().unwrap(), &[1, 0]);
        assert_eq!(sub.row_of(0), Some(1));
        assert!(ds.subset(&[9]).is_err());
    }

    #[test]
    fn rejects_inconsistent_construction() {
        let x = Matrix::zeros(2, 1);
        let y = one_hot(&[0, 1], 2).unwrap();
        assert!(LabeledDataset::new(x.clone(), y.clone(), None, vec![1, 1], 2).is_err());
        assert!(LabeledDataset::new(x.clone(), y.clone(), None, vec![1], 2).is_err());
        let soft = Matrix::from_rows(&[[0.5, 0.6], [1.0, 0.0]]).unwrap();
        assert!(LabeledDataset::new(x, soft, None, vec![0, 1], 2).is_err());
    }

    #[test]
    fn mislabeled_ids_compare_with_truth() {
        let mut ds = toy();
        ds.set_label(1, &[0.9, 0.1]).unwrap();
        assert_eq!(ds.mislabeled_ids(), vec![1]);
        assert!(ds.set_label(0, &[0.9, 0.9]).is_err());
    }
}

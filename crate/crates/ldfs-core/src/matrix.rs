use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{CoreError, Result};
use crate::vector::{l2_norm, normalize, UnitVector, UNIT_NORM_TOL};

/// Row-stacked embedding set with per-row labels, domain tags, and ids.
///
/// Rows are unit-norm unless the matrix was explicitly constructed `raw`
/// (pre-normalization mapper outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Array2<f64>,
    labels: Vec<usize>,
    domain_tags: Vec<usize>,
    instance_ids: Vec<String>,
    normalized: bool,
}

impl FeatureMatrix {
    /// Builds a matrix of unit-norm rows, validating every row.
    pub fn new(
        rows: Array2<f64>,
        labels: Vec<usize>,
        domain_tags: Vec<usize>,
        instance_ids: Vec<String>,
    ) -> Result<Self> {
        Self::check_lengths(&rows, &labels, &domain_tags, &instance_ids)?;
        for (i, row) in rows.axis_iter(Axis(0)).enumerate() {
            let norm = l2_norm(row);
            if !norm.is_finite() {
                return Err(CoreError::NonFinite { what: "feature row" });
            }
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                let _ = i;
                return Err(CoreError::NotUnitNorm {
                    norm,
                    tolerance: UNIT_NORM_TOL,
                });
            }
        }
        Ok(FeatureMatrix {
            rows,
            labels,
            domain_tags,
            instance_ids,
            normalized: true,
        })
    }

    /// Builds a matrix without the unit-norm check (raw mapper outputs).
    pub fn raw(
        rows: Array2<f64>,
        labels: Vec<usize>,
        domain_tags: Vec<usize>,
        instance_ids: Vec<String>,
    ) -> Result<Self> {
        Self::check_lengths(&rows, &labels, &domain_tags, &instance_ids)?;
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonFinite { what: "feature row" });
        }
        Ok(FeatureMatrix {
            rows,
            labels,
            domain_tags,
            instance_ids,
            normalized: false,
        })
    }

    /// Empty matrix of the given dimension (e.g. synthesis with no targets).
    pub fn empty(dim: usize) -> Self {
        FeatureMatrix {
            rows: Array2::zeros((0, dim)),
            labels: Vec::new(),
            domain_tags: Vec::new(),
            instance_ids: Vec::new(),
            normalized: true,
        }
    }

    fn check_lengths(
        rows: &Array2<f64>,
        labels: &[usize],
        domain_tags: &[usize],
        instance_ids: &[String],
    ) -> Result<()> {
        let n = rows.nrows();
        if labels.len() != n {
            return Err(CoreError::LengthMismatch {
                what: "labels",
                expected: n,
                got: labels.len(),
            });
        }
        if domain_tags.len() != n {
            return Err(CoreError::LengthMismatch {
                what: "domain_tags",
                expected: n,
                got: domain_tags.len(),
            });
        }
        if instance_ids.len() != n {
            return Err(CoreError::LengthMismatch {
                what: "instance_ids",
                expected: n,
                got: instance_ids.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    /// Row `i` as a unit vector. Errors if the matrix is raw and the row is
    /// off the sphere.
    pub fn unit_row(&self, i: usize) -> Result<UnitVector> {
        UnitVector::new(self.rows.row(i).to_owned())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn domain_tags(&self) -> &[usize] {
        &self.domain_tags
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    /// Distinct domain tags, ascending.
    pub fn distinct_domains(&self) -> Vec<usize> {
        let mut tags = self.domain_tags.clone();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    /// Rows whose domain tag equals `domain`, preserving order.
    pub fn filter_by_domain(&self, domain: usize) -> FeatureMatrix {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.domain_tags[i] == domain)
            .collect();
        self.select(&keep)
    }

    /// Sub-matrix with the given row indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let rows = self.rows.select(Axis(0), indices);
        FeatureMatrix {
            rows,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            domain_tags: indices.iter().map(|&i| self.domain_tags[i]).collect(),
            instance_ids: indices.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            normalized: self.normalized,
        }
    }

    /// Row-wise concatenation. Dimensions must agree; the result is
    /// normalized only if both inputs are.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let rows = ndarray::concatenate(Axis(0), &[self.rows.view(), other.rows.view()])
            .expect("shapes checked");
        Ok(FeatureMatrix {
            rows,
            labels: [self.labels.as_slice(), other.labels.as_slice()].concat(),
            domain_tags: [self.domain_tags.as_slice(), other.domain_tags.as_slice()].concat(),
            instance_ids: [self.instance_ids.as_slice(), other.instance_ids.as_slice()].concat(),
            normalized: self.normalized && other.normalized,
        })
    }

    /// Centroid of all rows. Errors on an empty set.
    pub fn centroid(&self) -> Result<Array1<f64>> {
        if self.is_empty() {
            return Err(CoreError::EmptySet {
                what: "feature matrix",
            });
        }
        Ok(self.rows.mean_axis(Axis(0)).expect("non-empty"))
    }
}

/// Per-class text-prompt embeddings: exactly one unit-norm row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTextBank {
    class_names: Vec<String>,
    class_embeddings: Array2<f64>,
}

impl ClassTextBank {
    pub fn new(class_names: Vec<String>, class_embeddings: Array2<f64>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(CoreError::EmptySet { what: "class bank" });
        }
        if class_embeddings.nrows() != class_names.len() {
            return Err(CoreError::LengthMismatch {
                what: "class embeddings",
                expected: class_names.len(),
                got: class_embeddings.nrows(),
            });
        }
        for row in class_embeddings.axis_iter(Axis(0)) {
            let norm = l2_norm(row);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(CoreError::NotUnitNorm {
                    norm,
                    tolerance: UNIT_NORM_TOL,
                });
            }
        }
        Ok(ClassTextBank {
            class_names,
            class_embeddings,
        })
    }

    /// Builds a bank from raw (unnormalized) prompt embeddings.
    pub fn from_raw(class_names: Vec<String>, raw: Array2<f64>) -> Result<Self> {
        let mut rows = Array2::zeros(raw.raw_dim());
        for (i, row) in raw.axis_iter(Axis(0)).enumerate() {
            let unit = normalize(row)?;
            rows.row_mut(i).assign(&unit.view());
        }
        ClassTextBank::new(class_names, rows)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.class_embeddings.ncols()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        &self.class_embeddings
    }

    pub fn embedding(&self, class_id: usize) -> Result<ArrayView1<'_, f64>> {
        if class_id >= self.num_classes() {
            return Err(CoreError::LabelOutOfRange {
                label: class_id,
                classes: self.num_classes(),
            });
        }
        Ok(self.class_embeddings.row(class_id))
    }
}

/// Euclidean distance between the centroid of the image rows and the
/// centroid of the text rows.
pub fn modality_gap(image_set: &FeatureMatrix, text_set: &FeatureMatrix) -> Result<f64> {
    if image_set.dim() != text_set.dim() && !image_set.is_empty() && !text_set.is_empty() {
        return Err(CoreError::DimensionMismatch {
            expected: image_set.dim(),
            got: text_set.dim(),
        });
    }
    let ci = image_set.centroid()?;
    let ct = text_set.centroid()?;
    let diff = &ci - &ct;
    Ok(diff.dot(&diff).sqrt())
}

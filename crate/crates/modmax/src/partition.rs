//! Node-to-community labelings and their assignment-matrix views.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("partition has no nodes")]
    Empty,
    #[error("line {line}: expected a single integer label, got {token:?}")]
    BadLabel { line: usize, token: String },
}

/// A partition of nodes `0..n` into communities, stored as one label per node.
///
/// Labels are arbitrary `u32` values; [`Partition::normalized`] relabels them
/// densely to `0..k` in order of first appearance, which is the canonical form
/// used by assignment matrices and file output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<u32>,
}

impl Partition {
    pub fn from_labels(labels: Vec<u32>) -> Result<Self, PartitionError> {
        if labels.is_empty() {
            return Err(PartitionError::Empty);
        }
        Ok(Partition { labels })
    }

    /// Parses a ground-truth label file: one integer per line, line `i` is the
    /// label of node `i`. Blank lines and `#`/`%` comments are skipped.
    pub fn parse_labels(text: &str) -> Result<Self, PartitionError> {
        let mut labels = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let body = match line.find(['#', '%']) {
                Some(pos) => &line[..pos],
                None => line,
            };
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: u32 = trimmed.parse().map_err(|_| PartitionError::BadLabel {
                line: idx + 1,
                token: trimmed.to_string(),
            })?;
            labels.push(value);
        }
        Partition::from_labels(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, node: usize) -> u32 {
        self.labels[node]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of distinct communities.
    pub fn num_communities(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        self.labels.iter().filter(|&&l| seen.insert(l)).count()
    }

    /// Dense relabeling to `0..k` in order of first appearance.
    pub fn normalized(&self) -> Partition {
        let mut map = std::collections::HashMap::new();
        let mut next = 0u32;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                *map.entry(l).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect();
        Partition { labels }
    }

    /// Community sizes indexed by normalized label.
    pub fn community_sizes(&self) -> Vec<usize> {
        let norm = self.normalized();
        let k = norm.num_communities();
        let mut sizes = vec![0usize; k];
        for &l in &norm.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// The 0/1 assignment matrix: `n×k` with exactly one `1` per row.
    pub fn assignment_matrix(&self) -> DMatrix<f64> {
        let norm = self.normalized();
        let k = norm.num_communities();
        let mut x = DMatrix::zeros(self.len(), k);
        for (i, &l) in norm.labels.iter().enumerate() {
            x[(i, l as usize)] = 1.0;
        }
        x
    }

    /// Assignment matrix with columns scaled to unit 2-norm, so that the
    /// result has orthonormal columns: entry `1/√nᵢ` for community `i`.
    pub fn normalized_assignment_matrix(&self) -> DMatrix<f64> {
        let mut x = self.assignment_matrix();
        let sizes = self.community_sizes();
        for (j, &s) in sizes.iter().enumerate() {
            let scale = 1.0 / (s as f64).sqrt();
            for i in 0..x.nrows() {
                x[(i, j)] *= scale;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_by_first_appearance() {
        let p = Partition::from_labels(vec![7, 7, 3, 7, 3, 9]).unwrap();
        assert_eq!(p.num_communities(), 3);
        assert_eq!(p.normalized().labels(), &[0, 0, 1, 0, 1, 2]);
        assert_eq!(p.community_sizes(), vec![3, 2, 1]);
    }

    #[test]
    fn assignment_matrix_rows_sum_to_one() {
        let p = Partition::from_labels(vec![0, 1, 1, 0]).unwrap();
        let x = p.assignment_matrix();
        assert_eq!(x.nrows(), 4);
        assert_eq!(x.ncols(), 2);
        for i in 0..4 {
            assert_eq!(x.row(i).sum(), 1.0);
        }
        let xn = p.normalized_assignment_matrix();
        let gram = xn.transpose() * &xn;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn parses_label_files() {
        let p = Partition::parse_labels("0\n1 # comment\n\n1\n").unwrap();
        assert_eq!(p.labels(), &[0, 1, 1]);
        assert!(Partition::parse_labels("a\n").is_err());
        assert!(Partition::parse_labels("").is_err());
    }
}

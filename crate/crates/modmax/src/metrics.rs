//! Partition-quality measures: NMI and AMI.
//!
//! Both scores compare two labelings of the same node set through their
//! contingency table. With `n_uv` the number of nodes in community `u` of `X`
//! and `v` of `Y`, marginals `a_u`, `b_v` and `N` nodes total,
//!
//! ```text
//! NMI(X,Y) = 2·I(X,Y) / (H(X) + H(Y))
//! AMI(X,Y) = (I − E{I}) / (max{H(X), H(Y)} − E{I})
//! ```
//!
//! where `E{I}` is the expected mutual information under the hypergeometric
//! model of randomness (random labelings with the marginals fixed). `E{I}`
//! is an exact finite sum over `n_uv` from `max(1, a_u + b_v − N)` to
//! `min(a_u, b_v)`; each term is accumulated in log space through a cached
//! ln-factorial table, because the factorials overflow linear-space floats
//! long before `N` reaches the sizes used here. Natural logarithms are used
//! throughout; both scores are ratios, so the base cancels.

use thiserror::Error;

use crate::partition::Partition;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("partitions label {left} and {right} nodes; they must match")]
    NodeCountMismatch { left: usize, right: usize },
    #[error("{n} nodes exceeds the AMI cost guard of 10^6")]
    TooManyNodes { n: usize },
}

/// Joint community counts of two partitions over the same node set.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn from_partitions(x: &Partition, y: &Partition) -> Result<Self, MetricsError> {
        if x.len() != y.len() {
            return Err(MetricsError::NodeCountMismatch { left: x.len(), right: y.len() });
        }
        let xn = x.normalized();
        let yn = y.normalized();
        let r = xn.num_communities();
        let c = yn.num_communities();
        let mut counts = vec![vec![0u64; c]; r];
        for i in 0..x.len() {
            counts[xn.label(i) as usize][yn.label(i) as usize] += 1;
        }
        let row_sums: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
        let col_sums: Vec<u64> =
            (0..c).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
        Ok(ContingencyTable { counts, row_sums, col_sums, n: x.len() as u64 })
    }

    pub fn node_count(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    /// Entropy of the row marginal, natural log, `0·log 0 = 0`.
    pub fn row_entropy(&self) -> f64 {
        entropy(&self.row_sums, self.n)
    }

    pub fn col_entropy(&self) -> f64 {
        entropy(&self.col_sums, self.n)
    }

    /// Mutual information `I(X,Y) = Σ (n_uv/N)·ln(N·n_uv/(a_u·b_v))`.
    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut total = 0.0;
        for (u, row) in self.counts.iter().enumerate() {
            for (v, &cnt) in row.iter().enumerate() {
                if cnt == 0 {
                    continue;
                }
                let joint = cnt as f64 / n;
                let ratio =
                    n * cnt as f64 / (self.row_sums[u] as f64 * self.col_sums[v] as f64);
                total += joint * ratio.ln();
            }
        }
        total
    }

    /// Exact `E{I}` under the hypergeometric model.
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let lnf = LnFactorial::upto(n as usize);
        let mut total = 0.0;
        for &a in &self.row_sums {
            for &b in &self.col_sums {
                let lower = 1i64.max(a as i64 + b as i64 - n as i64) as u64;
                let upper = a.min(b);
                for nij in lower..=upper {
                    let term = (nij as f64 / nf)
                        * ((nf * nij as f64) / (a as f64 * b as f64)).ln();
                    // hypergeometric mass in log space; the last index is
                    // grouped as (n + nij) - a - b, which cannot underflow
                    let ln_p = lnf.get(a) + lnf.get(b) + lnf.get(n - a) + lnf.get(n - b)
                        - lnf.get(n)
                        - lnf.get(nij)
                        - lnf.get(a - nij)
                        - lnf.get(b - nij)
                        - lnf.get(n + nij - a - b);
                    total += term * ln_p.exp();
                }
            }
        }
        total
    }
}

fn entropy(sums: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    sums.iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    fn upto(n: usize) -> Self {
        let mut table = vec![0.0; n + 1];
        for k in 2..=n {
            table[k] = table[k - 1] + (k as f64).ln();
        }
        LnFactorial { table }
    }

    fn get(&self, k: u64) -> f64 {
        self.table[k as usize]
    }
}

/// Normalized mutual information, in `[0, 1]`.
///
/// When both partitions are the single-community partition their entropies
/// vanish and the partitions are identical, so the score is defined as 1.
pub fn nmi(x: &Partition, y: &Partition) -> Result<f64, MetricsError> {
    let table = ContingencyTable::from_partitions(x, y)?;
    let hx = table.row_entropy();
    let hy = table.col_entropy();
    if hx == 0.0 && hy == 0.0 {
        return Ok(1.0);
    }
    let value = 2.0 * table.mutual_information() / (hx + hy);
    // clamp off round-off excursions outside [0, 1]
    Ok(value.clamp(0.0, 1.0))
}

/// Adjusted mutual information under the hypergeometric chance model.
///
/// Equals 1 exactly when the partitions coincide up to relabeling; the
/// single-community degenerate pair also scores 1.
pub fn ami(x: &Partition, y: &Partition) -> Result<f64, MetricsError> {
    let table = ContingencyTable::from_partitions(x, y)?;
    if table.node_count() > 1_000_000 {
        return Err(MetricsError::TooManyNodes { n: table.node_count() as usize });
    }
    let hx = table.row_entropy();
    let hy = table.col_entropy();
    if hx == 0.0 && hy == 0.0 {
        return Ok(1.0);
    }
    let mi = table.mutual_information();
    let emi = table.expected_mutual_information();
    let denom = hx.max(hy) - emi;
    if denom.abs() <= 1e-15 {
        // marginals leave no room above chance; identical ⇒ 1, else 0
        return Ok(if (mi - emi).abs() <= 1e-12 { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn part(labels: &[u32]) -> Partition {
        Partition::from_labels(labels.to_vec()).unwrap()
    }

    #[test]
    fn identical_partitions_score_one() {
        let p = part(&[0, 0, 1, 1, 2, 2]);
        assert!((nmi(&p, &p).unwrap() - 1.0).abs() <= 1e-12);
        assert!((ami(&p, &p).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn orthogonal_partitions_have_zero_mi() {
        // N=4, X = {01|23}, Y = {02|13}: every cell count is 1
        let x = part(&[0, 0, 1, 1]);
        let y = part(&[0, 1, 0, 1]);
        let table = ContingencyTable::from_partitions(&x, &y).unwrap();
        assert!(table.mutual_information().abs() <= 1e-12);
        assert!(nmi(&x, &y).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn single_community_pair_scores_one() {
        let x = part(&[0, 0, 0]);
        let y = part(&[5, 5, 5]);
        assert_eq!(nmi(&x, &y).unwrap(), 1.0);
        assert_eq!(ami(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let x = part(&[0, 1]);
        let y = part(&[0, 1, 1]);
        assert!(matches!(nmi(&x, &y), Err(MetricsError::NodeCountMismatch { .. })));
        assert!(matches!(ami(&x, &y), Err(MetricsError::NodeCountMismatch { .. })));
    }

    #[test]
    fn symmetric_and_relabel_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(2..30);
            let labels_x: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let labels_y: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let x = part(&labels_x);
            let y = part(&labels_y);
            let nmi_xy = nmi(&x, &y).unwrap();
            let nmi_yx = nmi(&y, &x).unwrap();
            assert!((nmi_xy - nmi_yx).abs() <= 1e-12);
            let ami_xy = ami(&x, &y).unwrap();
            let ami_yx = ami(&y, &x).unwrap();
            assert!((ami_xy - ami_yx).abs() <= 1e-12);
            assert!(nmi_xy >= 0.0);
            assert!(ami_xy <= 1.0 + 1e-12);

            // relabeling communities changes nothing
            let relabeled: Vec<u32> = labels_x.iter().map(|&l| 17 + 3 * l).collect();
            let xr = part(&relabeled);
            assert!((nmi(&xr, &y).unwrap() - nmi_xy).abs() <= 1e-12);
            assert!((ami(&xr, &y).unwrap() - ami_xy).abs() <= 1e-12);
        }
    }

    #[test]
    fn ami_one_iff_identical_up_to_relabeling() {
        let x = part(&[0, 0, 1, 1, 2]);
        let same = part(&[7, 7, 3, 3, 9]);
        assert!((ami(&x, &same).unwrap() - 1.0).abs() <= 1e-12);
        let different = part(&[0, 0, 1, 2, 2]);
        assert!(ami(&x, &different).unwrap() < 1.0 - 1e-9);
    }

    #[test]
    fn expected_mi_matches_monte_carlo_on_small_tables() {
        // permutation-model oracle: shuffle one labeling, average I
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        for _ in 0..3 {
            let n = rng.random_range(4..=8usize);
            let labels_x: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let mut labels_y: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let x = part(&labels_x);
            let y = part(&labels_y);
            let table = ContingencyTable::from_partitions(&x, &y).unwrap();
            let exact = table.expected_mutual_information();

            let samples = 200_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..samples {
                // Fisher-Yates
                for i in (1..n).rev() {
                    let j = rng.random_range(0..=i);
                    labels_y.swap(i, j);
                }
                let yp = part(&labels_y);
                let mi = ContingencyTable::from_partitions(&x, &yp)
                    .unwrap()
                    .mutual_information();
                sum += mi;
                sumsq += mi * mi;
            }
            let mean = sum / samples as f64;
            let var = (sumsq / samples as f64 - mean * mean).max(0.0);
            let stderr = (var / samples as f64).sqrt();
            assert!(
                (exact - mean).abs() <= 3.0 * stderr + 1e-12,
                "exact {exact} vs MC {mean} ± {stderr}"
            );
        }
    }
}

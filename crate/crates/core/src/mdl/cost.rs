//! The encoding cost of a run of binary adjacency matrices under a shared
//! row/column co-clustering.
//!
//! A model is a pair of partitions: rows into k groups, columns into l
//! groups. Its description length is
//!
//! header = L*(k) + L*(l)
//!        + log2 C(n-1, k-1) + log2 C(n-1, l-1)
//!        + sum over blocks (p,q) and matrices of ceil(log2(N_pq + 1))
//! data   = sum over blocks (p,q) and matrices of N_pq * H(n1 / N_pq)
//!
//! where L* is the universal code length for positive integers, N_pq the
//! block size |rows_p| * |cols_q|, n1 the ones inside that block of that
//! matrix, and H the binary entropy in bits. Homogeneous-all-zero and
//! all-one blocks cost no data bits, which is exactly what the row/column
//! search exploits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowgraph::{GraphSeries, GraphSnapshot};

/// Universal code length for a positive integer: log2 x + log2 log2 x + ...
/// keeping only positive terms. L*(1) = 0.
pub fn universal_code_len(x: usize) -> f64 {
    let mut total = 0.0;
    let mut v = x as f64;
    loop {
        v = v.log2();
        if v <= 0.0 {
            break;
        }
        total += v;
    }
    total
}

/// Binary entropy in bits with H(0) = H(1) = 0.
pub fn binary_entropy(rho: f64) -> f64 {
    if rho <= 0.0 || rho >= 1.0 {
        return 0.0;
    }
    -rho * rho.log2() - (1.0 - rho) * (1.0 - rho).log2()
}

/// ceil(log2 x) computed on integers; 0 for x <= 1.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// log2 of the binomial coefficient C(n, k).
pub fn log2_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut total = 0.0;
    for i in 1..=k {
        total += ((n - k + i) as f64).log2() - (i as f64).log2();
    }
    total
}

/// Bits to encode `ones` of `size` cells at the block's empirical density.
pub fn block_data_bits(size: u64, ones: u64) -> f64 {
    if size == 0 {
        return 0.0;
    }
    size as f64 * binary_entropy(ones as f64 / size as f64)
}

/// A binary adjacency matrix in both row-major and column-major sparse form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub n: usize,
    /// Out-neighbors per row, sorted.
    pub rows: Vec<Vec<usize>>,
    /// In-neighbors per column, sorted.
    pub cols: Vec<Vec<usize>>,
}

impl Matrix {
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Self {
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); n];
        for (i, j) in edges {
            debug_assert!(i < n && j < n);
            rows[i].push(j);
            cols[j].push(i);
        }
        for r in &mut rows {
            r.sort_unstable();
        }
        for c in &mut cols {
            c.sort_unstable();
        }
        Matrix { n, rows, cols }
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

impl From<&GraphSnapshot> for Matrix {
    fn from(snap: &GraphSnapshot) -> Self {
        Matrix::from_edges(snap.n, snap.edges.iter().copied())
    }
}

/// Converts every snapshot of a series for the segmentation machinery.
pub fn matrices_of(series: &GraphSeries) -> Vec<Matrix> {
    series.snapshots.iter().map(Matrix::from).collect()
}

/// Row groups RG and column groups CG of one co-clustering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partitioning {
    /// Group of each row vertex, in 0..k.
    pub row_group: Vec<usize>,
    /// Group of each column vertex, in 0..l.
    pub col_group: Vec<usize>,
    pub k: usize,
    pub l: usize,
}

impl Partitioning {
    /// Everything in one row group and one column group.
    pub fn unit(n: usize) -> Self {
        Partitioning {
            row_group: vec![0; n],
            col_group: vec![0; n],
            k: 1,
            l: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.row_group.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.row_group.len() != n || self.col_group.len() != n {
            return Err(Error::Invariant(format!(
                "partitioning covers {} rows / {} cols, expected {n}",
                self.row_group.len(),
                self.col_group.len()
            )));
        }
        for (groups, count, what) in [
            (&self.row_group, self.k, "row"),
            (&self.col_group, self.l, "column"),
        ] {
            if count == 0 {
                return Err(Error::Invariant(format!("zero {what} groups")));
            }
            let mut seen = vec![false; count];
            for &g in groups.iter() {
                if g >= count {
                    return Err(Error::Invariant(format!(
                        "{what} group index {g} out of range 0..{count}"
                    )));
                }
                seen[g] = true;
            }
            if !seen.iter().all(|&s| s) {
                return Err(Error::Invariant(format!("empty {what} group")));
            }
        }
        Ok(())
    }

    pub fn row_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.k];
        for &g in &self.row_group {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn col_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.l];
        for &g in &self.col_group {
            sizes[g] += 1;
        }
        sizes
    }
}

/// Ones per (row group, column group) block of one matrix.
pub fn block_ones(matrix: &Matrix, p: &Partitioning) -> Vec<Vec<u64>> {
    let mut ones = vec![vec![0u64; p.l]; p.k];
    for (i, neighbors) in matrix.rows.iter().enumerate() {
        let rg = p.row_group[i];
        for &j in neighbors {
            ones[rg][p.col_group[j]] += 1;
        }
    }
    ones
}

/// Model header bits: group counts, group-size compositions, and one
/// ones-count field per block per matrix.
pub fn header_cost(n: usize, matrix_count: usize, p: &Partitioning) -> f64 {
    let row_sizes = p.row_sizes();
    let col_sizes = p.col_sizes();
    let mut per_matrix_block_bits = 0.0;
    for &sr in &row_sizes {
        for &sc in &col_sizes {
            per_matrix_block_bits += f64::from(ceil_log2(sr * sc + 1));
        }
    }
    universal_code_len(p.k)
        + universal_code_len(p.l)
        + log2_choose(n - 1, p.k - 1)
        + log2_choose(n - 1, p.l - 1)
        + matrix_count as f64 * per_matrix_block_bits
}

/// Data bits: per block, per matrix, block size times the binary entropy of
/// the block's density.
pub fn data_cost(matrices: &[Matrix], p: &Partitioning) -> f64 {
    let row_sizes = p.row_sizes();
    let col_sizes = p.col_sizes();
    let mut total = 0.0;
    for m in matrices {
        let ones = block_ones(m, p);
        for (rg, row) in ones.iter().enumerate() {
            for (cg, &n1) in row.iter().enumerate() {
                total += block_data_bits(row_sizes[rg] * col_sizes[cg], n1);
            }
        }
    }
    total
}

/// Total encoding cost (header + data) of a matrix run under a shared
/// partitioning.
pub fn block_encoding_cost(matrices: &[Matrix], p: &Partitioning) -> Result<f64> {
    let n = match matrices.first() {
        Some(m) => m.n,
        None => return Err(Error::Invariant("encoding cost of an empty matrix run".into())),
    };
    if matrices.iter().any(|m| m.n != n) {
        return Err(Error::Invariant("matrices in one run must share dimensions".into()));
    }
    p.validate(n)?;
    Ok(header_cost(n, matrices.len(), p) + data_cost(matrices, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> Matrix {
        Matrix::from_edges(2, [(0, 0), (1, 1)])
    }

    #[test]
    fn universal_code_values() {
        assert_eq!(universal_code_len(1), 0.0);
        assert_eq!(universal_code_len(2), 1.0);
        assert!(universal_code_len(3) > universal_code_len(2));
        assert!(universal_code_len(100) > universal_code_len(10));
    }

    #[test]
    fn entropy_endpoints_and_peak() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
        assert!(binary_entropy(0.1) < 1.0);
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
        assert_eq!(ceil_log2(17), 5);
    }

    #[test]
    fn log2_choose_small_values() {
        assert_eq!(log2_choose(1, 0), 0.0);
        assert_eq!(log2_choose(5, 5), 0.0);
        assert!((log2_choose(5, 1) - 5.0f64.log2()).abs() < 1e-12);
        assert!((log2_choose(4, 2) - 6.0f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn all_zero_and_all_one_cost_no_data_bits() {
        let zero = Matrix::from_edges(4, []);
        let one = Matrix::from_edges(
            4,
            (0..4).flat_map(|i| (0..4).map(move |j| (i, j))),
        );
        let p = Partitioning::unit(4);
        assert_eq!(data_cost(&[zero], &p), 0.0);
        assert_eq!(data_cost(&[one], &p), 0.0);
    }

    #[test]
    fn identity_matrix_unit_partition_data_is_four_bits() {
        // One 2x2 block holding two ones: 4 * H(0.5) = 4 bits of data and a
        // ceil(log2 5) = 3 bit ones-count field.
        let p = Partitioning::unit(2);
        let m = identity2();
        assert_eq!(data_cost(&[m.clone()], &p), 4.0);
        assert_eq!(header_cost(2, 1, &p), 3.0);
        assert_eq!(block_encoding_cost(&[m], &p).unwrap(), 7.0);
    }

    #[test]
    fn identity_matrix_diagonal_partition_data_is_zero() {
        let p = Partitioning {
            row_group: vec![0, 1],
            col_group: vec![0, 1],
            k: 2,
            l: 2,
        };
        let m = identity2();
        assert_eq!(data_cost(&[m.clone()], &p), 0.0);
        // L*(2) + L*(2) + log2 C(1,1) twice + four single-cell count fields.
        assert_eq!(header_cost(2, 1, &p), 6.0);
        assert_eq!(block_encoding_cost(&[m], &p).unwrap(), 6.0);
    }

    #[test]
    fn duplicating_a_matrix_doubles_data_and_adds_block_terms() {
        let m = Matrix::from_edges(4, [(0, 1), (1, 2), (2, 3), (1, 0), (3, 3)]);
        let p = Partitioning {
            row_group: vec![0, 0, 1, 1],
            col_group: vec![0, 1, 1, 0],
            k: 2,
            l: 2,
        };
        let single = block_encoding_cost(&[m.clone()], &p).unwrap();
        let double = block_encoding_cost(&[m.clone(), m.clone()], &p).unwrap();
        let data = data_cost(&[m.clone()], &p);
        let block_terms: f64 = {
            let rs = p.row_sizes();
            let cs = p.col_sizes();
            rs.iter()
                .flat_map(|&sr| cs.iter().map(move |&sc| f64::from(ceil_log2(sr * sc + 1))))
                .sum()
        };
        assert!((double - single - data - block_terms).abs() < 1e-9);
    }

    #[test]
    fn empty_group_is_invalid() {
        let p = Partitioning {
            row_group: vec![0, 0],
            col_group: vec![0, 0],
            k: 2,
            l: 1,
        };
        assert!(block_encoding_cost(&[identity2()], &p).is_err());
    }

    #[test]
    fn permuting_vertices_leaves_cost_unchanged() {
        let m = Matrix::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let p = Partitioning {
            row_group: vec![0, 1, 0, 1],
            col_group: vec![0, 0, 1, 1],
            k: 2,
            l: 2,
        };
        // Permutation sigma = [2, 0, 3, 1] applied to vertex labels.
        let sigma = [2usize, 0, 3, 1];
        let permuted = Matrix::from_edges(
            4,
            m.rows.iter().enumerate().flat_map(|(i, js)| {
                js.iter().map(move |&j| (sigma[i], sigma[j])).collect::<Vec<_>>()
            }),
        );
        let mut pg = Partitioning {
            row_group: vec![0; 4],
            col_group: vec![0; 4],
            k: 2,
            l: 2,
        };
        for v in 0..4 {
            pg.row_group[sigma[v]] = p.row_group[v];
            pg.col_group[sigma[v]] = p.col_group[v];
        }
        let a = block_encoding_cost(&[m], &p).unwrap();
        let b = block_encoding_cost(&[permuted], &pg).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

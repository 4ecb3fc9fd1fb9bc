//! Boundary matrices, Betti numbers and Euler characteristic, all over GF(2).

use std::collections::BTreeMap;
use std::fmt;

use super::{Gf2Matrix, Simplex, SimplexError, SimplicialComplex};

/// The boundary map from `k`-chains to `(k-1)`-chains.
///
/// Rows are the `(k-1)`-simplices and columns the `k`-simplices, both in
/// lexicographic vertex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    pub k: usize,
    pub rows: Vec<Simplex>,
    pub cols: Vec<Simplex>,
    pub matrix: Gf2Matrix,
}

impl BoundaryMatrix {
    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    pub fn get(&self, row: &Simplex, col: &Simplex) -> Option<bool> {
        let r = self.rows.binary_search(row).ok()?;
        let c = self.cols.binary_search(col).ok()?;
        Some(self.matrix.get(r, c))
    }
}

/// Builds ∂ₖ for `1 <= k <= dim`.
pub fn boundary_matrix(complex: &SimplicialComplex, k: usize) -> Result<BoundaryMatrix, SimplexError> {
    let max = complex.dimension();
    if k == 0 || k as isize > max {
        return Err(SimplexError::DimensionOutOfRange { k, max });
    }
    Ok(build_boundary(complex, k))
}

fn build_boundary(complex: &SimplicialComplex, k: usize) -> BoundaryMatrix {
    let rows: Vec<Simplex> = complex.simplices_of_dim(k - 1).cloned().collect();
    let cols: Vec<Simplex> = complex.simplices_of_dim(k).cloned().collect();
    let row_index: BTreeMap<&Simplex, usize> = rows.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut matrix = Gf2Matrix::zeros(rows.len(), cols.len());
    for (c, s) in cols.iter().enumerate() {
        for face in s.boundary_faces() {
            let r = *row_index
                .get(&face)
                .expect("complex is face-closed, every boundary face is a row");
            matrix.set(r, c, true);
        }
    }
    BoundaryMatrix { k, rows, cols, matrix }
}

/// β₀ … β_dim.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BettiVector(pub Vec<usize>);

impl BettiVector {
    pub fn get(&self, k: usize) -> usize {
        self.0.get(k).copied().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn alternating_sum(&self) -> i64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, b)| if k % 2 == 0 { *b as i64 } else { -(*b as i64) })
            .sum()
    }

    /// Semicolon-separated form used in CSV fields, e.g. `1;1;0`.
    pub fn to_field(&self) -> String {
        self.0.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";")
    }
}

impl fmt::Display for BettiVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

/// βₖ = #k-simplices − rank ∂ₖ − rank ∂ₖ₊₁.
pub fn betti_numbers(complex: &SimplicialComplex) -> BettiVector {
    let dim = complex.dimension();
    if dim < 0 {
        return BettiVector::default();
    }
    let dim = dim as usize;
    // ranks[k] = rank ∂ₖ, with ∂₀ = 0 and ∂_{dim+1} = 0
    let mut ranks = vec![0usize; dim + 2];
    for (k, rank) in ranks.iter_mut().enumerate().take(dim + 1).skip(1) {
        *rank = build_boundary(complex, k).rank();
    }
    BettiVector((0..=dim).map(|k| complex.count_of_dim(k) - ranks[k] - ranks[k + 1]).collect())
}

/// Σₖ (−1)ᵏ · #k-simplices.
pub fn euler_characteristic(complex: &SimplicialComplex) -> i64 {
    complex
        .iter()
        .map(|s| if s.dimension() % 2 == 0 { 1 } else { -1 })
        .sum()
}

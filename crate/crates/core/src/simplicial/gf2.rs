//! Dense GF(2) matrices stored column-major as packed bit words.

const WORD: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    /// `columns[c]` holds the bits of column `c`, row `r` at word `r / 64`.
    columns: Vec<Vec<u64>>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = rows.div_ceil(WORD);
        Self { rows, cols, columns: vec![vec![0; words]; cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        self.columns[c][r / WORD] >> (r % WORD) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        let bit = 1u64 << (r % WORD);
        if value {
            self.columns[c][r / WORD] |= bit;
        } else {
            self.columns[c][r / WORD] &= !bit;
        }
    }

    pub fn column_weight(&self, c: usize) -> usize {
        self.columns[c].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(|col| col.iter().all(|w| *w == 0))
    }

    /// Matrix product over GF(2). Panics on a shape mismatch.
    pub fn mul(&self, rhs: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch");
        let mut out = Gf2Matrix::zeros(self.rows, rhs.cols);
        for c in 0..rhs.cols {
            for k in 0..rhs.rows {
                if rhs.get(k, c) {
                    for (o, w) in out.columns[c].iter_mut().zip(&self.columns[k]) {
                        *o ^= *w;
                    }
                }
            }
        }
        out
    }

    /// Rank by column reduction. Each column is reduced against earlier
    /// pivots keyed by their first nonzero row until it is zero or owns a new
    /// pivot row.
    pub fn rank(&self) -> usize {
        let mut pivot_of_row: Vec<Option<Vec<u64>>> = vec![None; self.rows];
        let mut rank = 0;
        for col in &self.columns {
            let mut col = col.clone();
            while let Some(r) = first_set(&col) {
                match &pivot_of_row[r] {
                    Some(p) => {
                        for (a, b) in col.iter_mut().zip(p) {
                            *a ^= *b;
                        }
                    }
                    None => {
                        pivot_of_row[r] = Some(col);
                        rank += 1;
                        break;
                    }
                }
            }
        }
        rank
    }
}

fn first_set(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * WORD + w.trailing_zeros() as usize)
}

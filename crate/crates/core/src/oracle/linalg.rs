//! Small dense linear algebra for the constraint oracles.

/// Row-echelon basis of a growing set of augmented rows `[a | b]`.
pub(crate) struct RowSpace {
    width: usize,
    tol: f64,
    basis: Vec<(usize, Vec<f64>, f64)>,
}

impl RowSpace {
    pub fn new(width: usize, tol: f64) -> Self {
        RowSpace {
            width,
            tol,
            basis: Vec::new(),
        }
    }

    /// Adds `a · p = b`. Returns `Some(true)` if it raised the rank,
    /// `Some(false)` if implied by earlier rows, `None` if it contradicts them.
    pub fn insert(&mut self, a: &[f64], b: f64) -> Option<bool> {
        debug_assert_eq!(a.len(), self.width);
        let mut row = a.to_vec();
        let mut rhs = b;
        for (p, r, rb) in &self.basis {
            let f = row[*p];
            if f != 0.0 {
                row.iter_mut().zip(r).for_each(|(x, y)| *x -= f * y);
                rhs -= f * rb;
            }
        }
        let (pivot, max) = row
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if max <= self.tol {
            return if rhs.abs() <= self.tol { Some(false) } else { None };
        }
        let scale = row[pivot];
        row.iter_mut().for_each(|x| *x /= scale);
        self.basis.push((pivot, row, rhs / scale));
        Some(true)
    }
}

/// Solves the square system `a x = b` by partial pivoting; `None` if singular.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

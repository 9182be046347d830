//! Vertices of `{p >= 0 : A p = b}` by basic-solution enumeration.

use crate::error::{check_cap, Result};

use super::constraints::ComponentSystem;
use super::linalg::solve;

/// Entries above `-NONNEG_TOL` count as nonnegative.
pub const NONNEG_TOL: f64 = 1e-10;
/// Vertices closer than this in every coordinate are merged.
pub const DEDUP_TOL: f64 = 1e-9;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Vertices of the polytope of joint exogenous distributions allowed by one
/// component; empty when the component is infeasible.
pub fn vertices(sys: &ComponentSystem, cap: u64) -> Result<Vec<Vec<f64>>> {
    if !sys.consistent {
        return Ok(Vec::new());
    }
    let (a, b) = sys.independent_rows();
    polytope_vertices(&a, &b, cap)
}

/// Basic feasible solutions of `a p = b, p >= 0` for full-row-rank `a`.
pub fn polytope_vertices(a: &[Vec<f64>], b: &[f64], cap: u64) -> Result<Vec<Vec<f64>>> {
    let r = a.len();
    let k = a.first().map_or(0, Vec::len);
    if r > k {
        return Ok(Vec::new());
    }
    check_cap("basis candidates for vertex enumeration", binomial(k, r), cap)?;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut cols: Vec<usize> = (0..r).collect();
    loop {
        let sub: Vec<Vec<f64>> = a.iter().map(|row| cols.iter().map(|c| row[*c]).collect()).collect();
        if let Some(x) = solve(sub, b.to_vec()) {
            if x.iter().all(|v| *v >= -NONNEG_TOL) {
                let mut p = vec![0.0; k];
                for (c, v) in cols.iter().zip(&x) {
                    p[*c] = v.max(0.0);
                }
                if !out
                    .iter()
                    .any(|q| q.iter().zip(&p).all(|(s, t)| (s - t).abs() <= DEDUP_TOL))
                {
                    out.push(p);
                }
            }
        }
        // next combination in lexicographic order
        let Some(i) = (0..r).rev().find(|i| cols[*i] < k - r + i) else {
            break;
        };
        cols[i] += 1;
        for j in i + 1..r {
            cols[j] = cols[j - 1] + 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_vertices_are_unit_vectors() {
        let v = polytope_vertices(&[vec![1.0; 3]], &[1.0], 100).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.contains(&vec![0.0, 1.0, 0.0]));
    }

    #[test]
    fn square_face() {
        // p0 + p1 = 0.4 on the 4-simplex: a segment product with a segment
        let a = vec![vec![1.0; 4], vec![1.0, 1.0, 0.0, 0.0]];
        let v = polytope_vertices(&a, &[1.0, 0.4], 100).unwrap();
        assert_eq!(v.len(), 4);
        for p in &v {
            assert!((p[0] + p[1] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_when_infeasible_and_capped() {
        let a = vec![vec![1.0; 2], vec![1.0, 0.0]];
        assert!(polytope_vertices(&a, &[1.0, 1.5], 100).unwrap().is_empty());
        assert!(polytope_vertices(&[vec![1.0; 30]], &[1.0], 10).is_err());
    }
}

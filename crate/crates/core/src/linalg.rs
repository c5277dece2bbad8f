//! Small dense helpers for nonnegative and stochastic matrices.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

pub(crate) type Matrix = Vec<Vec<f64>>;

pub(crate) fn identity(d: usize) -> Matrix {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub(crate) fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; m]; n];
    for (i, row) in a.iter().enumerate() {
        for (k, &aik) in row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (j, &bkj) in b[k].iter().enumerate() {
                out[i][j] += aik * bkj;
            }
        }
    }
    out
}

/// Row vector times matrix.
pub(crate) fn vecmul(v: &[f64], a: &Matrix) -> Vec<f64> {
    let m = a.first().map_or(0, Vec::len);
    let mut out = vec![0.0; m];
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (j, &aij) in a[i].iter().enumerate() {
            out[j] += vi * aij;
        }
    }
    out
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Strongly connected components of the support graph of `a`, each sorted.
pub(crate) fn support_components(a: &Matrix) -> Vec<Vec<usize>> {
    let n = a.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    comps.sort();
    comps
}

/// Number of closed communicating classes of a stochastic matrix.
pub(crate) fn closed_class_count(a: &Matrix) -> usize {
    let comps = support_components(a);
    let mut owner = vec![0; a.len()];
    for (c, members) in comps.iter().enumerate() {
        for &i in members {
            owner[i] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&i| (0..a.len()).all(|j| a[i][j] == 0.0 || owner[j] == *c))
        })
        .count()
}

/// Perron root of a nonnegative matrix together with the final
/// Collatz-Wielandt gap.
///
/// The matrix is split into irreducible diagonal blocks; each block `B`
/// is iterated as `B + I`, which is primitive, so the Collatz-Wielandt
/// bounds close geometrically.
pub(crate) fn spectral_radius(a: &Matrix, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let mut rho: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for comp in support_components(a) {
        let k = comp.len();
        let block: Matrix = comp
            .iter()
            .map(|&i| comp.iter().map(|&j| a[i][j]).collect())
            .collect();
        if k == 1 && block[0][0] == 0.0 {
            continue;
        }
        let (r, gap) = block_perron_root(&block, tol, max_iter)?;
        rho = rho.max(r);
        worst_gap = worst_gap.max(gap);
    }
    Ok((rho, worst_gap))
}

fn block_perron_root(b: &Matrix, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let k = b.len();
    let mut v = vec![1.0 / k as f64; k];
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        // w = (B + I) v
        let mut w = v.clone();
        for i in 0..k {
            for j in 0..k {
                w[i] += b[i][j] * v[j];
            }
        }
        let (lo, hi) = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| wi / vi)
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        gap = hi - lo;
        let norm: f64 = w.iter().sum();
        v = w.into_iter().map(|x| x / norm).collect();
        if gap <= tol * hi.max(1.0) {
            return Ok((0.5 * (lo + hi) - 1.0, gap));
        }
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        residual: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perron_root_of_jordan_like_block_converges() {
        // Upper triangular with equal diagonal: plain power iteration
        // would crawl, the component split does not.
        let a = vec![vec![1.0, 1.0], vec![0.0, 1.0]];
        let (rho, _) = spectral_radius(&a, 1e-12, 100_000).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perron_root_of_periodic_matrix() {
        let a = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        let (rho, _) = spectral_radius(&a, 1e-12, 100_000).unwrap();
        assert!((rho - 2.0).abs() < 1e-10);
    }

    #[test]
    fn closed_classes_of_identity() {
        assert_eq!(closed_class_count(&identity(3)), 3);
        let q = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        assert_eq!(closed_class_count(&q), 1);
    }
}

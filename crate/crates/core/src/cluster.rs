//! Kernel heatmaps and two-class spectral clustering of trajectories.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const ZERO_COMPONENT: f64 = 1e-12;

/// Affine rescale of all entries to `[0, 1]`; a constant matrix maps to 0.5.
pub fn kernel_heatmap_normalize(g: &DMatrix<f64>) -> DMatrix<f64> {
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    if !(hi > lo) {
        return DMatrix::from_element(g.nrows(), g.ncols(), 0.5);
    }
    let span = hi - lo;
    g.map(|x| (x - lo) / span)
}

fn check_symmetric(g: &DMatrix<f64>) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            found: g.ncols(),
        });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in i + 1..g.ncols() {
            worst = worst.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    if worst > 1e-12 * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

/// Connected components of the graph with edges where `a_ij > 0`, restricted to `nodes`.
fn components(a: &DMatrix<f64>, nodes: &[usize]) -> Vec<usize> {
    let mut comp = vec![usize::MAX; a.nrows()];
    let mut next = 0;
    for &start in nodes {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(i) = stack.pop() {
            for &j in nodes {
                if comp[j] == usize::MAX && a[(i, j)] > 0.0 {
                    comp[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Two-class partition of a symmetric kernel matrix.
///
/// The affinity is the heatmap-normalized matrix. Rows with zero degree, if
/// any, form class 1 and all other rows class 0. If the graph is disconnected, the
/// component of its first node is class 0 and everything else class 1.
/// Otherwise the sign pattern of the Fiedler vector of the symmetric
/// normalized Laplacian splits the nodes. Labels are canonicalized so that
/// frame 0 has label 0.
pub fn spectral_bipartition(g: &DMatrix<f64>) -> Result<Vec<u8>> {
    check_symmetric(g)?;
    let t = g.nrows();
    if t < 2 {
        return Err(Error::InvalidParameter(
            "spectral clustering needs at least two frames".into(),
        ));
    }
    let a = kernel_heatmap_normalize(g);
    let degree: Vec<f64> = (0..t).map(|i| a.row(i).sum()).collect();
    let active: Vec<usize> = (0..t).filter(|&i| degree[i] > 0.0).collect();
    let mut labels = vec![1u8; t];
    if active.len() < t {
        for &i in &active {
            labels[i] = 0;
        }
        if labels[0] == 1 {
            labels.iter_mut().for_each(|l| *l = 1 - *l);
        }
        return Ok(labels);
    }
    let comp = components(&a, &active);
    let first = comp[active[0]];
    if active.iter().any(|&i| comp[i] != first) {
        for &i in &active {
            labels[i] = u8::from(comp[i] != first);
        }
    } else {
        let m = active.len();
        let inv_sqrt: Vec<f64> = active.iter().map(|&i| 1.0 / degree[i].sqrt()).collect();
        let lap = DMatrix::from_fn(m, m, |p, q| {
            let off = a[(active[p], active[q])] * inv_sqrt[p] * inv_sqrt[q];
            if p == q {
                1.0 - off
            } else {
                -off
            }
        });
        let eig = SymmetricEigen::new(lap);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let v = eig.eigenvectors.column(order[1]);
        let reference = v.iter().find(|x| x.abs() >= ZERO_COMPONENT).map_or(1.0, |x| x.signum());
        for (p, &i) in active.iter().enumerate() {
            labels[i] = u8::from(v[p].abs() >= ZERO_COMPONENT && v[p].signum() != reference);
        }
    }
    if labels[0] == 1 {
        labels.iter_mut().for_each(|l| *l = 1 - *l);
    }
    Ok(labels)
}

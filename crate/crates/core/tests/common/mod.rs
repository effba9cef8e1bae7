//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use macproj::{MacGrid, OperatorWorkspace, VelocityField};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sprs::CsMat;

pub fn to_dense(a: &CsMat<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.rows(), a.cols());
    for (v, (i, j)) in a.iter() {
        d[(i, j)] += *v;
    }
    d
}

pub fn interior_faces(grid: &MacGrid) -> Vec<usize> {
    (0..grid.num_faces()).filter(|&f| grid.is_interior_face(f)).collect()
}

/// Euclidean-orthonormal basis of the discretely divergence-free fields,
/// restricted to interior faces, from the eigenvectors of `BᵀB` with zero
/// eigenvalue (`B` = divergence on interior faces).
pub fn divergence_free_basis(grid: &MacGrid, ops: &OperatorWorkspace) -> DMatrix<f64> {
    let interior = interior_faces(grid);
    let div = to_dense(&ops.div);
    let b = DMatrix::from_fn(div.nrows(), interior.len(), |i, j| div[(i, interior[j])] * grid.cell_volumes()[i]);
    let eig = SymmetricEigen::new(b.transpose() * &b);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l.abs() <= 1e-12 * top)
        .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// `sup { ∫ w·v : v ∈ E_N, ‖v‖ = 1 }` from an explicit basis.
pub fn star0_dense(grid: &MacGrid, basis: &DMatrix<f64>, w: &VelocityField) -> f64 {
    let interior = interior_faces(grid);
    let m = DMatrix::from_diagonal(&DVector::from_iterator(interior.len(), interior.iter().map(|&f| grid.dual_volume(f))));
    let wv = DVector::from_iterator(interior.len(), interior.iter().map(|&f| w.values[f]));
    let gram = basis.transpose() * &m * basis;
    let c = basis.transpose() * &m * wv;
    let y = gram.cholesky().expect("Gram matrix is SPD").solve(&c);
    c.dot(&y).max(0.0).sqrt()
}

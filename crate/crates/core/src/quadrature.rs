//! Tensor-product Gauss–Legendre quadrature on axis-aligned boxes.

/// Three-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Mean value of `f` over the box `[lo, hi]`.
///
/// Axes with `lo == hi` are treated as degenerate (the box is a face), so the
/// same routine averages over cells, faces and dual cells. Exact for
/// polynomials of degree ≤ 5 in each variable.
pub fn box_mean<const M: usize, F>(lo: [f64; 3], hi: [f64; 3], active: usize, f: F) -> [f64; M]
where
    F: Fn([f64; 3]) -> [f64; M],
{
    let mut axes: [(&[f64], &[f64]); 3] = [(&[0.0], &[2.0]); 3];
    for a in 0..active.min(3) {
        if hi[a] > lo[a] {
            axes[a] = (&NODES, &WEIGHTS);
        }
    }
    let mut acc = [0.0; M];
    for (xk, wk) in axes[2].0.iter().zip(axes[2].1) {
        for (xj, wj) in axes[1].0.iter().zip(axes[1].1) {
            for (xi, wi) in axes[0].0.iter().zip(axes[0].1) {
                let r = [*xi, *xj, *xk];
                let mut x = [0.0; 3];
                for a in 0..3 {
                    x[a] = 0.5 * (lo[a] + hi[a]) + 0.5 * (hi[a] - lo[a]) * r[a];
                }
                let w = wi * wj * wk / 8.0;
                let v = f(x);
                for c in 0..M {
                    acc[c] += w * v[c];
                }
            }
        }
    }
    acc
}

//! Discrete vector calculus on a MAC grid.
//!
//! All operators are preassembled as sparse matrices acting on the global
//! face/cell orderings of [`MacGrid`]. Velocity-valued operators come in an
//! *integrated* form (rows scaled by `|D_σ|`) so that the mass matrix is
//! diagonal and the viscous and pressure blocks are symmetric.
//!
//! Structural identities that the rest of the crate relies on:
//!
//! * `∫ ∇_N p · v + ∫ p div_N v = 0` for every `p` and every `v` with zero
//!   exterior values;
//! * `∫ (−Δ_N u) · u = ‖u‖²_{1,2,N}`;
//! * `b_N(a, w, w) = 0` whenever `div_N a = 0` (centered convection only).

use sprs::{CsMat, TriMat};

use crate::field::{PressureField, VelocityField};
use crate::grid::MacGrid;
use crate::linalg::matvec;

/// How the convected value on a dual face is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionScheme {
    /// Two-point average; skew-symmetric for discretely divergence-free fields.
    #[default]
    Centered,
    /// First-order upwind. Not energy-neutral; kept as a negative control for
    /// the property checks.
    Upwind,
}

#[derive(Debug, Clone)]
pub struct OperatorWorkspace {
    /// `(∇_N p)_σ = (p_L − p_K) / d_σ`, faces × cells.
    pub grad: CsMat<f64>,
    /// `(div_N u)_K = (1/|K|) Σ_σ ±|σ| u_σ`, cells × faces.
    pub div: CsMat<f64>,
    /// Integrated `−Δ_N`: `(S u)_σ = |D_σ| (−Δ_N u)_σ`, faces × faces.
    pub stiffness: CsMat<f64>,
    /// Integrated `−div_N ∇_N`, cells × cells. Symmetric positive
    /// semidefinite with the constants as kernel.
    pub poisson: CsMat<f64>,
    /// `|D_σ|`.
    pub mass: Vec<f64>,
    /// `|K|`.
    pub cell_volume: Vec<f64>,
    interior: Vec<bool>,
}

impl OperatorWorkspace {
    pub fn new(grid: &MacGrid) -> Self {
        let nf = grid.num_faces();
        let nc = grid.num_cells();
        let interior: Vec<bool> = (0..nf).map(|f| grid.is_interior_face(f)).collect();

        let mut grad = TriMat::new((nf, nc));
        let mut div = TriMat::new((nc, nf));
        let mut poisson = TriMat::new((nc, nc));
        for f in 0..nf {
            let [lo, hi] = grid.face_cells(f);
            let area = grid.face_area(f);
            if let Some(k) = lo {
                div.add_triplet(k, f, area / grid.cell_volumes()[k]);
            }
            if let Some(l) = hi {
                div.add_triplet(l, f, -area / grid.cell_volumes()[l]);
            }
            if let (Some(k), Some(l)) = (lo, hi) {
                let d = grid.dual_volume(f) / area;
                grad.add_triplet(f, k, -1.0 / d);
                grad.add_triplet(f, l, 1.0 / d);
                let c = area / d;
                poisson.add_triplet(k, k, c);
                poisson.add_triplet(l, l, c);
                poisson.add_triplet(k, l, -c);
                poisson.add_triplet(l, k, -c);
            }
        }

        let mut stiff = TriMat::new((nf, nf));
        for set in grid.face_sets() {
            for e in &set.dual_faces {
                let c = e.area / e.dist;
                let l = e.lower;
                match e.upper {
                    None => {
                        if interior[l] {
                            stiff.add_triplet(l, l, c);
                        }
                    }
                    Some(u) => {
                        if interior[l] {
                            stiff.add_triplet(l, l, c);
                            if interior[u] {
                                stiff.add_triplet(l, u, -c);
                            }
                        }
                        if interior[u] {
                            stiff.add_triplet(u, u, c);
                            if interior[l] {
                                stiff.add_triplet(u, l, -c);
                            }
                        }
                    }
                }
            }
        }

        Self {
            grad: grad.to_csr(),
            div: div.to_csr(),
            stiffness: stiff.to_csr(),
            poisson: poisson.to_csr(),
            mass: grid.dual_volumes(),
            cell_volume: grid.cell_volumes().to_vec(),
            interior,
        }
    }

    pub fn is_interior(&self, face: usize) -> bool {
        self.interior[face]
    }

    pub fn grad(&self, p: &PressureField) -> VelocityField {
        VelocityField { values: matvec(&self.grad, &p.values) }
    }

    pub fn div(&self, u: &VelocityField) -> PressureField {
        PressureField { values: matvec(&self.div, &u.values) }
    }

    /// `−Δ_N u`.
    pub fn neg_laplace(&self, u: &VelocityField) -> VelocityField {
        let mut v = matvec(&self.stiffness, &u.values);
        v.iter_mut().zip(&self.mass).for_each(|(x, m)| *x /= m);
        VelocityField { values: v }
    }

    /// `Δ_N u`.
    pub fn laplace(&self, u: &VelocityField) -> VelocityField {
        self.neg_laplace(u).scaled(-1.0)
    }

    /// Integrated convection matrix `w ↦ |D_σ| C_N(a) w` for advecting field `a`.
    pub fn convection_matrix(&self, grid: &MacGrid, a: &VelocityField, scheme: ConvectionScheme) -> CsMat<f64> {
        let nf = grid.num_faces();
        let mut tri = TriMat::with_capacity((nf, nf), 4 * nf * grid.dim());
        for set in grid.face_sets() {
            for e in &set.dual_faces {
                let Some(u) = e.upper else { continue };
                let l = e.lower;
                let flux = e.flux[0].1 * a.values[e.flux[0].0] + e.flux[1].1 * a.values[e.flux[1].0];
                if flux == 0.0 {
                    continue;
                }
                let (li, ui) = (self.interior[l], self.interior[u]);
                match scheme {
                    ConvectionScheme::Centered => {
                        let h = 0.5 * flux;
                        if li {
                            tri.add_triplet(l, l, h);
                            if ui {
                                tri.add_triplet(l, u, h);
                            }
                        }
                        if ui {
                            tri.add_triplet(u, u, -h);
                            if li {
                                tri.add_triplet(u, l, -h);
                            }
                        }
                    }
                    ConvectionScheme::Upwind => {
                        let donor = if flux > 0.0 { l } else { u };
                        if self.interior[donor] {
                            if li {
                                tri.add_triplet(l, donor, flux);
                            }
                            if ui {
                                tri.add_triplet(u, donor, -flux);
                            }
                        }
                    }
                }
            }
        }
        tri.to_csr()
    }

    /// `C_N(a) w`: convection of `w` by the mass fluxes of `a`.
    pub fn convect(&self, grid: &MacGrid, a: &VelocityField, w: &VelocityField, scheme: ConvectionScheme) -> VelocityField {
        let m = self.convection_matrix(grid, a, scheme);
        let mut v = matvec(&m, &w.values);
        v.iter_mut().zip(&self.mass).for_each(|(x, m)| *x /= m);
        VelocityField { values: v }
    }

    /// Trilinear form `b_N(a, w, v) = ∫ C_N(a) w · v`.
    pub fn trilinear(&self, grid: &MacGrid, a: &VelocityField, w: &VelocityField, v: &VelocityField) -> f64 {
        let m = self.convection_matrix(grid, a, ConvectionScheme::Centered);
        matvec(&m, &w.values).iter().zip(&v.values).map(|(x, y)| x * y).sum()
    }
}

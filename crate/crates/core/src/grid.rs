//! Staggered (MAC) rectangular grids.
//!
//! A [`MacGrid`] stores a primal mesh of rectangular cells together with one
//! dual mesh per spatial direction. The `i`-th velocity component lives on the
//! faces orthogonal to `e_i`; each such face `σ` owns a dual cell `D_σ` that
//! extends from the center of one adjacent cell to the center of the other
//! (or to the boundary for faces lying on `∂Ω`).
//!
//! Faces are indexed lexicographically: first by normal direction, then by
//! grid position with the x index varying fastest.

use crate::error::{Error, Result};

/// Upper bound on spatial dimension; 2D grids carry a unit-extent third axis.
pub const MAX_DIM: usize = 3;

/// A face of a dual cell.
///
/// Each dual face separates `lower` from `upper` along `normal`. Boundary dual
/// faces lie on `∂Ω` and have no `upper` neighbor; `dist` is then the distance
/// from the dual-cell center to the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFace {
    pub normal: usize,
    pub lower: usize,
    pub upper: Option<usize>,
    pub area: f64,
    pub dist: f64,
    /// Primal faces (global index, weight) whose weighted sum gives the mass
    /// flux through this dual face in the `+normal` direction.
    pub flux: [(usize, f64); 2],
}

impl DualFace {
    pub fn is_boundary(&self) -> bool {
        self.upper.is_none()
    }
}

/// Per-direction face data.
#[derive(Debug, Clone)]
pub struct FaceSet {
    /// Number of faces along each axis.
    pub shape: [usize; MAX_DIM],
    /// Global index of the first face of this direction.
    pub offset: usize,
    pub area: Vec<f64>,
    pub dual_volume: Vec<f64>,
    /// Cells on the lower and upper side along the normal; `None` outside Ω.
    pub cells: Vec<[Option<usize>; 2]>,
    pub dual_faces: Vec<DualFace>,
}

impl FaceSet {
    pub fn len(&self) -> usize {
        self.area.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area.is_empty()
    }

    pub fn is_interior(&self, local: usize) -> bool {
        let [a, b] = self.cells[local];
        a.is_some() && b.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct MacGrid {
    dim: usize,
    nodes: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
    widths: Vec<Vec<f64>>,
    n: [usize; MAX_DIM],
    cell_volume: Vec<f64>,
    faces: Vec<FaceSet>,
    face_dir: Vec<usize>,
    h: f64,
    theta: f64,
}

impl MacGrid {
    /// Builds a grid from per-axis node coordinates.
    ///
    /// The first and last entries of each axis are the domain boundaries.
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        let dim = axes.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        for (axis, coords) in axes.iter().enumerate() {
            if coords.len() < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs at least 3 coordinates, got {}",
                    coords.len()
                )));
            }
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {axis} has non-finite coordinates")));
            }
            if let Some(k) = coords.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} is not strictly increasing at position {}",
                    k + 1
                )));
            }
        }

        let mut nodes = axes;
        if dim == 2 {
            nodes.push(vec![0.0, 1.0]);
        }
        let widths: Vec<Vec<f64>> = nodes
            .iter()
            .map(|c| c.windows(2).map(|w| w[1] - w[0]).collect())
            .collect();
        let centers: Vec<Vec<f64>> = nodes
            .iter()
            .map(|c| c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
            .collect();
        let n = [widths[0].len(), widths[1].len(), widths[2].len()];

        let mut cell_volume = Vec::with_capacity(n[0] * n[1] * n[2]);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    cell_volume.push(widths[0][i] * widths[1][j] * widths[2][k]);
                }
            }
        }

        let mut grid = MacGrid {
            dim,
            nodes,
            centers,
            widths,
            n,
            cell_volume,
            faces: Vec::with_capacity(dim),
            face_dir: Vec::new(),
            h: 0.0,
            theta: 0.0,
        };

        let mut offset = 0;
        for dir in 0..dim {
            let set = grid.build_face_set(dir, offset);
            offset += set.len();
            grid.face_dir.extend(std::iter::repeat_n(dir, set.len()));
            grid.faces.push(set);
        }
        for dir in 0..dim {
            grid.faces[dir].dual_faces = grid.build_dual_faces(dir);
        }

        grid.h = (0..n[2])
            .flat_map(|k| (0..n[1]).flat_map(move |j| (0..n[0]).map(move |i| [i, j, k])))
            .map(|c| {
                (0..dim)
                    .map(|a| grid.widths[a][c[a]].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        grid.theta = grid.compute_theta();
        Ok(grid)
    }

    /// Uniform grid with `cells[a]` cells along axis `a` of `[0, extent[a]]`.
    pub fn uniform(extent: &[f64], cells: &[usize]) -> Result<Self> {
        if extent.len() != cells.len() {
            return Err(Error::InvalidGrid("extent and cell counts differ in length".into()));
        }
        let axes = extent
            .iter()
            .zip(cells)
            .map(|(&l, &m)| (0..=m).map(|k| l * k as f64 / m as f64).collect())
            .collect();
        Self::new(axes)
    }

    /// Unit square or cube with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::uniform(&vec![1.0; dim], &vec![n; dim])
    }

    /// Geometrically graded grid: consecutive widths along each axis grow by
    /// `ratio[a]`.
    pub fn graded(extent: &[f64], cells: &[usize], ratio: &[f64]) -> Result<Self> {
        if extent.len() != cells.len() || ratio.len() != cells.len() {
            return Err(Error::InvalidGrid("extent, cells and ratio differ in length".into()));
        }
        let mut axes = Vec::with_capacity(cells.len());
        for a in 0..cells.len() {
            if !(ratio[a] > 0.0) {
                return Err(Error::InvalidGrid(format!("stretch ratio on axis {a} must be positive")));
            }
            let w: Vec<f64> = (0..cells[a]).map(|k| ratio[a].powi(k as i32)).collect();
            let total: f64 = w.iter().sum();
            let mut coords = vec![0.0];
            let mut acc = 0.0;
            for wk in &w[..w.len().saturating_sub(1)] {
                acc += wk;
                coords.push(extent[a] * acc / total);
            }
            coords.push(extent[a]);
            axes.push(coords);
        }
        Self::new(axes)
    }

    fn build_face_set(&self, dir: usize, offset: usize) -> FaceSet {
        let mut shape = self.n;
        shape[dir] += 1;
        let count = shape.iter().product();
        let mut area = Vec::with_capacity(count);
        let mut dual_volume = Vec::with_capacity(count);
        let mut cells = Vec::with_capacity(count);
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let idx = [i, j, k];
                    let a = self.area_at(dir, idx);
                    area.push(a);
                    dual_volume.push(a * self.dual_length(dir, idx[dir]));
                    let m = idx[dir];
                    let lower = (m > 0).then(|| {
                        let mut c = idx;
                        c[dir] = m - 1;
                        self.cell_index(c)
                    });
                    let upper = (m < self.n[dir]).then(|| self.cell_index(idx));
                    cells.push([lower, upper]);
                }
            }
        }
        FaceSet { shape, offset, area, dual_volume, cells, dual_faces: Vec::new() }
    }

    /// Extent of dual cells of direction `dir` along `dir`, for face position `m`.
    fn dual_length(&self, dir: usize, m: usize) -> f64 {
        let c = &self.centers[dir];
        let x = &self.nodes[dir];
        if m == 0 {
            c[0] - x[0]
        } else if m == self.n[dir] {
            x[m] - c[m - 1]
        } else {
            c[m] - c[m - 1]
        }
    }

    fn area_at(&self, dir: usize, idx: [usize; 3]) -> f64 {
        (0..MAX_DIM)
            .filter(|&a| a != dir)
            .map(|a| self.widths[a][idx[a]])
            .product()
    }

    fn build_dual_faces(&self, dir: usize) -> Vec<DualFace> {
        let set = &self.faces[dir];
        let shape = set.shape;
        let mut out = Vec::new();
        for normal in 0..self.dim {
            for k in 0..shape[2] {
                for j in 0..shape[1] {
                    for i in 0..shape[0] {
                        let idx = [i, j, k];
                        let here = set.offset + local_index(shape, idx);
                        if normal == dir {
                            // Dual face at the center of the cell between this
                            // face and the next one along `dir`.
                            if idx[dir] == self.n[dir] {
                                continue;
                            }
                            let mut nb = idx;
                            nb[dir] += 1;
                            let next = set.offset + local_index(shape, nb);
                            let a = set.area[here - set.offset];
                            out.push(DualFace {
                                normal,
                                lower: here,
                                upper: Some(next),
                                area: a,
                                dist: self.widths[dir][idx[dir]],
                                flux: [(here, 0.5 * a), (next, 0.5 * a)],
                            });
                        } else {
                            let m = idx[normal];
                            let area = self.dual_length(dir, idx[dir])
                                * (0..MAX_DIM)
                                    .filter(|&a| a != dir && a != normal)
                                    .map(|a| self.widths[a][idx[a]])
                                    .product::<f64>();
                            if m == 0 {
                                out.push(self.boundary_dual_face(dir, normal, idx, here, area, true));
                            }
                            if m + 1 < self.n[normal] {
                                let mut nb = idx;
                                nb[normal] += 1;
                                let next = set.offset + local_index(shape, nb);
                                let flux = self.dual_flux(dir, normal, idx, m + 1);
                                out.push(DualFace {
                                    normal,
                                    lower: here,
                                    upper: Some(next),
                                    area,
                                    dist: self.centers[normal][m + 1] - self.centers[normal][m],
                                    flux,
                                });
                            } else {
                                out.push(self.boundary_dual_face(dir, normal, idx, here, area, false));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn boundary_dual_face(
        &self,
        dir: usize,
        normal: usize,
        idx: [usize; 3],
        here: usize,
        area: f64,
        at_lower_wall: bool,
    ) -> DualFace {
        let m = idx[normal];
        let (dist, node) = if at_lower_wall {
            (self.centers[normal][m] - self.nodes[normal][0], 0)
        } else {
            (self.nodes[normal][m + 1] - self.centers[normal][m], m + 1)
        };
        let flux = self.dual_flux(dir, normal, idx, node);
        DualFace { normal, lower: here, upper: None, area, dist, flux }
    }

    /// Mass-flux stencil through the dual face of `D_σ` (σ of direction `dir`
    /// at `idx`) lying on the primal node plane `node` orthogonal to `normal`:
    /// half the flux through each of the two primal `normal`-faces it crosses.
    fn dual_flux(&self, dir: usize, normal: usize, idx: [usize; 3], node: usize) -> [(usize, f64); 2] {
        let tset = &self.faces[normal];
        let m = idx[dir];
        let pick = |cell_pos: usize| -> (usize, f64) {
            let mut t = idx;
            t[dir] = cell_pos;
            t[normal] = node;
            let local = local_index(tset.shape, t);
            (tset.offset + local, 0.5 * tset.area[local])
        };
        let lo = if m > 0 { m - 1 } else { 0 };
        let hi = if m < self.n[dir] { m } else { self.n[dir] - 1 };
        [pick(lo), pick(hi)]
    }

    fn compute_theta(&self) -> f64 {
        let (mut mins, mut maxs) = (vec![f64::INFINITY; self.dim], vec![0.0f64; self.dim]);
        for (d, set) in self.faces.iter().enumerate() {
            for &a in &set.area {
                mins[d] = mins[d].min(a);
                maxs[d] = maxs[d].max(a);
            }
        }
        let mut theta = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    theta = theta.max(maxs[i] / mins[j]);
                }
            }
        }
        theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis (the third entry is 1 in 2D).
    pub fn cells_per_axis(&self) -> [usize; MAX_DIM] {
        self.n
    }

    pub fn num_cells(&self) -> usize {
        self.cell_volume.len()
    }

    pub fn num_faces(&self) -> usize {
        self.face_dir.len()
    }

    pub fn nodes(&self, axis: usize) -> &[f64] {
        &self.nodes[axis]
    }

    pub fn centers(&self, axis: usize) -> &[f64] {
        &self.centers[axis]
    }

    pub fn widths(&self, axis: usize) -> &[f64] {
        &self.widths[axis]
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volume
    }

    pub fn face_set(&self, dir: usize) -> &FaceSet {
        &self.faces[dir]
    }

    pub fn face_sets(&self) -> &[FaceSet] {
        &self.faces
    }

    /// Normal direction of a global face index.
    pub fn face_direction(&self, face: usize) -> usize {
        self.face_dir[face]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let set = &self.faces[self.face_dir[face]];
        set.area[face - set.offset]
    }

    pub fn dual_volume(&self, face: usize) -> f64 {
        let set = &self.faces[self.face_dir[face]];
        set.dual_volume[face - set.offset]
    }

    pub fn face_cells(&self, face: usize) -> [Option<usize>; 2] {
        let set = &self.faces[self.face_dir[face]];
        set.cells[face - set.offset]
    }

    pub fn is_interior_face(&self, face: usize) -> bool {
        let [a, b] = self.face_cells(face);
        a.is_some() && b.is_some()
    }

    /// All dual volumes, in global face order.
    pub fn dual_volumes(&self) -> Vec<f64> {
        self.faces.iter().flat_map(|s| s.dual_volume.iter().copied()).collect()
    }

    pub fn cell_index(&self, idx: [usize; 3]) -> usize {
        local_index(self.n, idx)
    }

    pub fn cell_position(&self, cell: usize) -> [usize; 3] {
        position(self.n, cell)
    }

    /// Grid position of a global face index.
    pub fn face_position(&self, face: usize) -> [usize; 3] {
        let set = &self.faces[self.face_dir[face]];
        position(set.shape, face - set.offset)
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 3] {
        let p = self.cell_position(cell);
        [self.centers[0][p[0]], self.centers[1][p[1]], self.centers[2][p[2]]]
    }

    pub fn face_center(&self, face: usize) -> [f64; 3] {
        let dir = self.face_dir[face];
        let p = self.face_position(face);
        let mut x = [0.0; 3];
        for a in 0..MAX_DIM {
            x[a] = if a == dir { self.nodes[a][p[a]] } else { self.centers[a][p[a]] };
        }
        x
    }

    /// Axis-aligned box `[lo, hi]` covered by a primal cell.
    pub fn cell_box(&self, cell: usize) -> ([f64; 3], [f64; 3]) {
        let p = self.cell_position(cell);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..MAX_DIM {
            lo[a] = self.nodes[a][p[a]];
            hi[a] = self.nodes[a][p[a] + 1];
        }
        (lo, hi)
    }

    /// Face `σ` as a degenerate box (zero extent along its normal).
    pub fn face_box(&self, face: usize) -> ([f64; 3], [f64; 3]) {
        let dir = self.face_dir[face];
        let p = self.face_position(face);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..MAX_DIM {
            if a == dir {
                lo[a] = self.nodes[a][p[a]];
                hi[a] = lo[a];
            } else {
                lo[a] = self.nodes[a][p[a]];
                hi[a] = self.nodes[a][p[a] + 1];
            }
        }
        (lo, hi)
    }

    /// Dual cell `D_σ` as a box.
    pub fn dual_box(&self, face: usize) -> ([f64; 3], [f64; 3]) {
        let dir = self.face_dir[face];
        let p = self.face_position(face);
        let (mut lo, mut hi) = self.face_box(face);
        let m = p[dir];
        lo[dir] = if m == 0 { self.nodes[dir][0] } else { self.centers[dir][m - 1] };
        hi[dir] = if m == self.n[dir] { self.nodes[dir][m] } else { self.centers[dir][m] };
        (lo, hi)
    }

    /// Mesh size: largest cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Regularity parameter: the largest ratio `|σ|/|σ'|` over faces of
    /// different directions.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.nodes[a][self.n[a]] - self.nodes[a][0])
            .product()
    }

    /// Splits every cell in two along each axis.
    pub fn refined(&self) -> Self {
        let axes = (0..self.dim)
            .map(|a| {
                let mut c = Vec::with_capacity(2 * self.nodes[a].len());
                for w in self.nodes[a].windows(2) {
                    c.push(w[0]);
                    c.push(0.5 * (w[0] + w[1]));
                }
                c.push(*self.nodes[a].last().unwrap());
                c
            })
            .collect();
        Self::new(axes).expect("refinement preserves validity")
    }
}

pub(crate) fn local_index(shape: [usize; 3], idx: [usize; 3]) -> usize {
    idx[0] + shape[0] * (idx[1] + shape[1] * idx[2])
}

fn position(shape: [usize; 3], mut k: usize) -> [usize; 3] {
    let i = k % shape[0];
    k /= shape[0];
    let j = k % shape[1];
    [i, j, k / shape[1]]
}

/// Convenience: `θ` of a grid.
pub fn theta(grid: &MacGrid) -> f64 {
    grid.theta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_cube_counts() {
        let g = MacGrid::unit(3, 2).unwrap();
        assert_eq!(g.num_cells(), 8);
        for d in 0..3 {
            assert_eq!(g.face_set(d).len(), 12);
        }
        assert_eq!(g.theta(), 1.0);
    }

    #[test]
    fn theta_of_small_nonuniform_grid() {
        let g = MacGrid::new(vec![vec![0.0, 0.25, 1.0], vec![0.0, 0.5, 1.0]]).unwrap();
        assert_relative_eq!(g.theta(), 2.0);
    }

    #[test]
    fn dual_cells_tile_domain() {
        let g = MacGrid::unit(2, 4).unwrap();
        let s: f64 = g.face_set(0).dual_volume.iter().sum();
        assert_relative_eq!(s, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn adjacency() {
        let g = MacGrid::new(vec![vec![0.0, 0.3, 0.5, 1.0], vec![0.0, 0.1, 1.0], vec![0.0, 0.5, 0.7, 1.0]]).unwrap();
        for f in 0..g.num_faces() {
            let [a, b] = g.face_cells(f);
            assert!(a.is_some() || b.is_some());
            let p = g.face_position(f);
            let d = g.face_direction(f);
            let ext = p[d] == 0 || p[d] == g.cells_per_axis()[d];
            assert_eq!(ext, !g.is_interior_face(f));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MacGrid::new(vec![vec![0.0, 1.0, 0.5], vec![0.0, 0.5, 1.0]]).is_err());
        assert!(MacGrid::new(vec![vec![0.0, 0.5, 1.0]]).is_err());
        assert!(MacGrid::new(vec![vec![0.0, 1.0], vec![0.0, 0.5, 1.0]]).is_err());
        assert!(MacGrid::new(vec![vec![0.0, 0.5, 1.0]; 4]).is_err());
    }

    #[test]
    fn dual_face_distance_matches_face_centers() {
        let g = MacGrid::new(vec![vec![0.0, 0.2, 0.7, 1.0], vec![0.0, 0.4, 0.5, 1.0]]).unwrap();
        for set in g.face_sets() {
            for e in &set.dual_faces {
                if let Some(up) = e.upper {
                    let a = g.face_center(e.lower);
                    let b = g.face_center(up);
                    assert_relative_eq!(e.dist, b[e.normal] - a[e.normal], max_relative = 1e-14);
                }
                assert!(e.area > 0.0 && e.dist > 0.0);
            }
        }
    }
}

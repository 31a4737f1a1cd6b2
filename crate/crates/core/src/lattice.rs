//! Voxel lattices, radius neighborhoods and the sparse GMRF structure matrix.
//!
//! The structure matrix `H` has `H[d,d] = Σ_{d'∈N(d)} ω(d,d')²` on the diagonal
//! and `-ω(d,d')²` for neighbors, so its rows sum to zero and `I + φH` is
//! strictly diagonally dominant for every `φ > 0`. The prior on a coefficient
//! image is `N(0, ν⁻¹ (I + φH)⁻¹)`.

use crate::error::{Result, StmError};

/// Regular 2D or 3D grid. Linear indices follow lexicographic order with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Lattice {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.len() > 3 {
            return Err(StmError::Dimension(format!(
                "lattice needs 2 or 3 axes, got {}",
                dims.len()
            )));
        }
        if let Some(axis) = dims.iter().position(|&n| n == 0) {
            return Err(StmError::Dimension(format!("axis {axis} has length 0")));
        }
        let mut strides = vec![1; dims.len()];
        for axis in (0..dims.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * dims[axis + 1];
        }
        Ok(Lattice {
            dims: dims.to_vec(),
            strides,
            len: dims.iter().product(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of voxels, `N_D`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        debug_assert!(index < self.len);
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (index / s) % n)
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for ((&c, &n), &s) in coords.iter().zip(&self.dims).zip(&self.strides) {
            if c >= n {
                return None;
            }
            idx += c * s;
        }
        Some(idx)
    }

    /// Pairs of voxels adjacent along one axis (unit grid distance), each pair
    /// listed once with the smaller index first.
    pub fn axis_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for d in 0..self.len {
            let c = self.coords(d);
            for axis in 0..self.ndim() {
                if c[axis] + 1 < self.dims[axis] {
                    edges.push((d, d + self.strides[axis]));
                }
            }
        }
        edges
    }
}

pub fn build_lattice(dims: &[usize]) -> Result<Lattice> {
    Lattice::new(dims)
}

/// Similarity weight as a function of Euclidean voxel distance.
pub trait Kernel {
    fn weight(&self, distance: f64) -> f64;
}

/// `K(u) = exp(-u²/2)`, truncated to the neighborhood radius by the graph.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianKernel;

impl Kernel for GaussianKernel {
    fn weight(&self, distance: f64) -> f64 {
        (-0.5 * distance * distance).exp()
    }
}

impl<F: Fn(f64) -> f64> Kernel for F {
    fn weight(&self, distance: f64) -> f64 {
        self(distance)
    }
}

/// Radius-`r0` neighborhood system in compressed row form. Row `d` holds the
/// voxels `d'` with `0 < ‖d - d'‖₂ ≤ r0`, sorted by index, and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    r0: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl NeighborhoodGraph {
    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, d: usize) -> &[usize] {
        &self.cols[self.row_ptr[d]..self.row_ptr[d + 1]]
    }

    pub fn weights(&self, d: usize) -> &[f64] {
        &self.weights[self.row_ptr[d]..self.row_ptr[d + 1]]
    }

    pub fn degree(&self, d: usize) -> usize {
        self.row_ptr[d + 1] - self.row_ptr[d]
    }

    pub fn weight(&self, d: usize, other: usize) -> Option<f64> {
        self.neighbors(d)
            .binary_search(&other)
            .ok()
            .map(|pos| self.weights(d)[pos])
    }
}

// Integer offsets with 0 < |o| ≤ r0. The tolerance keeps e.g. r0 = √5 from
// losing the (1,2) offset to rounding.
fn offsets_within(ndim: usize, r0: f64) -> Vec<(Vec<isize>, f64)> {
    let reach = (r0 + 1e-9).floor() as isize;
    let limit = r0 * r0 + 1e-9;
    let mut out = Vec::new();
    let mut cur = vec![-reach; ndim];
    loop {
        let sq: isize = cur.iter().map(|v| v * v).sum();
        if sq > 0 && (sq as f64) <= limit {
            out.push((cur.clone(), (sq as f64).sqrt()));
        }
        let mut axis = ndim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < reach {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -reach;
        }
    }
}

pub fn build_neighborhood(
    lat: &Lattice,
    r0: f64,
    kernel: &impl Kernel,
) -> Result<NeighborhoodGraph> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(StmError::Parameter(format!(
            "neighborhood radius must be positive and finite, got {r0}"
        )));
    }
    let offsets = offsets_within(lat.ndim(), r0);
    let mut row_ptr = Vec::with_capacity(lat.len() + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    row_ptr.push(0);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(offsets.len());
    for d in 0..lat.len() {
        let c = lat.coords(d);
        row.clear();
        'offsets: for (off, dist) in &offsets {
            let mut nc = Vec::with_capacity(c.len());
            for (axis, (&ci, &oi)) in c.iter().zip(off).enumerate() {
                let v = ci as isize + oi;
                if v < 0 || v as usize >= lat.dims()[axis] {
                    continue 'offsets;
                }
                nc.push(v as usize);
            }
            let j = lat.index(&nc).expect("in-bounds coordinates");
            row.push((j, kernel.weight(*dist)));
        }
        row.sort_by_key(|&(j, _)| j);
        for &(j, w) in &row {
            cols.push(j);
            weights.push(w);
        }
        row_ptr.push(cols.len());
    }
    Ok(NeighborhoodGraph {
        r0,
        row_ptr,
        cols,
        weights,
    })
}

/// Univariate Gaussian given by mean and precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianConditional {
    pub mean: f64,
    pub precision: f64,
}

/// Sparse `H` for one coefficient image plus its spatial parameter `φ`.
/// Off-diagonal entries share the sparsity pattern of the neighborhood graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GmrfStructure {
    phi: f64,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    offdiag: Vec<f64>,
}

impl GmrfStructure {
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn h_diag(&self, d: usize) -> f64 {
        self.diag[d]
    }

    /// Off-diagonal entries of row `d` of `H` as `(column, value)`.
    pub fn h_row(&self, d: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[d]..self.row_ptr[d + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.offdiag[span].iter().copied())
    }

    /// `H x`.
    pub fn h_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len());
        (0..self.len())
            .map(|d| self.diag[d] * x[d] + self.h_row(d).map(|(j, h)| h * x[j]).sum::<f64>())
            .collect()
    }

    /// `xᵀ (I + φH) x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let hx = self.h_matvec(x);
        x.iter()
            .zip(&hx)
            .map(|(xi, hxi)| xi * (xi + self.phi * hxi))
            .sum()
    }

    /// Diagonal of `I + φH` at `d`.
    pub fn precision_diag(&self, d: usize) -> f64 {
        1.0 + self.phi * self.diag[d]
    }

    /// Full conditional of `x[d]` under `N(0, ν⁻¹(I + φH)⁻¹)` given the other
    /// components, read off the precision matrix `ν(I + φH)`. Off-diagonals of
    /// `H` are non-positive, so the mean is a positively weighted average of
    /// the neighbors.
    pub fn conditional_params(&self, nu: f64, x: &[f64], d: usize) -> GaussianConditional {
        let qdd = self.precision_diag(d);
        let neigh: f64 = self.h_row(d).map(|(j, h)| h * x[j]).sum();
        GaussianConditional {
            mean: -self.phi * neigh / qdd,
            precision: nu * qdd,
        }
    }
}

pub fn build_gmrf_structure(g: &NeighborhoodGraph, phi: f64) -> Result<GmrfStructure> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(StmError::Parameter(format!(
            "spatial parameter phi must be positive and finite, got {phi}"
        )));
    }
    let diag = (0..g.len())
        .map(|d| g.weights(d).iter().map(|w| w * w).sum())
        .collect();
    Ok(GmrfStructure {
        phi,
        diag,
        row_ptr: g.row_ptr.clone(),
        cols: g.cols.clone(),
        offdiag: g.weights.iter().map(|w| -w * w).collect(),
    })
}

/// One structure per coefficient image, all sharing the same neighborhood.
pub fn build_gmrf_structures(g: &NeighborhoodGraph, phi: &[f64]) -> Result<Vec<GmrfStructure>> {
    phi.iter().map(|&p| build_gmrf_structure(g, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_lattice_indexing() {
        let lat = build_lattice(&[2, 2]).unwrap();
        assert_eq!(lat.len(), 4);
        let expected = [[0, 0], [0, 1], [1, 0], [1, 1]];
        for (i, c) in expected.iter().enumerate() {
            assert_eq!(lat.coords(i), c.to_vec());
            assert_eq!(lat.index(c), Some(i));
        }
        assert_eq!(build_lattice(&[32, 32]).unwrap().len(), 1024);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(matches!(build_lattice(&[3]), Err(StmError::Dimension(_))));
        assert!(matches!(build_lattice(&[]), Err(StmError::Dimension(_))));
        assert!(matches!(build_lattice(&[2, 0]), Err(StmError::Dimension(_))));
        assert!(matches!(
            build_lattice(&[2, 2, 2, 2]),
            Err(StmError::Dimension(_))
        ));
    }

    #[test]
    fn three_voxel_row_weights() {
        let lat = build_lattice(&[1, 3]).unwrap();
        let g = build_neighborhood(&lat, 1.0, &GaussianKernel).unwrap();
        assert_eq!(g.neighbors(1), &[0, 2]);
        for &w in g.weights(1) {
            assert_relative_eq!(w, 0.606_530_659_712_633_4, max_relative = 1e-12);
        }
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn radius_below_spacing_gives_empty_graph() {
        let lat = build_lattice(&[4, 5]).unwrap();
        let g = build_neighborhood(&lat, 0.5, &GaussianKernel).unwrap();
        assert!((0..lat.len()).all(|d| g.degree(d) == 0));
        let s = build_gmrf_structure(&g, 10.0).unwrap();
        let x: Vec<f64> = (0..lat.len()).map(|i| i as f64 - 3.0).collect();
        assert_eq!(s.h_matvec(&x), vec![0.0; lat.len()]);
        assert_relative_eq!(s.quad_form(&x), x.iter().map(|v| v * v).sum::<f64>());
    }

    #[test]
    fn interior_voxel_radius_two() {
        let lat = build_lattice(&[32, 32]).unwrap();
        let g = build_neighborhood(&lat, 2.0, &GaussianKernel).unwrap();
        let d = lat.index(&[10, 10]).unwrap();
        assert_eq!(g.degree(d), 12);
        assert_eq!(g.degree(0), 5);
    }

    #[test]
    fn radius_sqrt5_includes_knight_moves() {
        let lat = build_lattice(&[9, 9]).unwrap();
        let g = build_neighborhood(&lat, 5f64.sqrt(), &GaussianKernel).unwrap();
        assert_eq!(g.degree(lat.index(&[4, 4]).unwrap()), 20);
    }

    #[test]
    fn structure_entries_on_three_voxel_row() {
        let lat = build_lattice(&[1, 3]).unwrap();
        let g = build_neighborhood(&lat, 1.0, &GaussianKernel).unwrap();
        let s = build_gmrf_structure(&g, 10.0).unwrap();
        let e1 = (-1f64).exp();
        assert_relative_eq!(s.h_diag(1), 2.0 * e1, max_relative = 1e-12);
        let row: Vec<_> = s.h_row(1).collect();
        assert_eq!(row.len(), 2);
        for (_, h) in row {
            assert_relative_eq!(h, -e1, max_relative = 1e-12);
        }
        assert_relative_eq!(s.h_diag(1), 0.735_758_882_342_884_7, max_relative = 1e-12);
    }

    #[test]
    fn rows_sum_to_zero() {
        let lat = build_lattice(&[5, 4, 3]).unwrap();
        let g = build_neighborhood(&lat, 2.0, &GaussianKernel).unwrap();
        let s = build_gmrf_structure(&g, 3.0).unwrap();
        let ones = vec![1.0; lat.len()];
        for v in s.h_matvec(&ones) {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn non_positive_phi_is_rejected() {
        let lat = build_lattice(&[2, 2]).unwrap();
        let g = build_neighborhood(&lat, 1.0, &GaussianKernel).unwrap();
        assert!(matches!(build_gmrf_structure(&g, 0.0), Err(StmError::Parameter(_))));
        assert!(matches!(build_gmrf_structure(&g, -1.0), Err(StmError::Parameter(_))));
        assert!(matches!(
            build_neighborhood(&lat, 0.0, &GaussianKernel),
            Err(StmError::Parameter(_))
        ));
    }

    #[test]
    fn conditional_on_three_voxel_row() {
        let lat = build_lattice(&[1, 3]).unwrap();
        let g = build_neighborhood(&lat, 1.0, &GaussianKernel).unwrap();
        let s = build_gmrf_structure(&g, 10.0).unwrap();
        let c = s.conditional_params(1.0, &[1.0, -7.0, 1.0], 1);
        let e1 = (-1f64).exp();
        assert_relative_eq!(c.mean, 20.0 * e1 / (1.0 + 20.0 * e1), max_relative = 1e-12);
        assert_relative_eq!(c.mean, 0.880_35, epsilon = 1e-5);
        assert_relative_eq!(c.precision, 1.0 + 20.0 * e1, max_relative = 1e-12);

        let zero = s.conditional_params(2.0, &[0.0, 5.0, 0.0], 1);
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn small_phi_approaches_independence() {
        let lat = build_lattice(&[3, 3]).unwrap();
        let g = build_neighborhood(&lat, 2.0, &GaussianKernel).unwrap();
        let s = build_gmrf_structure(&g, 1e-12).unwrap();
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let c = s.conditional_params(2.5, &x, 4);
        assert_relative_eq!(c.precision, 2.5, max_relative = 1e-9);
        assert!(c.mean.abs() < 1e-9);
    }

    #[test]
    fn more_neighbors_lower_conditional_variance() {
        let lat = build_lattice(&[6, 6]).unwrap();
        let g = build_neighborhood(&lat, 2.0, &GaussianKernel).unwrap();
        let s = build_gmrf_structure(&g, 10.0).unwrap();
        let x = vec![0.0; lat.len()];
        let corner = s.conditional_params(1.0, &x, 0);
        let edge = s.conditional_params(1.0, &x, lat.index(&[0, 3]).unwrap());
        let interior = s.conditional_params(1.0, &x, lat.index(&[3, 3]).unwrap());
        assert!(1.0 / interior.precision < 1.0 / edge.precision);
        assert!(1.0 / edge.precision < 1.0 / corner.precision);
    }

    #[test]
    fn custom_kernel_closure() {
        let lat = build_lattice(&[3, 3]).unwrap();
        let g = build_neighborhood(&lat, 1.5, &|u: f64| 1.0 / (1.0 + u)).unwrap();
        let w = g.weight(0, 4).unwrap();
        assert_relative_eq!(w, 1.0 / (1.0 + 2f64.sqrt()), max_relative = 1e-12);
    }
}

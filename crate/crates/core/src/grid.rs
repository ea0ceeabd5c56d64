//! Periodic staggered grids in one and two space dimensions.
//!
//! Every grid carries two lattices of equal size:
//!
//! * the density lattice (`Lattice::Rho`): cell centers and cell corners,
//! * the fluctuation lattice (`Lattice::G`): x-face midpoints and y-face
//!   midpoints.
//!
//! Each lattice is stored as two blocks of `nx * ny` points. Positions are
//! tracked internally in half-cell units so that both lattices share one
//! integer coordinate system; a point of block `b` at cell `(i, j)` sits at
//! half-unit coordinates `(2i + ox_b, 2j + oy_b)`.
//!
//! In 1D the same pattern is kept with a single row of cells: the density
//! lattice holds cell centers followed by interfaces, the fluctuation lattice
//! interfaces followed by centers. This reduction of the 2D layout doubles the
//! number of unknowns relative to a minimal 1D staggered grid and yields two
//! decoupled staggered systems.
//!
//! Two families of first-order differences are provided:
//!
//! * [`StaggeredGrid::diff`] moves between lattices with a half-cell offset
//!   (`Side::Plus` maps density values onto the fluctuation lattice,
//!   `Side::Minus` maps fluctuation values back). They satisfy
//!   `D^- = -(D^+)^T`.
//! * [`StaggeredGrid::shift_diff`] stays on one lattice and differences
//!   neighbours one full cell apart (forward for `Plus`, backward for
//!   `Minus`). This is the upwind stencil used for transport of the
//!   fluctuation.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lattice {
    Rho,
    G,
}

impl Lattice {
    pub fn complement(self) -> Lattice {
        match self {
            Lattice::Rho => Lattice::G,
            Lattice::G => Lattice::Rho,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// Half-unit offsets of the two blocks of each lattice.
fn block_offsets(dim: usize, lattice: Lattice) -> [[usize; 2]; 2] {
    match (dim, lattice) {
        (1, Lattice::Rho) => [[1, 0], [0, 0]],
        (1, Lattice::G) => [[0, 0], [1, 0]],
        (_, Lattice::Rho) => [[1, 1], [0, 0]],
        (_, Lattice::G) => [[0, 1], [1, 0]],
    }
}

#[derive(Clone, Debug)]
struct NeighbourTable {
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct StaggeredGrid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    // [lattice][axis], indexed by points of the *target* lattice and holding
    // indices into the complementary lattice.
    cross: [[NeighbourTable; 2]; 2],
    // [lattice][axis], neighbours one full cell away on the same lattice.
    shift: [[NeighbourTable; 2]; 2],
}

fn lattice_slot(lattice: Lattice) -> usize {
    match lattice {
        Lattice::Rho => 0,
        Lattice::G => 1,
    }
}

impl StaggeredGrid {
    /// Builds a periodic staggered grid.
    ///
    /// `bounds[j] = (lower, upper)` and `cells[j]` are given per axis; only
    /// the first `dim` entries are read.
    pub fn new(dim: usize, bounds: &[(f64, f64)], cells: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if bounds.len() < dim || cells.len() < dim {
            return Err(Error::InvalidGrid(format!(
                "need bounds and cell counts for {dim} axes"
            )));
        }
        let mut lower = [0.0; 2];
        let mut upper = [1.0; 2];
        let mut n = [1usize; 2];
        let mut spacing = [1.0; 2];
        for axis in 0..dim {
            let (a, b) = bounds[axis];
            if !(a.is_finite() && b.is_finite()) || b <= a {
                return Err(Error::InvalidGrid(format!(
                    "degenerate domain [{a}, {b}] on axis {axis}"
                )));
            }
            if cells[axis] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "need at least 2 cells on axis {axis}, got {}",
                    cells[axis]
                )));
            }
            lower[axis] = a;
            upper[axis] = b;
            n[axis] = cells[axis];
            spacing[axis] = (b - a) / cells[axis] as f64;
        }

        let mut grid = StaggeredGrid {
            dim,
            lower,
            upper,
            cells: n,
            spacing,
            cross: Default::default(),
            shift: Default::default(),
        };
        for lattice in [Lattice::Rho, Lattice::G] {
            for axis in 0..dim {
                grid.cross[lattice_slot(lattice)][axis] = grid.build_table(lattice, axis, 1);
                grid.shift[lattice_slot(lattice)][axis] = grid.build_table(lattice, axis, 2);
            }
        }
        Ok(grid)
    }

    pub fn new_1d(bounds: (f64, f64), cells: usize) -> Result<Self> {
        Self::new(1, &[bounds], &[cells])
    }

    pub fn new_2d(bounds: [(f64, f64); 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(2, &bounds, &cells)
    }

    /// Builds the neighbour table for `lattice`. With `step == 1` the
    /// neighbours live on the complementary lattice, with `step == 2` on the
    /// same one.
    fn build_table(&self, lattice: Lattice, axis: usize, step: usize) -> NeighbourTable {
        let source = if step == 1 { lattice.complement() } else { lattice };
        let count = self.points();
        let mut fwd = Vec::with_capacity(count);
        let mut bwd = Vec::with_capacity(count);
        for idx in 0..count {
            let p = self.half_coords(lattice, idx);
            let mut up = p;
            let mut down = p;
            up[axis] += step as i64;
            down[axis] -= step as i64;
            fwd.push(self.locate(source, up).expect("neighbour on lattice"));
            bwd.push(self.locate(source, down).expect("neighbour on lattice"));
        }
        NeighbourTable { fwd, bwd }
    }

    fn half_coords(&self, lattice: Lattice, idx: usize) -> [i64; 2] {
        let (b, i, j) = self.location_of(idx);
        let off = block_offsets(self.dim, lattice)[b];
        [(2 * i + off[0]) as i64, (2 * j + off[1]) as i64]
    }

    fn locate(&self, lattice: Lattice, p: [i64; 2]) -> Option<usize> {
        let px = p[0].rem_euclid(2 * self.cells[0] as i64) as usize;
        let py = if self.dim == 2 {
            p[1].rem_euclid(2 * self.cells[1] as i64) as usize
        } else {
            0
        };
        let offsets = block_offsets(self.dim, lattice);
        for (b, off) in offsets.iter().enumerate() {
            let matches_x = px % 2 == off[0];
            let matches_y = self.dim == 1 || py % 2 == off[1];
            if matches_x && matches_y {
                let i = (px - off[0]) / 2;
                let j = if self.dim == 2 { (py - off[1]) / 2 } else { 0 };
                return Some(self.index_of(b, i, j));
            }
        }
        None
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing[a]).fold(f64::INFINITY, f64::min)
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        (self.lower[axis], self.upper[axis])
    }

    /// Cells per block (`nx` in 1D, `nx * ny` in 2D).
    pub fn cells_total(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    /// Number of points on either lattice (`N_rho = N_g = 2 * nx * ny`).
    pub fn points(&self) -> usize {
        2 * self.cells_total()
    }

    pub fn rho_count(&self) -> usize {
        self.points()
    }

    pub fn g_count(&self) -> usize {
        self.points()
    }

    /// Product of the mesh spacings; the weight of the discrete inner products.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing[a]).product()
    }

    /// Volume represented by one lattice point. Each lattice has two points
    /// per cell, so this is half of [`cell_volume`](Self::cell_volume).
    pub fn point_volume(&self) -> f64 {
        0.5 * self.cell_volume()
    }

    /// Linear index of block `b`, cell `(i, j)`.
    pub fn index_of(&self, block: usize, i: usize, j: usize) -> usize {
        block * self.cells_total() + j * self.cells[0] + i
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn location_of(&self, idx: usize) -> (usize, usize, usize) {
        let per_block = self.cells_total();
        let b = idx / per_block;
        let rem = idx % per_block;
        (b, rem % self.cells[0], rem / self.cells[0])
    }

    /// Physical coordinates of a lattice point (`y = 0` in 1D).
    pub fn position(&self, lattice: Lattice, idx: usize) -> [f64; 2] {
        let p = self.half_coords(lattice, idx);
        let mut out = [0.0; 2];
        for axis in 0..self.dim {
            out[axis] = self.lower[axis] + 0.5 * p[axis] as f64 * self.spacing[axis];
        }
        out
    }

    pub fn positions(&self, lattice: Lattice) -> Vec<[f64; 2]> {
        (0..self.points()).map(|k| self.position(lattice, k)).collect()
    }

    /// Samples `f(x, y)` at every point of a lattice.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, lattice: Lattice, f: F) -> DVector<f64> {
        DVector::from_iterator(
            self.points(),
            (0..self.points()).map(|k| {
                let [x, y] = self.position(lattice, k);
                f(x, y)
            }),
        )
    }

    /// Forward/backward neighbour indices used by [`diff`](Self::diff).
    ///
    /// For `Side::Plus` the returned tables are indexed by fluctuation points
    /// and point into the density lattice; for `Side::Minus` the reverse.
    pub fn cross_neighbours(&self, axis: usize, side: Side) -> (&[usize], &[usize]) {
        let target = match side {
            Side::Plus => Lattice::G,
            Side::Minus => Lattice::Rho,
        };
        let t = &self.cross[lattice_slot(target)][axis];
        (&t.fwd, &t.bwd)
    }

    /// Neighbours one full cell away on the same lattice.
    pub fn shift_neighbours(&self, lattice: Lattice, axis: usize) -> (&[usize], &[usize]) {
        let t = &self.shift[lattice_slot(lattice)][axis];
        (&t.fwd, &t.bwd)
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "axis {axis} out of range for a {}-D grid",
                self.dim
            )))
        }
    }

    /// Half-offset difference between the two lattices along `axis`.
    ///
    /// `Side::Plus` takes a field on the density lattice and returns values
    /// on the fluctuation lattice; `Side::Minus` goes the other way. At an
    /// output point `p` the result is `(f(p + h) - f(p - h)) / dx` with `h`
    /// half a cell.
    pub fn diff(&self, axis: usize, side: Side, field: &[f64]) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        check_len("diff", self.points(), field.len())?;
        let (fwd, bwd) = self.cross_neighbours(axis, side);
        let inv = 1.0 / self.spacing[axis];
        Ok(fwd
            .iter()
            .zip(bwd)
            .map(|(&u, &d)| (field[u] - field[d]) * inv)
            .collect())
    }

    /// Full-cell upwind/downwind difference on one lattice.
    pub fn shift_diff(
        &self,
        lattice: Lattice,
        axis: usize,
        side: Side,
        field: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        check_len("shift_diff", self.points(), field.len())?;
        let (fwd, bwd) = self.shift_neighbours(lattice, axis);
        let inv = 1.0 / self.spacing[axis];
        Ok(match side {
            Side::Plus => (0..field.len()).map(|k| (field[fwd[k]] - field[k]) * inv).collect(),
            Side::Minus => (0..field.len()).map(|k| (field[k] - field[bwd[k]]) * inv).collect(),
        })
    }

    /// Column-wise [`shift_diff`](Self::shift_diff) on the fluctuation
    /// lattice.
    pub(crate) fn shift_diff_cols(&self, axis: usize, side: Side, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (fwd, bwd) = self.shift_neighbours(Lattice::G, axis);
        let inv = 1.0 / self.spacing[axis];
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let src = x.column(c);
            let mut dst = out.column_mut(c);
            match side {
                Side::Plus => {
                    for k in 0..src.len() {
                        dst[k] = (src[fwd[k]] - src[k]) * inv;
                    }
                }
                Side::Minus => {
                    for k in 0..src.len() {
                        dst[k] = (src[k] - src[bwd[k]]) * inv;
                    }
                }
            }
        }
        out
    }

    /// Dense matrix of [`diff`](Self::diff). Intended for tests and small
    /// reference computations.
    pub fn diff_matrix(&self, axis: usize, side: Side) -> DMatrix<f64> {
        let n = self.points();
        let (fwd, bwd) = self.cross_neighbours(axis, side);
        let inv = 1.0 / self.spacing[axis];
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, fwd[k])] += inv;
            m[(k, bwd[k])] -= inv;
        }
        m
    }

    /// Dense matrix of [`shift_diff`](Self::shift_diff).
    pub fn shift_diff_matrix(&self, lattice: Lattice, axis: usize, side: Side) -> DMatrix<f64> {
        let n = self.points();
        let (fwd, bwd) = self.shift_neighbours(lattice, axis);
        let inv = 1.0 / self.spacing[axis];
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            match side {
                Side::Plus => {
                    m[(k, fwd[k])] += inv;
                    m[(k, k)] -= inv;
                }
                Side::Minus => {
                    m[(k, k)] += inv;
                    m[(k, bwd[k])] -= inv;
                }
            }
        }
        m
    }
}

impl Default for NeighbourTable {
    fn default() -> Self {
        NeighbourTable {
            fwd: Vec::new(),
            bwd: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn counts_match_twice_the_cells() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [4, 4]).unwrap();
        assert_eq!(g.rho_count(), 32);
        assert_eq!(g.g_count(), 32);
        let g1 = StaggeredGrid::new_1d((-1.5, 1.5), 500).unwrap();
        assert_eq!(g1.points(), 1000);
        assert!((g1.spacing(0) - 0.006).abs() < 1e-15);
        let g2 = StaggeredGrid::new_2d([(0.0, 7.0), (0.0, 7.0)], [128, 128]).unwrap();
        assert_eq!(g2.spacing(0), 7.0 / 128.0);
        assert_eq!(g2.spacing(1), 7.0 / 128.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StaggeredGrid::new_1d((0.0, 1.0), 1).is_err());
        assert!(StaggeredGrid::new_1d((1.0, 1.0), 8).is_err());
        assert!(StaggeredGrid::new_1d((2.0, 1.0), 8).is_err());
        assert!(StaggeredGrid::new(3, &[(0.0, 1.0); 3], &[4; 3]).is_err());
        let g = StaggeredGrid::new_1d((0.0, 1.0), 4).unwrap();
        assert!(g.diff(0, Side::Plus, &[0.0; 3]).is_err());
        assert!(g.diff(1, Side::Plus, &[0.0; 8]).is_err());
    }

    #[test]
    fn index_maps_are_bijective() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 2.0)], [5, 3]).unwrap();
        for lattice in [Lattice::Rho, Lattice::G] {
            let mut seen = std::collections::HashSet::new();
            for k in 0..g.points() {
                let (b, i, j) = g.location_of(k);
                assert_eq!(g.index_of(b, i, j), k);
                let p = g.half_coords(lattice, k);
                assert_eq!(g.locate(lattice, p), Some(k));
                assert!(seen.insert(p));
            }
        }
    }

    #[test]
    fn lattices_follow_the_staggered_pattern() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [4, 4]).unwrap();
        let h = 0.25;
        // density block 0: centers, block 1: corners
        let c = g.position(Lattice::Rho, g.index_of(0, 1, 2));
        assert!((c[0] - 1.5 * h).abs() < 1e-15 && (c[1] - 2.5 * h).abs() < 1e-15);
        let k = g.position(Lattice::Rho, g.index_of(1, 1, 2));
        assert!((k[0] - h).abs() < 1e-15 && (k[1] - 2.0 * h).abs() < 1e-15);
        // fluctuation block 0: x-faces, block 1: y-faces
        let xf = g.position(Lattice::G, g.index_of(0, 1, 2));
        assert!((xf[0] - h).abs() < 1e-15 && (xf[1] - 2.5 * h).abs() < 1e-15);
        let yf = g.position(Lattice::G, g.index_of(1, 1, 2));
        assert!((yf[0] - 1.5 * h).abs() < 1e-15 && (yf[1] - 2.0 * h).abs() < 1e-15);
    }

    #[test]
    fn constant_fields_have_zero_differences() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [6, 5]).unwrap();
        let f = vec![3.7; g.points()];
        for axis in 0..2 {
            for side in [Side::Plus, Side::Minus] {
                assert!(g.diff(axis, side, &f).unwrap().iter().all(|v| v.abs() < 1e-12));
                assert!(g
                    .shift_diff(Lattice::G, axis, side, &f)
                    .unwrap()
                    .iter()
                    .all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn cross_difference_converges_to_derivative() {
        // max-norm error against 2*pi*cos(2*pi*x) scales like dx
        let err = |n: usize| {
            let g = StaggeredGrid::new_1d((0.0, 1.0), n).unwrap();
            let rho = g.sample(Lattice::Rho, |x, _| (2.0 * std::f64::consts::PI * x).sin());
            let d = g.diff(0, Side::Plus, rho.as_slice()).unwrap();
            (0..g.points())
                .map(|k| {
                    let x = g.position(Lattice::G, k)[0];
                    (d[k] - 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos())
                        .abs()
                })
                .fold(0.0, f64::max)
        };
        let (e64, e128) = (err(64), err(128));
        let c = e64 * 64.0;
        assert!(e64 <= c / 64.0 + 1e-15);
        assert!(e128 <= c / 128.0, "{e64} {e128}");
    }

    #[test]
    fn minus_is_negative_transpose_of_plus() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (-1.0, 1.0)], [5, 4]).unwrap();
        for axis in 0..2 {
            let p = g.diff_matrix(axis, Side::Plus);
            let m = g.diff_matrix(axis, Side::Minus);
            assert!((&m + p.transpose()).amax() < 1e-12);
            let sp = g.shift_diff_matrix(Lattice::G, axis, Side::Plus);
            let sm = g.shift_diff_matrix(Lattice::G, axis, Side::Minus);
            assert!((&sm + sp.transpose()).amax() < 1e-12);
        }
        let u: Vec<f64> = (0..g.points()).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let v: Vec<f64> = (0..g.points()).map(|k| ((k * 104729) % 11) as f64 * 0.3).collect();
        for axis in 0..2 {
            let lhs = dot(&g.diff(axis, Side::Plus, &u).unwrap(), &v);
            let rhs = dot(&u, &g.diff(axis, Side::Minus, &v).unwrap());
            assert!((lhs + rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn second_difference_is_three_point_stencil() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [6, 4]).unwrap();
        for axis in 0..2 {
            let h2 = g.spacing(axis).powi(2);
            let cross = g.diff_matrix(axis, Side::Minus) * g.diff_matrix(axis, Side::Plus);
            let same = g.shift_diff_matrix(Lattice::G, axis, Side::Minus)
                * g.shift_diff_matrix(Lattice::G, axis, Side::Plus);
            for (lap, lattice) in [(cross, Lattice::Rho), (same, Lattice::G)] {
                let (fwd, bwd) = g.shift_neighbours(lattice, axis);
                for k in 0..g.points() {
                    let mut expected = DVector::<f64>::zeros(g.points());
                    expected[fwd[k]] += 1.0 / h2;
                    expected[bwd[k]] += 1.0 / h2;
                    expected[k] -= 2.0 / h2;
                    let row = lap.row(k).transpose();
                    assert!((row - expected).amax() < 1e-9);
                }
            }
        }
    }
}

//! Uniform structured grids in one or two dimensions, cell-centred fields with
//! ghost layers, and boundary filling.

use crate::error::{Error, Result};
use crate::linalg::{Point, State, MAX_VARS};
use crate::scalar::Real;

/// Ghost layers on each side of every active direction. The second order
/// reconstruction at interface `i+1/2` reads cells `i-1..=i+2`.
pub const GHOST: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    n: [usize; 2],
    lo: [T; 2],
    hi: [T; 2],
    dx: [T; 2],
}

impl<T: Real> Grid<T> {
    /// Builds a grid over the half-open box `[lo, hi)`; `n`, `lo` and `hi` carry
    /// one entry per direction.
    pub fn new(n: &[usize], lo: &[T], hi: &[T]) -> Result<Self> {
        let dim = n.len();
        if !(1..=2).contains(&dim) || lo.len() != dim || hi.len() != dim {
            return Err(Error::Shape(format!(
                "grid needs 1 or 2 directions with matching bounds, got n={n:?}"
            )));
        }
        let mut g = Grid {
            dim,
            n: [1, 1],
            lo: [T::zero(); 2],
            hi: [T::one(); 2],
            dx: [T::one(); 2],
        };
        for d in 0..dim {
            if n[d] < 4 {
                return Err(Error::Domain(format!(
                    "need at least 4 cells per direction, got {}",
                    n[d]
                )));
            }
            if !(hi[d] > lo[d]) || !hi[d].is_finite() || !lo[d].is_finite() {
                return Err(Error::Domain(format!("empty or non-finite interval in direction {d}")));
            }
            g.n[d] = n[d];
            g.lo[d] = lo[d];
            g.hi[d] = hi[d];
            g.dx[d] = (hi[d] - lo[d]) / T::from_usize_lossy(n[d]);
        }
        Ok(g)
    }

    pub fn new_1d(n: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(&[n], &[lo], &[hi])
    }

    pub fn new_2d(n: [usize; 2], lo: [T; 2], hi: [T; 2]) -> Result<Self> {
        Self::new(&n, &lo, &hi)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior cells in direction `d`; 1 for an inactive direction.
    #[inline]
    pub fn cells(&self, d: usize) -> usize {
        self.n[d]
    }

    #[inline]
    pub fn dx(&self, d: usize) -> T {
        self.dx[d]
    }

    #[inline]
    pub fn lo(&self, d: usize) -> T {
        self.lo[d]
    }

    #[inline]
    pub fn hi(&self, d: usize) -> T {
        self.hi[d]
    }

    pub fn min_dx(&self) -> T {
        (0..self.dim).map(|d| self.dx[d]).fold(T::infinity(), T::min)
    }

    /// Stored extent in direction `d`, ghosts included.
    #[inline]
    pub fn extent(&self, d: usize) -> usize {
        if d < self.dim {
            self.n[d] + 2 * GHOST
        } else {
            1
        }
    }

    /// Number of stored cells, ghosts included.
    #[inline]
    pub fn storage_len(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    #[inline]
    pub fn interior_len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Product of the cell widths.
    pub fn cell_volume(&self) -> T {
        (0..self.dim).fold(T::one(), |v, d| v * self.dx[d])
    }

    /// Storage offset of cell `(i, j)`, where interior cells run over
    /// `0..n` and ghosts over `-GHOST..0` and `n..n+GHOST`. In 1D `j` must be 0.
    #[inline]
    pub fn index(&self, i: isize, j: isize) -> usize {
        let g = GHOST as isize;
        let jj = if self.dim == 2 { j + g } else { j };
        debug_assert!(i >= -g && i < self.n[0] as isize + g);
        debug_assert!(jj >= 0 && (jj as usize) < self.extent(1));
        jj as usize * self.extent(0) + (i + g) as usize
    }

    /// Cell-centre coordinate in direction `d` of (possibly ghost) index `i`.
    #[inline]
    pub fn coord(&self, d: usize, i: isize) -> T {
        self.lo[d] + (T::from_isize(i).unwrap() + T::half()) * self.dx[d]
    }

    #[inline]
    pub fn center(&self, i: isize, j: isize) -> Point<T> {
        if self.dim == 2 {
            [self.coord(0, i), self.coord(1, j)]
        } else {
            [self.coord(0, i), T::zero()]
        }
    }

    /// Index range along direction 2 that holds interior rows.
    fn rows(&self) -> std::ops::Range<isize> {
        0..self.n[1] as isize
    }

    /// Storage offsets of interior cells in row-major order (direction 1 fastest).
    pub fn interior_offsets(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows()
            .flat_map(move |j| (0..self.n[0] as isize).map(move |i| self.index(i, j)))
    }

    /// `(i, j)` pairs of interior cells in row-major order.
    pub fn interior_cells(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        self.rows()
            .flat_map(move |j| (0..self.n[0] as isize).map(move |i| (i, j)))
    }

    /// Number of interior lines running along direction `d`.
    #[inline]
    pub fn line_count(&self, d: usize) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.n[1 - d]
        }
    }

    /// Storage offsets, ghosts included, of interior line `line` along `d`.
    pub fn line(&self, d: usize, line: usize) -> Vec<usize> {
        let g = GHOST as isize;
        let span = -g..self.n[d] as isize + g;
        let l = line as isize;
        if d == 0 {
            span.map(|i| self.index(i, l)).collect()
        } else {
            span.map(|j| self.index(l, j)).collect()
        }
    }

    /// Position of the face between local cells `c` and `c + 1` of a line
    /// from [`Grid::line`] (local index 0 is the outermost ghost).
    #[inline]
    pub fn face_point(&self, d: usize, line: usize, c: usize) -> Point<T> {
        let along = self.lo[d] + T::from_usize_lossy(c + 1) * self.dx[d] - T::from_usize_lossy(GHOST) * self.dx[d];
        if self.dim == 1 {
            [along, T::zero()]
        } else if d == 0 {
            [along, self.coord(1, line as isize)]
        } else {
            [self.coord(0, line as isize), along]
        }
    }

    /// `(i, j)` pairs of every stored cell.
    pub fn all_cells(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let g = GHOST as isize;
        let (jlo, jhi) = if self.dim == 2 {
            (-g, self.n[1] as isize + g)
        } else {
            (0, 1)
        };
        (jlo..jhi).flat_map(move |j| (-g..self.n[0] as isize + g).map(move |i| (i, j)))
    }
}

/// Cell-centred array of `p`-component states on a [`Grid`], ghosts included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    p: usize,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Grid<T>, p: usize) -> Self {
        assert!((1..=MAX_VARS).contains(&p), "component count {p} out of range");
        Field {
            grid: grid.clone(),
            p,
            values: vec![T::zero(); grid.storage_len() * p],
        }
    }

    /// Samples `f` at every cell centre, ghosts included.
    pub fn from_fn(grid: &Grid<T>, p: usize, mut f: impl FnMut(Point<T>) -> State<T>) -> Self {
        let mut field = Self::zeros(grid, p);
        for (i, j) in grid.all_cells() {
            let s = f(grid.center(i, j));
            field.set(grid.index(i, j), &s);
        }
        field
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn cell(&self, offset: usize) -> &[T] {
        &self.values[offset * self.p..(offset + 1) * self.p]
    }

    #[inline]
    pub fn cell_mut(&mut self, offset: usize) -> &mut [T] {
        let p = self.p;
        &mut self.values[offset * p..(offset + 1) * p]
    }

    /// Zero-padded state of the cell at storage `offset`.
    #[inline]
    pub fn state(&self, offset: usize) -> State<T> {
        crate::linalg::from_slice(self.cell(offset))
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> State<T> {
        self.state(self.grid.index(i, j))
    }

    #[inline]
    pub fn set(&mut self, offset: usize, s: &State<T>) {
        let p = self.p;
        self.cell_mut(offset).copy_from_slice(&s[..p]);
    }

    /// Sum of component `k` over interior cells, accumulated in row-major order.
    pub fn interior_sum(&self, k: usize) -> T {
        self.grid
            .interior_offsets()
            .fold(T::zero(), |acc, o| acc + self.values[o * self.p + k])
    }

    /// Interior states in row-major order.
    pub fn interior_states(&self) -> Vec<State<T>> {
        self.grid.interior_offsets().map(|o| self.state(o)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.p == other.p && self.grid == other.grid
    }
}

/// Boundary treatment selected by a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    /// Ghost cells hold the initial condition for the whole run.
    FixedFromInitial,
}

/// Fills the ghost layers of `field`. `frozen` supplies the ghost values for
/// [`BoundaryKind::FixedFromInitial`] and must be absent otherwise.
pub fn apply_bc<T: Real>(field: &mut Field<T>, kind: BoundaryKind, frozen: Option<&Field<T>>) -> Result<()> {
    match (kind, frozen) {
        (BoundaryKind::Periodic, None) => {
            fill_periodic(field);
            Ok(())
        }
        (BoundaryKind::FixedFromInitial, Some(frozen)) => {
            if !field.same_shape(frozen) {
                return Err(Error::Shape(
                    "frozen boundary field does not match the solution field".into(),
                ));
            }
            fill_fixed(field, frozen);
            Ok(())
        }
        (BoundaryKind::Periodic, Some(_)) => Err(Error::Shape("periodic boundaries take no frozen field".into())),
        (BoundaryKind::FixedFromInitial, None) => {
            Err(Error::Shape("fixed boundaries need the frozen initial field".into()))
        }
    }
}

fn copy_cell<T: Real>(field: &mut Field<T>, from: usize, to: usize) {
    let p = field.p;
    field.values.copy_within(from * p..(from + 1) * p, to * p);
}

fn fill_periodic<T: Real>(field: &mut Field<T>) {
    let grid = field.grid.clone();
    let g = GHOST as isize;
    let n0 = grid.cells(0) as isize;
    // direction 1 over interior rows
    for j in grid.rows() {
        for k in 1..=g {
            copy_cell(field, grid.index(n0 - k, j), grid.index(-k, j));
            copy_cell(field, grid.index(k - 1, j), grid.index(n0 + k - 1, j));
        }
    }
    if grid.dim() == 2 {
        // direction 2 over full rows, which also fills the corners
        let n1 = grid.cells(1) as isize;
        for i in -g..n0 + g {
            for k in 1..=g {
                copy_cell(field, grid.index(i, n1 - k), grid.index(i, -k));
                copy_cell(field, grid.index(i, k - 1), grid.index(i, n1 + k - 1));
            }
        }
    }
}

fn fill_fixed<T: Real>(field: &mut Field<T>, frozen: &Field<T>) {
    let grid = field.grid.clone();
    let p = field.p;
    let n0 = grid.cells(0) as isize;
    let n1 = grid.cells(1) as isize;
    for (i, j) in grid.all_cells() {
        let ghost = i < 0 || i >= n0 || (grid.dim() == 2 && (j < 0 || j >= n1));
        if ghost {
            let o = grid.index(i, j);
            field.values[o * p..(o + 1) * p].copy_from_slice(frozen.cell(o));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> Field<f64> {
        let grid = Grid::new_1d(values.len(), 0.0, 1.0).unwrap();
        let mut f = Field::zeros(&grid, 1);
        for (i, v) in values.iter().enumerate() {
            let o = grid.index(i as isize, 0);
            f.set(o, &[*v, 0.0, 0.0]);
        }
        f
    }

    fn ghosts_1d(f: &Field<f64>) -> ([f64; 2], [f64; 2]) {
        let n = f.grid().cells(0) as isize;
        ([f.at(-2, 0)[0], f.at(-1, 0)[0]], [f.at(n, 0)[0], f.at(n + 1, 0)[0]])
    }

    #[test]
    fn lines_and_faces() {
        let g = Grid::new_2d([4, 5], [0.0, -1.0], [1.0, 1.5]).unwrap();
        assert_eq!(g.line_count(0), 5);
        assert_eq!(g.line_count(1), 4);
        let row = g.line(0, 3);
        assert_eq!(row.len(), 8);
        assert_eq!(row[2], g.index(0, 3));
        let col = g.line(1, 1);
        assert_eq!(col.len(), 9);
        assert_eq!(col[0], g.index(1, -2));
        // face between local cells 1 and 2 is the lower domain boundary
        assert_eq!(g.face_point(0, 3, 1), [0.0, g.coord(1, 3)]);
        assert_eq!(g.face_point(1, 1, 1), [g.coord(0, 1), -1.0]);
        let g1 = Grid::new_1d(4, 0.0, 2.0).unwrap();
        assert_eq!(g1.line_count(0), 1);
        assert_eq!(g1.face_point(0, 0, 5)[0], 2.0);
    }

    #[test]
    fn periodic_1d_wraps() {
        let mut f = line(&[1.0, 2.0, 3.0, 4.0]);
        apply_bc(&mut f, BoundaryKind::Periodic, None).unwrap();
        assert_eq!(ghosts_1d(&f), ([3.0, 4.0], [1.0, 2.0]));
    }

    #[test]
    fn fixed_1d_copies_frozen_ghosts() {
        let mut f = line(&[1.0, 2.0, 3.0, 4.0]);
        let grid = f.grid().clone();
        let frozen = Field::from_fn(&grid, 1, |x| if x[0] < 0.5 { [9.0, 0.0, 0.0] } else { [7.0, 0.0, 0.0] });
        apply_bc(&mut f, BoundaryKind::FixedFromInitial, Some(&frozen)).unwrap();
        assert_eq!(ghosts_1d(&f), ([9.0, 9.0], [7.0, 7.0]));
        assert_eq!(f.at(0, 0)[0], 1.0);
        assert_eq!(f.at(3, 0)[0], 4.0);
    }

    #[test]
    fn periodic_2d_corner() {
        let grid = Grid::new_2d([4, 5], [0.0, 0.0], [1.0, 1.0]).unwrap();
        let mut f = Field::from_fn(&grid, 1, |x| [x[0] * 10.0 + x[1], 0.0, 0.0]);
        apply_bc(&mut f, BoundaryKind::Periodic, None).unwrap();
        assert_eq!(f.at(-1, -1), f.at(3, 4));
        assert_eq!(f.at(-2, 5), f.at(2, 0));
        assert_eq!(f.at(4, 6), f.at(0, 1));
    }

    #[test]
    fn bc_argument_mismatch_is_rejected() {
        let mut f = line(&[1.0, 2.0, 3.0, 4.0]);
        assert!(apply_bc(&mut f, BoundaryKind::FixedFromInitial, None).is_err());
        let other = line(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            apply_bc(&mut f, BoundaryKind::FixedFromInitial, Some(&other)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn grid_rejects_tiny_or_empty() {
        assert!(Grid::<f64>::new_1d(3, 0.0, 1.0).is_err());
        assert!(Grid::<f64>::new_1d(8, 1.0, 1.0).is_err());
        let g = Grid::<f64>::new_2d([8, 4], [-1.0, -0.5], [1.0, 1.5]).unwrap();
        assert_eq!(g.dx(0), 0.25);
        assert_eq!(g.dx(1), 0.5);
        assert_eq!(g.center(0, 0), [-0.875, -0.25]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn periodic_fill_is_idempotent_and_keeps_sums(
                vals in proptest::collection::vec(-1e3f64..1e3, 4 * 6 * 2)
            ) {
                let grid = Grid::new_2d([4, 6], [0.0, 0.0], [1.0, 1.0]).unwrap();
                let mut f = Field::zeros(&grid, 2);
                for (n, o) in grid.interior_offsets().collect::<Vec<_>>().into_iter().enumerate() {
                    f.set(o, &[vals[2 * n], vals[2 * n + 1], 0.0]);
                }
                let sums = [f.interior_sum(0), f.interior_sum(1)];
                apply_bc(&mut f, BoundaryKind::Periodic, None).unwrap();
                let once = f.clone();
                apply_bc(&mut f, BoundaryKind::Periodic, None).unwrap();
                prop_assert_eq!(&once, &f);
                prop_assert_eq!(sums, [f.interior_sum(0), f.interior_sum(1)]);
            }
        }
    }
}

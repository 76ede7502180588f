//! Finest-level cell lattices over a window, axis-aligned index boxes, and
//! piecewise-constant test functions.
//!
//! A `Mesh` is the set of grid cells at one level whose interiors meet a
//! window; its index set is a box, so cells are addressed by flat row-major
//! offsets. Exceptional sets and cube restrictions are unions of `CellBox`
//! index ranges, never materialized cell-by-cell.

use crate::dyadic::{DyadicCube, DyadicError, GridId, Window};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error("meshes do not match (grid, level or extent differ)")]
    Mismatch,
    #[error("cell count {0} too large to materialize")]
    TooLarge(u128),
    #[error("value vector length {got} does not match mesh size {want}")]
    BadLength { got: usize, want: usize },
    #[error("cube at level {cube} is finer than the mesh level {mesh}")]
    FinerThanMesh { cube: i32, mesh: i32 },
}

/// Inclusive per-coordinate cell index range.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl CellBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        CellBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    /// Number of cells in the box.
    pub fn cell_count(&self) -> u128 {
        if self.is_empty() {
            return 0;
        }
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (h - l + 1) as u128)
            .product()
    }

    pub fn intersect(&self, other: &CellBox) -> Option<CellBox> {
        let lo: Vec<i64> = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(&a, &b)| a.max(b))
            .collect();
        let hi: Vec<i64> = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(&a, &b)| a.min(b))
            .collect();
        let b = CellBox::new(lo, hi);
        if b.is_empty() {
            None
        } else {
            Some(b)
        }
    }

    pub fn contains_box(&self, other: &CellBox) -> bool {
        self.lo
            .iter()
            .zip(&other.lo)
            .all(|(&a, &b)| b >= a)
            && self.hi.iter().zip(&other.hi).all(|(&a, &b)| b <= a)
    }
}

/// Subtract `cut` from every box in `pieces`, returning disjoint remainders.
pub fn subtract_box(pieces: Vec<CellBox>, cut: &CellBox) -> Vec<CellBox> {
    let mut out = Vec::new();
    for piece in pieces {
        let overlap = match piece.intersect(cut) {
            None => {
                out.push(piece);
                continue;
            }
            Some(o) => o,
        };
        // peel slabs on each axis outside the overlap
        let mut core = piece;
        for j in 0..core.dim() {
            if core.lo[j] < overlap.lo[j] {
                let mut slab = core.clone();
                slab.hi[j] = overlap.lo[j] - 1;
                out.push(slab);
                core.lo[j] = overlap.lo[j];
            }
            if core.hi[j] > overlap.hi[j] {
                let mut slab = core.clone();
                slab.lo[j] = overlap.hi[j] + 1;
                out.push(slab);
                core.hi[j] = overlap.hi[j];
            }
        }
        // the remaining core equals the overlap and is discarded
    }
    out
}

/// The cells at one level of one grid whose interiors meet a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    grid: GridId,
    level: i32,
    bounds: CellBox,
    dims: Vec<usize>,
}

impl Mesh {
    /// Mesh of all `level`-cells of `grid` meeting the window interior.
    pub fn from_window(grid: GridId, window: &Window, level: i32) -> Result<Self, MeshError> {
        let d = grid.dim();
        let shift = grid.shift_at_level(level);
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for &s in &shift {
            let (l, h) = window.index_bounds_for_shift(s, level)?;
            if h < l {
                return Err(MeshError::Dyadic(DyadicError::EmptyWindow));
            }
            lo.push(l);
            hi.push(h);
        }
        Mesh::from_bounds(grid, level, CellBox::new(lo, hi))
    }

    /// Mesh of exactly the descendants of `cube` at `level`.
    pub fn of_cube(cube: &DyadicCube, level: i32) -> Result<Self, MeshError> {
        let (lo, hi) = cube.descendant_range(level)?;
        Mesh::from_bounds(cube.grid(), level, CellBox::new(lo, hi))
    }

    pub fn from_bounds(grid: GridId, level: i32, bounds: CellBox) -> Result<Self, MeshError> {
        let count = bounds.cell_count();
        if count == 0 {
            return Err(MeshError::Dyadic(DyadicError::EmptyWindow));
        }
        if count > 1 << 28 {
            return Err(MeshError::TooLarge(count));
        }
        let dims = bounds
            .lo
            .iter()
            .zip(&bounds.hi)
            .map(|(&l, &h)| (h - l + 1) as usize)
            .collect();
        Ok(Mesh {
            grid,
            level,
            bounds,
            dims,
        })
    }

    pub fn grid(&self) -> &GridId {
        &self.grid
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn bounds(&self) -> &CellBox {
        &self.bounds
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact cell volume `2^(-level * d)`.
    pub fn cell_volume(&self) -> f64 {
        (-(self.level as f64) * self.dim() as f64).exp2()
    }

    /// Flat offset of an absolute cell index, if inside the mesh.
    pub fn flat(&self, idx: &[i64]) -> Option<usize> {
        let mut acc = 0usize;
        for j in 0..self.dim() {
            if idx[j] < self.bounds.lo[j] || idx[j] > self.bounds.hi[j] {
                return None;
            }
            acc = acc * self.dims[j] + (idx[j] - self.bounds.lo[j]) as usize;
        }
        Some(acc)
    }

    /// Absolute cell index of a flat offset.
    pub fn unflat(&self, mut flat: usize) -> Vec<i64> {
        let d = self.dim();
        let mut idx = vec![0i64; d];
        for j in (0..d).rev() {
            idx[j] = self.bounds.lo[j] + (flat % self.dims[j]) as i64;
            flat /= self.dims[j];
        }
        idx
    }

    /// The cell at a flat offset, as a cube.
    pub fn cell(&self, flat: usize) -> DyadicCube {
        let idx = self.unflat(flat);
        DyadicCube::new(self.level, idx, self.grid.shift_at_level(self.level))
            .expect("mesh cell is a valid cube")
    }

    /// Clip an absolute cell box to the mesh bounds.
    pub fn clip(&self, b: &CellBox) -> Option<CellBox> {
        self.bounds.intersect(b)
    }

    /// Descendant cell box of a cube at the mesh level, clipped to the mesh.
    /// `None` when the cube misses the mesh entirely.
    pub fn cells_of_cube(&self, cube: &DyadicCube) -> Result<Option<CellBox>, MeshError> {
        if cube.grid() != self.grid {
            return Err(MeshError::Mismatch);
        }
        if cube.level() > self.level {
            return Err(MeshError::FinerThanMesh {
                cube: cube.level(),
                mesh: self.level,
            });
        }
        let (lo, hi) = cube.descendant_range(self.level)?;
        Ok(self.clip(&CellBox::new(lo, hi)))
    }

    /// Corner rectangle of an absolute cell box, in floating point.
    pub fn box_rect(&self, b: &CellBox) -> Vec<(f64, f64)> {
        let scale = (-self.level as f64).exp2();
        let shift = self.grid.shift_at_level(self.level);
        b.lo
            .iter()
            .zip(&b.hi)
            .zip(&shift)
            .map(|((&l, &h), &s)| {
                let a = (l as f64 + s as f64 / 3.0) * scale;
                let b = ((h + 1) as f64 + s as f64 / 3.0) * scale;
                (a, b)
            })
            .collect()
    }
}

/// Row-major d-dimensional prefix (summed-area) table over a mesh-shaped
/// array; box sums take `2^d` lookups.
#[derive(Debug, Clone)]
pub struct PrefixTable {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl PrefixTable {
    pub fn build(values: &[f64], dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        assert_eq!(values.len(), n);
        let mut data = values.to_vec();
        let strides = row_major_strides(dims);
        for j in 0..dims.len() {
            let len = dims[j];
            let sj = strides[j];
            for start in axis_starts(dims, &strides, j) {
                let mut run = 0.0;
                for i in 0..len {
                    let off = start + i * sj;
                    run += data[off];
                    data[off] = run;
                }
            }
        }
        PrefixTable {
            dims: dims.to_vec(),
            data,
        }
    }

    /// Sum over an inclusive relative index box (already mesh-relative).
    pub fn box_sum(&self, lo: &[usize], hi: &[usize]) -> f64 {
        let d = self.dims.len();
        let strides = row_major_strides(&self.dims);
        let mut acc = 0.0;
        // inclusion-exclusion over corners
        for mask in 0..(1u32 << d) {
            let mut off = 0isize;
            let mut sign = 1.0;
            let mut valid = true;
            for j in 0..d {
                let coord: isize = if (mask >> j) & 1 == 0 {
                    hi[j] as isize
                } else {
                    sign = -sign;
                    lo[j] as isize - 1
                };
                if coord < 0 {
                    valid = false;
                    break;
                }
                off += coord * strides[j] as isize;
            }
            if valid {
                acc += sign * self.data[off as usize];
            }
        }
        acc
    }
}

fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let d = dims.len();
    let mut s = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        s[j] = s[j + 1] * dims[j + 1];
    }
    s
}

/// Start offsets of all 1-d runs along axis `j`.
fn axis_starts(dims: &[usize], strides: &[usize], j: usize) -> Vec<usize> {
    let mut starts = vec![0usize];
    for jj in 0..dims.len() {
        if jj == j {
            continue;
        }
        let mut next = Vec::with_capacity(starts.len() * dims[jj]);
        for &s in &starts {
            for i in 0..dims[jj] {
                next.push(s + i * strides[jj]);
            }
        }
        starts = next;
    }
    starts
}

/// Add `v` on an inclusive relative box of a difference array; calling
/// `diff_resolve` afterwards turns it into pointwise values.
pub fn diff_add(data: &mut [f64], dims: &[usize], lo: &[usize], hi: &[usize], v: f64) {
    let d = dims.len();
    let strides = row_major_strides(dims);
    for mask in 0..(1u32 << d) {
        let mut off = 0usize;
        let mut sign = 1.0;
        let mut valid = true;
        for j in 0..d {
            let coord = if (mask >> j) & 1 == 0 {
                lo[j]
            } else {
                sign = -sign;
                hi[j] + 1
            };
            if coord >= dims[j] {
                valid = false;
                break;
            }
            off += coord * strides[j];
        }
        if valid {
            data[off] += sign * v;
        }
    }
}

/// Resolve a difference array in place (prefix-sum along every axis).
pub fn diff_resolve(data: &mut [f64], dims: &[usize]) {
    let strides = row_major_strides(dims);
    for j in 0..dims.len() {
        let sj = strides[j];
        for start in axis_starts(dims, &strides, j) {
            let mut run = 0.0;
            for i in 0..dims[j] {
                let off = start + i * sj;
                run += data[off];
                data[off] = run;
            }
        }
    }
}

/// Nonnegative cell values on the finest-level mesh of a window.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn zeros(mesh: Mesh) -> Self {
        let n = mesh.len();
        TestFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(mesh: Mesh, values: Vec<f64>) -> Result<Self, MeshError> {
        if values.len() != mesh.len() {
            return Err(MeshError::BadLength {
                got: values.len(),
                want: mesh.len(),
            });
        }
        Ok(TestFunction { mesh, values })
    }

    pub fn constant(mesh: Mesh, v: f64) -> Self {
        let n = mesh.len();
        TestFunction {
            mesh,
            values: vec![v; n],
        }
    }

    /// Indicator of a cube, on a mesh at least as fine as the cube.
    pub fn indicator(mesh: Mesh, cube: &DyadicCube) -> Result<Self, MeshError> {
        let mut f = TestFunction::zeros(mesh);
        if let Some(b) = f.mesh.cells_of_cube(cube)? {
            f.fill_box(&b, 1.0);
        }
        Ok(f)
    }

    /// Set all cells of an absolute box to `v`.
    pub fn fill_box(&mut self, b: &CellBox, v: f64) {
        let Some(clipped) = self.mesh.clip(b) else {
            return;
        };
        let lo: Vec<usize> = clipped
            .lo
            .iter()
            .zip(&self.mesh.bounds().lo)
            .map(|(&x, &l)| (x - l) as usize)
            .collect();
        let hi: Vec<usize> = clipped
            .hi
            .iter()
            .zip(&self.mesh.bounds().lo)
            .map(|(&x, &l)| (x - l) as usize)
            .collect();
        let dims = self.mesh.dims().to_vec();
        let strides = row_major_strides(&dims);
        fill_rec(&mut self.values, &strides, &lo, &hi, 0, 0, v);
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

fn fill_rec(
    data: &mut [f64],
    strides: &[usize],
    lo: &[usize],
    hi: &[usize],
    j: usize,
    base: usize,
    v: f64,
) {
    if j == strides.len() {
        data[base] = v;
        return;
    }
    for i in lo[j]..=hi[j] {
        fill_rec(data, strides, lo, hi, j + 1, base + i * strides[j], v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Window;

    #[test]
    fn mesh_indexing_round_trip() {
        let w = Window::with_radius_int(0, 2, 1).unwrap();
        let mesh = Mesh::from_window(GridId::standard(2), &w, 2).unwrap();
        assert_eq!(mesh.len(), 64);
        for flat in [0usize, 13, 63] {
            let idx = mesh.unflat(flat);
            assert_eq!(mesh.flat(&idx), Some(flat));
        }
    }

    #[test]
    fn prefix_box_sums_match_brute_force() {
        let dims = vec![3usize, 4, 5];
        let n: usize = dims.iter().product();
        let values: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let table = PrefixTable::build(&values, &dims);
        let strides = row_major_strides(&dims);
        let brute = |lo: &[usize], hi: &[usize]| {
            let mut acc = 0.0;
            for a in lo[0]..=hi[0] {
                for b in lo[1]..=hi[1] {
                    for c in lo[2]..=hi[2] {
                        acc += values[a * strides[0] + b * strides[1] + c * strides[2]];
                    }
                }
            }
            acc
        };
        for (lo, hi) in [
            (vec![0, 0, 0], vec![2, 3, 4]),
            (vec![1, 1, 1], vec![1, 2, 3]),
            (vec![0, 2, 4], vec![2, 3, 4]),
        ] {
            let got = table.box_sum(&lo, &hi);
            let want = brute(&lo, &hi);
            assert!((got - want).abs() < 1e-12, "{lo:?}..{hi:?}");
        }
    }

    #[test]
    fn diff_array_resolves_box_adds() {
        let dims = vec![4usize, 4];
        let mut data = vec![0.0; 16];
        diff_add(&mut data, &dims, &[1, 1], &[2, 3], 2.0);
        diff_add(&mut data, &dims, &[0, 0], &[3, 3], 1.0);
        diff_resolve(&mut data, &dims);
        let strides = row_major_strides(&dims);
        for a in 0..4 {
            for b in 0..4 {
                let want = 1.0 + if (1..=2).contains(&a) && (1..=3).contains(&b) { 2.0 } else { 0.0 };
                assert_eq!(data[a * strides[0] + b * strides[1]], want);
            }
        }
    }

    #[test]
    fn box_subtraction_disjoint_and_exact() {
        let big = CellBox::new(vec![0, 0], vec![7, 7]);
        let cut = CellBox::new(vec![2, 2], vec![5, 5]);
        let rest = subtract_box(vec![big.clone()], &cut);
        let total: u128 = rest.iter().map(|b| b.cell_count()).sum();
        assert_eq!(total, 64 - 16);
        for (i, a) in rest.iter().enumerate() {
            assert!(a.intersect(&cut).is_none());
            for b in rest.iter().skip(i + 1) {
                assert!(a.intersect(b).is_none());
            }
        }
    }

    #[test]
    fn indicator_of_subcube() {
        let w = Window::with_radius_int(0, 3, 1).unwrap();
        let mesh = Mesh::from_window(GridId::standard(1), &w, 3).unwrap();
        let cube = DyadicCube::standard(1, vec![1]).unwrap();
        let f = TestFunction::indicator(mesh, &cube).unwrap();
        let total: f64 = f.values.iter().sum();
        assert_eq!(total, 4.0); // [1/2,1) is 4 cells of width 1/8
    }
}

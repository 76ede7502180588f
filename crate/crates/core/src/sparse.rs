//! Sparse families, kernel maps, the multilinear form, the positive sparse
//! operator, and the weighted dyadic maximal operator.
//!
//! Exceptional sets are stored as unions of disjoint cell-index boxes at a
//! fixed mesh level, so disjointness is an exact integer check and measures
//! are computable for any weight. The assignment rule subtracts every
//! strictly smaller family member from a cube; for a nested tower each cube
//! keeps its outer half, and a complete dyadic tree certifies sparseness 0.

use crate::dyadic::{DyadicCube, DyadicError, GridId, Window};
use crate::mesh::{
    diff_add, diff_resolve, subtract_box, CellBox, Mesh, MeshError, PrefixTable, TestFunction,
};
use crate::weights::{Weight, WeightError};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("family cubes must come from a single shifted grid")]
    MixedGrids,
    #[error("mesh level {mesh} is coarser than the finest cube level {cube}")]
    MeshTooCoarse { mesh: i32, cube: i32 },
    #[error("kernel has no tabulated value for cube {0}")]
    TabulatedMiss(DyadicCube),
    #[error("kernel parameters out of range: {0}")]
    BadKernel(String),
    #[error("slot count mismatch: kernel arity {arity}, weights {weights}, functions {functions}")]
    SlotMismatch {
        arity: usize,
        weights: usize,
        functions: usize,
    },
    #[error("test function grid does not match the family grid")]
    WindowMismatch,
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// The map `K` from cubes to nonnegative kernel values.
#[derive(Debug, Clone)]
pub enum KernelMap {
    /// `K(S) = side^(alpha - (n-1) d)`, the fractional-integral scaling.
    RieszType { alpha: f64, arity: usize, dim: usize },
    /// `K(S) = min((lambda * side)^alpha, 1) / (lambda^alpha |S|^(n-1))`.
    BesselType {
        alpha: f64,
        lambda: f64,
        arity: usize,
        dim: usize,
    },
    Tabulated(HashMap<DyadicCube, f64>),
}

impl KernelMap {
    pub fn riesz(alpha: f64, arity: usize, dim: usize) -> Result<Self, SparseError> {
        let cap = (arity as f64 - 1.0) * dim as f64;
        if arity < 2 || !(alpha > 0.0 && alpha <= cap) {
            return Err(SparseError::BadKernel(format!(
                "riesz needs n >= 2 and 0 < alpha <= (n-1)d, got alpha={alpha}, n={arity}, d={dim}"
            )));
        }
        Ok(KernelMap::RieszType { alpha, arity, dim })
    }

    pub fn bessel(alpha: f64, lambda: f64, arity: usize, dim: usize) -> Result<Self, SparseError> {
        let cap = (arity as f64 - 1.0) * dim as f64;
        if arity < 2 || !(alpha > 0.0 && alpha <= cap) || !(lambda > 0.0) {
            return Err(SparseError::BadKernel(format!(
                "bessel needs n >= 2, 0 < alpha <= (n-1)d and lambda > 0, got alpha={alpha}, lambda={lambda}, n={arity}, d={dim}"
            )));
        }
        Ok(KernelMap::BesselType {
            alpha,
            lambda,
            arity,
            dim,
        })
    }

    pub fn tabulated(map: HashMap<DyadicCube, f64>) -> Self {
        KernelMap::Tabulated(map)
    }

    /// Kernel value at a cube; the side length enters exactly before any
    /// floating-point exponentiation.
    pub fn value(&self, cube: &DyadicCube) -> Result<f64, SparseError> {
        match self {
            KernelMap::RieszType { alpha, arity, dim } => {
                let e = alpha - (*arity as f64 - 1.0) * *dim as f64;
                Ok((-(cube.level() as f64) * e).exp2())
            }
            KernelMap::BesselType {
                alpha,
                lambda,
                arity,
                dim,
            } => {
                let side = cube.side_f64();
                let min_part = ((lambda * side).powf(*alpha)).min(1.0);
                let vol_pow = (-(cube.level() as f64) * *dim as f64 * (*arity as f64 - 1.0)).exp2();
                Ok(min_part / (lambda.powf(*alpha) * vol_pow))
            }
            KernelMap::Tabulated(map) => map
                .get(cube)
                .copied()
                .ok_or_else(|| SparseError::TabulatedMiss(cube.clone())),
        }
    }
}

/// A finite cube family with assigned pairwise-disjoint exceptional sets
/// and a certified sparseness constant.
#[derive(Debug, Clone)]
pub struct SparseFamily {
    cubes: Vec<DyadicCube>,
    esets: Vec<Vec<CellBox>>,
    mesh_level: i32,
    eta: f64,
}

/// Outcome of a sparseness certificate check.
#[derive(Debug, Clone)]
pub struct SparseCheck {
    pub holds: bool,
    pub eta: f64,
    pub witness: Option<SparseWitness>,
}

#[derive(Debug, Clone)]
pub enum SparseWitness {
    /// An exceptional set escapes its cube.
    Escapes(DyadicCube),
    /// Two exceptional sets overlap.
    Overlap(DyadicCube, DyadicCube),
    /// `|E(S)| < claim * |S|`.
    Deficient { cube: DyadicCube, ratio: f64 },
}

impl SparseFamily {
    /// Unchecked constructor (used by file loading and tests); use
    /// [`verify_sparse`] to certify the invariants.
    pub fn from_parts(
        cubes: Vec<DyadicCube>,
        esets: Vec<Vec<CellBox>>,
        mesh_level: i32,
        eta: f64,
    ) -> Self {
        SparseFamily {
            cubes,
            esets,
            mesh_level,
            eta,
        }
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn eset(&self, i: usize) -> &[CellBox] {
        &self.esets[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DyadicCube, &Vec<CellBox>)> {
        self.cubes.iter().zip(self.esets.iter())
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn mesh_level(&self) -> i32 {
        self.mesh_level
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.cubes.first().map(|c| c.dim()).unwrap_or(1)
    }

    pub fn grid(&self) -> GridId {
        self.cubes
            .first()
            .map(|c| c.grid())
            .unwrap_or_else(|| GridId::standard(1))
    }

    /// Lebesgue measure of the exceptional set of cube `i`.
    pub fn eset_volume(&self, i: usize) -> f64 {
        let cells: u128 = self.esets[i].iter().map(|b| b.cell_count()).sum();
        let d = self.dim() as f64;
        cells as f64 * (-(self.mesh_level as f64) * d).exp2()
    }

    /// Restrict to the cubes with level at most `k_max`, keeping the
    /// assigned exceptional sets.
    pub fn truncate_levels(&self, k_max: i32) -> SparseFamily {
        let mut cubes = Vec::new();
        let mut esets = Vec::new();
        for (c, e) in self.iter() {
            if c.level() <= k_max {
                cubes.push(c.clone());
                esets.push(e.clone());
            }
        }
        SparseFamily {
            cubes,
            esets,
            mesh_level: self.mesh_level,
            eta: self.eta,
        }
    }

    /// Index of a cube in the family, if present.
    pub fn position(&self, cube: &DyadicCube) -> Option<usize> {
        self.cubes.iter().position(|c| c == cube)
    }
}

/// Assign exceptional sets: `E(S) = S minus the union of all strictly
/// smaller family members`, realized as cell boxes at `mesh_level`.
/// The certified constant is `min |E(S)| / |S|` (zero if some set is
/// empty). Duplicate cubes are collapsed; the input order is preserved and
/// the assignment rule is order-independent, so the result is
/// deterministic.
pub fn assign_esets(cubes: &[DyadicCube], mesh_level: i32) -> Result<SparseFamily, SparseError> {
    let mut unique: Vec<DyadicCube> = Vec::with_capacity(cubes.len());
    {
        let mut seen = std::collections::HashSet::new();
        for c in cubes {
            if seen.insert(c.clone()) {
                unique.push(c.clone());
            }
        }
    }
    if unique.is_empty() {
        return Ok(SparseFamily {
            cubes: Vec::new(),
            esets: Vec::new(),
            mesh_level,
            eta: 1.0,
        });
    }
    let grid = unique[0].grid();
    let dim = unique[0].dim();
    for c in &unique {
        if c.grid() != grid || c.dim() != dim {
            return Err(SparseError::MixedGrids);
        }
        if c.level() > mesh_level {
            return Err(SparseError::MeshTooCoarse {
                mesh: mesh_level,
                cube: c.level(),
            });
        }
    }
    let boxes: Vec<CellBox> = unique
        .iter()
        .map(|c| {
            let (lo, hi) = c.descendant_range(mesh_level)?;
            Ok(CellBox::new(lo, hi))
        })
        .collect::<Result<_, DyadicError>>()?;
    let mut esets = Vec::with_capacity(unique.len());
    let mut eta = 1.0f64;
    for (i, s) in unique.iter().enumerate() {
        let mut pieces = vec![boxes[i].clone()];
        for (j, other) in unique.iter().enumerate() {
            if i == j || other.level() < s.level() {
                continue;
            }
            if s.contains_cube(other)? && other != s {
                pieces = subtract_box(pieces, &boxes[j]);
                if pieces.is_empty() {
                    break;
                }
            }
        }
        let kept: u128 = pieces.iter().map(|b| b.cell_count()).sum();
        let total = boxes[i].cell_count();
        eta = eta.min(kept as f64 / total as f64);
        esets.push(pieces);
    }
    Ok(SparseFamily {
        cubes: unique,
        esets,
        mesh_level,
        eta,
    })
}

/// Certify the three sparseness invariants against a claimed constant.
/// Failure is a return value carrying a witness, not an error.
pub fn verify_sparse(fam: &SparseFamily, eta_claim: f64) -> SparseCheck {
    let mut eta = 1.0f64;
    for (i, cube) in fam.cubes.iter().enumerate() {
        let (lo, hi) = match cube.descendant_range(fam.mesh_level) {
            Ok(r) => r,
            Err(_) => {
                return SparseCheck {
                    holds: false,
                    eta: 0.0,
                    witness: Some(SparseWitness::Escapes(cube.clone())),
                }
            }
        };
        let cube_box = CellBox::new(lo, hi);
        let mut kept: u128 = 0;
        for b in &fam.esets[i] {
            if !cube_box.contains_box(b) {
                return SparseCheck {
                    holds: false,
                    eta: 0.0,
                    witness: Some(SparseWitness::Escapes(cube.clone())),
                };
            }
            kept += b.cell_count();
        }
        let ratio = kept as f64 / cube_box.cell_count() as f64;
        if ratio < eta_claim {
            return SparseCheck {
                holds: false,
                eta: ratio,
                witness: Some(SparseWitness::Deficient {
                    cube: cube.clone(),
                    ratio,
                }),
            };
        }
        eta = eta.min(ratio);
    }
    for i in 0..fam.len() {
        for j in i + 1..fam.len() {
            for a in &fam.esets[i] {
                for b in &fam.esets[j] {
                    if a.intersect(b).is_some() {
                        return SparseCheck {
                            holds: false,
                            eta,
                            witness: Some(SparseWitness::Overlap(
                                fam.cubes[i].clone(),
                                fam.cubes[j].clone(),
                            )),
                        };
                    }
                }
            }
        }
    }
    SparseCheck {
        holds: true,
        eta,
        witness: None,
    }
}

/// Cell masses of one weight over one mesh, with a summed-area table for
/// box sums. Built once and shared across cubes and trials.
#[derive(Debug, Clone)]
pub struct CellMeasure {
    weight: Weight,
    mesh: Mesh,
    masses: Vec<f64>,
    prefix: PrefixTable,
}

impl CellMeasure {
    pub fn build(weight: &Weight, mesh: &Mesh, rel_tol: f64) -> Result<Self, SparseError> {
        let masses = weight.cell_masses(mesh, rel_tol)?;
        let prefix = PrefixTable::build(&masses, mesh.dims());
        Ok(CellMeasure {
            weight: weight.clone(),
            mesh: mesh.clone(),
            masses,
            prefix,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Total mass of a clipped absolute box.
    pub fn box_mass(&self, b: &CellBox) -> f64 {
        let Some(clipped) = self.mesh.clip(b) else {
            return 0.0;
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
        self.prefix.box_sum(&lo, &hi)
    }
}

/// Integrals of `f dsigma` over cubes, for a fixed `(f, sigma)` pair on the
/// function's mesh. Handles both cubes made of whole cells and cubes lying
/// inside a single cell, where the piecewise-constant value multiplies the
/// exact cube measure.
pub struct WeightedIntegrand<'a> {
    f: &'a TestFunction,
    measure: &'a CellMeasure,
    fm_prefix: PrefixTable,
    rel_tol: f64,
}

impl<'a> WeightedIntegrand<'a> {
    pub fn new(
        f: &'a TestFunction,
        measure: &'a CellMeasure,
        rel_tol: f64,
    ) -> Result<Self, SparseError> {
        if f.mesh != *measure.mesh() {
            return Err(SparseError::WindowMismatch);
        }
        let weighted: Vec<f64> = f
            .values
            .iter()
            .zip(measure.masses())
            .map(|(v, m)| v * m)
            .collect();
        let fm_prefix = PrefixTable::build(&weighted, f.mesh.dims());
        Ok(WeightedIntegrand {
            f,
            measure,
            fm_prefix,
            rel_tol,
        })
    }

    /// `integral over S of f dsigma`, zero outside the mesh window.
    pub fn over_cube(&self, cube: &DyadicCube) -> Result<f64, SparseError> {
        let mesh = &self.f.mesh;
        if cube.grid() != *mesh.grid() {
            return Err(SparseError::WindowMismatch);
        }
        if cube.level() <= mesh.level() {
            let (lo, hi) = cube.descendant_range(mesh.level())?;
            let Some(clipped) = mesh.clip(&CellBox::new(lo, hi)) else {
                return Ok(0.0);
            };
            let lo: Vec<usize> = clipped
                .lo
                .iter()
                .zip(&mesh.bounds().lo)
                .map(|(&x, &l)| (x - l) as usize)
                .collect();
            let hi: Vec<usize> = clipped
                .hi
                .iter()
                .zip(&mesh.bounds().lo)
                .map(|(&x, &l)| (x - l) as usize)
                .collect();
            Ok(self.fm_prefix.box_sum(&lo, &hi))
        } else {
            // the cube sits inside one cell of the mesh
            let anc = cube.ancestor(mesh.level())?;
            match mesh.flat(anc.index()) {
                None => Ok(0.0),
                Some(flat) => {
                    let v = self.f.values[flat];
                    if v == 0.0 {
                        Ok(0.0)
                    } else {
                        Ok(v * self.measure.weight().integrate(cube, self.rel_tol)?)
                    }
                }
            }
        }
    }
}

/// `sum over S of K(S) * prod_i integral_S f_i dsigma_i` over the finite
/// family.
pub fn multilinear_form(
    fam: &SparseFamily,
    kernel: &KernelMap,
    sigmas: &[Weight],
    fns: &[TestFunction],
    rel_tol: f64,
) -> Result<f64, SparseError> {
    check_slots(kernel, sigmas.len(), fns.len())?;
    let measures: Vec<CellMeasure> = sigmas
        .iter()
        .zip(fns)
        .map(|(w, f)| CellMeasure::build(w, &f.mesh, rel_tol))
        .collect::<Result<_, _>>()?;
    let integrands: Vec<WeightedIntegrand> = fns
        .iter()
        .zip(&measures)
        .map(|(f, m)| WeightedIntegrand::new(f, m, rel_tol))
        .collect::<Result<_, _>>()?;
    multilinear_form_with(fam, kernel, &integrands)
}

/// Same as [`multilinear_form`] with prebuilt integrands, for reuse across
/// many evaluations on fixed meshes.
pub fn multilinear_form_with(
    fam: &SparseFamily,
    kernel: &KernelMap,
    integrands: &[WeightedIntegrand],
) -> Result<f64, SparseError> {
    let mut total = 0.0;
    let mut comp = 0.0; // Kahan correction
    for cube in fam.cubes() {
        let mut term = kernel.value(cube)?;
        if term == 0.0 {
            continue;
        }
        for wi in integrands {
            term *= wi.over_cube(cube)?;
            if term == 0.0 {
                break;
            }
        }
        let y = term - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    Ok(total)
}

fn check_slots(kernel: &KernelMap, weights: usize, functions: usize) -> Result<(), SparseError> {
    if weights != functions {
        return Err(SparseError::SlotMismatch {
            arity: 0,
            weights,
            functions,
        });
    }
    Ok(match kernel {
        KernelMap::RieszType { arity, .. } | KernelMap::BesselType { arity, .. } => {
            if weights != *arity && weights + 1 != *arity {
                return Err(SparseError::SlotMismatch {
                    arity: *arity,
                    weights,
                    functions,
                });
            }
        }
        KernelMap::Tabulated(_) => {}
    })
}

/// The positive sparse operator applied to `n-1` weighted slots, returned
/// as cell values on the finest-level mesh of `window` over the family's
/// grid. Requires the mesh to resolve every family cube.
pub fn sparse_operator_apply(
    fam: &SparseFamily,
    kernel: &KernelMap,
    sigmas: &[Weight],
    fns: &[TestFunction],
    window: &Window,
    rel_tol: f64,
) -> Result<TestFunction, SparseError> {
    check_slots(kernel, sigmas.len(), fns.len())?;
    let out_mesh = Mesh::from_window(fam.grid(), window, window.k_max)?;
    let measures: Vec<CellMeasure> = sigmas
        .iter()
        .zip(fns)
        .map(|(w, f)| CellMeasure::build(w, &f.mesh, rel_tol))
        .collect::<Result<_, _>>()?;
    let integrands: Vec<WeightedIntegrand> = fns
        .iter()
        .zip(&measures)
        .map(|(f, m)| WeightedIntegrand::new(f, m, rel_tol))
        .collect::<Result<_, _>>()?;
    sparse_operator_apply_with(fam, kernel, &integrands, out_mesh)
}

/// Same as [`sparse_operator_apply`] with prebuilt integrands and output
/// mesh, for reuse across many evaluations on fixed meshes.
pub fn sparse_operator_apply_with(
    fam: &SparseFamily,
    kernel: &KernelMap,
    integrands: &[WeightedIntegrand],
    out_mesh: Mesh,
) -> Result<TestFunction, SparseError> {
    for cube in fam.cubes() {
        if cube.level() > out_mesh.level() {
            return Err(SparseError::MeshTooCoarse {
                mesh: out_mesh.level(),
                cube: cube.level(),
            });
        }
    }
    let dims = out_mesh.dims().to_vec();
    let mut data = vec![0.0; out_mesh.len()];
    for cube in fam.cubes() {
        let mut coeff = kernel.value(cube)?;
        if coeff == 0.0 {
            continue;
        }
        for wi in integrands {
            coeff *= wi.over_cube(cube)?;
            if coeff == 0.0 {
                break;
            }
        }
        if coeff == 0.0 {
            continue;
        }
        let (lo, hi) = cube.descendant_range(out_mesh.level())?;
        let Some(clipped) = out_mesh.clip(&CellBox::new(lo, hi)) else {
            continue;
        };
        let lo: Vec<usize> = clipped
            .lo
            .iter()
            .zip(&out_mesh.bounds().lo)
            .map(|(&x, &l)| (x - l) as usize)
            .collect();
        let hi: Vec<usize> = clipped
            .hi
            .iter()
            .zip(&out_mesh.bounds().lo)
            .map(|(&x, &l)| (x - l) as usize)
            .collect();
        diff_add(&mut data, &dims, &lo, &hi, coeff);
    }
    diff_resolve(&mut data, &dims);
    TestFunction::from_values(out_mesh, data).map_err(Into::into)
}

/// Windowed weighted dyadic maximal function on the mesh of `f`: per cell,
/// the largest sigma-average of `f` over the grid cubes containing the
/// cell with levels in `[window.k_min, mesh level]` that meet the window.
/// Cubes of vanishing sigma-mass are skipped.
pub fn weighted_maximal(
    sigma: &Weight,
    f: &TestFunction,
    window: &Window,
    rel_tol: f64,
) -> Result<TestFunction, SparseError> {
    let mesh = &f.mesh;
    let measure = CellMeasure::build(sigma, mesh, rel_tol)?;
    let weighted = WeightedIntegrand::new(f, &measure, rel_tol)?;
    let grid = mesh.grid().clone();
    let mut running: Option<(Mesh, Vec<f64>)> = None;
    let start = window.k_min.min(mesh.level());
    for k in start..=mesh.level() {
        let level_mesh = Mesh::from_window(grid.clone(), window, k)?;
        let mut vals = vec![f64::NEG_INFINITY; level_mesh.len()];
        for flat in 0..level_mesh.len() {
            let cube = level_mesh.cell(flat);
            let mass = measure.box_mass(&{
                let (lo, hi) = cube.descendant_range(mesh.level())?;
                CellBox::new(lo, hi)
            });
            let mut best = if mass > 0.0 {
                weighted.over_cube(&cube)? / mass
            } else {
                f64::NEG_INFINITY
            };
            if k > start {
                if let Some((ref pmesh, ref pvals)) = running {
                    let parent = cube.ancestor(k - 1)?;
                    if let Some(pflat) = pmesh.flat(parent.index()) {
                        best = best.max(pvals[pflat]);
                    }
                }
            }
            vals[flat] = best;
        }
        running = Some((level_mesh, vals));
    }
    let (last_mesh, last_vals) = running.expect("at least one level");
    let mut out = TestFunction::zeros(mesh.clone());
    for flat in 0..mesh.len() {
        let idx = mesh.unflat(flat);
        let v = last_mesh
            .flat(&idx)
            .map(|p| last_vals[p])
            .unwrap_or(f64::NEG_INFINITY);
        out.values[flat] = if v.is_finite() { v.max(0.0) } else { 0.0 };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// family and test-function file formats

impl fmt::Display for SparseFamily {
    /// Header `eta=..; tau=..; mesh=..`, then one cube per line with its
    /// exceptional set as `lo..hi` index ranges per axis.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eta={}; tau={}; mesh={}", self.eta, self.grid(), self.mesh_level)?;
        for (cube, eset) in self.iter() {
            write!(f, "{cube} | E:")?;
            for (i, b) in eset.iter().enumerate() {
                if i > 0 {
                    write!(f, ";")?;
                }
                write!(f, " ")?;
                for (j, (lo, hi)) in b.lo.iter().zip(&b.hi).enumerate() {
                    if j > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{lo}..{hi}")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for SparseFamily {
    type Err = SparseError;

    fn from_str(text: &str) -> Result<Self, SparseError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SparseError::Parse("empty family file".into()))?;
        let mut eta = None;
        let mut mesh_level = None;
        for part in header.split(';') {
            let part = part.trim();
            if let Some(v) = part.strip_prefix("eta=") {
                eta = Some(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| SparseError::Parse(format!("eta: {e}")))?,
                );
            } else if let Some(v) = part.strip_prefix("mesh=") {
                mesh_level = Some(
                    v.trim()
                        .parse::<i32>()
                        .map_err(|e| SparseError::Parse(format!("mesh: {e}")))?,
                );
            }
        }
        let (eta, mesh_level) = match (eta, mesh_level) {
            (Some(e), Some(m)) => (e, m),
            _ => return Err(SparseError::Parse("header needs eta= and mesh=".into())),
        };
        let mut cubes = Vec::new();
        let mut esets = Vec::new();
        for line in lines {
            let (cube_part, eset_part) = match line.split_once("| E:") {
                Some((c, e)) => (c, e),
                None => (line, ""),
            };
            let cube: DyadicCube = cube_part.trim().parse()?;
            let mut boxes = Vec::new();
            for chunk in eset_part.split(';') {
                let chunk = chunk.trim();
                if chunk.is_empty() {
                    continue;
                }
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for axis in chunk.split(',') {
                    let (a, b) = axis
                        .trim()
                        .split_once("..")
                        .ok_or_else(|| SparseError::Parse(format!("range `{axis}`")))?;
                    lo.push(
                        a.parse::<i64>()
                            .map_err(|e| SparseError::Parse(format!("range lo: {e}")))?,
                    );
                    hi.push(
                        b.parse::<i64>()
                            .map_err(|e| SparseError::Parse(format!("range hi: {e}")))?,
                    );
                }
                boxes.push(CellBox::new(lo, hi));
            }
            cubes.push(cube);
            esets.push(boxes);
        }
        Ok(SparseFamily::from_parts(cubes, esets, mesh_level, eta))
    }
}

/// Write a test function as CSV rows `m1,..,md,value` with a mesh header.
/// The header `tau` is the cell shift at the mesh level, as in the cube
/// literal form.
pub fn test_function_to_csv(f: &TestFunction) -> String {
    let mesh = &f.mesh;
    let shift = mesh.grid().shift_at_level(mesh.level());
    let mut out = format!(
        "# tau={}; level={}; lo={}; hi={}\n",
        shift
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
        mesh.level(),
        join_i64(&mesh.bounds().lo),
        join_i64(&mesh.bounds().hi)
    );
    for flat in 0..mesh.len() {
        let v = f.values[flat];
        if v != 0.0 {
            let idx = mesh.unflat(flat);
            out.push_str(&join_i64(&idx));
            out.push(',');
            out.push_str(&format!("{v}\n"));
        }
    }
    out
}

fn join_i64(v: &[i64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parse the CSV form written by [`test_function_to_csv`].
pub fn test_function_from_csv(text: &str) -> Result<TestFunction, SparseError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SparseError::Parse("empty test-function CSV".into()))?;
    let header = header.trim_start_matches('#').trim();
    let mut tau: Option<Vec<i8>> = None;
    let mut level = None;
    let mut lo: Option<Vec<i64>> = None;
    let mut hi: Option<Vec<i64>> = None;
    for part in header.split(';') {
        let part = part.trim();
        if let Some(v) = part.strip_prefix("tau=") {
            let vals: Result<Vec<i8>, _> = v.split(',').map(|t| t.trim().parse()).collect();
            tau = Some(vals.map_err(|e| SparseError::Parse(format!("tau: {e}")))?);
        } else if let Some(v) = part.strip_prefix("level=") {
            level = Some(
                v.trim()
                    .parse::<i32>()
                    .map_err(|e| SparseError::Parse(format!("level: {e}")))?,
            );
        } else if let Some(v) = part.strip_prefix("lo=") {
            let vals: Result<Vec<i64>, _> = v.split(',').map(|t| t.trim().parse()).collect();
            lo = Some(vals.map_err(|e| SparseError::Parse(format!("lo: {e}")))?);
        } else if let Some(v) = part.strip_prefix("hi=") {
            let vals: Result<Vec<i64>, _> = v.split(',').map(|t| t.trim().parse()).collect();
            hi = Some(vals.map_err(|e| SparseError::Parse(format!("hi: {e}")))?);
        }
    }
    let (tau, level, lo, hi) = match (tau, level, lo, hi) {
        (Some(t), Some(k), Some(l), Some(h)) => (t, k, l, h),
        _ => {
            return Err(SparseError::Parse(
                "test-function CSV header needs tau=, level=, lo=, hi=".into(),
            ))
        }
    };
    let grid = if level.rem_euclid(2) == 0 {
        GridId(tau)
    } else {
        GridId(tau.iter().map(|s| -s).collect())
    };
    let mesh = Mesh::from_bounds(grid, level, CellBox::new(lo, hi))?;
    let mut f = TestFunction::zeros(mesh);
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts: Vec<&str> = line.split(',').collect();
        let value: f64 = parts
            .pop()
            .ok_or_else(|| SparseError::Parse("short row".into()))?
            .trim()
            .parse()
            .map_err(|e| SparseError::Parse(format!("value: {e}")))?;
        let idx: Result<Vec<i64>, _> = parts.iter().map(|t| t.trim().parse()).collect();
        let idx = idx.map_err(|e| SparseError::Parse(format!("index: {e}")))?;
        let flat = f
            .mesh
            .flat(&idx)
            .ok_or_else(|| SparseError::Parse(format!("cell {idx:?} outside mesh")))?;
        f.values[flat] = value;
    }
    Ok(f)
}

//! Weight families and their cube measures.
//!
//! Analytic weights (`Lebesgue`, `|x|^beta`, `|x|^beta * max(|x|,1)^gamma`)
//! integrate in closed form in one dimension; in higher dimensions a
//! singularity-refined adaptive scheme is used, bisecting generic boxes and
//! peeling origin-cornered boxes with a closed-form spherical-sector bound
//! on the innermost shell. Grid-sampled weights are piecewise constant on
//! the cells of their mesh and integrate exactly by summed-area tables.
//!
//! Divergent supremum-type estimates (Muckenhoupt constants with a
//! non-integrable dual weight) are reported as infinite values rather than
//! errors.

use crate::dyadic::{DyadicCube, DyadicError, GridId};
use crate::mesh::{CellBox, Mesh, MeshError, PrefixTable, TestFunction};
use crate::quad::{adaptive_1d, adaptive_box, QuadError};
use crate::sparse::SparseFamily;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight |x|^{beta} is not locally integrable in dimension {dim} (needs beta > -d)")]
    NonIntegrablePower { beta: f64, dim: usize },
    #[error("modified power weight needs beta > -d and beta + gamma > -d (beta={beta}, gamma={gamma}, d={dim})")]
    NonIntegrableModified { beta: f64, gamma: f64, dim: usize },
    #[error("sampled weight values must be finite and nonnegative")]
    NegativeSample,
    #[error("dual weight diverges (zero sample values)")]
    DivergentDual,
    #[error("cube lies outside the sampled window")]
    OutsideSampledWindow,
    #[error("exponent {0} out of range")]
    BadExponent(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Grid-sampled weight: nonnegative piecewise-constant cell values.
#[derive(Debug, Clone)]
pub struct SampledWeight {
    mesh: Mesh,
    values: Arc<Vec<f64>>,
    prefix: Arc<PrefixTable>,
}

impl SampledWeight {
    fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self, WeightError> {
        if values.len() != mesh.len() {
            return Err(MeshError::BadLength {
                got: values.len(),
                want: mesh.len(),
            }
            .into());
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(WeightError::NegativeSample);
        }
        let cell_vol = mesh.cell_volume();
        let masses: Vec<f64> = values.iter().map(|v| v * cell_vol).collect();
        let prefix = PrefixTable::build(&masses, mesh.dims());
        Ok(SampledWeight {
            mesh,
            values: Arc::new(values),
            prefix: Arc::new(prefix),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mass of an absolute cell box; the box must lie inside the window.
    fn mass_of_box(&self, b: &CellBox) -> Result<f64, WeightError> {
        if !self.mesh.bounds().contains_box(b) {
            return Err(WeightError::OutsideSampledWindow);
        }
        let lo: Vec<usize> = b
            .lo
            .iter()
            .zip(&self.mesh.bounds().lo)
            .map(|(&x, &l)| (x - l) as usize)
            .collect();
        let hi: Vec<usize> = b
            .hi
            .iter()
            .zip(&self.mesh.bounds().lo)
            .map(|(&x, &l)| (x - l) as usize)
            .collect();
        Ok(self.prefix.box_sum(&lo, &hi))
    }
}

/// A weight: a nonnegative locally integrable density with computable cube
/// measures.
#[derive(Debug, Clone)]
pub enum Weight {
    Lebesgue,
    /// `|x|^beta`, `beta > -d`.
    Power { beta: f64 },
    /// `|x|^beta * max(|x|, 1)^gamma`, `beta > -d` and `beta + gamma > -d`.
    ModifiedPower { beta: f64, gamma: f64 },
    Sampled(SampledWeight),
}

impl Weight {
    pub fn lebesgue() -> Weight {
        Weight::Lebesgue
    }

    pub fn power(beta: f64, dim: usize) -> Result<Weight, WeightError> {
        if !beta.is_finite() || beta <= -(dim as f64) {
            return Err(WeightError::NonIntegrablePower { beta, dim });
        }
        if beta == 0.0 {
            return Ok(Weight::Lebesgue);
        }
        Ok(Weight::Power { beta })
    }

    pub fn modified_power(beta: f64, gamma: f64, dim: usize) -> Result<Weight, WeightError> {
        let d = dim as f64;
        if !beta.is_finite() || !gamma.is_finite() || beta <= -d || beta + gamma <= -d {
            return Err(WeightError::NonIntegrableModified { beta, gamma, dim });
        }
        if gamma == 0.0 {
            return Weight::power(beta, dim);
        }
        Ok(Weight::ModifiedPower { beta, gamma })
    }

    pub fn sampled(mesh: Mesh, values: Vec<f64>) -> Result<Weight, WeightError> {
        Ok(Weight::Sampled(SampledWeight::new(mesh, values)?))
    }

    /// The pointwise power `self^theta`.
    ///
    /// Power-family results are not revalidated: the power of an
    /// admissible weight may leave the locally integrable range, in which
    /// case its measure is infinite exactly on cubes meeting the origin.
    /// Sampled values are raised cellwise.
    pub fn pow_scale(&self, theta: f64, dim: usize) -> Result<Weight, WeightError> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(WeightError::BadExponent(theta));
        }
        let _ = dim;
        match self {
            Weight::Lebesgue => Ok(Weight::Lebesgue),
            Weight::Power { beta } => Ok(Weight::Power { beta: beta * theta }),
            Weight::ModifiedPower { beta, gamma } => Ok(Weight::ModifiedPower {
                beta: beta * theta,
                gamma: gamma * theta,
            }),
            Weight::Sampled(s) => Weight::sampled(
                s.mesh.clone(),
                s.values.iter().map(|v| v.powf(theta)).collect(),
            ),
        }
    }

    /// The dual weight `self^(-1/(p-1))`, not revalidated: its cube
    /// measures are infinite on cubes meeting the origin whenever the
    /// dual exponent leaves the admissible range.
    pub fn dual(&self, p: f64, dim: usize) -> Result<Weight, WeightError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(WeightError::BadExponent(p));
        }
        let e = -1.0 / (p - 1.0);
        let _ = dim;
        match self {
            Weight::Lebesgue => Ok(Weight::Lebesgue),
            Weight::Power { beta } => Ok(Weight::Power { beta: beta * e }),
            Weight::ModifiedPower { beta, gamma } => Ok(Weight::ModifiedPower {
                beta: beta * e,
                gamma: gamma * e,
            }),
            Weight::Sampled(s) => {
                if s.values.iter().any(|&v| v == 0.0) {
                    return Err(WeightError::DivergentDual);
                }
                Weight::sampled(s.mesh.clone(), s.values.iter().map(|v| v.powf(e)).collect())
            }
        }
    }

    /// Measure of a cube.
    pub fn integrate(&self, cube: &DyadicCube, rel_tol: f64) -> Result<f64, WeightError> {
        match self {
            Weight::Lebesgue => Ok(cube.volume_f64()),
            Weight::Power { beta } => {
                integrate_radial(&Radial::Power { beta: *beta }, &cube_rect(cube), rel_tol)
            }
            Weight::ModifiedPower { beta, gamma } => integrate_radial(
                &Radial::ModPower {
                    beta: *beta,
                    gamma: *gamma,
                },
                &cube_rect(cube),
                rel_tol,
            ),
            Weight::Sampled(s) => {
                if cube.grid() != *s.mesh.grid() {
                    return Err(MeshError::Mismatch.into());
                }
                if cube.level() > s.mesh.level() {
                    return Err(MeshError::FinerThanMesh {
                        cube: cube.level(),
                        mesh: s.mesh.level(),
                    }
                    .into());
                }
                let (lo, hi) = cube.descendant_range(s.mesh.level())?;
                s.mass_of_box(&CellBox::new(lo, hi))
            }
        }
    }

    /// Measure of a union-of-cells box at `level` of `grid`.
    pub fn integrate_cells(
        &self,
        grid: &GridId,
        level: i32,
        b: &CellBox,
        rel_tol: f64,
    ) -> Result<f64, WeightError> {
        if b.is_empty() {
            return Ok(0.0);
        }
        match self {
            Weight::Lebesgue => {
                let vol = (-(level as f64) * grid.dim() as f64).exp2();
                Ok(b.cell_count() as f64 * vol)
            }
            Weight::Power { beta } => integrate_radial(
                &Radial::Power { beta: *beta },
                &rect_of_cells(grid, level, b),
                rel_tol,
            ),
            Weight::ModifiedPower { beta, gamma } => integrate_radial(
                &Radial::ModPower {
                    beta: *beta,
                    gamma: *gamma,
                },
                &rect_of_cells(grid, level, b),
                rel_tol,
            ),
            Weight::Sampled(s) => {
                if grid != s.mesh.grid() {
                    return Err(MeshError::Mismatch.into());
                }
                if level > s.mesh.level() {
                    return Err(MeshError::FinerThanMesh {
                        cube: level,
                        mesh: s.mesh.level(),
                    }
                    .into());
                }
                let shift = grid.shift_at_level(level);
                let mut lo = Vec::with_capacity(b.dim());
                let mut hi = Vec::with_capacity(b.dim());
                for j in 0..b.dim() {
                    let cell_lo = DyadicCube::new(level, vec![b.lo[j]], vec![shift[j]])?;
                    let cell_hi = DyadicCube::new(level, vec![b.hi[j]], vec![shift[j]])?;
                    let (l, _) = cell_lo.descendant_range(s.mesh.level())?;
                    let (_, h) = cell_hi.descendant_range(s.mesh.level())?;
                    lo.push(l[0]);
                    hi.push(h[0]);
                }
                s.mass_of_box(&CellBox::new(lo, hi))
            }
        }
    }

    /// Per-cell masses over a mesh.
    pub fn cell_masses(&self, mesh: &Mesh, rel_tol: f64) -> Result<Vec<f64>, WeightError> {
        let n = mesh.len();
        match self {
            Weight::Lebesgue => Ok(vec![mesh.cell_volume(); n]),
            Weight::Sampled(s) => {
                if s.mesh == *mesh {
                    let vol = mesh.cell_volume();
                    return Ok(s.values.iter().map(|v| v * vol).collect());
                }
                let mut out = Vec::with_capacity(n);
                for flat in 0..n {
                    let idx = mesh.unflat(flat);
                    let b = CellBox::new(idx.clone(), idx);
                    out.push(self.integrate_cells(mesh.grid(), mesh.level(), &b, rel_tol)?);
                }
                Ok(out)
            }
            _ => {
                use rayon::prelude::*;
                (0..n)
                    .into_par_iter()
                    .map(|flat| {
                        let idx = mesh.unflat(flat);
                        let b = CellBox::new(idx.clone(), idx);
                        self.integrate_cells(mesh.grid(), mesh.level(), &b, rel_tol)
                    })
                    .collect()
            }
        }
    }

    /// Literal text form, inverse of [`parse_weight`].
    pub fn literal(&self) -> String {
        match self {
            Weight::Lebesgue => "lebesgue".into(),
            Weight::Power { beta } => format!("power:beta={beta}"),
            Weight::ModifiedPower { beta, gamma } => {
                format!("modpower:beta={beta},gamma={gamma}")
            }
            Weight::Sampled(_) => "sampled:<inline>".into(),
        }
    }
}

/// Parse the weight literal forms: `lebesgue`, `power:beta=..`,
/// `modpower:beta=..,gamma=..`, `theta:<inner>,theta=..`.
/// The `sampled:<path>` form is handled by callers that can do I/O.
pub fn parse_weight(text: &str, dim: usize) -> Result<Weight, WeightError> {
    let t = text.trim();
    if t == "lebesgue" {
        return Ok(Weight::Lebesgue);
    }
    if let Some(rest) = t.strip_prefix("power:") {
        let beta = parse_kv(rest, "beta")?;
        return Weight::power(beta, dim);
    }
    if let Some(rest) = t.strip_prefix("modpower:") {
        let beta = parse_kv(rest, "beta")?;
        let gamma = parse_kv(rest, "gamma")?;
        return Weight::modified_power(beta, gamma, dim);
    }
    if let Some(rest) = t.strip_prefix("theta:") {
        let Some(pos) = rest.rfind(",theta=") else {
            return Err(WeightError::Parse("theta form needs ,theta=".into()));
        };
        let inner = parse_weight(&rest[..pos], dim)?;
        let theta: f64 = rest[pos + 7..]
            .trim()
            .parse()
            .map_err(|e| WeightError::Parse(format!("theta: {e}")))?;
        return inner.pow_scale(theta, dim);
    }
    Err(WeightError::Parse(format!("unknown weight literal `{t}`")))
}

fn parse_kv(rest: &str, key: &str) -> Result<f64, WeightError> {
    for part in rest.split(',') {
        let part = part.trim();
        if let Some(v) = part.strip_prefix(&format!("{key}=")) {
            return v
                .trim()
                .parse()
                .map_err(|e| WeightError::Parse(format!("{key}: {e}")));
        }
    }
    Err(WeightError::Parse(format!("missing {key}=")))
}

fn cube_rect(cube: &DyadicCube) -> Vec<(f64, f64)> {
    let corner = cube.corner_f64();
    let side = cube.side_f64();
    corner.into_iter().map(|a| (a, a + side)).collect()
}

fn rect_of_cells(grid: &GridId, level: i32, b: &CellBox) -> Vec<(f64, f64)> {
    let scale = (-level as f64).exp2();
    let shift = grid.shift_at_level(level);
    b.lo
        .iter()
        .zip(&b.hi)
        .zip(&shift)
        .map(|((&l, &h), &s)| {
            (
                (l as f64 + s as f64 / 3.0) * scale,
                ((h + 1) as f64 + s as f64 / 3.0) * scale,
            )
        })
        .collect()
}

/// Radial densities with a single possible singularity at the origin.
enum Radial {
    Power { beta: f64 },
    ModPower { beta: f64, gamma: f64 },
}

impl Radial {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Radial::Power { beta } => r.powf(*beta),
            Radial::ModPower { beta, gamma } => r.powf(*beta) * r.max(1.0).powf(*gamma),
        }
    }

    fn origin_exponent(&self) -> f64 {
        match self {
            Radial::Power { beta } => *beta,
            Radial::ModPower { beta, .. } => *beta,
        }
    }

    /// Upper bound for the non-singular factor on `|x| <= rmax`.
    fn aux_sup(&self, rmax: f64) -> f64 {
        match self {
            Radial::Power { .. } => 1.0,
            Radial::ModPower { gamma, .. } => {
                if *gamma > 0.0 {
                    rmax.max(1.0).powf(*gamma)
                } else {
                    1.0
                }
            }
        }
    }
}

/// Surface measure of the unit sphere in dimension `d`.
fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0)
        / statrs::function::gamma::gamma(d as f64 / 2.0)
}

/// `integral of r^e dr` over `[a, b]`, `0 <= a < b`, in a
/// cancellation-safe form; infinite when the exponent is non-integrable
/// at a zero endpoint.
fn power_interval(a: f64, b: f64, e: f64) -> f64 {
    let ee = e + 1.0;
    if a == 0.0 {
        if ee <= 0.0 {
            return f64::INFINITY;
        }
        return b.powf(ee) / ee;
    }
    if ee == 0.0 {
        return ((b - a) / a).ln_1p();
    }
    a.powf(ee) * ((ee * ((b - a) / a).ln_1p()).exp_m1()) / ee
}

fn integrate_radial(g: &Radial, rect: &[(f64, f64)], rel_tol: f64) -> Result<f64, WeightError> {
    let d = rect.len();
    if d == 1 {
        return Ok(integrate_radial_1d(g, rect[0].0, rect[0].1));
    }
    // fold to nonnegative-orthant sub-rectangles (the integrand is even in
    // every coordinate)
    let mut parts: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
    for &(a, b) in rect {
        let pieces: Vec<(f64, f64)> = if b <= 0.0 {
            vec![(-b, -a)]
        } else if a >= 0.0 {
            vec![(a, b)]
        } else {
            vec![(0.0, -a), (0.0, b)]
        };
        let mut next = Vec::with_capacity(parts.len() * pieces.len());
        for p in &parts {
            for &pc in &pieces {
                let mut q = p.clone();
                q.push(pc);
                next.push(q);
            }
        }
        parts = next;
    }
    let mut total = 0.0;
    for p in parts {
        if p.iter().any(|&(a, b)| a >= b) {
            continue;
        }
        total += if d == 2 {
            polar_rect(g, p[0], p[1], rel_tol)?
        } else if p.iter().all(|&(a, _)| a == 0.0) {
            integrate_origin_cornered(g, &p, rel_tol)?
        } else {
            // the singularity is only at the origin, which needs every
            // coordinate interval to start at zero
            smooth_box(g, &p, rel_tol)?
        };
    }
    Ok(total)
}

/// `integral of g(r) r dr` over `[r_in, r_out]`, closed form and
/// cancellation-safe (the planar radial shell mass over one angle).
fn shell_mass(g: &Radial, r_in: f64, r_out: f64) -> f64 {
    if r_out <= r_in {
        return 0.0;
    }
    match g {
        Radial::Power { beta } => power_interval(r_in, r_out, beta + 1.0),
        Radial::ModPower { beta, gamma } => {
            let mut acc = 0.0;
            if r_in < 1.0 {
                acc += power_interval(r_in, r_out.min(1.0), beta + 1.0);
            }
            if r_out > 1.0 {
                acc += power_interval(r_in.max(1.0), r_out, beta + gamma + 1.0);
            }
            acc
        }
    }
}

/// Planar rectangle integral in polar form: the rectangle (nonnegative
/// quadrant) becomes a 1-d integral over the angle of closed-form shell
/// masses between the ray's entry and exit radii. The angle axis is split
/// at rectangle-vertex angles and at unit-circle crossings, so every piece
/// has an analytic integrand.
fn polar_rect(g: &Radial, x: (f64, f64), y: (f64, f64), rel_tol: f64) -> Result<f64, WeightError> {
    let (a1, b1) = x;
    let (a2, b2) = y;
    debug_assert!(a1 >= 0.0 && a2 >= 0.0 && a1 < b1 && a2 < b2);
    if a1 == 0.0 && a2 == 0.0 && g.origin_exponent() + 2.0 <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let theta_lo = a2.atan2(b1);
    let theta_hi = b2.atan2(a1);
    let mut cuts = vec![theta_lo, theta_hi, a2.atan2(a1), b2.atan2(b1)];
    if matches!(g, Radial::ModPower { .. }) {
        for v in [a1, b1] {
            if v > 0.0 && v < 1.0 {
                cuts.push(v.acos());
            }
        }
        for v in [a2, b2] {
            if v > 0.0 && v < 1.0 {
                cuts.push(v.asin());
            }
        }
    }
    cuts.retain(|t| *t >= theta_lo && *t <= theta_hi);
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
    let integrand = |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        let mut r_in: f64 = 0.0;
        if a1 > 0.0 {
            r_in = r_in.max(a1 / cos);
        }
        if a2 > 0.0 {
            r_in = r_in.max(a2 / sin);
        }
        let rx = if cos > 0.0 { b1 / cos } else { f64::INFINITY };
        let ry = if sin > 0.0 { b2 / sin } else { f64::INFINITY };
        shell_mass(g, r_in, rx.min(ry))
    };
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        if pair[1] > pair[0] {
            total += adaptive_1d(&integrand, pair[0], pair[1], rel_tol)?;
        }
    }
    Ok(total)
}

fn integrate_radial_1d(g: &Radial, a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a < 0.0 {
        let mut acc = if b <= 0.0 {
            integrate_radial_1d_nonneg(g, -b, -a)
        } else {
            integrate_radial_1d_nonneg(g, 0.0, -a)
        };
        if b > 0.0 {
            acc += integrate_radial_1d_nonneg(g, 0.0, b);
        }
        return acc;
    }
    integrate_radial_1d_nonneg(g, a, b)
}

fn integrate_radial_1d_nonneg(g: &Radial, a: f64, b: f64) -> f64 {
    match g {
        Radial::Power { beta } => power_interval(a, b, *beta),
        Radial::ModPower { beta, gamma } => {
            let mut acc = 0.0;
            if a < 1.0 {
                acc += power_interval(a, b.min(1.0), *beta);
            }
            if b > 1.0 {
                acc += power_interval(a.max(1.0), b, *beta + *gamma);
            }
            acc
        }
    }
}

fn smooth_box(g: &Radial, rect: &[(f64, f64)], rel_tol: f64) -> Result<f64, WeightError> {
    let f = |x: &[f64]| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        g.eval(r)
    };
    Ok(adaptive_box(&f, rect, rel_tol)?)
}

/// Origin-cornered boxes: peel dyadic shells toward the corner; the
/// innermost shell is controlled by the closed-form spherical-sector bound
/// `(area / 2^d) * R^(beta+d) / (beta+d) * sup(aux)`.
fn integrate_origin_cornered(
    g: &Radial,
    rect: &[(f64, f64)],
    rel_tol: f64,
) -> Result<f64, WeightError> {
    let d = rect.len();
    let beta = g.origin_exponent();
    if beta + d as f64 <= 0.0 {
        return Ok(f64::INFINITY);
    }
    debug_assert!(rect.iter().all(|&(a, _)| a == 0.0));
    let mut hi: Vec<f64> = rect.iter().map(|&(_, b)| b).collect();
    let mut total = 0.0;
    let sector = sphere_area(d) / (1u32 << d) as f64;
    for _ in 0..100_000 {
        let mid: Vec<f64> = hi.iter().map(|&b| 0.5 * b).collect();
        for bits in 1..(1u32 << d) {
            let sub: Vec<(f64, f64)> = (0..d)
                .map(|j| {
                    if (bits >> j) & 1 == 0 {
                        (0.0, mid[j])
                    } else {
                        (mid[j], hi[j])
                    }
                })
                .collect();
            total += smooth_box(g, &sub, rel_tol)?;
        }
        hi = mid;
        let rmax = hi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = sector * rmax.powf(beta + d as f64) / (beta + d as f64) * g.aux_sup(rmax);
        if bound <= rel_tol * (total.abs() + bound) {
            return Ok(total);
        }
    }
    Err(QuadError::NoConvergence {
        tol: rel_tol,
        err: f64::NAN,
    }
    .into())
}

/// Comparability ratio of a power-weight cube measure against its
/// closed-form majorant `max(side, |center|)^beta * |Q|`.
pub fn power_comparability_ratio(
    beta: f64,
    cube: &DyadicCube,
    rel_tol: f64,
) -> Result<f64, WeightError> {
    let d = cube.dim();
    if beta <= -(d as f64) {
        return Err(WeightError::NonIntegrablePower { beta, dim: d });
    }
    let integral = integrate_radial(&Radial::Power { beta }, &cube_rect(cube), rel_tol)?;
    let scale = cube.side_f64().max(cube.center_norm_f64());
    let majorant = scale.powf(beta) * cube.volume_f64();
    Ok(integral / majorant)
}

/// A Muckenhoupt constant estimate over a finite cube family: a lower
/// bound for the true supremum, possibly infinite.
#[derive(Debug, Clone)]
pub struct ApEstimate {
    pub p: f64,
    pub value: f64,
    pub family_size: usize,
    pub attaining: Option<DyadicCube>,
}

impl ApEstimate {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `sup over the list of (avg_Q w) * (avg_Q w^(-1/(p-1)))^(p-1)`.
///
/// A divergent dual-weight integral reports an infinite estimate.
pub fn ap_constant(
    w: &Weight,
    p: f64,
    cubes: &[DyadicCube],
    rel_tol: f64,
) -> Result<ApEstimate, WeightError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(WeightError::BadExponent(p));
    }
    let dim = cubes.first().map(|c| c.dim()).unwrap_or(1);
    let dual = match w.dual(p, dim) {
        Ok(d) => d,
        Err(WeightError::DivergentDual) => {
            return Ok(ApEstimate {
                p,
                value: f64::INFINITY,
                family_size: cubes.len(),
                attaining: None,
            });
        }
        Err(e) => return Err(e),
    };
    let mut best = 1.0f64;
    let mut attaining = None;
    for cube in cubes {
        let vol = cube.volume_f64();
        let a = w.integrate(cube, rel_tol)? / vol;
        let b = dual.integrate(cube, rel_tol)? / vol;
        let v = a * b.powf(p - 1.0);
        if v > best {
            best = v;
            attaining = Some(cube.clone());
        }
    }
    Ok(ApEstimate {
        p,
        value: best,
        family_size: cubes.len(),
        attaining,
    })
}

/// Default surrogate exponent for qualitative `A_infinity` probes.
pub const A_INFINITY_PROXY_P: f64 = 64.0;

/// Finite surrogate for the `A_infinity` constant: the `A_p` estimate at a
/// configurable large `p`. The result is a labeled proxy, not the limit.
pub fn a_infinity_proxy(
    w: &Weight,
    cubes: &[DyadicCube],
    p: Option<f64>,
    rel_tol: f64,
) -> Result<ApEstimate, WeightError> {
    ap_constant(w, p.unwrap_or(A_INFINITY_PROXY_P), cubes, rel_tol)
}

/// `sup over the family of sigma(S) / sigma(E(S))`; infinite when some
/// exceptional set is sigma-null under a cube of positive sigma-measure.
pub fn eset_measure_ratio(
    sigma: &Weight,
    fam: &SparseFamily,
    rel_tol: f64,
) -> Result<f64, WeightError> {
    let mut sup: f64 = 1.0;
    let grid = fam.grid();
    for (cube, eset) in fam.iter() {
        let num = sigma.integrate(cube, rel_tol)?;
        if num == 0.0 {
            continue;
        }
        let mut den = 0.0;
        for b in eset {
            den += sigma.integrate_cells(&grid, fam.mesh_level(), b, rel_tol)?;
        }
        if den == 0.0 {
            return Ok(f64::INFINITY);
        }
        sup = sup.max(num / den);
    }
    Ok(sup)
}

/// Weighted `L^p` norm of a cellwise-constant function:
/// `(sum f(cell)^p * sigma(cell))^(1/p)`.
pub fn lp_norm(
    f: &TestFunction,
    sigma: &Weight,
    p: f64,
    rel_tol: f64,
) -> Result<f64, WeightError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(WeightError::BadExponent(p));
    }
    let masses = sigma.cell_masses(&f.mesh, rel_tol)?;
    let mut acc = 0.0;
    for (v, m) in f.values.iter().zip(&masses) {
        if *v != 0.0 {
            acc += v.powf(p) * m;
        }
    }
    Ok(acc.powf(1.0 / p))
}

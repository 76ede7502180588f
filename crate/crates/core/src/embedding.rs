//! Sufficient-condition constants for the multilinear embedding inequality
//! and their empirical verification.
//!
//! Four computable constants bound the form `sum_S K(S) prod_i int_S f_i
//! dsigma_i` by `A0 * prod ||f_i||_{L^{p_i}(sigma_i)}`:
//!
//! * `a0_sup` / `a0_sup_theta` — supremum variants for `sum 1/p_i >= 1`,
//!   plain or theta-averaged weight means;
//! * `a0_series` / `a0_series_theta` — `l^r`-type sums over the family
//!   weighted by exceptional-set measures, for `sum 1/p_i < 1` with
//!   `1/r = 1 - sum 1/p_i`.
//!
//! `verify_embedding` probes the inequality with random and structured
//! test functions over a dilation sweep; `extremize` runs alternating
//! slot-wise maximization, which is exactly monotone per accepted cycle.

use crate::dyadic::{DyadicCube, DyadicError};
use crate::mesh::{diff_add, diff_resolve, CellBox, Mesh, MeshError, TestFunction};
use crate::sparse::{
    multilinear_form_with, CellMeasure, KernelMap, SparseError, SparseFamily, WeightedIntegrand,
};
use crate::weights::{ap_constant, lp_norm, ApEstimate, Weight, WeightError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("operation requires sum 1/p_i >= 1, but the exponents satisfy sum 1/p_i = {0} < 1")]
    NeedsSumAtLeastOne(f64),
    #[error("operation requires sum 1/p_i < 1, but the exponents satisfy sum 1/p_i = {0} >= 1")]
    NeedsSumBelowOne(f64),
    #[error("exponents must lie in (1, infinity), got {0}")]
    BadExponent(f64),
    #[error("theta must exceed 1, got {0}")]
    BadTheta(f64),
    #[error("problem needs n >= 2 slots, got {0}")]
    BadArity(usize),
    #[error("slot count mismatch between exponents ({exponents}) and weights ({weights})")]
    SlotMismatch { exponents: usize, weights: usize },
    #[error("family has degenerate exceptional sets (eta = 0)")]
    DegenerateEsets,
    #[error("cube is not a member of the family")]
    NotInFamily,
    #[error("divergent weight power: {0}")]
    DivergentTheta(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}

/// Exponent regime of a problem, derived from `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// `sum 1/p_i >= 1`: supremum-type constants apply.
    SumAtLeastOne,
    /// `sum 1/p_i < 1`: series-type constants apply, with
    /// `1/r = 1 - sum 1/p_i`.
    SumBelowOne { r: f64 },
}

/// Bundle of dimension, multilinearity, exponents, weights, kernel and
/// family for one embedding instance.
#[derive(Debug, Clone)]
pub struct EmbeddingProblem {
    pub dim: usize,
    pub exponents: Vec<f64>,
    pub weights: Vec<Weight>,
    pub kernel: KernelMap,
    pub family: SparseFamily,
    /// Averaging exponent for the theta-variants; defaults to 2.
    pub theta: f64,
    /// Quadrature tolerance used in every weight integral.
    pub rel_tol: f64,
}

impl EmbeddingProblem {
    pub fn new(
        dim: usize,
        exponents: Vec<f64>,
        weights: Vec<Weight>,
        kernel: KernelMap,
        family: SparseFamily,
        theta: Option<f64>,
    ) -> Result<Self, EmbeddingError> {
        if exponents.len() < 2 {
            return Err(EmbeddingError::BadArity(exponents.len()));
        }
        if exponents.len() != weights.len() {
            return Err(EmbeddingError::SlotMismatch {
                exponents: exponents.len(),
                weights: weights.len(),
            });
        }
        for &p in &exponents {
            if !(p > 1.0 && p.is_finite()) {
                return Err(EmbeddingError::BadExponent(p));
            }
        }
        let theta = theta.unwrap_or(2.0);
        if !(theta > 1.0 && theta.is_finite()) {
            return Err(EmbeddingError::BadTheta(theta));
        }
        Ok(EmbeddingProblem {
            dim,
            exponents,
            weights,
            kernel,
            family,
            theta,
            rel_tol: 1e-10,
        })
    }

    pub fn arity(&self) -> usize {
        self.exponents.len()
    }

    /// Conjugate exponent of slot `i`.
    pub fn conj(&self, i: usize) -> f64 {
        let p = self.exponents[i];
        p / (p - 1.0)
    }

    pub fn sum_reciprocal(&self) -> f64 {
        self.exponents.iter().map(|p| 1.0 / p).sum()
    }

    pub fn regime(&self) -> Regime {
        let s = self.sum_reciprocal();
        if s >= 1.0 {
            Regime::SumAtLeastOne
        } else {
            Regime::SumBelowOne { r: 1.0 / (1.0 - s) }
        }
    }

    /// `n - sum 1/p_i = sum 1/p_i'`.
    fn volume_exponent(&self) -> f64 {
        self.arity() as f64 - self.sum_reciprocal()
    }

    /// The theta-powered weights, or a divergence report.
    fn theta_weights(&self) -> Result<Vec<Weight>, EmbeddingError> {
        self.weights
            .iter()
            .map(|w| w.pow_scale(self.theta, self.dim))
            .collect::<Result<_, _>>()
            .map_err(|e: WeightError| EmbeddingError::DivergentTheta(e.to_string()))
    }

    /// `prod_i (sigma_i(S)/|S|)^(1/p_i')` with the given weights.
    fn mean_product(&self, weights: &[Weight], cube: &DyadicCube, theta: f64) -> Result<f64, EmbeddingError> {
        let vol = cube.volume_f64();
        let mut prod = 1.0;
        for (i, w) in weights.iter().enumerate() {
            let avg = w.integrate(cube, self.rel_tol)? / vol;
            prod *= avg.powf(1.0 / (theta * self.conj(i)));
        }
        Ok(prod)
    }
}

/// A supremum-type constant with its attaining cube.
#[derive(Debug, Clone)]
pub struct SupResult {
    pub value: f64,
    pub attaining: Option<DyadicCube>,
}

/// A series-type constant with its partial sums in family order.
#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub value: f64,
    pub partial_sums: Vec<f64>,
}

/// `sup_S K(S) |S|^(n - sum 1/p_i) prod (sigma_i(S)/|S|)^(1/p_i')`,
/// for the `sum 1/p_i >= 1` regime.
pub fn a0_sup(prob: &EmbeddingProblem) -> Result<SupResult, EmbeddingError> {
    match prob.regime() {
        Regime::SumAtLeastOne => {}
        Regime::SumBelowOne { .. } => {
            return Err(EmbeddingError::NeedsSumAtLeastOne(prob.sum_reciprocal()))
        }
    }
    a0_sup_inner(prob, &prob.weights, 1.0)
}

/// Theta-averaged variant: `prod (sigma_i^theta(S)/|S|)^(1/(theta p_i'))`.
/// A non-integrable weight power reports an infinite value.
pub fn a0_sup_theta(prob: &EmbeddingProblem) -> Result<SupResult, EmbeddingError> {
    match prob.regime() {
        Regime::SumAtLeastOne => {}
        Regime::SumBelowOne { .. } => {
            return Err(EmbeddingError::NeedsSumAtLeastOne(prob.sum_reciprocal()))
        }
    }
    let tw = match prob.theta_weights() {
        Ok(tw) => tw,
        Err(EmbeddingError::DivergentTheta(_)) => {
            return Ok(SupResult {
                value: f64::INFINITY,
                attaining: None,
            })
        }
        Err(e) => return Err(e),
    };
    a0_sup_inner(prob, &tw, prob.theta)
}

fn a0_sup_inner(
    prob: &EmbeddingProblem,
    weights: &[Weight],
    theta: f64,
) -> Result<SupResult, EmbeddingError> {
    let e = prob.volume_exponent();
    let mut best = 0.0f64;
    let mut attaining = None;
    for cube in prob.family.cubes() {
        let v = prob.kernel.value(cube)?
            * cube.volume_f64().powf(e)
            * prob.mean_product(weights, cube, theta)?;
        if v > best {
            best = v;
            attaining = Some(cube.clone());
        }
    }
    Ok(SupResult {
        value: best,
        attaining,
    })
}

/// `[ sum_S ( K(S) |S|^(n-1) prod (sigma_i(S)/|S|)^(1/p_i') )^r |E(S)| ]^(1/r)`
/// for the `sum 1/p_i < 1` regime.
pub fn a0_series(prob: &EmbeddingProblem) -> Result<SeriesResult, EmbeddingError> {
    let r = series_regime(prob)?;
    a0_series_inner(prob, &prob.weights, 1.0, r)
}

/// Theta-averaged series variant.
pub fn a0_series_theta(prob: &EmbeddingProblem) -> Result<SeriesResult, EmbeddingError> {
    let r = series_regime(prob)?;
    let tw = match prob.theta_weights() {
        Ok(tw) => tw,
        Err(EmbeddingError::DivergentTheta(_)) => {
            return Ok(SeriesResult {
                value: f64::INFINITY,
                partial_sums: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    a0_series_inner(prob, &tw, prob.theta, r)
}

fn series_regime(prob: &EmbeddingProblem) -> Result<f64, EmbeddingError> {
    match prob.regime() {
        Regime::SumBelowOne { r } => {
            if !prob.family.is_empty() && prob.family.eta() == 0.0 {
                return Err(EmbeddingError::DegenerateEsets);
            }
            Ok(r)
        }
        Regime::SumAtLeastOne => Err(EmbeddingError::NeedsSumBelowOne(prob.sum_reciprocal())),
    }
}

fn a0_series_inner(
    prob: &EmbeddingProblem,
    weights: &[Weight],
    theta: f64,
    r: f64,
) -> Result<SeriesResult, EmbeddingError> {
    let e = prob.arity() as f64 - 1.0;
    let mut acc = 0.0;
    let mut partial = Vec::with_capacity(prob.family.len());
    for (i, cube) in prob.family.cubes().iter().enumerate() {
        let base = prob.kernel.value(cube)?
            * cube.volume_f64().powf(e)
            * prob.mean_product(weights, cube, theta)?;
        acc += base.powf(r) * prob.family.eset_volume(i);
        partial.push(acc.powf(1.0 / r));
    }
    Ok(SeriesResult {
        value: acc.powf(1.0 / r),
        partial_sums: partial,
    })
}

/// `sup_S K(S) prod_i sigma_i(S) / sigma_i(E(S))^(1/p_i)`: the constant
/// driven directly by exceptional-set measures. Infinite when some
/// exceptional set is sigma-null under a cube of positive measure.
pub fn eset_constant_sup(prob: &EmbeddingProblem) -> Result<SupResult, EmbeddingError> {
    let mut best = 0.0f64;
    let mut attaining = None;
    for (i, cube) in prob.family.cubes().iter().enumerate() {
        let v = eset_term(prob, i, cube)?;
        if v > best {
            best = v;
            attaining = Some(cube.clone());
        }
        if v.is_infinite() {
            return Ok(SupResult {
                value: f64::INFINITY,
                attaining: Some(cube.clone()),
            });
        }
    }
    Ok(SupResult {
        value: best,
        attaining,
    })
}

/// `[ sum_S ( K(S) prod sigma_i(S)/sigma_i(E(S))^(1/p_i) )^r ]^(1/r)`.
pub fn eset_constant_series(prob: &EmbeddingProblem) -> Result<SeriesResult, EmbeddingError> {
    let r = match prob.regime() {
        Regime::SumBelowOne { r } => r,
        Regime::SumAtLeastOne => {
            return Err(EmbeddingError::NeedsSumBelowOne(prob.sum_reciprocal()))
        }
    };
    let mut acc = 0.0;
    let mut partial = Vec::with_capacity(prob.family.len());
    for (i, cube) in prob.family.cubes().iter().enumerate() {
        let v = eset_term(prob, i, cube)?;
        if v.is_infinite() {
            return Ok(SeriesResult {
                value: f64::INFINITY,
                partial_sums: partial,
            });
        }
        acc += v.powf(r);
        partial.push(acc.powf(1.0 / r));
    }
    Ok(SeriesResult {
        value: acc.powf(1.0 / r),
        partial_sums: partial,
    })
}

fn eset_term(prob: &EmbeddingProblem, i: usize, cube: &DyadicCube) -> Result<f64, EmbeddingError> {
    let grid = prob.family.grid();
    let mut term = prob.kernel.value(cube)?;
    for (slot, w) in prob.weights.iter().enumerate() {
        let num = w.integrate(cube, prob.rel_tol)?;
        if num == 0.0 {
            return Ok(0.0);
        }
        let mut den = 0.0;
        for b in prob.family.eset(i) {
            den += w.integrate_cells(&grid, prob.family.mesh_level(), b, prob.rel_tol)?;
        }
        if den == 0.0 {
            return Ok(f64::INFINITY);
        }
        term *= num / den.powf(1.0 / prob.exponents[slot]);
    }
    Ok(term)
}

/// Per-slot check of the cube-average Hoelder inequality with exponents
/// `q_i' = theta p_i'`: returns the ratios
/// `avg(f_i sigma_i) / [ (avg sigma_i^theta)^(1/q_i') (avg (f_i sigma_i^(1/p_i))^(q_i))^(1/q_i) ]`,
/// each at most 1 up to quadrature tolerance. A vanishing numerator gives 0.
pub fn holder_cube_check(
    prob: &EmbeddingProblem,
    fns: &[TestFunction],
    cube: &DyadicCube,
) -> Result<Vec<f64>, EmbeddingError> {
    let tol = prob.rel_tol;
    let vol = cube.volume_f64();
    let mut out = Vec::with_capacity(prob.arity());
    for (i, (w, f)) in prob.weights.iter().zip(fns).enumerate() {
        let qi_p = prob.theta * prob.conj(i); // q_i'
        let qi = qi_p / (qi_p - 1.0);
        let measure = CellMeasure::build(w, &f.mesh, tol)?;
        let wi = WeightedIntegrand::new(f, &measure, tol)?;
        let numerator = wi.over_cube(cube)? / vol;
        if numerator == 0.0 {
            out.push(0.0);
            continue;
        }
        let w_theta = w
            .pow_scale(prob.theta, prob.dim)
            .map_err(|e| EmbeddingError::DivergentTheta(e.to_string()))?;
        let avg_theta = w_theta.integrate(cube, tol)? / vol;
        // avg over the cube of (f sigma^(1/p_i))^{q_i}, cell by cell
        let w_qp = w
            .pow_scale(qi / prob.exponents[i], prob.dim)
            .map_err(|e| EmbeddingError::DivergentTheta(e.to_string()))?;
        let qp_measure = CellMeasure::build(&w_qp, &f.mesh, tol)?;
        let mut f_pow = f.clone();
        for v in f_pow.values.iter_mut() {
            *v = v.powf(qi);
        }
        let pow_int = WeightedIntegrand::new(&f_pow, &qp_measure, tol)?;
        let avg_pow = pow_int.over_cube(cube)? / vol;
        let denom = avg_theta.powf(1.0 / qi_p) * avg_pow.powf(1.0 / qi);
        out.push(numerator / denom);
    }
    Ok(out)
}

/// The left side of the power-weight balance identity
/// `alpha + d(1 - sum 1/p_i) + sum beta_i/p_i'`; the variant without the
/// dimension term drops `d(1 - sum 1/p_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceVariant {
    WithDimensionTerm,
    WithoutDimensionTerm,
}

pub fn balance_residual(
    alpha: f64,
    dim: usize,
    exponents: &[f64],
    betas: &[f64],
    variant: BalanceVariant,
) -> f64 {
    let sum_recip: f64 = exponents.iter().map(|p| 1.0 / p).sum();
    let weight_part: f64 = exponents
        .iter()
        .zip(betas)
        .map(|(&p, &b)| b * (p - 1.0) / p) // b / p' = b (1 - 1/p)
        .sum();
    match variant {
        BalanceVariant::WithDimensionTerm => alpha + dim as f64 * (1.0 - sum_recip) + weight_part,
        BalanceVariant::WithoutDimensionTerm => alpha + weight_part,
    }
}

/// Convergence verdict for the tail-weight series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesVerdict {
    Convergent,
    DivergentTrend,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct SeriesReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: SeriesVerdict,
    pub tail_fraction: f64,
}

/// Partial sums of `sum_S |E(S)| max(side, |center|, 1)^(r rho)` in family
/// order, with a trend verdict: convergent when the last tenth of the
/// terms contributes less than `tail_tol` of the total, divergent when the
/// partial sums grow by more than `growth_ratio` over that stretch.
pub fn eset_decay_series(
    fam: &SparseFamily,
    r: f64,
    rho: f64,
    tail_tol: f64,
    growth_ratio: f64,
) -> SeriesReport {
    let mut terms = Vec::with_capacity(fam.len());
    for (i, cube) in fam.cubes().iter().enumerate() {
        let scale = cube.side_f64().max(cube.center_norm_f64()).max(1.0);
        terms.push(fam.eset_volume(i) * scale.powf(r * rho));
    }
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }
    let n = terms.len();
    if n == 0 || acc == 0.0 {
        return SeriesReport {
            terms,
            partial_sums,
            verdict: SeriesVerdict::Convergent,
            tail_fraction: 0.0,
        };
    }
    let decade = (n / 10).max(1).min(n - 1).max(1);
    let base = if n > decade {
        partial_sums[n - 1 - decade]
    } else {
        0.0
    };
    let tail_fraction = (acc - base) / acc;
    let verdict = if tail_fraction < tail_tol {
        SeriesVerdict::Convergent
    } else if base > 0.0 && acc / base > growth_ratio {
        SeriesVerdict::DivergentTrend
    } else {
        SeriesVerdict::Inconclusive
    };
    SeriesReport {
        terms,
        partial_sums,
        verdict,
        tail_fraction,
    }
}

/// The per-cube two-weight quantity
/// `(1/|S|) sigma(S)/sigma(E(S))^(1/p) * w(S)/w(E(S))^(1/p')` with
/// `sigma = w^(-1/(p-1))` derived internally.
pub fn weight_pair_ratio(
    w: &Weight,
    p: f64,
    cube: &DyadicCube,
    fam: &SparseFamily,
    rel_tol: f64,
) -> Result<f64, EmbeddingError> {
    let i = fam.position(cube).ok_or(EmbeddingError::NotInFamily)?;
    let sigma = w.dual(p, fam.dim())?;
    let grid = fam.grid();
    let p_conj = p / (p - 1.0);
    let mut parts = [0.0f64; 2];
    for (slot, weight) in [(0usize, &sigma), (1usize, w)] {
        let num = weight.integrate(cube, rel_tol)?;
        let mut den = 0.0;
        for b in fam.eset(i) {
            den += weight.integrate_cells(&grid, fam.mesh_level(), b, rel_tol)?;
        }
        let e = if slot == 0 { 1.0 / p } else { 1.0 / p_conj };
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
        }
        parts[slot] = num / den.powf(e);
    }
    Ok(parts[0] * parts[1] / cube.volume_f64())
}

/// Report of the two-weight machinery over a family: the supremum of the
/// per-cube quantity, the Muckenhoupt estimate over the family cubes, and
/// their ratio against the sparseness-only cap.
#[derive(Debug, Clone)]
pub struct A2Report {
    pub sup_ratio: f64,
    pub attaining: Option<DyadicCube>,
    pub ap: ApEstimate,
    /// `sup_ratio / ap^(max(1, p'/p))`.
    pub normalized: f64,
    /// `(1/eta)^(1 + max(p/p', p'/p))`: the cap predicted from sparseness
    /// alone.
    pub eta_cap: f64,
}

pub fn a2_ratio_check(
    w: &Weight,
    p: f64,
    fam: &SparseFamily,
    rel_tol: f64,
) -> Result<A2Report, EmbeddingError> {
    let mut sup = 0.0f64;
    let mut attaining = None;
    for cube in fam.cubes() {
        let v = weight_pair_ratio(w, p, cube, fam, rel_tol)?;
        if v > sup {
            sup = v;
            attaining = Some(cube.clone());
        }
    }
    let ap = ap_constant(w, p, fam.cubes(), rel_tol)?;
    let p_conj = p / (p - 1.0);
    let normalized = sup / ap.value.powf((p_conj / p).max(1.0));
    let eta_cap = if fam.eta() > 0.0 {
        (1.0 / fam.eta()).powf(1.0 + (p / p_conj).max(p_conj / p))
    } else {
        f64::INFINITY
    };
    Ok(A2Report {
        sup_ratio: sup,
        attaining,
        ap,
        normalized,
        eta_cap,
    })
}

// ---------------------------------------------------------------------------
// empirical verification

/// Options for [`verify_embedding`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Random draws per dilation.
    pub trials: usize,
    pub seed: u64,
    /// Inclusive dilation range: candidate functions live on `[0, 2^-j)^d`
    /// for `j` in this range.
    pub dilations: (i32, i32),
    /// Mesh refinement below the candidate support cube.
    pub resolution: i32,
    /// Use the theta-averaged constant instead of the plain one.
    pub theta_variant: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 16,
            seed: 0,
            dilations: (0, 0),
            resolution: 8,
            theta_variant: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DilationRatio {
    pub dilation: i32,
    pub best_ratio: f64,
    pub best_candidate: String,
}

/// Outcome of an empirical verification run.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub variant: &'static str,
    pub a0: f64,
    pub best_ratio: f64,
    pub ratio_over_a0: f64,
    pub trials: usize,
    pub seed: u64,
    pub per_dilation: Vec<DilationRatio>,
}

fn ratio_for(
    prob: &EmbeddingProblem,
    fns: &[TestFunction],
) -> Result<Option<f64>, EmbeddingError> {
    let mut norm_prod = 1.0;
    for ((f, w), &p) in fns.iter().zip(&prob.weights).zip(&prob.exponents) {
        let n = lp_norm(f, w, p, prob.rel_tol)?;
        if n == 0.0 || !n.is_finite() {
            return Ok(None);
        }
        norm_prod *= n;
    }
    let measures: Vec<CellMeasure> = prob
        .weights
        .iter()
        .zip(fns)
        .map(|(w, f)| CellMeasure::build(w, &f.mesh, prob.rel_tol))
        .collect::<Result<_, _>>()?;
    let integrands: Vec<WeightedIntegrand> = fns
        .iter()
        .zip(&measures)
        .map(|(f, m)| WeightedIntegrand::new(f, m, prob.rel_tol))
        .collect::<Result<_, _>>()?;
    let form = multilinear_form_with(&prob.family, &prob.kernel, &integrands)?;
    Ok(Some(form / norm_prod))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Empirical probe of the embedding inequality: over random nonnegative
/// cell functions and structured candidates (cube indicators and geometric
/// shell profiles) dilated through `2^-j`, record the best observed ratio
/// `form / prod ||f_i||` per dilation and overall. Deterministic per seed.
pub fn verify_embedding(
    prob: &EmbeddingProblem,
    opts: &VerifyOptions,
) -> Result<VerificationReport, EmbeddingError> {
    let (variant, a0) = if opts.theta_variant {
        match prob.regime() {
            Regime::SumAtLeastOne => ("sup_theta", a0_sup_theta(prob)?.value),
            Regime::SumBelowOne { .. } => ("series_theta", a0_series_theta(prob)?.value),
        }
    } else {
        match prob.regime() {
            Regime::SumAtLeastOne => ("sup", a0_sup(prob)?.value),
            Regime::SumBelowOne { .. } => ("series", a0_series(prob)?.value),
        }
    };
    let n = prob.arity();
    let grid = prob.family.grid();
    let mut best_ratio = 0.0f64;
    let mut per_dilation = Vec::new();
    // family-cube indicators, once (they are dilation-independent)
    let mut family_best = 0.0f64;
    for cube in prob.family.cubes() {
        let mesh = Mesh::of_cube(cube, cube.level())?;
        let f = TestFunction::constant(mesh, 1.0);
        let fns: Vec<TestFunction> = (0..n).map(|_| f.clone()).collect();
        if let Some(r) = ratio_for(prob, &fns)? {
            family_best = family_best.max(r);
        }
    }
    best_ratio = best_ratio.max(family_best);
    let (j_lo, j_hi) = opts.dilations;
    for j in j_lo..=j_hi {
        let support = DyadicCube::new(j, vec![0; prob.dim], grid.shift_at_level(j))?;
        let mesh = Mesh::of_cube(&support, j + opts.resolution)?;
        let mut dil_best = 0.0f64;
        let mut dil_name = String::from("none");
        // indicator of the support cube
        let f = TestFunction::constant(mesh.clone(), 1.0);
        let fns: Vec<TestFunction> = (0..n).map(|_| f.clone()).collect();
        if let Some(r) = ratio_for(prob, &fns)? {
            if r > dil_best {
                dil_best = r;
                dil_name = "indicator".into();
            }
        }
        // geometric shell profiles concentrated toward the support corner
        for decay in [0.5f64, 1.0, 2.0] {
            let f = shell_profile(&mesh, &support, decay)?;
            let fns: Vec<TestFunction> = (0..n).map(|_| f.clone()).collect();
            if let Some(r) = ratio_for(prob, &fns)? {
                if r > dil_best {
                    dil_best = r;
                    dil_name = format!("shell:{decay}");
                }
            }
        }
        // random draws, slot-independent values
        for t in 0..opts.trials {
            let mut rng =
                ChaCha8Rng::seed_from_u64(splitmix(opts.seed ^ ((j as u64) << 32) ^ t as u64));
            let fns: Vec<TestFunction> = (0..n)
                .map(|_| {
                    let vals: Vec<f64> = (0..mesh.len())
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            z.abs()
                        })
                        .collect();
                    TestFunction::from_values(mesh.clone(), vals)
                })
                .collect::<Result<_, _>>()?;
            if let Some(r) = ratio_for(prob, &fns)? {
                if r > dil_best {
                    dil_best = r;
                    dil_name = format!("random:{t}");
                }
            }
        }
        best_ratio = best_ratio.max(dil_best);
        per_dilation.push(DilationRatio {
            dilation: j,
            best_ratio: dil_best,
            best_candidate: dil_name,
        });
    }
    Ok(VerificationReport {
        variant,
        a0,
        best_ratio,
        ratio_over_a0: if a0 > 0.0 { best_ratio / a0 } else { f64::NAN },
        trials: opts.trials,
        seed: opts.seed,
        per_dilation,
    })
}

/// Cell values `2^(-decay * shell)` where `shell` counts dyadic distance
/// from the support corner.
fn shell_profile(
    mesh: &Mesh,
    support: &DyadicCube,
    decay: f64,
) -> Result<TestFunction, EmbeddingError> {
    let (lo, _) = support.descendant_range(mesh.level())?;
    let mut f = TestFunction::zeros(mesh.clone());
    for flat in 0..mesh.len() {
        let idx = mesh.unflat(flat);
        let rel: i64 = idx
            .iter()
            .zip(&lo)
            .map(|(&m, &l)| (m - l).max(0))
            .max()
            .unwrap_or(0);
        let shell = (64 - (rel + 1).leading_zeros()) as f64; // floor(log2(rel+1)) + 1
        f.values[flat] = (-decay * shell).exp2();
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// extremizer search

#[derive(Debug, Clone)]
pub struct ExtremizeOptions {
    pub cycles: usize,
    pub restarts: usize,
    pub seed: u64,
    pub mesh: Mesh,
}

#[derive(Debug, Clone)]
pub struct ExtremizeResult {
    pub best_ratio: f64,
    pub best_fns: Vec<TestFunction>,
    /// Accepted ratio per cycle of the winning restart; nondecreasing.
    pub history: Vec<f64>,
    pub cycles_used: usize,
}

/// Alternating slot-wise maximization of `form / prod ||f_i||` over
/// cellwise-constant nonnegative functions on a fixed mesh. With every
/// other slot frozen the exact maximizer is
/// `f_i = (cell average of sum_S K(S) prod_{j != i} int f_j dsigma_j 1_S)^(1/(p_i - 1))`,
/// so the ratio never decreases per accepted cycle; a non-improving cycle
/// terminates the restart.
pub fn extremize(
    prob: &EmbeddingProblem,
    opts: &ExtremizeOptions,
) -> Result<ExtremizeResult, EmbeddingError> {
    let n = prob.arity();
    let mesh = &opts.mesh;
    let measures: Vec<CellMeasure> = prob
        .weights
        .iter()
        .map(|w| CellMeasure::build(w, mesh, prob.rel_tol))
        .collect::<Result<_, _>>()?;
    let dims = mesh.dims().to_vec();
    let mut best_ratio = 0.0f64;
    let mut best_fns: Vec<TestFunction> = Vec::new();
    let mut best_history = Vec::new();
    for restart in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(opts.seed ^ (restart as u64)));
        let mut fns: Vec<TestFunction> = (0..n)
            .map(|_| {
                let vals: Vec<f64> = (0..mesh.len())
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z.abs() + 1e-6
                    })
                    .collect();
                TestFunction::from_values(mesh.clone(), vals)
            })
            .collect::<Result<_, _>>()?;
        let mut history = Vec::new();
        let mut current = match ratio_of(prob, &fns, &measures)? {
            Some(r) => r,
            None => continue,
        };
        for _ in 0..opts.cycles {
            for i in 0..n {
                let updated = optimal_slot(prob, &fns, &measures, i, &dims)?;
                match updated {
                    None => break,
                    Some(f) => fns[i] = f,
                }
            }
            let next = match ratio_of(prob, &fns, &measures)? {
                Some(r) => r,
                None => break,
            };
            if next > current {
                current = next;
                history.push(current);
            } else {
                break;
            }
        }
        if history.is_empty() {
            history.push(current);
        }
        if current > best_ratio {
            best_ratio = current;
            best_fns = fns;
            best_history = history;
        }
    }
    let cycles_used = best_history.len();
    Ok(ExtremizeResult {
        best_ratio,
        best_fns,
        history: best_history,
        cycles_used,
    })
}

fn ratio_of(
    prob: &EmbeddingProblem,
    fns: &[TestFunction],
    measures: &[CellMeasure],
) -> Result<Option<f64>, EmbeddingError> {
    let mut norm_prod = 1.0;
    for ((f, m), &p) in fns.iter().zip(measures).zip(&prob.exponents) {
        let mut acc = 0.0;
        for (v, mass) in f.values.iter().zip(m.masses()) {
            if *v > 0.0 {
                acc += v.powf(p) * mass;
            }
        }
        let n = acc.powf(1.0 / p);
        if n == 0.0 || !n.is_finite() {
            return Ok(None);
        }
        norm_prod *= n;
    }
    let integrands: Vec<WeightedIntegrand> = fns
        .iter()
        .zip(measures)
        .map(|(f, m)| WeightedIntegrand::new(f, m, prob.rel_tol))
        .collect::<Result<_, _>>()?;
    let form = multilinear_form_with(&prob.family, &prob.kernel, &integrands)?;
    Ok(Some(form / norm_prod))
}

/// The exact ratio maximizer in slot `i` with the other slots frozen.
fn optimal_slot(
    prob: &EmbeddingProblem,
    fns: &[TestFunction],
    measures: &[CellMeasure],
    i: usize,
    dims: &[usize],
) -> Result<Option<TestFunction>, EmbeddingError> {
    let mesh = &fns[i].mesh;
    // cellwise sigma_i-average of G = sum_S K(S) prod_{j != i} int_S f_j
    // 1_S: coarser cubes enter through a box field, finer cubes through
    // point mass additions to their containing cell
    let mut field = vec![0.0; mesh.len()];
    let mut point = vec![0.0; mesh.len()];
    for cube in prob.family.cubes() {
        let mut coeff = prob.kernel.value(cube)?;
        if coeff == 0.0 {
            continue;
        }
        for (j, f) in fns.iter().enumerate() {
            if j == i {
                continue;
            }
            let wi = WeightedIntegrand::new(f, &measures[j], prob.rel_tol)?;
            coeff *= wi.over_cube(cube)?;
            if coeff == 0.0 {
                break;
            }
        }
        if coeff == 0.0 {
            continue;
        }
        if cube.level() <= mesh.level() {
            let (lo, hi) = cube.descendant_range(mesh.level())?;
            let Some(clipped) = mesh.clip(&CellBox::new(lo, hi)) else {
                continue;
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
            diff_add(&mut field, dims, &lo, &hi, coeff);
        } else {
            let anc = cube.ancestor(mesh.level())?;
            if let Some(flat) = mesh.flat(anc.index()) {
                point[flat] += coeff * measures[i].weight().integrate(cube, prob.rel_tol)?;
            }
        }
    }
    diff_resolve(&mut field, dims);
    let masses = measures[i].masses();
    let e = 1.0 / (prob.exponents[i] - 1.0);
    let mut vals = vec![0.0; mesh.len()];
    let mut peak = 0.0f64;
    for flat in 0..mesh.len() {
        let g_avg = if masses[flat] > 0.0 {
            field[flat] + point[flat] / masses[flat]
        } else {
            0.0
        };
        let v = if g_avg > 0.0 { g_avg.powf(e) } else { 0.0 };
        peak = peak.max(v);
        vals[flat] = v;
    }
    if peak == 0.0 {
        return Ok(None);
    }
    for v in vals.iter_mut() {
        *v /= peak;
    }
    Ok(Some(TestFunction::from_values(mesh.clone(), vals)?))
}

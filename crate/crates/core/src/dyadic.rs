//! Exact geometry of shifted dyadic grids.
//!
//! A cube is stored as `(k, m, s)` with side `2^-k` and lower corner
//! `(3*m_j + s_j) / (3 * 2^k)` per coordinate, so the one-third shifted
//! grids are represented exactly. Corners and centers are rationals;
//! membership and nesting never use tolerances.
//!
//! The grids are the nested one-third-shift family: bisecting a cube with
//! shift entry `s` produces children with shift entry `-s`, which is the
//! unique exact representation of the child corners in the `(3m+s)/(3*2^k)`
//! form. Two cubes belong to the same grid when their shifts normalized to
//! level 0 agree; containment queries across grids are an error, not
//! `false`.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Exact rational coordinate type.
pub type Rat = BigRational;

/// Largest admissible |level|, keeping `2^k` within machine integers.
pub const MAX_LEVEL: i32 = 62;

/// Hard cap on the number of cubes a single enumeration may produce.
pub const ENUM_LIMIT: usize = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shift entry {0} outside {{-1, 0, +1}}")]
    BadShift(i64),
    #[error("cubes from different shifted grids are incomparable")]
    GridMismatch,
    #[error("level {0} outside supported range |k| <= 62")]
    LevelOutOfRange(i64),
    #[error("index arithmetic overflow at level {0}")]
    IndexOverflow(i64),
    #[error("window is empty or invalid")]
    EmptyWindow,
    #[error("enumeration would exceed {0} cubes")]
    EnumerationTooLarge(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

/// `2^e` as an exact rational (any sign of `e`).
pub fn rat_pow2(e: i32) -> Rat {
    if e >= 0 {
        Rat::from_integer(BigInt::one() << e as usize)
    } else {
        Rat::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Floor of a rational as `i64`, or an overflow error.
fn rat_floor_i64(q: &Rat) -> Result<i64, DyadicError> {
    q.floor()
        .to_integer()
        .to_i64()
        .ok_or(DyadicError::IndexOverflow(0))
}

/// Identity of a nested shifted grid: the shift vector normalized to
/// level 0, entries in `{-1, 0, +1}` encoding one-third offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridId(pub Vec<i8>);

impl GridId {
    pub fn standard(d: usize) -> Self {
        GridId(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The stored shift of cubes of this grid at level `k`.
    pub fn shift_at_level(&self, k: i32) -> Vec<i8> {
        if k.rem_euclid(2) == 0 {
            self.0.clone()
        } else {
            self.0.iter().map(|s| -s).collect()
        }
    }

    /// All `3^d` grid identities in a fixed lexicographic order.
    pub fn all(d: usize) -> Vec<GridId> {
        let mut out = vec![GridId(Vec::new())];
        for _ in 0..d {
            let mut next = Vec::with_capacity(out.len() * 3);
            for g in &out {
                for s in [-1i8, 0, 1] {
                    let mut v = g.0.clone();
                    v.push(s);
                    next.push(GridId(v));
                }
            }
            out = next;
        }
        out
    }
}

impl fmt::Display for GridId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A cube from a shifted dyadic grid, stored exactly.
///
/// Side length is `2^-level`; the lower corner in coordinate `j` is the
/// rational `(3*index[j] + shift[j]) / (3 * 2^level)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    level: i32,
    index: Vec<i64>,
    shift: Vec<i8>,
}

impl DyadicCube {
    /// Build a cube, validating the shift entries and level range.
    pub fn new(level: i32, index: Vec<i64>, shift: Vec<i8>) -> Result<Self, DyadicError> {
        if index.len() != shift.len() {
            return Err(DyadicError::DimensionMismatch {
                expected: index.len(),
                got: shift.len(),
            });
        }
        if index.is_empty() {
            return Err(DyadicError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if level.abs() > MAX_LEVEL {
            return Err(DyadicError::LevelOutOfRange(level as i64));
        }
        for &s in &shift {
            if !(-1..=1).contains(&s) {
                return Err(DyadicError::BadShift(s as i64));
            }
        }
        Ok(DyadicCube {
            level,
            index,
            shift,
        })
    }

    /// Cube of the standard grid (`shift = 0`).
    pub fn standard(level: i32, index: Vec<i64>) -> Result<Self, DyadicError> {
        let d = index.len();
        DyadicCube::new(level, index, vec![0; d])
    }

    /// The unit cube `[0,1)^d` of the standard grid.
    pub fn unit(d: usize) -> Self {
        DyadicCube::standard(0, vec![0; d]).expect("unit cube")
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn index(&self) -> &[i64] {
        &self.index
    }

    pub fn shift(&self) -> &[i8] {
        &self.shift
    }

    /// Grid identity: the shift normalized to level 0.
    pub fn grid(&self) -> GridId {
        if self.level.rem_euclid(2) == 0 {
            GridId(self.shift.clone())
        } else {
            GridId(self.shift.iter().map(|s| -s).collect())
        }
    }

    /// Exact side length `2^-k`.
    pub fn side(&self) -> Rat {
        rat_pow2(-self.level)
    }

    pub fn side_f64(&self) -> f64 {
        (-self.level as f64).exp2()
    }

    /// Exact volume `2^-kd`.
    pub fn volume(&self) -> Rat {
        rat_pow2(-self.level * self.dim() as i32)
    }

    pub fn volume_f64(&self) -> f64 {
        (-(self.level as f64) * self.dim() as f64).exp2()
    }

    /// Exact lower corner, denominator dividing `3 * 2^k`.
    pub fn corner(&self) -> Vec<Rat> {
        let scale = rat_pow2(-self.level);
        self.index
            .iter()
            .zip(&self.shift)
            .map(|(&m, &s)| {
                Rat::new(BigInt::from(3 * m as i128 + s as i128), BigInt::from(3)) * scale.clone()
            })
            .collect()
    }

    /// Exact upper corner (`corner + side` per coordinate).
    pub fn upper(&self) -> Vec<Rat> {
        let side = self.side();
        self.corner().into_iter().map(|c| c + side.clone()).collect()
    }

    /// Exact center.
    pub fn center(&self) -> Vec<Rat> {
        let half = rat_pow2(-self.level - 1);
        self.corner().into_iter().map(|c| c + half.clone()).collect()
    }

    pub fn corner_f64(&self) -> Vec<f64> {
        let scale = (-self.level as f64).exp2();
        self.index
            .iter()
            .zip(&self.shift)
            .map(|(&m, &s)| (m as f64 + s as f64 / 3.0) * scale)
            .collect()
    }

    /// Euclidean norm of the center, in floating point.
    pub fn center_norm_f64(&self) -> f64 {
        let scale = (-self.level as f64).exp2();
        self.index
            .iter()
            .zip(&self.shift)
            .map(|(&m, &s)| (m as f64 + s as f64 / 3.0 + 0.5) * scale)
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Exact point membership: `corner <= x < corner + side` coordinatewise.
    pub fn contains_point(&self, x: &[Rat]) -> Result<bool, DyadicError> {
        if x.len() != self.dim() {
            return Err(DyadicError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let corner = self.corner();
        let side = self.side();
        for (c, xj) in corner.iter().zip(x) {
            if xj < c || *xj >= c.clone() + side.clone() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The `2^d` children partitioning the cube. Shift entries flip sign so
    /// the child corners stay exactly representable.
    pub fn children(&self) -> Result<Vec<DyadicCube>, DyadicError> {
        let d = self.dim();
        if self.level + 1 > MAX_LEVEL {
            return Err(DyadicError::LevelOutOfRange(self.level as i64 + 1));
        }
        let base: Vec<i64> = self
            .index
            .iter()
            .zip(&self.shift)
            .map(|(&m, &s)| match s {
                0 => 2 * m,
                1 => 2 * m + 1,
                -1 => 2 * m - 1,
                _ => unreachable!(),
            })
            .collect();
        let new_shift: Vec<i8> = self.shift.iter().map(|s| -s).collect();
        let mut out = Vec::with_capacity(1 << d);
        for bits in 0..(1u32 << d) {
            let idx: Vec<i64> = base
                .iter()
                .enumerate()
                .map(|(j, &b)| b + ((bits >> j) & 1) as i64)
                .collect();
            out.push(DyadicCube {
                level: self.level + 1,
                index: idx,
                shift: new_shift.clone(),
            });
        }
        Ok(out)
    }

    /// The grid parent (level `k-1` cube of the same grid containing this
    /// cube).
    pub fn parent(&self) -> Result<DyadicCube, DyadicError> {
        if self.level - 1 < -MAX_LEVEL {
            return Err(DyadicError::LevelOutOfRange(self.level as i64 - 1));
        }
        let index: Vec<i64> = self
            .index
            .iter()
            .zip(&self.shift)
            .map(|(&m, &s)| match s {
                0 => m.div_euclid(2),
                // child shift -1 arises from a parent with shift +1
                -1 => (m - 1).div_euclid(2),
                1 => (m + 1).div_euclid(2),
                _ => unreachable!(),
            })
            .collect();
        Ok(DyadicCube {
            level: self.level - 1,
            index,
            shift: self.shift.iter().map(|s| -s).collect(),
        })
    }

    /// Index range of the descendants at `level >= self.level`, as
    /// inclusive per-coordinate bounds `(lo, hi)` with `hi = lo + 2^t - 1`.
    pub fn descendant_range(&self, level: i32) -> Result<(Vec<i64>, Vec<i64>), DyadicError> {
        if level < self.level {
            return Err(DyadicError::LevelOutOfRange(level as i64));
        }
        if level > MAX_LEVEL {
            return Err(DyadicError::LevelOutOfRange(level as i64));
        }
        let t = (level - self.level) as u32;
        if t > 62 {
            return Err(DyadicError::IndexOverflow(level as i64));
        }
        let two_t: i128 = 1i128 << t;
        let sign: i128 = if t % 2 == 0 { 1 } else { -1 };
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (&m, &s) in self.index.iter().zip(&self.shift) {
            // corner identity: (3m+s)*2^t = 3*lo + s*(-1)^t
            let l = (m as i128) * two_t + (s as i128) * (two_t - sign) / 3;
            let h = l + two_t - 1;
            let l64 = i64::try_from(l).map_err(|_| DyadicError::IndexOverflow(level as i64))?;
            let h64 = i64::try_from(h).map_err(|_| DyadicError::IndexOverflow(level as i64))?;
            lo.push(l64);
            hi.push(h64);
        }
        Ok((lo, hi))
    }

    /// The ancestor at `level <= self.level` within the same grid.
    pub fn ancestor(&self, level: i32) -> Result<DyadicCube, DyadicError> {
        if level > self.level {
            return Err(DyadicError::LevelOutOfRange(level as i64));
        }
        let mut cur = self.clone();
        while cur.level > level {
            cur = cur.parent()?;
        }
        Ok(cur)
    }

    /// Whether `other` is contained in `self`. Cubes must come from the
    /// same grid; mixed grids are an error rather than `false`.
    pub fn contains_cube(&self, other: &DyadicCube) -> Result<bool, DyadicError> {
        if self.dim() != other.dim() {
            return Err(DyadicError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if self.grid() != other.grid() {
            return Err(DyadicError::GridMismatch);
        }
        if other.level < self.level {
            return Ok(false);
        }
        let (lo, hi) = self.descendant_range(other.level)?;
        Ok(other
            .index
            .iter()
            .zip(lo.iter().zip(&hi))
            .all(|(&m, (&l, &h))| m >= l && m <= h))
    }
}

impl fmt::Display for DyadicCube {
    /// Literal form `tau=<s1,..,sd>;k=<k>;m=<m1,..,md>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau=")?;
        for (i, s) in self.shift.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ";k={};m=", self.level)?;
        for (i, m) in self.index.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl FromStr for DyadicCube {
    type Err = DyadicError;

    fn from_str(s: &str) -> Result<Self, DyadicError> {
        let mut tau = None;
        let mut k = None;
        let mut m = None;
        for part in s.split(';') {
            let part = part.trim();
            if let Some(v) = part.strip_prefix("tau=") {
                let vals: Result<Vec<i8>, _> = v.split(',').map(|t| t.trim().parse()).collect();
                tau = Some(vals.map_err(|e| DyadicError::Parse(format!("tau: {e}")))?);
            } else if let Some(v) = part.strip_prefix("k=") {
                k = Some(
                    v.trim()
                        .parse::<i32>()
                        .map_err(|e| DyadicError::Parse(format!("k: {e}")))?,
                );
            } else if let Some(v) = part.strip_prefix("m=") {
                let vals: Result<Vec<i64>, _> = v.split(',').map(|t| t.trim().parse()).collect();
                m = Some(vals.map_err(|e| DyadicError::Parse(format!("m: {e}")))?);
            } else if !part.is_empty() {
                return Err(DyadicError::Parse(format!("unknown field `{part}`")));
            }
        }
        match (tau, k, m) {
            (Some(tau), Some(k), Some(m)) => DyadicCube::new(k, m, tau),
            _ => Err(DyadicError::Parse(
                "cube literal needs tau=, k= and m= fields".into(),
            )),
        }
    }
}

/// Desk-scale truncation of an infinite grid: a level range and a spatial
/// bound. Enumeration keeps the cubes of levels `k_min..=k_max` whose
/// interior meets `(-radius, radius)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub k_min: i32,
    pub k_max: i32,
    pub radius: Rat,
}

impl Window {
    pub fn new(k_min: i32, k_max: i32, radius: Rat) -> Result<Self, DyadicError> {
        if k_min > k_max || radius <= Rat::zero() {
            return Err(DyadicError::EmptyWindow);
        }
        if k_min.abs() > MAX_LEVEL || k_max.abs() > MAX_LEVEL {
            return Err(DyadicError::LevelOutOfRange(k_max as i64));
        }
        Ok(Window {
            k_min,
            k_max,
            radius,
        })
    }

    /// Window with an integer radius.
    pub fn with_radius_int(k_min: i32, k_max: i32, radius: i64) -> Result<Self, DyadicError> {
        Window::new(k_min, k_max, Rat::from_integer(BigInt::from(radius)))
    }

    /// Inclusive index bounds at `level` for shift entry `s`: the indices
    /// whose cube meets the window interior (`corner < R` and
    /// `corner + side > -R`, decided exactly).
    pub fn index_bounds_for_shift(&self, s: i8, level: i32) -> Result<(i64, i64), DyadicError> {
        let pow = rat_pow2(level); // 2^k
        let s_rat = Rat::new(BigInt::from(s), BigInt::from(3));
        // corner < R  <=>  m < 2^k R - s/3
        let q_hi = pow.clone() * self.radius.clone() - s_rat.clone();
        // corner + 2^-k > -R  <=>  m > -2^k R - s/3 - 1
        let q_lo = -pow * self.radius.clone() - s_rat - Rat::one();
        let m_max = if q_hi.is_integer() {
            rat_floor_i64(&q_hi)? - 1
        } else {
            rat_floor_i64(&q_hi)?
        };
        let m_min = rat_floor_i64(&q_lo)? + 1;
        Ok((m_min, m_max))
    }
}

/// All cubes of the grid with levels in the window that meet the window
/// interior, ordered by level ascending then lexicographic index.
pub fn enumerate_grid(grid: &GridId, window: &Window) -> Result<Vec<DyadicCube>, DyadicError> {
    let d = grid.dim();
    if d == 0 {
        return Err(DyadicError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let mut out = Vec::new();
    for k in window.k_min..=window.k_max {
        let shift = grid.shift_at_level(k);
        let mut ranges = Vec::with_capacity(d);
        let mut count: u128 = 1;
        for &s in &shift {
            let (lo, hi) = window.index_bounds_for_shift(s, k)?;
            if hi < lo {
                count = 0;
                break;
            }
            count = count.saturating_mul((hi - lo + 1) as u128);
            ranges.push((lo, hi));
        }
        if count == 0 {
            continue;
        }
        if out.len() as u128 + count > ENUM_LIMIT as u128 {
            return Err(DyadicError::EnumerationTooLarge(ENUM_LIMIT));
        }
        // lexicographic order over the index box
        let mut idx: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).collect();
        'cubes: loop {
            out.push(DyadicCube {
                level: k,
                index: idx.clone(),
                shift: shift.clone(),
            });
            let mut j = d;
            while j > 0 {
                j -= 1;
                if idx[j] < ranges[j].1 {
                    idx[j] += 1;
                    for r in j + 1..d {
                        idx[r] = ranges[r].0;
                    }
                    continue 'cubes;
                }
            }
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn unit_cube_geometry() {
        let q = DyadicCube::new(0, vec![0, 0], vec![0, 0]).unwrap();
        assert_eq!(q.corner(), vec![rat(0, 1), rat(0, 1)]);
        assert_eq!(q.center(), vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(q.volume(), rat(1, 1));
    }

    #[test]
    fn half_cube_geometry() {
        let q = DyadicCube::new(1, vec![1], vec![0]).unwrap();
        assert_eq!(q.corner(), vec![rat(1, 2)]);
        assert_eq!(q.side(), rat(1, 2));
    }

    #[test]
    fn shifted_cube_corner_is_exact_third() {
        let q = DyadicCube::new(0, vec![0], vec![1]).unwrap();
        assert_eq!(q.corner(), vec![rat(1, 3)]);
        assert_eq!(q.upper(), vec![rat(4, 3)]);
    }

    #[test]
    fn bad_shift_rejected() {
        assert_eq!(
            DyadicCube::new(0, vec![0], vec![2]),
            Err(DyadicError::BadShift(2))
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(DyadicCube::new(0, vec![0, 1], vec![0]).is_err());
    }

    #[test]
    fn point_membership_half_open() {
        let q = DyadicCube::unit(1);
        assert!(q.contains_point(&[rat(0, 1)]).unwrap());
        assert!(!q.contains_point(&[rat(1, 1)]).unwrap());
        let shifted = DyadicCube::new(0, vec![0], vec![1]).unwrap();
        assert!(shifted.contains_point(&[rat(1, 3)]).unwrap());
        assert!(!shifted.contains_point(&[rat(4, 3)]).unwrap());
    }

    #[test]
    fn containment_basic() {
        let a = DyadicCube::unit(1);
        let b = DyadicCube::new(1, vec![0], vec![0]).unwrap();
        let c = DyadicCube::new(1, vec![1], vec![0]).unwrap();
        assert!(a.contains_cube(&b).unwrap());
        assert!(!b.contains_cube(&c).unwrap());
        assert!(a.contains_cube(&a).unwrap());
        assert!(!b.contains_cube(&a).unwrap());
    }

    #[test]
    fn containment_rejects_mixed_grids() {
        let a = DyadicCube::unit(1);
        let b = DyadicCube::new(0, vec![0], vec![1]).unwrap();
        assert_eq!(a.contains_cube(&b), Err(DyadicError::GridMismatch));
    }

    #[test]
    fn children_partition_exactly() {
        for shift in [vec![0i8], vec![1], vec![-1]] {
            let q = DyadicCube::new(3, vec![5], shift).unwrap();
            let kids = q.children().unwrap();
            assert_eq!(kids.len(), 2);
            // contiguous, exact cover
            assert_eq!(kids[0].corner(), q.corner());
            assert_eq!(kids[0].upper(), kids[1].corner());
            assert_eq!(kids[1].upper(), q.upper());
            // same grid, containment holds
            for kid in &kids {
                assert_eq!(kid.grid(), q.grid());
                assert!(q.contains_cube(kid).unwrap());
                assert_eq!(kid.parent().unwrap(), q);
            }
        }
    }

    #[test]
    fn children_volumes_sum_to_parent() {
        let q = DyadicCube::new(0, vec![0, 0], vec![1, -1]).unwrap();
        let kids = q.children().unwrap();
        assert_eq!(kids.len(), 4);
        let total: Rat = kids.iter().map(|c| c.volume()).sum();
        assert_eq!(total, q.volume());
        for kid in &kids {
            assert_eq!(kid.volume(), rat(1, 4));
        }
    }

    #[test]
    fn descendant_range_matches_children() {
        let q = DyadicCube::new(2, vec![3], vec![1]).unwrap();
        let (lo, hi) = q.descendant_range(4).unwrap();
        assert_eq!(hi[0] - lo[0] + 1, 4);
        // all level-4 descendants listed by repeated bisection fall in range
        let mut stack = vec![q.clone()];
        let mut leaves = Vec::new();
        while let Some(c) = stack.pop() {
            if c.level() == 4 {
                leaves.push(c);
            } else {
                stack.extend(c.children().unwrap());
            }
        }
        for leaf in leaves {
            assert!(leaf.index()[0] >= lo[0] && leaf.index()[0] <= hi[0]);
            assert!(q.contains_cube(&leaf).unwrap());
        }
    }

    #[test]
    fn ancestor_inverts_descent() {
        let q = DyadicCube::new(1, vec![2, -1], vec![-1, 0]).unwrap();
        let mut c = q.clone();
        for _ in 0..5 {
            c = c.children().unwrap().into_iter().last().unwrap();
        }
        assert_eq!(c.ancestor(1).unwrap(), q);
    }

    #[test]
    fn enumerate_level_zero_unit_radius() {
        let w = Window::with_radius_int(0, 0, 1).unwrap();
        let cubes = enumerate_grid(&GridId::standard(1), &w).unwrap();
        let corners: Vec<Rat> = cubes.iter().map(|c| c.corner()[0].clone()).collect();
        assert_eq!(corners, vec![rat(-1, 1), rat(0, 1)]);
    }

    #[test]
    fn enumerate_two_levels() {
        let w = Window::with_radius_int(0, 1, 1).unwrap();
        let cubes = enumerate_grid(&GridId::standard(1), &w).unwrap();
        assert_eq!(cubes.len(), 6);
    }

    #[test]
    fn enumerate_count_formula() {
        // #cubes for d=1, k in [0,L], R=1 equals 2^(L+2) - 2, checked by
        // enumeration for L <= 10
        for l in 0..=10 {
            let w = Window::with_radius_int(0, l, 1).unwrap();
            let cubes = enumerate_grid(&GridId::standard(1), &w).unwrap();
            assert_eq!(cubes.len(), (1usize << (l + 2)) - 2, "L={l}");
        }
    }

    #[test]
    fn enumerate_closed_under_parent() {
        for grid in GridId::all(1) {
            let w = Window::with_radius_int(-1, 4, 2).unwrap();
            let cubes = enumerate_grid(&grid, &w).unwrap();
            let set: std::collections::HashSet<_> = cubes.iter().cloned().collect();
            for c in &cubes {
                if c.level() > w.k_min {
                    assert!(
                        set.contains(&c.parent().unwrap()),
                        "parent of {c} missing from {grid}"
                    );
                }
            }
        }
    }

    #[test]
    fn enumerate_order_deterministic() {
        let w = Window::with_radius_int(0, 2, 1).unwrap();
        let a = enumerate_grid(&GridId(vec![1, -1]), &w).unwrap();
        let b = enumerate_grid(&GridId(vec![1, -1]), &w).unwrap();
        assert_eq!(a, b);
        for pair in a.windows(2) {
            assert!(pair[0].level() <= pair[1].level());
            if pair[0].level() == pair[1].level() {
                assert!(pair[0].index() < pair[1].index());
            }
        }
    }

    #[test]
    fn grid_coherence_mutual_containment_is_equality() {
        let a = DyadicCube::new(2, vec![1], vec![1]).unwrap();
        let b = DyadicCube::new(2, vec![1], vec![1]).unwrap();
        assert!(a.contains_cube(&b).unwrap() && b.contains_cube(&a).unwrap());
        let c = DyadicCube::new(3, vec![2], vec![-1]).unwrap();
        if a.grid() == c.grid() {
            assert!(!(a.contains_cube(&c).unwrap() && c.contains_cube(&a).unwrap()));
        }
    }

    #[test]
    fn literal_round_trip() {
        let q = DyadicCube::new(3, vec![5, -2], vec![1, 0]).unwrap();
        let text = q.to_string();
        assert_eq!(text, "tau=1,0;k=3;m=5,-2");
        let back: DyadicCube = text.parse().unwrap();
        assert_eq!(back, q);
        let simple: DyadicCube = "tau=0;k=1;m=1".parse().unwrap();
        assert_eq!(simple.corner(), vec![rat(1, 2)]);
    }

    #[test]
    fn window_validation() {
        assert!(Window::with_radius_int(2, 1, 1).is_err());
        assert!(Window::new(0, 1, rat(0, 1)).is_err());
    }

    #[test]
    fn shifted_grid_levels_alternate() {
        let q = DyadicCube::new(0, vec![0], vec![1]).unwrap();
        let kid = &q.children().unwrap()[0];
        assert_eq!(kid.shift(), &[-1]);
        assert_eq!(kid.grid(), q.grid());
        assert_eq!(kid.parent().unwrap(), q);
    }
}

//! Closed-form tradeoff curves: the point-to-point curve and its inverse, the
//! cut-set outer bound, the DF multiplexing-gain region and the CF DMT.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::AntennaConfig;

/// Slack for domain checks, region membership and the DF optimality test.
pub const TOLERANCE: f64 = 1e-12;

/// Absolute accuracy of [`df_threshold`].
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmtError {
    #[error("antenna counts must be positive, got {m}x{n}")]
    ZeroAntennas { m: usize, n: usize },
    #[error("multiplexing gain {r} outside [0, {max}]")]
    MultiplexingOutOfRange { r: f64, max: f64 },
    #[error("diversity gain {d} outside [0, {max}]")]
    DiversityOutOfRange { d: f64, max: f64 },
    #[error("multiplexing gains must be finite and nonnegative, got ({r1}, {r2})")]
    InvalidPair { r1: f64, r2: f64 },
}

/// The optimal point-to-point tradeoff of an `m x n` Rayleigh channel:
/// straight lines through `(k, (m-k)(n-k))`, `k = 0..=min(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmtCurve {
    m: usize,
    n: usize,
    vertices: Vec<(f64, f64)>,
}

impl DmtCurve {
    pub fn new(m: usize, n: usize) -> Result<Self, DmtError> {
        if m == 0 || n == 0 {
            return Err(DmtError::ZeroAntennas { m, n });
        }
        let vertices = (0..=m.min(n)).map(|k| (k as f64, ((m - k) * (n - k)) as f64)).collect();
        Ok(DmtCurve { m, n, vertices })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn max_multiplexing(&self) -> f64 {
        self.m.min(self.n) as f64
    }

    pub fn max_diversity(&self) -> f64 {
        (self.m * self.n) as f64
    }

    fn segments(&self) -> impl Iterator<Item = (&(f64, f64), &(f64, f64))> {
        self.vertices.iter().zip(self.vertices.iter().skip(1))
    }

    pub fn value(&self, r: f64) -> Result<f64, DmtError> {
        let max = self.max_multiplexing();
        if !(r >= -TOLERANCE && r <= max + TOLERANCE) {
            return Err(DmtError::MultiplexingOutOfRange { r, max });
        }
        let r = r.clamp(0.0, max);
        let k = (r.floor() as usize).min(self.vertices.len() - 2);
        let (r0, d0) = self.vertices[k];
        let (_, d1) = self.vertices[k + 1];
        let frac = r - r0;
        if frac == 0.0 {
            return Ok(d0);
        }
        Ok(d0 + frac * (d1 - d0))
    }

    /// The multiplexing gain achieving diversity `d`.
    pub fn inverse(&self, d: f64) -> Result<f64, DmtError> {
        let max = self.max_diversity();
        if !(d >= -TOLERANCE && d <= max + TOLERANCE) {
            return Err(DmtError::DiversityOutOfRange { d, max });
        }
        Ok(self.inverse_saturating(d))
    }

    /// Like [`inverse`](Self::inverse), but a demand above the curve's maximum
    /// diversity forces zero rate and a negative demand returns the maximum.
    pub fn inverse_saturating(&self, d: f64) -> f64 {
        if d >= self.max_diversity() {
            return 0.0;
        }
        if d <= 0.0 {
            return self.max_multiplexing();
        }
        for (&(r0, d0), &(_, d1)) in self.segments() {
            if d <= d0 && d >= d1 {
                if d == d0 {
                    return r0;
                }
                return r0 + (d0 - d) / (d0 - d1);
            }
        }
        unreachable!("diversity {d} lies inside the curve range")
    }
}

/// `d_{m,n}(r)`.
pub fn dmt_value(m: usize, n: usize, r: f64) -> Result<f64, DmtError> {
    DmtCurve::new(m, n)?.value(r)
}

/// `r_{m,n}(d)`.
pub fn dmt_inverse(m: usize, n: usize, d: f64) -> Result<f64, DmtError> {
    DmtCurve::new(m, n)?.inverse(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplexingPair {
    pub r1: f64,
    pub r2: f64,
}

impl MultiplexingPair {
    pub fn new(r1: f64, r2: f64) -> Result<Self, DmtError> {
        if !(r1.is_finite() && r2.is_finite() && r1 >= 0.0 && r2 >= 0.0) {
            return Err(DmtError::InvalidPair { r1, r2 });
        }
        Ok(MultiplexingPair { r1, r2 })
    }

    pub fn symmetric(r: f64) -> Result<Self, DmtError> {
        Self::new(r, r)
    }

    /// Checks `r1 <= min(M1, Mr)` and `r2 <= min(M2, Mr)`.
    pub fn validate(&self, config: &AntennaConfig) -> Result<(), DmtError> {
        Self::new(self.r1, self.r2)?;
        let max1 = config.m1().min(config.mr()) as f64;
        let max2 = config.m2().min(config.mr()) as f64;
        if self.r1 > max1 + TOLERANCE {
            return Err(DmtError::MultiplexingOutOfRange { r: self.r1, max: max1 });
        }
        if self.r2 > max2 + TOLERANCE {
            return Err(DmtError::MultiplexingOutOfRange { r: self.r2, max: max2 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityPair {
    pub d1: f64,
    pub d2: f64,
}

/// `a * r1 + b * r2 <= c` with `a, b` in `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub a: u8,
    pub b: u8,
    pub c: f64,
}

impl LinearConstraint {
    fn lhs(&self, r1: f64, r2: f64) -> f64 {
        f64::from(self.a) * r1 + f64::from(self.b) * r2
    }

    pub fn holds(&self, r1: f64, r2: f64) -> bool {
        self.lhs(r1, r2) <= self.c + TOLERANCE
    }
}

/// A polytope of multiplexing-gain pairs inside the nonnegative quadrant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub constraints: Vec<LinearConstraint>,
}

impl RateRegion {
    pub fn contains(&self, r1: f64, r2: f64) -> bool {
        r1 >= -TOLERANCE && r2 >= -TOLERANCE && self.constraints.iter().all(|c| c.holds(r1, r2))
    }

    /// Largest `r` with `(r, r)` in the region.
    pub fn symmetric_corner(&self) -> f64 {
        self.constraints
            .iter()
            .filter(|c| c.a + c.b > 0)
            .map(|c| c.c / f64::from(c.a + c.b))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Largest feasible `r1` with `r2 = 0`.
    pub fn max_r1(&self) -> f64 {
        self.constraints.iter().filter(|c| c.a > 0).map(|c| c.c).fold(f64::INFINITY, f64::min)
    }

    /// Largest feasible `r2` given `r1`, or `None` when `r1` is outside the region.
    pub fn max_r2(&self, r1: f64) -> Option<f64> {
        if !self.contains(r1, 0.0) {
            return None;
        }
        let bound = self
            .constraints
            .iter()
            .filter(|c| c.b > 0)
            .map(|c| c.c - f64::from(c.a) * r1)
            .fold(f64::INFINITY, f64::min);
        Some(bound.max(0.0))
    }

    /// Corner points of the polygon, counterclockwise from the origin.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        // lines a*r1 + b*r2 = c, including both axes
        let mut lines: Vec<(f64, f64, f64)> = vec![(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)];
        lines.extend(self.constraints.iter().map(|c| (f64::from(c.a), f64::from(c.b), c.c)));
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (i, &(a1, b1, c1)) in lines.iter().enumerate() {
            for &(a2, b2, c2) in &lines[i + 1..] {
                let det = a1 * b2 - a2 * b1;
                if det.abs() < TOLERANCE {
                    continue;
                }
                let x = (c1 * b2 - c2 * b1) / det;
                let y = (a1 * c2 - a2 * c1) / det;
                let (x, y) =
                    (if x.abs() < TOLERANCE { 0.0 } else { x }, if y.abs() < TOLERANCE { 0.0 } else { y });
                if self.contains(x, y)
                    && !pts.iter().any(|&(px, py)| (px - x).abs() < 1e-10 && (py - y).abs() < 1e-10)
                {
                    pts.push((x, y));
                }
            }
        }
        let n = pts.len() as f64;
        let (cx, cy) = pts.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x / n, sy + y / n));
        let start = (-cy).atan2(-cx);
        let angle = |&(x, y): &(f64, f64)| {
            let a = (y - cy).atan2(x - cx) - start;
            if a < 0.0 {
                a + std::f64::consts::TAU
            } else {
                a
            }
        };
        pts.sort_by(|p, q| angle(p).total_cmp(&angle(q)));
        pts
    }
}

/// Cut-set bound: `d_i <= d_{M*,Mr}(r_i)`.
pub fn outer_bound(config: &AntennaConfig, r: &MultiplexingPair) -> Result<DiversityPair, DmtError> {
    let curve = DmtCurve::new(config.m_star(), config.mr())?;
    Ok(DiversityPair { d1: curve.value(r.r1)?, d2: curve.value(r.r2)? })
}

fn df_rate_bounds(config: &AntennaConfig, d: f64) -> Result<(f64, f64), DmtError> {
    let single = DmtCurve::new(config.m_star(), config.mr())?;
    let sum = DmtCurve::new(config.m1() + config.m2(), config.mr())?;
    let individual = single.inverse(d)?;
    Ok((individual, sum.inverse_saturating(d.max(0.0))))
}

/// Multiplexing gains where DF gives both users diversity `d`.
pub fn df_region(config: &AntennaConfig, d: f64) -> Result<RateRegion, DmtError> {
    let (individual, sum) = df_rate_bounds(config, d)?;
    Ok(RateRegion {
        constraints: vec![
            LinearConstraint { a: 1, b: 0, c: individual },
            LinearConstraint { a: 0, b: 1, c: individual },
            LinearConstraint { a: 1, b: 1, c: sum },
        ],
    })
}

/// Whether DF reaches the outer-bound square at common diversity `d`:
/// `r_{M*,Mr}(d) <= r_{M1+M2,Mr}(d) / 2`.
pub fn df_optimal(config: &AntennaConfig, d: f64) -> Result<bool, DmtError> {
    let (individual, sum) = df_rate_bounds(config, d)?;
    Ok(individual <= 0.5 * sum + TOLERANCE)
}

/// Smallest `d*` such that DF is optimal for every `d >= d*`.
pub fn df_threshold(config: &AntennaConfig) -> f64 {
    let single = DmtCurve::new(config.m_star(), config.mr()).expect("validated antenna counts");
    let sum = DmtCurve::new(config.m1() + config.m2(), config.mr()).expect("validated antenna counts");
    let d_max = single.max_diversity();
    let gap = |d: f64| single.inverse_saturating(d) - 0.5 * sum.inverse_saturating(d);
    let violated = |d: f64| gap(d) > TOLERANCE;

    let mut breaks: Vec<f64> =
        single.vertices().iter().chain(sum.vertices()).map(|&(_, d)| d).filter(|&d| d <= d_max).collect();
    breaks.push(0.0);
    breaks.push(d_max);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // the gap is linear between breakpoints, so only the topmost violating
    // segment can hold the threshold
    let Some(idx) = breaks.iter().rposition(|&d| violated(d)) else {
        return 0.0;
    };
    let (mut lo, mut hi) = (breaks[idx], breaks[idx + 1]);
    while hi - lo > THRESHOLD_TOLERANCE * 0.5 {
        let mid = 0.5 * (lo + hi);
        if violated(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Largest common diversity DF supports at symmetric gain `r`:
/// `min(d_{M*,Mr}(r), d_{M1+M2,Mr}(2r))`, zero once `2r` leaves the sum curve.
pub fn df_symmetric_dmt(config: &AntennaConfig, r: f64) -> Result<f64, DmtError> {
    let individual = cf_dmt(config, r)?;
    let sum = DmtCurve::new(config.m1() + config.m2(), config.mr())?;
    let joint = if 2.0 * r > sum.max_multiplexing() + TOLERANCE { 0.0 } else { sum.value(2.0 * r)? };
    Ok(individual.min(joint))
}

/// Per-user diversity achieved by CF, `d_{M*,Mr}(r)`, regardless of the other
/// user's rate.
pub fn cf_dmt(config: &AntennaConfig, r: f64) -> Result<f64, DmtError> {
    let max = config.m_star().min(config.mr()) as f64;
    if !(r >= -TOLERANCE && r <= max + TOLERANCE) {
        return Err(DmtError::MultiplexingOutOfRange { r, max });
    }
    dmt_value(config.m_star(), config.mr(), r)
}

//! Numerical DMT from eigenvalue exponents.
//!
//! A Gram eigenvalue behaving like `SNR^-alpha` contributes `(1 - alpha)^+`
//! degrees of freedom to its link. The probability that an `m x n` Rayleigh
//! channel lands near an exponent vector `alpha_1 >= ... >= alpha_k` decays
//! with exponent `sum_j (2j - 1 + |m - n|) alpha_j`, so the diversity of an
//! outage set is the smallest such weight over the set. [`minimize_exponent`]
//! computes that infimum by exhaustive grid search over ordered exponent
//! vectors followed by coordinate descent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{dmt_value, DmtError, TOLERANCE};
use crate::channel::AntennaConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("exponent vector for a {m}x{n} channel needs {expected} entries, got {got}")]
    Length { m: usize, n: usize, expected: usize, got: usize },
    #[error("exponents must be nonincreasing")]
    Unordered,
    #[error("exponents must be nonnegative and not NaN, got {0}")]
    InvalidEntry(f64),
    #[error("shape dimensions must be positive, got {m}x{n}")]
    EmptyShape { m: usize, n: usize },
    #[error("grid step must lie in (0, 1], got {0}")]
    InvalidStep(f64),
    #[error("multiplexing gain must be finite and nonnegative, got {0}")]
    InvalidMultiplexing(f64),
    #[error(transparent)]
    Dmt(#[from] DmtError),
}

/// Eigenvalue exponents of one channel, sorted nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentVector {
    alphas: Vec<f64>,
    m: usize,
    n: usize,
}

impl ExponentVector {
    pub fn new(alphas: Vec<f64>, m: usize, n: usize) -> Result<Self, ExponentError> {
        if m == 0 || n == 0 {
            return Err(ExponentError::EmptyShape { m, n });
        }
        let expected = m.min(n);
        if alphas.len() != expected {
            return Err(ExponentError::Length { m, n, expected, got: alphas.len() });
        }
        if let Some(&bad) = alphas.iter().find(|a| a.is_nan() || **a < 0.0) {
            return Err(ExponentError::InvalidEntry(bad));
        }
        if alphas.windows(2).any(|w| w[0] < w[1]) {
            return Err(ExponentError::Unordered);
        }
        Ok(ExponentVector { alphas, m, n })
    }

    /// Exponents measured from a channel draw: entries may be negative
    /// (eigenvalues above 1) or `+inf` (zero eigenvalues).
    pub(crate) fn from_channel(alphas: Vec<f64>, m: usize, n: usize) -> Self {
        debug_assert!(alphas.windows(2).all(|w| w[0] >= w[1]));
        ExponentVector { alphas, m, n }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn shape(&self) -> Shape {
        Shape { m: self.m, n: self.n }
    }
}

/// Degrees of freedom `sum_j (1 - alpha_j)^+`.
pub fn s_value(alpha: &ExponentVector) -> f64 {
    alpha.alphas.iter().map(|a| (1.0 - a).max(0.0)).sum()
}

/// Probability exponent `sum_j (2j - 1 + |m - n|) alpha_j`, `j = 1` being the
/// largest exponent.
pub fn exponent_weight(alpha: &ExponentVector) -> f64 {
    let offset = alpha.m.abs_diff(alpha.n);
    alpha.alphas.iter().enumerate().map(|(j, a)| (2 * j + 1 + offset) as f64 * a).sum()
}

/// Transmit/receive antenna counts of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub m: usize,
    pub n: usize,
}

impl Shape {
    pub fn new(m: usize, n: usize) -> Result<Self, ExponentError> {
        if m == 0 || n == 0 {
            return Err(ExponentError::EmptyShape { m, n });
        }
        Ok(Shape { m, n })
    }

    fn len(&self) -> usize {
        self.m.min(self.n)
    }

    fn weight(&self, j: usize) -> u64 {
        (2 * j + 1 + self.m.abs_diff(self.n)) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchMethod {
    /// Exhaustive search on a grid of spacing `step` over `[0, 1]`.
    Grid { step: f64 },
    /// Grid search, then coordinate descent until a pass gains less than `tol`.
    GridRefine { step: f64, tol: f64 },
}

impl Default for SearchMethod {
    fn default() -> Self {
        SearchMethod::GridRefine { step: 0.01, tol: 1e-4 }
    }
}

impl SearchMethod {
    pub fn step(&self) -> f64 {
        match *self {
            SearchMethod::Grid { step } | SearchMethod::GridRefine { step, .. } => step,
        }
    }
}

/// Lowest-weight grid vector for one attainable value of `S`.
#[derive(Debug, Clone)]
struct FrontierPoint {
    s: f64,
    weight: u64,
    ticks: Vec<u32>,
}

/// Per-shape staircase of `(S, weight)` pairs not dominated by any pair with
/// both smaller `S` and smaller weight, ordered by increasing weight.
#[derive(Debug, Clone)]
struct Frontier {
    shape: Shape,
    points: Vec<FrontierPoint>,
}

impl Frontier {
    fn build(shape: Shape, ticks: u32) -> Frontier {
        let k = shape.len();
        let total = k as u64 * u64::from(ticks);
        // best[(total - sum of ticks)] = (weight, argmin)
        let mut best: Vec<Option<(u64, Vec<u32>)>> = vec![None; total as usize + 1];
        let mut current = vec![0u32; k];
        enumerate_ordered(&shape, ticks, 0, ticks, 0, 0, &mut current, &mut best);

        let mut points = Vec::new();
        let mut running = u64::MAX;
        for (s_ticks, slot) in best.into_iter().enumerate() {
            if let Some((weight, argmin)) = slot {
                if weight < running {
                    running = weight;
                    points.push(FrontierPoint {
                        s: s_ticks as f64 / f64::from(ticks),
                        weight,
                        ticks: argmin,
                    });
                }
            }
        }
        points.reverse();
        Frontier { shape, points }
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_ordered(
    shape: &Shape,
    ticks: u32,
    j: usize,
    upper: u32,
    tick_sum: u64,
    weight: u64,
    current: &mut Vec<u32>,
    best: &mut [Option<(u64, Vec<u32>)>],
) {
    if j == current.len() {
        let s_ticks = (current.len() as u64 * u64::from(ticks) - tick_sum) as usize;
        match &best[s_ticks] {
            Some((w, _)) if *w <= weight => {}
            _ => best[s_ticks] = Some((weight, current.clone())),
        }
        return;
    }
    let w = shape.weight(j);
    for t in 0..=upper {
        current[j] = t;
        enumerate_ordered(
            shape,
            ticks,
            j + 1,
            t,
            tick_sum + u64::from(t),
            weight + w * u64::from(t),
            current,
            best,
        );
    }
}

/// Exponent vectors attaining the minimum, one per shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentOptimum {
    pub value: f64,
    pub exponents: Vec<ExponentVector>,
}

/// Reusable search over a fixed list of shapes; the grid frontiers do not
/// depend on the constraint.
#[derive(Debug, Clone)]
pub struct ExponentSearch {
    frontiers: Vec<Frontier>,
    ticks: u32,
    method: SearchMethod,
}

impl ExponentSearch {
    pub fn new(shapes: &[Shape], method: SearchMethod) -> Result<Self, ExponentError> {
        let step = method.step();
        if !(step > 0.0 && step <= 1.0) {
            return Err(ExponentError::InvalidStep(step));
        }
        let ticks = (1.0 / step).round().max(1.0) as u32;
        for s in shapes {
            Shape::new(s.m, s.n)?;
        }
        let frontiers = shapes.iter().map(|&s| Frontier::build(s, ticks)).collect();
        Ok(ExponentSearch { frontiers, ticks, method })
    }

    /// Minimizes the total weight over exponent vectors whose `S` values
    /// satisfy `feasible`, which must only get harder to satisfy as any `S`
    /// grows. Returns `None` if no grid point is feasible.
    pub fn minimize<F>(&self, feasible: F) -> Option<ExponentOptimum>
    where
        F: Fn(&[f64]) -> bool,
    {
        let mut s_buf = vec![0.0; self.frontiers.len()];
        let mut choice = vec![0usize; self.frontiers.len()];
        let mut best: Option<(u64, Vec<usize>)> = None;
        self.search(0, 0, &mut s_buf, &mut choice, &mut best, &feasible);
        let (_, picks) = best?;

        let mut alphas: Vec<Vec<f64>> = picks
            .iter()
            .zip(&self.frontiers)
            .map(|(&p, f)| f.points[p].ticks.iter().map(|&t| f64::from(t) / f64::from(self.ticks)).collect())
            .collect();
        if let SearchMethod::GridRefine { tol, .. } = self.method {
            self.refine(&mut alphas, tol, &feasible);
        }
        let exponents: Vec<ExponentVector> = alphas
            .into_iter()
            .zip(&self.frontiers)
            .map(|(a, f)| ExponentVector { alphas: a, m: f.shape.m, n: f.shape.n })
            .collect();
        let value = exponents.iter().map(exponent_weight).sum();
        Some(ExponentOptimum { value, exponents })
    }

    fn search<F>(
        &self,
        depth: usize,
        weight: u64,
        s_buf: &mut [f64],
        choice: &mut [usize],
        best: &mut Option<(u64, Vec<usize>)>,
        feasible: &F,
    ) where
        F: Fn(&[f64]) -> bool,
    {
        if depth == self.frontiers.len() {
            if feasible(s_buf) && best.as_ref().is_none_or(|(w, _)| weight < *w) {
                *best = Some((weight, choice.to_vec()));
            }
            return;
        }
        let last = depth + 1 == self.frontiers.len();
        for (idx, pt) in self.frontiers[depth].points.iter().enumerate() {
            let w = weight + pt.weight;
            if best.as_ref().is_some_and(|(b, _)| w >= *b) {
                // points are sorted by weight
                break;
            }
            s_buf[depth] = pt.s;
            choice[depth] = idx;
            if last {
                if feasible(s_buf) {
                    *best = Some((w, choice.to_vec()));
                    break;
                }
            } else {
                self.search(depth + 1, w, s_buf, choice, best, feasible);
            }
        }
    }

    fn refine<F>(&self, alphas: &mut [Vec<f64>], tol: f64, feasible: &F)
    where
        F: Fn(&[f64]) -> bool,
    {
        let s_values = |alphas: &[Vec<f64>]| -> Vec<f64> {
            alphas.iter().map(|a| a.iter().map(|x| (1.0 - x).max(0.0)).sum()).collect()
        };
        for _ in 0..1000 {
            let mut gain = 0.0;
            for (si, front) in self.frontiers.iter().enumerate() {
                for j in 0..alphas[si].len() {
                    let floor = alphas[si].get(j + 1).copied().unwrap_or(0.0);
                    let cur = alphas[si][j];
                    if cur <= floor {
                        continue;
                    }
                    let try_at = |v: f64, alphas: &mut [Vec<f64>]| {
                        alphas[si][j] = v;
                        let ok = feasible(&s_values(alphas));
                        alphas[si][j] = cur;
                        ok
                    };
                    let new = if try_at(floor, alphas) {
                        floor
                    } else {
                        let (mut lo, mut hi) = (floor, cur);
                        for _ in 0..64 {
                            let mid = 0.5 * (lo + hi);
                            if try_at(mid, alphas) {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        hi
                    };
                    if cur - new < MIN_MOVE {
                        // only the constraint's slack is left
                        continue;
                    }
                    gain += front.shape.weight(j) as f64 * (cur - new);
                    alphas[si][j] = new;
                }
            }
            if gain < tol {
                break;
            }
        }
    }
}

/// Refinement steps smaller than this are discarded.
const MIN_MOVE: f64 = 1e-9;

/// Infimum of the total exponent weight over the outage set described by
/// `feasible`; `+inf` when the set is empty on the grid.
pub fn minimize_exponent<F>(shapes: &[Shape], feasible: F, method: SearchMethod) -> Result<f64, ExponentError>
where
    F: Fn(&[f64]) -> bool,
{
    let search = ExponentSearch::new(shapes, method)?;
    Ok(search.minimize(feasible).map_or(f64::INFINITY, |o| o.value))
}

/// `S1 S4 / (S1 + S4)`, taken as 0 when both vanish.
pub fn harmonic_dof(s1: f64, s4: f64) -> f64 {
    let total = s1 + s4;
    if total <= 0.0 {
        0.0
    } else {
        s1 * s4 / total
    }
}

/// Half-duplex multi-hop DMT of dynamic compress-and-forward, evaluated for
/// many multiplexing gains with one pair of grid frontiers.
#[derive(Debug, Clone)]
pub struct DcfCurve {
    search: ExponentSearch,
}

impl DcfCurve {
    pub fn new(config: &AntennaConfig, method: SearchMethod) -> Result<Self, ExponentError> {
        let shapes = [Shape::new(config.m1(), config.mr())?, Shape::new(config.mr(), config.m2())?];
        Ok(DcfCurve { search: ExponentSearch::new(&shapes, method)? })
    }

    pub fn optimum(&self, r: f64) -> Result<ExponentOptimum, ExponentError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(ExponentError::InvalidMultiplexing(r));
        }
        Ok(self
            .search
            .minimize(|s| harmonic_dof(s[0], s[1]) <= r + TOLERANCE)
            .expect("all-ones exponents give zero degrees of freedom"))
    }

    pub fn value(&self, r: f64) -> Result<f64, ExponentError> {
        Ok(self.optimum(r)?.value)
    }
}

/// DCF diversity at multiplexing gain `r` with the default search.
pub fn dcf_dmt(config: &AntennaConfig, r: f64) -> Result<f64, ExponentError> {
    DcfCurve::new(config, SearchMethod::default())?.value(r)
}

/// Full-duplex CF exponent for user 1, `min(d_{M1,Mr}(r1), d_{Mr,M2}(r1))`.
pub fn cf_exponent(config: &AntennaConfig, r1: f64) -> Result<f64, ExponentError> {
    let max = config.m_star().min(config.mr()) as f64;
    if !(r1 >= -TOLERANCE && r1 <= max + TOLERANCE) {
        return Err(DmtError::MultiplexingOutOfRange { r: r1, max }.into());
    }
    let uplink = dmt_value(config.m1(), config.mr(), r1)?;
    let downlink = dmt_value(config.mr(), config.m2(), r1)?;
    Ok(uplink.min(downlink))
}

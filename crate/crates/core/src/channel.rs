//! Quasi-static Rayleigh MIMO channels and their log-det capacities.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponent::ExponentVector;

/// Gram eigenvalues below this are treated as exactly zero.
pub const ZERO_EIGENVALUE: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("antenna counts must be at least 1, got ({m1}, {mr}, {m2})")]
    ZeroAntennas { m1: usize, mr: usize, m2: usize },
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} entries for the matrix, got {got}")]
    EntryCount { expected: usize, got: usize },
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("SNR must be a finite positive ratio, got {0}")]
    InvalidSnr(f64),
    #[error("eigenvalue exponents need SNR above 1 (0 dB), got {0}")]
    SnrTooLow(f64),
    #[error("transmit antenna count must be at least 1")]
    ZeroTransmitAntennas,
}

/// An `(M1, Mr, M2)` system: antennas at user 1, the relay and user 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAntennas", into = "RawAntennas")]
pub struct AntennaConfig {
    m1: usize,
    mr: usize,
    m2: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAntennas {
    m1: usize,
    mr: usize,
    m2: usize,
}

impl TryFrom<RawAntennas> for AntennaConfig {
    type Error = ChannelError;

    fn try_from(raw: RawAntennas) -> Result<Self, Self::Error> {
        AntennaConfig::new(raw.m1, raw.mr, raw.m2)
    }
}

impl From<AntennaConfig> for RawAntennas {
    fn from(c: AntennaConfig) -> Self {
        RawAntennas { m1: c.m1, mr: c.mr, m2: c.m2 }
    }
}

impl AntennaConfig {
    pub fn new(m1: usize, mr: usize, m2: usize) -> Result<Self, ChannelError> {
        if m1 == 0 || mr == 0 || m2 == 0 {
            return Err(ChannelError::ZeroAntennas { m1, mr, m2 });
        }
        Ok(AntennaConfig { m1, mr, m2 })
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn mr(&self) -> usize {
        self.mr
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    /// `min(M1, M2)`, the antenna count of the weaker user.
    pub fn m_star(&self) -> usize {
        self.m1.min(self.m2)
    }

    /// The same system with the two users swapped.
    pub fn mirrored(&self) -> Self {
        AntennaConfig { m1: self.m2, mr: self.mr, m2: self.m1 }
    }
}

impl fmt::Display for AntennaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.m1, self.mr, self.m2)
    }
}

/// Dense complex channel matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self, ChannelError> {
        if rows == 0 || cols == 0 {
            return Err(ChannelError::EmptyMatrix { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(ChannelError::EntryCount { expected: rows * cols, got: entries.len() });
        }
        if let Some(idx) = entries.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(ChannelError::NonFinite { row: idx / cols, col: idx % cols });
        }
        Ok(ChannelMatrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ChannelMatrix { rows, cols, entries: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.entries[i * size + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// A 1x1 matrix holding `gain`.
    pub fn scalar(gain: Complex64) -> Self {
        ChannelMatrix::new(1, 1, vec![gain]).expect("scalar gain must be finite")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    /// Number of (possibly zero) Gram eigenvalues: `min(rows, cols)`.
    pub fn rank_bound(&self) -> usize {
        self.rows.min(self.cols)
    }

    fn scaled(&self, factor: f64) -> ChannelMatrix {
        ChannelMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &ChannelMatrix) -> Result<ChannelMatrix, ChannelError> {
        if self.rows != other.rows {
            return Err(ChannelError::EntryCount {
                expected: self.rows * other.cols,
                got: other.rows * other.cols,
            });
        }
        let cols = self.cols + other.cols;
        let mut entries = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            entries.extend_from_slice(&self.entries[r * self.cols..(r + 1) * self.cols]);
            entries.extend_from_slice(&other.entries[r * other.cols..(r + 1) * other.cols]);
        }
        Ok(ChannelMatrix { rows: self.rows, cols, entries })
    }

    /// Eigenvalues of the Hermitian Gram matrix, sorted nonincreasing.
    ///
    /// Uses `H H^†` or `H^† H`, whichever is smaller; both share the same
    /// nonzero spectrum. Tiny negative round-off is clipped to zero.
    pub fn gram_eigenvalues(&self) -> Vec<f64> {
        let k = self.rank_bound();
        if k == 1 {
            return vec![self.entries.iter().map(|z| z.norm_sqr()).sum()];
        }
        let h = DMatrix::from_row_slice(self.rows, self.cols, &self.entries);
        let gram = if self.rows <= self.cols { &h * h.adjoint() } else { h.adjoint() * &h };
        let mut eig: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|&l| l.max(0.0)).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig
    }
}

/// One draw of the four channel matrices of the two-way relay channel.
///
/// `h1`, `h2` are the uplinks into the relay (`Mr x M1`, `Mr x M2`); `h3`,
/// `h4` are the relay's downlinks to user 1 and user 2 (`M1 x Mr`, `M2 x Mr`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h1: ChannelMatrix,
    pub h2: ChannelMatrix,
    pub h3: ChannelMatrix,
    pub h4: ChannelMatrix,
}

impl ChannelRealization {
    /// Checks the matrix shapes against `config`.
    pub fn matches(&self, config: &AntennaConfig) -> bool {
        let (m1, mr, m2) = (config.m1, config.mr, config.m2);
        (self.h1.rows, self.h1.cols) == (mr, m1)
            && (self.h2.rows, self.h2.cols) == (mr, m2)
            && (self.h3.rows, self.h3.cols) == (m1, mr)
            && (self.h4.rows, self.h4.cols) == (m2, mr)
    }

    /// A `(1,1,1)` realization with the given scalar gains.
    pub fn scalar(h1: f64, h2: f64, h3: f64, h4: f64) -> Self {
        let s = |g: f64| ChannelMatrix::scalar(Complex64::new(g, 0.0));
        ChannelRealization { h1: s(h1), h2: s(h2), h3: s(h3), h4: s(h4) }
    }
}

/// Signal-to-noise ratio held both as a linear ratio and in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    linear: f64,
    db: f64,
}

impl SnrPoint {
    pub fn from_linear(linear: f64) -> Result<Self, ChannelError> {
        if !(linear.is_finite() && linear > 0.0) {
            return Err(ChannelError::InvalidSnr(linear));
        }
        Ok(SnrPoint { linear, db: 10.0 * linear.log10() })
    }

    pub fn from_db(db: f64) -> Result<Self, ChannelError> {
        let linear = 10f64.powf(db / 10.0);
        if !(db.is_finite() && linear.is_finite() && linear > 0.0) {
            return Err(ChannelError::InvalidSnr(linear));
        }
        Ok(SnrPoint { linear, db })
    }

    pub fn linear(&self) -> f64 {
        self.linear
    }

    pub fn db(&self) -> f64 {
        self.db
    }
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

fn sample_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ChannelMatrix {
    let entries = (0..rows * cols).map(|_| cn01(rng)).collect();
    ChannelMatrix { rows, cols, entries }
}

/// Draws i.i.d. `CN(0,1)` entries for `h1`, `h2`, `h3`, `h4` in that order,
/// each row-major, real part before imaginary part.
pub fn sample_realization<R: Rng + ?Sized>(config: &AntennaConfig, rng: &mut R) -> ChannelRealization {
    let (m1, mr, m2) = (config.m1, config.mr, config.m2);
    let h1 = sample_matrix(mr, m1, rng);
    let h2 = sample_matrix(mr, m2, rng);
    let h3 = sample_matrix(m1, mr, rng);
    let h4 = sample_matrix(m2, mr, rng);
    ChannelRealization { h1, h2, h3, h4 }
}

/// `sum_j log2(1 + scale * lambda_j)` over the Gram eigenvalues of `h`.
pub fn log_det_eye_plus(h: &ChannelMatrix, scale: f64) -> f64 {
    h.gram_eigenvalues().iter().map(|&l| (scale * l).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// `log2 det(I + snr / m_tx * H H^†)` in bits.
pub fn capacity(h: &ChannelMatrix, m_tx: usize, snr: SnrPoint) -> Result<f64, ChannelError> {
    if m_tx == 0 {
        return Err(ChannelError::ZeroTransmitAntennas);
    }
    Ok(log_det_eye_plus(h, snr.linear / m_tx as f64))
}

/// [`capacity`] with half the transmit power: `log2 det(I + snr / (2 m_tx) * H H^†)`.
pub fn half_power_capacity(h: &ChannelMatrix, m_tx: usize, snr: SnrPoint) -> Result<f64, ChannelError> {
    if m_tx == 0 {
        return Err(ChannelError::ZeroTransmitAntennas);
    }
    Ok(log_det_eye_plus(h, snr.linear / (2.0 * m_tx as f64)))
}

/// Joint capacity of two transmitters into one receiver,
/// `log2 det(I + snr/m_a H_a H_a^† + snr/m_b H_b H_b^†)`.
pub fn sum_capacity(
    ha: &ChannelMatrix,
    ma: usize,
    hb: &ChannelMatrix,
    mb: usize,
    snr: SnrPoint,
) -> Result<f64, ChannelError> {
    if ma == 0 || mb == 0 {
        return Err(ChannelError::ZeroTransmitAntennas);
    }
    let stacked = ha.scaled((ma as f64).recip().sqrt()).hstack(&hb.scaled((mb as f64).recip().sqrt()))?;
    Ok(log_det_eye_plus(&stacked, snr.linear))
}

/// Eigenvalue decay exponents `alpha_j = -ln(lambda_j) / ln(snr)`.
///
/// Zero eigenvalues map to `+inf`. Eigenvalues above 1 yield negative exponents.
pub fn eigen_exponents(h: &ChannelMatrix, snr: SnrPoint) -> Result<ExponentVector, ChannelError> {
    if snr.linear <= 1.0 {
        return Err(ChannelError::SnrTooLow(snr.linear));
    }
    let ln_snr = snr.linear.ln();
    // eigenvalues come back nonincreasing, so exponents are nondecreasing
    let mut alphas: Vec<f64> = h
        .gram_eigenvalues()
        .into_iter()
        .map(|l| if l < ZERO_EIGENVALUE { f64::INFINITY } else { -l.ln() / ln_snr })
        .collect();
    alphas.reverse();
    Ok(ExponentVector::from_channel(alphas, h.rows, h.cols))
}

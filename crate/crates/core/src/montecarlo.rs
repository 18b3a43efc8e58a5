//! Monte Carlo outage estimation and diversity fitting.
//!
//! Trials are split into fixed chunks of [`CHUNK_TRIALS`]. Chunk `k` draws
//! from a ChaCha8 generator seeded with the plan seed and set to stream `k`,
//! so counts depend only on `(seed, trials)` and never on the worker count.
//! Every SNR point reuses the same streams, which makes the estimates along a
//! grid positively correlated and steadies the fitted slope.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{DmtError, MultiplexingPair};
use crate::channel::{sample_realization, AntennaConfig, ChannelError, SnrPoint};
use crate::protocols::{Protocol, ProtocolError, RateAssignment};

/// Trials per independently seeded chunk.
pub const CHUNK_TRIALS: u64 = 1 << 14;

/// Points with fewer failures than this are left out of the slope fit.
pub const MIN_FAILURES: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("SNR grid needs at least two strictly increasing finite points")]
    InvalidGrid,
    #[error("trial plan needs at least one trial and one worker")]
    InvalidPlan,
    #[error("scaled rates need SNR above 0 dB, got {0} dB")]
    SnrTooLow(f64),
    #[error("DCF carries only user 1's message, so r2 must be 0 (got {0})")]
    OneWayRate(f64),
    #[error("only {usable} SNR points have at least {MIN_FAILURES} failures for message {message}; need 2")]
    InsufficientData { message: u8, usable: usize },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Dmt(#[from] DmtError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Message {
    One,
    Two,
}

impl Message {
    pub const BOTH: [Message; 2] = [Message::One, Message::Two];

    pub fn index(&self) -> usize {
        match self {
            Message::One => 0,
            Message::Two => 1,
        }
    }

    pub fn number(&self) -> u8 {
        self.index() as u8 + 1
    }
}

/// SNR sweep in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    points_db: Vec<f64>,
}

impl SnrGrid {
    pub fn new(points_db: Vec<f64>) -> Result<Self, MonteCarloError> {
        let ok = points_db.len() >= 2
            && points_db.iter().all(|p| p.is_finite())
            && points_db.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(MonteCarloError::InvalidGrid);
        }
        Ok(SnrGrid { points_db })
    }

    /// `start, start + step, ...` up to and including `stop` (within half a step).
    pub fn from_range(start_db: f64, stop_db: f64, step_db: f64) -> Result<Self, MonteCarloError> {
        if !(step_db > 0.0 && start_db.is_finite() && stop_db.is_finite()) {
            return Err(MonteCarloError::InvalidGrid);
        }
        let n = ((stop_db - start_db) / step_db + 0.5).floor();
        if n < 1.0 {
            return Err(MonteCarloError::InvalidGrid);
        }
        Self::new((0..=n as usize).map(|i| start_db + i as f64 * step_db).collect())
    }

    pub fn points_db(&self) -> &[f64] {
        &self.points_db
    }

    pub fn points(&self) -> Result<Vec<SnrPoint>, MonteCarloError> {
        Ok(self.points_db.iter().map(|&db| SnrPoint::from_db(db)).collect::<Result<_, _>>()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub trials_per_point: u64,
    pub seed: u64,
    pub workers: usize,
}

impl TrialPlan {
    pub fn new(trials_per_point: u64, seed: u64, workers: usize) -> Result<Self, MonteCarloError> {
        if trials_per_point == 0 || workers == 0 {
            return Err(MonteCarloError::InvalidPlan);
        }
        Ok(TrialPlan { trials_per_point, seed, workers })
    }

    pub fn default_workers() -> usize {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Outage counts for both messages at one SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    snr: SnrPoint,
    trials: u64,
    failures: [u64; 2],
    p_hat: [f64; 2],
    stderr: [f64; 2],
}

impl OutageEstimate {
    pub fn from_counts(snr: SnrPoint, trials: u64, failures: [u64; 2]) -> Self {
        assert!(trials > 0, "an estimate needs at least one trial");
        assert!(failures.iter().all(|&f| f <= trials), "failures cannot exceed trials");
        let n = trials as f64;
        let p_hat = failures.map(|f| f as f64 / n);
        let stderr = p_hat.map(|p| (p * (1.0 - p) / n).sqrt());
        OutageEstimate { snr, trials, failures, p_hat, stderr }
    }

    pub fn snr(&self) -> SnrPoint {
        self.snr
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn failures(&self, m: Message) -> u64 {
        self.failures[m.index()]
    }

    pub fn p_hat(&self, m: Message) -> f64 {
        self.p_hat[m.index()]
    }

    pub fn stderr(&self, m: Message) -> f64 {
        self.stderr[m.index()]
    }

    /// 95% upper bound `3 / trials` for a point without failures.
    pub fn rule_of_three(&self) -> f64 {
        3.0 / self.trials as f64
    }
}

/// Least-squares slope of `-log10 p` against `log10 snr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub message: Message,
    pub d_hat: f64,
    /// Standard error of the slope; zero when only two points are fitted.
    pub stderr: f64,
    pub intercept: f64,
    pub points_used: usize,
    /// SNRs (dB) left out for having fewer than [`MIN_FAILURES`] failures.
    pub excluded_db: Vec<f64>,
}

/// `R_i = r_i log2(snr)`.
pub fn scaled_rates(r: &MultiplexingPair, snr: SnrPoint) -> Result<RateAssignment, MonteCarloError> {
    if snr.linear() <= 1.0 {
        return Err(MonteCarloError::SnrTooLow(snr.db()));
    }
    let bits = snr.linear().log2();
    Ok(RateAssignment::new(r.r1 * bits, r.r2 * bits)?)
}

fn chunk_stream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `plan.trials_per_point` calls of `trial` and counts outages per message.
pub fn estimate_with<F>(snr: SnrPoint, plan: &TrialPlan, trial: F) -> Result<OutageEstimate, MonteCarloError>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(bool, bool), MonteCarloError> + Sync,
{
    TrialPlan::new(plan.trials_per_point, plan.seed, plan.workers)?;
    let total = plan.trials_per_point;
    let chunks = total.div_ceil(CHUNK_TRIALS);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
    let failures = pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = chunk_stream(plan.seed, chunk);
                let n = CHUNK_TRIALS.min(total - chunk * CHUNK_TRIALS);
                let mut counts = [0u64; 2];
                for _ in 0..n {
                    let (a, b) = trial(&mut rng)?;
                    counts[0] += u64::from(a);
                    counts[1] += u64::from(b);
                }
                Ok::<_, MonteCarloError>(counts)
            })
            .try_reduce(|| [0, 0], |a, b| Ok([a[0] + b[0], a[1] + b[1]]))
    })?;
    Ok(OutageEstimate::from_counts(snr, total, failures))
}

fn check_rates(
    protocol: &Protocol,
    config: &AntennaConfig,
    r: &MultiplexingPair,
) -> Result<(), MonteCarloError> {
    if !protocol.two_way() && r.r2 != 0.0 {
        return Err(MonteCarloError::OneWayRate(r.r2));
    }
    r.validate(config)?;
    Ok(())
}

/// Empirical outage probability of `protocol` at multiplexing gains `r`.
pub fn estimate_outage(
    protocol: Protocol,
    config: &AntennaConfig,
    r: &MultiplexingPair,
    snr: SnrPoint,
    plan: &TrialPlan,
) -> Result<OutageEstimate, MonteCarloError> {
    check_rates(&protocol, config, r)?;
    let rates = scaled_rates(r, snr)?;
    estimate_with(snr, plan, |rng| {
        let real = sample_realization(config, rng);
        let v = protocol.evaluate(&real, snr, rates)?;
        Ok((v.message1_in_outage, v.message2_in_outage))
    })
}

/// [`estimate_outage`] at every point of `grid`.
pub fn sweep(
    protocol: Protocol,
    config: &AntennaConfig,
    r: &MultiplexingPair,
    grid: &SnrGrid,
    plan: &TrialPlan,
) -> Result<Vec<OutageEstimate>, MonteCarloError> {
    grid.points()?.into_iter().map(|snr| estimate_outage(protocol, config, r, snr, plan)).collect()
}

/// Fits the diversity of `message` from a sweep.
pub fn fit_diversity(estimates: &[OutageEstimate], message: Message) -> Result<SlopeFit, MonteCarloError> {
    let (used, skipped): (Vec<&OutageEstimate>, Vec<&OutageEstimate>) =
        estimates.iter().partition(|e| e.failures(message) >= MIN_FAILURES);
    for e in &skipped {
        if e.failures(message) == 0 {
            log::info!(
                "message {} at {} dB: no failures in {} trials, p < {:.3e}",
                message.number(),
                e.snr().db(),
                e.trials(),
                e.rule_of_three()
            );
        }
    }
    if used.len() < 2 {
        return Err(MonteCarloError::InsufficientData { message: message.number(), usable: used.len() });
    }
    let xs: Vec<f64> = used.iter().map(|e| e.snr().linear().log10()).collect();
    let ys: Vec<f64> = used.iter().map(|e| -e.p_hat(message).log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        message,
        d_hat: slope,
        stderr,
        intercept,
        points_used: used.len(),
        excluded_db: skipped.iter().map(|e| e.snr().db()).collect(),
    })
}

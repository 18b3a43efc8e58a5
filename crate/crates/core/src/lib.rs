//! Diversity-multiplexing tradeoff (DMT) toolkit for MIMO relay channels.
//!
//! Two settings are covered:
//!
//! * the separated two-way relay channel with a full-duplex relay, where two
//!   users exchange messages only through the relay, served either by
//!   compress-and-forward (CF) or decode-and-forward (DF);
//! * the one-way multi-hop channel with a half-duplex relay, served by dynamic
//!   compress-and-forward (DCF), where the relay's listening time adapts to the
//!   first-hop realization.
//!
//! Every result is available two ways: as an analytic or numerically optimized
//! tradeoff curve ([`analytic`], [`exponent`]) and as a Monte Carlo outage
//! estimate whose log-log slope approximates the diversity gain
//! ([`protocols`], [`montecarlo`]). The [`config`] and [`run`] modules drive
//! both from a TOML job file.
//!
//! Rates are in bits per channel use throughout.

pub mod analytic;
pub mod channel;
pub mod config;
pub mod exponent;
pub mod montecarlo;
pub mod protocols;
pub mod run;

pub use analytic::{
    cf_dmt, df_optimal, df_region, df_symmetric_dmt, df_threshold, dmt_inverse, dmt_value, outer_bound,
    DiversityPair, DmtCurve, DmtError, LinearConstraint, MultiplexingPair, RateRegion,
};
pub use channel::{
    capacity, eigen_exponents, half_power_capacity, sample_realization, AntennaConfig, ChannelError,
    ChannelMatrix, ChannelRealization, SnrPoint,
};
pub use exponent::{
    cf_exponent, dcf_dmt, exponent_weight, minimize_exponent, s_value, ExponentError, ExponentVector,
    SearchMethod, Shape,
};
pub use montecarlo::{
    estimate_outage, fit_diversity, scaled_rates, Message, MonteCarloError, OutageEstimate, SlopeFit,
    SnrGrid, TrialPlan,
};
pub use protocols::{
    cf_outage, dcf_listen_fraction, dcf_outage, df_outage, ListenRule, OutageVerdict, Protocol,
    RateAssignment,
};

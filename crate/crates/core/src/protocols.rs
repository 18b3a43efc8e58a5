//! Per-realization outage predicates.
//!
//! * CF, full duplex: message 1 survives if `R1 <= [C4 - 1]^+` and
//!   `R1 <= C1_half`; message 2 symmetrically with `C3`, `C2_half`.
//! * DF, full duplex: the relay must decode both messages (MIMO multiple
//!   access), then each user must receive the other's message from the relay.
//! * DCF, half duplex, one-way: the relay listens for a fraction
//!   `t = (1 + R1) / C1` of the block, then forwards a quantization of what it
//!   heard over the remaining `1 - t`.
//!
//! All inequalities are strict, so a rate exactly at a threshold is served.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{capacity, half_power_capacity, sum_capacity, ChannelRealization, SnrPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("rates must be finite and nonnegative, got ({0}, {1})")]
    InvalidRate(f64, f64),
    #[error("channel matrices have inconsistent shapes")]
    Shape,
    #[error("fixed listening fraction must lie in (0, 1), got {0}")]
    InvalidListenFraction(f64),
}

/// Attempted rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateAssignment {
    rate1: f64,
    rate2: f64,
}

impl RateAssignment {
    pub fn new(rate1: f64, rate2: f64) -> Result<Self, ProtocolError> {
        if !(rate1.is_finite() && rate2.is_finite() && rate1 >= 0.0 && rate2 >= 0.0) {
            return Err(ProtocolError::InvalidRate(rate1, rate2));
        }
        Ok(RateAssignment { rate1, rate2 })
    }

    /// Multi-hop mode: only user 1 transmits.
    pub fn one_way(rate1: f64) -> Result<Self, ProtocolError> {
        Self::new(rate1, 0.0)
    }

    pub fn rate1(&self) -> f64 {
        self.rate1
    }

    pub fn rate2(&self) -> f64 {
        self.rate2
    }
}

/// Which inequality put a message in outage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum OutageEvent {
    /// CF: `R1 > [C4 - 1]^+`.
    CfDownlink1 = 0,
    /// CF: `R1 > C1_half`.
    CfUplink1,
    /// CF: `R2 > [C3 - 1]^+`.
    CfDownlink2,
    /// CF: `R2 > C2_half`.
    CfUplink2,
    /// DF: `R1 > C1` at the relay.
    DfMacUser1,
    /// DF: `R2 > C2` at the relay.
    DfMacUser2,
    /// DF: `R1 + R2` above the relay's joint capacity.
    DfMacSum,
    /// DF: `R1 > C4`.
    DfBroadcast1,
    /// DF: `R2 > C3`.
    DfBroadcast2,
    /// DCF: `t > 1`, the relay cannot gather enough before the block ends.
    DcfListenWindow,
    /// DCF: `R1 > (1 - t) C4 - t`.
    DcfForward,
    /// DCF: `R1 > t C1_half`.
    DcfQuantized,
}

impl OutageEvent {
    const ALL: [OutageEvent; 12] = [
        OutageEvent::CfDownlink1,
        OutageEvent::CfUplink1,
        OutageEvent::CfDownlink2,
        OutageEvent::CfUplink2,
        OutageEvent::DfMacUser1,
        OutageEvent::DfMacUser2,
        OutageEvent::DfMacSum,
        OutageEvent::DfBroadcast1,
        OutageEvent::DfBroadcast2,
        OutageEvent::DcfListenWindow,
        OutageEvent::DcfForward,
        OutageEvent::DcfQuantized,
    ];

    /// Messages this event puts in outage.
    pub fn affects(&self) -> (bool, bool) {
        use OutageEvent::*;
        match self {
            CfDownlink1 | CfUplink1 | DfBroadcast1 | DcfListenWindow | DcfForward | DcfQuantized => {
                (true, false)
            }
            CfDownlink2 | CfUplink2 | DfBroadcast2 => (false, true),
            DfMacUser1 | DfMacUser2 | DfMacSum => (true, true),
        }
    }
}

/// Set of fired [`OutageEvent`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventSet(u16);

impl EventSet {
    pub fn insert(&mut self, e: OutageEvent) {
        self.0 |= 1 << e as u8;
    }

    pub fn contains(&self, e: OutageEvent) -> bool {
        self.0 & (1 << e as u8) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = OutageEvent> + '_ {
        OutageEvent::ALL.into_iter().filter(|e| self.contains(*e))
    }

    fn flag(&mut self, e: OutageEvent, fired: bool) {
        if fired {
            self.insert(e);
        }
    }
}

/// Capacities seen by a predicate, in bits. Unused links are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutageDetail {
    pub events: EventSet,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c1_half: Option<f64>,
    pub c2_half: Option<f64>,
    pub mac_sum: Option<f64>,
    pub listen_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageVerdict {
    pub message1_in_outage: bool,
    pub message2_in_outage: bool,
    pub detail: Option<OutageDetail>,
}

impl OutageVerdict {
    fn from_detail(detail: OutageDetail) -> Self {
        let (m1, m2) =
            detail.events.iter().map(|e| e.affects()).fold((false, false), |(a, b), (x, y)| (a || x, b || y));
        OutageVerdict { message1_in_outage: m1, message2_in_outage: m2, detail: Some(detail) }
    }

    pub fn in_outage(&self, message: usize) -> bool {
        match message {
            1 => self.message1_in_outage,
            2 => self.message2_in_outage,
            _ => panic!("message index must be 1 or 2, got {message}"),
        }
    }
}

/// Relay listening rule for DCF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ListenRule {
    /// `t = (1 + R1) / C1`, chosen per realization.
    Dynamic,
    /// A fixed fraction in `(0, 1)`, the static baseline.
    Fixed(f64),
}

impl ListenRule {
    pub fn fixed(t: f64) -> Result<Self, ProtocolError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(ProtocolError::InvalidListenFraction(t));
        }
        Ok(ListenRule::Fixed(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    Cf,
    Df,
    Dcf(ListenRule),
}

impl Protocol {
    pub fn evaluate(
        &self,
        real: &ChannelRealization,
        snr: SnrPoint,
        rates: RateAssignment,
    ) -> Result<OutageVerdict, ProtocolError> {
        match self {
            Protocol::Cf => cf_outage(real, snr, rates),
            Protocol::Df => df_outage(real, snr, rates),
            Protocol::Dcf(rule) => dcf_outage_with(real, snr, rates.rate1, *rule),
        }
    }

    /// Whether the protocol carries user 2's message.
    pub fn two_way(&self) -> bool {
        !matches!(self, Protocol::Dcf(_))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Cf => f.write_str("CF"),
            Protocol::Df => f.write_str("DF"),
            Protocol::Dcf(_) => f.write_str("DCF"),
        }
    }
}

fn check_shapes(real: &ChannelRealization) -> Result<(), ProtocolError> {
    let mr = real.h1.rows();
    let ok = real.h2.rows() == mr
        && real.h3.cols() == mr
        && real.h4.cols() == mr
        && real.h3.rows() == real.h1.cols()
        && real.h4.rows() == real.h2.cols();
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::Shape)
    }
}

fn cap(h: &crate::channel::ChannelMatrix, snr: SnrPoint) -> f64 {
    capacity(h, h.cols(), snr).expect("matrices have at least one column")
}

fn half_cap(h: &crate::channel::ChannelMatrix, snr: SnrPoint) -> f64 {
    half_power_capacity(h, h.cols(), snr).expect("matrices have at least one column")
}

/// Full-duplex compress-and-forward.
pub fn cf_outage(
    real: &ChannelRealization,
    snr: SnrPoint,
    rates: RateAssignment,
) -> Result<OutageVerdict, ProtocolError> {
    check_shapes(real)?;
    let c3 = cap(&real.h3, snr);
    let c4 = cap(&real.h4, snr);
    let c1_half = half_cap(&real.h1, snr);
    let c2_half = half_cap(&real.h2, snr);
    let mut events = EventSet::default();
    events.flag(OutageEvent::CfDownlink1, rates.rate1 > (c4 - 1.0).max(0.0));
    events.flag(OutageEvent::CfUplink1, rates.rate1 > c1_half);
    events.flag(OutageEvent::CfDownlink2, rates.rate2 > (c3 - 1.0).max(0.0));
    events.flag(OutageEvent::CfUplink2, rates.rate2 > c2_half);
    Ok(OutageVerdict::from_detail(OutageDetail {
        events,
        c3: Some(c3),
        c4: Some(c4),
        c1_half: Some(c1_half),
        c2_half: Some(c2_half),
        ..OutageDetail::default()
    }))
}

/// Full-duplex decode-and-forward. A multiple-access failure at the relay
/// puts both messages in outage.
pub fn df_outage(
    real: &ChannelRealization,
    snr: SnrPoint,
    rates: RateAssignment,
) -> Result<OutageVerdict, ProtocolError> {
    check_shapes(real)?;
    let c1 = cap(&real.h1, snr);
    let c2 = cap(&real.h2, snr);
    let c3 = cap(&real.h3, snr);
    let c4 = cap(&real.h4, snr);
    let mac_sum = sum_capacity(&real.h1, real.h1.cols(), &real.h2, real.h2.cols(), snr)
        .map_err(|_| ProtocolError::Shape)?;
    let mut events = EventSet::default();
    events.flag(OutageEvent::DfMacUser1, rates.rate1 > c1);
    events.flag(OutageEvent::DfMacUser2, rates.rate2 > c2);
    events.flag(OutageEvent::DfMacSum, rates.rate1 + rates.rate2 > mac_sum);
    events.flag(OutageEvent::DfBroadcast1, rates.rate1 > c4);
    events.flag(OutageEvent::DfBroadcast2, rates.rate2 > c3);
    Ok(OutageVerdict::from_detail(OutageDetail {
        events,
        c1: Some(c1),
        c2: Some(c2),
        c3: Some(c3),
        c4: Some(c4),
        mac_sum: Some(mac_sum),
        ..OutageDetail::default()
    }))
}

/// `t = (1 + R1) / C1`; `+inf` when the first hop has zero capacity.
pub fn dcf_listen_fraction(real: &ChannelRealization, snr: SnrPoint, rate1: f64) -> f64 {
    listen_fraction_from(cap(&real.h1, snr), rate1)
}

fn listen_fraction_from(c1: f64, rate1: f64) -> f64 {
    if c1 > 0.0 {
        (1.0 + rate1) / c1
    } else {
        f64::INFINITY
    }
}

/// Half-duplex dynamic compress-and-forward.
pub fn dcf_outage(
    real: &ChannelRealization,
    snr: SnrPoint,
    rate1: f64,
) -> Result<OutageVerdict, ProtocolError> {
    dcf_outage_with(real, snr, rate1, ListenRule::Dynamic)
}

/// Half-duplex compress-and-forward with an explicit listening rule.
pub fn dcf_outage_with(
    real: &ChannelRealization,
    snr: SnrPoint,
    rate1: f64,
    rule: ListenRule,
) -> Result<OutageVerdict, ProtocolError> {
    check_shapes(real)?;
    RateAssignment::one_way(rate1)?;
    let c1 = cap(&real.h1, snr);
    let c4 = cap(&real.h4, snr);
    let c1_half = half_cap(&real.h1, snr);
    if c1 > 0.0 && c1_half < c1 - 1.0 {
        log::debug!("half-power uplink loses more than one bit: C1 = {c1}, C1_half = {c1_half}");
    }
    let t = match rule {
        ListenRule::Dynamic => listen_fraction_from(c1, rate1),
        ListenRule::Fixed(t) => t,
    };
    let mut events = EventSet::default();
    if t.is_infinite() || t > 1.0 {
        events.insert(OutageEvent::DcfListenWindow);
    }
    if t.is_finite() {
        events.flag(OutageEvent::DcfForward, rate1 > (1.0 - t) * c4 - t);
        events.flag(OutageEvent::DcfQuantized, rate1 > t * c1_half);
    }
    let mut verdict = OutageVerdict::from_detail(OutageDetail {
        events,
        c1: Some(c1),
        c4: Some(c4),
        c1_half: Some(c1_half),
        listen_fraction: Some(t),
        ..OutageDetail::default()
    });
    verdict.message2_in_outage = false;
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, AntennaConfig, ChannelMatrix};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn snr(linear: f64) -> SnrPoint {
        SnrPoint::from_linear(linear).unwrap()
    }

    fn rates(a: f64, b: f64) -> RateAssignment {
        RateAssignment::new(a, b).unwrap()
    }

    /// 1x1 realization from channel power gains.
    fn scalar(g1: f64, g2: f64, g3: f64, g4: f64) -> ChannelRealization {
        ChannelRealization::scalar(g1.sqrt(), g2.sqrt(), g3.sqrt(), g4.sqrt())
    }

    fn random(seed: u64, m1: usize, mr: usize, m2: usize) -> ChannelRealization {
        sample_realization(&AntennaConfig::new(m1, mr, m2).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn cf_examples() {
        let real = random(1, 2, 2, 1);
        let v = cf_outage(&real, snr(100.0), rates(0.0, 0.0)).unwrap();
        assert!(!v.message1_in_outage && !v.message2_in_outage);

        let mut real = random(2, 1, 2, 2);
        real.h4 = ChannelMatrix::zeros(2, 2);
        let v = cf_outage(&real, snr(1e6), rates(0.01, 0.0)).unwrap();
        assert!(v.message1_in_outage);
        assert!(v.detail.unwrap().events.contains(OutageEvent::CfDownlink1));

        let real = scalar(1.0, 1.0, 1.0, 1.0);
        let v = cf_outage(&real, snr(8.0), rates(1.0, 0.0)).unwrap();
        let d = v.detail.unwrap();
        assert!((d.c4.unwrap() - 9f64.log2()).abs() < 1e-12);
        assert!((d.c1_half.unwrap() - 5f64.log2()).abs() < 1e-12);
        assert!(9f64.log2() - 1.0 >= 1.0 && 5f64.log2() >= 1.0);
        assert!(!v.message1_in_outage);
    }

    #[test]
    fn df_examples() {
        let real = random(3, 2, 2, 2);
        let v = df_outage(&real, snr(10.0), rates(0.0, 0.0)).unwrap();
        assert!(!v.message1_in_outage && !v.message2_in_outage);

        let mut real = random(4, 1, 1, 1);
        real.h1 = ChannelMatrix::zeros(1, 1);
        let v = df_outage(&real, snr(1e3), rates(0.1, 0.0)).unwrap();
        assert!(v.message1_in_outage);

        // log2(1 + 3 + 3) = 2.807 > 2: served
        let real = scalar(1.0, 1.0, 100.0, 100.0);
        let v = df_outage(&real, snr(3.0), rates(1.0, 1.0)).unwrap();
        assert!((v.detail.unwrap().mac_sum.unwrap() - 7f64.log2()).abs() < 1e-12);
        assert!(7f64.log2() > 2.0);
        assert!(!v.message1_in_outage && !v.message2_in_outage);
        // log2 3 = 1.585 < 2: the sum constraint fires, individual ones (log2 2 = 1) do not
        let v = df_outage(&real, snr(1.0), rates(1.0, 1.0)).unwrap();
        let d = v.detail.unwrap();
        assert!(d.events.contains(OutageEvent::DfMacSum));
        assert!(!d.events.contains(OutageEvent::DfMacUser1));
        assert!(v.message1_in_outage && v.message2_in_outage);
    }

    #[test]
    fn listen_fraction_examples() {
        // C1 = log2(1 + 15) = 4
        let real = scalar(1.0, 1.0, 1.0, 1.0);
        assert!((dcf_listen_fraction(&real, snr(15.0), 1.0) - 0.5).abs() < 1e-15);
        assert!((dcf_listen_fraction(&real, snr(1.0), 0.0) - 1.0).abs() < 1e-15);
        let dead = scalar(0.0, 1.0, 1.0, 1.0);
        assert!(dcf_listen_fraction(&dead, snr(100.0), 1.0).is_infinite());
        let v = dcf_outage(&dead, snr(100.0), 1.0).unwrap();
        assert!(v.message1_in_outage);
        assert!(v.detail.unwrap().events.contains(OutageEvent::DcfListenWindow));
    }

    #[test]
    fn dcf_examples() {
        let strong = scalar(1e12, 1.0, 1.0, 1.0);
        let v = dcf_outage(&strong, snr(100.0), 0.0).unwrap();
        assert!(!v.message1_in_outage);

        // C1 = 1 with rate 1 gives t = 2
        let real = scalar(1.0, 1.0, 1.0, 1.0);
        let v = dcf_outage(&real, snr(1.0), 1.0).unwrap();
        assert_eq!(v.detail.unwrap().listen_fraction, Some(2.0));
        assert!(v.message1_in_outage);

        // t = 0.5: 1 > 0.5 * 4 - 0.5 = 1.5 is false, 1 > 0.5 * log2(8.5) = 1.54 is false
        let v = dcf_outage(&real, snr(15.0), 1.0).unwrap();
        let d = v.detail.unwrap();
        assert!((d.listen_fraction.unwrap() - 0.5).abs() < 1e-15);
        assert!((0.5 * d.c4.unwrap() - 0.5 - 1.5).abs() < 1e-12);
        assert!((0.5 * d.c1_half.unwrap() - 0.5 * 8.5f64.log2()).abs() < 1e-12);
        assert!(!v.message1_in_outage && !v.message2_in_outage);
    }

    #[test]
    fn fixed_listen_rule() {
        assert!(ListenRule::fixed(0.0).is_err());
        assert!(ListenRule::fixed(1.0).is_err());
        let rule = ListenRule::fixed(0.5).unwrap();
        // C4 = C1 = 4, C1_half = log2 8.5: 1 > 0.5*4 - 0.5 no, 1 > 0.5*3.09 no
        let real = scalar(1.0, 1.0, 1.0, 1.0);
        assert!(!dcf_outage_with(&real, snr(15.0), 1.0, rule).unwrap().message1_in_outage);
        // 1.6 > 1.54: the listening phase is too short
        let v = dcf_outage_with(&real, snr(15.0), 1.6, rule).unwrap();
        assert!(v.detail.unwrap().events.contains(OutageEvent::DcfQuantized));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RateAssignment::new(-1.0, 0.0).is_err());
        assert!(RateAssignment::new(f64::INFINITY, 0.0).is_err());
        let mut real = random(5, 2, 2, 2);
        real.h3 = ChannelMatrix::zeros(3, 2);
        assert_eq!(cf_outage(&real, snr(10.0), rates(1.0, 1.0)), Err(ProtocolError::Shape));
        assert!(dcf_outage(&random(6, 1, 1, 1), snr(10.0), -1.0).is_err());
    }

    #[test]
    fn dcf_threshold_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        use rand::Rng;
        for _ in 0..10_000 {
            let c1: f64 = rng.random_range(0.01..30.0);
            let c4: f64 = rng.random_range(0.0..30.0);
            let r: f64 = rng.random_range(0.0..20.0);
            let t = (1.0 + r) / c1;
            let lhs = (1.0 - t) * c4 - t;
            let expanded = (c1 * c4 - c4 - r * c4 - 1.0 - r) / c1;
            assert!((lhs - expanded).abs() <= 1e-9 * lhs.abs().max(1.0));
            // the forward event solved for R1
            let solved = (c1 * c4 - c4 - 1.0) / (1.0 + c1 + c4);
            assert_eq!(r > lhs, r > solved, "c1={c1} c4={c4} r={r}");
            // the quantization event solved for R1 (C1 > C1_half)
            let ch: f64 = rng.random_range(0.0..c1);
            assert_eq!(r > t * ch, r > ch / (c1 - ch), "c1={c1} ch={ch} r={r}");
        }
    }

    fn arb_realization() -> impl Strategy<Value = (ChannelRealization, u64)> {
        (any::<u64>(), 1usize..=3, 1usize..=3, 1usize..=3)
            .prop_map(|(seed, a, b, c)| (random(seed, a, b, c), seed))
    }

    proptest! {
        #[test]
        fn more_rate_never_helps((real, _) in arb_realization(), db in 0.0f64..40.0,
                                 r1 in 0.0f64..10.0, r2 in 0.0f64..10.0, bump1 in 0.0f64..3.0, bump2 in 0.0f64..3.0) {
            let s = SnrPoint::from_db(db).unwrap();
            let (lo, hi) = (rates(r1, r2), rates(r1 + bump1, r2 + bump2));
            for p in [Protocol::Cf, Protocol::Df] {
                let a = p.evaluate(&real, s, lo).unwrap();
                let b = p.evaluate(&real, s, hi).unwrap();
                prop_assert!(!a.message1_in_outage || b.message1_in_outage);
                prop_assert!(!a.message2_in_outage || b.message2_in_outage);
            }
            let a = dcf_outage(&real, s, r1).unwrap();
            let b = dcf_outage(&real, s, r1 + bump1).unwrap();
            prop_assert!(!a.message1_in_outage || b.message1_in_outage);
        }

        #[test]
        fn more_snr_never_hurts((real, _) in arb_realization(), db in -10.0f64..40.0, up in 0.0f64..20.0,
                                r1 in 0.0f64..10.0, r2 in 0.0f64..10.0) {
            let (lo, hi) = (SnrPoint::from_db(db).unwrap(), SnrPoint::from_db(db + up).unwrap());
            for p in [Protocol::Cf, Protocol::Df] {
                let a = p.evaluate(&real, hi, rates(r1, r2)).unwrap();
                let b = p.evaluate(&real, lo, rates(r1, r2)).unwrap();
                prop_assert!(!a.message1_in_outage || b.message1_in_outage);
                prop_assert!(!a.message2_in_outage || b.message2_in_outage);
            }
        }

        #[test]
        fn zero_rate_safety((real, _) in arb_realization(), db in -10.0f64..40.0) {
            let s = SnrPoint::from_db(db).unwrap();
            for p in [Protocol::Cf, Protocol::Df] {
                let v = p.evaluate(&real, s, rates(0.0, 0.0)).unwrap();
                prop_assert!(!v.message1_in_outage && !v.message2_in_outage);
            }
            let v = dcf_outage(&real, s, 0.0).unwrap();
            let d = v.detail.unwrap();
            let t = d.listen_fraction.unwrap();
            let expect = t > 1.0 || 0.0 > (1.0 - t) * d.c4.unwrap() - t;
            prop_assert_eq!(v.message1_in_outage, expect);
            prop_assert!(!v.message2_in_outage);
        }

        #[test]
        fn cf_message1_ignores_reverse_links((real, seed) in arb_realization(), db in 0.0f64..40.0, r1 in 0.0f64..8.0) {
            let s = SnrPoint::from_db(db).unwrap();
            let base = cf_outage(&real, s, rates(r1, 1.0)).unwrap();
            let mut other = real.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
            let fresh = sample_realization(
                &AntennaConfig::new(real.h1.cols(), real.h1.rows(), real.h2.cols()).unwrap(), &mut rng);
            other.h2 = fresh.h2;
            other.h3 = fresh.h3;
            let moved = cf_outage(&other, s, rates(r1, 2.5)).unwrap();
            prop_assert_eq!(base.message1_in_outage, moved.message1_in_outage);
        }

        #[test]
        fn listen_identity((real, _) in arb_realization(), db in 0.0f64..40.0, r1 in 0.0f64..8.0) {
            let s = SnrPoint::from_db(db).unwrap();
            let t = dcf_listen_fraction(&real, s, r1);
            let c1 = capacity(&real.h1, real.h1.cols(), s).unwrap();
            if t.is_finite() {
                prop_assert!((t * c1 - (1.0 + r1)).abs() < 1e-12 * (1.0 + r1));
            } else {
                prop_assert_eq!(c1, 0.0);
            }
        }

        #[test]
        fn detail_matches_booleans((real, _) in arb_realization(), db in 0.0f64..40.0,
                                   r1 in 0.0f64..8.0, r2 in 0.0f64..8.0) {
            let s = SnrPoint::from_db(db).unwrap();
            for p in [Protocol::Cf, Protocol::Df, Protocol::Dcf(ListenRule::Dynamic)] {
                let v = p.evaluate(&real, s, rates(r1, if p.two_way() { r2 } else { 0.0 })).unwrap();
                let d = v.detail.unwrap();
                let any1 = d.events.iter().any(|e| e.affects().0);
                let any2 = d.events.iter().any(|e| e.affects().1);
                prop_assert_eq!(v.message1_in_outage, any1);
                prop_assert_eq!(v.message2_in_outage, any2);
            }
        }
    }

    #[test]
    fn complex_gains_are_supported() {
        let g = ChannelMatrix::scalar(Complex64::new(0.6, 0.8));
        let real = ChannelRealization { h1: g.clone(), h2: g.clone(), h3: g.clone(), h4: g };
        let v = cf_outage(&real, snr(15.0), rates(1.0, 1.0)).unwrap();
        assert!((v.detail.unwrap().c4.unwrap() - 4.0).abs() < 1e-12);
    }
}

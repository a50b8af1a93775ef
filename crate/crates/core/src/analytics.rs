//! Period segmentation, per-period totals, hourly attack rates, and
//! cumulative time series.
//!
//! All values are carried as integer satoshi end to end; bitcoin decimals
//! exist only at the formatting boundary, with exactly eight fractional
//! digits, so reports parse back to the same integers.

use chrono::{DateTime, Duration, DurationRound, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::conflict::{ConflictSet, NormalizedKey, Outcome, SetClassification};
use crate::mutation::PairClassification;

/// Satoshi per bitcoin.
pub const SAT_PER_BTC: u64 = 100_000_000;

/// Formats satoshi as a bitcoin decimal with eight fractional digits.
pub fn format_btc(satoshi: u64) -> String {
    format!("{}.{:08}", satoshi / SAT_PER_BTC, satoshi % SAT_PER_BTC)
}

/// Parses the decimal form produced by [`format_btc`] back to satoshi.
pub fn parse_btc(s: &str) -> Option<u64> {
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if frac.len() > 8 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let whole: u64 = whole.parse().ok()?;
    let mut frac_value: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    frac_value *= 10u64.pow(8 - frac.len() as u32);
    whole.checked_mul(SAT_PER_BTC)?.checked_add(frac_value)
}

/// A half-open interval `[start, end)` of the measurement timeline.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Period {
    pub name: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl Period {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

/// The three periods of the measured incident: the year of quiet before
/// withdrawals closed, the two days before the press release, and the
/// copycat wave that followed it. Boundaries are UTC midnights,
/// end-exclusive; schedules are overridable wherever periods are consumed.
pub fn default_periods() -> Vec<Period> {
    let day = |y, m, d| Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap();
    vec![
        Period {
            name: "period1".into(),
            start: day(2013, 1, 1),
            end: day(2014, 2, 8),
        },
        Period {
            name: "period2".into(),
            start: day(2014, 2, 8),
            end: day(2014, 2, 10),
        },
        Period {
            name: "period3".into(),
            start: day(2014, 2, 10),
            end: day(2014, 3, 1),
        },
    ]
}

/// Per-period aggregates. Attack sets, genuine re-signs, and unclassifiable
/// pairs are counted in separate columns; the success rates follow the
/// per-conflict-set arithmetic, with successful attacks over all classified
/// sets (attacks plus re-signs) and their combined value.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodReport {
    pub period: Period,
    /// Sets classified as an encoding mutation.
    pub attack_sets: u64,
    /// Sets classified as genuine re-signs or multi-broadcasts.
    pub re_sign_sets: u64,
    /// Two-member sets the classifier could not attribute.
    pub unknown_sets: u64,
    /// Value carried by the attack sets, in satoshi.
    pub total_value_satoshi: u64,
    pub re_sign_value_satoshi: u64,
    /// Attack sets whose non-original member was confirmed.
    pub successful: u64,
    pub success_value_satoshi: u64,
    pub success_rate_by_count: f64,
    pub success_rate_by_value: f64,
}

impl PeriodReport {
    fn empty(period: Period) -> PeriodReport {
        PeriodReport {
            period,
            attack_sets: 0,
            re_sign_sets: 0,
            unknown_sets: 0,
            total_value_satoshi: 0,
            re_sign_value_satoshi: 0,
            successful: 0,
            success_value_satoshi: 0,
            success_rate_by_count: 0.0,
            success_rate_by_value: 0.0,
        }
    }

    fn finalize(&mut self) {
        let classified = self.attack_sets + self.re_sign_sets;
        if classified > 0 {
            self.success_rate_by_count = self.successful as f64 / classified as f64;
        }
        let classified_value = self.total_value_satoshi + self.re_sign_value_satoshi;
        if classified_value > 0 {
            self.success_rate_by_value =
                self.success_value_satoshi as f64 / classified_value as f64;
        }
    }

    pub fn total_value_btc(&self) -> String {
        format_btc(self.total_value_satoshi)
    }

    pub fn success_value_btc(&self) -> String {
        format_btc(self.success_value_satoshi)
    }
}

/// Result of [`aggregate`]: one report per period plus the keys of sets that
/// fell outside the schedule (reported, excluded from every report).
#[derive(Clone, Debug, Serialize)]
pub struct AggregateOutcome {
    pub reports: Vec<PeriodReport>,
    pub out_of_schedule: Vec<NormalizedKey>,
}

/// Buckets conflict sets into periods by their earliest first_seen and
/// totals them. Every set lands in exactly one report or in
/// `out_of_schedule`.
pub fn aggregate(sets: &[ConflictSet], periods: &[Period]) -> AggregateOutcome {
    let mut reports: Vec<PeriodReport> = periods.iter().cloned().map(PeriodReport::empty).collect();
    let mut out_of_schedule = Vec::new();

    for set in sets {
        let t = set.earliest();
        let Some(report) = reports.iter_mut().find(|r| r.period.contains(t)) else {
            out_of_schedule.push(set.key);
            continue;
        };
        match set.classification {
            SetClassification::Pair(PairClassification::EncodingMutation { .. }) => {
                report.attack_sets += 1;
                report.total_value_satoshi += set.value_satoshi;
                if set.outcome == Outcome::SuccessfulAttack {
                    report.successful += 1;
                    report.success_value_satoshi += set.value_satoshi;
                }
            }
            SetClassification::Pair(PairClassification::GenuineReSign)
            | SetClassification::MultiBroadcast => {
                report.re_sign_sets += 1;
                report.re_sign_value_satoshi += set.value_satoshi;
            }
            SetClassification::Pair(PairClassification::Unknown) => {
                report.unknown_sets += 1;
            }
        }
    }

    for report in &mut reports {
        report.finalize();
    }
    AggregateOutcome {
        reports,
        out_of_schedule,
    }
}

/// One bucket of the attack-rate timeline.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct RateBucket {
    pub start: DateTime<Utc>,
    pub attack_sets: u64,
    pub attacks_per_hour: f64,
}

/// Buckets attack sets by earliest first_seen into dense windows of
/// `window_hours`, aligned to the whole hour containing the earliest attack.
/// Empty buckets inside the span are included with rate 0.
pub fn hourly_rate(sets: &[ConflictSet], window_hours: u64) -> Vec<RateBucket> {
    assert!(
        window_hours >= 1,
        "window must be a positive number of hours"
    );
    let times: Vec<DateTime<Utc>> = sets
        .iter()
        .filter(|s| s.is_attack())
        .map(|s| s.earliest())
        .collect();
    let (Some(&min), Some(&max)) = (times.iter().min(), times.iter().max()) else {
        return Vec::new();
    };

    let origin = min.duration_trunc(Duration::hours(1)).expect("in range");
    let window = Duration::hours(window_hours as i64);
    let span_buckets = ((max - origin).num_seconds() / window.num_seconds()) as usize + 1;

    let mut buckets = vec![0u64; span_buckets];
    for t in times {
        let idx = ((t - origin).num_seconds() / window.num_seconds()) as usize;
        buckets[idx] += 1;
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, count)| RateBucket {
            start: origin + window * i as i32,
            attack_sets: count,
            attacks_per_hour: count as f64 / window_hours as f64,
        })
        .collect()
}

/// A point of the cumulative attack series.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct TimeSeriesPoint {
    pub t: DateTime<Utc>,
    pub cumulative_count: u64,
    pub cumulative_value_satoshi: u64,
}

/// One point per attack set at its earliest first_seen, with running count
/// and value. Stable under input order.
pub fn cumulative_series(sets: &[ConflictSet]) -> Vec<TimeSeriesPoint> {
    let mut attacks: Vec<&ConflictSet> = sets.iter().filter(|s| s.is_attack()).collect();
    attacks.sort_by_key(|s| (s.earliest(), s.key));

    let mut count = 0;
    let mut value = 0;
    attacks
        .into_iter()
        .map(|s| {
            count += 1;
            value += s.value_satoshi;
            TimeSeriesPoint {
                t: s.earliest(),
                cumulative_count: count,
                cumulative_value_satoshi: value,
            }
        })
        .collect()
}

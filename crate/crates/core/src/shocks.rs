//! Event-level bank net-worth surprises and their split into credit-supply
//! and credit-demand components using sign restrictions against the excess
//! bond premium, plus aggregation to calendar frequency.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::calendar::{Calendar, Timestamp};
use crate::stats;
use crate::{bail, Error, Result};

pub use crate::stats::pearson_correlation;

/// Minimum event count for the rotation decomposition.
pub const MIN_ROTATION_EVENTS: usize = 30;
/// Spacing of the Givens angle grid.
pub const ANGLE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockEvent {
    pub timestamp: Timestamp,
    /// Weighted log-price change `v^F`.
    pub surprise: f64,
    /// Contemporaneous change in the excess bond premium.
    pub d_ebp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventShockSeries {
    events: Vec<ShockEvent>,
    weights: Option<Vec<f64>>,
}

impl EventShockSeries {
    /// Validates strictly increasing timestamps and finite values.
    pub fn new(events: Vec<ShockEvent>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if !e.surprise.is_finite() || !e.d_ebp.is_finite() {
                bail!(Domain, "event {i} ({}) has a non-finite value", e.timestamp);
            }
            if i > 0 && events[i - 1].timestamp >= e.timestamp {
                bail!(Domain, "event timestamps must be strictly increasing: {} then {}", events[i - 1].timestamp, e.timestamp);
            }
        }
        Ok(EventShockSeries { events, weights: None })
    }

    pub fn events(&self) -> &[ShockEvent] {
        &self.events
    }

    /// Market-cap weights when the series was built from raw components.
    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn surprises(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.surprise).collect()
    }

    pub fn d_ebp(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.d_ebp).collect()
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.events.iter().map(|e| e.timestamp).collect()
    }

    /// Multiplies every surprise by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let events = self.events.iter().map(|e| ShockEvent { surprise: c * e.surprise, ..*e }).collect();
        EventShockSeries { events, weights: self.weights.clone() }
    }
}

/// `v^F_t = theta_t * dp_t` per event.
pub fn event_surprises(price_changes: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if price_changes.len() != weights.len() {
        bail!(Dimension, "{} price changes but {} weights", price_changes.len(), weights.len());
    }
    for (i, w) in weights.iter().enumerate() {
        if !(0.0..=1.0).contains(w) {
            bail!(Domain, "weight {w} of event {i} lies outside [0, 1]");
        }
    }
    Ok(price_changes.iter().zip(weights).map(|(p, w)| p * w).collect())
}

/// Builds the event series from raw weighted price changes.
pub fn build_event_surprise(
    timestamps: &[Timestamp],
    price_changes: &[f64],
    weights: &[f64],
    d_ebp: &[f64],
) -> Result<EventShockSeries> {
    let v = event_surprises(price_changes, weights)?;
    if timestamps.len() != v.len() || d_ebp.len() != v.len() {
        bail!(Dimension, "timestamps, price changes and EBP changes must have equal lengths");
    }
    let events = timestamps
        .iter()
        .zip(v.iter().zip(d_ebp))
        .map(|(t, (s, e))| ShockEvent { timestamp: *t, surprise: *s, d_ebp: *e })
        .collect();
    let mut series = EventShockSeries::new(events)?;
    series.weights = Some(weights.to_vec());
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rotation,
    Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedShocks {
    pub method: Method,
    pub timestamps: Vec<Timestamp>,
    pub v_f: Vec<f64>,
    pub d_ebp: Vec<f64>,
    pub v_cs: Vec<f64>,
    pub v_cd: Vec<f64>,
    /// Selected Givens angle in `[0, pi)` (rotation variant only).
    pub rotation_angle: Option<f64>,
    /// Admissible angle intervals `[lo, hi]` on the scan grid; an interval
    /// with `hi >= pi` wraps past zero.
    pub admissible_set: Vec<(f64, f64)>,
}

/// Sign-normalized impact columns of `P Q(gamma)` for a correlation `r`.
///
/// Column 0 is the candidate supply shock, column 1 the demand shock; each is
/// flipped so its `v^F` entry is nonnegative.
fn impact_columns(r: f64, gamma: f64) -> [[f64; 2]; 2] {
    let rho = libm::sqrt((1.0 - r * r).max(0.0));
    let (s, c) = libm::sincos(gamma);
    let mut cols = [[c, r * c + rho * s], [-s, -r * s + rho * c]];
    for col in cols.iter_mut() {
        if col[0] < 0.0 {
            col[0] = -col[0];
            col[1] = -col[1];
        }
    }
    cols
}

fn admissible(r: f64, gamma: f64) -> bool {
    let [supply, demand] = impact_columns(r, gamma);
    supply[0] > 0.0 && supply[1] < 0.0 && demand[0] > 0.0 && demand[1] > 0.0
}

/// Sign-restricted Givens-rotation decomposition.
///
/// The pair `(v^F, dEBP)` is scaled by its sample standard deviations, the
/// sample correlation matrix is factored as `P P'` with `P` lower
/// triangular, and `B(gamma) = P Q(gamma)` is scanned over `[0, pi)`. The
/// median admissible angle is selected and the structural shocks
/// `u = B^{-1} z` are mapped back to their contributions to `v^F`.
pub fn decompose_rotation(series: &EventShockSeries) -> Result<DecomposedShocks> {
    let n = series.len();
    if n < MIN_ROTATION_EVENTS {
        bail!(InsufficientData, "rotation needs at least {MIN_ROTATION_EVENTS} events, got {n}");
    }
    let v_f = series.surprises();
    let d_ebp = series.d_ebp();
    let sd_f = stats::std_dev(&v_f);
    let sd_e = stats::std_dev(&d_ebp);
    if !(sd_f > 0.0) || !(sd_e > 0.0) {
        bail!(Domain, "degenerate covariance: v^F and dEBP must both vary");
    }
    let r = pearson_correlation(&v_f, &d_ebp)?;
    let rho = libm::sqrt((1.0 - r * r).max(0.0));
    let base = DecomposedShocks {
        method: Method::Rotation,
        timestamps: series.timestamps(),
        v_cs: Vec::new(),
        v_cd: Vec::new(),
        v_f,
        d_ebp,
        rotation_angle: None,
        admissible_set: Vec::new(),
    };

    // Rank-one pair: all movement belongs to one structural shock.
    if rho < 1e-5 {
        let zero = alloc::vec![0.0; n];
        let (v_cs, v_cd, angle) = if r < 0.0 {
            (base.v_f.clone(), zero, 0.0)
        } else {
            (zero, base.v_f.clone(), PI / 2.0)
        };
        return Ok(DecomposedShocks { v_cs, v_cd, rotation_angle: Some(angle), admissible_set: alloc::vec![(angle, angle)], ..base });
    }

    let steps = libm::ceil(PI / ANGLE_STEP) as usize;
    let grid: Vec<f64> = (0..steps).map(|i| i as f64 * ANGLE_STEP).filter(|g| *g < PI).collect();
    let ok: Vec<bool> = grid.iter().map(|g| admissible(r, *g)).collect();
    if !ok.iter().any(|b| *b) {
        return Err(Error::Identification { pattern: scanned_pattern(r) });
    }
    let (angle, set) = median_admissible(&grid, &ok);

    let (s, c) = libm::sincos(angle);
    let v_cs: Vec<f64> = base
        .v_f
        .iter()
        .zip(&base.d_ebp)
        .map(|(f, e)| {
            let (z1, z2) = (f / sd_f, e / sd_e);
            let w2 = (z2 - r * z1) / rho;
            let u1 = c * z1 + s * w2;
            sd_f * c * u1
        })
        .collect();
    let v_cd = base.v_f.iter().zip(&v_cs).map(|(f, cs)| f - cs).collect();
    Ok(DecomposedShocks { v_cs, v_cd, rotation_angle: Some(angle), admissible_set: set, ..base })
}

fn scanned_pattern(r: f64) -> String {
    alloc::format!(
        "supply (v_f +, ebp -), demand (v_f +, ebp +) over [0, pi) at step {ANGLE_STEP}, sample correlation {r}"
    )
}

/// Median of the admissible grid angles after unwrapping the circle at the
/// widest inadmissible gap, together with the admissible runs.
fn median_admissible(grid: &[f64], ok: &[bool]) -> (f64, Vec<(f64, f64)>) {
    let n = grid.len();
    // start just after the longest run of inadmissible points (circularly)
    let mut start = 0;
    let mut best_gap = 0;
    for i in 0..n {
        if ok[i] {
            continue;
        }
        if ok[(i + n - 1) % n] || i == 0 {
            let mut len = 0;
            while len < n && !ok[(i + len) % n] {
                len += 1;
            }
            if len > best_gap {
                best_gap = len;
                start = (i + len) % n;
            }
        }
    }
    let mut unwrapped = Vec::new();
    let mut runs = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    for j in 0..n {
        let idx = (start + j) % n;
        let angle = if idx < start { grid[idx] + PI } else { grid[idx] };
        if ok[idx] {
            unwrapped.push(angle);
            run = Some(match run {
                Some((lo, _)) => (lo, angle),
                None => (angle, angle),
            });
        } else if let Some(r) = run.take() {
            runs.push(r);
        }
    }
    if let Some(r) = run {
        runs.push(r);
    }
    let m = stats::quantile_sorted(&unwrapped, 0.5);
    (stats::rem_euclid(m, PI), runs)
}

/// Per-event sign split: surprises that co-move negatively with the EBP are
/// supply, the rest (including `dEBP = 0`) demand.
pub fn decompose_split(series: &EventShockSeries) -> Result<DecomposedShocks> {
    if series.is_empty() {
        bail!(InsufficientData, "split decomposition needs at least one event");
    }
    let v_f = series.surprises();
    let d_ebp = series.d_ebp();
    let v_cs: Vec<f64> = v_f.iter().zip(&d_ebp).map(|(f, e)| if f * e < 0.0 { *f } else { 0.0 }).collect();
    let v_cd = v_f.iter().zip(&v_cs).map(|(f, cs)| f - cs).collect();
    Ok(DecomposedShocks {
        method: Method::Split,
        timestamps: series.timestamps(),
        v_f,
        d_ebp,
        v_cs,
        v_cd,
        rotation_angle: None,
        admissible_set: Vec::new(),
    })
}

/// A calendar-frequency shock series scaled to unit sample SD.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodShockSeries {
    pub calendar: Calendar,
    pub values: Vec<f64>,
    /// Divisor applied to the raw sums; `1` when degenerate.
    pub sd_used: f64,
    /// Set when the aggregated series has no variation.
    pub degenerate: bool,
}

impl PeriodShockSeries {
    /// Wraps an already-standardized series.
    pub fn from_values(calendar: Calendar, values: Vec<f64>) -> Result<Self> {
        if values.len() != calendar.len {
            bail!(Dimension, "{} values for a calendar of {} periods", values.len(), calendar.len);
        }
        Ok(PeriodShockSeries { calendar, values, sd_used: 1.0, degenerate: false })
    }

    /// Sums per period and divides by the sample SD of the sums.
    pub fn standardize(calendar: Calendar, sums: Vec<f64>) -> Self {
        let sd = stats::std_dev(&sums);
        if !(sd > 0.0) {
            return PeriodShockSeries { calendar, values: sums, sd_used: 1.0, degenerate: true };
        }
        let values = sums.iter().map(|v| v / sd).collect();
        PeriodShockSeries { calendar, values, sd_used: sd, degenerate: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedShocks {
    pub v_cs: PeriodShockSeries,
    pub v_cd: PeriodShockSeries,
    pub v_f: PeriodShockSeries,
}

/// Per-period sums of an event series (zero for event-free periods).
pub fn aggregate(timestamps: &[Timestamp], values: &[f64], calendar: &Calendar) -> Result<Vec<f64>> {
    if timestamps.len() != values.len() {
        bail!(Dimension, "{} timestamps for {} values", timestamps.len(), values.len());
    }
    let mut sums = alloc::vec![0.0; calendar.len];
    for (t, v) in timestamps.iter().zip(values) {
        let p = t.date.period(calendar.freq());
        let Some(i) = calendar.index_of(p) else {
            bail!(Range, "event at {t} falls outside the calendar {}..{}", calendar.start, calendar.period(calendar.len - 1));
        };
        sums[i] += v;
    }
    Ok(sums)
}

/// Sums each component within calendar periods and scales each by its own
/// full-sample standard deviation.
pub fn aggregate_standardize(decomposed: &DecomposedShocks, calendar: Calendar) -> Result<AggregatedShocks> {
    let ts = &decomposed.timestamps;
    Ok(AggregatedShocks {
        v_cs: PeriodShockSeries::standardize(calendar, aggregate(ts, &decomposed.v_cs, &calendar)?),
        v_cd: PeriodShockSeries::standardize(calendar, aggregate(ts, &decomposed.v_cd, &calendar)?),
        v_f: PeriodShockSeries::standardize(calendar, aggregate(ts, &decomposed.v_f, &calendar)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{Date, Period};

    fn ts(day: u32) -> Timestamp {
        let year = 2000 + (day / 300) as i32;
        let month = (day % 300 / 25 + 1) as u8;
        let d = (day % 25 + 1) as u8;
        Timestamp::from_date(Date::new(year, month, d).unwrap())
    }

    fn series(pairs: &[(f64, f64)]) -> EventShockSeries {
        let events = pairs
            .iter()
            .enumerate()
            .map(|(i, &(surprise, d_ebp))| ShockEvent { timestamp: ts(i as u32), surprise, d_ebp })
            .collect();
        EventShockSeries::new(events).unwrap()
    }

    #[test]
    fn surprise_arithmetic() {
        let v = event_surprises(&[0.02, 0.5, -0.04], &[1.0, 0.0, 0.35]).unwrap();
        assert_eq!(v[0], 0.02);
        assert_eq!(v[1], 0.0);
        assert!((v[2] + 0.014).abs() < 1e-15);
        assert!(event_surprises(&[0.1], &[1.2]).is_err());
        assert!(event_surprises(&[0.1, 0.2], &[1.0]).is_err());
    }

    #[test]
    fn timestamps_must_increase() {
        let e = ShockEvent { timestamp: ts(3), surprise: 0.1, d_ebp: 0.0 };
        assert!(EventShockSeries::new(alloc::vec![e, e]).is_err());
    }

    #[test]
    fn split_cases() {
        let d = decompose_split(&series(&[(1.0, -1.0), (1.0, 1.0), (1.0, 0.0)])).unwrap();
        assert_eq!(d.v_cs, [1.0, 0.0, 0.0]);
        assert_eq!(d.v_cd, [0.0, 1.0, 1.0]);
    }

    #[test]
    fn rank_one_pairs() {
        let base: Vec<f64> = (0..40).map(|i| libm::sin(i as f64 * 1.7) + 0.1 * i as f64).collect();
        let neg: Vec<(f64, f64)> = base.iter().map(|v| (*v, -2.0 * v)).collect();
        let d = decompose_rotation(&series(&neg)).unwrap();
        for (cs, f) in d.v_cs.iter().zip(&d.v_f) {
            assert!((cs - f).abs() < 1e-10);
        }
        assert!(d.v_cd.iter().all(|v| v.abs() < 1e-10));
        let pos: Vec<(f64, f64)> = base.iter().map(|v| (*v, 0.5 * v)).collect();
        let d = decompose_rotation(&series(&pos)).unwrap();
        assert!(d.v_cs.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn rotation_needs_enough_events() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, (i * i) as f64)).collect();
        assert!(matches!(decompose_rotation(&series(&pairs)), Err(Error::InsufficientData(_))));
        let flat: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(decompose_rotation(&series(&flat)), Err(Error::Domain(_))));
    }

    #[test]
    fn uncorrelated_pair_selects_three_quarter_pi() {
        // sample correlation exactly zero
        let pairs: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let a = if i % 2 == 0 { 1.0 } else { -1.0 };
                let b = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
                (a, b)
            })
            .collect();
        let d = decompose_rotation(&series(&pairs)).unwrap();
        assert!((d.rotation_angle.unwrap() - 0.75 * PI).abs() < 2e-3);
    }

    #[test]
    fn admissible_set_wraps() {
        let grid: Vec<f64> = (0..3142).map(|i| i as f64 * ANGLE_STEP).collect();
        // admissible on [0, 0.004] and [pi - 0.01, pi): one run across zero
        let ok: Vec<bool> = grid.iter().map(|g| *g <= 0.0045 || *g >= PI - 0.0105).collect();
        let (m, runs) = median_admissible(&grid, &ok);
        assert_eq!(runs.len(), 1);
        assert!(m > PI - 0.01 && m < PI, "{m}");
        // r = -0.9 gives the interval (pi/2 - asin(r), pi)
        let ok: Vec<bool> = grid.iter().map(|g| admissible(-0.9, *g)).collect();
        let (m, _) = median_admissible(&grid, &ok);
        let lo = PI / 2.0 - libm::asin(-0.9);
        assert!((m - 0.5 * (lo + PI)).abs() < 2e-3);
    }

    #[test]
    fn single_event_aggregation() {
        let cal = Calendar::new(Period::quarterly(2000, 1), Period::quarterly(2024, 4)).unwrap();
        assert_eq!(cal.len, 100);
        let t = [Timestamp::from_date(Date::new(2005, 5, 3).unwrap())];
        let sums = aggregate(&t, &[2.0], &cal).unwrap();
        let s = PeriodShockSeries::standardize(cal, sums.clone());
        let sd = stats::std_dev(&sums);
        assert!((s.values[cal.index_of(Period::quarterly(2005, 2)).unwrap()] - 2.0 / sd).abs() < 1e-15);
        assert!((stats::std_dev(&s.values) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_events_are_degenerate() {
        let cal = Calendar::new(Period::monthly(2001, 1), Period::monthly(2001, 12)).unwrap();
        let s = PeriodShockSeries::standardize(cal, alloc::vec![0.0; 12]);
        assert!(s.degenerate);
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn same_month_events_add() {
        let cal = Calendar::new(Period::monthly(2001, 1), Period::monthly(2001, 12)).unwrap();
        let t = [
            Timestamp::from_date(Date::new(2001, 3, 2).unwrap()),
            Timestamp::from_date(Date::new(2001, 3, 20).unwrap()),
        ];
        assert_eq!(aggregate(&t, &[1.0, 1.0], &cal).unwrap()[2], 2.0);
        let outside = [Timestamp::from_date(Date::new(2002, 1, 1).unwrap())];
        assert!(matches!(aggregate(&outside, &[1.0], &cal), Err(Error::Range(_))));
    }
}

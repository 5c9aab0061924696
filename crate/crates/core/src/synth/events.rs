//! Event surprises driven by orthogonal supply and demand shocks.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::calendar::{Calendar, Date, Timestamp};
use crate::rng;
use crate::shocks::{EventShockSeries, ShockEvent};
use crate::{bail, Result};

/// `v^F = a_s s + a_d d`, `dEBP = -b_s s + b_d d` with independent
/// `s ~ N(0, supply_sd^2)` and `d ~ N(0, demand_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventDgpSpec {
    pub seed: u64,
    pub n_events: usize,
    pub supply_sd: f64,
    pub demand_sd: f64,
    /// Loadings of the supply shock on `(v^F, dEBP)` as `(a_s, b_s)`; both
    /// positive, so supply raises `v^F` and lowers the EBP.
    pub supply_loading: (f64, f64),
    /// Loadings of the demand shock as `(a_d, b_d)`; both positive.
    pub demand_loading: (f64, f64),
    /// Events are spread evenly over this calendar.
    pub calendar: Calendar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTruth {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    /// Population Givens angle in `[0, pi)` under the rotation convention of
    /// [`crate::shocks::decompose_rotation`].
    pub angle: f64,
}

impl EventDgpSpec {
    /// Equal unit variances and unit loadings: `v^F = s + d`,
    /// `dEBP = kappa (d - s)`.
    pub fn symmetric(seed: u64, n_events: usize, kappa: f64, calendar: Calendar) -> Self {
        EventDgpSpec {
            seed,
            n_events,
            supply_sd: 1.0,
            demand_sd: 1.0,
            supply_loading: (1.0, kappa),
            demand_loading: (1.0, kappa),
            calendar,
        }
    }

    /// Angle implied by the population covariance of `(v^F, dEBP)`.
    pub fn true_angle(&self) -> f64 {
        let (a_s, b_s) = self.supply_loading;
        let (a_d, b_d) = self.demand_loading;
        let (ss, sd) = (self.supply_sd, self.demand_sd);
        if ss == 0.0 {
            return PI / 2.0;
        }
        if sd == 0.0 {
            return 0.0;
        }
        // impact matrix of unit-variance shocks
        let m = [[a_s * ss, a_d * sd], [-b_s * ss, b_d * sd]];
        let var_f = m[0][0] * m[0][0] + m[0][1] * m[0][1];
        let var_e = m[1][0] * m[1][0] + m[1][1] * m[1][1];
        let cov = m[0][0] * m[1][0] + m[0][1] * m[1][1];
        let (df, de) = (libm::sqrt(var_f), libm::sqrt(var_e));
        let r = cov / (df * de);
        let rho = libm::sqrt(1.0 - r * r);
        // Q = P^{-1} D^{-1} M, first column only
        let x = m[0][0] / df;
        let y = (m[1][0] / de - r * x) / rho;
        crate::stats::rem_euclid(libm::atan2(y, x), PI)
    }
}

/// Event timestamps spread evenly across the calendar: the `j`-th event in
/// a period falls on day `1 + j mod 28` of the period's `j / 28`-th month.
pub fn spread_timestamps(n: usize, calendar: &Calendar) -> Result<Vec<Timestamp>> {
    let len = calendar.len;
    let months_per = match calendar.freq() {
        crate::calendar::Frequency::Monthly => 1,
        crate::calendar::Frequency::Quarterly => 3,
    };
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    let mut last_period = usize::MAX;
    for i in 0..n {
        let p = i * len / n.max(1);
        if p != last_period {
            j = 0;
            last_period = p;
        }
        if j >= 28 * months_per {
            bail!(Domain, "too many events ({n}) for a {len}-period calendar");
        }
        let first = calendar.period(p).end_month().offset(1 - months_per as i64);
        let month = first.offset((j / 28) as i64);
        let date = Date::new(month.year, month.sub, (j % 28 + 1) as u8)?;
        out.push(Timestamp { date, minute: 16 * 60 });
        j += 1;
    }
    Ok(out)
}

pub fn gen_event_shocks(spec: &EventDgpSpec) -> Result<(EventShockSeries, EventTruth)> {
    let (a_s, b_s) = spec.supply_loading;
    let (a_d, b_d) = spec.demand_loading;
    if [a_s, b_s, a_d, b_d].iter().any(|v| !(*v > 0.0)) {
        bail!(Domain, "loadings must be positive to respect the sign restrictions");
    }
    if !(spec.supply_sd >= 0.0) || !(spec.demand_sd >= 0.0) || spec.supply_sd + spec.demand_sd == 0.0 {
        bail!(Domain, "shock SDs must be nonnegative and not both zero");
    }
    let stamps = spread_timestamps(spec.n_events, &spec.calendar)?;
    let mut rng_s = rng::substream(spec.seed, 0);
    let mut rng_d = rng::substream(spec.seed, 1);
    let mut supply = Vec::with_capacity(spec.n_events);
    let mut demand = Vec::with_capacity(spec.n_events);
    let mut events = Vec::with_capacity(spec.n_events);
    for t in stamps {
        let s = spec.supply_sd * rng::normal(&mut rng_s);
        let d = spec.demand_sd * rng::normal(&mut rng_d);
        supply.push(a_s * s);
        demand.push(a_d * d);
        events.push(ShockEvent { timestamp: t, surprise: a_s * s + a_d * d, d_ebp: -b_s * s + b_d * d });
    }
    let series = EventShockSeries::new(events)?;
    Ok((series, EventTruth { supply, demand, angle: spec.true_angle() }))
}

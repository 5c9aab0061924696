//! Proleptic Gregorian dates and calendar periods (months, quarters).

use core::fmt;
use core::str::FromStr;

use crate::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        _ => 28,
    }
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Result<Self> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            bail!(Domain, "invalid calendar date {year:04}-{month:02}-{day:02}");
        }
        Ok(Date { year, month, day })
    }

    /// Calendar period of the given frequency containing this date.
    pub fn period(&self, freq: Frequency) -> Period {
        match freq {
            Frequency::Monthly => Period { freq, year: self.year, sub: self.month },
            Frequency::Quarterly => Period { freq, year: self.year, sub: (self.month - 1) / 3 + 1 },
        }
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::Domain(alloc::format!("cannot parse {what} from {s:?}")))
}

impl FromStr for Date {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut it = s.splitn(3, '-');
        let (y, m, d) = match (it.next(), it.next(), it.next()) {
            (Some(y), Some(m), Some(d)) => (y, m, d),
            _ => bail!(Domain, "expected YYYY-MM-DD, got {s:?}"),
        };
        Date::new(parse_num(y, "year")?, parse_num(m, "month")?, parse_num(d, "day")?)
    }
}

/// An event time: a date plus minutes after midnight.
///
/// Ordering uses the intraday component; calendar aggregation uses the date
/// only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    pub date: Date,
    pub minute: u16,
}

impl Timestamp {
    pub fn from_date(date: Date) -> Self {
        Timestamp { date, minute: 0 }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.minute == 0 {
            write!(f, "{}", self.date)
        } else {
            write!(f, "{}T{:02}:{:02}", self.date, self.minute / 60, self.minute % 60)
        }
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    /// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM` or `YYYY-MM-DD HH:MM[:SS]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (d, t) = match s.find(['T', ' ']) {
            Some(i) => (&s[..i], Some(&s[i + 1..])),
            None => (s, None),
        };
        let date: Date = d.parse()?;
        let minute = match t {
            None => 0,
            Some(t) => {
                let mut parts = t.split(':');
                let h: u16 = parse_num(parts.next().unwrap_or(""), "hour")?;
                let m: u16 = parse_num(parts.next().unwrap_or("0"), "minute")?;
                if h > 23 || m > 59 {
                    bail!(Domain, "invalid time of day {t:?}");
                }
                h * 60 + m
            }
        };
        Ok(Timestamp { date, minute })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Frequency {
    Monthly,
    Quarterly,
}

impl Frequency {
    pub fn periods_per_year(self) -> u8 {
        match self {
            Frequency::Monthly => 12,
            Frequency::Quarterly => 4,
        }
    }
}

/// A calendar month or quarter; `sub` is the month (1..=12) or quarter
/// (1..=4) within the year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    pub freq: Frequency,
    pub year: i32,
    pub sub: u8,
}

impl Period {
    pub fn new(freq: Frequency, year: i32, sub: u8) -> Result<Self> {
        if sub == 0 || sub > freq.periods_per_year() {
            bail!(Domain, "sub-period {sub} out of range for {freq:?}");
        }
        Ok(Period { freq, year, sub })
    }

    pub fn monthly(year: i32, month: u8) -> Self {
        Period::new(Frequency::Monthly, year, month).expect("valid month")
    }

    pub fn quarterly(year: i32, quarter: u8) -> Self {
        Period::new(Frequency::Quarterly, year, quarter).expect("valid quarter")
    }

    /// Consecutive ordinal (periods since year 0).
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * self.freq.periods_per_year() as i64 + (self.sub as i64 - 1)
    }

    pub fn from_ordinal(freq: Frequency, ordinal: i64) -> Self {
        let per = freq.periods_per_year() as i64;
        Period {
            freq,
            year: ordinal.div_euclid(per) as i32,
            sub: (ordinal.rem_euclid(per) + 1) as u8,
        }
    }

    pub fn offset(&self, k: i64) -> Self {
        Period::from_ordinal(self.freq, self.ordinal() + k)
    }

    /// Season index within the year (quarter-of-year or month-of-year).
    pub fn season(&self) -> u8 {
        self.sub
    }

    /// Last month of the period.
    pub fn end_month(&self) -> Period {
        match self.freq {
            Frequency::Monthly => *self,
            Frequency::Quarterly => Period::monthly(self.year, self.sub * 3),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.freq {
            Frequency::Monthly => write!(f, "{:04}-{:02}", self.year, self.sub),
            Frequency::Quarterly => write!(f, "{:04}Q{}", self.year, self.sub),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    /// Parses `YYYYQn` (quarterly) or `YYYY-MM` (monthly).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(i) = s.find(['Q', 'q']) {
            return Period::new(
                Frequency::Quarterly,
                parse_num(&s[..i], "year")?,
                parse_num(&s[i + 1..], "quarter")?,
            );
        }
        match s.split_once('-') {
            Some((y, m)) => Period::new(Frequency::Monthly, parse_num(y, "year")?, parse_num(m, "month")?),
            None => bail!(Domain, "expected YYYYQn or YYYY-MM, got {s:?}"),
        }
    }
}

/// Contiguous run of periods `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Calendar {
    pub start: Period,
    pub len: usize,
}

impl Calendar {
    pub fn new(start: Period, end: Period) -> Result<Self> {
        if start.freq != end.freq {
            bail!(Domain, "calendar endpoints have different frequencies");
        }
        let len = end.ordinal() - start.ordinal() + 1;
        if len <= 0 {
            bail!(Domain, "calendar end {end} precedes start {start}");
        }
        Ok(Calendar { start, len: len as usize })
    }

    pub fn freq(&self) -> Frequency {
        self.start.freq
    }

    pub fn period(&self, i: usize) -> Period {
        self.start.offset(i as i64)
    }

    pub fn periods(&self) -> impl Iterator<Item = Period> + '_ {
        (0..self.len).map(|i| self.period(i))
    }

    /// Position of `p` in the calendar.
    pub fn index_of(&self, p: Period) -> Option<usize> {
        if p.freq != self.freq() {
            return None;
        }
        let k = p.ordinal() - self.start.ordinal();
        (0..self.len as i64).contains(&k).then_some(k as usize)
    }
}

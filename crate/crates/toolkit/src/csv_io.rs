//! CSV ingestion and emission in long (tidy) format.
//!
//! Every reader checks the header, coerces types and collects offending
//! rows with their line numbers. Numbers are written as the shortest
//! decimal that round-trips; missing values are empty cells.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use netshock_core::calendar::{Calendar, Frequency, Period, Timestamp};
use netshock_core::micro::{Currency, InteractionResult, MicroFrame};
use netshock_core::model::SweepRow;
use netshock_core::panel::{Gap, PanelDataset, EME_BLOCK, GLOBAL_BLOCK};
use netshock_core::shocks::{build_event_surprise, DecomposedShocks, EventShockSeries, PeriodShockSeries, ShockEvent};
use netshock_core::lp::LpResult;
use netshock_core::var::IrfResult;

use crate::error::{Error, Result, MAX_REPORTED_ROWS};

/// Name of the shock pseudo-variable in macro panels.
pub const SHOCK_VARIABLE: &str = "shock";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Macro,
    Micro,
    Events,
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(Schema::Macro),
            "micro" => Ok(Schema::Micro),
            "events" => Ok(Schema::Events),
            _ => Err(Error::Config(format!("unknown schema {s:?} (expected macro, micro or events)"))),
        }
    }
}

/// A validated macro panel with its gap report.
#[derive(Debug, Clone)]
pub struct MacroIngest {
    pub panel: PanelDataset,
    pub balanced: bool,
    pub gaps: Vec<Gap>,
    /// Whether the file carried a `shock` variable.
    pub has_shock: bool,
}

#[derive(Debug, Clone)]
pub enum Dataset {
    Macro(MacroIngest),
    Micro(MicroFrame),
    Events(EventShockSeries),
}

/// Reads and validates a CSV under the given schema.
pub fn ingest_panel_csv(path: &Path, schema: Schema) -> Result<Dataset> {
    Ok(match schema {
        Schema::Macro => Dataset::Macro(read_macro_panel(path, &[])?),
        Schema::Micro => Dataset::Micro(read_micro_frame(path)?),
        Schema::Events => Dataset::Events(read_events(path)?),
    })
}

/// Collects offending rows; the error lists the first twenty.
struct Offenders {
    rows: Vec<String>,
    total: usize,
}

impl Offenders {
    fn new() -> Self {
        Offenders { rows: Vec::new(), total: 0 }
    }

    fn push(&mut self, line: u64, msg: impl std::fmt::Display) {
        self.total += 1;
        if self.rows.len() < MAX_REPORTED_ROWS {
            self.rows.push(format!("line {line}: {msg}"));
        }
    }

    fn finish(self, path: &Path) -> Result<()> {
        if self.total == 0 {
            Ok(())
        } else {
            Err(Error::Schema { path: path.to_path_buf(), rows: self.rows, total: self.total })
        }
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn reader_from<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// Column positions by name.
struct Header {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl Header {
    fn read<R: Read>(rdr: &mut csv::Reader<R>, path: &Path) -> Result<Self> {
        let names: Vec<String> = rdr.headers().map_err(|e| Error::csv(path, e))?.iter().map(str::to_string).collect();
        let mut index = HashMap::new();
        let mut off = Offenders::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                off.push(1, format!("duplicate column {n:?}"));
            }
        }
        off.finish(path)?;
        Ok(Header { index, names })
    }

    fn require(&self, cols: &[&str], path: &Path) -> Result<Vec<usize>> {
        let missing: Vec<&str> = cols.iter().copied().filter(|c| !self.index.contains_key(*c)).collect();
        if !missing.is_empty() {
            let mut off = Offenders::new();
            off.push(1, format!("missing required columns {missing:?} (found {:?})", self.names));
            off.finish(path)?;
        }
        Ok(cols.iter().map(|c| self.index[*c]).collect())
    }

    fn has(&self, col: &str) -> bool {
        self.index.contains_key(col)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Parses a finite number; `Ok(None)` for an empty cell.
fn parse_optional(cell: &str) -> std::result::Result<Option<f64>, String> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(v) => Err(format!("non-finite value {v}")),
        Err(_) => Err(format!("not a number: {cell:?}")),
    }
}

fn parse_required(cell: &str, what: &str) -> std::result::Result<f64, String> {
    match parse_optional(cell) {
        Ok(Some(v)) => Ok(v),
        Ok(None) => Err(format!("missing {what}")),
        Err(e) => Err(format!("{what}: {e}")),
    }
}

/// Reads a long-format macro panel (`country, period, variable, value`).
///
/// Variables in the global block, plus `extra_global`, are flagged global.
/// A `shock` variable becomes the panel's shock series and must agree
/// across countries.
pub fn read_macro_panel(path: &Path, extra_global: &[String]) -> Result<MacroIngest> {
    parse_macro_panel(open(path)?, path, extra_global)
}

/// As [`read_macro_panel`] from any reader; `label` names the source in errors.
pub fn parse_macro_panel<R: Read>(mut rdr: csv::Reader<R>, label: &Path, extra_global: &[String]) -> Result<MacroIngest> {
    let header = Header::read(&mut rdr, label)?;
    let cols = header.require(&["country", "period", "variable", "value"], label)?;
    let mut off = Offenders::new();
    for name in &header.names {
        if !["country", "period", "variable", "value"].contains(&name.as_str()) {
            off.push(1, format!("unknown column {name:?}"));
        }
    }
    off.finish(label)?;

    let mut off = Offenders::new();
    let mut countries: Vec<String> = Vec::new();
    let mut variables: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, Period, usize, f64)> = Vec::new();
    let mut seen: HashMap<(usize, Period, usize), u64> = HashMap::new();
    let mut freq: Option<Frequency> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(label, e))?;
        let line = line_of(&rec);
        let country = rec[cols[0]].to_string();
        let variable = rec[cols[2]].to_string();
        if country.is_empty() || variable.is_empty() {
            off.push(line, "empty country or variable");
            continue;
        }
        let period: Period = match rec[cols[1]].parse() {
            Ok(p) => p,
            Err(e) => {
                off.push(line, e);
                continue;
            }
        };
        match freq {
            None => freq = Some(period.freq),
            Some(f) if f != period.freq => {
                off.push(line, format!("period {period} mixes frequencies"));
                continue;
            }
            _ => {}
        }
        let value = match parse_required(&rec[cols[3]], "value") {
            Ok(v) => v,
            Err(e) => {
                off.push(line, format!("({country}, {period}, {variable}) {e}"));
                continue;
            }
        };
        let c = position_or_push(&mut countries, country);
        let v = position_or_push(&mut variables, variable);
        if let Some(first) = seen.insert((c, period, v), line) {
            off.push(line, format!("duplicate key ({}, {period}, {}) first seen on line {first}", countries[c], variables[v]));
            continue;
        }
        cells.push((c, period, v, value));
    }
    off.finish(label)?;
    if cells.is_empty() {
        return Err(Error::Schema { path: label.to_path_buf(), rows: vec!["no data rows".into()], total: 1 });
    }
    let start = cells.iter().map(|c| c.1).min().unwrap();
    let end = cells.iter().map(|c| c.1).max().unwrap();
    let calendar = Calendar::new(start, end)?;

    let shock_var = variables.iter().position(|v| v == SHOCK_VARIABLE);
    let mut order: Vec<usize> = (0..variables.len()).filter(|v| Some(*v) != shock_var).collect();
    let canonical: Vec<&str> = EME_BLOCK.iter().chain(GLOBAL_BLOCK.iter()).copied().collect();
    order.sort_by_key(|&v| canonical.iter().position(|c| *c == variables[v]).unwrap_or(usize::MAX));
    let names: Vec<String> = order.iter().map(|&v| variables[v].clone()).collect();
    let global: Vec<bool> = names.iter().map(|n| GLOBAL_BLOCK.contains(&n.as_str()) || extra_global.contains(n)).collect();
    let mut panel = PanelDataset::new(countries.clone(), calendar, names, global)?;
    let mut shock: Vec<Option<f64>> = vec![None; calendar.len];
    let mut off = Offenders::new();
    for &(c, p, v, value) in &cells {
        let t = calendar.index_of(p).expect("period inside the calendar");
        if Some(v) == shock_var {
            match shock[t] {
                Some(s) if s != value => off.push(0, format!("shock differs across countries at {p} ({s} vs {value} for {})", countries[c])),
                _ => shock[t] = Some(value),
            }
            continue;
        }
        let j = order.iter().position(|&o| o == v).unwrap();
        panel.set(c, t, j, value);
    }
    off.finish(label)?;
    let has_shock = shock_var.is_some();
    if has_shock {
        let missing: Vec<String> = shock.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(t, _)| calendar.period(t).to_string()).collect();
        if !missing.is_empty() {
            let total = missing.len();
            let rows = missing.into_iter().take(MAX_REPORTED_ROWS).map(|p| format!("shock missing at {p}")).collect();
            return Err(Error::Schema { path: label.to_path_buf(), rows, total });
        }
        panel.set_shock(shock.into_iter().map(|s| s.unwrap()).collect())?;
    }
    let gaps = panel.gaps();
    Ok(MacroIngest { balanced: gaps.is_empty(), gaps, panel, has_shock })
}

fn position_or_push(list: &mut Vec<String>, item: String) -> usize {
    match list.iter().position(|x| *x == item) {
        Some(i) => i,
        None => {
            list.push(item);
            list.len() - 1
        }
    }
}

const MICRO_FIXED: [&str; 5] = ["firm_id", "bank_id", "currency", "month", "loan"];
/// Optional column holding regression weights.
pub const WEIGHT_COLUMN: &str = "weight";

/// Reads a loan registry (`firm_id, bank_id, currency, month, loan`, an
/// optional `weight`, then characteristic columns). An all-empty `firm_id`
/// column marks a bank-level registry.
pub fn read_micro_frame(path: &Path) -> Result<MicroFrame> {
    parse_micro_frame(open(path)?, path)
}

pub fn parse_micro_frame<R: Read>(mut rdr: csv::Reader<R>, label: &Path) -> Result<MicroFrame> {
    let header = Header::read(&mut rdr, label)?;
    let cols = header.require(&MICRO_FIXED, label)?;
    let weight_col = header.index.get(WEIGHT_COLUMN).copied();
    let char_cols: Vec<(usize, String)> = header
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| !MICRO_FIXED.contains(&n.as_str()) && n.as_str() != WEIGHT_COLUMN)
        .map(|(i, n)| (i, n.clone()))
        .collect();

    let mut off = Offenders::new();
    let (mut firm, mut bank, mut cur, mut month, mut loan, mut weight) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut chars: Vec<Vec<f64>> = vec![Vec::new(); char_cols.len()];
    let mut firm_present: Option<bool> = None;
    let mut seen: HashMap<(Option<u64>, u64, Currency, Period), u64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(label, e))?;
        let line = line_of(&rec);
        let mut bad = Vec::new();
        let f = match &rec[cols[0]] {
            "" => None,
            s => match s.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    bad.push(format!("firm_id {s:?} is not a nonnegative integer"));
                    None
                }
            },
        };
        match firm_present {
            None => firm_present = Some(f.is_some()),
            Some(p) if p != f.is_some() && bad.is_empty() => bad.push("firm_id must be filled on every row or on none".into()),
            _ => {}
        }
        let b = rec[cols[1]].parse::<u64>().map_err(|_| format!("bank_id {:?} is not a nonnegative integer", &rec[cols[1]]));
        let c = Currency::parse(&rec[cols[2]]).map_err(|e| e.to_string());
        let m = rec[cols[3]].parse::<Period>().map_err(|e| e.to_string()).and_then(|p| {
            if p.freq == Frequency::Monthly {
                Ok(p)
            } else {
                Err(format!("month {p} is not monthly"))
            }
        });
        let l = parse_required(&rec[cols[4]], "loan").and_then(|v| if v > 0.0 { Ok(v) } else { Err(format!("loan {v} must be positive")) });
        let w = weight_col.map(|i| parse_required(&rec[i], "weight").and_then(|v| if v > 0.0 { Ok(v) } else { Err(format!("weight {v} must be positive")) }));
        let xs: Vec<std::result::Result<Option<f64>, String>> = char_cols.iter().map(|(i, _)| parse_optional(&rec[*i])).collect();
        for (e, (_, name)) in xs.iter().zip(&char_cols) {
            if let Err(e) = e {
                bad.push(format!("{name}: {e}"));
            }
        }
        for e in [b.as_ref().err(), c.as_ref().err(), m.as_ref().err(), l.as_ref().err(), w.as_ref().and_then(|w| w.as_ref().err())].into_iter().flatten() {
            bad.push(e.clone());
        }
        if !bad.is_empty() {
            off.push(line, bad.join("; "));
            continue;
        }
        let (b, c, m, l) = (b.unwrap(), c.unwrap(), m.unwrap(), l.unwrap());
        if let Some(first) = seen.insert((f, b, c, m), line) {
            let who = f.map_or(String::new(), |f| format!("firm {f}, "));
            off.push(line, format!("duplicate key ({who}bank {b}, {}, {m}) first seen on line {first}", c.as_str()));
            continue;
        }
        firm.push(f.unwrap_or(0));
        bank.push(b);
        cur.push(c);
        month.push(m);
        loan.push(l);
        if let Some(w) = w {
            weight.push(w.unwrap());
        }
        for (dst, x) in chars.iter_mut().zip(xs) {
            dst.push(x.unwrap().unwrap_or(f64::NAN));
        }
    }
    off.finish(label)?;
    let firm = firm_present.unwrap_or(false).then_some(firm);
    let mut frame = MicroFrame::new(firm, bank, cur, month, loan)?;
    for ((_, name), values) in char_cols.iter().zip(chars) {
        frame.add_characteristic(name, values)?;
    }
    if weight_col.is_some() {
        frame.set_weights(weight)?;
    }
    Ok(frame)
}

/// Reads event shocks: `timestamp, v_f, d_ebp`, or the raw form
/// `timestamp, dp, weight, d_ebp` with `v_f = weight * dp`.
pub fn read_events(path: &Path) -> Result<EventShockSeries> {
    parse_events(open(path)?, path)
}

pub fn parse_events<R: Read>(mut rdr: csv::Reader<R>, label: &Path) -> Result<EventShockSeries> {
    let header = Header::read(&mut rdr, label)?;
    let raw = !header.has("v_f") && header.has("dp");
    let names: &[&str] = if raw { &["timestamp", "dp", "weight", "d_ebp"] } else { &["timestamp", "v_f", "d_ebp"] };
    let cols = header.require(names, label)?;
    let mut off = Offenders::new();
    let mut rows: Vec<(Timestamp, Vec<f64>, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(label, e))?;
        let line = line_of(&rec);
        let ts: std::result::Result<Timestamp, String> = rec[cols[0]].parse().map_err(|e: netshock_core::Error| e.to_string());
        let vals: Vec<std::result::Result<f64, String>> = cols[1..].iter().zip(&names[1..]).map(|(&i, n)| parse_required(&rec[i], n)).collect();
        let mut bad: Vec<String> = ts.as_ref().err().into_iter().cloned().collect();
        bad.extend(vals.iter().filter_map(|v| v.as_ref().err().cloned()));
        if !bad.is_empty() {
            off.push(line, bad.join("; "));
            continue;
        }
        rows.push((ts.unwrap(), vals.into_iter().map(|v| v.unwrap()).collect(), line));
    }
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.0);
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            off.push(w[1].2, format!("duplicate timestamp {} (also on line {})", w[1].0, w[0].2));
        }
    }
    off.finish(label)?;
    let ts: Vec<Timestamp> = sorted.iter().map(|r| r.0).collect();
    if raw {
        let dp: Vec<f64> = sorted.iter().map(|r| r.1[0]).collect();
        let w: Vec<f64> = sorted.iter().map(|r| r.1[1]).collect();
        let e: Vec<f64> = sorted.iter().map(|r| r.1[2]).collect();
        Ok(build_event_surprise(&ts, &dp, &w, &e)?)
    } else {
        let events = sorted.iter().map(|r| ShockEvent { timestamp: r.0, surprise: r.1[0], d_ebp: r.1[1] }).collect();
        Ok(EventShockSeries::new(events)?)
    }
}

/// Reads a long-format period series file (`period, variable, value`).
pub fn read_period_series(path: &Path) -> Result<BTreeMap<String, BTreeMap<Period, f64>>> {
    let mut rdr = open(path)?;
    let header = Header::read(&mut rdr, path)?;
    let cols = header.require(&["period", "variable", "value"], path)?;
    let mut off = Offenders::new();
    let mut out: BTreeMap<String, BTreeMap<Period, f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = line_of(&rec);
        let p = match rec[cols[0]].parse::<Period>() {
            Ok(p) => p,
            Err(e) => {
                off.push(line, e);
                continue;
            }
        };
        let v = match parse_required(&rec[cols[2]], "value") {
            Ok(v) => v,
            Err(e) => {
                off.push(line, e);
                continue;
            }
        };
        let name = rec[cols[1]].to_string();
        if out.entry(name.clone()).or_default().insert(p, v).is_some() {
            off.push(line, format!("duplicate key ({p}, {name})"));
        }
    }
    off.finish(path)?;
    Ok(out)
}

/// Reads a wide period-shock file (`period, <column>...`) and returns the
/// named column over its contiguous calendar.
pub fn read_shock_column(path: &Path, column: &str) -> Result<PeriodShockSeries> {
    let mut rdr = open(path)?;
    let header = Header::read(&mut rdr, path)?;
    let cols = header.require(&["period", column], path)?;
    let mut off = Offenders::new();
    let mut values: Vec<(Period, f64, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = line_of(&rec);
        match (rec[cols[0]].parse::<Period>(), parse_required(&rec[cols[1]], column)) {
            (Ok(p), Ok(v)) => values.push((p, v, line)),
            (Err(e), _) => off.push(line, e),
            (_, Err(e)) => off.push(line, e),
        }
    }
    values.sort_by_key(|v| v.0);
    for w in values.windows(2) {
        if w[0].0.freq != w[1].0.freq {
            off.push(w[1].2, "mixed frequencies");
        } else if w[1].0.ordinal() != w[0].0.ordinal() + 1 {
            let what = if w[0].0 == w[1].0 { "duplicate period" } else { "gap before period" };
            off.push(w[1].2, format!("{what} {}", w[1].0));
        }
    }
    off.finish(path)?;
    if values.is_empty() {
        return Err(Error::Schema { path: path.to_path_buf(), rows: vec!["no data rows".into()], total: 1 });
    }
    let cal = Calendar::new(values[0].0, values[values.len() - 1].0)?;
    Ok(PeriodShockSeries::from_values(cal, values.into_iter().map(|v| v.1).collect())?)
}

/// Shortest round-trip decimal; empty for `NaN`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// Builds CSV text in memory and writes it in one go.
pub struct CsvOut {
    wtr: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(header: &[&str]) -> Self {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header).expect("in-memory write");
        CsvOut { wtr }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.wtr.write_record(cells).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.wtr.into_inner().expect("in-memory flush")
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let bytes = self.into_bytes();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }
}

/// Long-format macro panel; missing cells are omitted and the shock is
/// written as the `shock` variable when `with_shock` is set.
pub fn macro_panel_csv(panel: &PanelDataset, with_shock: bool) -> CsvOut {
    let mut out = CsvOut::new(&["country", "period", "variable", "value"]);
    let cal = panel.calendar();
    for (c, country) in panel.countries().iter().enumerate() {
        for t in 0..panel.n_periods() {
            let period = cal.period(t).to_string();
            for (v, var) in panel.variables().iter().enumerate() {
                let x = panel.get(c, t, v);
                if x.is_finite() {
                    out.row([country.as_str(), &period, var, &num(x)]);
                }
            }
            if with_shock {
                out.row([country.as_str(), &period, SHOCK_VARIABLE, &num(panel.shock()[t])]);
            }
        }
    }
    out
}

pub fn micro_frame_csv(frame: &MicroFrame) -> CsvOut {
    let names = frame.characteristic_names();
    let mut header: Vec<&str> = MICRO_FIXED.to_vec();
    if frame.weights().is_some() {
        header.push(WEIGHT_COLUMN);
    }
    header.extend(names.iter().copied());
    let mut out = CsvOut::new(&header);
    let chars: Vec<&[f64]> = names.iter().map(|n| frame.characteristic(n).unwrap()).collect();
    for i in 0..frame.len() {
        let mut row = vec![
            frame.firm().map_or(String::new(), |f| f[i].to_string()),
            frame.bank()[i].to_string(),
            frame.currency()[i].as_str().to_string(),
            frame.month()[i].to_string(),
            num(frame.loan()[i]),
        ];
        if let Some(w) = frame.weights() {
            row.push(num(w[i]));
        }
        row.extend(chars.iter().map(|c| num(c[i])));
        out.row(row);
    }
    out
}

/// Macro controls attached to a registry, in long format.
pub fn micro_controls_csv(frame: &MicroFrame) -> CsvOut {
    let mut out = CsvOut::new(&["period", "variable", "value"]);
    for name in frame.macro_control_names() {
        for (p, v) in frame.macro_control(name).unwrap() {
            out.row([p.to_string(), name.to_string(), num(*v)]);
        }
    }
    out
}

pub fn events_csv(series: &EventShockSeries) -> CsvOut {
    let mut out = CsvOut::new(&["timestamp", "v_f", "d_ebp"]);
    for e in series.events() {
        out.row([e.timestamp.to_string(), num(e.surprise), num(e.d_ebp)]);
    }
    out
}

pub fn decomposed_events_csv(d: &DecomposedShocks) -> CsvOut {
    let mut out = CsvOut::new(&["timestamp", "v_f", "d_ebp", "v_cs", "v_cd"]);
    for i in 0..d.v_f.len() {
        out.row([d.timestamps[i].to_string(), num(d.v_f[i]), num(d.d_ebp[i]), num(d.v_cs[i]), num(d.v_cd[i])]);
    }
    out
}

/// Period CSV (`period, v_cs, v_cd, v_f`).
pub fn period_shocks_csv(v_cs: &PeriodShockSeries, v_cd: &PeriodShockSeries, v_f: &PeriodShockSeries) -> CsvOut {
    let mut out = CsvOut::new(&["period", "v_cs", "v_cd", "v_f"]);
    for t in 0..v_f.values.len() {
        out.row([v_f.calendar.period(t).to_string(), num(v_cs.values[t]), num(v_cd.values[t]), num(v_f.values[t])]);
    }
    out
}

/// Single shock column (`period, shock`).
pub fn shock_csv(s: &PeriodShockSeries) -> CsvOut {
    let mut out = CsvOut::new(&["period", SHOCK_VARIABLE]);
    for (t, v) in s.values.iter().enumerate() {
        out.row([s.calendar.period(t).to_string(), num(*v)]);
    }
    out
}

pub fn irf_csv(irf: &IrfResult) -> CsvOut {
    let mut out = CsvOut::new(&["variable", "horizon", "point", "lo68", "hi68", "lo90", "hi90"]);
    for (v, name) in irf.variables.iter().enumerate() {
        for h in 0..irf.horizons() {
            out.row([
                name.clone(),
                h.to_string(),
                num(irf.point[v][h]),
                num(irf.lo68[v][h]),
                num(irf.hi68[v][h]),
                num(irf.lo90[v][h]),
                num(irf.hi90[v][h]),
            ]);
        }
    }
    out
}

/// LP results: one row per outcome, horizon and reported term.
pub fn lp_csv(results: &[LpResult]) -> CsvOut {
    let mut out = CsvOut::new(&["variable", "horizon", "term", "point", "se", "lo68", "hi68", "lo90", "hi90", "nobs", "first_stage_F"]);
    for r in results {
        for h in &r.horizons {
            for (term, est) in [("shock", h.estimate), ("expansion", h.expansion), ("contraction", h.contraction)] {
                let Some(e) = est else { continue };
                out.row([
                    r.outcome.clone(),
                    h.h.to_string(),
                    term.to_string(),
                    num(e.coef),
                    num(e.se),
                    num(e.lo68),
                    num(e.hi68),
                    num(e.lo90),
                    num(e.hi90),
                    h.nobs.to_string(),
                    h.first_stage_f.map_or(String::new(), num),
                ]);
            }
        }
    }
    out
}

pub fn micro_results_csv(results: &[InteractionResult]) -> CsvOut {
    let mut out = CsvOut::new(&["horizon", "term", "estimate", "se", "lo68", "hi68", "lo90", "hi90", "nobs"]);
    for r in results {
        for (name, t) in &r.terms {
            out.row([
                r.horizon.to_string(),
                name.clone(),
                num(t.coef),
                num(t.se),
                num(t.lo68),
                num(t.hi68),
                num(t.lo90),
                num(t.hi90),
                r.nobs.to_string(),
            ]);
        }
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> CsvOut {
    let mut out = CsvOut::new(&["firm_id", "theta", "D0", "n0", "mu", "q", "spread", "k_star"]);
    for r in rows {
        out.row([
            r.firm_id.to_string(),
            num(r.theta),
            num(r.legacy_debt),
            num(r.net_worth),
            num(r.multiplier),
            num(r.loan_price),
            num(r.spread),
            num(r.capital),
        ]);
    }
    out
}

/// Parses in-memory CSV text, mainly for tests.
pub fn reader(text: &str) -> csv::Reader<&[u8]> {
    reader_from(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label() -> &'static Path {
        Path::new("<memory>")
    }

    #[test]
    fn balanced_macro_panel() {
        let text = "country,period,variable,value\nA,2001Q1,ln_gdp,1.5\nA,2001Q2,ln_gdp,1.6\nB,2001Q1,ln_gdp,2\nB,2001Q2,ln_gdp,2.1\n";
        let m = parse_macro_panel(reader(text), label(), &[]).unwrap();
        assert!(m.balanced);
        assert_eq!(m.panel.n_countries(), 2);
        assert_eq!(m.panel.get(1, 1, 0), 2.1);
        assert!(!m.has_shock);
    }

    #[test]
    fn duplicate_key_is_named() {
        let text = "country,period,variable,value\nA,2001Q1,ln_gdp,1.5\nA,2001Q1,ln_gdp,1.7\n";
        let err = parse_macro_panel(reader(text), label(), &[]).unwrap_err().to_string();
        assert!(err.contains("duplicate key (A, 2001Q1, ln_gdp)"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn gaps_are_reported() {
        let text = "country,period,variable,value\nA,2001Q1,ln_gdp,1\nA,2001Q2,ln_gdp,1\nA,2001Q3,ln_gdp,1\nB,2001Q1,ln_gdp,2\nB,2001Q3,ln_gdp,2\n";
        let m = parse_macro_panel(reader(text), label(), &[]).unwrap();
        assert!(!m.balanced);
        assert_eq!(m.gaps.len(), 1);
        assert_eq!(m.gaps[0].country, "B");
        assert_eq!(m.gaps[0].period, Period::quarterly(2001, 2));
    }

    #[test]
    fn bad_rows_are_listed_up_to_twenty() {
        let mut text = String::from("country,period,variable,value\n");
        for i in 0..30 {
            text.push_str(&format!("A,2001Q1,v{i},inf\n"));
        }
        match parse_macro_panel(reader(&text), label(), &[]) {
            Err(Error::Schema { rows, total, .. }) => {
                assert_eq!(total, 30);
                assert_eq!(rows.len(), 20);
                assert!(rows[0].starts_with("line 2:"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shock_variable_must_agree() {
        let text = "country,period,variable,value\nA,2001Q1,shock,1\nB,2001Q1,shock,2\nA,2001Q1,y,0\nB,2001Q1,y,0\n";
        assert!(parse_macro_panel(reader(text), label(), &[]).is_err());
    }

    #[test]
    fn micro_rows_are_checked() {
        let text = "firm_id,bank_id,currency,month,loan,lev\n1,2,USD,2010-01,5,\n1,2,USD,2010-02,-1,0.5\n1,x,USD,2010-03,1,0.5\n";
        match parse_micro_frame(reader(text), label()) {
            Err(Error::Schema { rows, total, .. }) => {
                assert_eq!(total, 2);
                assert!(rows[0].contains("line 3") && rows[0].contains("positive"));
            }
            other => panic!("{other:?}"),
        }
        let ok = "firm_id,bank_id,currency,month,loan,lev\n,2,LC,2010-01,5,\n,2,LC,2010-02,6,0.5\n";
        let f = parse_micro_frame(reader(ok), label()).unwrap();
        assert!(f.firm().is_none());
        assert!(f.characteristic("lev").unwrap()[0].is_nan());
    }

    #[test]
    fn raw_events_are_weighted() {
        let text = "timestamp,dp,weight,d_ebp\n2010-01-05,2,0.5,0.1\n2010-01-04,1,0.25,-0.2\n";
        let s = parse_events(reader(text), label()).unwrap();
        assert_eq!(s.surprises(), vec![0.25, 1.0]);
        assert_eq!(s.weights().unwrap(), &[0.25, 0.5]);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "");
    }
}

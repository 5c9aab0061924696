//! Pipeline stages behind the subcommands.
//!
//! Each stage reads its inputs, writes result CSVs into the output
//! directory and records digests and diagnostics in the run manifest. The
//! manifest is written whether or not the stage succeeds.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use netshock_core::calendar::{Calendar, Frequency};
use netshock_core::lp::{estimate_iv_lp, estimate_lp, estimate_lp_sign_split, LpResult};
use netshock_core::micro::lp_interaction_path;
use netshock_core::model::{comparative_statics_n0, net_worth_sweep, solve_bank_equilibrium};
use netshock_core::panel::PanelDataset;
use netshock_core::shocks::{aggregate_standardize, decompose_rotation, decompose_split};
use netshock_core::synth::{
    gen_event_shocks, gen_iv_panel, gen_macro_panel, gen_micro_registry, gen_model_linked_registry, EventDgpSpec, IvDgpSpec, MacroDgpSpec,
    ModelLinkedSpec, RegistryDgpSpec,
};
use netshock_core::var::{build_pooled_design, estimate_bvar, group_mean_var, irf_exogenous};
use serde_json::{json, Value};

use crate::acceptance::{criteria, run_suite};
use crate::config::{calendar, DecomposeMethod, LpConfig, RunConfig, SynthKind};
use crate::csv_io::{self, num, CsvOut};
use crate::error::{Error, Result};
use crate::manifest::{ErrorSection, FileDigest, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Decompose,
    SimulateModel,
    GenSynth,
    Var,
    Lp,
    Ivlp,
    Micro,
    Validate,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Decompose,
        Command::SimulateModel,
        Command::GenSynth,
        Command::Var,
        Command::Lp,
        Command::Ivlp,
        Command::Micro,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Decompose => "decompose",
            Command::SimulateModel => "simulate-model",
            Command::GenSynth => "gen-synth",
            Command::Var => "var",
            Command::Lp => "lp",
            Command::Ivlp => "ivlp",
            Command::Micro => "micro",
            Command::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// Collects inputs, artifacts and diagnostics while a stage runs.
struct Stage {
    out: PathBuf,
    manifest: RunManifest,
}

impl Stage {
    fn input(&mut self, path: &Path) -> Result<()> {
        let abs = fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
        let d = FileDigest::of_file(&abs)?;
        if !self.manifest.inputs.contains(&d) {
            self.manifest.inputs.push(d);
        }
        Ok(())
    }

    fn emit(&mut self, name: &str, csv: CsvOut) -> Result<()> {
        self.emit_bytes(name, csv.into_bytes())
    }

    fn emit_bytes(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.push(FileDigest::of_bytes(PathBuf::from(name), &bytes));
        Ok(())
    }

    fn emit_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit_bytes(name, text.into_bytes())
    }

    fn diag(&mut self, key: &str, value: Value) {
        self.manifest.diagnostics.insert(key.into(), value);
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("{what} is required")))
}

/// Runs one command with a dedicated thread pool and writes
/// `manifest.json` into the output directory, also on failure.
pub fn run_command(command: Command, config: &RunConfig) -> Result<RunManifest> {
    let start = Instant::now();
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut stage = Stage {
        out: config.out.clone(),
        manifest: RunManifest::new(command.name(), config.to_json(), config.seed, pool.current_num_threads()),
    };
    let result = pool.install(|| match command {
        Command::Decompose => decompose(config, &mut stage),
        Command::SimulateModel => simulate_model(config, &mut stage),
        Command::GenSynth => gen_synth(config, &mut stage),
        Command::Var => var(config, &mut stage),
        Command::Lp => lp(&config.lp, false, &mut stage),
        Command::Ivlp => lp(&config.ivlp, true, &mut stage),
        Command::Micro => micro(config, &mut stage),
        Command::Validate => validate(config, &mut stage),
    });
    let mut manifest = stage.manifest;
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        manifest.error = Some(ErrorSection { message: e.to_string() });
    }
    let written = manifest.write(&config.out);
    result?;
    written?;
    Ok(manifest)
}

fn decompose(cfg: &RunConfig, st: &mut Stage) -> Result<()> {
    let c = &cfg.decompose;
    let path = required(&c.events, "decompose.events")?;
    st.input(path)?;
    let series = csv_io::read_events(path)?;
    let d = match c.method {
        DecomposeMethod::Rotation => decompose_rotation(&series)?,
        DecomposeMethod::Split => decompose_split(&series)?,
    };
    let freq: Frequency = c.frequency.into();
    let ts = series.timestamps();
    let cal = match (&c.start, &c.end) {
        (Some(s), Some(e)) => calendar(s, e)?,
        (None, None) => match (ts.first(), ts.last()) {
            (Some(a), Some(b)) => Calendar::new(a.date.period(freq), b.date.period(freq))?,
            _ => return Err(Error::Config("decompose: the event file is empty".into())),
        },
        _ => return Err(Error::Config("decompose: give both start and end or neither".into())),
    };
    if cal.freq() != freq {
        return Err(Error::Config(format!("decompose: start and end must be {freq:?} periods")));
    }
    let agg = aggregate_standardize(&d, cal)?;
    st.emit("events_decomposed.csv", csv_io::decomposed_events_csv(&d))?;
    st.emit("shocks.csv", csv_io::period_shocks_csv(&agg.v_cs, &agg.v_cd, &agg.v_f))?;
    st.diag("n_events", json!(series.len()));
    st.diag("rotation_angle", json!(d.rotation_angle));
    st.diag("admissible_set", json!(d.admissible_set));
    st.diag(
        "standardization",
        json!({
            "v_cs": {"sd_used": agg.v_cs.sd_used, "degenerate": agg.v_cs.degenerate},
            "v_cd": {"sd_used": agg.v_cd.sd_used, "degenerate": agg.v_cd.degenerate},
            "v_f": {"sd_used": agg.v_f.sd_used, "degenerate": agg.v_f.degenerate},
        }),
    );
    Ok(())
}

fn simulate_model(cfg: &RunConfig, st: &mut Stage) -> Result<()> {
    let c = &cfg.simulate_model;
    let params = c.params();
    params.validate()?;
    let eq = solve_bank_equilibrium(&params)?;
    let rows = net_worth_sweep(&params, &c.sweep_points())?;
    st.emit("sweep.csv", csv_io::sweep_csv(&rows))?;
    st.diag(
        "equilibrium",
        json!({
            "multiplier": eq.multiplier,
            "constraint_binding": eq.constraint_binding,
            "constraint_slack": eq.constraint_slack,
            "balance_sheet_residual": eq.balance_sheet_residual(&params),
            "operating_firms": eq.capital.iter().filter(|k| **k > 0.0).count(),
        }),
    );
    if eq.constraint_binding {
        let statics = comparative_statics_n0(&params, c.statics_rel_step * params.net_worth)?;
        let mut out = CsvOut::new(&["firm_id", "theta", "D0", "d_mu_d_n0", "d_spread_d_n0", "d_k_d_n0"]);
        for f in &statics.firms {
            out.row([f.firm.to_string(), num(f.theta), num(f.legacy_debt), num(statics.d_mu_d_n0), num(f.d_spread_d_n0), num(f.d_k_d_n0)]);
        }
        st.emit("statics.csv", out)?;
        st.diag("d_mu_d_n0", json!(statics.d_mu_d_n0));
    } else {
        st.diag("statics_skipped", json!("leverage constraint is slack at the base net worth"));
    }
    Ok(())
}

fn gen_synth(cfg: &RunConfig, st: &mut Stage) -> Result<()> {
    let c = &cfg.gen_synth;
    let cal = c.calendar()?;
    let seed = cfg.seed;
    match c.kind {
        SynthKind::Macro => {
            let spec = MacroDgpSpec::canonical(seed, c.n_countries, cal);
            let (panel, truth) = gen_macro_panel(&spec, c.horizon)?;
            st.emit("panel.csv", csv_io::macro_panel_csv(&panel, true))?;
            let mut irf = CsvOut::new(&["variable", "horizon", "value"]);
            for (v, name) in panel.variables().iter().enumerate() {
                for (h, x) in truth.irf[v].iter().enumerate() {
                    irf.row([name.clone(), h.to_string(), num(*x)]);
                }
            }
            st.emit("true_irf.csv", irf)?;
            st.emit_json("truth.json", &json!({"kind": "macro", "seed": seed, "irf_file": "true_irf.csv", "horizon": truth.horizon()}))?;
        }
        SynthKind::Events => {
            let spec = EventDgpSpec::symmetric(seed, c.n_events, c.kappa, cal);
            let (series, truth) = gen_event_shocks(&spec)?;
            st.emit("events.csv", csv_io::events_csv(&series))?;
            st.emit_json(
                "truth.json",
                &json!({"kind": "events", "seed": seed, "angle": truth.angle, "supply": truth.supply, "demand": truth.demand}),
            )?;
        }
        SynthKind::Iv => {
            let spec = IvDgpSpec::canonical(seed, c.n_countries, cal);
            let panel = gen_iv_panel(&spec)?;
            st.emit("panel.csv", csv_io::macro_panel_csv(&panel, true))?;
            st.emit_json(
                "truth.json",
                &json!({"kind": "iv", "seed": seed, "b": spec.b, "pi": spec.pi, "ols_limit": spec.ols_limit(), "endogenous": "ebp"}),
            )?;
        }
        SynthKind::RegistryBank | SynthKind::RegistryFirm => {
            let mut spec = if c.kind == SynthKind::RegistryBank {
                RegistryDgpSpec::bank_level(seed, cal)
            } else {
                RegistryDgpSpec::firm_level(seed, cal)
            };
            if let Some(n) = c.n_banks {
                spec.n_banks = n;
            }
            if let Some(n) = c.n_firms {
                spec.n_firms = n;
            }
            let (frame, shock, truth) = gen_micro_registry(&spec)?;
            st.emit("registry.csv", csv_io::micro_frame_csv(&frame))?;
            st.emit("shock.csv", csv_io::shock_csv(&shock))?;
            st.emit("controls.csv", csv_io::micro_controls_csv(&frame))?;
            st.emit_json(
                "truth.json",
                &json!({
                    "kind": if c.kind == SynthKind::RegistryBank { "registry-bank" } else { "registry-firm" },
                    "seed": seed,
                    "beta_pos": truth.beta_pos,
                    "beta_neg": truth.beta_neg,
                    "delta_pos": truth.delta_pos,
                    "delta_neg": truth.delta_neg,
                }),
            )?;
        }
        SynthKind::ModelLinked => {
            let mut spec = ModelLinkedSpec::overhang_dominant(seed, cal);
            if let Some(n) = c.n_firms {
                spec.n_firms = n;
            }
            let (frame, shock, truth) = gen_model_linked_registry(&spec)?;
            st.emit("registry.csv", csv_io::micro_frame_csv(&frame))?;
            st.emit("shock.csv", csv_io::shock_csv(&shock))?;
            st.emit_json(
                "truth.json",
                &json!({
                    "kind": "model-linked",
                    "seed": seed,
                    "theta": truth.theta,
                    "legacy_debt": truth.legacy_debt,
                    "n0": truth.n0,
                    "log_capital_mean": truth.log_capital_mean,
                }),
            )?;
        }
    }
    st.diag("calendar", json!({"start": cal.start.to_string(), "periods": cal.len}));
    Ok(())
}

/// Reads a macro panel and installs the shock from `shock_file` when given.
fn load_panel(panel: &Option<PathBuf>, global: &[String], shock_file: &Option<PathBuf>, column: &str, section: &str, st: &mut Stage) -> Result<PanelDataset> {
    let path = required(panel, &format!("{section}.panel"))?;
    st.input(path)?;
    let ingest = csv_io::read_macro_panel(path, global)?;
    st.diag("balanced", json!(ingest.balanced));
    if !ingest.gaps.is_empty() {
        st.diag("gaps", json!(ingest.gaps.iter().map(|g| format!("{g:?}")).collect::<Vec<_>>()));
    }
    let mut panel = ingest.panel;
    match shock_file {
        Some(sf) => {
            st.input(sf)?;
            let s = csv_io::read_shock_column(sf, column)?;
            let cal = panel.calendar();
            let values = cal
                .periods()
                .map(|p| {
                    s.calendar
                        .index_of(p)
                        .map(|i| s.values[i])
                        .ok_or_else(|| Error::Config(format!("{}: no {column} value for {p}", sf.display())))
                })
                .collect::<Result<Vec<f64>>>()?;
            panel.set_shock(values)?;
        }
        None if !ingest.has_shock => {
            return Err(Error::Config(format!(
                "{}: no `{}` variable; set {section}.shock_file",
                path.display(),
                csv_io::SHOCK_VARIABLE
            )))
        }
        None => {}
    }
    Ok(panel)
}

fn var(cfg: &RunConfig, st: &mut Stage) -> Result<()> {
    let c = &cfg.var;
    let panel = load_panel(&c.panel, &c.global, &c.shock_file, &c.shock_column, "var", st)?;
    let spec = c.spec(cfg.seed)?;
    let post = if c.group_mean {
        panel.require_balanced()?;
        group_mean_var(&panel, &spec)?
    } else {
        let design = build_pooled_design(&panel, &spec)?;
        estimate_bvar(&design, &spec)?
    };
    let irf = irf_exogenous(&post, c.horizon, c.shock_size)?;
    st.emit("irf.csv", csv_io::irf_csv(&irf))?;
    st.diag("rows", json!(post.n_rows));
    st.diag("draws", json!(post.coef_draws.len()));
    st.diag("explosive_share", json!(irf.explosive_share));
    Ok(())
}

fn lp(c: &LpConfig, iv: bool, st: &mut Stage) -> Result<()> {
    let section = if iv { "ivlp" } else { "lp" };
    let panel = load_panel(&c.panel, &c.global, &c.shock_file, &c.shock_column, section, st)?;
    let spec = c.spec()?;
    if iv != spec.iv.is_some() {
        return Err(Error::Config(if iv { "ivlp needs an [ivlp.iv] table".into() } else { "lp takes no iv table; use ivlp".into() }));
    }
    let outcomes: Vec<String> = if c.outcomes.is_empty() {
        (0..panel.n_vars()).filter(|v| !panel.is_global(*v)).map(|v| panel.variables()[v].clone()).collect()
    } else {
        c.outcomes.clone()
    };
    if outcomes.is_empty() {
        return Err(Error::Config(format!("{section}: no outcome variables")));
    }
    let results = outcomes
        .iter()
        .map(|o| {
            if iv {
                estimate_iv_lp(&panel, o, &spec)
            } else if spec.sign_split {
                estimate_lp_sign_split(&panel, o, &spec)
            } else {
                estimate_lp(&panel, o, &spec)
            }
        })
        .collect::<std::result::Result<Vec<LpResult>, _>>()?;
    st.emit("lp.csv", csv_io::lp_csv(&results))?;
    let per_outcome: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "outcome": r.outcome,
                "nobs": r.horizons.iter().map(|h| h.nobs).collect::<Vec<_>>(),
                "date_clusters": r.horizons.iter().map(|h| h.n_clusters).collect::<Vec<_>>(),
                "first_stage_F": r.horizons.iter().map(|h| h.first_stage_f).collect::<Vec<_>>(),
                "weak_instrument_horizons": r.horizons.iter().filter(|h| h.weak_instrument).map(|h| h.h).collect::<Vec<_>>(),
                "dropped": r.horizons.iter().map(|h| h.dropped.clone()).collect::<Vec<_>>(),
                "notes": r.notes,
            })
        })
        .collect();
    st.diag("outcomes", json!(per_outcome));
    Ok(())
}

fn micro(cfg: &RunConfig, st: &mut Stage) -> Result<()> {
    let c = &cfg.micro;
    let path = required(&c.registry, "micro.registry")?;
    st.input(path)?;
    let mut frame = csv_io::read_micro_frame(path)?;
    if let Some(cf) = &c.controls_file {
        st.input(cf)?;
        for (name, series) in csv_io::read_period_series(cf)? {
            frame.add_macro_control(&name, series)?;
        }
    }
    let sf = required(&c.shock_file, "micro.shock_file")?;
    st.input(sf)?;
    let shock = csv_io::read_shock_column(sf, &c.shock_column)?;
    let spec = c.spec(&cfg.tolerances)?;
    let results = lp_interaction_path(&frame, &shock, &spec, c.horizons.iter().copied())?;
    st.emit("micro.csv", csv_io::micro_results_csv(&results))?;
    let diag: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "horizon": r.horizon,
                "nobs": r.nobs,
                "clusters": r.n_clusters,
                "absorb_sweeps": r.sweeps,
                "psd_repaired": r.psd_repaired,
                "dropped": r.dropped,
            })
        })
        .collect();
    st.diag("horizons", json!(diag));
    Ok(())
}

fn validate(cfg: &RunConfig, st: &mut Stage) -> Result<()> {
    let known: Vec<usize> = criteria().iter().map(|c| c.0).collect();
    if let Some(bad) = cfg.validate.criteria.iter().find(|id| !known.contains(id)) {
        return Err(Error::Config(format!("validate: unknown criterion {bad} (known: {known:?})")));
    }
    let reports = run_suite(&cfg.validate.criteria, cfg.seed, |r| println!("{}", r.line()));
    let mut out = CsvOut::new(&["id", "name", "passed", "seconds", "limit_seconds", "detail"]);
    for r in &reports {
        out.row([r.id.to_string(), r.name.to_string(), r.passed.to_string(), num(r.seconds), num(r.limit_seconds), r.detail.clone()]);
    }
    st.emit("acceptance.csv", out)?;
    let failed: Vec<usize> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("{} of {} criteria passed", reports.len() - failed.len(), reports.len());
    st.diag("passed", json!(reports.len() - failed.len()));
    st.diag("failed", json!(failed));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Acceptance(failed))
    }
}

//! Run configuration read from TOML.
//!
//! Every section has defaults, so an empty file is a valid config. Unknown
//! keys are rejected. Relative paths in a config file resolve against the
//! file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use netshock_core::calendar::{Calendar, Frequency, Period};
use netshock_core::lp::{FStat, IvSpec, LpSpec, Trend};
use netshock_core::micro::{AbsorbOptions, Dim, InteractionSpec, Key};
use netshock_core::model::{binding_grid_params, Firm, ModelParams};
use netshock_core::var::{MinnesotaPrior, NormalWishartPrior, Prior, VarSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
    pub tolerances: Tolerances,
    pub decompose: DecomposeConfig,
    #[serde(rename = "simulate-model")]
    pub simulate_model: SimulateModelConfig,
    #[serde(rename = "gen-synth")]
    pub gen_synth: GenSynthConfig,
    pub var: VarConfig,
    pub lp: LpConfig,
    pub ivlp: LpConfig,
    pub micro: MicroConfig,
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            tolerances: Tolerances::default(),
            decompose: DecomposeConfig::default(),
            simulate_model: SimulateModelConfig::default(),
            gen_synth: GenSynthConfig::default(),
            var: VarConfig::default(),
            lp: LpConfig::default(),
            ivlp: LpConfig { iv: Some(IvConfig::default()), ..LpConfig::default() },
            micro: MicroConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub absorb_tolerance: f64,
    pub absorb_max_sweeps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = AbsorbOptions::default();
        Tolerances { absorb_tolerance: d.tolerance, absorb_max_sweeps: d.max_sweeps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Freq {
    Monthly,
    #[default]
    Quarterly,
}

impl From<Freq> for Frequency {
    fn from(f: Freq) -> Self {
        match f {
            Freq::Monthly => Frequency::Monthly,
            Freq::Quarterly => Frequency::Quarterly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecomposeMethod {
    #[default]
    Rotation,
    Split,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    pub events: Option<PathBuf>,
    pub method: DecomposeMethod,
    pub frequency: Freq,
    /// First and last period of the output calendar; default to the span of
    /// the events.
    pub start: Option<String>,
    pub end: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmConfig {
    pub productivity: f64,
    pub theta: f64,
    pub legacy_debt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateModelConfig {
    pub alpha: f64,
    pub theta_us: f64,
    pub us_productivity: f64,
    pub deposit_rate: f64,
    pub lambda: f64,
    pub net_worth: f64,
    pub equity_cost_phi: f64,
    pub equity_issuance: f64,
    /// Uniform-weight firm grid; the 5x5 reference grid when absent.
    pub firms: Option<Vec<FirmConfig>>,
    /// Net-worth levels of the sweep; nine points within 10% of
    /// `net_worth` when empty.
    pub net_worths: Vec<f64>,
    /// Finite-difference step for the statics as a fraction of `net_worth`.
    pub statics_rel_step: f64,
}

impl Default for SimulateModelConfig {
    fn default() -> Self {
        let p = binding_grid_params();
        SimulateModelConfig {
            alpha: p.alpha,
            theta_us: p.theta_us,
            us_productivity: p.us_productivity,
            deposit_rate: p.deposit_rate,
            lambda: p.lambda,
            net_worth: p.net_worth,
            equity_cost_phi: p.equity_cost_phi,
            equity_issuance: p.equity_issuance,
            firms: None,
            net_worths: Vec::new(),
            statics_rel_step: 1e-4,
        }
    }
}

impl SimulateModelConfig {
    pub fn params(&self) -> ModelParams {
        let firms: Vec<Firm> = match &self.firms {
            Some(f) => ModelParams::uniform_firms(&f.iter().map(|f| (f.productivity, f.theta, f.legacy_debt)).collect::<Vec<_>>()),
            None => binding_grid_params().firms,
        };
        ModelParams {
            alpha: self.alpha,
            firms,
            theta_us: self.theta_us,
            us_productivity: self.us_productivity,
            deposit_rate: self.deposit_rate,
            lambda: self.lambda,
            net_worth: self.net_worth,
            equity_cost_phi: self.equity_cost_phi,
            equity_issuance: self.equity_issuance,
        }
    }

    pub fn sweep_points(&self) -> Vec<f64> {
        if !self.net_worths.is_empty() {
            return self.net_worths.clone();
        }
        (0..9).map(|i| self.net_worth * (0.9 + 0.025 * i as f64)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    #[default]
    Macro,
    Events,
    Iv,
    RegistryBank,
    RegistryFirm,
    ModelLinked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSynthConfig {
    pub kind: SynthKind,
    /// Calendar bounds; each kind has its own default span.
    pub start: Option<String>,
    pub end: Option<String>,
    pub n_countries: usize,
    pub n_events: usize,
    /// Scale of the EBP loadings in the event generator.
    pub kappa: f64,
    pub n_banks: Option<usize>,
    pub n_firms: Option<usize>,
    /// Largest horizon of the true IRF written for macro panels.
    pub horizon: usize,
}

impl Default for GenSynthConfig {
    fn default() -> Self {
        GenSynthConfig {
            kind: SynthKind::Macro,
            start: None,
            end: None,
            n_countries: 12,
            n_events: 200,
            kappa: 1.0,
            n_banks: None,
            n_firms: None,
            horizon: 12,
        }
    }
}

impl GenSynthConfig {
    pub fn calendar(&self) -> Result<Calendar> {
        let (start, end) = match self.kind {
            SynthKind::Macro | SynthKind::Iv => ("2000Q1", "2017Q2"),
            SynthKind::Events => ("2000Q1", "2019Q4"),
            SynthKind::RegistryBank | SynthKind::RegistryFirm => ("2010-01", "2019-12"),
            SynthKind::ModelLinked => ("2015-01", "2018-12"),
        };
        calendar(self.start.as_deref().unwrap_or(start), self.end.as_deref().unwrap_or(end))
    }
}

/// Calendar from two period strings such as `2001Q3` or `2010-01`.
pub fn calendar(start: &str, end: &str) -> Result<Calendar> {
    let p = |s: &str| s.parse::<Period>().map_err(|e| Error::Config(format!("period {s:?}: {e}")));
    Ok(Calendar::new(p(start)?, p(end)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    Flat,
    NormalWishart,
    #[default]
    Minnesota,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarConfig {
    pub panel: Option<PathBuf>,
    /// Variables treated as global beyond the standard global block.
    pub global: Vec<String>,
    pub lags: usize,
    pub prior: PriorKind,
    pub tightness: Option<f64>,
    pub cross_factor: Option<f64>,
    pub lag_decay: Option<f64>,
    pub exog_scale: Option<f64>,
    pub draws: usize,
    pub horizon: usize,
    pub shock_size: f64,
    pub group_mean: bool,
    pub shared_block_correction: bool,
    /// Wide period file replacing the panel's shock variable.
    pub shock_file: Option<PathBuf>,
    pub shock_column: String,
}

impl Default for VarConfig {
    fn default() -> Self {
        let d = VarSpec::default();
        VarConfig {
            panel: None,
            global: Vec::new(),
            lags: d.lags,
            prior: PriorKind::Minnesota,
            tightness: None,
            cross_factor: None,
            lag_decay: None,
            exog_scale: None,
            draws: d.draws,
            horizon: 12,
            shock_size: 1.0,
            group_mean: false,
            shared_block_correction: d.shared_block_correction,
            shock_file: None,
            shock_column: "v_cs".into(),
        }
    }
}

impl VarConfig {
    pub fn spec(&self, seed: u64) -> Result<VarSpec> {
        let prior = match self.prior {
            PriorKind::Flat => {
                if self.tightness.is_some() || self.cross_factor.is_some() || self.lag_decay.is_some() || self.exog_scale.is_some() {
                    return Err(Error::Config("the flat prior takes no hyperparameters".into()));
                }
                Prior::Flat
            }
            PriorKind::NormalWishart => {
                if self.cross_factor.is_some() {
                    return Err(Error::Config("the Normal-Wishart prior has no cross_factor".into()));
                }
                let d = NormalWishartPrior::default();
                Prior::NormalWishart(NormalWishartPrior {
                    tightness: self.tightness.unwrap_or(d.tightness),
                    lag_decay: self.lag_decay.unwrap_or(d.lag_decay),
                    exog_scale: self.exog_scale.unwrap_or(d.exog_scale),
                })
            }
            PriorKind::Minnesota => {
                let d = MinnesotaPrior::default();
                Prior::Minnesota(MinnesotaPrior {
                    tightness: self.tightness.unwrap_or(d.tightness),
                    cross_factor: self.cross_factor.unwrap_or(d.cross_factor),
                    lag_decay: self.lag_decay.unwrap_or(d.lag_decay),
                    exog_scale: self.exog_scale.unwrap_or(d.exog_scale),
                })
            }
        };
        let spec = VarSpec { lags: self.lags, prior, draws: self.draws, seed, shared_block_correction: self.shared_block_correction };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendKind {
    #[default]
    None,
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FStatKind {
    #[default]
    ClusterRobust,
    Homoskedastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvConfig {
    pub endogenous: String,
    pub ebp_unit_bp: f64,
    pub normalization_bp: f64,
    pub weak_f_floor: f64,
    pub f_stat: FStatKind,
}

impl Default for IvConfig {
    fn default() -> Self {
        let d = IvSpec::default();
        IvConfig {
            endogenous: d.endogenous,
            ebp_unit_bp: d.ebp_unit_bp,
            normalization_bp: d.normalization_bp,
            weak_f_floor: d.weak_f_floor,
            f_stat: FStatKind::ClusterRobust,
        }
    }
}

impl IvConfig {
    pub fn spec(&self) -> IvSpec {
        IvSpec {
            endogenous: self.endogenous.clone(),
            ebp_unit_bp: self.ebp_unit_bp,
            normalization_bp: self.normalization_bp,
            weak_f_floor: self.weak_f_floor,
            f_stat: match self.f_stat {
                FStatKind::ClusterRobust => FStat::ClusterRobust,
                FStatKind::Homoskedastic => FStat::Homoskedastic,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpConfig {
    pub panel: Option<PathBuf>,
    pub global: Vec<String>,
    /// Outcome variables; every non-global variable when empty.
    pub outcomes: Vec<String>,
    pub horizons: usize,
    /// Lagged controls; every panel variable when absent.
    pub controls: Option<Vec<String>>,
    pub control_lags: usize,
    pub shock_lags: usize,
    pub season_fe: bool,
    pub country_fe: bool,
    pub trends: TrendKind,
    pub sign_split: bool,
    pub shock_file: Option<PathBuf>,
    pub shock_column: String,
    pub iv: Option<IvConfig>,
}

impl Default for LpConfig {
    fn default() -> Self {
        let d = LpSpec::default();
        LpConfig {
            panel: None,
            global: Vec::new(),
            outcomes: Vec::new(),
            horizons: d.horizons,
            controls: None,
            control_lags: d.control_lags,
            shock_lags: d.shock_lags,
            season_fe: d.season_fe,
            country_fe: d.country_fe,
            trends: TrendKind::None,
            sign_split: d.sign_split,
            shock_file: None,
            shock_column: "v_cs".into(),
            iv: None,
        }
    }
}

impl LpConfig {
    pub fn spec(&self) -> Result<LpSpec> {
        let spec = LpSpec {
            horizons: self.horizons,
            controls: self.controls.clone(),
            control_lags: self.control_lags,
            shock_lags: self.shock_lags,
            season_fe: self.season_fe,
            country_fe: self.country_fe,
            trends: match self.trends {
                TrendKind::None => Trend::None,
                TrendKind::Linear => Trend::Linear,
                TrendKind::Quadratic => Trend::Quadratic,
            },
            sign_split: self.sign_split,
            iv: self.iv.as_ref().map(IvConfig::spec),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MicroConfig {
    pub registry: Option<PathBuf>,
    /// Wide period file holding the monthly shock.
    pub shock_file: Option<PathBuf>,
    pub shock_column: String,
    /// Long-format macro controls (`period, variable, value`).
    pub controls_file: Option<PathBuf>,
    pub interactions: Vec<String>,
    pub controls: Vec<String>,
    pub macro_controls: Vec<String>,
    pub interaction_levels: bool,
    pub horizons: Vec<usize>,
    /// Keys such as `bank`, `firm*month` or `bankxmonth`.
    pub fe: Vec<String>,
    pub cluster: Vec<String>,
    pub weighted: bool,
    pub include_main_effect: bool,
    pub sign_split: bool,
}

impl Default for MicroConfig {
    fn default() -> Self {
        let d = InteractionSpec::default();
        MicroConfig {
            registry: None,
            shock_file: None,
            shock_column: "shock".into(),
            controls_file: None,
            interactions: d.interactions,
            controls: d.controls,
            macro_controls: d.macro_controls,
            interaction_levels: d.interaction_levels,
            horizons: (0..=12).collect(),
            fe: d.fe.iter().map(Key::name).collect(),
            cluster: d.cluster.iter().map(Key::name).collect(),
            weighted: d.weighted,
            include_main_effect: d.include_main_effect,
            sign_split: d.sign_split,
        }
    }
}

/// Parses `firm*month`, `firmxmonth` or `firm`.
pub fn parse_key(s: &str) -> Result<Key> {
    let dims = s
        .split(['*', 'x'])
        .map(|part| match part.trim() {
            "firm" => Ok(Dim::Firm),
            "bank" => Ok(Dim::Bank),
            "currency" => Ok(Dim::Currency),
            "month" => Ok(Dim::Month),
            other => Err(Error::Config(format!("unknown key dimension {other:?} in {s:?}"))),
        })
        .collect::<Result<Vec<Dim>>>()?;
    Ok(Key::of(&dims))
}

impl MicroConfig {
    pub fn spec(&self, tol: &Tolerances) -> Result<InteractionSpec> {
        if self.horizons.is_empty() {
            return Err(Error::Config("micro: at least one horizon is required".into()));
        }
        Ok(InteractionSpec {
            interactions: self.interactions.clone(),
            controls: self.controls.clone(),
            macro_controls: self.macro_controls.clone(),
            interaction_levels: self.interaction_levels,
            horizon: 0,
            fe: self.fe.iter().map(|k| parse_key(k)).collect::<Result<_>>()?,
            cluster: self.cluster.iter().map(|k| parse_key(k)).collect::<Result<_>>()?,
            weighted: self.weighted,
            include_main_effect: self.include_main_effect,
            sign_split: self.sign_split,
            absorb: AbsorbOptions { tolerance: tol.absorb_tolerance, max_sweeps: tol.absorb_max_sweeps },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Criterion ids; all when empty.
    pub criteria: Vec<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.ivlp.iv.get_or_insert_with(IvConfig::default);
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                fix(p);
            }
        };
        fix(&mut self.out);
        fix_opt(&mut self.decompose.events);
        fix_opt(&mut self.var.panel);
        fix_opt(&mut self.var.shock_file);
        for lp in [&mut self.lp, &mut self.ivlp] {
            fix_opt(&mut lp.panel);
            fix_opt(&mut lp.shock_file);
        }
        fix_opt(&mut self.micro.registry);
        fix_opt(&mut self.micro.shock_file);
        fix_opt(&mut self.micro.controls_file);
    }

    /// Canonical JSON of the resolved config.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        assert!(RunConfig::default().ivlp.iv.is_some());
        let cfg = RunConfig::from_toml("[ivlp]\nhorizons = 3").unwrap();
        assert_eq!(cfg.ivlp.iv, Some(IvConfig::default()));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("sed = 3").unwrap_err().to_string();
        assert!(e.contains("sed"), "{e}");
        assert!(RunConfig::from_toml("[var]\nlag = 2").is_err());
        assert!(RunConfig::from_toml("[gen-synth]\nkind = \"nope\"").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 9
            [tolerances]
            absorb_tolerance = 1e-10
            [simulate-model]
            net_worth = 0.35
            [var]
            prior = "flat"
            draws = 600
            [ivlp.iv]
            normalization_bp = -25.0
            [micro]
            fe = ["firm*month", "bankxmonth"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.simulate_model.params().net_worth, 0.35);
        assert_eq!(cfg.var.spec(1).unwrap().prior, Prior::Flat);
        assert_eq!(cfg.ivlp.iv.as_ref().unwrap().spec().scale(), -0.25);
        let spec = cfg.micro.spec(&cfg.tolerances).unwrap();
        assert_eq!(spec.fe, vec![Key::firm_month(), Key::bank_month()]);
        assert_eq!(spec.absorb.tolerance, 1e-10);
    }

    #[test]
    fn hyperparameters_must_fit_the_prior() {
        let cfg = RunConfig::from_toml("[var]\nprior = \"flat\"\ntightness = 0.1").unwrap();
        assert!(cfg.var.spec(0).is_err());
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let mut cfg = RunConfig::from_toml("out = \"res\"\n[var]\npanel = \"p.csv\"\n[lp]\npanel = \"/abs/p.csv\"").unwrap();
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.out, PathBuf::from("/cfg/res"));
        assert_eq!(cfg.var.panel, Some(PathBuf::from("/cfg/p.csv")));
        assert_eq!(cfg.lp.panel, Some(PathBuf::from("/abs/p.csv")));
    }

    #[test]
    fn key_parsing() {
        assert_eq!(parse_key("month*firm").unwrap(), Key::firm_month());
        assert_eq!(parse_key("currency").unwrap(), Key::currency());
        assert!(parse_key("country").is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_value(cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}

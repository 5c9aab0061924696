//! Fixed-effect interaction regressions on loan-level registries.

mod absorb;
mod frame;
mod regress;
mod transform;

pub use absorb::{absorb_fixed_effects, AbsorbOptions, Absorbed, FeGroups};
pub use frame::{Currency, Dim, Key, MicroFrame, UnitKey};
pub use regress::{
    interaction_design, lp_interaction, lp_interaction_path, marginal_effect, InteractionDesign, InteractionResult,
    InteractionSpec, MicroTerm, ABSORBED_TOL,
};
pub use transform::{detrend_by_age, standardize_within_unit, Standardized};

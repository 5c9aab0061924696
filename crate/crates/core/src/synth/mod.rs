//! Ground-truth data generators.
//!
//! Every generator is a pure function of its spec. Randomness comes from
//! ChaCha20 substreams (see [`crate::rng`]) keyed by the generator seed and a
//! fixed per-entity stream index, so output is bit-identical across runs,
//! thread counts and platforms.

pub mod events;
pub mod lp_dgp;
pub mod macro_panel;
pub mod model_linked;
pub mod registry;

pub use events::{gen_event_shocks, EventDgpSpec, EventTruth};
pub use lp_dgp::{gen_iv_panel, gen_static_lp_panel, IvDgpSpec, StaticLpSpec};
pub use macro_panel::{gen_macro_panel, MacroDgpSpec, MacroTruth};
pub use model_linked::{gen_model_linked_registry, ModelLinkedSpec, ModelLinkedTruth};
pub use registry::{gen_micro_registry, CharSpec, Confounder, Grain, RegistryDgpSpec, RegistryTruth, Space};

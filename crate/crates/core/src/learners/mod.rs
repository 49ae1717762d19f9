//! Replay storage, policy bundles and the per-step update rules.

mod buffer;
mod bundle;
mod features;
mod persist;
mod updates;

pub use buffer::{ReplayBuffer, Transition};
pub use bundle::{ActorCritic, GuardPolicy, LearnerSettings, MoveLearner, PolicyBundle, Vdn};
pub use features::FeatureMap;
pub(crate) use bundle::ACTOR_OUTPUT_BOUND;
pub(crate) use persist::save_networks;
pub use persist::{load_bundle, save_bundle, BundleManifest, FullActionManifest, NetworkEntry, MANIFEST_FILE};
pub use updates::{actor_update, critic_update, il_update, il_loss, vdn_update};

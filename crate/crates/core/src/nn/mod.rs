//! Small dense networks with hand-written backpropagation.

mod adam;
mod gradcheck;
mod mlp;
mod snapshot;

pub use adam::Adam;
pub use gradcheck::{gradient_check, LossTag};
pub use mlp::{Dense, Gradients, Mlp, OutputActivation, Trace};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};

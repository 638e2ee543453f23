//! Runtime patches that equalize observations across secret classes.

mod align;
mod model;
mod monitor;
mod synth;

pub use align::{align_traces, reference_trace, shortest_supersequence};
pub use model::{read_patch_file, write_patch_file, Patch, PatchFileError, PatchFix};
pub use monitor::{run_monitoring, ClassEntry, ExplorationStatus, Member, MonitorError, MonitoringOutcome};
pub use synth::{synth_time_patches, synth_trace_patches, synthesize, SynthError};

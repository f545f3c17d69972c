//! Converted-dataset access and synthetic recordings.

mod store;
pub mod synth;

pub use store::{
    channel_name, write_store, ChannelEntry, DatasetStore, DeviceEntry, Manifest, SignalChannel,
    SubjectEntry, SubjectRecord, LABEL_DTYPE, MANIFEST_FILE, SAMPLE_DTYPE,
};
pub use synth::{generate_synthetic, SyntheticScenario};

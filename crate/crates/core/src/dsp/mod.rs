//! Filtering and windowing of raw recordings.

mod filter;
mod preprocess;
mod segment;

pub use filter::{
    apply_filter, design_filter, filter_samples, Biquad, FilterCoefficients, FilterSpec,
};
pub use preprocess::{preprocess, PreprocessPlan};
pub use segment::{majority_label, segment, ChannelSlice, SegmentationSpec, WindowedSegment};

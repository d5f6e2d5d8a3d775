//! Rate-distortion harness, baselines and channel simulation.

mod channels;
mod export;
mod rd;

pub use channels::{
    decoder_quality, enumerate_outcomes, monte_carlo, simulate_channels, ChannelReport, ChannelScenario, Decoder,
    DecoderQuality, Outcome,
};
pub use export::{export_rd, plot_rd, rd_csv, read_rd, CSV_HEADER};
pub use rd::{
    code_descriptions, evaluate_model, evaluate_ours_base, evaluate_pipeline, reconstruct_all_views, Bilinear,
    CodedPair, Describer, ImageEvaluation, LearnedDescriptions, LearnedReconstruction, Polyphase, RdPoint, RdReport,
    RdRow, Reconstructor, BASELINE_QFS, MEAN_IMAGE, PROPOSED_QFS,
};

//! Correlation engine: histograms of tag-pair delays and the peak and
//! accidental statistics read off them.

mod correlate;
mod histogram;
mod summary;

pub use correlate::{autocorrelate_split, correlate_times, cross_correlate};
pub use histogram::Histogram;
pub use summary::{
    coincidence_summary, timebin_accidentals, timebin_background, timebin_peaks, CoincidenceSummary, SummaryOptions,
    TimeBinBackground, TimeBinPeaks, DEFAULT_GUARD_PS, DEFAULT_WINDOW_PS, PEAK_SEARCH_PS,
};

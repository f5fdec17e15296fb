//! Policy evaluation, the return-histogram experiment, W1 and plotting.

pub mod evaluate;
pub mod histogram;
pub mod plots;
pub mod wasserstein;

pub use evaluate::{evaluate, EvalMode, EvalSummary};
pub use histogram::{bin_counts, bin_edges, histogram_experiment, histogram_samples, HistogramConfig, HistogramReport, ValueSource};
pub use plots::{emit_plots, plot_histogram, plot_return_curves};
pub use wasserstein::{wasserstein1, wasserstein1_samples};

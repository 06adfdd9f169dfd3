//! Agreement, distribution and classification metrics.

mod alpha;
mod distribution;
mod f1;

pub use alpha::{alpha_from_counts, krippendorff_alpha};
pub use distribution::{
    estimate_pdf, silverman_bandwidth, soft_labels, Bandwidth, PdfCurve, SoftLabelSeries, GRID_POINTS,
};
pub use f1::{f1_scores, F1Report, Predictions};

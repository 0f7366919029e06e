//! Clustering primitives: flat-kernel Mean Shift, DBSCAN over precomputed
//! distances, bandwidth estimation and k-distance eps suggestion.

mod bandwidth;
mod dbscan;
mod mean_shift;

pub use bandwidth::{eps_from_curve, estimate_bandwidth, k_distances, suggest_eps, write_k_distance_csv, EpsSuggestion};
pub use dbscan::{dbscan_dist, dbscan_points, ClusterLabels, DbscanParams, NOISE};
pub use mean_shift::{mean_shift, MeanShiftParams, MeanShiftResult};

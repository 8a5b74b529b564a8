//! Dataset reduction through homogeneous clustering.
//!
//! A labeled dataset is split into clusters whose members share one label
//! ([`rhc`]). From there three reductions are available:
//!
//! * **RHC** keeps one synthetic centroid per cluster.
//! * **GHCIDR** ([`ghcidr`]) keeps real rows: the row nearest each centroid
//!   plus one row per concentric shell of the cluster, with the shell count
//!   set by `alpha`.
//! * **Merged-GHCIDR** ([`merge`]) first merges same-label clusters by
//!   complete linkage down to a `beta` fraction of their count, then applies
//!   GHCIDR.
//!
//! [`eval`] scores a reduced set with an exact k-NN classifier.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod ghcidr;
pub mod merge;
pub mod metric;
pub mod rhc;

pub use dataset::{
    load_cifar10, load_csv, load_idx, read_indices, write_subset, CsvOptions, DatasetFormat,
    DatasetSource, LabeledDataset, SubsetFormat, SubsetSpec,
};
pub use error::{Error, Result};
pub use eval::{
    evaluate, knn_accuracy, reduction_rate, Algorithm, EvaluationReport, ReductionResult, Selection,
};
pub use ghcidr::{
    ghcidr_reduce, plan_annuli, select_from_cluster, select_from_distances, AnnulusPlan,
};
pub use merge::{
    calibrate_beta, complete_linkage_distance, merge_class, merge_partition, merged_ghcidr_reduce,
    Calibration, MergePlan,
};
pub use metric::{class_means, euclidean_distance, kmeans, CentroidSet, KMeansConfig};
pub use rhc::{
    partition_stats, rhc_partition, rhc_reduce, rhc_reduce_partition, HomogeneousCluster,
    Partition, SizeHistogram,
};

//! MNIST loading and the pathological non-IID partitioner.

mod dataset;
mod idx;
mod partition;

pub use dataset::{load_mnist, Dataset, Split, MNIST_FILES, MNIST_MEAN, MNIST_STD};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages};
pub use partition::{
    partition_report, pathological_partition, read_partitions_json, summarize_partitions,
    write_partition_csv, write_partitions_json, ClientPartition, LabelCount, PartitionSummary,
};

//! Federated-learning primitives at desk scale: synthetic Gaussian-cluster
//! data, an L2-regularized multinomial logistic model, local SGD, FedAvg and
//! the sequential intra-orbit accumulation rule.

mod aggregate;
mod data;
mod model;
mod optimum;
mod train;

pub use aggregate::{fedavg, suborbital_accumulate};
pub use data::{
    generate_synthetic, partition, read_dataset, write_dataset, Dataset, DatasetShard,
    PartitionMode, SyntheticSpec, DATASET_MAGIC, DATASET_VERSION,
};
pub use model::{evaluate, LogisticModel, Metrics, ModelVector};
pub use optimum::{minimize_full_batch, Optimum};
pub use train::{local_train, LrSchedule, TrainConfig};

//! Federated training over the simulated uplink: desk-scale models, label
//! partitioning, server update rules and the communication-round loop.

mod data;
mod model;
mod trainer;

pub use data::{partition_heterogeneous, partition_iid, Dataset, DeviceDataset, Example};
pub use model::{local_gradient, Model, ModelKind};
pub use trainer::{
    global_update_gd, global_update_momentum, lr_schedule, EstimateConvention, Federation,
    LrSchedule, RoundMetrics, TrainerState, TrainingConfig, TrainingRun,
};

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One labelled example. Classification labels are class indices stored as
/// whole numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Example {
    pub fn class(&self) -> usize {
        self.label as usize
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub feature_dim: usize,
    /// `Some(C)` for classification data with labels in `0..C`.
    pub num_classes: Option<usize>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, num_classes: Option<usize>) -> Result<Self> {
        let feature_dim = examples.first().map_or(0, |e| e.features.len());
        if let Some(bad) = examples.iter().find(|e| e.features.len() != feature_dim) {
            return Err(Error::LengthMismatch {
                expected: feature_dim,
                found: bad.features.len(),
            });
        }
        if let Some(c) = num_classes {
            if let Some(bad) = examples
                .iter()
                .find(|e| e.label < 0.0 || e.label.fract() != 0.0 || e.class() >= c)
            {
                return Err(Error::InvalidArgument(format!(
                    "label {} is not a class index below {c}",
                    bad.label
                )));
            }
        }
        Ok(Self {
            examples,
            feature_dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_set(&self) -> BTreeSet<usize> {
        self.examples.iter().map(Example::class).collect()
    }
}

/// A device's local shard.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceDataset {
    pub examples: Vec<Example>,
    pub class_set: BTreeSet<usize>,
}

impl DeviceDataset {
    pub fn new(examples: Vec<Example>, classification: bool) -> Self {
        let class_set = if classification {
            examples.iter().map(Example::class).collect()
        } else {
            BTreeSet::new()
        };
        Self {
            examples,
            class_set,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Label-skewed split: every device holds examples of at most
/// `classes_per_device` classes. Classes are handed out greedily by
/// remaining demand so each class is shared by (nearly) the same number of
/// devices, then each class's examples are dealt evenly to its holders.
/// Shards are disjoint and cover the dataset.
pub fn partition_heterogeneous<R: Rng + ?Sized>(
    dataset: &Dataset,
    devices: usize,
    classes_per_device: usize,
    rng: &mut R,
) -> Result<Vec<DeviceDataset>> {
    let classes = dataset
        .num_classes
        .ok_or_else(|| Error::Partition("dataset has no class labels".into()))?;
    if devices == 0 {
        return Err(Error::Partition("no devices".into()));
    }
    if classes_per_device == 0 || classes_per_device > classes {
        return Err(Error::Partition(format!(
            "{classes_per_device} classes per device with {classes} classes"
        )));
    }

    // Devices per class, as even as possible.
    let slots = devices * classes_per_device;
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(rng);
    let mut remaining = vec![slots / classes; classes];
    for &c in order.iter().take(slots % classes) {
        remaining[c] += 1;
    }

    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for device in 0..devices {
        // Highest remaining demand first, random tie-break.
        let mut candidates: Vec<usize> = (0..classes).collect();
        candidates.shuffle(rng);
        candidates.sort_by(|a, b| remaining[*b].cmp(&remaining[*a]));
        for &c in candidates.iter().take(classes_per_device) {
            if remaining[c] == 0 {
                return Err(Error::Partition("class slots exhausted".into()));
            }
            remaining[c] -= 1;
            holders[c].push(device);
        }
    }

    let mut by_class: Vec<Vec<&Example>> = vec![Vec::new(); classes];
    for e in &dataset.examples {
        by_class[e.class()].push(e);
    }
    let mut shards: Vec<Vec<Example>> = vec![Vec::new(); devices];
    for (c, mut members) in by_class.into_iter().enumerate() {
        let owners = &holders[c];
        if owners.is_empty() {
            if members.is_empty() {
                continue;
            }
            return Err(Error::Partition(format!("class {c} has no holder")));
        }
        if members.len() < owners.len() {
            return Err(Error::Partition(format!(
                "class {c} has {} examples for {} devices",
                members.len(),
                owners.len()
            )));
        }
        members.shuffle(rng);
        let base = members.len() / owners.len();
        let extra = members.len() % owners.len();
        let mut it = members.into_iter();
        for (i, &device) in owners.iter().enumerate() {
            let take = base + usize::from(i < extra);
            shards[device].extend(it.by_ref().take(take).cloned());
        }
    }
    if let Some(empty) = shards.iter().position(Vec::is_empty) {
        return Err(Error::Partition(format!("device {empty} received no data")));
    }
    Ok(shards
        .into_iter()
        .map(|s| DeviceDataset::new(s, true))
        .collect())
}

/// Uniformly shuffled split into near-equal shards.
pub fn partition_iid<R: Rng + ?Sized>(
    dataset: &Dataset,
    devices: usize,
    rng: &mut R,
) -> Result<Vec<DeviceDataset>> {
    if devices == 0 || dataset.len() < devices {
        return Err(Error::Partition(format!(
            "{} examples for {devices} devices",
            dataset.len()
        )));
    }
    let mut examples = dataset.examples.clone();
    examples.shuffle(rng);
    let base = examples.len() / devices;
    let extra = examples.len() % devices;
    let mut it = examples.into_iter();
    Ok((0..devices)
        .map(|i| {
            let shard: Vec<Example> = it.by_ref().take(base + usize::from(i < extra)).collect();
            DeviceDataset::new(shard, dataset.num_classes.is_some())
        })
        .collect())
}

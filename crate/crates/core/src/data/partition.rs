//! Pathological non-IID split: each client holds shards of exactly
//! `labels_per_client` distinct classes.
//!
//! Every class is cut into `n_clients · labels_per_client / classes` shards of
//! jittered size, shards are dealt out at random, and clashing labels inside a
//! client are repaired by swapping shards with another client.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Half-width of each of the two uniform terms; their sum bounds the
/// relative jitter of a shard at ±30% with a triangular profile.
const JITTER_HALF_WIDTH: f64 = 0.15;
const MAX_DEAL_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientPartition {
    pub client_id: usize,
    /// Indices into the training set, ascending.
    pub indices: Vec<usize>,
    /// Distinct labels held by the client, ascending.
    pub label_set: Vec<u8>,
}

impl ClientPartition {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

struct Shard {
    label: u8,
    indices: Vec<usize>,
}

/// Splits `total` into `parts` sizes proportional to jittered weights,
/// rounding with the largest-remainder rule so the sizes sum to `total`.
fn jittered_sizes(total: usize, parts: usize, rng: &mut RngStream) -> Vec<usize> {
    let weights: Vec<f64> = (0..parts)
        .map(|_| {
            1.0 + rng.uniform_range(-JITTER_HALF_WIDTH, JITTER_HALF_WIDTH)
                + rng.uniform_range(-JITTER_HALF_WIDTH, JITTER_HALF_WIDTH)
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..parts).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(total - assigned) {
        sizes[k] += 1;
    }
    sizes
}

fn has_distinct_labels(shards: &[Shard], slots: &[usize]) -> bool {
    let labels: BTreeSet<u8> = slots.iter().map(|&s| shards[s].label).collect();
    labels.len() == slots.len()
}

/// Deals shard ids to clients so no client repeats a label. `None` if the
/// repair step gets stuck.
fn deal(
    shards: &[Shard],
    n_clients: usize,
    per_client: usize,
    rng: &mut RngStream,
) -> Option<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..shards.len()).collect();
    rng.shuffle(&mut order);
    let mut clients: Vec<Vec<usize>> = order.chunks(per_client).map(<[usize]>::to_vec).collect();
    for c in 0..n_clients {
        let mut guard = 0;
        while !has_distinct_labels(shards, &clients[c]) {
            guard += 1;
            if guard > 10 * n_clients {
                return None;
            }
            // Slot holding a repeated label.
            let slot = (0..per_client)
                .find(|&s| {
                    clients[c][..s]
                        .iter()
                        .any(|&o| shards[o].label == shards[clients[c][s]].label)
                })
                .expect("duplicate exists");
            let other = rng.below(n_clients);
            let other_slot = rng.below(per_client);
            if other == c {
                continue;
            }
            let (a, b) = (clients[c][slot], clients[other][other_slot]);
            let fixes_c = clients[c]
                .iter()
                .enumerate()
                .all(|(s, &o)| s == slot || shards[o].label != shards[b].label);
            clients[other][other_slot] = a;
            if fixes_c && has_distinct_labels(shards, &clients[other]) {
                clients[c][slot] = b;
            } else {
                clients[other][other_slot] = b;
            }
        }
    }
    Some(clients)
}

/// Partitions example indices (by their `labels`) across `n_clients`.
pub fn pathological_partition(
    labels: &[u8],
    n_clients: usize,
    labels_per_client: usize,
    rng: &mut RngStream,
) -> Result<Vec<ClientPartition>> {
    let classes: BTreeSet<u8> = labels.iter().copied().collect();
    let n_classes = classes.len();
    let n_shards = n_clients * labels_per_client;
    if n_clients == 0 || labels_per_client == 0 || n_classes == 0 {
        return Err(Error::config(
            "partition needs clients, labels per client and data",
        ));
    }
    if labels_per_client > n_classes || !n_shards.is_multiple_of(n_classes) {
        return Err(Error::config(format!(
            "{n_clients} clients x {labels_per_client} labels cannot be split evenly over {n_classes} classes"
        )));
    }
    let shards_per_label = n_shards / n_classes;

    let mut shards = Vec::with_capacity(n_shards);
    for &class in &classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < shards_per_label {
            return Err(Error::data(format!(
                "class {class} has {} examples for {shards_per_label} shards",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        let mut rest = idx.as_slice();
        for size in jittered_sizes(idx.len(), shards_per_label, rng) {
            let (head, tail) = rest.split_at(size);
            shards.push(Shard {
                label: class,
                indices: head.to_vec(),
            });
            rest = tail;
        }
    }

    let dealt = (0..MAX_DEAL_ATTEMPTS)
        .find_map(|_| deal(&shards, n_clients, labels_per_client, rng))
        .ok_or_else(|| Error::internal("could not deal shards with distinct labels per client"))?;

    Ok(dealt
        .into_iter()
        .enumerate()
        .map(|(client_id, slots)| {
            let mut indices: Vec<usize> = slots
                .iter()
                .flat_map(|&s| shards[s].indices.iter().copied())
                .collect();
            indices.sort_unstable();
            let mut label_set: Vec<u8> = slots.iter().map(|&s| shards[s].label).collect();
            label_set.sort_unstable();
            ClientPartition {
                client_id,
                indices,
                label_set,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCount {
    pub client_id: usize,
    pub label: u8,
    pub count: usize,
}

/// Per-client label histogram (one row per client and label present).
pub fn partition_report(partitions: &[ClientPartition], labels: &[u8]) -> Vec<LabelCount> {
    let mut rows = Vec::new();
    for p in partitions {
        let mut counts = [0usize; 256];
        for &i in &p.indices {
            counts[labels[i] as usize] += 1;
        }
        for (label, &count) in counts.iter().enumerate() {
            if count > 0 {
                rows.push(LabelCount {
                    client_id: p.client_id,
                    label: label as u8,
                    count,
                });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub n_clients: usize,
    pub total: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

pub fn summarize_partitions(partitions: &[ClientPartition]) -> PartitionSummary {
    let sizes: Vec<usize> = partitions.iter().map(ClientPartition::len).collect();
    let total: usize = sizes.iter().sum();
    PartitionSummary {
        n_clients: sizes.len(),
        total,
        min: sizes.iter().copied().min().unwrap_or(0),
        max: sizes.iter().copied().max().unwrap_or(0),
        mean: total as f64 / sizes.len().max(1) as f64,
    }
}

pub fn write_partition_csv(rows: &[LabelCount], path: &Path) -> Result<()> {
    let mut out = String::from("client_id,label,count\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.client_id, r.label, r.count));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    n_clients: usize,
    clients: Vec<ClientPartition>,
}

/// Exact index map, for replaying a partition without the RNG.
pub fn write_partitions_json(partitions: &[ClientPartition], path: &Path) -> Result<()> {
    let file = PartitionFile {
        n_clients: partitions.len(),
        clients: partitions.to_vec(),
    };
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(&mut f, &file).map_err(|e| Error::data(e.to_string()))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn read_partitions_json(path: &Path) -> Result<Vec<ClientPartition>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: PartitionFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if file.clients.len() != file.n_clients {
        return Err(Error::data("partition file client count mismatch"));
    }
    Ok(file.clients)
}

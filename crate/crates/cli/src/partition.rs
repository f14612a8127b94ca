//! `fedkan partition`: build the client partition without training.

use std::path::Path;

use fedkan_core::data::{
    parse_idx_labels, partition_report, pathological_partition, summarize_partitions,
    write_partition_csv, write_partitions_json, ClientPartition, MNIST_FILES,
};
use fedkan_core::{Error, RngStream};

use crate::config::ExperimentConfig;
use crate::{CliError, CliResult};

fn check_invariants(
    parts: &[ClientPartition],
    n: usize,
    labels_per_client: usize,
) -> CliResult<()> {
    let mut seen = vec![false; n];
    for p in parts {
        if p.label_set.len() != labels_per_client {
            return Err(Error::internal(format!(
                "client {} holds {} labels",
                p.client_id,
                p.label_set.len()
            ))
            .into());
        }
        for &i in &p.indices {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::internal(format!("example {i} assigned twice")).into());
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::internal(format!("example {i} unassigned")).into());
    }
    Ok(())
}

pub fn cmd_partition(cfg: &ExperimentConfig, out: &Path, seeds: u64) -> CliResult<()> {
    let path = cfg.paths.data_dir.join(MNIST_FILES[0].1);
    let bytes = std::fs::read(&path).map_err(|e| {
        CliError::data(format!(
            "cannot read {}: {e} (run `fedkan fetch-data` first)",
            path.display()
        ))
    })?;
    let labels =
        parse_idx_labels(&bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let n_clients = cfg.federation.n_clients;
    let lpc = cfg.partition.labels_per_client;
    let mut sizes_csv = String::from("master_seed,n_clients,total,min,max,mean\n");
    for offset in 0..seeds.max(1) {
        let mut c = cfg.clone();
        c.experiment.master_seed = cfg.experiment.master_seed.wrapping_add(offset);
        let parts = pathological_partition(
            &labels,
            n_clients,
            lpc,
            &mut RngStream::new(c.partition_seed()),
        )?;
        check_invariants(&parts, labels.len(), lpc)?;
        let s = summarize_partitions(&parts);
        sizes_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.experiment.master_seed, s.n_clients, s.total, s.min, s.max, s.mean
        ));
        println!(
            "seed {}: {} clients, {} examples, sizes min {} max {} mean {:.1}; coverage and disjointness ok, {} labels per client",
            c.experiment.master_seed, s.n_clients, s.total, s.min, s.max, s.mean, lpc
        );
        if offset == 0 {
            write_partition_csv(
                &partition_report(&parts, &labels),
                &out.join("partition.csv"),
            )?;
            write_partitions_json(&parts, &out.join("partition.json"))?;
        }
    }
    let sizes = out.join("sizes.csv");
    std::fs::write(&sizes, sizes_csv).map_err(|e| Error::io(&sizes, e))?;
    println!("wrote {}", out.display());
    Ok(())
}

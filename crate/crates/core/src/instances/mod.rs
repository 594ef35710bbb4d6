//! Instance data model for carbon-aware flexible job-shop problems.
//!
//! An [`Instance`] is a list of jobs, each a precedence chain of
//! [`OperationSpec`]s, plus one [`MachineProfile`] per machine. Every
//! operation can run on any machine in its alternative set, with a
//! machine-dependent processing time; each machine emits at a fixed rate per
//! unit of processing time.

mod format;
mod generate;

use std::fmt;

pub use format::{
    parse_emission_sidecar, parse_fjsp, read_instance, read_manifest, serialize_emission_sidecar,
    serialize_fjsp, write_instance, write_manifest,
};
pub use generate::{attach_emissions, generate_instance, split_dataset, EmissionSource, GenConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineProfile {
    pub id: usize,
    pub emission_rate: f64,
}

/// One operation of a job with its eligible machines.
///
/// `alternatives` is kept sorted by ascending machine id.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationSpec {
    pub job: usize,
    pub index: usize,
    pub alternatives: Vec<(usize, f64)>,
}

impl OperationSpec {
    pub fn new(job: usize, index: usize, mut alternatives: Vec<(usize, f64)>) -> Self {
        alternatives.sort_by_key(|&(m, _)| m);
        OperationSpec {
            job,
            index,
            alternatives,
        }
    }

    /// Processing time on `machine`, if eligible.
    pub fn time_on(&self, machine: usize) -> Option<f64> {
        self.alternatives
            .binary_search_by_key(&machine, |&(m, _)| m)
            .ok()
            .map(|i| self.alternatives[i].1)
    }

    pub fn min_time(&self) -> f64 {
        self.alternatives
            .iter()
            .map(|&(_, p)| p)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_time(&self) -> f64 {
        self.alternatives
            .iter()
            .map(|&(_, p)| p)
            .fold(0.0, f64::max)
    }

    pub fn mean_time(&self) -> f64 {
        let sum: f64 = self.alternatives.iter().map(|&(_, p)| p).sum();
        sum / self.alternatives.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic { seed: u64, config: GenConfig },
    Parsed { path: String },
    Manual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub jobs: Vec<Vec<OperationSpec>>,
    pub machines: Vec<MachineProfile>,
    pub provenance: Provenance,
}

impl Instance {
    /// Builds and validates an instance from per-job operation lists of
    /// `(machine, time)` alternatives.
    pub fn new(
        name: impl Into<String>,
        jobs: Vec<Vec<Vec<(usize, f64)>>>,
        emission_rates: Vec<f64>,
    ) -> Result<Self> {
        let jobs = jobs
            .into_iter()
            .enumerate()
            .map(|(j, ops)| {
                ops.into_iter()
                    .enumerate()
                    .map(|(k, alts)| OperationSpec::new(j, k, alts))
                    .collect()
            })
            .collect();
        let machines = emission_rates
            .into_iter()
            .enumerate()
            .map(|(id, emission_rate)| MachineProfile { id, emission_rate })
            .collect();
        let inst = Instance {
            name: name.into(),
            jobs,
            machines,
            provenance: Provenance::Manual,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs.is_empty() {
            return Err(Error::Config("instance has no jobs".into()));
        }
        if self.machines.is_empty() {
            return Err(Error::Config("instance has no machines".into()));
        }
        for (id, m) in self.machines.iter().enumerate() {
            if m.id != id {
                return Err(Error::Config(format!("machine {id} carries id {}", m.id)));
            }
            if !(m.emission_rate > 0.0 && m.emission_rate.is_finite()) {
                return Err(Error::Config(format!(
                    "machine {id} has non-positive emission rate {}",
                    m.emission_rate
                )));
            }
        }
        for (j, ops) in self.jobs.iter().enumerate() {
            if ops.is_empty() {
                return Err(Error::Config(format!("job {j} has no operations")));
            }
            for (k, op) in ops.iter().enumerate() {
                if op.job != j || op.index != k {
                    return Err(Error::Config(format!("operation ({j},{k}) is mislabeled")));
                }
                if op.alternatives.is_empty() {
                    return Err(Error::Config(format!("operation ({j},{k}) has no machines")));
                }
                for w in op.alternatives.windows(2) {
                    if w[0].0 >= w[1].0 {
                        return Err(Error::Config(format!(
                            "operation ({j},{k}) lists machines out of order or twice"
                        )));
                    }
                }
                for &(m, p) in &op.alternatives {
                    if m >= self.machines.len() {
                        return Err(Error::Config(format!(
                            "operation ({j},{k}) references unknown machine {m}"
                        )));
                    }
                    if !(p > 0.0 && p.is_finite()) {
                        return Err(Error::Config(format!(
                            "operation ({j},{k}) has non-positive time {p} on machine {m}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn n_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn total_ops(&self) -> usize {
        self.jobs.iter().map(Vec::len).sum()
    }

    pub fn op(&self, job: usize, index: usize) -> &OperationSpec {
        &self.jobs[job][index]
    }

    pub fn operations(&self) -> impl Iterator<Item = &OperationSpec> {
        self.jobs.iter().flatten()
    }

    pub fn emission_rate(&self, machine: usize) -> f64 {
        self.machines[machine].emission_rate
    }

    pub fn emission_rates(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.emission_rate).collect()
    }

    /// Flat index of operation `(job, index)` in (job, op) order.
    pub fn op_offset(&self, job: usize) -> usize {
        self.jobs[..job].iter().map(Vec::len).sum()
    }

    pub fn max_time(&self) -> f64 {
        self.operations().map(OperationSpec::max_time).fold(0.0, f64::max)
    }

    pub fn max_emission_rate(&self) -> f64 {
        self.machines
            .iter()
            .map(|m| m.emission_rate)
            .fold(0.0, f64::max)
    }

    pub fn max_ops_per_job(&self) -> usize {
        self.jobs.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Upper bound on any makespan reachable by appending operations: the sum
    /// of every operation's slowest alternative.
    pub fn horizon(&self) -> f64 {
        self.operations().map(OperationSpec::max_time).sum()
    }

    /// Minimum emission of operation `op` over its alternatives.
    pub fn min_emission(&self, op: &OperationSpec) -> f64 {
        op.alternatives
            .iter()
            .map(|&(m, p)| p * self.emission_rate(m))
            .fold(f64::INFINITY, f64::min)
    }

    /// Same jobs and processing times with different machine rates.
    pub fn with_emission_rates(&self, rates: &[f64]) -> Result<Instance> {
        if rates.len() != self.machines.len() {
            return Err(Error::Config(format!(
                "expected {} emission rates, got {}",
                self.machines.len(),
                rates.len()
            )));
        }
        let mut out = self.clone();
        for (m, &r) in out.machines.iter_mut().zip(rates) {
            m.emission_rate = r;
        }
        out.validate()?;
        Ok(out)
    }

    /// Structural equality: jobs, alternatives and machine count, ignoring
    /// name, provenance and emission rates.
    pub fn same_structure(&self, other: &Instance) -> bool {
        self.jobs == other.jobs && self.machines.len() == other.machines.len()
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}x{}, {} ops)",
            self.name,
            self.n_jobs(),
            self.n_machines(),
            self.total_ops()
        )
    }
}

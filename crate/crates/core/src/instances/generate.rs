use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Instance, MachineProfile, OperationSpec, Provenance};
use crate::error::{Error, Result};

/// Parameters of the synthetic instance generator.
///
/// The defaults (4-6 operations per job, times in [1, 20], 35% flexibility)
/// are a calibration choice that puts mean 10x5 makespans of the dispatching
/// rules around 115-130; the original distribution was never published.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_jobs: usize,
    pub n_machines: usize,
    pub ops_per_job: (usize, usize),
    pub proc_time: (f64, f64),
    pub flexibility: f64,
    pub e_min: f64,
    pub e_max: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_jobs: 10,
            n_machines: 5,
            ops_per_job: (4, 6),
            proc_time: (1.0, 20.0),
            flexibility: 0.35,
            e_min: 1.0,
            e_max: 2.0,
        }
    }
}

impl GenConfig {
    pub fn new(
        n_jobs: usize,
        n_machines: usize,
        ops_per_job: (usize, usize),
        proc_time: (f64, f64),
        flexibility: f64,
        e_min: f64,
        e_max: f64,
    ) -> Self {
        GenConfig {
            n_jobs,
            n_machines,
            ops_per_job,
            proc_time,
            flexibility,
            e_min,
            e_max,
        }
    }

    /// `n x m` with the remaining fields at their defaults.
    pub fn sized(n_jobs: usize, n_machines: usize) -> Self {
        GenConfig {
            n_jobs,
            n_machines,
            ..GenConfig::default()
        }
    }

    pub fn with_flexibility(mut self, flexibility: f64) -> Self {
        self.flexibility = flexibility;
        self
    }

    pub fn with_emission_range(mut self, e_min: f64, e_max: f64) -> Self {
        self.e_min = e_min;
        self.e_max = e_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_jobs == 0 || self.n_machines == 0 {
            return bad("need at least one job and one machine");
        }
        if self.ops_per_job.0 == 0 || self.ops_per_job.0 > self.ops_per_job.1 {
            return bad("ops_per_job must satisfy 1 <= lo <= hi");
        }
        let (lo, hi) = self.proc_time;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad("proc_time must satisfy 0 < lo <= hi");
        }
        if round_tenth(lo) <= 0.0 {
            return bad("proc_time lower bound rounds to zero");
        }
        if !(self.flexibility > 0.0 && self.flexibility <= 1.0) {
            return bad("flexibility must lie in (0, 1]");
        }
        if !(self.e_min > 0.0 && self.e_min <= self.e_max && self.e_max.is_finite()) {
            return bad("emission rates must satisfy 0 < e_min <= e_max");
        }
        Ok(())
    }
}

pub(crate) fn round_tenth(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn sample_tenth(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let x = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    round_tenth(x).clamp(lo, hi)
}

fn sample_rates(rng: &mut impl Rng, m: usize, e_min: f64, e_max: f64) -> Vec<f64> {
    (0..m).map(|_| sample_tenth(rng, e_min, e_max)).collect()
}

/// Draws a synthetic instance; a pure function of `(seed, cfg)`.
pub fn generate_instance(seed: u64, cfg: &GenConfig) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.n_machines;
    let jobs = (0..cfg.n_jobs)
        .map(|j| {
            let k = rng.gen_range(cfg.ops_per_job.0..=cfg.ops_per_job.1);
            (0..k)
                .map(|idx| {
                    let mut eligible: Vec<usize> =
                        (0..m).filter(|_| rng.gen_bool(cfg.flexibility)).collect();
                    if eligible.is_empty() {
                        eligible.push(rng.gen_range(0..m));
                    }
                    let alts = eligible
                        .into_iter()
                        .map(|mach| (mach, sample_tenth(&mut rng, cfg.proc_time.0, cfg.proc_time.1)))
                        .collect();
                    OperationSpec::new(j, idx, alts)
                })
                .collect()
        })
        .collect();
    let machines = sample_rates(&mut rng, m, cfg.e_min, cfg.e_max)
        .into_iter()
        .enumerate()
        .map(|(id, emission_rate)| MachineProfile { id, emission_rate })
        .collect();
    let inst = Instance {
        name: format!("syn-{}x{}-{seed}", cfg.n_jobs, cfg.n_machines),
        jobs,
        machines,
        provenance: Provenance::Synthetic {
            seed,
            config: cfg.clone(),
        },
    };
    inst.validate()?;
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmissionSource {
    Explicit(Vec<f64>),
    Sampled { seed: u64, e_min: f64, e_max: f64 },
}

/// Returns a copy of `inst` with emission rates taken from `source`.
pub fn attach_emissions(inst: &Instance, source: &EmissionSource) -> Result<Instance> {
    match source {
        EmissionSource::Explicit(rates) => inst.with_emission_rates(rates),
        &EmissionSource::Sampled { seed, e_min, e_max } => {
            if !(e_min > 0.0 && e_min <= e_max && e_max.is_finite()) {
                return Err(Error::Config(
                    "emission rates must satisfy 0 < e_min <= e_max".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rates = sample_rates(&mut rng, inst.n_machines(), e_min, e_max);
            inst.with_emission_rates(&rates)
        }
    }
}

/// Deterministically shuffles and partitions `instances` into
/// train/validation/test lists.
pub fn split_dataset<T>(
    instances: Vec<T>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions ({a}, {b}, {c}) must be non-negative and sum to 1"
        )));
    }
    let n = instances.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((a * n as f64).round() as usize).min(n);
    let n_val = ((b * n as f64).round() as usize).min(n - n_train);

    let mut slots: Vec<Option<T>> = instances.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> {
        idx.iter().map(|&i| slots[i].take().expect("index used once")).collect()
    };
    let train = take(&order[..n_train]);
    let val = take(&order[n_train..n_train + n_val]);
    let test = take(&order[n_train + n_val..]);
    Ok((train, val, test))
}

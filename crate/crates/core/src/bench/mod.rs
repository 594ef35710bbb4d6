//! Experiment harness behind the `luca` binary.
//!
//! Each command reads a [`RunConfig`], writes into a staging directory and
//! promotes it to `out` only on success. Every output directory holds the
//! effective configuration (`config.txt`) and a `meta.txt` with the creation
//! time; all other files are a pure function of configuration and seed.
//!
//! CSV schemas:
//!
//! * `per_instance.csv`: `method,run,instance,path,makespan,emission`
//! * `table.csv`: `method,mean_makespan,std_makespan,mean_emission,std_emission,approx_oracle`
//! * `improvements.csv`: `method,baseline,makespan_improvement_pct,emission_improvement_pct`,
//!   computed as `(baseline - method) / baseline`
//! * `pareto.csv`: `lambda,mean_makespan,mean_emission`
//! * `oracle.csv`: `instance,lambda,value,makespan,emission,proven_optimal,nodes`
//! * `schedules/**.csv`: `job,op,machine,start,end,emission`
//! * `run_XX/run_log.csv`: see [`crate::trainer::RUN_LOG_HEADER`]

mod commands;
mod config;
mod output;

pub use commands::{
    evaluate_methods, methods_from_config, parse_samples_csv, run, samples_csv, Command, Dataset, EvalResult, Method,
    Sample, SAMPLE_HEADER,
};
pub use config::{parse_ratio, RunConfig, DEFAULTS, ENCODER_URL_ENV};
pub use output::{
    improvement, improvements_csv, mean_std, parse_table_csv, pareto_svg, table_csv, table_markdown, OutputDir,
    ResultRow, IMPROVEMENT_HEADER, TABLE_HEADER,
};

/// Independent seed for item `index` of stream `stream`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

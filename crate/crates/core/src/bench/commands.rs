use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::{parse_ratio, RunConfig};
use super::output::{
    improvements_csv, pareto_svg, table_csv, table_markdown, OutputDir, ResultRow, TABLE_HEADER,
};
use super::derive_seed;
use crate::encoders::TextEncoder;
use crate::env::{gantt_svg, parse_schedule_csv, schedule_csv, ScheduleEntry};
use crate::error::{Error, Result};
use crate::heuristics::{rollout_heuristic, Rule};
use crate::instances::{
    attach_emissions, generate_instance, read_instance, read_manifest, split_dataset,
    write_instance, write_manifest, EmissionSource, Instance,
};
use crate::oracle::{solve_exact, verify_schedule, Objective, SearchLimits};
use crate::trainer::{load_policy, rollout, run_log_csv, train, Mode, PolicyParams, RolloutContext, Selection, TrainHooks};

/// The experiment commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Train,
    Eval,
    SweepLambda,
    SweepRatio,
    Oracle,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Generate,
        Command::Train,
        Command::Eval,
        Command::SweepLambda,
        Command::SweepRatio,
        Command::Oracle,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::SweepLambda => "sweep-lambda",
            Command::SweepRatio => "sweep-ratio",
            Command::Oracle => "oracle",
            Command::Report => "report",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// Runs `cmd` and returns the output directory it committed.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<PathBuf> {
    let out = OutputDir::create(&cfg.path("out"))?;
    out.write("config.txt", cfg.to_text())?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    out.write(
        "meta.txt",
        format!("command={}\ncreated_unix={stamp}\nversion={}\n", cmd.name(), env!("CARGO_PKG_VERSION")),
    )?;
    match cmd {
        Command::Generate => cmd_generate(cfg, &out)?,
        Command::Train => cmd_train(cfg, &out)?,
        Command::Eval => cmd_eval(cfg, &out)?,
        Command::SweepLambda => cmd_sweep_lambda(cfg, &out)?,
        Command::SweepRatio => cmd_sweep_ratio(cfg, &out)?,
        Command::Oracle => cmd_oracle(cfg, &out)?,
        Command::Report => cmd_report(cfg, &out)?,
    }
    out.commit()
}

/// Train/validation/test instances with their file paths.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<(PathBuf, Arc<Instance>)>,
    pub val: Vec<(PathBuf, Arc<Instance>)>,
    pub test: Vec<(PathBuf, Arc<Instance>)>,
}

fn load_list(paths: &[PathBuf]) -> Result<Vec<(PathBuf, Arc<Instance>)>> {
    paths.iter().map(|p| Ok((p.clone(), Arc::new(read_instance(p)?)))).collect()
}

fn instances(list: &[(PathBuf, Arc<Instance>)]) -> Vec<Arc<Instance>> {
    list.iter().map(|(_, i)| i.clone()).collect()
}

impl Dataset {
    /// Reads `train.txt`, `val.txt` and `test.txt` under `dir`; a missing
    /// manifest yields an empty split.
    pub fn load(dir: &Path) -> Result<Self> {
        let split = |name: &str| -> Result<Vec<(PathBuf, Arc<Instance>)>> {
            let m = dir.join(name);
            if m.exists() {
                load_list(&read_manifest(&m)?)
            } else {
                Ok(Vec::new())
            }
        };
        Ok(Dataset {
            train: split("train.txt")?,
            val: split("val.txt")?,
            test: split("test.txt")?,
        })
    }

    fn map(&self, f: impl Fn(usize, &Instance) -> Result<Instance>) -> Result<Dataset> {
        let mut idx = 0;
        let mut go = |list: &[(PathBuf, Arc<Instance>)]| -> Result<Vec<(PathBuf, Arc<Instance>)>> {
            list.iter()
                .map(|(p, i)| {
                    idx += 1;
                    Ok((p.clone(), Arc::new(f(idx - 1, i)?)))
                })
                .collect()
        };
        Ok(Dataset {
            train: go(&self.train)?,
            val: go(&self.val)?,
            test: go(&self.test)?,
        })
    }
}

/// Evaluation set: `files=` when given, else the dataset's test split.
fn eval_set(cfg: &RunConfig) -> Result<Vec<(PathBuf, Arc<Instance>)>> {
    let files = cfg.list("files");
    let set = if files.is_empty() {
        Dataset::load(&cfg.path("dataset"))?.test
    } else {
        load_list(&files.iter().map(PathBuf::from).collect::<Vec<_>>())?
    };
    if set.is_empty() {
        return Err(Error::Config(format!(
            "no evaluation instances: set files= or generate a dataset with a test split under {}",
            cfg.get("dataset")
        )));
    }
    Ok(set)
}

fn cmd_generate(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let g = cfg.gen_config()?;
    let seed = cfg.u64("seed")?;
    let mut rel = Vec::new();
    for i in 0..cfg.usize("count")? {
        let inst = generate_instance(derive_seed(seed, 0, i as u64), &g)?;
        let r = PathBuf::from(format!("instances/inst_{i:04}.fjs"));
        let p = out.path(&r);
        fs::create_dir_all(p.parent().unwrap()).map_err(|e| Error::io(&p, e))?;
        write_instance(&inst, &p)?;
        rel.push(r);
    }
    let (train, val, test) = split_dataset(rel, cfg.split()?, seed)?;
    write_manifest(&out.path("train.txt"), &train)?;
    write_manifest(&out.path("val.txt"), &val)?;
    write_manifest(&out.path("test.txt"), &test)?;
    Ok(())
}

/// Trains `runs` policies with seeds derived from `seed`, each into
/// `dir/run_XX`.
fn train_runs(cfg: &RunConfig, data: &Dataset, encoder: &dyn TextEncoder, dir: &Path) -> Result<Vec<PathBuf>> {
    let base = cfg.train_config()?;
    let train_set = instances(&data.train);
    let val_set = instances(&data.val);
    let mut finals = Vec::new();
    for r in 0..cfg.usize("runs")? {
        let run_dir = dir.join(format!("run_{r:02}"));
        let tc = crate::trainer::TrainConfig {
            seed: derive_seed(base.seed, 1, r as u64),
            checkpoint_dir: Some(run_dir.clone()),
            ..base.clone()
        };
        let outcome = train(&tc, &train_set, &val_set, encoder, &mut TrainHooks::default())?;
        let log = run_dir.join("run_log.csv");
        fs::write(&log, run_log_csv(&outcome.log)).map_err(|e| Error::io(&log, e))?;
        finals.push(outcome.checkpoints.last().cloned().expect("final checkpoint"));
    }
    Ok(finals)
}

fn cmd_train(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let data = Dataset::load(&cfg.path("dataset"))?;
    if data.train.is_empty() {
        return Err(Error::Config(format!("no training instances under {}", cfg.get("dataset"))));
    }
    let encoder = cfg.encoder_spec()?.build();
    train_runs(cfg, &data, encoder.as_ref(), out.root())?;
    Ok(())
}

/// A method under evaluation.
pub enum Method {
    Rule(Rule),
    Oracle,
    Policy { label: String, runs: Vec<(PolicyParams, Mode)> },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Rule(r) => r.name().to_string(),
            Method::Oracle => "oracle".into(),
            Method::Policy { label, .. } => label.clone(),
        }
    }
}

/// Checkpoint files for a `label=path` entry: a file, or every
/// `run_*/final.txt` under a directory.
fn checkpoint_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("run_")))
        .map(|p| p.join("final.txt"))
        .filter(|p| p.is_file())
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(Error::Checkpoint(format!("no checkpoints found at {}", path.display())));
    }
    Ok(runs)
}

fn policy_method(label: &str, files: &[PathBuf]) -> Result<Method> {
    let runs = files.iter().map(|f| load_policy(f)).collect::<Result<Vec<_>>>()?;
    Ok(Method::Policy {
        label: label.to_string(),
        runs,
    })
}

/// Methods named by `methods=` plus every `checkpoints=` entry.
pub fn methods_from_config(cfg: &RunConfig) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for m in cfg.list("methods") {
        out.push(match m.as_str() {
            "oracle" => Method::Oracle,
            "random" => Method::Rule(Rule::Random(cfg.u64("seed")?)),
            other => Method::Rule(other.parse()?),
        });
    }
    for entry in cfg.list("checkpoints") {
        let (label, path) = match entry.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(&entry);
                let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(entry.clone());
                (label, p)
            }
        };
        out.push(policy_method(&label, &checkpoint_files(&path)?)?);
    }
    Ok(out)
}

/// One evaluated `(method, run, instance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub method: String,
    pub run: usize,
    pub instance: String,
    pub path: PathBuf,
    pub makespan: f64,
    pub emission: f64,
}

pub const SAMPLE_HEADER: &str = "method,run,instance,path,makespan,emission";

pub fn samples_csv(samples: &[Sample]) -> String {
    let mut s = format!("{SAMPLE_HEADER}\n");
    for x in samples {
        writeln!(s, "{},{},{},{},{:?},{:?}", x.method, x.run, x.instance, x.path.display(), x.makespan, x.emission).unwrap();
    }
    s
}

pub fn parse_samples_csv(text: &str) -> Result<Vec<Sample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SAMPLE_HEADER => {}
        _ => return Err(Error::parse(1, "missing per-instance header")),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse(i + 1, "expected 6 fields"));
            }
            let err = |e: &dyn std::fmt::Display| Error::parse(i + 1, e.to_string());
            Ok(Sample {
                method: f[0].into(),
                run: f[1].parse().map_err(|e| err(&e))?,
                instance: f[2].into(),
                path: PathBuf::from(f[3]),
                makespan: f[4].parse().map_err(|e| err(&e))?,
                emission: f[5].parse().map_err(|e| err(&e))?,
            })
        })
        .collect()
}

/// Evaluation of several methods over one instance set.
pub struct EvalResult {
    pub rows: Vec<ResultRow>,
    pub samples: Vec<Sample>,
    /// First-run schedule of each `(method, instance)`.
    pub schedules: Vec<(String, String, String)>,
    pub policy_labels: Vec<String>,
}

/// Evaluates `methods` on `set`. Policies act greedily. When every instance
/// is within the oracle's size cap, each row also reports its mean ratio to
/// the optimal makespan.
pub fn evaluate_methods(
    cfg: &RunConfig,
    set: &[(PathBuf, Arc<Instance>)],
    methods: &[Method],
    encoder: &dyn TextEncoder,
) -> Result<EvalResult> {
    let lambda = cfg.f64("lambda")?;
    let limits = SearchLimits {
        max_ops: cfg.usize("oracle_max_ops")?,
        max_seconds: cfg.f64("oracle_seconds")?,
        ..Default::default()
    };
    let oracle_fits = set.iter().all(|(_, i)| i.total_ops() <= limits.max_ops);
    let mut optimal_ms: BTreeMap<String, f64> = BTreeMap::new();
    if oracle_fits {
        for (_, inst) in set {
            let s = solve_exact(inst, Objective::makespan(), &limits)?;
            if s.proven_optimal {
                optimal_ms.insert(inst.name.clone(), s.makespan);
            }
        }
    }
    let prompt = cfg.prompt_options()?;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut schedules = Vec::new();
    let mut policy_labels = Vec::new();
    for method in methods {
        let label = method.label();
        let mut ms = Vec::new();
        let mut em = Vec::new();
        let mut ratios = Vec::new();
        let mut push = |run: usize, path: &Path, inst: &Instance, m: f64, e: f64, sched: &[ScheduleEntry]| -> Result<()> {
            let violations = verify_schedule(inst, sched);
            if !violations.is_empty() {
                return Err(Error::IllegalAction(format!("{label} produced an invalid schedule on {}: {:?}", inst.name, violations[0])));
            }
            if run == 0 {
                schedules.push((label.clone(), inst.name.clone(), schedule_csv(inst, sched)));
            }
            if let Some(opt) = optimal_ms.get(&inst.name) {
                ratios.push(m / opt);
            }
            ms.push(m);
            em.push(e);
            samples.push(Sample {
                method: label.clone(),
                run,
                instance: inst.name.clone(),
                path: path.to_path_buf(),
                makespan: m,
                emission: e,
            });
            Ok(())
        };
        match method {
            Method::Rule(rule) => {
                for (path, inst) in set {
                    let r = rollout_heuristic(inst, *rule);
                    push(0, path, inst, r.makespan, r.emission, &r.schedule)?;
                }
            }
            Method::Oracle => {
                let obj = Objective::new(lambda)?;
                for (path, inst) in set {
                    let s = solve_exact(inst, obj, &limits)?;
                    push(0, path, inst, s.makespan, s.emission, &s.schedule)?;
                }
            }
            Method::Policy { runs, .. } => {
                policy_labels.push(label.clone());
                for (run, (params, mode)) in runs.iter().enumerate() {
                    let ctx = RolloutContext { encoder, mode: *mode, prompt };
                    for (path, inst) in set {
                        let ep = rollout(params, inst, &ctx, None, Selection::Greedy, false)?;
                        push(run, path, inst, ep.trajectory.makespan, ep.trajectory.emission, &ep.schedule)?;
                    }
                }
            }
        }
        let approx = (!ratios.is_empty() && ratios.len() == ms.len()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        rows.push(ResultRow::from_samples(&label, &ms, &em, approx));
    }
    Ok(EvalResult {
        rows,
        samples,
        schedules,
        policy_labels,
    })
}

fn write_eval(out: &OutputDir, prefix: &Path, res: &EvalResult) -> Result<()> {
    out.write(prefix.join("table.csv"), table_csv(&res.rows))?;
    out.write(prefix.join("table.md"), table_markdown(&res.rows))?;
    out.write(prefix.join("per_instance.csv"), samples_csv(&res.samples))?;
    out.write(prefix.join("improvements.csv"), improvements_csv(&res.rows, &res.policy_labels))?;
    for (method, inst, csv) in &res.schedules {
        out.write(prefix.join("schedules").join(method).join(format!("{inst}.csv")), csv)?;
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let set = eval_set(cfg)?;
    let methods = methods_from_config(cfg)?;
    if methods.is_empty() {
        return Err(Error::Config("nothing to evaluate: methods= and checkpoints= are both empty".into()));
    }
    let encoder = cfg.encoder_spec()?.build();
    let res = evaluate_methods(cfg, &set, &methods, encoder.as_ref())?;
    write_eval(out, Path::new(""), &res)
}

/// Trains at `cfg`'s settings into `dir` and evaluates the result together
/// with the configured methods.
fn train_and_eval(
    cfg: &RunConfig,
    data: &Dataset,
    encoder: &dyn TextEncoder,
    out: &OutputDir,
    prefix: &Path,
    label: &str,
) -> Result<EvalResult> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::Config("sweeps need non-empty train and test splits".into()));
    }
    let finals = train_runs(cfg, data, encoder, &out.path(prefix))?;
    let mut methods = methods_from_config(cfg)?;
    methods.push(policy_method(label, &finals)?);
    let res = evaluate_methods(cfg, &data.test, &methods, encoder)?;
    write_eval(out, prefix, &res)?;
    Ok(res)
}

fn cmd_sweep_lambda(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let data = Dataset::load(&cfg.path("dataset"))?;
    let encoder = cfg.encoder_spec()?.build();
    let mut pareto = String::from("lambda,mean_makespan,mean_emission\n");
    let mut points = Vec::new();
    let mut all = format!("lambda,{TABLE_HEADER}\n");
    for lambda in cfg.f64_list("lambdas")? {
        let c = cfg.clone().with("lambda", lambda)?;
        let prefix = PathBuf::from(format!("lambda_{lambda:.2}"));
        let res = train_and_eval(&c, &data, encoder.as_ref(), out, &prefix, c.mode()?.name())?;
        let row = res.rows.last().unwrap();
        writeln!(pareto, "{lambda:?},{:?},{:?}", row.mean_makespan, row.mean_emission).unwrap();
        points.push((format!("{lambda:.2}"), row.mean_makespan, row.mean_emission));
        for line in table_csv(&res.rows).lines().skip(1) {
            writeln!(all, "{lambda:?},{line}").unwrap();
        }
    }
    out.write("pareto.csv", pareto)?;
    out.write("pareto.svg", pareto_svg(&points))?;
    out.write("sweep.csv", all)?;
    Ok(())
}

fn cmd_sweep_ratio(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let data = Dataset::load(&cfg.path("dataset"))?;
    let encoder = cfg.encoder_spec()?.build();
    let seed = cfg.u64("seed")?;
    let c = cfg.clone().with("lambda", 0.5)?;
    let mut all = format!("ratio,{TABLE_HEADER}\n");
    for text in cfg.list("ratios") {
        let r = parse_ratio(&text).map_err(Error::Config)?;
        let tag = format!("1-{}", text.trim().trim_start_matches("1:"));
        let with_rates = data.map(|i, inst| {
            attach_emissions(
                inst,
                &EmissionSource::Sampled {
                    seed: derive_seed(seed, 2 + r.to_bits(), i as u64),
                    e_min: 1.0,
                    e_max: r,
                },
            )
        })?;
        let prefix = PathBuf::from(format!("ratio_{tag}"));
        let inst_dir = out.path(prefix.join("instances"));
        fs::create_dir_all(&inst_dir).map_err(|e| Error::io(&inst_dir, e))?;
        let mut with_rates = with_rates;
        for list in [&mut with_rates.train, &mut with_rates.val, &mut with_rates.test] {
            for (path, inst) in list.iter_mut() {
                let p = inst_dir.join(format!("{}.fjs", inst.name));
                write_instance(inst, &p)?;
                // paths recorded in per_instance.csv should survive promotion
                *path = out.final_path(prefix.join("instances").join(format!("{}.fjs", inst.name)));
            }
        }
        let res = train_and_eval(&c, &with_rates, encoder.as_ref(), out, &prefix, c.mode()?.name())?;
        for line in table_csv(&res.rows).lines().skip(1) {
            writeln!(all, "1:{},{line}", text.trim().trim_start_matches("1:")).unwrap();
        }
    }
    out.write("ratio_table.csv", all)?;
    Ok(())
}

fn cmd_oracle(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let set = eval_set(cfg)?;
    let obj = Objective::new(cfg.f64("lambda")?)?;
    let limits = SearchLimits {
        max_ops: cfg.usize("oracle_max_ops")?,
        max_seconds: cfg.f64("oracle_seconds")?,
        ..Default::default()
    };
    let mut csv = String::from("instance,lambda,value,makespan,emission,proven_optimal,nodes\n");
    for (_, inst) in &set {
        match solve_exact(inst, obj, &limits) {
            Ok(s) => {
                writeln!(
                    csv,
                    "{},{:?},{:?},{:?},{:?},{},{}",
                    inst.name,
                    obj.lambda(),
                    s.value,
                    s.makespan,
                    s.emission,
                    s.proven_optimal,
                    s.nodes
                )
                .unwrap();
                out.write(format!("schedules/{}.csv", inst.name), schedule_csv(inst, &s.schedule))?;
                out.write(format!("gantt/{}.svg", inst.name), gantt_svg(inst, &s.schedule))?;
            }
            Err(Error::Sizing { ops, cap }) => {
                eprintln!("skipping {}: {ops} operations exceeds the oracle cap {cap}", inst.name);
                writeln!(csv, "{},{:?},,,,skipped,0", inst.name, obj.lambda()).unwrap();
            }
            Err(e) => return Err(e),
        }
    }
    out.write("oracle.csv", csv)?;
    Ok(())
}

fn read_opt(path: &Path) -> Result<Option<String>> {
    if path.is_file() {
        fs::read_to_string(path).map(Some).map_err(|e| Error::io(path, e))
    } else {
        Ok(None)
    }
}

fn cmd_report(cfg: &RunConfig, out: &OutputDir) -> Result<()> {
    let input = cfg.path("input");
    if cfg.get("input").is_empty() || !input.is_dir() {
        return Err(Error::Config(format!("report needs input= pointing at an eval or sweep output, got {:?}", cfg.get("input"))));
    }
    let mut md = String::from("# Scheduling report\n\n");
    let mut found = false;
    if let Some(t) = read_opt(&input.join("table.md"))? {
        found = true;
        md.push_str("## Results\n\n");
        md.push_str(&t);
        md.push('\n');
    }
    if let Some(imp) = read_opt(&input.join("improvements.csv"))? {
        let rows: Vec<&str> = imp.lines().skip(1).collect();
        if !rows.is_empty() {
            md.push_str("## Improvements\n\nPositive values mean the first method is better.\n\n");
            md.push_str("| method | baseline | makespan % | emission % |\n|---|---|---:|---:|\n");
            for r in rows {
                let f: Vec<&str> = r.split(',').collect();
                writeln!(md, "| {} | {} | {} | {} |", f[0], f[1], f[2], f[3]).unwrap();
            }
            md.push('\n');
        }
    }
    if let Some(samples) = read_opt(&input.join("per_instance.csv"))? {
        let samples = parse_samples_csv(&samples)?;
        let policy = read_opt(&input.join("improvements.csv"))?
            .and_then(|t| t.lines().nth(1).map(|l| l.split(',').next().unwrap().to_string()));
        let method = policy.or_else(|| samples.first().map(|s| s.method.clone()));
        if let Some(method) = method {
            let mut mine: Vec<&Sample> = samples.iter().filter(|s| s.method == method && s.run == 0).collect();
            mine.sort_by(|a, b| a.makespan.total_cmp(&b.makespan).then(a.instance.cmp(&b.instance)));
            let picks = [("best", mine.first()), ("worst", mine.last())];
            let mut section = String::new();
            for (tag, s) in picks {
                let Some(s) = s else { continue };
                let sched_path = input.join("schedules").join(&method).join(format!("{}.csv", s.instance));
                let (Some(sched), true) = (read_opt(&sched_path)?, s.path.is_file()) else { continue };
                let inst = read_instance(&s.path)?;
                let entries = parse_schedule_csv(&sched)?;
                let name = format!("assets/gantt_{tag}.svg");
                out.write(&name, gantt_svg(&inst, &entries))?;
                writeln!(
                    section,
                    "{tag}: `{}` (makespan {:.2}, emission {:.2})\n\n![{tag} schedule]({name})\n",
                    s.instance, s.makespan, s.emission
                )
                .unwrap();
            }
            if !section.is_empty() {
                found = true;
                writeln!(md, "## Schedules of `{method}`\n\n{section}").unwrap();
            }
        }
    }
    if let Some(p) = read_opt(&input.join("pareto.csv"))? {
        let mut points = Vec::new();
        md.push_str("## Objective trade-off\n\n| lambda | mean makespan | mean emission |\n|---:|---:|---:|\n");
        for (i, l) in p.lines().enumerate().skip(1).filter(|(_, l)| !l.is_empty()) {
            let f: Vec<f64> = l
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|e| Error::parse(i + 1, e.to_string())))
                .collect::<Result<_>>()?;
            writeln!(md, "| {:.2} | {:.2} | {:.2} |", f[0], f[1], f[2]).unwrap();
            points.push((format!("{:.2}", f[0]), f[1], f[2]));
        }
        out.write("assets/pareto.svg", pareto_svg(&points))?;
        md.push_str("\n![pareto](assets/pareto.svg)\n\n");
        found = true;
    }
    if !found {
        return Err(Error::Config(format!("no results found in {}", input.display())));
    }
    if let Some(c) = read_opt(&input.join("config.txt"))? {
        md.push_str("## Configuration\n\n```text\n");
        md.push_str(&c);
        md.push_str("```\n");
    }
    out.write("report.md", md)?;
    Ok(())
}

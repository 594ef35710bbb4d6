//! Decision-step scheduling environment.
//!
//! Each step assigns the next pending operation of one job to one of its
//! eligible machines. The operation is appended at the earliest time both
//! the machine and the job are free, so an episode always takes exactly
//! `total_ops` steps.

mod gantt;

use std::fmt::Write as _;
use std::sync::Arc;

pub use gantt::{export_gantt, gantt_svg};

use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::instances::Instance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: f64,
    pub end: f64,
}

impl ScheduleEntry {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub delta_makespan_lb: f64,
    pub delta_emission: f64,
    pub done: bool,
}

/// A partial schedule over a shared, immutable instance.
#[derive(Debug, Clone)]
pub struct State {
    instance: Arc<Instance>,
    entries: Vec<ScheduleEntry>,
    next_op: Vec<usize>,
    job_ready: Vec<f64>,
    machine_free_at: Vec<f64>,
    emission: ExactSum,
    makespan: f64,
    step: usize,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.instance, &other.instance) && self.entries == other.entries
    }
}

impl State {
    /// Empty schedule with every machine free at time 0.
    pub fn reset(instance: Arc<Instance>) -> State {
        let n = instance.n_jobs();
        let m = instance.n_machines();
        State {
            entries: Vec::with_capacity(instance.total_ops()),
            next_op: vec![0; n],
            job_ready: vec![0.0; n],
            machine_free_at: vec![0.0; m],
            emission: ExactSum::new(),
            makespan: 0.0,
            step: 0,
            instance,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn instance_arc(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Index of job `j`'s next unscheduled operation, `None` once it is done.
    pub fn next_op(&self, job: usize) -> Option<usize> {
        let k = self.next_op[job];
        (k < self.instance.jobs[job].len()).then_some(k)
    }

    pub fn job_ready(&self, job: usize) -> f64 {
        self.job_ready[job]
    }

    pub fn machine_free_at(&self, machine: usize) -> f64 {
        self.machine_free_at[machine]
    }

    pub fn remaining_ops(&self, job: usize) -> usize {
        self.instance.jobs[job].len() - self.next_op[job]
    }

    /// Sum of min-alternative times over the job's unscheduled operations.
    pub fn remaining_work(&self, job: usize) -> f64 {
        self.instance.jobs[job][self.next_op[job]..]
            .iter()
            .map(|op| op.min_time())
            .sum()
    }

    pub fn decision_step(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step == self.instance.total_ops()
    }

    pub fn unfinished_jobs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.instance.n_jobs()).filter(move |&j| self.next_op(j).is_some())
    }

    /// Next operation of each unfinished job times its eligible machines,
    /// ordered by job then machine.
    pub fn legal_actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for job in self.unfinished_jobs() {
            let op = self.next_op[job];
            for &(machine, _) in &self.instance.jobs[job][op].alternatives {
                out.push(Action { job, op, machine });
            }
        }
        out
    }

    pub fn is_legal(&self, a: &Action) -> bool {
        a.job < self.instance.n_jobs()
            && self.next_op(a.job) == Some(a.op)
            && self.instance.jobs[a.job][a.op].time_on(a.machine).is_some()
    }

    /// Start time the action would get if applied now.
    pub fn earliest_start(&self, a: &Action) -> f64 {
        self.machine_free_at[a.machine].max(self.job_ready[a.job])
    }

    /// Completion time the action would get if applied now.
    pub fn earliest_finish(&self, a: &Action) -> f64 {
        let p = self.instance.jobs[a.job][a.op]
            .time_on(a.machine)
            .expect("machine eligible");
        self.earliest_start(a) + p
    }

    /// Applies `a` in place.
    pub fn apply(&mut self, a: &Action) -> Result<StepOutcome> {
        if !self.is_legal(a) {
            return Err(Error::IllegalAction(format!(
                "job {} op {} on machine {} at step {}",
                a.job, a.op, a.machine, self.step
            )));
        }
        let lb_before = self.lower_bound_makespan();
        let p = self.instance.jobs[a.job][a.op].time_on(a.machine).unwrap();
        let e = self.instance.emission_rate(a.machine);
        let start = self.earliest_start(a);
        let end = start + p;
        self.entries.push(ScheduleEntry {
            job: a.job,
            op: a.op,
            machine: a.machine,
            start,
            end,
        });
        self.machine_free_at[a.machine] = end;
        self.job_ready[a.job] = end;
        self.next_op[a.job] += 1;
        self.makespan = self.makespan.max(end);
        let delta_emission = p * e;
        self.emission.add(delta_emission);
        self.step += 1;
        Ok(StepOutcome {
            delta_makespan_lb: self.lower_bound_makespan() - lb_before,
            delta_emission,
            done: self.is_done(),
        })
    }

    /// Functional form of [`State::apply`].
    pub fn step(&self, a: &Action) -> Result<(State, StepOutcome)> {
        let mut next = self.clone();
        let out = next.apply(a)?;
        Ok((next, out))
    }

    /// Largest completion time so far; 0 for an empty schedule.
    pub fn makespan(&self) -> f64 {
        self.makespan
    }

    /// Total emission of the scheduled operations, independent of the order
    /// in which they were scheduled.
    pub fn total_emission(&self) -> f64 {
        self.emission.value()
    }

    /// Emission of the cheapest completion of every unscheduled operation,
    /// plus what is already committed. Exact and order independent.
    pub fn emission_lower_bound(&self) -> f64 {
        let mut acc = self.emission.clone();
        for job in self.unfinished_jobs() {
            for op in &self.instance.jobs[job][self.next_op[job]..] {
                acc.add(self.instance.min_emission(op));
            }
        }
        acc.value()
    }

    /// Admissible makespan estimate: the current makespan or, for each
    /// unfinished job, its ready time plus the min-alternative times of its
    /// remaining chain.
    pub fn lower_bound_makespan(&self) -> f64 {
        let mut lb = self.makespan;
        for job in self.unfinished_jobs() {
            let mut t = self.job_ready[job];
            for op in &self.instance.jobs[job][self.next_op[job]..] {
                t += op.min_time();
            }
            lb = lb.max(t);
        }
        lb
    }

    /// CSV dump with columns `job,op,machine,start,end,emission`.
    pub fn schedule_csv(&self) -> String {
        schedule_csv(&self.instance, &self.entries)
    }
}

pub fn schedule_csv(inst: &Instance, entries: &[ScheduleEntry]) -> String {
    let mut out = String::from("job,op,machine,start,end,emission\n");
    for e in entries {
        let p = inst.op(e.job, e.op).time_on(e.machine).unwrap_or(e.duration());
        writeln!(
            out,
            "{},{},{},{:?},{:?},{:?}",
            e.job,
            e.op,
            e.machine,
            e.start,
            e.end,
            p * inst.emission_rate(e.machine)
        )
        .unwrap();
    }
    out
}

/// Parses the CSV written by [`schedule_csv`].
pub fn parse_schedule_csv(text: &str) -> Result<Vec<ScheduleEntry>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "job,op,machine,start,end,emission" => {}
        _ => return Err(Error::parse(1, "missing schedule CSV header")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse(i + 1, "expected 6 columns"));
            }
            let int = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::parse(i + 1, format!("bad integer `{s}`")));
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{s}`")));
            Ok(ScheduleEntry {
                job: int(f[0])?,
                op: int(f[1])?,
                machine: int(f[2])?,
                start: num(f[3])?,
                end: num(f[4])?,
            })
        })
        .collect()
}

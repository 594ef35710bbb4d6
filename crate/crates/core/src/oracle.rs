//! Exact scalarized solver for small instances, and a schedule checker.
//!
//! The search branches over the same decision-step actions as
//! [`crate::env::State`], so every schedule it can return is one the
//! environment can produce. It minimizes `(1 - lambda) * makespan + lambda *
//! emission` by depth-first branch and bound, pruning any subtree whose bound
//! `(1 - lambda) * LB_makespan + lambda * LB_emission` cannot beat the
//! incumbent. Both bounds are computed with the same floating point
//! operations as the true objective (monotone roundings), so pruning never
//! discards a strictly better leaf.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::env::{Action, ScheduleEntry, State};
use crate::error::{Error, Result};
use crate::heuristics::{rollout_heuristic, Rule};
use crate::instances::Instance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    lambda: f64,
}

impl Objective {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Objective { lambda })
    }

    pub fn makespan() -> Self {
        Objective { lambda: 0.0 }
    }

    pub fn emission() -> Self {
        Objective { lambda: 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn value(&self, makespan: f64, emission: f64) -> f64 {
        (1.0 - self.lambda) * makespan + self.lambda * emission
    }

    /// Value of a complete schedule.
    pub fn of_state(&self, s: &State) -> f64 {
        self.value(s.makespan(), s.total_emission())
    }

    /// Lower bound over every completion of `s`.
    pub fn bound(&self, s: &State) -> f64 {
        self.value(s.lower_bound_makespan(), s.emission_lower_bound())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    pub max_nodes: u64,
    pub max_seconds: f64,
    pub max_ops: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_nodes: 50_000_000,
            max_seconds: 60.0,
            max_ops: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub value: f64,
    pub makespan: f64,
    pub emission: f64,
    pub schedule: Vec<ScheduleEntry>,
    pub proven_optimal: bool,
    pub nodes: u64,
}

struct Search {
    obj: Objective,
    best_value: f64,
    best: State,
    nodes: u64,
    max_nodes: u64,
    deadline: Instant,
    aborted: bool,
}

impl Search {
    fn dfs(&mut self, s: &State) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes >= self.max_nodes || (self.nodes % 4096 == 0 && Instant::now() >= self.deadline) {
            self.aborted = true;
            return;
        }
        if s.is_done() {
            let v = self.obj.of_state(s);
            if v < self.best_value {
                self.best_value = v;
                self.best = s.clone();
            }
            return;
        }
        let mut children: Vec<(f64, State)> = s
            .legal_actions()
            .iter()
            .map(|a| {
                let (next, _) = s.step(a).expect("legal");
                (self.obj.bound(&next), next)
            })
            .collect();
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (bound, child) in children {
            if bound >= self.best_value {
                break;
            }
            self.dfs(&child);
        }
    }
}

/// Minimizes the scalarized objective. Refuses instances with more than
/// `lim.max_ops` operations; `proven_optimal` is false if a limit stopped
/// the search early.
pub fn solve_exact(inst: &Arc<Instance>, obj: Objective, lim: &SearchLimits) -> Result<Solution> {
    let ops = inst.total_ops();
    if ops > lim.max_ops {
        return Err(Error::Sizing { ops, cap: lim.max_ops });
    }
    if lim.max_nodes == 0 || !(lim.max_seconds > 0.0) {
        return Err(Error::Config("search limits must be positive".into()));
    }

    // MWKR incumbent tightens pruning from the first node.
    let seed = rollout_heuristic(inst, Rule::Mwkr);
    let mut incumbent = State::reset(inst.clone());
    for e in &seed.schedule {
        incumbent
            .apply(&Action { job: e.job, op: e.op, machine: e.machine })
            .expect("heuristic schedule replays");
    }
    let mut search = Search {
        obj,
        best_value: obj.of_state(&incumbent),
        best: incumbent,
        nodes: 0,
        max_nodes: lim.max_nodes,
        deadline: Instant::now() + Duration::from_secs_f64(lim.max_seconds.min(1e9)),
        aborted: false,
    };
    search.dfs(&State::reset(inst.clone()));

    Ok(Solution {
        value: search.best_value,
        makespan: search.best.makespan(),
        emission: search.best.total_emission(),
        schedule: search.best.entries().to_vec(),
        proven_optimal: !search.aborted,
        nodes: search.nodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Missing { job: usize, op: usize },
    Duplicate { job: usize, op: usize },
    UnknownOperation { job: usize, op: usize },
    IneligibleMachine { job: usize, op: usize, machine: usize },
    WrongDuration { job: usize, op: usize, expected: f64, actual: f64 },
    NegativeStart { job: usize, op: usize },
    Precedence { job: usize, op: usize, start: f64, predecessor_end: f64 },
    Overlap { machine: usize, first: (usize, usize), second: (usize, usize) },
}

/// Checks completeness, eligibility, durations, precedence and machine
/// capacity. An empty list means the schedule is valid.
pub fn verify_schedule(inst: &Instance, entries: &[ScheduleEntry]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: Vec<Vec<Option<&ScheduleEntry>>> =
        inst.jobs.iter().map(|ops| vec![None; ops.len()]).collect();

    for e in entries {
        let Some(slot) = seen.get_mut(e.job).and_then(|ops| ops.get_mut(e.op)) else {
            out.push(Violation::UnknownOperation { job: e.job, op: e.op });
            continue;
        };
        if slot.is_some() {
            out.push(Violation::Duplicate { job: e.job, op: e.op });
            continue;
        }
        *slot = Some(e);
        match inst.op(e.job, e.op).time_on(e.machine) {
            None => out.push(Violation::IneligibleMachine { job: e.job, op: e.op, machine: e.machine }),
            Some(p) => {
                if e.end != e.start + p {
                    out.push(Violation::WrongDuration {
                        job: e.job,
                        op: e.op,
                        expected: p,
                        actual: e.end - e.start,
                    });
                }
            }
        }
        if e.start < 0.0 {
            out.push(Violation::NegativeStart { job: e.job, op: e.op });
        }
    }

    for (j, ops) in seen.iter().enumerate() {
        for (k, e) in ops.iter().enumerate() {
            match e {
                None => out.push(Violation::Missing { job: j, op: k }),
                Some(e) if k > 0 => {
                    if let Some(prev) = ops[k - 1] {
                        if e.start < prev.end {
                            out.push(Violation::Precedence {
                                job: j,
                                op: k,
                                start: e.start,
                                predecessor_end: prev.end,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_machine: Vec<Vec<&ScheduleEntry>> = vec![Vec::new(); inst.n_machines()];
    for e in entries {
        if let Some(v) = by_machine.get_mut(e.machine) {
            v.push(e);
        }
    }
    for (m, mut es) in by_machine.into_iter().enumerate() {
        es.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in es.windows(2) {
            if w[0].end > w[1].start {
                out.push(Violation::Overlap {
                    machine: m,
                    first: (w[0].job, w[0].op),
                    second: (w[1].job, w[1].op),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_sum::exact_sum;
    use crate::instances::{generate_instance, GenConfig};
    use proptest::prelude::*;

    fn exhaustive(s: &State, obj: Objective) -> f64 {
        if s.is_done() {
            return obj.of_state(s);
        }
        s.legal_actions()
            .iter()
            .map(|a| exhaustive(&s.step(a).unwrap().0, obj))
            .fold(f64::INFINITY, f64::min)
    }

    fn tiny(seed: u64) -> Arc<Instance> {
        let cfg = GenConfig::new(3, 2, (1, 2), (1.0, 10.0), 0.7, 1.0, 4.0);
        Arc::new(generate_instance(seed, &cfg).unwrap())
    }

    #[test]
    fn single_choice() {
        let i = Arc::new(Instance::new("o", vec![vec![vec![(0, 7.0), (1, 6.0)]]], vec![1.0, 1.0]).unwrap());
        let sol = solve_exact(&i, Objective::makespan(), &SearchLimits::default()).unwrap();
        assert_eq!(sol.value, 6.0);
        assert_eq!(sol.schedule[0].machine, 1);
        assert!(sol.proven_optimal);
    }

    #[test]
    fn forced_sum() {
        let i = Arc::new(Instance::new("o", vec![vec![vec![(0, 4.0)]], vec![vec![(0, 6.0)]]], vec![1.0]).unwrap());
        let sol = solve_exact(&i, Objective::makespan(), &SearchLimits::default()).unwrap();
        assert_eq!(sol.value, 10.0);
        assert!(verify_schedule(&i, &sol.schedule).is_empty());
    }

    #[test]
    fn refuses_large_instances() {
        let i = Arc::new(generate_instance(1, &GenConfig::default()).unwrap());
        assert!(matches!(
            solve_exact(&i, Objective::makespan(), &SearchLimits::default()),
            Err(Error::Sizing { .. })
        ));
        assert!(Objective::new(1.5).is_err());
    }

    #[test]
    fn node_limit_reports_unproven() {
        let cfg = GenConfig::new(4, 2, (3, 3), (1.0, 10.0), 1.0, 1.0, 2.0);
        let i = Arc::new(generate_instance(3, &cfg).unwrap());
        let lim = SearchLimits { max_nodes: 5, ..SearchLimits::default() };
        let sol = solve_exact(&i, Objective::makespan(), &lim).unwrap();
        assert!(!sol.proven_optimal);
        assert!(verify_schedule(&i, &sol.schedule).is_empty());
    }

    #[test]
    fn verify_reports_precedence_and_overlap() {
        let i = Arc::new(Instance::new("v", vec![vec![vec![(0, 2.0)], vec![(0, 3.0)]]], vec![1.0]).unwrap());
        let swapped = vec![
            ScheduleEntry { job: 0, op: 1, machine: 0, start: 0.0, end: 3.0 },
            ScheduleEntry { job: 0, op: 0, machine: 0, start: 3.0, end: 5.0 },
        ];
        let v = verify_schedule(&i, &swapped);
        assert!(v.iter().any(|x| matches!(x, Violation::Precedence { op: 1, .. })), "{v:?}");

        let overlap = vec![
            ScheduleEntry { job: 0, op: 0, machine: 0, start: 0.0, end: 2.0 },
            ScheduleEntry { job: 0, op: 1, machine: 0, start: 1.0, end: 4.0 },
        ];
        let v = verify_schedule(&i, &overlap);
        assert!(v.iter().any(|x| matches!(x, Violation::Overlap { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::Precedence { .. })));

        let v = verify_schedule(&i, &overlap[..1]);
        assert_eq!(v, vec![Violation::Missing { job: 0, op: 1 }]);
    }

    proptest! {
        #[test]
        fn pruned_equals_exhaustive(seed in 0u64..100_000, lam in prop::sample::select(vec![0.0, 0.3, 0.5, 1.0])) {
            let i = tiny(seed);
            prop_assume!(i.total_ops() <= 6);
            let obj = Objective::new(lam).unwrap();
            let sol = solve_exact(&i, obj, &SearchLimits::default()).unwrap();
            prop_assert!(sol.proven_optimal);
            prop_assert_eq!(sol.value, exhaustive(&State::reset(i.clone()), obj));
            prop_assert!(verify_schedule(&i, &sol.schedule).is_empty());
        }

        #[test]
        fn emission_optimum_is_closed_form(seed in 0u64..100_000) {
            let i = tiny(seed);
            let sol = solve_exact(&i, Objective::emission(), &SearchLimits::default()).unwrap();
            let closed = exact_sum(i.operations().map(|op| i.min_emission(op)));
            prop_assert_eq!(sol.value, closed);
        }

        #[test]
        fn heuristics_never_beat_optimum(seed in 0u64..100_000) {
            let i = tiny(seed);
            let ms = solve_exact(&i, Objective::makespan(), &SearchLimits::default()).unwrap();
            let em = solve_exact(&i, Objective::emission(), &SearchLimits::default()).unwrap();
            for rule in Rule::DETERMINISTIC {
                let r = rollout_heuristic(&i, rule);
                prop_assert!(r.makespan >= ms.value);
                prop_assert!(r.emission >= em.value);
                prop_assert!(verify_schedule(&i, &r.schedule).is_empty());
            }
        }
    }
}

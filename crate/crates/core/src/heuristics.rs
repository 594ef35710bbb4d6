//! Dispatching-rule baselines.
//!
//! Rules dispatch non-delay: only jobs whose pending operation can start at
//! the earliest start time available in the state compete. The rule picks
//! one of those jobs, then places its operation on the earliest-finishing
//! eligible machine. Ties go to the lowest job id, then the lowest machine
//! id.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, ScheduleEntry, State};
use crate::error::{Error, Result};
use crate::instances::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Job whose pending operation became ready earliest.
    Fifo,
    /// Pending operation with the shortest min-alternative time.
    Spt,
    /// Job with the most operations remaining.
    Mor,
    /// Job with the most work remaining (sum of min-alternative times).
    Mwkr,
    /// Uniform over legal actions.
    Random(u64),
}

impl Rule {
    pub const DETERMINISTIC: [Rule; 4] = [Rule::Fifo, Rule::Spt, Rule::Mor, Rule::Mwkr];

    pub fn name(&self) -> &'static str {
        match self {
            Rule::Fifo => "fifo",
            Rule::Spt => "spt",
            Rule::Mor => "mor",
            Rule::Mwkr => "mwkr",
            Rule::Random(_) => "random",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fifo" => Ok(Rule::Fifo),
            "spt" => Ok(Rule::Spt),
            "mor" => Ok(Rule::Mor),
            "mwkr" => Ok(Rule::Mwkr),
            "random" => Ok(Rule::Random(0)),
            _ => Err(Error::Config(format!(
                "unknown rule `{s}` (expected fifo|spt|mor|mwkr|random)"
            ))),
        }
    }
}

/// Jobs whose pending operation can start at the earliest start time
/// achievable by any legal action.
pub fn non_delay_jobs(state: &State) -> Vec<usize> {
    let inst = state.instance();
    let job_start = |j: usize| {
        let op = state.next_op(j).unwrap();
        inst.op(j, op)
            .alternatives
            .iter()
            .map(|&(m, _)| state.machine_free_at(m).max(state.job_ready(j)))
            .fold(f64::INFINITY, f64::min)
    };
    let starts: Vec<(usize, f64)> = state.unfinished_jobs().map(|j| (j, job_start(j))).collect();
    let t = starts.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
    starts.into_iter().filter(|&(_, s)| s == t).map(|(j, _)| j).collect()
}

/// Picks a job among the non-delay candidates by maximizing `key`, first
/// (lowest) job winning ties.
fn argmax_job(state: &State, key: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in non_delay_jobs(state) {
        let k = key(j);
        if best.map_or(true, |(_, b)| k > b) {
            best = Some((j, k));
        }
    }
    best.map(|(j, _)| j)
}

/// Earliest-finish machine for the next operation of `job`.
pub fn earliest_finish_action(state: &State, job: usize) -> Action {
    let op = state.next_op(job).expect("job unfinished");
    let mut best: Option<(Action, f64)> = None;
    for &(machine, _) in &state.instance().op(job, op).alternatives {
        let a = Action { job, op, machine };
        let finish = state.earliest_finish(&a);
        if best.map_or(true, |(_, f)| finish < f) {
            best = Some((a, finish));
        }
    }
    best.unwrap().0
}

/// Chooses the rule's action in `state`. `rng` is only used by
/// [`Rule::Random`].
pub fn dispatch_with(state: &State, rule: Rule, rng: &mut impl Rng) -> Result<Action> {
    if state.is_done() {
        return Err(Error::Terminal);
    }
    let inst = state.instance();
    let job = match rule {
        Rule::Fifo => argmax_job(state, |j| -state.job_ready(j)),
        Rule::Spt => argmax_job(state, |j| -inst.op(j, state.next_op(j).unwrap()).min_time()),
        Rule::Mor => argmax_job(state, |j| state.remaining_ops(j) as f64),
        Rule::Mwkr => argmax_job(state, |j| state.remaining_work(j)),
        Rule::Random(_) => {
            let acts = state.legal_actions();
            return Ok(acts[rng.gen_range(0..acts.len())]);
        }
    };
    Ok(earliest_finish_action(state, job.expect("non-terminal state has a job")))
}

/// Deterministic dispatch; `Random(seed)` draws one action from `seed`.
pub fn dispatch(state: &State, rule: Rule) -> Result<Action> {
    let seed = match rule {
        Rule::Random(s) => s,
        _ => 0,
    };
    dispatch_with(state, rule, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub makespan: f64,
    pub emission: f64,
    pub schedule: Vec<ScheduleEntry>,
}

impl RolloutResult {
    fn from_state(s: &State) -> Self {
        RolloutResult {
            makespan: s.makespan(),
            emission: s.total_emission(),
            schedule: s.entries().to_vec(),
        }
    }
}

/// Runs `rule` from the empty schedule to completion.
pub fn rollout_heuristic(inst: &Arc<Instance>, rule: Rule) -> RolloutResult {
    let seed = match rule {
        Rule::Random(s) => s,
        _ => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = State::reset(inst.clone());
    while !s.is_done() {
        let a = dispatch_with(&s, rule, &mut rng).expect("non-terminal");
        s.apply(&a).expect("dispatch yields legal actions");
    }
    RolloutResult::from_state(&s)
}

pub fn random_policy_rollout(inst: &Arc<Instance>, seed: u64) -> (f64, f64) {
    let r = rollout_heuristic(inst, Rule::Random(seed));
    (r.makespan, r.emission)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, GenConfig};
    use proptest::prelude::*;

    fn arc(jobs: Vec<Vec<Vec<(usize, f64)>>>, m: usize) -> Arc<Instance> {
        Arc::new(Instance::new("h", jobs, vec![1.0; m]).unwrap())
    }

    #[test]
    fn spt_picks_shortest() {
        let i = arc(vec![vec![vec![(0, 7.0)]], vec![vec![(0, 3.0), (1, 9.0)]]], 2);
        let a = dispatch(&State::reset(i), Rule::Spt).unwrap();
        assert_eq!((a.job, a.machine), (1, 0));
    }

    #[test]
    fn mor_picks_longest_chain() {
        let five = vec![vec![(0, 1.0)]; 5];
        let two = vec![vec![(0, 1.0)]; 2];
        let i = arc(vec![two, five], 1);
        assert_eq!(dispatch(&State::reset(i), Rule::Mor).unwrap().job, 1);
    }

    #[test]
    fn mwkr_picks_most_work() {
        let i = arc(
            vec![vec![vec![(0, 4.0)], vec![(0, 5.0)]], vec![vec![(0, 6.0), (1, 12.0)], vec![(1, 6.0)]]],
            2,
        );
        // Remaining work 9 vs 12.
        assert_eq!(dispatch(&State::reset(i), Rule::Mwkr).unwrap().job, 1);
    }

    #[test]
    fn fifo_picks_earliest_ready() {
        // Both pending ops may use machine 2 (free at 0); job 1 became
        // ready at 1 and job 0 at 5, so only job 1 can start earliest.
        let i = arc(
            vec![
                vec![vec![(0, 5.0)], vec![(0, 1.0), (2, 9.0)]],
                vec![vec![(1, 1.0)], vec![(1, 1.0), (2, 9.0)]],
            ],
            3,
        );
        let mut s = State::reset(i);
        s.apply(&Action { job: 0, op: 0, machine: 0 }).unwrap();
        s.apply(&Action { job: 1, op: 0, machine: 1 }).unwrap();
        assert_eq!(non_delay_jobs(&s), vec![1]);
        assert_eq!(dispatch(&s, Rule::Fifo).unwrap().job, 1);
    }

    #[test]
    fn non_delay_filter_excludes_late_jobs() {
        // Job 0 can only start at 4 (machine 0 busy); job 1 can start at 0 on
        // machine 1, so MWKR must pick job 1 despite job 0's larger workload.
        let i = arc(
            vec![vec![vec![(0, 4.0)], vec![(0, 20.0)]], vec![vec![(1, 1.0)]]],
            2,
        );
        let mut s = State::reset(i);
        s.apply(&Action { job: 0, op: 0, machine: 0 }).unwrap();
        assert_eq!(dispatch(&s, Rule::Mwkr).unwrap().job, 1);
    }

    #[test]
    fn earliest_finish_machine_and_ties() {
        let i = arc(vec![vec![vec![(0, 4.0), (1, 4.0), (2, 3.0)]], vec![vec![(0, 1.0)]]], 3);
        let mut s = State::reset(i);
        assert_eq!(dispatch(&s, Rule::Mor).unwrap(), Action { job: 0, op: 0, machine: 2 });
        s.apply(&Action { job: 1, op: 0, machine: 0 }).unwrap();
        let i2 = arc(vec![vec![vec![(0, 4.0), (1, 4.0)]]], 2);
        assert_eq!(dispatch(&State::reset(i2), Rule::Fifo).unwrap().machine, 0);
    }

    #[test]
    fn terminal_dispatch_errors() {
        let i = arc(vec![vec![vec![(0, 5.0)]]], 1);
        let mut s = State::reset(i.clone());
        s.apply(&Action { job: 0, op: 0, machine: 0 }).unwrap();
        assert!(matches!(dispatch(&s, Rule::Spt), Err(Error::Terminal)));
        for rule in [Rule::Fifo, Rule::Spt, Rule::Mor, Rule::Mwkr, Rule::Random(3)] {
            assert_eq!(rollout_heuristic(&i, rule).makespan, 5.0);
        }
        assert_eq!(random_policy_rollout(&i, 1).0, 5.0);
    }

    #[test]
    fn rule_names_parse() {
        for r in Rule::DETERMINISTIC {
            assert_eq!(r.name().parse::<Rule>().unwrap(), r);
        }
        assert!("lifo".parse::<Rule>().is_err());
    }

    proptest! {
        #[test]
        fn rollouts_are_deterministic_and_legal(seed in 0u64..2000) {
            let i = Arc::new(generate_instance(seed, &GenConfig::sized(5, 3)).unwrap());
            for rule in Rule::DETERMINISTIC {
                let a = rollout_heuristic(&i, rule);
                prop_assert_eq!(&a, &rollout_heuristic(&i, rule));
                prop_assert_eq!(a.schedule.len(), i.total_ops());
            }
            prop_assert_eq!(random_policy_rollout(&i, seed), random_policy_rollout(&i, seed));

            // SPT's choice minimizes min-alternative time among the
            // non-delay candidates.
            let mut s = State::reset(i.clone());
            while !s.is_done() {
                let a = dispatch(&s, Rule::Spt).unwrap();
                prop_assert!(s.is_legal(&a));
                let chosen = i.op(a.job, a.op).min_time();
                let cands = non_delay_jobs(&s);
                prop_assert!(cands.contains(&a.job));
                for j in cands {
                    prop_assert!(chosen <= i.op(j, s.next_op(j).unwrap()).min_time());
                }
                s.apply(&a).unwrap();
            }
        }
    }
}

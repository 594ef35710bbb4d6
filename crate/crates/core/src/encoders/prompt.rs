use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use super::impact::{HintFlags, ImpactStore};
use crate::env::State;
use crate::error::{Error, Result};

pub const MAKESPAN_HINT: &str = "Hint: High Makespan Impact";
pub const EMISSION_HINT: &str = "Hint: High Emission Impact";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PromptOptions {
    /// Append `; rates=<id>:<e>|...` listing the emission rate of every
    /// eligible machine. Off by default: rates are implied by machine ids.
    pub explicit_rates: bool,
}

/// State prompt: one fragment per unscheduled operation, in (job, op) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PromptRecord {
    /// `(flat op id, fragment)`.
    pub fragments: Vec<(usize, String)>,
}

impl PromptRecord {
    /// Fragments joined with `", "`; empty for a finished schedule.
    pub fn document(&self) -> String {
        let parts: Vec<&str> = self.fragments.iter().map(|(_, f)| f.as_str()).collect();
        parts.join(", ")
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }
}

/// Fields of a single fragment, as rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentFields {
    pub job: usize,
    pub op: usize,
    pub ops_left: usize,
    pub est_start: f64,
    pub duration: f64,
    pub machines: Vec<(usize, f64)>,
    pub rates: Option<Vec<(usize, f64)>>,
    pub hints: HintFlags,
}

impl FragmentFields {
    pub fn render(&self) -> String {
        let mut s = String::with_capacity(96);
        write!(
            s,
            "{{Job {}, Op {}, {} ops left; est_start={:.1}, dur={:.1}; machines=",
            self.job, self.op, self.ops_left, self.est_start, self.duration
        )
        .unwrap();
        push_pairs(&mut s, &self.machines);
        if let Some(rates) = &self.rates {
            s.push_str("; rates=");
            push_pairs(&mut s, rates);
        }
        if self.hints.makespan {
            s.push_str("; ");
            s.push_str(MAKESPAN_HINT);
        }
        if self.hints.emission {
            s.push_str("; ");
            s.push_str(EMISSION_HINT);
        }
        s.push('}');
        s
    }
}

fn push_pairs(s: &mut String, pairs: &[(usize, f64)]) {
    for (i, (id, v)) in pairs.iter().enumerate() {
        if i > 0 {
            s.push('|');
        }
        write!(s, "{id}:{v:.1}").unwrap();
    }
}

/// Builds the prompt for `state`.
///
/// `est_start` of a job's pending operation is its earliest feasible start
/// over eligible machines; later operations chain on the min-alternative
/// times of their predecessors. `dur` is the mean alternative time. Hints
/// come from `store` flags, keyed by flat op id.
pub fn build_state_prompt(state: &State, store: Option<&ImpactStore>, opts: PromptOptions) -> PromptRecord {
    let inst = state.instance();
    let mut fragments = Vec::new();
    for j in 0..inst.n_jobs() {
        let Some(next) = state.next_op(j) else { continue };
        let ops = &inst.jobs[j];
        let ready = state.job_ready(j);
        let first = &ops[next];
        let mut est = first
            .alternatives
            .iter()
            .map(|&(m, _)| state.machine_free_at(m).max(ready))
            .fold(f64::INFINITY, f64::min);
        for (k, op) in ops.iter().enumerate().skip(next) {
            let id = inst.op_offset(j) + k;
            let fields = FragmentFields {
                job: j,
                op: k,
                ops_left: ops.len() - k,
                est_start: est,
                duration: op.mean_time(),
                machines: op.alternatives.clone(),
                rates: opts
                    .explicit_rates
                    .then(|| op.alternatives.iter().map(|&(m, _)| (m, inst.emission_rate(m))).collect()),
                hints: store.map(|s| s.flags(id)).unwrap_or_default(),
            };
            fragments.push((id, fields.render()));
            est += op.min_time();
        }
    }
    PromptRecord { fragments }
}

fn fragment_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let num = r"[0-9]+\.[0-9]";
        let pairs = format!(r"[0-9]+:{num}(?:\|[0-9]+:{num})*");
        Regex::new(&format!(
            r"^\{{Job ([0-9]+), Op ([0-9]+), ([0-9]+) ops left; est_start=({num}), dur=({num}); machines=({pairs})(?:; rates=({pairs}))?(; {})?(; {})?\}}$",
            regex::escape(MAKESPAN_HINT),
            regex::escape(EMISSION_HINT)
        ))
        .unwrap()
    })
}

fn parse_pairs(s: &str) -> Vec<(usize, f64)> {
    s.split('|')
        .map(|p| {
            let (id, v) = p.split_once(':').unwrap();
            (id.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

/// Parses one fragment under the template grammar.
pub fn parse_fragment(text: &str) -> Result<FragmentFields> {
    let c = fragment_regex()
        .captures(text)
        .ok_or_else(|| Error::Encoder(format!("fragment does not match prompt grammar: {text}")))?;
    let int = |i: usize| c[i].parse::<usize>().unwrap();
    let real = |i: usize| c[i].parse::<f64>().unwrap();
    Ok(FragmentFields {
        job: int(1),
        op: int(2),
        ops_left: int(3),
        est_start: real(4),
        duration: real(5),
        machines: parse_pairs(&c[6]),
        rates: c.get(7).map(|m| parse_pairs(m.as_str())),
        hints: HintFlags {
            makespan: c.get(8).is_some(),
            emission: c.get(9).is_some(),
        },
    })
}

/// Splits a document on the `", "` separators between fragments and parses
/// each one.
pub fn parse_document(doc: &str) -> Result<Vec<FragmentFields>> {
    if doc.is_empty() {
        return Ok(Vec::new());
    }
    doc.split("}, {")
        .enumerate()
        .map(|(i, part)| {
            let mut s = String::with_capacity(part.len() + 2);
            if i > 0 {
                s.push('{');
            }
            s.push_str(part);
            if !part.ends_with('}') {
                s.push('}');
            }
            parse_fragment(&s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, GenConfig, Instance};
    use crate::encoders::impact::Threshold;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn example_instance() -> Arc<Instance> {
        let first = vec![(0, 7.0), (1, 6.0), (2, 9.0), (3, 9.0), (4, 6.0)];
        let rest = vec![(0, 3.0), (2, 4.0)];
        let job0 = vec![first, rest.clone(), rest.clone(), rest.clone(), rest];
        Arc::new(Instance::new("ex", vec![job0, vec![vec![(1, 2.0)]]], vec![1.0; 5]).unwrap())
    }

    #[test]
    fn example_fragment() {
        let s = State::reset(example_instance());
        let p = build_state_prompt(&s, None, PromptOptions::default());
        assert_eq!(p.fragments[0].0, 0);
        assert_eq!(
            p.fragments[0].1,
            "{Job 0, Op 0, 5 ops left; est_start=0.0, dur=7.4; machines=0:7.0|1:6.0|2:9.0|3:9.0|4:6.0}"
        );
        assert_eq!(p.fragments.len(), 6);
        assert!(p.document().starts_with("{Job 0, Op 0, 5 ops left;"));
        assert!(p.document().contains("}, {Job 0, Op 1, 4 ops left; est_start=6.0, dur=3.5"));
    }

    #[test]
    fn both_hints() {
        let s = State::reset(example_instance());
        let mut store = ImpactStore::new(Threshold::Fixed(1.0), Threshold::Fixed(1.0), 20);
        store.record_impact(0, 2.0, 2.0, 0);
        store.record_impact(1, 2.0, 0.5, 0);
        store.refresh_hints();
        let p = build_state_prompt(&s, Some(&store), PromptOptions::default());
        assert_eq!(
            p.fragments[0].1,
            "{Job 0, Op 0, 5 ops left; est_start=0.0, dur=7.4; machines=0:7.0|1:6.0|2:9.0|3:9.0|4:6.0; \
             Hint: High Makespan Impact; Hint: High Emission Impact}"
        );
        assert!(p.fragments[1].1.ends_with("; Hint: High Makespan Impact}"));
    }

    #[test]
    fn explicit_rates_segment() {
        let inst = Arc::new(Instance::new("r", vec![vec![vec![(0, 2.0), (1, 4.0)]]], vec![1.5, 2.0]).unwrap());
        let p = build_state_prompt(&State::reset(inst), None, PromptOptions { explicit_rates: true });
        assert_eq!(
            p.document(),
            "{Job 0, Op 0, 1 ops left; est_start=0.0, dur=3.0; machines=0:2.0|1:4.0; rates=0:1.5|1:2.0}"
        );
    }

    #[test]
    fn terminal_state_empty() {
        let mut s = State::reset(example_instance());
        while !s.is_done() {
            let a = s.legal_actions()[0];
            s.apply(&a).unwrap();
        }
        assert_eq!(build_state_prompt(&s, None, PromptOptions::default()).document(), "");
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_fragment("{Job 0, Op 0, 5 ops left; est_start=0, dur=7.4; machines=0:7.0}").is_err());
        assert!(parse_fragment("{Job 0, Op 0, 5 ops left; est_start=0.0, dur=7.4; machines=}").is_err());
        assert!(parse_fragment("{Job 0, Op 0, 5 ops left; est_start=0.0, dur=7.4; machines=0:7.0; Hint: Low}").is_err());
    }

    #[test]
    fn grammar_round_trip_along_rollouts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let inst = Arc::new(generate_instance(seed, &GenConfig::sized(5, 4)).unwrap());
            let mut store = ImpactStore::default();
            for op in 0..inst.total_ops() {
                store.record_impact(op, rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0), 0);
            }
            store.refresh_hints();
            let mut s = State::reset(inst.clone());
            loop {
                let opts = PromptOptions { explicit_rates: seed % 2 == 0 };
                let p = build_state_prompt(&s, Some(&store), opts);
                let parsed = parse_document(&p.document()).unwrap();
                assert_eq!(parsed.len(), p.fragments.len());
                for (f, (id, text)) in parsed.iter().zip(&p.fragments) {
                    assert_eq!(&f.render(), text);
                    assert_eq!(inst.op_offset(f.job) + f.op, *id);
                    assert_eq!(f.hints, store.flags(*id));
                }
                if s.is_done() {
                    break;
                }
                let acts = s.legal_actions();
                s.apply(&acts[rng.gen_range(0..acts.len())]).unwrap();
            }
        }
    }
}

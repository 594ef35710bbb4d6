use std::collections::BTreeMap;
use std::fmt;

/// One logged impact observation for an operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactEntry {
    pub op_id: usize,
    pub iteration: usize,
    pub makespan_impact: f64,
    pub emission_impact: f64,
}

impl fmt::Display for ImpactEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{op_id: {}, makespan_impact: {:.1}, emission_impact: {:.1}}}",
            self.op_id, self.makespan_impact, self.emission_impact
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HintFlags {
    pub makespan: bool,
    pub emission: bool,
}

/// How a hint threshold is chosen at refresh time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Fixed cut-off value.
    Fixed(f64),
    /// Quantile `q` in `[0, 1]` of the window's averages, placed so that
    /// exactly `ceil((1 - q) * n)` distinct averages lie strictly above it.
    Percentile(f64),
}

impl Threshold {
    fn resolve(self, values: &[f64]) -> f64 {
        match self {
            Threshold::Fixed(t) => t,
            Threshold::Percentile(q) => percentile_cut(values, q),
        }
    }
}

fn percentile_cut(values: &[f64], q: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let above = ((1.0 - q) * n as f64).ceil() as usize;
    if above >= n {
        f64::NEG_INFINITY
    } else {
        sorted[n - above - 1]
    }
}

/// Per-operation impact log of one instance, with derived averages and hint
/// flags.
///
/// Logs accumulate over a window; [`ImpactStore::refresh_hints`] replaces the
/// averages and flags with those of the window and starts a new one. Flags
/// set `makespan` iff the average makespan impact is strictly above its
/// threshold, likewise for emission.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactStore {
    logs: BTreeMap<usize, Vec<ImpactEntry>>,
    averages: BTreeMap<usize, (f64, f64)>,
    flags: BTreeMap<usize, HintFlags>,
    pub makespan_threshold: Threshold,
    pub emission_threshold: Threshold,
    thresholds: (f64, f64),
    pub refresh_period: usize,
}

impl Default for ImpactStore {
    fn default() -> Self {
        ImpactStore::new(Threshold::Percentile(0.75), Threshold::Percentile(0.75), 20)
    }
}

impl ImpactStore {
    pub fn new(makespan_threshold: Threshold, emission_threshold: Threshold, refresh_period: usize) -> Self {
        ImpactStore {
            logs: BTreeMap::new(),
            averages: BTreeMap::new(),
            flags: BTreeMap::new(),
            makespan_threshold,
            emission_threshold,
            thresholds: (f64::INFINITY, f64::INFINITY),
            refresh_period: refresh_period.max(1),
        }
    }

    pub fn record_impact(&mut self, op_id: usize, d_ms: f64, d_ce: f64, iteration: usize) {
        self.logs.entry(op_id).or_default().push(ImpactEntry {
            op_id,
            iteration,
            makespan_impact: d_ms,
            emission_impact: d_ce,
        });
    }

    /// Entries logged for `op_id` in the current window.
    pub fn log(&self, op_id: usize) -> &[ImpactEntry] {
        self.logs.get(&op_id).map_or(&[], Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ImpactEntry> {
        self.logs.values().flatten()
    }

    /// Mean `(makespan, emission)` impact of `op_id` over the current window.
    pub fn window_mean(&self, op_id: usize) -> Option<(f64, f64)> {
        let log = self.logs.get(&op_id)?;
        if log.is_empty() {
            return None;
        }
        let n = log.len() as f64;
        let ms: f64 = log.iter().map(|e| e.makespan_impact).sum();
        let ce: f64 = log.iter().map(|e| e.emission_impact).sum();
        Some((ms / n, ce / n))
    }

    /// Averages from the last refresh.
    pub fn averages(&self, op_id: usize) -> Option<(f64, f64)> {
        self.averages.get(&op_id).copied()
    }

    pub fn flags(&self, op_id: usize) -> HintFlags {
        self.flags.get(&op_id).copied().unwrap_or_default()
    }

    /// Thresholds applied at the last refresh.
    pub fn thresholds(&self) -> (f64, f64) {
        self.thresholds
    }

    /// Whether iteration `iteration` is a refresh point.
    pub fn is_refresh_iteration(&self, iteration: usize) -> bool {
        iteration > 0 && iteration % self.refresh_period == 0
    }

    pub fn refresh_hints(&mut self) {
        let means: BTreeMap<usize, (f64, f64)> = self
            .logs
            .keys()
            .filter_map(|&op| self.window_mean(op).map(|m| (op, m)))
            .collect();
        let ms: Vec<f64> = means.values().map(|m| m.0).collect();
        let ce: Vec<f64> = means.values().map(|m| m.1).collect();
        let tau = (self.makespan_threshold.resolve(&ms), self.emission_threshold.resolve(&ce));
        self.flags = means
            .iter()
            .map(|(&op, &(dm, dc))| {
                (
                    op,
                    HintFlags {
                        makespan: dm > tau.0,
                        emission: dc > tau.1,
                    },
                )
            })
            .collect();
        self.averages = means;
        self.thresholds = tau;
        self.logs.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_entry_verbatim() {
        let mut s = ImpactStore::default();
        s.record_impact(29, 6.0, 95.0, 3);
        assert_eq!(
            s.log(29),
            &[ImpactEntry { op_id: 29, iteration: 3, makespan_impact: 6.0, emission_impact: 95.0 }]
        );
        assert_eq!(s.log(29)[0].to_string(), "{op_id: 29, makespan_impact: 6.0, emission_impact: 95.0}");
    }

    #[test]
    fn averages_are_window_means() {
        let mut s = ImpactStore::default();
        s.record_impact(1, 2.5, 7.0, 0);
        assert_eq!(s.window_mean(1), Some((2.5, 7.0)));
        s.record_impact(2, 4.0, 0.0, 0);
        s.record_impact(2, 8.0, 1.0, 1);
        assert_eq!(s.window_mean(2), Some((6.0, 0.5)));
        s.refresh_hints();
        assert_eq!(s.averages(2), Some((6.0, 0.5)));
        assert!(s.log(2).is_empty());
        assert_eq!(s.window_mean(2), None);
    }

    #[test]
    fn strict_inequality() {
        let mut s = ImpactStore::new(Threshold::Fixed(5.0), Threshold::Fixed(10.0), 20);
        s.record_impact(0, 5.0, 11.0, 0);
        s.record_impact(1, 6.0, 10.0, 0);
        s.refresh_hints();
        assert_eq!(s.flags(0), HintFlags { makespan: false, emission: true });
        assert_eq!(s.flags(1), HintFlags { makespan: true, emission: false });
        assert_eq!(s.flags(7), HintFlags::default());
    }

    #[test]
    fn refresh_schedule() {
        let s = ImpactStore::default();
        assert!(!s.is_refresh_iteration(0));
        assert!(!s.is_refresh_iteration(19));
        assert!(s.is_refresh_iteration(20));
        assert!(s.is_refresh_iteration(40));
    }

    proptest! {
        #[test]
        fn percentile_flags_top_quarter(n in 1usize..60, seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 7.0).collect();
            vals.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut s = ImpactStore::default();
            for (op, v) in vals.iter().enumerate() {
                s.record_impact(op, *v, -*v, 0);
            }
            s.refresh_hints();
            let flagged = (0..n).filter(|&op| s.flags(op).makespan).count();
            prop_assert_eq!(flagged, (n as f64 * 0.25).ceil() as usize);
            let flagged_ce = (0..n).filter(|&op| s.flags(op).emission).count();
            prop_assert_eq!(flagged_ce, flagged);
        }

        #[test]
        fn flags_pure_function_of_window(vals in prop::collection::vec((0usize..8, 0.0f64..20.0, 0.0f64..20.0), 0..40)) {
            let mut a = ImpactStore::default();
            let mut b = ImpactStore::default();
            b.record_impact(3, 100.0, 100.0, 0);
            b.refresh_hints();
            for (i, &(op, m, c)) in vals.iter().enumerate() {
                a.record_impact(op, m, c, i);
                b.record_impact(op, m, c, i);
            }
            a.refresh_hints();
            b.refresh_hints();
            for op in 0..8 {
                prop_assert_eq!(a.flags(op), b.flags(op));
            }
        }
    }
}

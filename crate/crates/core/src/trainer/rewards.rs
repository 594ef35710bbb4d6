use crate::env::StepOutcome;

/// Immediate `(makespan, emission)` rewards of one step: the negated
/// increase of the makespan lower bound and the negated emission added.
///
/// Over an episode the makespan rewards sum to minus the final makespan
/// (the bound starts at the critical-path estimate, see [`episode_offset`]),
/// and the emission rewards sum to minus the total emission.
pub fn immediate_rewards(outcome: &StepOutcome) -> (f64, f64) {
    (-outcome.delta_makespan_lb, -outcome.delta_emission)
}

/// Lower bound of the empty schedule; the makespan rewards of an episode
/// sum to `-(makespan - episode_offset)`.
pub fn episode_offset(initial: &crate::env::State) -> f64 {
    initial.lower_bound_makespan()
}

/// `R_t = sum_{v >= 0} gamma^v r_{t+v}` up to the end of the episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// `(v - mean) / (std + eps)` with the population standard deviation.
pub fn zscore(values: &[f64], eps: f64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + eps;
    values.iter().map(|v| (v - mean) / denom).collect()
}

/// `(1 - lambda) * ms + lambda * ce`, element-wise.
///
/// Evaluated as `ms + lambda * (ce - ms)`, so the result is affine in
/// `lambda` bit for bit; `lambda = 1` returns `ce` exactly.
pub fn combine_rewards(ms: &[f64], ce: &[f64], lambda: f64) -> Vec<f64> {
    assert_eq!(ms.len(), ce.len(), "objective lengths differ");
    if lambda == 1.0 {
        return ce.to_vec();
    }
    ms.iter().zip(ce).map(|(m, c)| m + lambda * (c - m)).collect()
}

/// `A_t = R_t - V(s_t)`.
pub fn advantages(returns: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(returns.len(), values.len(), "returns and values differ in length");
    returns.iter().zip(values).map(|(r, v)| r - v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn returns_cases() {
        assert_eq!(discounted_returns(&[1.0, 2.0, 3.0], 1.0), vec![6.0, 5.0, 3.0]);
        assert_eq!(discounted_returns(&[1.0, 2.0, 3.0], 0.0), vec![1.0, 2.0, 3.0]);
        assert_eq!(discounted_returns(&[1.0, 1.0], 0.5), vec![1.5, 1.0]);
        assert!(discounted_returns(&[], 0.9).is_empty());
    }

    #[test]
    fn zscore_cases() {
        let z = zscore(&[1.0, 2.0, 3.0], 1e-8);
        for (a, b) in z.iter().zip([-1.224_744_871, 0.0, 1.224_744_871]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert_eq!(zscore(&[4.0; 5], 1e-8), vec![0.0; 5]);
    }

    #[test]
    fn combine_endpoints() {
        let ms = [0.3, -1.2, 2.0];
        let ce = [1.0, 0.5, -0.25];
        assert_eq!(combine_rewards(&ms, &ce, 0.0), ms);
        assert_eq!(combine_rewards(&ms, &ce, 1.0), ce);
        assert_eq!(combine_rewards(&[2.0], &[4.0], 0.5), vec![3.0]);
    }

    #[test]
    fn advantage_cases() {
        let r = [1.0, -2.0, 0.5];
        assert_eq!(advantages(&r, &[0.0; 3]), r);
        assert_eq!(advantages(&r, &r), vec![0.0; 3]);
    }

    #[test]
    fn rewards_of_outcome() {
        let o = StepOutcome { delta_makespan_lb: 0.0, delta_emission: 6.0, done: false };
        assert_eq!(immediate_rewards(&o), (-0.0, -6.0));
    }

    proptest! {
        #[test]
        fn zscore_mean_zero(v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let z = zscore(&v, 1e-8);
            prop_assert!(z.iter().sum::<f64>().abs() / (z.len() as f64) < 1e-9);
        }

        #[test]
        fn combine_affine_in_lambda(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
            lambda in 0.0f64..=1.0,
        ) {
            let (ms, ce): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = combine_rewards(&ms, &ce, lambda);
            let r0 = combine_rewards(&ms, &ce, 0.0);
            let r1 = combine_rewards(&ms, &ce, 1.0);
            for i in 0..r.len() {
                prop_assert_eq!(r[i], r0[i] + lambda * (r1[i] - r0[i]));
            }
        }

        #[test]
        fn advantage_shift(r in prop::collection::vec(-5.0f64..5.0, 1..10), c in -3.0f64..3.0) {
            let v: Vec<f64> = r.iter().map(|x| x * 0.5).collect();
            let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
            let a = advantages(&r, &v);
            let b = advantages(&shifted, &v);
            for i in 0..a.len() {
                prop_assert!((b[i] - (a[i] + c)).abs() < 1e-12);
            }
        }
    }
}

//! KL reward shaping and generalized advantage estimation over masked
//! token streams.

/// Per-token KL penalty against a frozen reference policy:
/// `r'_t = r_t - beta * (logp_new_t - logp_ref_t)` on unmasked tokens.
/// Masked tokens are environment-injected and stay untouched.
pub fn kl_shaped_rewards(
    token_rewards: &[f64],
    logp_new: &[f64],
    logp_ref: &[f64],
    beta: f64,
    mask: &[bool],
) -> Vec<f64> {
    debug_assert_eq!(token_rewards.len(), logp_new.len());
    debug_assert_eq!(token_rewards.len(), logp_ref.len());
    debug_assert_eq!(token_rewards.len(), mask.len());
    token_rewards
        .iter()
        .enumerate()
        .map(|(t, &r)| {
            if mask[t] {
                r - beta * (logp_new[t] - logp_ref[t])
            } else {
                r
            }
        })
        .collect()
}

/// GAE over the full token sequence with terminal bootstrap value 0.
///
/// Masked tokens carry zero reward structurally (whatever value the input
/// holds there is ignored) and pass values through the recursion; their
/// advantages are then forced to 0 so they cannot enter any loss mean.
/// Returns `(advantages, returns)` with `returns[t] = A_t + V_t` before
/// masking.
///
/// At `gamma == lambda == 1` the estimator reduces to reward-to-go minus
/// value and is computed in that closed form, which keeps it free of
/// value-cancellation rounding.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
    mask: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    debug_assert_eq!(values.len(), n);
    debug_assert_eq!(mask.len(), n);
    let mut advantages = vec![0.0; n];
    let mut returns = vec![0.0; n];

    if gamma == 1.0 && lambda == 1.0 {
        let mut rtg = 0.0;
        for t in (0..n).rev() {
            let r = if mask[t] { rewards[t] } else { 0.0 };
            rtg = r + rtg;
            let a = rtg - values[t];
            returns[t] = a + values[t];
            advantages[t] = if mask[t] { a } else { 0.0 };
        }
    } else {
        let mut next_adv = 0.0;
        for t in (0..n).rev() {
            let r = if mask[t] { rewards[t] } else { 0.0 };
            let v_next = if t + 1 < n { values[t + 1] } else { 0.0 };
            let delta = r + gamma * v_next - values[t];
            let a = delta + gamma * lambda * next_adv;
            returns[t] = a + values[t];
            advantages[t] = if mask[t] { a } else { 0.0 };
            next_adv = a;
        }
    }
    (advantages, returns)
}

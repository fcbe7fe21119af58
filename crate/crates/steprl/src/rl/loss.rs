//! The clipped, retrieval-masked surrogate objective and the value loss.
//!
//! Both losses average over unmasked (policy-generated) tokens only:
//!
//! ```text
//! L_pi = -(1 / sum I) * sum_{I(o_t)=1} min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t)
//! L_v  =  (1 / sum I) * sum_{I(o_t)=1} (V(s_t) - ret_t)^2
//! ```
//!
//! with `rho_t = exp(logp_theta - logp_theta_old)`. Gradients flow through
//! the model's fixed reverse-mode graph; nothing here touches masked
//! positions, so perturbing their rewards or log-probabilities changes
//! neither value nor gradient.

use crate::rl::nn::{masked_log_softmax, Net};
use crate::rl::rollout::{ActionSpace, Episode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("no unmasked tokens in batch")]
    EmptyMask,
}

/// One processed episode: advantages and value targets aligned to steps.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub episode: Episode,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

fn legal_for(space: &ActionSpace, step_state: Option<crate::rl::rollout::SlotState>) -> Vec<u32> {
    match step_state {
        Some(state) => space.legal(state),
        // Injected positions never reach the loss; full space as fallback.
        None => space.legal(crate::rl::rollout::SlotState::Free),
    }
}

/// Clipped masked surrogate loss and its parameter gradient.
pub fn steppo_loss(
    items: &[TrainItem],
    policy: &Net,
    space: &ActionSpace,
    clip_epsilon: f64,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>), LossError> {
    let mask_count: usize = items
        .iter()
        .map(|it| it.episode.steps.iter().filter(|s| !s.injected).count())
        .sum();
    if mask_count == 0 {
        return Err(LossError::EmptyMask);
    }
    let scale = 1.0 / mask_count as f64;

    let mut loss = 0.0;
    let mut grads = vec![0.0; policy.params.len()];
    for item in items {
        for (pos, step) in item.episode.steps.iter().enumerate() {
            if step.injected {
                continue;
            }
            let ctx = item.episode.context(pos, &policy.cfg);
            let fwd = policy.forward(&ctx);
            let legal = legal_for(space, step.state);
            let logp = masked_log_softmax(&fwd.out, &legal);
            let a = step.token as usize;
            let logp_new = logp[a];
            let advantage = item.advantages[pos];

            let rho = (logp_new - step.logp_old).exp();
            let unclipped = rho * advantage;
            let clipped = rho.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
            // d(selected)/d(logp_new), noting d(rho)/d(logp_new) = rho.
            let (selected, dsel_dlogp) = if unclipped <= clipped {
                (unclipped, rho * advantage)
            } else {
                let inside = (1.0 - clip_epsilon..=1.0 + clip_epsilon).contains(&rho);
                (clipped, if inside { rho * advantage } else { 0.0 })
            };
            loss -= scale * selected;
            let dlogp = -scale * dsel_dlogp;

            // Entropy bonus normalized by the slot's maximum entropy, so
            // a two-way junction feels the same relative pressure as a
            // full-vocabulary body slot.
            let mut entropy = 0.0;
            let ent_scale = if entropy_coef != 0.0 && legal.len() > 1 {
                entropy_coef / (legal.len() as f64).ln()
            } else {
                0.0
            };
            if ent_scale != 0.0 {
                for &id in &legal {
                    let lp = logp[id as usize];
                    entropy -= lp.exp() * lp;
                }
                loss -= scale * ent_scale * entropy;
            }

            // Backprop through the masked log-softmax.
            let mut dout = vec![0.0; fwd.out.len()];
            for &id in &legal {
                let j = id as usize;
                let p = logp[j].exp();
                dout[j] = dlogp * (if j == a { 1.0 } else { 0.0 } - p);
                if ent_scale != 0.0 {
                    // dH/dlogit_j = -p_j (logp_j + H)
                    dout[j] += scale * ent_scale * p * (logp[j] + entropy);
                }
            }
            policy.backward(&ctx, &fwd, &dout, &mut grads);
        }
    }
    Ok((loss, grads))
}

/// Masked mean squared error between value predictions and GAE returns.
pub fn value_loss(items: &[TrainItem], value: &Net) -> Result<(f64, Vec<f64>), LossError> {
    let mask_count: usize = items
        .iter()
        .map(|it| it.episode.steps.iter().filter(|s| !s.injected).count())
        .sum();
    if mask_count == 0 {
        return Err(LossError::EmptyMask);
    }
    let scale = 1.0 / mask_count as f64;

    let mut loss = 0.0;
    let mut grads = vec![0.0; value.params.len()];
    for item in items {
        for (pos, step) in item.episode.steps.iter().enumerate() {
            if step.injected {
                continue;
            }
            let ctx = item.episode.context(pos, &value.cfg);
            let fwd = value.forward(&ctx);
            let err = fwd.out[0] - item.returns[pos];
            loss += scale * err * err;
            value.backward(&ctx, &fwd, &[scale * 2.0 * err], &mut grads);
        }
    }
    Ok((loss, grads))
}

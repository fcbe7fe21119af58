//! The toy differentiable models: a context-window MLP policy and a
//! value head of the same shape.
//!
//! The context summary is a fixed-dimension concatenation of token
//! embeddings from two windows over the episode stream: the first
//! `question_window` tokens (the prompt stays visible at every decision)
//! and the last `recent_window` tokens before the current position,
//! left-padded so "one token ago" is always the same slot. One tanh
//! hidden layer maps the summary to vocabulary logits (policy) or a
//! scalar (value). Gradients are hand-derived reverse mode over this
//! fixed graph; parameters live in one flat vector so optimizer state,
//! checkpoints, and finite-difference checks stay trivial.

use crate::rng::Rng;
use serde::{Deserialize, Serialize};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub question_window: usize,
    pub recent_window: usize,
    /// Window anchored on the start of the latest information segment,
    /// so the top retrieved document sits at fixed slots.
    pub info_window: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Tie the output head to the embedding table:
    /// `logit_v = <E_v, U^T tanh(W1 x + b1)> + b_v`. Copying a context
    /// token then only needs the head to reproduce that token's
    /// embedding, which generalizes across the whole vocabulary instead
    /// of training one output row per token. Requires
    /// `out_dim == vocab_size`.
    pub tied_output: bool,
    /// Add a pointer head: attention over the context slots, with the
    /// attended tokens' logits boosted by a learned strength. Copying
    /// "the token at slot s when in state z" is then a single attention
    /// row instead of an embedding-space circuit, which is what makes
    /// slot-copying learnable from sparse rewards. Requires
    /// `tied_output`.
    pub pointer: bool,
    /// Number of independent pointer attention heads; separate copy
    /// decisions (question entity, question relation, document object)
    /// then do not have to share one attention distribution.
    pub pointer_heads: usize,
    /// Per-token output bias. Off for the policy: a free bias row lets
    /// the net memorize frequent tokens instead of routing through the
    /// copy paths, which is exactly the collapse mode to avoid.
    pub output_bias: bool,
}

impl NetConfig {
    pub fn slots(&self) -> usize {
        self.question_window + self.recent_window + self.info_window
    }

    pub fn input_dim(&self) -> usize {
        self.slots() * self.embed_dim
    }

    fn head_params(&self) -> usize {
        let bias = if self.output_bias { self.out_dim } else { 0 };
        if self.tied_output {
            self.hidden_dim * self.embed_dim + bias
        } else {
            self.hidden_dim * self.out_dim + bias
        }
    }

    fn pointer_params(&self) -> usize {
        if self.pointer {
            // Per head: attention matrix (slots x hidden) plus strength.
            self.pointer_heads * (self.slots() * self.hidden_dim + 1)
        } else {
            0
        }
    }

    pub fn num_params(&self) -> usize {
        self.vocab_size * self.embed_dim
            + self.input_dim() * self.hidden_dim
            + self.hidden_dim
            + self.head_params()
            + self.pointer_params()
    }
}

/// Token-id context: the three windows the featurizer reads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    pub question: Vec<u32>,
    pub recent: Vec<u32>,
    pub info: Vec<u32>,
}

impl Context {
    /// Build from a stream prefix: `stream[..pos]` is everything before
    /// the position being predicted. `info_start` is the stream index of
    /// the latest `<information>` opener at or before `pos`, if any.
    pub fn at(stream: &[u32], pos: usize, info_start: Option<usize>, cfg: &NetConfig) -> Context {
        let q = cfg.question_window;
        let r = cfg.recent_window;
        let seen = pos.min(stream.len());
        let mut question = vec![PAD; q];
        for i in 0..q.min(seen) {
            question[i] = stream[i];
        }
        let mut recent = vec![PAD; r];
        let lo = seen.saturating_sub(r);
        for (j, &tok) in stream[lo..seen].iter().enumerate() {
            recent[r - (seen - lo) + j] = tok;
        }
        let mut info = vec![PAD; cfg.info_window];
        if let Some(start) = info_start {
            let hi = (start + cfg.info_window).min(seen);
            for (j, &tok) in stream[start.min(seen)..hi].iter().enumerate() {
                info[j] = tok;
            }
        }
        Context {
            question,
            recent,
            info,
        }
    }

    pub fn slot_tokens(&self) -> impl Iterator<Item = &u32> {
        self.question
            .iter()
            .chain(self.recent.iter())
            .chain(self.info.iter())
    }
}

/// Forward-pass cache for the backward pass.
pub struct Forward {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Predicted embedding `U^T hidden` (tied head only).
    pub head: Vec<f64>,
    /// Slot attention weights (pointer head only).
    pub attn: Vec<f64>,
    pub out: Vec<f64>,
}

/// Flat-parameter MLP. Layout: embeddings, w1, b1, w2, b2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub cfg: NetConfig,
    pub params: Vec<f64>,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    attn: usize,
    copy_strength: usize,
}

impl Net {
    fn offsets(cfg: &NetConfig) -> Offsets {
        let w1 = cfg.vocab_size * cfg.embed_dim;
        let b1 = w1 + cfg.input_dim() * cfg.hidden_dim;
        let w2 = b1 + cfg.hidden_dim;
        let b2 = if cfg.tied_output {
            w2 + cfg.hidden_dim * cfg.embed_dim
        } else {
            w2 + cfg.hidden_dim * cfg.out_dim
        };
        let attn = b2 + if cfg.output_bias { cfg.out_dim } else { 0 };
        let copy_strength = attn + if cfg.pointer {
            cfg.pointer_heads * cfg.slots() * cfg.hidden_dim
        } else {
            0
        };
        Offsets {
            w1,
            b1,
            w2,
            b2,
            attn,
            copy_strength,
        }
    }

    pub fn init(cfg: NetConfig, rng: &mut Rng) -> Net {
        if cfg.tied_output {
            assert_eq!(
                cfg.out_dim, cfg.vocab_size,
                "tied output head requires out_dim == vocab_size"
            );
        }
        if cfg.pointer {
            assert!(cfg.tied_output, "pointer head requires tied_output");
        }
        let mut params = vec![0.0; cfg.num_params()];
        let o = Self::offsets(&cfg);
        for p in params[..o.w1].iter_mut() {
            *p = rng.normal() * 0.3;
        }
        let w1_scale = (2.0 / (cfg.input_dim() + cfg.hidden_dim) as f64).sqrt();
        for p in params[o.w1..o.b1].iter_mut() {
            *p = rng.normal() * w1_scale;
        }
        let head_out = if cfg.tied_output {
            cfg.embed_dim
        } else {
            cfg.out_dim
        };
        let w2_scale = (2.0 / (cfg.hidden_dim + head_out) as f64).sqrt();
        for p in params[o.w2..o.b2].iter_mut() {
            *p = rng.normal() * w2_scale;
        }
        if cfg.pointer {
            for p in params[o.attn..o.copy_strength].iter_mut() {
                *p = rng.normal() * 0.05;
            }
            // Start with a strong copy prior: tokens present in the
            // context windows are preferred from the first rollout, so
            // exploration concentrates on copy candidates and the
            // attention rows see reward signal immediately.
            for p in params[o.copy_strength..].iter_mut() {
                *p = 8.0 / cfg.pointer_heads as f64;
            }
        }
        Net { cfg, params }
    }

    pub fn forward(&self, ctx: &Context) -> Forward {
        let cfg = &self.cfg;
        let d = cfg.embed_dim;
        let h = cfg.hidden_dim;
        let o = Self::offsets(cfg);

        let mut input = vec![0.0; cfg.input_dim()];
        for (slot, &tok) in ctx.slot_tokens().enumerate() {
            let e = tok as usize * d;
            input[slot * d..(slot + 1) * d].copy_from_slice(&self.params[e..e + d]);
        }

        let w1 = &self.params[o.w1..o.b1];
        let b1 = &self.params[o.b1..o.w2];
        let mut hidden = b1.to_vec();
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &w1[i * h..(i + 1) * h];
            for (j, hj) in hidden.iter_mut().enumerate() {
                *hj += x * row[j];
            }
        }
        for hj in hidden.iter_mut() {
            *hj = hj.tanh();
        }

        let w2 = &self.params[o.w2..o.b2];
        let bias_of = |n: usize| -> Vec<f64> {
            if cfg.output_bias {
                self.params[o.b2..o.b2 + n].to_vec()
            } else {
                vec![0.0; n]
            }
        };
        if cfg.tied_output {
            // head = U^T hidden; logit_v = <E_v, head> + bias_v.
            let mut head = vec![0.0; d];
            for (j, &hj) in hidden.iter().enumerate() {
                let row = &w2[j * d..(j + 1) * d];
                for (k, hk) in head.iter_mut().enumerate() {
                    *hk += hj * row[k];
                }
            }
            let mut out = bias_of(cfg.out_dim);
            for (v, ov) in out.iter_mut().enumerate() {
                let e = &self.params[v * d..(v + 1) * d];
                let mut dot = 0.0;
                for k in 0..d {
                    dot += e[k] * head[k];
                }
                *ov += dot;
            }

            // Pointer heads: softmax attention over context slots boosts
            // the attended tokens' logits. attn is the concatenation of
            // all heads' weights.
            let mut attn = Vec::new();
            if cfg.pointer {
                let slots = cfg.slots();
                for head in 0..cfg.pointer_heads {
                    let base = o.attn + head * slots * h;
                    let a = &self.params[base..base + slots * h];
                    let c = self.params[o.copy_strength + head];
                    let mut al = vec![0.0; slots];
                    for (s, al_s) in al.iter_mut().enumerate() {
                        let row = &a[s * h..(s + 1) * h];
                        let mut acc = 0.0;
                        for (j, &hj) in hidden.iter().enumerate() {
                            acc += row[j] * hj;
                        }
                        *al_s = acc;
                    }
                    let max = al.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut weights: Vec<f64> = al.iter().map(|&l| (l - max).exp()).collect();
                    let z: f64 = weights.iter().sum();
                    for p in weights.iter_mut() {
                        *p /= z;
                    }
                    for (s, &tok) in ctx.slot_tokens().enumerate() {
                        out[tok as usize] += c * weights[s];
                    }
                    attn.extend(weights);
                }
            }
            Forward {
                input,
                hidden,
                head,
                attn,
                out,
            }
        } else {
            let mut out = bias_of(cfg.out_dim);
            for (j, &hj) in hidden.iter().enumerate() {
                if hj == 0.0 {
                    continue;
                }
                let row = &w2[j * cfg.out_dim..(j + 1) * cfg.out_dim];
                for (k, ok) in out.iter_mut().enumerate() {
                    *ok += hj * row[k];
                }
            }
            Forward {
                input,
                hidden,
                head: Vec::new(),
                attn: Vec::new(),
                out,
            }
        }
    }

    /// Accumulate parameter gradients for d(loss)/d(out) at one position.
    pub fn backward(&self, ctx: &Context, fwd: &Forward, dout: &[f64], grads: &mut [f64]) {
        let cfg = &self.cfg;
        let d = cfg.embed_dim;
        let h = cfg.hidden_dim;
        let o = Self::offsets(cfg);
        debug_assert_eq!(grads.len(), self.params.len());

        // Output head.
        let mut dhidden = vec![0.0; h];
        if cfg.tied_output {
            let mut dhead = vec![0.0; d];
            {
                let (grads_embed, grads_head) = grads.split_at_mut(o.w2);
                let (gw2, gb2) = grads_head.split_at_mut(h * d);
                for (v, &g) in dout.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    if cfg.output_bias {
                        gb2[v] += g;
                    }
                    let e = &self.params[v * d..(v + 1) * d];
                    let ge = &mut grads_embed[v * d..(v + 1) * d];
                    for k in 0..d {
                        dhead[k] += g * e[k];
                        ge[k] += g * fwd.head[k];
                    }
                }
                let w2 = &self.params[o.w2..o.b2];
                for j in 0..h {
                    let row = &w2[j * d..(j + 1) * d];
                    let grow = &mut gw2[j * d..(j + 1) * d];
                    let mut acc = 0.0;
                    for k in 0..d {
                        grow[k] += fwd.hidden[j] * dhead[k];
                        acc += row[k] * dhead[k];
                    }
                    dhidden[j] = acc;
                }
            }

            if cfg.pointer {
                let slots = cfg.slots();
                for head in 0..cfg.pointer_heads {
                    let c = self.params[o.copy_strength + head];
                    let weights = &fwd.attn[head * slots..(head + 1) * slots];
                    let mut dattn = vec![0.0; slots];
                    let mut dc = 0.0;
                    for (s, &tok) in ctx.slot_tokens().enumerate() {
                        let g = dout[tok as usize];
                        dattn[s] = c * g;
                        dc += weights[s] * g;
                    }
                    grads[o.copy_strength + head] += dc;
                    let dot: f64 = weights.iter().zip(&dattn).map(|(p, dp)| p * dp).sum();
                    let base = o.attn + head * slots * h;
                    let a = &self.params[base..base + slots * h];
                    let ga = &mut grads[base..base + slots * h];
                    for s in 0..slots {
                        let dal = weights[s] * (dattn[s] - dot);
                        if dal == 0.0 {
                            continue;
                        }
                        let row = &a[s * h..(s + 1) * h];
                        let grow = &mut ga[s * h..(s + 1) * h];
                        for (j, dh) in dhidden.iter_mut().enumerate() {
                            grow[j] += dal * fwd.hidden[j];
                            *dh += row[j] * dal;
                        }
                    }
                }
            }
        } else {
            let w2 = &self.params[o.w2..o.b2];
            let (gw2, gb2) = grads[o.w2..].split_at_mut(h * cfg.out_dim);
            for (k, &g) in dout.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                if cfg.output_bias {
                    gb2[k] += g;
                }
                for j in 0..h {
                    gw2[j * cfg.out_dim + k] += fwd.hidden[j] * g;
                    dhidden[j] += w2[j * cfg.out_dim + k] * g;
                }
            }
        }

        // tanh.
        for (j, dh) in dhidden.iter_mut().enumerate() {
            *dh *= 1.0 - fwd.hidden[j] * fwd.hidden[j];
        }

        // Hidden layer.
        let mut dinput = vec![0.0; cfg.input_dim()];
        {
            let w1 = &self.params[o.w1..o.b1];
            let (gw1, gb1) = grads[o.w1..o.w2].split_at_mut(cfg.input_dim() * h);
            for (j, &g) in dhidden.iter().enumerate() {
                if g != 0.0 {
                    gb1[j] += g;
                }
            }
            for (i, &x) in fwd.input.iter().enumerate() {
                let row = &w1[i * h..(i + 1) * h];
                let grow = &mut gw1[i * h..(i + 1) * h];
                let mut dx = 0.0;
                for (j, &g) in dhidden.iter().enumerate() {
                    grow[j] += x * g;
                    dx += row[j] * g;
                }
                dinput[i] = dx;
            }
        }

        // Embeddings (input path; the tied head already accumulated its
        // own embedding gradients above).
        for (slot, &tok) in ctx.slot_tokens().enumerate() {
            let e = tok as usize * d;
            for k in 0..d {
                grads[e + k] += dinput[slot * d + k];
            }
        }
    }

    /// Scalar head convenience for the value model.
    pub fn predict_scalar(&self, ctx: &Context) -> f64 {
        debug_assert_eq!(self.cfg.out_dim, 1);
        self.forward(ctx).out[0]
    }
}

/// Log-softmax restricted to the legal token set; illegal entries are
/// `-inf`. Probabilities over the legal set sum to 1.
pub fn masked_log_softmax(logits: &[f64], legal: &[u32]) -> Vec<f64> {
    debug_assert!(!legal.is_empty());
    let mut out = vec![f64::NEG_INFINITY; logits.len()];
    let max = legal
        .iter()
        .map(|&i| logits[i as usize])
        .fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = legal.iter().map(|&i| (logits[i as usize] - max).exp()).sum();
    let lz = z.ln();
    for &i in legal {
        out[i as usize] = logits[i as usize] - max - lz;
    }
    out
}

/// Adam over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(out_dim: usize) -> NetConfig {
        NetConfig {
            vocab_size: 10,
            embed_dim: 3,
            question_window: 2,
            recent_window: 3,
            info_window: 2,
            hidden_dim: 4,
            out_dim,
            tied_output: false,
            pointer: false,
            pointer_heads: 0,
            output_bias: true,
        }
    }

    #[test]
    fn context_windows_pad_correctly() {
        let cfg = tiny_cfg(10);
        let stream = vec![5, 6, 7, 8];
        let ctx = Context::at(&stream, 4, Some(2), &cfg);
        assert_eq!(ctx.question, vec![5, 6]);
        assert_eq!(ctx.recent, vec![6, 7, 8]);
        assert_eq!(ctx.info, vec![7, 8]);

        // Early position: recent left-padded, question truncated to
        // prefix, info window empty without an information segment.
        let ctx = Context::at(&stream, 1, None, &cfg);
        assert_eq!(ctx.question, vec![5, PAD]);
        assert_eq!(ctx.recent, vec![PAD, PAD, 5]);
        assert_eq!(ctx.info, vec![PAD, PAD]);

        let ctx = Context::at(&stream, 0, None, &cfg);
        assert_eq!(ctx.question, vec![PAD, PAD]);
        assert_eq!(ctx.recent, vec![PAD, PAD, PAD]);
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny_cfg(10);
        let net = Net::init(cfg, &mut Rng::new(5));
        let ctx = Context {
            question: vec![1, 2],
            recent: vec![3, 4, 5],
            info: vec![0, 6],
        };
        let a = net.forward(&ctx).out;
        let b = net.forward(&ctx).out;
        assert_eq!(a, b);
    }

    #[test]
    fn masked_log_softmax_normalizes_over_legal_set() {
        let logits = vec![0.3, -1.0, 2.0, 0.0, 1.0];
        let legal = vec![0u32, 2, 4];
        let lp = masked_log_softmax(&logits, &legal);
        let total: f64 = legal.iter().map(|&i| lp[i as usize].exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(lp[1], f64::NEG_INFINITY);
        assert_eq!(lp[3], f64::NEG_INFINITY);
    }

    #[test]
    fn backward_matches_finite_differences_on_scalar_head() {
        // Quadratic loss on the scalar output; checks the whole chain.
        let cfg = tiny_cfg(1);
        let mut net = Net::init(cfg, &mut Rng::new(9));
        let ctx = Context {
            question: vec![1, 7],
            recent: vec![0, 3, 9],
            info: vec![5, 0],
        };
        let target = 0.37;
        let fwd = net.forward(&ctx);
        let err = fwd.out[0] - target;
        let mut grads = vec![0.0; net.params.len()];
        net.backward(&ctx, &fwd, &[2.0 * err], &mut grads);

        let h = 1e-6;
        for i in (0..net.params.len()).step_by(7) {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = (net.forward(&ctx).out[0] - target).powi(2);
            net.params[i] = orig - h;
            let down = (net.forward(&ctx).out[0] - target).powi(2);
            net.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grads[i].abs()).max(1e-8);
            assert!(
                ((fd - grads[i]) / denom).abs() < 1e-4,
                "param {i}: fd {fd} vs analytic {}",
                grads[i]
            );
        }
    }

    #[test]
    fn tied_backward_matches_finite_differences() {
        // Loss: log-prob of one token under masked softmax, which also
        // exercises the shared embedding gradient (input + output paths).
        let cfg = NetConfig {
            vocab_size: 9,
            embed_dim: 3,
            question_window: 2,
            recent_window: 3,
            info_window: 2,
            hidden_dim: 4,
            out_dim: 9,
            tied_output: true,
            pointer: true,
            pointer_heads: 2,
            output_bias: true,
        };
        let mut net = Net::init(cfg, &mut Rng::new(21));
        let ctx = Context {
            question: vec![2, 8],
            recent: vec![0, 4, 7],
            info: vec![3, 6],
        };
        let legal: Vec<u32> = vec![1, 3, 4, 7];
        let target = 4usize;

        let eval = |net: &Net| {
            let fwd = net.forward(&ctx);
            masked_log_softmax(&fwd.out, &legal)[target]
        };
        let fwd = net.forward(&ctx);
        let logp = masked_log_softmax(&fwd.out, &legal);
        let mut dout = vec![0.0; cfg.out_dim];
        for &id in &legal {
            let j = id as usize;
            dout[j] = (if j == target { 1.0 } else { 0.0 }) - logp[j].exp();
        }
        let mut grads = vec![0.0; net.params.len()];
        net.backward(&ctx, &fwd, &dout, &mut grads);

        let h = 1e-6;
        for i in 0..net.params.len() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = eval(&net);
            net.params[i] = orig - h;
            let down = eval(&net);
            net.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grads[i].abs()).max(1e-8);
            assert!(
                ((fd - grads[i]) / denom).abs() < 1e-4,
                "param {i}: fd {fd} vs analytic {}",
                grads[i]
            );
        }
    }

    #[test]
    fn adam_with_zero_lr_is_identity() {
        let cfg = tiny_cfg(1);
        let mut net = Net::init(cfg, &mut Rng::new(2));
        let before = net.params.clone();
        let grads = vec![1.0; net.params.len()];
        let mut adam = Adam::new(0.0, net.params.len());
        adam.step(&mut net.params, &grads);
        assert_eq!(net.params, before);
    }

    #[test]
    fn tied_head_learns_to_copy_a_context_slot() {
        // Supervised sanity check on the copy capacity the policy relies
        // on: predict the token sitting in a fixed question slot.
        let cfg = NetConfig {
            vocab_size: 40,
            embed_dim: 12,
            question_window: 4,
            recent_window: 6,
            info_window: 3,
            hidden_dim: 32,
            out_dim: 40,
            tied_output: true,
            pointer: true,
            pointer_heads: 2,
            output_bias: true,
        };
        let mut rng = Rng::new(3);
        let mut net = Net::init(cfg, &mut rng);
        let mut adam = Adam::new(3e-2, net.params.len());
        let legal: Vec<u32> = (2..40).collect();
        let sample_ctx = |rng: &mut Rng| Context {
            question: (0..4).map(|_| 2 + rng.below(38) as u32).collect(),
            recent: (0..6).map(|_| 2 + rng.below(38) as u32).collect(),
            info: (0..3).map(|_| 2 + rng.below(38) as u32).collect(),
        };

        let mut final_nll = f64::NAN;
        for step in 0..400 {
            let mut grads = vec![0.0; net.params.len()];
            let mut nll = 0.0;
            let batch = 16;
            for _ in 0..batch {
                let ctx = sample_ctx(&mut rng);
                let target = ctx.question[2] as usize;
                let fwd = net.forward(&ctx);
                let logp = masked_log_softmax(&fwd.out, &legal);
                nll -= logp[target] / batch as f64;
                let mut dout = vec![0.0; cfg.out_dim];
                for &id in &legal {
                    let j = id as usize;
                    dout[j] = -((if j == target { 1.0 } else { 0.0 }) - logp[j].exp())
                        / batch as f64;
                }
                net.backward(&ctx, &fwd, &dout, &mut grads);
            }
            adam.step(&mut net.params, &grads);
            if step == 399 {
                final_nll = nll;
            }
        }
        // Uniform over 38 legal tokens is ln(38) = 3.64 nats; copying
        // should get far below that.
        assert!(
            final_nll < 0.7,
            "copy task did not train: final nll {final_nll}"
        );
    }

    #[test]
    fn net_serializes_round_trip_exact() {
        let cfg = tiny_cfg(4);
        let net = Net::init(cfg, &mut Rng::new(33));
        let json = serde_json::to_string(&net).unwrap();
        let back: Net = serde_json::from_str(&json).unwrap();
        assert_eq!(net, back);
    }
}

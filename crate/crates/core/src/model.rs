//! A small multilayer perceptron with one rectified-linear trunk and three
//! heads: policy, state value, and an expert/agent transition classifier.
//!
//! All parameters live in one flat vector. Gradients are derived by hand and
//! collected per head in a [`GradAccumulator`], so that [`apply_grads`] can
//! ascend the policy objective while descending the value and classifier
//! losses even where the heads share trunk weights.
//!
//! The classifier scores an ordered pair of observations `(s, s')` through
//! trunk features `[phi(s), phi(s')]` and a linear head. With a shared trunk,
//! `phi` is the same feature map the policy and value heads read; otherwise the
//! classifier owns a second trunk of identical shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::types::{StateVec, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyHead {
    /// Logits over a discrete action set.
    Categorical { n_actions: usize },
    /// Mean of a diagonal Gaussian with state-independent log standard deviations.
    Gaussian { action_dim: usize },
}

impl PolicyHead {
    pub fn width(&self) -> usize {
        match *self {
            PolicyHead::Categorical { n_actions } => n_actions,
            PolicyHead::Gaussian { action_dim } => action_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayout {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub policy: PolicyHead,
    pub shared: bool,
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    trunk: usize,
    policy_w: usize,
    policy_b: usize,
    log_std: usize,
    value_w: usize,
    value_b: usize,
    clf_trunk: usize,
    clf_w: usize,
    clf_b: usize,
    total: usize,
}

impl ModelLayout {
    pub fn new(obs_dim: usize, hidden: Vec<usize>, policy: PolicyHead, shared: bool) -> Result<Self> {
        if obs_dim == 0 {
            return invalid("obs_dim must be at least 1");
        }
        if hidden.is_empty() || hidden.contains(&0) {
            return invalid("hidden widths must be nonempty and positive");
        }
        if policy.width() == 0 {
            return invalid("policy head must have at least one output");
        }
        Ok(Self {
            obs_dim,
            hidden,
            policy,
            shared,
        })
    }

    fn feature_dim(&self) -> usize {
        *self.hidden.last().expect("validated nonempty")
    }

    fn trunk_len(&self) -> usize {
        let mut prev = self.obs_dim;
        let mut n = 0;
        for &h in &self.hidden {
            n += h * prev + h;
            prev = h;
        }
        n
    }

    fn offsets(&self) -> Offsets {
        let f = self.feature_dim();
        let pw = self.policy.width();
        let trunk = 0;
        let policy_w = trunk + self.trunk_len();
        let policy_b = policy_w + pw * f;
        let log_std = policy_b + pw;
        let n_log_std = match self.policy {
            PolicyHead::Gaussian { action_dim } => action_dim,
            PolicyHead::Categorical { .. } => 0,
        };
        let value_w = log_std + n_log_std;
        let value_b = value_w + f;
        let clf_trunk = value_b + 1;
        let clf_w = clf_trunk + if self.shared { 0 } else { self.trunk_len() };
        let clf_b = clf_w + 2 * f;
        Offsets {
            trunk,
            policy_w,
            policy_b,
            log_std,
            value_w,
            value_b,
            clf_trunk: if self.shared { trunk } else { clf_trunk },
            clf_w,
            clf_b,
            total: clf_b + 1,
        }
    }

    pub fn param_count(&self) -> usize {
        self.offsets().total
    }
}

/// Forward activations of one trunk pass: `acts[0]` is the input,
/// `acts[l + 1]` the rectified output of hidden layer `l`.
struct TrunkPass {
    acts: Vec<Vec<f64>>,
}

impl TrunkPass {
    fn features(&self) -> &[f64] {
        self.acts.last().expect("trunk has layers")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn trunk_forward(w: &[f64], in_dim: usize, hidden: &[usize], x: &[f64]) -> TrunkPass {
    let mut acts = Vec::with_capacity(hidden.len() + 1);
    acts.push(x.to_vec());
    let mut off = 0;
    let mut prev = in_dim;
    for &h in hidden {
        let input = acts.last().expect("nonempty");
        let bias = off + h * prev;
        let out: Vec<f64> = (0..h)
            .map(|o| {
                let z = dot(&w[off + o * prev..off + (o + 1) * prev], input) + w[bias + o];
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            })
            .collect();
        acts.push(out);
        off = bias + h;
        prev = h;
    }
    TrunkPass { acts }
}

/// Backpropagates `d_features` through the trunk, adding into `g`.
fn trunk_backward(w: &[f64], g: &mut [f64], in_dim: usize, hidden: &[usize], pass: &TrunkPass, d_features: Vec<f64>) {
    let mut offs = Vec::with_capacity(hidden.len());
    let mut off = 0;
    let mut prev = in_dim;
    for &h in hidden {
        offs.push((off, prev));
        off += h * prev + h;
        prev = h;
    }
    let mut delta = d_features;
    for l in (0..hidden.len()).rev() {
        let h = hidden[l];
        let (off, prev) = offs[l];
        let out = &pass.acts[l + 1];
        let input = &pass.acts[l];
        for (d, &o) in delta.iter_mut().zip(out) {
            if o <= 0.0 {
                *d = 0.0;
            }
        }
        let bias = off + h * prev;
        for o in 0..h {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            let row = &mut g[off + o * prev..off + (o + 1) * prev];
            for (gi, xi) in row.iter_mut().zip(input) {
                *gi += d * xi;
            }
            g[bias + o] += d;
        }
        if l > 0 {
            let mut next = vec![0.0; prev];
            for o in 0..h {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[off + o * prev..off + (o + 1) * prev];
                for (n, wi) in next.iter_mut().zip(row) {
                    *n += d * wi;
                }
            }
            delta = next;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let c = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    c.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Flat parameter vector plus the layout that gives it meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layout: ModelLayout,
    values: Vec<f64>,
}

struct PolicyValuePass {
    trunk: TrunkPass,
    out: Vec<f64>,
    value: f64,
}

struct ClassifierPass {
    s: TrunkPass,
    s_next: TrunkPass,
    logit: f64,
}

impl ModelParams {
    pub fn zeros(layout: ModelLayout) -> Self {
        let n = layout.param_count();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(layout: ModelLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.param_count() {
            return invalid(format!(
                "layout implies {} parameters, got {}",
                layout.param_count(),
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("parameters must be finite");
        }
        Ok(Self { layout, values })
    }

    /// Deterministic initialization: Glorot-uniform trunk weights with zero
    /// biases, a near-uniform initial policy, and a zero classifier head so
    /// every transition initially scores exactly 0.5.
    pub fn init(layout: ModelLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(layout);
        let off = p.layout.offsets();
        let hidden = p.layout.hidden.clone();
        let f = p.layout.feature_dim();
        let pw = p.layout.policy.width();
        let obs_dim = p.layout.obs_dim;

        let fill_trunk = |values: &mut [f64], base: usize, rng: &mut ChaCha8Rng| {
            let mut o = base;
            let mut prev = obs_dim;
            for &h in &hidden {
                let bound = (6.0 / (prev + h) as f64).sqrt();
                for v in &mut values[o..o + h * prev] {
                    *v = rng.random_range(-bound..bound);
                }
                o += h * prev + h;
                prev = h;
            }
        };
        fill_trunk(&mut p.values, off.trunk, &mut rng);
        if !p.layout.shared {
            fill_trunk(&mut p.values, off.clf_trunk, &mut rng);
        }
        let bound = (6.0 / (f + pw) as f64).sqrt() * 0.01;
        for v in &mut p.values[off.policy_w..off.policy_b] {
            *v = rng.random_range(-bound..bound);
        }
        let bound = (6.0 / (f + 1) as f64).sqrt();
        for v in &mut p.values[off.value_w..off.value_b] {
            *v = rng.random_range(-bound..bound);
        }
        p
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn log_std(&self) -> Option<&[f64]> {
        match self.layout.policy {
            PolicyHead::Gaussian { action_dim } => {
                let o = self.layout.offsets().log_std;
                Some(&self.values[o..o + action_dim])
            }
            PolicyHead::Categorical { .. } => None,
        }
    }

    fn check_obs(&self, s: &StateVec) -> Result<()> {
        if s.len() != self.layout.obs_dim {
            return invalid(format!(
                "observation has {} entries, model expects {}",
                s.len(),
                self.layout.obs_dim
            ));
        }
        Ok(())
    }

    fn pv_pass(&self, s: &StateVec) -> Result<PolicyValuePass> {
        self.check_obs(s)?;
        let off = self.layout.offsets();
        let trunk = trunk_forward(&self.values[off.trunk..], self.layout.obs_dim, &self.layout.hidden, s.as_slice());
        let phi = trunk.features();
        let f = phi.len();
        let out = (0..self.layout.policy.width())
            .map(|o| dot(&self.values[off.policy_w + o * f..off.policy_w + (o + 1) * f], phi) + self.values[off.policy_b + o])
            .collect();
        let value = dot(&self.values[off.value_w..off.value_b], phi) + self.values[off.value_b];
        Ok(PolicyValuePass { trunk, out, value })
    }

    /// Policy head output (logits, or Gaussian means) and the state value.
    pub fn policy_value(&self, s: &StateVec) -> Result<(Vec<f64>, f64)> {
        let pass = self.pv_pass(s)?;
        Ok((pass.out, pass.value))
    }

    fn clf_features(&self, s: &StateVec) -> TrunkPass {
        let off = self.layout.offsets();
        trunk_forward(&self.values[off.clf_trunk..], self.layout.obs_dim, &self.layout.hidden, s.as_slice())
    }

    fn clf_logit(&self, phi_s: &[f64], phi_next: &[f64]) -> f64 {
        let off = self.layout.offsets();
        let f = phi_s.len();
        dot(&self.values[off.clf_w..off.clf_w + f], phi_s)
            + dot(&self.values[off.clf_w + f..off.clf_b], phi_next)
            + self.values[off.clf_b]
    }

    fn clf_pass(&self, t: &Transition) -> Result<ClassifierPass> {
        self.check_obs(&t.s)?;
        self.check_obs(&t.s_next)?;
        let s = self.clf_features(&t.s);
        let s_next = self.clf_features(&t.s_next);
        let logit = self.clf_logit(s.features(), s_next.features());
        Ok(ClassifierPass { s, s_next, logit })
    }

    /// Estimated probability that the transition was produced by the expert.
    pub fn classify(&self, t: &Transition) -> Result<f64> {
        Ok(sigmoid(self.clf_pass(t)?.logit))
    }

    /// Scores `s -> next` for every candidate, computing `phi(s)` once.
    pub fn classify_candidates(&self, s: &StateVec, candidates: &[StateVec]) -> Result<Vec<f64>> {
        self.check_obs(s)?;
        let phi_s = self.clf_features(s);
        candidates
            .iter()
            .map(|n| {
                self.check_obs(n)?;
                let phi_n = self.clf_features(n);
                Ok(sigmoid(self.clf_logit(phi_s.features(), phi_n.features())))
            })
            .collect()
    }
}

/// Convenience constructor for a categorical-policy model.
pub fn init_params(seed: u64, obs_dim: usize, hidden: &[usize], n_actions: usize, shared: bool) -> Result<ModelParams> {
    let layout = ModelLayout::new(obs_dim, hidden.to_vec(), PolicyHead::Categorical { n_actions }, shared)?;
    Ok(ModelParams::init(layout, seed))
}

/// Per-head gradient buffers sharing the parameter layout.
///
/// `policy` holds the gradient of the policy objective (to be ascended);
/// `value` and `classifier` hold gradients of losses (to be descended).
#[derive(Debug, Clone, PartialEq)]
pub struct GradAccumulator {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
    pub classifier: Vec<f64>,
}

impl GradAccumulator {
    pub fn new(p: &ModelParams) -> Self {
        let n = p.values.len();
        Self {
            policy: vec![0.0; n],
            value: vec![0.0; n],
            classifier: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.policy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policy.is_empty()
    }

    pub fn reset(&mut self) {
        for buf in [&mut self.policy, &mut self.value, &mut self.classifier] {
            buf.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.policy.iter().chain(&self.value).chain(&self.classifier).all(|&x| x == 0.0)
    }

    /// Multiplies each head's buffer by its own factor.
    pub fn scale(&mut self, policy: f64, value: f64, classifier: f64) {
        for (buf, f) in [(&mut self.policy, policy), (&mut self.value, value), (&mut self.classifier, classifier)] {
            buf.iter_mut().for_each(|x| *x *= f);
        }
    }

    /// The combined update direction: policy ascent plus value and classifier descent.
    pub fn direction(&self) -> Vec<f64> {
        self.policy
            .iter()
            .zip(&self.value)
            .zip(&self.classifier)
            .map(|((p, v), c)| p - v - c)
            .collect()
    }

    fn check(&self, p: &ModelParams) -> Result<()> {
        if self.len() != p.values.len() {
            return invalid("gradient buffer does not match parameter layout");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyTerms {
    pub log_prob: f64,
    pub entropy: f64,
}

/// Adds `grad[log pi(a|s) * advantage + entropy_coef * H(pi(.|s))]` for a categorical policy.
pub fn accumulate_policy_grad(
    p: &ModelParams,
    g: &mut GradAccumulator,
    s: &StateVec,
    a: usize,
    advantage: f64,
    entropy_coef: f64,
) -> Result<PolicyTerms> {
    g.check(p)?;
    let PolicyHead::Categorical { n_actions } = p.layout.policy else {
        return invalid("categorical policy gradient requested for a Gaussian head");
    };
    if a >= n_actions {
        return invalid(format!("action {a} out of range for {n_actions} actions"));
    }
    let pass = p.pv_pass(s)?;
    let logp = log_softmax(&pass.out);
    let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let entropy = -probs.iter().zip(&logp).map(|(q, l)| q * l).sum::<f64>();
    let d_out: Vec<f64> = (0..n_actions)
        .map(|j| {
            let onehot = if j == a { 1.0 } else { 0.0 };
            advantage * (onehot - probs[j]) - entropy_coef * probs[j] * (logp[j] + entropy)
        })
        .collect();
    backprop_policy(p, &mut g.policy, &pass, &d_out);
    Ok(PolicyTerms {
        log_prob: logp[a],
        entropy,
    })
}

/// Gaussian counterpart of [`accumulate_policy_grad`] for a continuous action.
pub fn accumulate_gaussian_policy_grad(
    p: &ModelParams,
    g: &mut GradAccumulator,
    s: &StateVec,
    action: &[f64],
    advantage: f64,
    entropy_coef: f64,
) -> Result<PolicyTerms> {
    g.check(p)?;
    let PolicyHead::Gaussian { action_dim } = p.layout.policy else {
        return invalid("Gaussian policy gradient requested for a categorical head");
    };
    if action.len() != action_dim {
        return invalid(format!("action has {} entries, expected {action_dim}", action.len()));
    }
    let pass = p.pv_pass(s)?;
    let off = p.layout.offsets();
    let log_std = &p.values[off.log_std..off.log_std + action_dim];
    let mut log_prob = 0.0;
    let mut entropy = 0.0;
    let mut d_mean = vec![0.0; action_dim];
    for i in 0..action_dim {
        let sigma = log_std[i].exp();
        let z = (action[i] - pass.out[i]) / sigma;
        log_prob += -0.5 * z * z - log_std[i] - 0.5 * LN_2PI;
        entropy += log_std[i] + 0.5 * (1.0 + LN_2PI);
        d_mean[i] = advantage * z / sigma;
        g.policy[off.log_std + i] += advantage * (z * z - 1.0) + entropy_coef;
    }
    backprop_policy(p, &mut g.policy, &pass, &d_mean);
    Ok(PolicyTerms { log_prob, entropy })
}

fn backprop_policy(p: &ModelParams, g: &mut [f64], pass: &PolicyValuePass, d_out: &[f64]) {
    let off = p.layout.offsets();
    let phi = pass.trunk.features();
    let f = phi.len();
    let mut d_phi = vec![0.0; f];
    for (o, &d) in d_out.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let w = off.policy_w + o * f;
        for i in 0..f {
            g[w + i] += d * phi[i];
            d_phi[i] += d * p.values[w + i];
        }
        g[off.policy_b + o] += d;
    }
    trunk_backward(&p.values[off.trunk..], &mut g[off.trunk..], p.layout.obs_dim, &p.layout.hidden, &pass.trunk, d_phi);
}

/// Adds `grad[0.5 * (target - v(s))^2]`; returns that loss.
pub fn accumulate_value_grad(p: &ModelParams, g: &mut GradAccumulator, s: &StateVec, target: f64) -> Result<f64> {
    g.check(p)?;
    if !target.is_finite() {
        return invalid("value target must be finite");
    }
    let pass = p.pv_pass(s)?;
    let residual = pass.value - target;
    let off = p.layout.offsets();
    let phi = pass.trunk.features();
    let mut d_phi = vec![0.0; phi.len()];
    if residual != 0.0 {
        for (i, &x) in phi.iter().enumerate() {
            g.value[off.value_w + i] += residual * x;
            d_phi[i] = residual * p.values[off.value_w + i];
        }
        g.value[off.value_b] += residual;
        trunk_backward(&p.values[off.trunk..], &mut g.value[off.trunk..], p.layout.obs_dim, &p.layout.hidden, &pass.trunk, d_phi);
    }
    Ok(0.5 * residual * residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Agent,
    Expert,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Agent => 0.0,
            Label::Expert => 1.0,
        }
    }
}

/// Adds the gradient of binary cross-entropy for one labelled transition; returns the loss.
pub fn accumulate_classifier_grad(p: &ModelParams, g: &mut GradAccumulator, t: &Transition, label: Label) -> Result<f64> {
    g.check(p)?;
    let pass = p.clf_pass(t)?;
    let y = label.target();
    let loss = softplus(pass.logit) - y * pass.logit;
    // d(loss)/d(logit) without the clamp used for reported scores
    let d_logit = 1.0 / (1.0 + (-pass.logit).exp()) - y;
    let off = p.layout.offsets();
    let f = p.layout.feature_dim();
    let phi_s = pass.s.features();
    let phi_n = pass.s_next.features();
    let mut d_s = vec![0.0; f];
    let mut d_n = vec![0.0; f];
    for i in 0..f {
        g.classifier[off.clf_w + i] += d_logit * phi_s[i];
        g.classifier[off.clf_w + f + i] += d_logit * phi_n[i];
        d_s[i] = d_logit * p.values[off.clf_w + i];
        d_n[i] = d_logit * p.values[off.clf_w + f + i];
    }
    g.classifier[off.clf_b] += d_logit;
    let w = &p.values[off.clf_trunk..];
    let gt = &mut g.classifier[off.clf_trunk..];
    trunk_backward(w, gt, p.layout.obs_dim, &p.layout.hidden, &pass.s, d_s);
    trunk_backward(w, gt, p.layout.obs_dim, &p.layout.hidden, &pass.s_next, d_n);
    Ok(loss)
}

/// `p += lr * (policy - value - classifier)`, then resets `g`.
pub fn apply_grads(p: &mut ModelParams, g: &mut GradAccumulator, learning_rate: f64) -> Result<()> {
    apply_grads_clipped(p, g, learning_rate, 0.0).map(|_| ())
}

/// As [`apply_grads`], rescaling the combined direction to at most
/// `max_norm` in Euclidean norm when `max_norm > 0`. Returns the pre-clip norm.
pub fn apply_grads_clipped(p: &mut ModelParams, g: &mut GradAccumulator, learning_rate: f64, max_norm: f64) -> Result<f64> {
    g.check(p)?;
    let dir = g.direction();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if max_norm > 0.0 && norm > max_norm {
        learning_rate * max_norm / norm
    } else {
        learning_rate
    };
    if scale != 0.0 {
        for (v, d) in p.values.iter_mut().zip(&dir) {
            *v += scale * d;
        }
    }
    g.reset();
    Ok(norm)
}

/// Random small model plus inputs, gradients compared against central
/// differences. Returns the largest relative error over every parameter of
/// every head, for shared and separate trunks and both policy kinds.
pub fn grad_check(seed: u64, epsilon: f64) -> f64 {
    grad_check_with_fault(seed, epsilon, 0.0)
}

/// [`grad_check`] with the analytic gradients scaled by `1 + fault`.
#[doc(hidden)]
pub fn grad_check_with_fault(seed: u64, epsilon: f64, fault: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let variants = [
        (PolicyHead::Categorical { n_actions: 4 }, true),
        (PolicyHead::Categorical { n_actions: 4 }, false),
        (PolicyHead::Gaussian { action_dim: 2 }, true),
        (PolicyHead::Gaussian { action_dim: 2 }, false),
    ];
    for (i, (policy, shared)) in variants.into_iter().enumerate() {
        let layout = ModelLayout::new(8, vec![16, 16], policy, shared).expect("valid layout");
        let e = check_layout(layout, seed.wrapping_mul(4).wrapping_add(i as u64), epsilon, fault);
        worst = worst.max(e.max());
    }
    worst
}

/// Worst relative error per head.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeadErrors {
    pub policy: f64,
    pub value: f64,
    pub classifier: f64,
}

impl HeadErrors {
    pub fn max(&self) -> f64 {
        self.policy.max(self.value).max(self.classifier)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale <= 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Gradient check on a caller-chosen layout.
pub fn check_layout(layout: ModelLayout, seed: u64, epsilon: f64, fault: f64) -> HeadErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = layout.param_count();
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut p = ModelParams::from_values(layout, values).expect("finite values");
    let d = p.layout.obs_dim;
    let rand_state = |rng: &mut ChaCha8Rng| StateVec((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let s = rand_state(&mut rng);
    let t = Transition {
        s: rand_state(&mut rng),
        s_next: rand_state(&mut rng),
    };
    let advantage = rng.random_range(-2.0..2.0);
    let entropy_coef = rng.random_range(0.0..0.5);
    let target = rng.random_range(-2.0..2.0);
    let label = if rng.random_bool(0.5) { Label::Expert } else { Label::Agent };
    let policy = p.layout.policy;
    let action: Vec<f64> = (0..policy.width()).map(|_| rng.random_range(-1.5..1.5)).collect();
    let a = rng.random_range(0..policy.width());

    let policy_objective = |p: &ModelParams| -> f64 {
        let mut scratch = GradAccumulator::new(p);
        let terms = match policy {
            PolicyHead::Categorical { .. } => accumulate_policy_grad(p, &mut scratch, &s, a, advantage, entropy_coef),
            PolicyHead::Gaussian { .. } => accumulate_gaussian_policy_grad(p, &mut scratch, &s, &action, advantage, entropy_coef),
        }
        .expect("dimensions match");
        terms.log_prob * advantage + entropy_coef * terms.entropy
    };
    let value_loss = |p: &ModelParams| {
        let v = p.policy_value(&s).expect("dimensions match").1;
        0.5 * (target - v) * (target - v)
    };
    let clf_loss = |p: &ModelParams| {
        let c_logit = p.clf_pass(&t).expect("dimensions match").logit;
        softplus(c_logit) - label.target() * c_logit
    };

    let mut g = GradAccumulator::new(&p);
    match policy {
        PolicyHead::Categorical { .. } => accumulate_policy_grad(&p, &mut g, &s, a, advantage, entropy_coef),
        PolicyHead::Gaussian { .. } => accumulate_gaussian_policy_grad(&p, &mut g, &s, &action, advantage, entropy_coef),
    }
    .expect("dimensions match");
    accumulate_value_grad(&p, &mut g, &s, target).expect("dimensions match");
    accumulate_classifier_grad(&p, &mut g, &t, label).expect("dimensions match");

    let mut errs = HeadErrors::default();
    for i in 0..n {
        let orig = p.values[i];
        p.values[i] = orig + epsilon;
        let plus = (policy_objective(&p), value_loss(&p), clf_loss(&p));
        p.values[i] = orig - epsilon;
        let minus = (policy_objective(&p), value_loss(&p), clf_loss(&p));
        p.values[i] = orig;
        let num = (
            (plus.0 - minus.0) / (2.0 * epsilon),
            (plus.1 - minus.1) / (2.0 * epsilon),
            (plus.2 - minus.2) / (2.0 * epsilon),
        );
        let k = 1.0 + fault;
        errs.policy = errs.policy.max(relative_error(g.policy[i] * k, num.0));
        errs.value = errs.value.max(relative_error(g.value[i] * k, num.1));
        errs.classifier = errs.classifier.max(relative_error(g.classifier[i] * k, num.2));
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(shared: bool) -> ModelLayout {
        ModelLayout::new(3, vec![5, 4], PolicyHead::Categorical { n_actions: 3 }, shared).unwrap()
    }

    fn random_params(layout: ModelLayout, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = layout.param_count();
        ModelParams::from_values(layout, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn state(v: &[f64]) -> StateVec {
        StateVec(v.to_vec())
    }

    /// Independent forward pass: explicit matrices, no shared helpers.
    fn naive_forward(p: &ModelParams, x: &[f64], trunk_base: usize) -> Vec<f64> {
        let l = p.layout();
        let v = p.values();
        let mut h: Vec<f64> = x.to_vec();
        let mut base = trunk_base;
        for &width in &l.hidden {
            let mut w = vec![vec![0.0; h.len()]; width];
            for (o, row) in w.iter_mut().enumerate() {
                for (i, cell) in row.iter_mut().enumerate() {
                    *cell = v[base + o * h.len() + i];
                }
            }
            let b = &v[base + width * h.len()..base + width * h.len() + width];
            let next: Vec<f64> = (0..width)
                .map(|o| {
                    let mut z = b[o];
                    for i in 0..h.len() {
                        z += w[o][i] * h[i];
                    }
                    z.max(0.0)
                })
                .collect();
            base += width * h.len() + width;
            h = next;
        }
        h
    }

    fn trunk_size(l: &ModelLayout) -> usize {
        let mut prev = l.obs_dim;
        let mut n = 0;
        for &h in &l.hidden {
            n += h * prev + h;
            prev = h;
        }
        n
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(7, 2, &[64, 64], 4, true).unwrap();
        let b = init_params(7, 2, &[64, 64], 4, true).unwrap();
        assert_eq!(a, b);
        let c = init_params(8, 2, &[64, 64], 4, true).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn separate_trunk_costs_exactly_one_trunk() {
        let shared = layout(true);
        let separate = layout(false);
        assert_eq!(separate.param_count() - shared.param_count(), trunk_size(&shared));
        assert!(shared.param_count() < separate.param_count());
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let p = init_params(1, 2, &[64, 64], 4, true).unwrap();
        let v = p.values();
        let b1 = (6.0f64 / 66.0).sqrt();
        assert!(v[..128].iter().all(|w| w.abs() <= b1));
        assert!(v[128..192].iter().all(|&b| b == 0.0));
        let t = Transition { s: state(&[0.1, 0.9]), s_next: state(&[0.3, 0.2]) };
        assert_eq!(p.classify(&t).unwrap(), 0.5);
    }

    #[test]
    fn zero_params_uniform_policy() {
        let p = ModelParams::zeros(layout(true));
        let (logits, v) = p.policy_value(&state(&[0.3, -0.2, 1.0])).unwrap();
        assert_eq!(v, 0.0);
        let probs = softmax(&logits);
        for q in probs {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
        let t = Transition { s: state(&[1.0, 2.0, 3.0]), s_next: state(&[-1.0, 0.0, 5.0]) };
        assert_eq!(p.classify(&t).unwrap(), 0.5);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for seed in 0..20 {
            for shared in [true, false] {
                let p = random_params(layout(shared), seed);
                let l = p.layout().clone();
                let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (logits, value) = p.policy_value(&state(&x)).unwrap();
                let phi = naive_forward(&p, &x, 0);
                let f = phi.len();
                let ts = trunk_size(&l);
                let v = p.values();
                for o in 0..3 {
                    let mut z = v[ts + 3 * f + o];
                    for i in 0..f {
                        z += v[ts + o * f + i] * phi[i];
                    }
                    assert!((z - logits[o]).abs() < 1e-12);
                }
                let vw = ts + 3 * f + 3;
                let mut val = v[vw + f];
                for i in 0..f {
                    val += v[vw + i] * phi[i];
                }
                assert!((val - value).abs() < 1e-12);
                let probs = softmax(&logits);
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

                let clf_base = if shared { 0 } else { vw + f + 1 };
                let cw = vw + f + 1 + if shared { 0 } else { ts };
                let ps = naive_forward(&p, &x, clf_base);
                let pn = naive_forward(&p, &y, clf_base);
                let mut z = v[cw + 2 * f];
                for i in 0..f {
                    z += v[cw + i] * ps[i] + v[cw + f + i] * pn[i];
                }
                let expect = 1.0 / (1.0 + (-z).exp());
                let got = p.classify(&Transition { s: state(&x), s_next: state(&y) }).unwrap();
                assert!((got - expect).abs() < 1e-12);
                assert!(got > 0.0 && got < 1.0);
            }
        }
    }

    #[test]
    fn classifier_output_strictly_inside_unit_interval() {
        let mut p = random_params(layout(true), 3);
        let off = p.layout().offsets();
        p.values_mut()[off.clf_b] = 1e4;
        let t = Transition { s: state(&[0.0; 3]), s_next: state(&[0.0; 3]) };
        let c = p.classify(&t).unwrap();
        assert!(c < 1.0 && c > 0.0);
        p.values_mut()[off.clf_b] = -1e4;
        let c = p.classify(&t).unwrap();
        assert!(c < 1.0 && c > 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = random_params(layout(true), 0);
        assert!(p.policy_value(&state(&[1.0])).is_err());
        let t = Transition { s: state(&[1.0, 2.0]), s_next: state(&[1.0, 2.0]) };
        assert!(p.classify(&t).is_err());
    }

    #[test]
    fn zero_advantage_zero_entropy_leaves_grad_unchanged() {
        let p = random_params(layout(true), 4);
        let mut g = GradAccumulator::new(&p);
        accumulate_policy_grad(&p, &mut g, &state(&[0.1, 0.2, 0.3]), 1, 0.0, 0.0).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn uniform_policy_has_stationary_entropy() {
        let l = layout(true);
        let mut p = random_params(l, 5);
        let off = p.layout().offsets();
        for v in &mut p.values_mut()[off.policy_w..off.log_std] {
            *v = 0.0;
        }
        let mut g = GradAccumulator::new(&p);
        accumulate_policy_grad(&p, &mut g, &state(&[0.5, -0.5, 0.25]), 0, 0.0, 0.3).unwrap();
        assert!(g.policy.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn value_grad_vanishes_at_target() {
        let p = random_params(layout(true), 6);
        let s = state(&[0.2, 0.4, -0.6]);
        let v = p.policy_value(&s).unwrap().1;
        let mut g = GradAccumulator::new(&p);
        let loss = accumulate_value_grad(&p, &mut g, &s, v).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn accumulation_is_additive() {
        let p = random_params(layout(false), 9);
        let s1 = state(&[0.2, 0.4, -0.6]);
        let s2 = state(&[-0.3, 0.1, 0.9]);
        let t = Transition { s: s1.clone(), s_next: s2.clone() };
        let mut both = GradAccumulator::new(&p);
        accumulate_value_grad(&p, &mut both, &s1, 1.5).unwrap();
        accumulate_value_grad(&p, &mut both, &s2, -0.5).unwrap();
        accumulate_classifier_grad(&p, &mut both, &t, Label::Expert).unwrap();
        accumulate_policy_grad(&p, &mut both, &s1, 2, 0.7, 0.01).unwrap();
        let mut a = GradAccumulator::new(&p);
        accumulate_value_grad(&p, &mut a, &s1, 1.5).unwrap();
        let mut b = GradAccumulator::new(&p);
        accumulate_value_grad(&p, &mut b, &s2, -0.5).unwrap();
        let mut c = GradAccumulator::new(&p);
        accumulate_classifier_grad(&p, &mut c, &t, Label::Expert).unwrap();
        let mut d = GradAccumulator::new(&p);
        accumulate_policy_grad(&p, &mut d, &s1, 2, 0.7, 0.01).unwrap();
        for i in 0..p.values().len() {
            assert_eq!(both.value[i], a.value[i] + b.value[i]);
            assert_eq!(both.classifier[i], c.classifier[i]);
            assert_eq!(both.policy[i], d.policy[i]);
        }
    }

    #[test]
    fn bce_logit_gradient_at_half() {
        // a zero classifier head gives c = 0.5; the bias slot carries dL/dlogit directly
        let p = ModelParams::zeros(layout(true));
        let off = p.layout().offsets();
        let t = Transition { s: state(&[0.1, 0.2, 0.3]), s_next: state(&[0.3, 0.2, 0.1]) };
        for label in [Label::Agent, Label::Expert] {
            let mut g = GradAccumulator::new(&p);
            let loss = accumulate_classifier_grad(&p, &mut g, &t, label).unwrap();
            assert!((g.classifier[off.clf_b].abs() - 0.5).abs() < 1e-15);
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        }
        let mut g = GradAccumulator::new(&p);
        accumulate_classifier_grad(&p, &mut g, &t, Label::Agent).unwrap();
        accumulate_classifier_grad(&p, &mut g, &t, Label::Expert).unwrap();
        assert_eq!(g.classifier[off.clf_b], 0.0);
    }

    #[test]
    fn apply_with_zero_rate_or_zero_grad_is_noop() {
        let mut p = random_params(layout(true), 10);
        let before = p.clone();
        let mut g = GradAccumulator::new(&p);
        accumulate_value_grad(&p, &mut g, &state(&[1.0, 1.0, 1.0]), 3.0).unwrap();
        apply_grads(&mut p, &mut g, 0.0).unwrap();
        assert_eq!(p, before);
        assert!(g.is_zero());
        apply_grads(&mut p, &mut g, 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn value_step_reduces_loss() {
        let mut p = random_params(layout(true), 11);
        let s = state(&[0.5, -0.25, 0.75]);
        let target = 2.0;
        let mut g = GradAccumulator::new(&p);
        let before = accumulate_value_grad(&p, &mut g, &s, target).unwrap();
        apply_grads(&mut p, &mut g, 1e-3).unwrap();
        let v = p.policy_value(&s).unwrap().1;
        let after = 0.5 * (target - v) * (target - v);
        assert!(after < before, "{after} >= {before}");
    }

    #[test]
    fn clipping_bounds_step() {
        let mut p = random_params(layout(true), 12);
        let before = p.clone();
        let mut g = GradAccumulator::new(&p);
        accumulate_value_grad(&p, &mut g, &state(&[1.0, 1.0, 1.0]), 100.0).unwrap();
        let norm = apply_grads_clipped(&mut p, &mut g, 1.0, 0.5).unwrap();
        assert!(norm > 0.5);
        let step: f64 = p.values().iter().zip(before.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((step - 0.5).abs() < 1e-9);
    }

    #[test]
    fn finite_difference_agreement() {
        for seed in 0..5 {
            for shared in [true, false] {
                let errs = check_layout(layout(shared), seed, 1e-5, 0.0);
                assert!(errs.max() < 1e-4, "seed {seed} shared {shared}: {errs:?}");
            }
        }
    }

    #[test]
    fn grad_check_is_deterministic_and_detects_faults() {
        let a = grad_check(3, 1e-5);
        assert_eq!(a, grad_check(3, 1e-5));
        assert!(a < 1e-4);
        let broken = grad_check_with_fault(3, 1e-5, 0.01);
        assert!(broken > 1e-3, "perturbed gradient went unnoticed: {broken}");
    }

    #[test]
    fn gaussian_policy_shapes() {
        let l = ModelLayout::new(4, vec![8], PolicyHead::Gaussian { action_dim: 2 }, true).unwrap();
        let p = ModelParams::init(l, 0);
        assert_eq!(p.log_std().unwrap(), &[0.0, 0.0]);
        let mut g = GradAccumulator::new(&p);
        assert!(accumulate_policy_grad(&p, &mut g, &state(&[0.0; 4]), 0, 1.0, 0.0).is_err());
        assert!(accumulate_gaussian_policy_grad(&p, &mut g, &state(&[0.0; 4]), &[0.1], 1.0, 0.0).is_err());
    }
}

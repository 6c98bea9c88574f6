use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LossSpec, Network, NnError, Target};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Check at most this many entries per tensor (chosen by `seed`);
    /// `None` checks every entry.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
    /// Also check the gradient with respect to the input.
    pub check_input: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-4, max_per_tensor: None, seed: 0, check_input: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Where the worst error occurred, e.g. `param 2 [17]` or `input [3]`.
    pub worst_at: String,
    pub checked: usize,
}

/// |g_a − g_n| / max(|g_a|, |g_n|, 1e-8).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn loss_at(net: &Network<f64>, loss: &LossSpec, input: &[f64], target: Target) -> Result<f64, NnError> {
    Ok(loss.evaluate(&net.forward(input)?, target)?.0)
}

/// Backprop gradients: one vector per parameter tensor, then the input's.
pub fn analytic_gradients(
    net: &Network<f64>,
    loss: &LossSpec,
    input: &[f64],
    target: Target,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), NnError> {
    let mut net = net.clone();
    net.zero_grad();
    let trace = net.forward_trace(input)?;
    let (_, g) = loss.evaluate(trace.output(), target)?;
    let gin = net.backward(&trace, &g);
    let params = net.params.iter().map(|p| p.grad.clone().expect("zeroed")).collect();
    Ok((params, gin))
}

/// Central-difference check of every (or a sample of every) parameter and
/// input gradient, in double precision. Returns the largest relative error.
pub fn grad_check(
    net: &Network<f64>,
    loss: &LossSpec,
    input: &[f64],
    target: Target,
    opts: &GradCheckOptions,
) -> Result<GradCheck, NnError> {
    let (param_grads, input_grad) = analytic_gradients(net, loss, input, target)?;
    check_against(net, loss, input, target, opts, &param_grads, &input_grad)
}

/// Compares supplied analytic gradients with central differences.
pub fn check_against(
    net: &Network<f64>,
    loss: &LossSpec,
    input: &[f64],
    target: Target,
    opts: &GradCheckOptions,
    param_grads: &[Vec<f64>],
    input_grad: &[f64],
) -> Result<GradCheck, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pick = |n: usize| -> Vec<usize> {
        match opts.max_per_tensor {
            Some(k) if k < n => {
                let mut v = index::sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        }
    };
    let h = opts.h;
    let mut report = GradCheck { max_rel_error: 0.0, worst_at: String::new(), checked: 0 };
    let record = |err: f64, at: String, report: &mut GradCheck| {
        report.checked += 1;
        if err > report.max_rel_error || report.worst_at.is_empty() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_at = at;
        }
    };

    let mut probe = net.clone();
    for t in 0..net.params.len() {
        for i in pick(net.params[t].len()) {
            let orig = probe.params[t].data[i];
            probe.params[t].data[i] = orig + h;
            let plus = loss_at(&probe, loss, input, target)?;
            probe.params[t].data[i] = orig - h;
            let minus = loss_at(&probe, loss, input, target)?;
            probe.params[t].data[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            record(relative_error(param_grads[t][i], numeric), format!("param {t} [{i}]"), &mut report);
        }
    }
    if opts.check_input {
        let mut x = input.to_vec();
        for i in pick(input.len()) {
            let orig = x[i];
            x[i] = orig + h;
            let plus = loss_at(net, loss, &x, target)?;
            x[i] = orig - h;
            let minus = loss_at(net, loss, &x, target)?;
            x[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            record(relative_error(input_grad[i], numeric), format!("input [{i}]"), &mut report);
        }
    }
    Ok(report)
}

use super::mlp::{Mlp, OutputActivation};
use crate::error::{BiclError, Result};

/// Scalar loss applied to a network's output for gradient checking.
#[derive(Clone, Debug, PartialEq)]
pub enum LossTag {
    /// `0.5 * ||output - target||^2`
    Quadratic { target: Vec<f64> },
    /// `-ln p[label]` on a softmax head, differentiated with the fused gradient.
    SoftmaxCrossEntropy { label: usize },
}

fn loss(net: &Mlp, input: &[f64], tag: &LossTag) -> Result<f64> {
    let out = net.forward(input)?;
    Ok(match tag {
        LossTag::Quadratic { target } => {
            0.5 * out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
        }
        LossTag::SoftmaxCrossEntropy { label } => -out[*label].ln(),
    })
}

/// Largest `|analytic - numeric| / max(1, |analytic| + |numeric|)` over all
/// parameters, using central differences with step `1e-5`.
pub fn gradient_check(net: &Mlp, input: &[f64], tag: &LossTag) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let trace = net.trace(input, None)?;
    let mut grads = net.zero_grads();
    match tag {
        LossTag::Quadratic { target } => {
            if target.len() != net.output_len() {
                return Err(BiclError::Contract("target length does not match output".into()));
            }
            let up: Vec<f64> = trace.output.iter().zip(target).map(|(o, t)| o - t).collect();
            net.backward(&trace, &up, &mut grads)?;
        }
        LossTag::SoftmaxCrossEntropy { label } => {
            if net.output_activation() != OutputActivation::Softmax || *label >= net.output_len() {
                return Err(BiclError::Contract("cross-entropy needs a softmax head and valid label".into()));
            }
            let mut dlogits = trace.output.clone();
            dlogits[*label] -= 1.0;
            net.backward_logits(&trace, &dlogits, &mut grads)?;
        }
    }
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut probe = net.clone();
    let mut worst = 0.0_f64;
    for (idx, a) in analytic.iter().enumerate() {
        let original = *probe.parameter_mut(idx).expect("index in range");
        *probe.parameter_mut(idx).expect("index in range") = original + STEP;
        let up = loss(&probe, input, tag)?;
        *probe.parameter_mut(idx).expect("index in range") = original - STEP;
        let down = loss(&probe, input, tag)?;
        *probe.parameter_mut(idx).expect("index in range") = original;
        let numeric = (up - down) / (2.0 * STEP);
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

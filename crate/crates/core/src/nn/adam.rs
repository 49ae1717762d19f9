use super::mlp::{Gradients, Mlp};
use crate::error::{BiclError, Result};

/// Adam optimizer state for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: net.zero_grads(),
            second: net.zero_grads(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One descent step along `grads` (gradients of a loss to minimize).
    pub fn apply_update(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(BiclError::Numerical("non-finite gradient".into()));
        }
        if grads.layers.len() != net.layers().len()
            || grads
                .layers
                .iter()
                .zip(net.layers())
                .any(|(g, l)| g.weights.len() != l.weights.len() || g.bias.len() != l.bias.len())
        {
            return Err(BiclError::Contract("gradient shape does not match network".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let layers = net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.first.layers.iter_mut().zip(self.second.layers.iter_mut()));
        for ((layer, g), (m, v)) in layers {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(g.bias.iter());
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                *p -= update;
            }
        }
        if net.parameters().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(BiclError::Numerical("parameters became non-finite".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;

    fn scalar_net(w: f64) -> Mlp {
        let mut net = Mlp::zeros(&[1, 1], OutputActivation::Identity).unwrap();
        net.layers_mut()[0].weights[0] = w;
        net
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(0.7);
        let before = net.clone();
        let mut opt = Adam::new(&net, 0.1);
        opt.apply_update(&mut net, &before.zero_grads()).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn one_step_on_square_shrinks_weight() {
        // loss w^2 at w = 1 has gradient 2; the first Adam step moves by ~lr
        let mut net = scalar_net(1.0);
        let mut opt = Adam::new(&net, 0.1);
        let mut g = net.zero_grads();
        g.layers[0].weights[0] = 2.0;
        opt.apply_update(&mut net, &g).unwrap();
        let w = net.layers()[0].weights[0];
        assert!(w.abs() < 1.0);
        assert!((w - 0.9).abs() < 1e-6);
    }

    #[test]
    fn deterministic_and_rejects_nan() {
        let mut a = scalar_net(0.3);
        let mut b = scalar_net(0.3);
        let mut oa = Adam::new(&a, 0.01);
        let mut ob = Adam::new(&b, 0.01);
        let mut g = a.zero_grads();
        g.layers[0].weights[0] = -0.4;
        g.layers[0].bias[0] = 0.2;
        oa.apply_update(&mut a, &g).unwrap();
        ob.apply_update(&mut b, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        g.layers[0].bias[0] = f64::NAN;
        assert!(matches!(oa.apply_update(&mut a, &g), Err(BiclError::Numerical(_))));
    }
}

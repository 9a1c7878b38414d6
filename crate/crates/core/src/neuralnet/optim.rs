use super::network::{Gradients, Network};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Momentum buffers, one per parameter, plus the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState<T = f32> {
    pub velocity: Vec<Tensor<T>>,
    pub step: usize,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(net: &Network<T>) -> Self {
        Self { velocity: net.params().iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect(), step: 0 }
    }
}

/// Classic momentum: `v = mu * v + g; p = p - lr * v`. A non-finite gradient
/// aborts before anything is modified.
pub fn sgd_step<T: Scalar>(
    net: &mut Network<T>,
    grads: &Gradients<T>,
    lr: T,
    momentum: T,
    state: &mut SgdState<T>,
) -> Result<()> {
    if grads.len() != net.params().len() || state.velocity.len() != grads.len() {
        return Err(Error::Training { step: state.step, detail: "gradient list does not match parameters".into() });
    }
    for (i, (g, p)) in grads.iter().zip(net.params()).enumerate() {
        if g.shape() != p.value.shape() || state.velocity[i].shape() != g.shape() {
            return Err(Error::Training {
                step: state.step,
                detail: format!("gradient shape {:?} does not match `{}` {:?}", g.shape(), p.name, p.value.shape()),
            });
        }
        if !g.is_finite() {
            return Err(Error::Training { step: state.step, detail: format!("non-finite gradient for `{}`", p.name) });
        }
    }
    for (i, g) in grads.iter().enumerate() {
        let v = state.velocity[i].data_mut();
        for (vv, &gv) in v.iter_mut().zip(g.data()) {
            *vv = momentum * *vv + gv;
        }
        let v = state.velocity[i].data();
        let p = net.param_mut(i);
        for (pv, &vv) in p.data_mut().iter_mut().zip(v) {
            *pv = *pv - lr * vv;
        }
    }
    state.step += 1;
    Ok(())
}

//! Loss values and parameter gradients for the alternating optimization:
//! WGAN-GP critic loss, generator loss, and the encoder reconstruction losses
//! d_I (image space) and d_z (latent space).

use crate::dual::Dual;
use crate::model::{Discriminator, Encoder, Generator, Phase};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::EncoderMode;

/// Anything usable as a Wasserstein critic: batched scores and input gradients.
pub trait Critic<T: Scalar> {
    /// One score per batch item.
    fn scores(&self, x: &Tensor<T>) -> Vec<T>;
    /// `∇_x` of each item's score, same shape as `x`.
    fn input_gradients(&self, x: &Tensor<T>) -> Tensor<T>;
}

/// A discriminator evaluated at a fixed growth phase.
pub struct PhasedCritic<'a, T> {
    pub net: &'a Discriminator<T>,
    pub phase: Phase,
}

impl<T: Scalar> Critic<T> for PhasedCritic<'_, T> {
    fn scores(&self, x: &Tensor<T>) -> Vec<T> {
        self.net.forward(x, self.phase).into_data()
    }

    fn input_gradients(&self, x: &Tensor<T>) -> Tensor<T> {
        let (out, tr) = self.net.forward_traced(x, self.phase);
        let ones = Tensor::filled(out.shape(), T::one());
        let mut scratch = self.net.zeros_like();
        self.net.backward(&tr, &ones, &mut scratch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticLoss<T> {
    /// `−(mean 𝒟(X) − mean 𝒟(𝒢(z))) + λ·GP`
    pub loss: T,
    /// `mean 𝒟(X) − mean 𝒟(𝒢(z))`
    pub wasserstein: T,
    /// `mean (‖∇𝒟(x̂)‖₂ − 1)²`
    pub gradient_penalty: T,
}

/// Random interpolates `ε·real + (1−ε)·fake`, one ε per batch item.
pub fn interpolate<T: Scalar>(real: &Tensor<T>, fake: &Tensor<T>, eps: &[T]) -> Tensor<T> {
    assert_eq!(real.shape(), fake.shape(), "real/fake batch shape");
    assert_eq!(eps.len(), real.batch(), "one ε per batch item");
    let mut out = real.clone();
    for (b, &e) in eps.iter().enumerate() {
        let f = fake.item(b);
        for (o, &fv) in out.item_mut(b).iter_mut().zip(f) {
            *o = e * *o + (T::one() - e) * fv;
        }
    }
    out
}

/// Per-item ℓ2 norms of a batched tensor.
pub fn item_norms<T: Scalar>(t: &Tensor<T>) -> Vec<T> {
    (0..t.batch()).map(|b| t.item(b).iter().map(|&v| v * v).sum::<T>().sqrt()).collect()
}

/// `mean_i (‖g_i‖ − 1)²` from per-item gradient norms.
pub fn gradient_penalty<T: Scalar>(norms: &[T]) -> T {
    let n = T::lit(norms.len() as f64);
    norms.iter().map(|&g| (g - T::one()) * (g - T::one())).sum::<T>() / n
}

/// Critic loss value for any critic; `fake` is 𝒢(z), `eps` the interpolation weights.
pub fn critic_objective<T: Scalar, C: Critic<T>>(
    critic: &C,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    eps: &[T],
    gp_weight: T,
) -> CriticLoss<T> {
    let n = T::lit(real.batch() as f64);
    let sr: T = critic.scores(real).into_iter().sum::<T>() / n;
    let sf: T = critic.scores(fake).into_iter().sum::<T>() / n;
    let wasserstein = sr - sf;
    let xh = interpolate(real, fake, eps);
    let gp = gradient_penalty(&item_norms(&critic.input_gradients(&xh)));
    CriticLoss { loss: -wasserstein + gp_weight * gp, wasserstein, gradient_penalty: gp }
}

/// Critic loss and its gradient with respect to θ_D.
///
/// The penalty term needs `∂/∂θ ‖∇_x 𝒟(x̂)‖`. Writing `g = ∇_x 𝒟(x̂)`, its
/// contribution is `Σ_i (∂g_i/∂θ)ᵀ c_i` with `c_i = (2λ/n)(‖g_i‖−1)·g_i/‖g_i‖`,
/// which equals the derivative along `t` of `∇_θ Σ_i 𝒟(x̂_i + t·c_i)`. That is
/// obtained by one backward pass in dual numbers with input tangents `c_i`.
pub fn critic_loss_and_grad<T: Scalar>(
    disc: &Discriminator<T>,
    phase: Phase,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    eps: &[T],
    gp_weight: T,
) -> (CriticLoss<T>, Discriminator<T>) {
    let n = real.batch();
    let inv_n = T::lit(1.0 / n as f64);
    let mut grad = disc.zeros_like();

    let (sr, tr_r) = disc.forward_traced(real, phase);
    disc.backward(&tr_r, &Tensor::filled(sr.shape(), -inv_n), &mut grad);
    let (sf, tr_f) = disc.forward_traced(fake, phase);
    disc.backward(&tr_f, &Tensor::filled(sf.shape(), inv_n), &mut grad);
    let wasserstein = (sr.data().iter().copied().sum::<T>() - sf.data().iter().copied().sum::<T>()) * inv_n;

    let xh = interpolate(real, fake, eps);
    let g = PhasedCritic { net: disc, phase }.input_gradients(&xh);
    let norms = item_norms(&g);
    let gp = gradient_penalty(&norms);

    let scale = T::lit(2.0) * gp_weight * inv_n;
    let mut tangent = g;
    for (b, &nrm) in norms.iter().enumerate() {
        let c = if nrm > T::zero() { scale * (nrm - T::one()) / nrm } else { T::zero() };
        tangent.item_mut(b).iter_mut().for_each(|v| *v *= c);
    }
    let dual_net = disc.map(Dual::constant);
    let dual_x = Tensor::from_vec(
        xh.shape(),
        xh.data().iter().zip(tangent.data()).map(|(&x, &t)| Dual::new(x, t)).collect(),
    )
    .expect("same shape");
    let (out, tr) = dual_net.forward_traced(&dual_x, phase);
    let mut dual_grad = dual_net.zeros_like();
    dual_net.backward(&tr, &Tensor::filled(out.shape(), Dual::constant(T::one())), &mut dual_grad);
    for (dst, src) in grad.params_mut().into_iter().zip(dual_grad.named_params()) {
        for (d, s) in dst.data_mut().iter_mut().zip(src.1.data()) {
            *d += s.eps;
        }
    }

    let loss = CriticLoss { loss: -wasserstein + gp_weight * gp, wasserstein, gradient_penalty: gp };
    (loss, grad)
}

/// `mean |a − b|` over all elements.
pub fn l1_mean<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "l1 operands");
    let n = T::lit(a.len() as f64);
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<T>() / n
}

/// `∂/∂a mean|a − b|` (the gradient with respect to `b` is its negation).
fn l1_mean_grad<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let inv = T::lit(1.0 / a.len() as f64);
    a.zip_map(b, |x, y| {
        if x > y {
            inv
        } else if x < y {
            -inv
        } else {
            T::zero()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenEncLoss<T> {
    /// `−mean 𝒟(𝒢(z))`
    pub generator: T,
    /// d_I or d_z (element means); zero when the encoder is not trained jointly.
    pub encoder: T,
}

/// d_I: `mean |𝒢(z) − 𝒢(ℰ(𝒢(z)))|` for any generator and encoder maps.
pub fn image_reconstruction_loss<T: Scalar>(
    gen: impl Fn(&Tensor<T>) -> Tensor<T>,
    enc: impl Fn(&Tensor<T>) -> Tensor<T>,
    z: &Tensor<T>,
) -> T {
    let x = gen(z);
    let x2 = gen(&enc(&x));
    l1_mean(x.data(), x2.data())
}

/// d_z: `mean |z − ℰ(𝒢(z))|` for any generator and encoder maps.
pub fn latent_reconstruction_loss<T: Scalar>(
    gen: impl Fn(&Tensor<T>) -> Tensor<T>,
    enc: impl Fn(&Tensor<T>) -> Tensor<T>,
    z: &Tensor<T>,
) -> T {
    l1_mean(z.data(), enc(&gen(z)).data())
}

/// Generator and joint-encoder loss values, computed by plain forward passes.
pub fn generator_encoder_objective<T: Scalar>(
    gen: &Generator<T>,
    disc: &Discriminator<T>,
    enc: &Encoder<T>,
    phase: Phase,
    z: &Tensor<T>,
    mode: EncoderMode,
) -> GenEncLoss<T> {
    let n = T::lit(z.batch() as f64);
    let generator = -disc.forward(&gen.forward(z, phase), phase).data().iter().copied().sum::<T>() / n;
    let g = |t: &Tensor<T>| gen.forward(t, phase);
    let e = |t: &Tensor<T>| enc.forward(t, phase);
    let encoder = match mode {
        EncoderMode::JointImageSpace => image_reconstruction_loss(g, e, z),
        EncoderMode::JointLatentSpace => latent_reconstruction_loss(g, e, z),
        EncoderMode::PostHoc => T::zero(),
    };
    GenEncLoss { generator, encoder }
}

/// Gradients of `−mean 𝒟(𝒢(z)) + encoder loss` with respect to θ_G and θ_E.
///
/// With `stop_inner` the encoder loss does not propagate into the inner 𝒢(z).
pub fn generator_encoder_grads<T: Scalar>(
    gen: &Generator<T>,
    disc: &Discriminator<T>,
    enc: &Encoder<T>,
    phase: Phase,
    z: &Tensor<T>,
    mode: EncoderMode,
    stop_inner: bool,
) -> (GenEncLoss<T>, Generator<T>, Encoder<T>) {
    let n = z.batch();
    let inv_n = T::lit(1.0 / n as f64);
    let mut g_gen = gen.zeros_like();
    let mut g_enc = enc.zeros_like();

    let (x1, tr_g1) = gen.forward_traced(z, phase);
    let (d, tr_d) = disc.forward_traced(&x1, phase);
    let generator = -d.data().iter().copied().sum::<T>() * inv_n;
    let mut scratch = disc.zeros_like();
    let mut dx1 = disc.backward(&tr_d, &Tensor::filled(d.shape(), -inv_n), &mut scratch);

    let encoder = match mode {
        EncoderMode::JointImageSpace => {
            let (zh, tr_e) = enc.forward_traced(&x1, phase);
            let (x2, tr_g2) = gen.forward_traced(&zh, phase);
            let loss = l1_mean(x1.data(), x2.data());
            let s = l1_mean_grad(&x1, &x2);
            let mut dx2 = s.clone();
            dx2.scale(-T::one());
            let dzh = gen.backward(&tr_g2, &dx2, &mut g_gen);
            let dx1_enc = enc.backward(&tr_e, &dzh, &mut g_enc);
            if !stop_inner {
                dx1.add_assign(&s);
                dx1.add_assign(&dx1_enc);
            }
            loss
        }
        EncoderMode::JointLatentSpace => {
            let (zh, tr_e) = enc.forward_traced(&x1, phase);
            let loss = l1_mean(z.data(), zh.data());
            let mut dzh = l1_mean_grad(z, &zh);
            dzh.scale(-T::one());
            let dx1_enc = enc.backward(&tr_e, &dzh, &mut g_enc);
            if !stop_inner {
                dx1.add_assign(&dx1_enc);
            }
            loss
        }
        EncoderMode::PostHoc => T::zero(),
    };
    gen.backward(&tr_g1, &dx1, &mut g_gen);
    (GenEncLoss { generator, encoder }, g_gen, g_enc)
}

/// d_I and its gradient with respect to θ_E only, for a frozen generator.
pub fn encoder_only_grads<T: Scalar>(
    gen: &Generator<T>,
    enc: &Encoder<T>,
    phase: Phase,
    z: &Tensor<T>,
) -> (T, Encoder<T>) {
    let x1 = gen.forward(z, phase);
    let (zh, tr_e) = enc.forward_traced(&x1, phase);
    let (x2, tr_g2) = gen.forward_traced(&zh, phase);
    let loss = l1_mean(x1.data(), x2.data());
    let mut dx2 = l1_mean_grad(&x1, &x2);
    dx2.scale(-T::one());
    let mut scratch = gen.zeros_like();
    let dzh = gen.backward(&tr_g2, &dx2, &mut scratch);
    let mut g_enc = enc.zeros_like();
    enc.backward(&tr_e, &dzh, &mut g_enc);
    (loss, g_enc)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ConstCritic(f64);
    impl Critic<f64> for ConstCritic {
        fn scores(&self, x: &Tensor<f64>) -> Vec<f64> {
            vec![self.0; x.batch()]
        }
        fn input_gradients(&self, x: &Tensor<f64>) -> Tensor<f64> {
            Tensor::zeros(x.shape())
        }
    }

    struct LinearCritic(Vec<f64>);
    impl Critic<f64> for LinearCritic {
        fn scores(&self, x: &Tensor<f64>) -> Vec<f64> {
            (0..x.batch()).map(|b| x.item(b).iter().zip(&self.0).map(|(a, u)| a * u).sum()).collect()
        }
        fn input_gradients(&self, x: &Tensor<f64>) -> Tensor<f64> {
            let rows: Vec<Vec<f64>> = (0..x.batch()).map(|_| self.0.clone()).collect();
            Tensor::stack(&rows, &x.shape()[1..]).unwrap()
        }
    }

    fn batch(vals: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[vals.len() / 4, 1, 2, 2], vals.to_vec()).unwrap()
    }

    #[test]
    fn constant_critic_has_zero_wasserstein_and_unit_penalty() {
        let real = batch(&[0.1, 0.2, 0.3, 0.4, -0.5, 0.6, 0.7, 0.8]);
        let fake = batch(&[0.0; 8]);
        let l = critic_objective(&ConstCritic(3.5), &real, &fake, &[0.3, 0.9], 10.0);
        assert_eq!(l.wasserstein, 0.0);
        assert_eq!(l.gradient_penalty, 1.0);
        assert_eq!(l.loss, 10.0);
    }

    #[test]
    fn unit_linear_critic_has_zero_penalty() {
        let u = vec![0.5, -0.5, 0.5, 0.5];
        let real = batch(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let fake = batch(&[0.0; 8]);
        let l = critic_objective(&LinearCritic(u), &real, &fake, &[0.5, 0.25], 10.0);
        assert_eq!(l.gradient_penalty, 0.0);
        // mean<u, real> = (0.5 − 0.5)/2 = 0
        assert_eq!(l.wasserstein, 0.0);
    }

    #[test]
    fn penalty_is_nonnegative_and_zero_only_at_unit_norms() {
        assert_eq!(gradient_penalty(&[1.0f64, 1.0, 1.0]), 0.0);
        assert!(gradient_penalty(&[1.0f64, 1.0 + 1e-9]) > 0.0);
        assert!(gradient_penalty(&[0.0f64, 3.0]) >= 0.0);
    }

    fn column(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn identity_stubs_reconstruct_exactly() {
        let z = column(&[0.3, -0.2, 0.9, 0.0]);
        let id = |t: &Tensor<f64>| t.clone();
        assert_eq!(image_reconstruction_loss(id, id, &z), 0.0);
        assert_eq!(latent_reconstruction_loss(id, id, &z), 0.0);
    }

    #[test]
    fn doubling_encoder_is_hand_computable() {
        // 𝒢 = identity, ℰ(x) = 2x, z = e₁ in 8 dims: mean|z − 2z| = 1/8 in both spaces.
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        let z = column(&e1);
        let id = |t: &Tensor<f64>| t.clone();
        let double = |t: &Tensor<f64>| t.map(|v| 2.0 * v);
        assert_eq!(latent_reconstruction_loss(id, double, &z), 1.0 / 8.0);
        assert_eq!(image_reconstruction_loss(id, double, &z), 1.0 / 8.0);
    }
}

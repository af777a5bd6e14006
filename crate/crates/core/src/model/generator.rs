use rand::Rng;

use crate::nn::{self, Conv2d, Linear};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{named_conv, named_linear, Phase};

/// Two 3×3 convolutions after a nearest-neighbour upsample.
#[derive(Clone, Debug, PartialEq)]
pub struct UpBlock<T> {
    pub conv_a: Conv2d<T>,
    pub conv_b: Conv2d<T>,
}

pub(crate) struct UpTrace<T> {
    pub(crate) up: Tensor<T>,
    pub(crate) a: Tensor<T>,
    pub(crate) b: Tensor<T>,
}

impl<T: Scalar> UpBlock<T> {
    fn forward(&self, h: &Tensor<T>) -> (Tensor<T>, UpTrace<T>) {
        let up = nn::upsample2(h);
        let a = nn::leaky_relu(&self.conv_a.forward(&up));
        let b = nn::leaky_relu(&self.conv_b.forward(&a));
        (b.clone(), UpTrace { up, a, b })
    }

    fn backward(&self, tr: &UpTrace<T>, dout: &Tensor<T>, grad: &mut UpBlock<T>) -> Tensor<T> {
        // leaky rectifiers preserve sign, so their outputs stand in for inputs.
        let db = nn::leaky_relu_backward(&tr.b, dout);
        let da = self.conv_b.backward(&tr.a, &db, &mut grad.conv_b);
        let da = nn::leaky_relu_backward(&tr.a, &da);
        let dup = self.conv_a.backward(&tr.up, &da, &mut grad.conv_a);
        nn::upsample2_backward(&dup)
    }
}

/// Progressive generator: latent → 4×4 feature map → (upsample, conv, conv)* →
/// 1×1 projection to image channels → tanh. During a fade-in the output blends
/// the upsampled previous-resolution image with the new one.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T> {
    pub input: Linear<T>,
    pub base: Conv2d<T>,
    pub blocks: Vec<UpBlock<T>>,
    pub to_image: Vec<Conv2d<T>>,
}

pub struct GeneratorTrace<T> {
    pub(crate) z: Tensor<T>,
    pub(crate) lin: Tensor<T>,
    pub(crate) base_out: Tensor<T>,
    pub(crate) blocks: Vec<UpTrace<T>>,
    pub(crate) hidden: Vec<Tensor<T>>,
    pub(crate) hi: Option<Tensor<T>>,
    pub(crate) lo: Option<Tensor<T>>,
    pub(crate) fade: T,
}

impl<T: Scalar> Generator<T> {
    pub fn init<R: Rng>(
        latent_dim: usize,
        channels: usize,
        image_channels: usize,
        levels: usize,
        rng: &mut R,
    ) -> Self {
        let gain = 2f64.sqrt();
        let input = Linear::init(latent_dim, channels * 16, gain * (latent_dim as f64).sqrt(), rng);
        let base = Conv2d::init(channels, channels, 3, gain, rng);
        let blocks = (0..levels)
            .map(|_| UpBlock {
                conv_a: Conv2d::init(channels, channels, 3, gain, rng),
                conv_b: Conv2d::init(channels, channels, 3, gain, rng),
            })
            .collect();
        let to_image = (0..=levels).map(|_| Conv2d::init(channels, image_channels, 1, 1.0, rng)).collect();
        Self { input, base, blocks, to_image }
    }

    pub fn latent_dim(&self) -> usize {
        self.input.in_features()
    }

    pub fn channels(&self) -> usize {
        self.base.out_channels()
    }

    pub fn image_channels(&self) -> usize {
        self.to_image[0].out_channels()
    }

    pub fn max_level(&self) -> usize {
        self.blocks.len()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> Generator<U> {
        Generator {
            input: self.input.map(f),
            base: self.base.map(f),
            blocks: self
                .blocks
                .iter()
                .map(|b| UpBlock { conv_a: b.conv_a.map(f), conv_b: b.conv_b.map(f) })
                .collect(),
            to_image: self.to_image.iter().map(|c| c.map(f)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        named_linear(&mut out, "input", &self.input);
        named_conv(&mut out, "base", &self.base);
        for (i, b) in self.blocks.iter().enumerate() {
            let res = 8 << i;
            named_conv(&mut out, &format!("block{res}.conv_a"), &b.conv_a);
            named_conv(&mut out, &format!("block{res}.conv_b"), &b.conv_b);
        }
        for (i, c) in self.to_image.iter().enumerate() {
            named_conv(&mut out, &format!("to_image{}", 4 << i), c);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = vec![&mut self.input.weight, &mut self.input.bias];
        out.push(&mut self.base.weight);
        out.push(&mut self.base.bias);
        for b in &mut self.blocks {
            out.push(&mut b.conv_a.weight);
            out.push(&mut b.conv_a.bias);
            out.push(&mut b.conv_b.weight);
            out.push(&mut b.conv_b.bias);
        }
        for c in &mut self.to_image {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out
    }

    /// Generates a batch of images at the phase resolution. `z` is `[n, latent_dim]`.
    pub fn forward(&self, z: &Tensor<T>, phase: Phase) -> Tensor<T> {
        self.forward_traced(z, phase).0
    }

    pub fn forward_traced(&self, z: &Tensor<T>, phase: Phase) -> (Tensor<T>, GeneratorTrace<T>) {
        let level = phase.level();
        assert!(level <= self.max_level(), "phase beyond generator depth");
        let n = z.batch();
        let c = self.channels();
        let lin = self.input.forward(z).reshape(&[n, c, 4, 4]);
        let act = nn::leaky_relu(&lin);
        let base_out = nn::leaky_relu(&self.base.forward(&act));
        let mut hidden = vec![base_out.clone()];
        let mut blocks = Vec::with_capacity(level);
        for blk in &self.blocks[..level] {
            let (h, tr) = blk.forward(hidden.last().expect("hidden state"));
            hidden.push(h);
            blocks.push(tr);
        }
        let fade = T::lit(phase.fade);
        let blend = level > 0 && phase.fade < 1.0;
        let hi = (!blend || phase.fade > 0.0)
            .then(|| nn::tanh(&self.to_image[level].forward(&hidden[level])));
        let lo = blend.then(|| nn::tanh(&self.to_image[level - 1].forward(&hidden[level - 1])));
        let out = match (&hi, &lo) {
            (Some(h), None) => h.clone(),
            (None, Some(l)) => nn::upsample2(l),
            (Some(h), Some(l)) => nn::lerp(h, &nn::upsample2(l), fade),
            (None, None) => unreachable!(),
        };
        let trace = GeneratorTrace { z: z.clone(), lin, base_out, blocks, hidden, hi, lo, fade };
        (out, trace)
    }

    /// Accumulates parameter gradients into `grad`; returns `∂/∂z`.
    pub fn backward(&self, tr: &GeneratorTrace<T>, dout: &Tensor<T>, grad: &mut Generator<T>) -> Tensor<T> {
        let level = tr.blocks.len();
        let mut dh: Vec<Option<Tensor<T>>> = (0..=level).map(|_| None).collect();
        let both = tr.hi.is_some() && tr.lo.is_some();
        if let Some(hi) = &tr.hi {
            let mut d = dout.clone();
            if both {
                d.scale(tr.fade);
            }
            let d = nn::tanh_backward(hi, &d);
            dh[level] = Some(self.to_image[level].backward(&tr.hidden[level], &d, &mut grad.to_image[level]));
        }
        if let Some(lo) = &tr.lo {
            let mut d = dout.clone();
            if both {
                d.scale(T::one() - tr.fade);
            }
            let d = nn::tanh_backward(lo, &nn::upsample2_backward(&d));
            let g = self.to_image[level - 1].backward(&tr.hidden[level - 1], &d, &mut grad.to_image[level - 1]);
            dh[level - 1] = Some(g);
        }
        for l in (1..=level).rev() {
            if let Some(d) = dh[l].take() {
                let dprev = self.blocks[l - 1].backward(&tr.blocks[l - 1], &d, &mut grad.blocks[l - 1]);
                match &mut dh[l - 1] {
                    Some(acc) => acc.add_assign(&dprev),
                    slot => *slot = Some(dprev),
                }
            }
        }
        let d0 = dh[0].take().expect("gradient reaches the base block");
        let d = nn::leaky_relu_backward(&tr.base_out, &d0);
        let act = nn::leaky_relu(&tr.lin);
        let d = self.base.backward(&act, &d, &mut grad.base);
        let d = nn::leaky_relu_backward(&tr.lin, &d);
        let n = tr.z.batch();
        let d = d.reshape(&[n, self.channels() * 16]);
        self.input.backward(&tr.z, &d, &mut grad.input)
    }
}

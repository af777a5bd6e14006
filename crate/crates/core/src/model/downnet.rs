use rand::Rng;

use crate::nn::{self, Conv2d, Linear};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{named_conv, named_linear, Phase};

/// Two 3×3 convolutions followed by 2×2 average pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct DownBlock<T> {
    pub conv_a: Conv2d<T>,
    pub conv_b: Conv2d<T>,
}

struct DownTrace<T> {
    input: Tensor<T>,
    a: Tensor<T>,
    b: Tensor<T>,
}

impl<T: Scalar> DownBlock<T> {
    fn forward(&self, h: Tensor<T>) -> (Tensor<T>, DownTrace<T>) {
        let a = nn::leaky_relu(&self.conv_a.forward(&h));
        let b = nn::leaky_relu(&self.conv_b.forward(&a));
        (nn::avgpool2(&b), DownTrace { input: h, a, b })
    }

    fn backward(&self, tr: &DownTrace<T>, dout: &Tensor<T>, grad: &mut DownBlock<T>) -> Tensor<T> {
        let d = nn::leaky_relu_backward(&tr.b, &nn::avgpool2_backward(dout));
        let d = self.conv_b.backward(&tr.a, &d, &mut grad.conv_b);
        let d = nn::leaky_relu_backward(&tr.a, &d);
        self.conv_a.backward(&tr.input, &d, &mut grad.conv_a)
    }
}

/// Convolutional trunk shared by the critic (one output) and the encoder
/// (`latent_dim` outputs). Mirrors the generator: a 1×1 projection from image
/// channels at the phase resolution, (conv, conv, pool)* down to 4×4, one more
/// conv, and a linear head. During a fade-in the first pooled feature map is
/// blended with the projection of the 2×-downsampled input.
#[derive(Clone, Debug, PartialEq)]
pub struct DownNet<T> {
    pub from_image: Vec<Conv2d<T>>,
    pub blocks: Vec<DownBlock<T>>,
    pub base: Conv2d<T>,
    pub head: Linear<T>,
}

/// The critic 𝒟 : image → ℝ.
pub type Discriminator<T> = DownNet<T>;
/// The encoder ℰ : image → latent.
pub type Encoder<T> = DownNet<T>;

pub struct DownTraceAll<T> {
    x: Tensor<T>,
    main_in: Option<Tensor<T>>,
    skip_in: Option<(Tensor<T>, Tensor<T>)>,
    blocks: Vec<(usize, DownTrace<T>)>,
    base_in: Tensor<T>,
    base_out: Tensor<T>,
    fade: T,
    level: usize,
}

impl<T: Scalar> DownNet<T> {
    pub fn init<R: Rng>(
        image_channels: usize,
        channels: usize,
        levels: usize,
        outputs: usize,
        head_gain: f64,
        rng: &mut R,
    ) -> Self {
        let gain = 2f64.sqrt();
        let from_image = (0..=levels).map(|_| Conv2d::init(image_channels, channels, 1, gain, rng)).collect();
        let blocks = (0..levels)
            .map(|_| DownBlock {
                conv_a: Conv2d::init(channels, channels, 3, gain, rng),
                conv_b: Conv2d::init(channels, channels, 3, gain, rng),
            })
            .collect();
        let base = Conv2d::init(channels, channels, 3, gain, rng);
        let head = Linear::init(channels * 16, outputs, head_gain, rng);
        Self { from_image, blocks, base, head }
    }

    pub fn outputs(&self) -> usize {
        self.head.out_features()
    }

    pub fn channels(&self) -> usize {
        self.base.out_channels()
    }

    pub fn image_channels(&self) -> usize {
        self.from_image[0].in_channels()
    }

    pub fn max_level(&self) -> usize {
        self.blocks.len()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> DownNet<U> {
        DownNet {
            from_image: self.from_image.iter().map(|c| c.map(f)).collect(),
            blocks: self
                .blocks
                .iter()
                .map(|b| DownBlock { conv_a: b.conv_a.map(f), conv_b: b.conv_b.map(f) })
                .collect(),
            base: self.base.map(f),
            head: self.head.map(f),
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, c) in self.from_image.iter().enumerate() {
            named_conv(&mut out, &format!("from_image{}", 4 << i), c);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let res = 8 << i;
            named_conv(&mut out, &format!("block{res}.conv_a"), &b.conv_a);
            named_conv(&mut out, &format!("block{res}.conv_b"), &b.conv_b);
        }
        named_conv(&mut out, "base", &self.base);
        named_linear(&mut out, "head", &self.head);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        for c in &mut self.from_image {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for b in &mut self.blocks {
            out.push(&mut b.conv_a.weight);
            out.push(&mut b.conv_a.bias);
            out.push(&mut b.conv_b.weight);
            out.push(&mut b.conv_b.bias);
        }
        out.push(&mut self.base.weight);
        out.push(&mut self.base.bias);
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    /// `x` is `[n, image_channels, r, r]` at the phase resolution; output `[n, outputs]`.
    pub fn forward(&self, x: &Tensor<T>, phase: Phase) -> Tensor<T> {
        self.forward_traced(x, phase).0
    }

    pub fn forward_traced(&self, x: &Tensor<T>, phase: Phase) -> (Tensor<T>, DownTraceAll<T>) {
        let level = phase.level();
        assert!(level <= self.max_level(), "phase beyond network depth");
        let (n, _, h, _) = x.dims4();
        assert_eq!(h, phase.resolution, "input resolution");
        let blend = level > 0 && phase.fade < 1.0;
        let fade = T::lit(phase.fade);
        let mut blocks = Vec::with_capacity(level);

        let mut main_in = None;
        let main = (!blend || phase.fade > 0.0).then(|| {
            let m = nn::leaky_relu(&self.from_image[level].forward(x));
            main_in = Some(m.clone());
            m
        });
        let mut h = match main {
            Some(m) if level > 0 => {
                let (p, tr) = self.blocks[level - 1].forward(m);
                blocks.push((level, tr));
                Some(p)
            }
            other => other,
        };
        let mut skip_in = None;
        if blend {
            let xs = nn::avgpool2(x);
            let s = nn::leaky_relu(&self.from_image[level - 1].forward(&xs));
            h = Some(match h {
                Some(p) => nn::lerp(&p, &s, fade),
                None => s.clone(),
            });
            skip_in = Some((xs, s));
        }
        let mut h = h.expect("trunk input");
        for l in (1..level).rev() {
            let (p, tr) = self.blocks[l - 1].forward(h);
            blocks.push((l, tr));
            h = p;
        }
        let base_out = nn::leaky_relu(&self.base.forward(&h));
        let flat = base_out.clone().reshape(&[n, self.channels() * 16]);
        let out = self.head.forward(&flat);
        let trace =
            DownTraceAll { x: x.clone(), main_in, skip_in, blocks, base_in: h, base_out, fade, level };
        (out, trace)
    }

    /// Accumulates parameter gradients into `grad`; returns `∂/∂x`.
    pub fn backward(&self, tr: &DownTraceAll<T>, dout: &Tensor<T>, grad: &mut DownNet<T>) -> Tensor<T> {
        let n = tr.x.batch();
        let flat = tr.base_out.clone().reshape(&[n, self.channels() * 16]);
        let d = self.head.backward(&flat, dout, &mut grad.head);
        let d = d.reshape(tr.base_out.shape());
        let d = nn::leaky_relu_backward(&tr.base_out, &d);
        let mut d = self.base.backward(&tr.base_in, &d, &mut grad.base);

        let level = tr.level;
        let mut dx = Tensor::zeros(tr.x.shape());
        // blocks were recorded from `level` downwards; walk them back up to the fade point
        let first_main = usize::from(tr.main_in.is_some() && level > 0);
        for (l, btr) in tr.blocks[first_main..].iter().rev() {
            d = self.blocks[l - 1].backward(btr, &d, &mut grad.blocks[l - 1]);
        }
        let both = tr.main_in.is_some() && tr.skip_in.is_some();
        if let Some((xs, s)) = &tr.skip_in {
            let mut ds = d.clone();
            if both {
                ds.scale(T::one() - tr.fade);
            }
            let ds = nn::leaky_relu_backward(s, &ds);
            let dxs = self.from_image[level - 1].backward(xs, &ds, &mut grad.from_image[level - 1]);
            dx.add_assign(&nn::avgpool2_backward(&dxs));
            if both {
                d.scale(tr.fade);
            }
        }
        if let Some(m) = &tr.main_in {
            if level > 0 {
                let (l, btr) = &tr.blocks[0];
                d = self.blocks[l - 1].backward(btr, &d, &mut grad.blocks[l - 1]);
            }
            let dm = nn::leaky_relu_backward(m, &d);
            dx.add_assign(&self.from_image[level].backward(&tr.x, &dm, &mut grad.from_image[level]));
        }
        dx
    }
}

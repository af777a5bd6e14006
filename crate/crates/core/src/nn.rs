//! Layer primitives with hand-written backward passes.
//!
//! Every `backward` accumulates parameter gradients into a same-shaped layer
//! passed as `grad` and returns the gradient with respect to the layer input.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Square-kernel convolution, stride 1, zero "same" padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    /// `[out, in, k, k]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(cin: usize, cout: usize, k: usize) -> Self {
        Self { weight: Tensor::zeros(&[cout, cin, k, k]), bias: Tensor::zeros(&[cout]) }
    }

    /// He-style init: `N(0, gain²/fan_in)`, zero bias.
    pub fn init<R: Rng>(cin: usize, cout: usize, k: usize, gain: f64, rng: &mut R) -> Self {
        let mut c = Self::zeros(cin, cout, k);
        fill_gaussian(&mut c.weight, gain / ((cin * k * k) as f64).sqrt(), rng);
        c
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> Conv2d<U> {
        Conv2d { weight: self.weight.map(f), bias: self.bias.map(f) }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, cin, h, w) = x.dims4();
        assert_eq!(cin, self.in_channels(), "conv input channels");
        let cout = self.out_channels();
        let k = self.kernel();
        let pad = (k / 2) as isize;
        let plane = h * w;
        let wts = self.weight.data();
        let mut out = Tensor::zeros(&[n, cout, h, w]);
        let xd = x.data();
        let od = out.data_mut();
        for b in 0..n {
            for o in 0..cout {
                let dst = &mut od[(b * cout + o) * plane..(b * cout + o + 1) * plane];
                let bias = self.bias.data()[o];
                dst.iter_mut().for_each(|v| *v = bias);
                for i in 0..cin {
                    let src = &xd[(b * cin + i) * plane..(b * cin + i + 1) * plane];
                    for ky in 0..k {
                        let dy = ky as isize - pad;
                        let (y0, y1) = valid_range(h, dy);
                        for kx in 0..k {
                            let dx = kx as isize - pad;
                            let (x0, x1) = valid_range(w, dx);
                            let wv = wts[((o * cin + i) * k + ky) * k + kx];
                            for y in y0..y1 {
                                let sy = (y as isize + dy) as usize;
                                let sx0 = (x0 as isize + dx) as usize;
                                let orow = &mut dst[y * w + x0..y * w + x1];
                                let irow = &src[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                                for (ov, &iv) in orow.iter_mut().zip(irow) {
                                    *ov += wv * iv;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, x: &Tensor<T>, dout: &Tensor<T>, grad: &mut Conv2d<T>) -> Tensor<T> {
        let (n, cin, h, w) = x.dims4();
        let cout = self.out_channels();
        let k = self.kernel();
        let pad = (k / 2) as isize;
        let plane = h * w;
        let wts = self.weight.data();
        let xd = x.data();
        let gd = dout.data();
        let mut dx = Tensor::zeros(&[n, cin, h, w]);
        {
            let gb = grad.bias.data_mut();
            for b in 0..n {
                for (o, gbo) in gb.iter_mut().enumerate() {
                    let g = &gd[(b * cout + o) * plane..(b * cout + o + 1) * plane];
                    *gbo += g.iter().copied().sum::<T>();
                }
            }
        }
        let gw = grad.weight.data_mut();
        let dxd = dx.data_mut();
        for b in 0..n {
            for o in 0..cout {
                let g = &gd[(b * cout + o) * plane..(b * cout + o + 1) * plane];
                for i in 0..cin {
                    let base = (b * cin + i) * plane;
                    for ky in 0..k {
                        let dy = ky as isize - pad;
                        let (y0, y1) = valid_range(h, dy);
                        for kx in 0..k {
                            let dxo = kx as isize - pad;
                            let (x0, x1) = valid_range(w, dxo);
                            let widx = ((o * cin + i) * k + ky) * k + kx;
                            let wv = wts[widx];
                            let mut acc = T::zero();
                            for y in y0..y1 {
                                let sy = (y as isize + dy) as usize;
                                let sx0 = (x0 as isize + dxo) as usize;
                                let grow = &g[y * w + x0..y * w + x1];
                                let s = base + sy * w + sx0;
                                let irow = &xd[s..s + (x1 - x0)];
                                for (&gv, &iv) in grow.iter().zip(irow) {
                                    acc += gv * iv;
                                }
                                let drow = &mut dxd[s..s + (x1 - x0)];
                                for (dv, &gv) in drow.iter_mut().zip(grow) {
                                    *dv += wv * gv;
                                }
                            }
                            gw[widx] += acc;
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Output rows/cols `y` for which `y + d` stays inside `[0, len)`.
#[inline]
fn valid_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).min(len as isize).max(lo as isize) as usize;
    (lo, hi)
}

/// Fully connected layer on `[batch, features]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    /// `[out, in]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(nin: usize, nout: usize) -> Self {
        Self { weight: Tensor::zeros(&[nout, nin]), bias: Tensor::zeros(&[nout]) }
    }

    pub fn init<R: Rng>(nin: usize, nout: usize, gain: f64, rng: &mut R) -> Self {
        let mut l = Self::zeros(nin, nout);
        fill_gaussian(&mut l.weight, gain / (nin as f64).sqrt(), rng);
        l
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> Linear<U> {
        Linear { weight: self.weight.map(f), bias: self.bias.map(f) }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.batch();
        let nin = self.in_features();
        let nout = self.out_features();
        assert_eq!(x.item_len(), nin, "linear input features");
        let w = self.weight.data();
        let mut out = Tensor::zeros(&[n, nout]);
        for b in 0..n {
            let xi = x.item(b);
            let oi = out.item_mut(b);
            for (o, ov) in oi.iter_mut().enumerate() {
                let row = &w[o * nin..(o + 1) * nin];
                let mut acc = self.bias.data()[o];
                for (&wv, &xv) in row.iter().zip(xi) {
                    acc += wv * xv;
                }
                *ov = acc;
            }
        }
        out
    }

    pub fn backward(&self, x: &Tensor<T>, dout: &Tensor<T>, grad: &mut Linear<T>) -> Tensor<T> {
        let n = x.batch();
        let nin = self.in_features();
        let nout = self.out_features();
        let w = self.weight.data();
        let mut dx = Tensor::zeros(&[n, nin]);
        for b in 0..n {
            let xi = x.item(b);
            let gi = dout.item(b);
            let dxi = dx.item_mut(b);
            for o in 0..nout {
                let g = gi[o];
                grad.bias.data_mut()[o] += g;
                let row = &w[o * nin..(o + 1) * nin];
                let grow = &mut grad.weight.data_mut()[o * nin..(o + 1) * nin];
                for ((gw, dv), (&wv, &xv)) in grow.iter_mut().zip(dxi.iter_mut()).zip(row.iter().zip(xi)) {
                    *gw += g * xv;
                    *dv += g * wv;
                }
            }
        }
        dx
    }
}

fn fill_gaussian<T: Scalar, R: Rng>(t: &mut Tensor<T>, std: f64, rng: &mut R) {
    for v in t.data_mut() {
        let s: f64 = StandardNormal.sample(rng);
        *v = T::lit(s * std);
    }
}

pub fn leaky_relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let a = T::lit(LEAKY_SLOPE);
    x.map(|v| if v > T::zero() { v } else { a * v })
}

/// Backward of [`leaky_relu`] given its input.
pub fn leaky_relu_backward<T: Scalar>(x: &Tensor<T>, dout: &Tensor<T>) -> Tensor<T> {
    let a = T::lit(LEAKY_SLOPE);
    x.zip_map(dout, |v, g| if v > T::zero() { g } else { a * g })
}

pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

/// Backward of [`tanh`] given its output.
pub fn tanh_backward<T: Scalar>(y: &Tensor<T>, dout: &Tensor<T>) -> Tensor<T> {
    y.zip_map(dout, |v, g| g * (T::one() - v * v))
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    let mut out = Tensor::zeros(&[n, c, 2 * h, 2 * w]);
    let xd = x.data();
    let od = out.data_mut();
    for p in 0..n * c {
        let src = &xd[p * h * w..(p + 1) * h * w];
        let dst = &mut od[p * 4 * h * w..(p + 1) * 4 * h * w];
        for y in 0..2 * h {
            for xx in 0..2 * w {
                dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(dout: &Tensor<T>) -> Tensor<T> {
    let (n, c, h2, w2) = dout.dims4();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let gd = dout.data();
    let dd = dx.data_mut();
    for p in 0..n * c {
        let src = &gd[p * h2 * w2..(p + 1) * h2 * w2];
        let dst = &mut dd[p * h * w..(p + 1) * h * w];
        for y in 0..h2 {
            for xx in 0..w2 {
                dst[(y / 2) * w + xx / 2] += src[y * w2 + xx];
            }
        }
    }
    dx
}

/// 2×2 average pooling.
pub fn avgpool2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    let (ho, wo) = (h / 2, w / 2);
    let q = T::lit(0.25);
    let mut out = Tensor::zeros(&[n, c, ho, wo]);
    let xd = x.data();
    let od = out.data_mut();
    for p in 0..n * c {
        let src = &xd[p * h * w..(p + 1) * h * w];
        let dst = &mut od[p * ho * wo..(p + 1) * ho * wo];
        for y in 0..ho {
            for xx in 0..wo {
                let s = src[2 * y * w + 2 * xx]
                    + src[2 * y * w + 2 * xx + 1]
                    + src[(2 * y + 1) * w + 2 * xx]
                    + src[(2 * y + 1) * w + 2 * xx + 1];
                dst[y * wo + xx] = s * q;
            }
        }
    }
    out
}

pub fn avgpool2_backward<T: Scalar>(dout: &Tensor<T>) -> Tensor<T> {
    let (n, c, ho, wo) = dout.dims4();
    let (h, w) = (2 * ho, 2 * wo);
    let q = T::lit(0.25);
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let gd = dout.data();
    let dd = dx.data_mut();
    for p in 0..n * c {
        let src = &gd[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut dd[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                dst[y * w + xx] = src[(y / 2) * wo + xx / 2] * q;
            }
        }
    }
    dx
}

/// `a·x + (1−a)·y`, elementwise.
pub fn lerp<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, a: T) -> Tensor<T> {
    let b = T::one() - a;
    x.zip_map(y, |u, v| a * u + b * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let mut t = Tensor::zeros(shape);
        fill_gaussian(&mut t, 1.0, rng);
        t
    }

    /// Brute-force direct convolution used as an independent reference.
    fn conv_reference(c: &Conv2d<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let (n, cin, h, w) = x.dims4();
        let (cout, k) = (c.out_channels(), c.kernel());
        let p = (k / 2) as isize;
        let mut out = Tensor::zeros(&[n, cout, h, w]);
        for b in 0..n {
            for o in 0..cout {
                for y in 0..h as isize {
                    for xx in 0..w as isize {
                        let mut s = c.bias.data()[o];
                        for i in 0..cin {
                            for ky in 0..k as isize {
                                for kx in 0..k as isize {
                                    let sy = y + ky - p;
                                    let sx = xx + kx - p;
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                        continue;
                                    }
                                    let wv = c.weight.data()
                                        [((o * cin + i) * k + ky as usize) * k + kx as usize];
                                    s += wv * x.data()[((b * cin + i) * h + sy as usize) * w + sx as usize];
                                }
                            }
                        }
                        out.data_mut()[((b * cout + o) * h + y as usize) * w + xx as usize] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Conv2d::<f64>::init(2, 3, 3, 1.0, &mut rng);
        let x = rand_tensor(&[2, 2, 5, 4], &mut rng);
        let a = c.forward(&x);
        let b = conv_reference(&c, &x);
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <dy, conv(x)> linear in x and w: check via finite differences of a dot product.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = Conv2d::<f64>::init(2, 2, 3, 1.0, &mut rng);
        let x = rand_tensor(&[1, 2, 4, 4], &mut rng);
        let g = rand_tensor(&[1, 2, 4, 4], &mut rng);
        let mut grad = Conv2d::zeros(2, 2, 3);
        let dx = c.backward(&x, &g, &mut grad);
        let obj = |c: &Conv2d<f64>, x: &Tensor<f64>| -> f64 {
            c.forward(x).data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for idx in [0, 5, 17, 31] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (obj(&c, &xp) - obj(&c, &xm)) / (2.0 * h);
            assert!((fd - dx.data()[idx]).abs() < 1e-6);
        }
        for idx in [0, 7, 20, 35] {
            let mut cp = c.clone();
            cp.weight.data_mut()[idx] += h;
            let mut cm = c.clone();
            cm.weight.data_mut()[idx] -= h;
            let fd = (obj(&cp, &x) - obj(&cm, &x)) / (2.0 * h);
            assert!((fd - grad.weight.data()[idx]).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_is_hand_computable() {
        let mut l = Linear::<f64>::zeros(2, 2);
        l.weight.data_mut().copy_from_slice(&[1.0, 2.0, -1.0, 0.5]);
        l.bias.data_mut().copy_from_slice(&[0.5, -0.5]);
        let x = Tensor::from_vec(&[1, 2], vec![3.0, 4.0]).unwrap();
        assert_eq!(l.forward(&x).data(), &[11.5, -1.5]);
    }

    #[test]
    fn pool_and_upsample_are_adjoint_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&[1, 2, 4, 4], &mut rng);
        let y = rand_tensor(&[1, 2, 2, 2], &mut rng);
        let dot = |a: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            a.data().iter().zip(b.data()).map(|(u, v)| u * v).sum()
        };
        assert!((dot(&avgpool2(&x), &y) - dot(&x, &avgpool2_backward(&y))).abs() < 1e-12);
        assert!((dot(&upsample2(&y), &x) - dot(&y, &upsample2_backward(&x))).abs() < 1e-12);
    }
}

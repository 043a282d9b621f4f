use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{LayerParams, Parameterized, Tensor};

/// 2-D convolution over `[B, Cin, H, W]` with square kernels, zero padding.
///
/// Weights are `[Cout, Cin, k, k]`, bias `[Cout]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub params: LayerParams,
    stride: usize,
    padding: usize,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::param("conv2d kernel and stride must be positive"));
        }
        let fan_in = (cin * kernel * kernel) as f64;
        let w = Tensor::uniform(&[cout, cin, kernel, kernel], (6.0 / fan_in).sqrt(), rng);
        Ok(Self::from_params(
            LayerParams::new(w, Tensor::zeros(&[cout])),
            stride,
            padding,
        ))
    }

    pub fn from_params(params: LayerParams, stride: usize, padding: usize) -> Self {
        Self {
            params,
            stride,
            padding,
            input: None,
        }
    }

    fn geometry(&self) -> (usize, usize, usize) {
        let s = self.params.weights.shape();
        (s[0], s[1], s[2])
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (_, _, k) = self.geometry();
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < k || wp < k {
            return Err(Error::dim(format!(
                "conv2d input {h}x{w} smaller than kernel {k}"
            )));
        }
        Ok(((hp - k) / self.stride + 1, (wp - k) / self.stride + 1))
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (cout, cin, k) = self.geometry();
        if x.ndim() != 4 || x.dim(1) != cin {
            return Err(Error::dim(format!(
                "conv2d expects [B, {cin}, H, W], got {:?}",
                x.shape()
            )));
        }
        let (b, h, w) = (x.dim(0), x.dim(2), x.dim(3));
        let (oh, ow) = self.output_hw(h, w)?;
        let (stride, pad) = (self.stride as isize, self.padding as isize);
        let wt = self.params.weights.data();
        let bias = self.params.bias.data();
        let xd = x.data();
        let mut out = vec![0.0; b * cout * oh * ow];
        for bi in 0..b {
            for co in 0..cout {
                let plane = &mut out[(bi * cout + co) * oh * ow..(bi * cout + co + 1) * oh * ow];
                plane.iter_mut().for_each(|v| *v = bias[co]);
                for ci in 0..cin {
                    let xin = &xd[(bi * cin + ci) * h * w..(bi * cin + ci + 1) * h * w];
                    let kern = &wt[(co * cin + ci) * k * k..(co * cin + ci + 1) * k * k];
                    for oy in 0..oh {
                        let iy0 = oy as isize * stride - pad;
                        for ox in 0..ow {
                            let ix0 = ox as isize * stride - pad;
                            let mut s = 0.0;
                            for ky in 0..k {
                                let iy = iy0 + ky as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let row = &xin[iy as usize * w..(iy as usize + 1) * w];
                                for kx in 0..k {
                                    let ix = ix0 + kx as isize;
                                    if ix >= 0 && ix < w as isize {
                                        s += kern[ky * k + kx] * row[ix as usize];
                                    }
                                }
                            }
                            plane[oy * ow + ox] += s;
                        }
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Tensor::new(vec![b, cout, oh, ow], out)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::EmptyInput("conv2d backward before forward".into()))?;
        let (cout, cin, k) = self.geometry();
        let (b, h, w) = (x.dim(0), x.dim(2), x.dim(3));
        let (oh, ow) = self.output_hw(h, w)?;
        if dy.shape() != [b, cout, oh, ow] {
            return Err(Error::dim(format!(
                "conv2d upstream gradient {:?}, expected [{b}, {cout}, {oh}, {ow}]",
                dy.shape()
            )));
        }
        let (stride, pad) = (self.stride as isize, self.padding as isize);
        let wt = self.params.weights.data().to_vec();
        let xd = x.data();
        let dyd = dy.data();
        let mut dx = vec![0.0; x.len()];
        let mut gw = vec![0.0; wt.len()];
        let mut gb = vec![0.0; cout];
        for bi in 0..b {
            for co in 0..cout {
                let g_plane = &dyd[(bi * cout + co) * oh * ow..(bi * cout + co + 1) * oh * ow];
                gb[co] += g_plane.iter().sum::<f64>();
                for ci in 0..cin {
                    let base = (bi * cin + ci) * h * w;
                    let kbase = (co * cin + ci) * k * k;
                    for oy in 0..oh {
                        let iy0 = oy as isize * stride - pad;
                        for ox in 0..ow {
                            let g = g_plane[oy * ow + ox];
                            if g == 0.0 {
                                continue;
                            }
                            let ix0 = ox as isize * stride - pad;
                            for ky in 0..k {
                                let iy = iy0 + ky as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let ix = ix0 + kx as isize;
                                    if ix >= 0 && ix < w as isize {
                                        let xi = base + iy as usize * w + ix as usize;
                                        gw[kbase + ky * k + kx] += g * xd[xi];
                                        dx[xi] += g * wt[kbase + ky * k + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        self.params
            .grad_weights
            .data_mut()
            .iter_mut()
            .zip(&gw)
            .for_each(|(a, v)| *a += v);
        self.params
            .grad_bias
            .data_mut()
            .iter_mut()
            .zip(&gb)
            .for_each(|(a, v)| *a += v);
        self.params.mark_fresh();
        Tensor::new(x.shape().to_vec(), dx)
    }
}

impl Parameterized for Conv2d {
    fn params(&self) -> Vec<&LayerParams> {
        vec![&self.params]
    }

    fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![&mut self.params]
    }
}

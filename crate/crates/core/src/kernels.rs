//! Dense per-sample kernels for one time step. Activations are channel-major
//! `[c][h][w]` slices; weights are `[out][in][k][k]` (conv) or `[out][in]`
//! (fc).

use crate::network::Shape3;

/// Geometry of a 2-D convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub input: Shape3,
    pub output: Shape3,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    fn padded(&self) -> (usize, usize) {
        (self.input.height + 2 * self.padding, self.input.width + 2 * self.padding)
    }

    pub fn padded_len(&self) -> usize {
        let (ph, pw) = self.padded();
        self.input.channels * ph * pw
    }

    /// Copies `input` into the zero-padded scratch buffer.
    pub fn pad_into(&self, input: &[f64], padded: &mut [f64]) {
        let (ph, pw) = self.padded();
        let Shape3 { channels, height, width } = self.input;
        let p = self.padding;
        padded.fill(0.0);
        for c in 0..channels {
            for y in 0..height {
                let src = &input[(c * height + y) * width..][..width];
                let dst = &mut padded[(c * ph + y + p) * pw + p..][..width];
                dst.copy_from_slice(src);
            }
        }
    }

    /// Adds the interior of a padded gradient buffer into `grad_input`.
    pub fn unpad_add(&self, padded: &[f64], grad_input: &mut [f64]) {
        let (ph, pw) = self.padded();
        let Shape3 { channels, height, width } = self.input;
        let p = self.padding;
        for c in 0..channels {
            for y in 0..height {
                let src = &padded[(c * ph + y + p) * pw + p..][..width];
                let dst = &mut grad_input[(c * height + y) * width..][..width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
    }

    /// `out = bias + conv(padded, weights)`.
    pub fn forward(&self, padded: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
        let (ph, pw) = self.padded();
        let Shape3 { channels: out_ch, height: oh, width: ow } = self.output;
        let in_ch = self.input.channels;
        let (k, s) = (self.kernel, self.stride);
        for oc in 0..out_ch {
            let plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
            plane.fill(bias[oc]);
            for ic in 0..in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        let w = weights[((oc * in_ch + ic) * k + ky) * k + kx];
                        if w == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let row = &padded[(ic * ph + oy * s + ky) * pw + kx..];
                            let dst = &mut plane[oy * ow..(oy + 1) * ow];
                            if s == 1 {
                                for (d, v) in dst.iter_mut().zip(&row[..ow]) {
                                    *d += w * v;
                                }
                            } else {
                                for (ox, d) in dst.iter_mut().enumerate() {
                                    *d += w * row[ox * s];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight and bias gradients for one step and, when
    /// `grad_padded` is given, the gradient w.r.t. the padded input.
    pub fn backward(
        &self,
        padded: &[f64],
        grad_out: &[f64],
        weights: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        mut grad_padded: Option<&mut [f64]>,
    ) {
        let (ph, pw) = self.padded();
        let Shape3 { channels: out_ch, height: oh, width: ow } = self.output;
        let in_ch = self.input.channels;
        let (k, s) = (self.kernel, self.stride);
        for oc in 0..out_ch {
            let g = &grad_out[oc * oh * ow..(oc + 1) * oh * ow];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            grad_b[oc] += g.iter().sum::<f64>();
            for ic in 0..in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = ((oc * in_ch + ic) * k + ky) * k + kx;
                        let mut acc = 0.0;
                        for oy in 0..oh {
                            let row = &padded[(ic * ph + oy * s + ky) * pw + kx..];
                            let grow = &g[oy * ow..(oy + 1) * ow];
                            if s == 1 {
                                acc += grow.iter().zip(&row[..ow]).map(|(a, b)| a * b).sum::<f64>();
                            } else {
                                acc += grow.iter().enumerate().map(|(ox, a)| a * row[ox * s]).sum::<f64>();
                            }
                        }
                        grad_w[widx] += acc;
                        let w = weights[widx];
                        if w == 0.0 {
                            continue;
                        }
                        if let Some(gp) = grad_padded.as_deref_mut() {
                            for oy in 0..oh {
                                let base = (ic * ph + oy * s + ky) * pw + kx;
                                let grow = &g[oy * ow..(oy + 1) * ow];
                                if s == 1 {
                                    for (d, a) in gp[base..base + ow].iter_mut().zip(grow) {
                                        *d += w * a;
                                    }
                                } else {
                                    for (ox, a) in grow.iter().enumerate() {
                                        gp[base + ox * s] += w * a;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `out = bias + W x`, skipping zero inputs.
pub(crate) fn fc_forward(input: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64], nz: &mut Vec<usize>) {
    let n = input.len();
    nz.clear();
    nz.extend(input.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, _)| j));
    for (i, o) in out.iter_mut().enumerate() {
        let row = &weights[i * n..(i + 1) * n];
        let mut acc = bias[i];
        for &j in nz.iter() {
            acc += row[j] * input[j];
        }
        *o = acc;
    }
}

pub(crate) fn fc_backward(
    input: &[f64],
    grad_out: &[f64],
    weights: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    grad_in: Option<&mut [f64]>,
    nz: &mut Vec<usize>,
) {
    let n = input.len();
    nz.clear();
    nz.extend(input.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, _)| j));
    for (i, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad_b[i] += g;
        let gw = &mut grad_w[i * n..(i + 1) * n];
        for &j in nz.iter() {
            gw[j] += g * input[j];
        }
    }
    if let Some(gi) = grad_in {
        for (i, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &weights[i * n..(i + 1) * n];
            for (d, w) in gi.iter_mut().zip(row) {
                *d += w * g;
            }
        }
    }
}

/// Pooling geometry (no padding).
#[derive(Clone, Copy, Debug)]
pub(crate) struct PoolGeom {
    pub input: Shape3,
    pub output: Shape3,
    pub window: usize,
    pub stride: usize,
}

impl PoolGeom {
    fn for_each_window(&self, mut f: impl FnMut(usize, &mut dyn Iterator<Item = usize>)) {
        let Shape3 { channels, height, width } = self.input;
        let (oh, ow) = (self.output.height, self.output.width);
        for c in 0..channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = (c * oh + oy) * ow + ox;
                    let (y0, x0) = (oy * self.stride, ox * self.stride);
                    let mut it = (0..self.window).flat_map(move |dy| {
                        (0..self.window).map(move |dx| (c * height + y0 + dy) * width + x0 + dx)
                    });
                    f(o, &mut it);
                }
            }
        }
    }

    pub fn avg_forward(&self, input: &[f64], out: &mut [f64]) {
        let norm = 1.0 / (self.window * self.window) as f64;
        self.for_each_window(|o, idx| {
            out[o] = idx.map(|i| input[i]).sum::<f64>() * norm;
        });
    }

    pub fn avg_backward(&self, grad_out: &[f64], grad_in: &mut [f64]) {
        let norm = 1.0 / (self.window * self.window) as f64;
        self.for_each_window(|o, idx| {
            let g = grad_out[o] * norm;
            if g != 0.0 {
                for i in idx {
                    grad_in[i] += g;
                }
            }
        });
    }

    /// Max with the first maximal element (row-major window order) winning.
    pub fn max_forward(&self, input: &[f64], out: &mut [f64], argmax: &mut [u32]) {
        self.for_each_window(|o, idx| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in idx {
                if input[i] > best {
                    best = input[i];
                    arg = i;
                }
            }
            out[o] = best;
            argmax[o] = arg as u32;
        });
    }

    pub fn max_backward(grad_out: &[f64], argmax: &[u32], grad_in: &mut [f64]) {
        for (g, &a) in grad_out.iter().zip(argmax) {
            grad_in[a as usize] += g;
        }
    }
}

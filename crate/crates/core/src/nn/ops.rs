//! Dense, convolution, pooling, and upsampling tape operations.

use rayon::prelude::*;

use crate::error::{CoreError, Result};

use super::graph::{Graph, Var};
use super::linalg::{matmul, matmul_a_bt, matmul_at_b};
use super::tensor::Tensor;

fn conv_out_len(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if kernel == 0 || stride == 0 || kernel > padded {
        return Err(CoreError::Shape(format!(
            "kernel {kernel} / stride {stride} invalid for input extent {input} with padding {pad}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Unfold one [C, H, W] sample into [C*kh*kw, ho*wo] patch columns.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Vec<f64> {
    let mut cols = vec![0.0; c * kh * kw * ho * wo];
    let span = ho * wo;
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let out_row = &mut cols[((ci * kh + ki) * kw + kj) * span..][..span];
                for oh in 0..ho {
                    let ih = (oh * stride + ki) as isize - pad as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let xrow = &x[(ci * h + ih as usize) * w..][..w];
                    for ow in 0..wo {
                        let iw = (ow * stride + kj) as isize - pad as isize;
                        if iw >= 0 && iw < w as isize {
                            out_row[oh * wo + ow] = xrow[iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Fold patch-column gradients back onto one [C, H, W] sample.
#[allow(clippy::too_many_arguments)]
fn col2im(
    cols: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
) -> Vec<f64> {
    let mut x = vec![0.0; c * h * w];
    let span = ho * wo;
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let col_row = &cols[((ci * kh + ki) * kw + kj) * span..][..span];
                for oh in 0..ho {
                    let ih = (oh * stride + ki) as isize - pad as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let xrow = &mut x[(ci * h + ih as usize) * w..][..w];
                    for ow in 0..wo {
                        let iw = (ow * stride + kj) as isize - pad as isize;
                        if iw >= 0 && iw < w as isize {
                            xrow[iw as usize] += col_row[oh * wo + ow];
                        }
                    }
                }
            }
        }
    }
    x
}

impl Graph {
    /// Fully connected layer: x[B, in] * w[in, out] + b[out].
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        let bs = self.value(b).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || ws[1] != bs[0] {
            return Err(CoreError::Shape(format!(
                "dense: x {xs:?}, w {ws:?}, b {bs:?}"
            )));
        }
        let (batch, n_in, n_out) = (xs[0], xs[1], ws[1]);
        let mut y = matmul(self.value(x).data(), self.value(w).data(), batch, n_in, n_out);
        for row in y.chunks_mut(n_out) {
            for (v, bv) in row.iter_mut().zip(self.value(b).data()) {
                *v += bv;
            }
        }
        let (px, pw) = (x.0, w.0);
        Ok(self.push_op(
            Tensor::new(vec![batch, n_out], y)?,
            vec![x.0, w.0, b.0],
            Box::new(move |args| {
                let dy = args.out_grad;
                let dx = args.need[0].then(|| {
                    matmul_a_bt(dy, args.values[pw].data(), batch, n_out, n_in)
                });
                let dw = args.need[1].then(|| {
                    matmul_at_b(args.values[px].data(), dy, n_in, batch, n_out)
                });
                let db = args.need[2].then(|| {
                    let mut acc = vec![0.0; n_out];
                    for row in dy.chunks(n_out) {
                        for (a, g) in acc.iter_mut().zip(row) {
                            *a += g;
                        }
                    }
                    acc
                });
                vec![dx, dw, db]
            }),
        ))
    }

    /// 2-D convolution: x[B, Cin, H, W] * w[Cout, Cin, kh, kw] + b[Cout].
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(CoreError::Shape(format!("conv2d: x {xs:?}, w {ws:?}")));
        }
        if self.value(b).shape() != [ws[0]] {
            return Err(CoreError::Shape(format!(
                "conv2d: bias {:?} vs {} output channels",
                self.value(b).shape(),
                ws[0]
            )));
        }
        let (batch, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
        let ho = conv_out_len(h, kh, stride, pad)?;
        let wo = conv_out_len(wd, kw, stride, pad)?;
        let span = ho * wo;
        let ck = cin * kh * kw;

        let wmat = self.value(w).data();
        let bias = self.value(b).data();
        let xdat = self.value(x).data();
        let per_sample: Vec<Vec<f64>> = (0..batch)
            .into_par_iter()
            .map(|bi| {
                let cols = im2col(
                    &xdat[bi * cin * h * wd..][..cin * h * wd],
                    cin, h, wd, kh, kw, stride, pad, ho, wo,
                );
                let mut y = matmul(wmat, &cols, cout, ck, span);
                for (co, row) in y.chunks_mut(span).enumerate() {
                    for v in row.iter_mut() {
                        *v += bias[co];
                    }
                }
                y
            })
            .collect();
        let mut y = Vec::with_capacity(batch * cout * span);
        for s in per_sample {
            y.extend(s);
        }

        let (px, pw) = (x.0, w.0);
        Ok(self.push_op(
            Tensor::new(vec![batch, cout, ho, wo], y)?,
            vec![x.0, w.0, b.0],
            Box::new(move |args| {
                let wmat = args.values[pw].data();
                let xdat = args.values[px].data();
                let dy = args.out_grad;
                let (need_x, need_w, need_b) = (args.need[0], args.need[1], args.need[2]);
                // Per-sample partials, reduced in batch order for determinism.
                let parts: Vec<(Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>)> = (0
                    ..batch)
                    .into_par_iter()
                    .map(|bi| {
                        let dyb = &dy[bi * cout * span..][..cout * span];
                        let xb = &xdat[bi * cin * h * wd..][..cin * h * wd];
                        let dxb = need_x.then(|| {
                            let dcols = matmul_at_b(wmat, dyb, ck, cout, span);
                            col2im(&dcols, cin, h, wd, kh, kw, stride, pad, ho, wo)
                        });
                        let dwb = need_w.then(|| {
                            let cols = im2col(xb, cin, h, wd, kh, kw, stride, pad, ho, wo);
                            matmul_a_bt(dyb, &cols, cout, span, ck)
                        });
                        let dbb = need_b.then(|| {
                            dyb.chunks(span)
                                .map(|row| row.iter().sum::<f64>())
                                .collect::<Vec<f64>>()
                        });
                        (dxb, dwb, dbb)
                    })
                    .collect();
                let mut dx = need_x.then(|| vec![0.0; batch * cin * h * wd]);
                let mut dw = need_w.then(|| vec![0.0; cout * ck]);
                let mut db = need_b.then(|| vec![0.0; cout]);
                for (bi, (dxb, dwb, dbb)) in parts.into_iter().enumerate() {
                    if let (Some(dx), Some(dxb)) = (dx.as_mut(), dxb) {
                        dx[bi * cin * h * wd..][..cin * h * wd].copy_from_slice(&dxb);
                    }
                    if let (Some(dw), Some(dwb)) = (dw.as_mut(), dwb) {
                        for (a, g) in dw.iter_mut().zip(&dwb) {
                            *a += g;
                        }
                    }
                    if let (Some(db), Some(dbb)) = (db.as_mut(), dbb) {
                        for (a, g) in db.iter_mut().zip(&dbb) {
                            *a += g;
                        }
                    }
                }
                vec![dx, dw, db]
            }),
        ))
    }

    /// 1-D convolution: x[B, Cin, L] * w[Cout, Cin, k] + b[Cout].
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] {
            return Err(CoreError::Shape(format!("conv1d: x {xs:?}, w {ws:?}")));
        }
        // Reuse the 2-D kernels with a unit height axis.
        let x4 = self.reshape(x, &[xs[0], xs[1], 1, xs[2]])?;
        let w4 = self.reshape(w, &[ws[0], ws[1], 1, ws[2]])?;
        let y4 = self.conv2d_1d_padded(x4, w4, b, stride, pad)?;
        let ys = self.value(y4).shape().to_vec();
        self.reshape(y4, &[ys[0], ys[1], ys[3]])
    }

    /// conv2d with padding applied only along the width axis.
    fn conv2d_1d_padded(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        // Height is 1 and kernel height is 1, so zero height padding is
        // exactly what conv2d does when `pad` only affects width. conv2d
        // pads both axes, so call the specialized path here.
        self.conv2d_asym(x, w, b, stride, (0, pad))
    }

    /// conv2d with independent (height, width) padding: pads explicitly,
    /// then convolves unpadded.
    pub fn conv2d_asym(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: (usize, usize),
    ) -> Result<Var> {
        if pad.0 == pad.1 {
            return self.conv2d(x, w, b, stride, pad.0);
        }
        let xs = self.value(x).shape().to_vec();
        let (batch, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (ph, pw) = pad;
        let hp = h + 2 * ph;
        let wp = wd + 2 * pw;
        let mut data = vec![0.0; batch * c * hp * wp];
        {
            let src = self.value(x).data();
            for bc in 0..batch * c {
                for i in 0..h {
                    let dst = &mut data[((bc * hp + i + ph) * wp + pw)..][..wd];
                    dst.copy_from_slice(&src[(bc * h + i) * wd..][..wd]);
                }
            }
        }
        let padded = self.push_op(
            Tensor::new(vec![batch, c, hp, wp], data)?,
            vec![x.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let mut dx = vec![0.0; batch * c * h * wd];
                    for bc in 0..batch * c {
                        for i in 0..h {
                            let src = &args.out_grad[((bc * hp + i + ph) * wp + pw)..][..wd];
                            dx[(bc * h + i) * wd..][..wd].copy_from_slice(src);
                        }
                    }
                    dx
                })]
            }),
        );
        self.conv2d(padded, w, b, stride, 0)
    }

    /// 2x2 max pooling with stride 2 on x[B, C, H, W]; H and W must be even.
    pub fn maxpool2x2(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 4 || xs[2] % 2 != 0 || xs[3] % 2 != 0 {
            return Err(CoreError::Shape(format!(
                "maxpool2x2 expects [B, C, even H, even W], got {xs:?}"
            )));
        }
        let (batch, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (ho, wo) = (h / 2, w / 2);
        let src = self.value(x).data();
        let mut out = vec![0.0; batch * c * ho * wo];
        let mut argmax = vec![0usize; batch * c * ho * wo];
        for bc in 0..batch * c {
            let plane = &src[bc * h * w..][..h * w];
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for di in 0..2 {
                        for dj in 0..2 {
                            let idx = (oh * 2 + di) * w + ow * 2 + dj;
                            if plane[idx] > best {
                                best = plane[idx];
                                best_i = idx;
                            }
                        }
                    }
                    out[bc * ho * wo + oh * wo + ow] = best;
                    argmax[bc * ho * wo + oh * wo + ow] = bc * h * w + best_i;
                }
            }
        }
        let n_in = batch * c * h * w;
        Ok(self.push_op(
            Tensor::new(vec![batch, c, ho, wo], out)?,
            vec![x.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let mut dx = vec![0.0; n_in];
                    for (g, &i) in args.out_grad.iter().zip(&argmax) {
                        dx[i] += g;
                    }
                    dx
                })]
            }),
        ))
    }

    /// Nearest-neighbor 2x upsampling on x[B, C, H, W].
    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 4 {
            return Err(CoreError::Shape(format!(
                "upsample2x expects [B, C, H, W], got {xs:?}"
            )));
        }
        let (batch, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (ho, wo) = (h * 2, w * 2);
        let src = self.value(x).data();
        let mut out = vec![0.0; batch * c * ho * wo];
        for bc in 0..batch * c {
            for oh in 0..ho {
                let xrow = &src[(bc * h + oh / 2) * w..][..w];
                let orow = &mut out[(bc * ho + oh) * wo..][..wo];
                for (ow, v) in orow.iter_mut().enumerate() {
                    *v = xrow[ow / 2];
                }
            }
        }
        Ok(self.push_op(
            Tensor::new(vec![batch, c, ho, wo], out)?,
            vec![x.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let mut dx = vec![0.0; batch * c * h * w];
                    for bc in 0..batch * c {
                        for oh in 0..ho {
                            let grow = &args.out_grad[(bc * ho + oh) * wo..][..wo];
                            let drow = &mut dx[(bc * h + oh / 2) * w..][..w];
                            for (ow, g) in grow.iter().enumerate() {
                                drow[ow / 2] += g;
                            }
                        }
                    }
                    dx
                })]
            }),
        ))
    }
}

use rand::Rng;

use super::{fan_in_uniform, gemm, Grads, ParamId, ParamSet, Tensor};

/// 3×3 convolution, stride 1, zero padding 1 (output keeps the input size).
///
/// Weights are laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub cin: usize,
    pub cout: usize,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Conv3x3 {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        bias: bool,
    ) -> Self {
        let w = fan_in_uniform(rng, cout * cin * 9, cin * 9);
        let weight = params.push(format!("{name}.weight"), vec![cout, cin, 3, 3], w);
        let bias = bias.then(|| params.push(format!("{name}.bias"), vec![cout], vec![0.0; cout]));
        Conv3x3 {
            cin,
            cout,
            weight,
            bias,
        }
    }

    pub fn forward(&self, params: &ParamSet, x: &Tensor) -> Tensor {
        debug_assert_eq!(x.channels, self.cin);
        let (h, w) = (x.height, x.width);
        let mut y = Tensor::zeros(self.cout, h, w);
        if let Some(b) = self.bias {
            for (o, &bv) in params.get(b).iter().enumerate() {
                y.channel_mut(o).fill(bv);
            }
        }
        let cols = im2col(x);
        let k = self.cin * 9;
        gemm::matmul_acc(
            gemm::Mat::row_major(params.get(self.weight), self.cout, k),
            &cols,
            &mut y.data,
            h * w,
        );
        y
    }

    /// Accumulates weight/bias gradients into `grads` and returns the input
    /// gradient when `need_dx` is set.
    pub fn backward(
        &self,
        params: &ParamSet,
        x: &Tensor,
        dy: &Tensor,
        grads: &mut Grads,
        need_dx: bool,
    ) -> Option<Tensor> {
        let (h, w) = (x.height, x.width);
        let hw = h * w;
        let k = self.cin * 9;
        if let Some(b) = self.bias {
            let db = grads.get_mut(b);
            for (o, g) in db.iter_mut().enumerate() {
                *g += dy.channel(o).iter().sum::<f32>();
            }
        }
        let cols = im2col(x);
        let dw = grads.get_mut(self.weight);
        for o in 0..self.cout {
            let go = dy.channel(o);
            for (kk, g) in dw[o * k..(o + 1) * k].iter_mut().enumerate() {
                *g += gemm::dot(go, &cols[kk * hw..(kk + 1) * hw]);
            }
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0f32; k * hw];
        gemm::matmul_acc(
            gemm::Mat::transposed(params.get(self.weight), self.cout, k),
            &dy.data,
            &mut dcols,
            hw,
        );
        Some(col2im(&dcols, self.cin, h, w))
    }
}

/// Unfolds 3×3 zero-padded neighbourhoods: row `(i·9 + ky·3 + kx)` holds
/// input channel `i` shifted by `(ky−1, kx−1)`.
fn im2col(x: &Tensor) -> Vec<f32> {
    let (h, w) = (x.height, x.width);
    let hw = h * w;
    let mut cols = vec![0.0f32; x.channels * 9 * hw];
    for i in 0..x.channels {
        let inp = x.channel(i);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(i * 9 + ky * 3 + kx) * hw..][..hw];
                for yy in 0..h {
                    let sy = yy as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &inp[sy as usize * w..][..w];
                    let dst = &mut row[yy * w..][..w];
                    match kx {
                        0 if w > 1 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        2 if w > 1 => dst[..w - 1].copy_from_slice(&src[1..]),
                        _ => {}
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input grid.
fn col2im(dcols: &[f32], channels: usize, h: usize, w: usize) -> Tensor {
    let hw = h * w;
    let mut dx = Tensor::zeros(channels, h, w);
    for i in 0..channels {
        let di = dx.channel_mut(i);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &dcols[(i * 9 + ky * 3 + kx) * hw..][..hw];
                for yy in 0..h {
                    let sy = yy as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[yy * w..][..w];
                    let dst = &mut di[sy as usize * w..][..w];
                    let (d, s) = match kx {
                        0 if w > 1 => (&mut dst[..w - 1], &src[1..]),
                        1 => (&mut dst[..], src),
                        2 if w > 1 => (&mut dst[1..], &src[..w - 1]),
                        _ => continue,
                    };
                    for (a, b) in d.iter_mut().zip(s) {
                        *a += b;
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct definition of the convolution, used as an oracle.
    fn naive(conv: &Conv3x3, params: &ParamSet, x: &Tensor) -> Tensor {
        let (h, w) = (x.height as isize, x.width as isize);
        let wt = params.get(conv.weight);
        let mut y = Tensor::zeros(conv.cout, x.height, x.width);
        for o in 0..conv.cout {
            for yy in 0..h {
                for xx in 0..w {
                    let mut acc = conv.bias.map_or(0.0, |b| params.get(b)[o]) as f64;
                    for i in 0..conv.cin {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sy, sx) = (yy + ky - 1, xx + kx - 1);
                                if sy < 0 || sx < 0 || sy >= h || sx >= w {
                                    continue;
                                }
                                let wv = wt[((o * conv.cin + i) * 9) + (ky * 3 + kx) as usize];
                                acc += (wv * x.channel(i)[(sy * w + sx) as usize]) as f64;
                            }
                        }
                    }
                    y.channel_mut(o)[(yy * w + xx) as usize] = acc as f32;
                }
            }
        }
        y
    }

    fn setup(h: usize, w: usize) -> (Conv3x3, ParamSet, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let conv = Conv3x3::new(&mut params, &mut rng, "c", 2, 3, true);
        params.get_mut(conv.bias.unwrap()).copy_from_slice(&[0.1, -0.2, 0.3]);
        let data = (0..2 * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (conv, params, Tensor::from_data(2, h, w, data))
    }

    #[test]
    fn forward_matches_direct_definition() {
        for (h, w) in [(5, 7), (1, 1), (2, 1), (4, 4)] {
            let (conv, params, x) = setup(h, w);
            let fast = conv.forward(&params, &x);
            let slow = naive(&conv, &params, &x);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-5, "{h}x{w}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (conv, mut params, x) = setup(4, 5);
        // Loss = Σ y ⊙ r for a fixed random r, so dy = r.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r: Vec<f32> = (0..3 * 20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &ParamSet, x: &Tensor| -> f64 {
            conv.forward(p, x)
                .data
                .iter()
                .zip(&r)
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum()
        };
        let dy = Tensor::from_data(3, 4, 5, r.clone());
        let mut grads = params.zero_grads();
        let dx = conv.backward(&params, &x, &dy, &mut grads, true).unwrap();
        let h = 1e-2f32;
        for idx in [0, 7, 13, 30, 53] {
            let orig = params.get(conv.weight)[idx];
            params.get_mut(conv.weight)[idx] = orig + h;
            let up = loss(&params, &x);
            params.get_mut(conv.weight)[idx] = orig - h;
            let dn = loss(&params, &x);
            params.get_mut(conv.weight)[idx] = orig;
            let fd = (up - dn) / (2.0 * h as f64);
            let an = grads.get(conv.weight)[idx] as f64;
            assert!((fd - an).abs() < 1e-3, "w[{idx}]: {fd} vs {an}");
        }
        for idx in [0, 11, 19, 33] {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let mut xm = x.clone();
            xm.data[idx] -= h;
            let fd = (loss(&params, &xp) - loss(&params, &xm)) / (2.0 * h as f64);
            assert!((fd - dx.data[idx] as f64).abs() < 1e-3, "x[{idx}]");
        }
        let db = grads.get(conv.bias.unwrap());
        for o in 0..3 {
            let expect: f32 = r[o * 20..(o + 1) * 20].iter().sum();
            assert!((db[o] - expect).abs() < 1e-4);
        }
    }
}

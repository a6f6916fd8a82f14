use rand::Rng;

use super::{fan_in_uniform, Grads, ParamId, ParamSet, Tensor};

pub fn relu_inplace(t: &mut Tensor) {
    t.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Masks `grad` by the positive entries of the (post-activation) `output`.
pub fn relu_backward_inplace(grad: &mut Tensor, output: &Tensor) {
    for (g, &o) in grad.data.iter_mut().zip(&output.data) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Argmax positions recorded by [`max_pool2`], indexed into the input channel.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    in_height: usize,
    in_width: usize,
    idx: Vec<u32>,
}

/// 2×2 max-pool with stride 2. Odd trailing rows/columns are dropped.
pub fn max_pool2(x: &Tensor) -> (Tensor, PoolIndices) {
    let (oh, ow) = (x.height / 2, x.width / 2);
    let mut y = Tensor::zeros(x.channels, oh, ow);
    let mut idx = vec![0u32; x.channels * oh * ow];
    for c in 0..x.channels {
        let inp = x.channel(c);
        let out = y.channel_mut(c);
        let ix = &mut idx[c * oh * ow..(c + 1) * oh * ow];
        for yy in 0..oh {
            for xx in 0..ow {
                let base = 2 * yy * x.width + 2 * xx;
                let cands = [base, base + 1, base + x.width, base + x.width + 1];
                let mut best = cands[0];
                for &k in &cands[1..] {
                    if inp[k] > inp[best] {
                        best = k;
                    }
                }
                out[yy * ow + xx] = inp[best];
                ix[yy * ow + xx] = best as u32;
            }
        }
    }
    (
        y,
        PoolIndices {
            in_height: x.height,
            in_width: x.width,
            idx,
        },
    )
}

pub fn max_pool2_backward(dy: &Tensor, indices: &PoolIndices) -> Tensor {
    let mut dx = Tensor::zeros(dy.channels, indices.in_height, indices.in_width);
    let n = dy.plane_len();
    for c in 0..dy.channels {
        let g = dy.channel(c);
        let ix = &indices.idx[c * n..(c + 1) * n];
        let d = dx.channel_mut(c);
        for (&k, &v) in ix.iter().zip(g) {
            d[k as usize] += v;
        }
    }
    dx
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2(x: &Tensor) -> Tensor {
    let (oh, ow) = (x.height * 2, x.width * 2);
    let mut y = Tensor::zeros(x.channels, oh, ow);
    for c in 0..x.channels {
        let inp = x.channel(c);
        let out = y.channel_mut(c);
        for yy in 0..oh {
            let irow = &inp[(yy / 2) * x.width..][..x.width];
            let orow = &mut out[yy * ow..(yy + 1) * ow];
            for (pair, &v) in orow.chunks_exact_mut(2).zip(irow) {
                pair[0] = v;
                pair[1] = v;
            }
        }
    }
    y
}

pub fn upsample2_backward(dy: &Tensor) -> Tensor {
    let (h, w) = (dy.height / 2, dy.width / 2);
    let mut dx = Tensor::zeros(dy.channels, h, w);
    for c in 0..dy.channels {
        let g = dy.channel(c);
        let d = dx.channel_mut(c);
        for yy in 0..dy.height {
            let grow = &g[yy * dy.width..(yy + 1) * dy.width];
            let drow = &mut d[(yy / 2) * w..(yy / 2 + 1) * w];
            for (acc, pair) in drow.iter_mut().zip(grow.chunks_exact(2)) {
                *acc += pair[0] + pair[1];
            }
        }
    }
    dx
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!((a.height, a.width), (b.height, b.width));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::from_data(a.channels + b.channels, a.height, a.width, data)
}

/// Splits off the first `first` channels.
pub fn split_channels(t: &Tensor, first: usize) -> (Tensor, Tensor) {
    let n = t.plane_len();
    let a = Tensor::from_data(first, t.height, t.width, t.data[..first * n].to_vec());
    let b = Tensor::from_data(
        t.channels - first,
        t.height,
        t.width,
        t.data[first * n..].to_vec(),
    );
    (a, b)
}

pub fn global_avg_pool(x: &Tensor) -> Vec<f32> {
    let n = x.plane_len() as f32;
    (0..x.channels)
        .map(|c| x.channel(c).iter().sum::<f32>() / n)
        .collect()
}

pub fn global_avg_pool_backward(dy: &[f32], height: usize, width: usize) -> Tensor {
    let n = (height * width) as f32;
    let mut dx = Tensor::zeros(dy.len(), height, width);
    for (c, &g) in dy.iter().enumerate() {
        dx.channel_mut(c).fill(g / n);
    }
    dx
}

/// Fully connected layer, weights laid out `[out][in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub din: usize,
    pub dout: usize,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        rng: &mut R,
        name: &str,
        din: usize,
        dout: usize,
        bias: bool,
    ) -> Self {
        let w = fan_in_uniform(rng, din * dout, din);
        let weight = params.push(format!("{name}.weight"), vec![dout, din], w);
        let bias = bias.then(|| params.push(format!("{name}.bias"), vec![dout], vec![0.0; dout]));
        Linear {
            din,
            dout,
            weight,
            bias,
        }
    }

    pub fn forward(&self, params: &ParamSet, x: &[f32]) -> Vec<f32> {
        let w = params.get(self.weight);
        let b = self.bias.map(|b| params.get(b));
        (0..self.dout)
            .map(|o| {
                let row = &w[o * self.din..(o + 1) * self.din];
                let dot: f32 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                dot + b.map_or(0.0, |b| b[o])
            })
            .collect()
    }

    pub fn backward(&self, params: &ParamSet, x: &[f32], dy: &[f32], grads: &mut Grads) -> Vec<f32> {
        if let Some(b) = self.bias {
            for (g, d) in grads.get_mut(b).iter_mut().zip(dy) {
                *g += d;
            }
        }
        let gw = grads.get_mut(self.weight);
        for (o, &d) in dy.iter().enumerate() {
            for (g, &xi) in gw[o * self.din..(o + 1) * self.din].iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        let w = params.get(self.weight);
        let mut dx = vec![0.0; self.din];
        for (o, &d) in dy.iter().enumerate() {
            for (acc, &wi) in dx.iter_mut().zip(&w[o * self.din..(o + 1) * self.din]) {
                *acc += d * wi;
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_then_unpool_routes_to_argmax() {
        let x = Tensor::from_data(1, 2, 4, vec![1.0, 5.0, 0.0, 0.0, 2.0, 3.0, 9.0, 1.0]);
        let (y, idx) = max_pool2(&x);
        assert_eq!(y.data, vec![5.0, 9.0]);
        let dx = max_pool2_backward(&Tensor::from_data(1, 1, 2, vec![1.0, 2.0]), &idx);
        assert_eq!(dx.data, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn upsample_backward_is_adjoint() {
        let x = Tensor::from_data(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let y = upsample2(&x);
        assert_eq!(y.data[..4], [1.0, 1.0, 2.0, 2.0]);
        assert_eq!(y.data[4..8], [1.0, 1.0, 2.0, 2.0]);
        let dx = upsample2_backward(&Tensor::from_data(1, 4, 4, vec![1.0; 16]));
        assert_eq!(dx.data, vec![4.0; 4]);
    }

    #[test]
    fn split_inverts_concat() {
        let a = Tensor::from_data(1, 1, 2, vec![1.0, 2.0]);
        let b = Tensor::from_data(2, 1, 2, vec![3.0, 4.0, 5.0, 6.0]);
        let (a2, b2) = split_channels(&concat_channels(&a, &b), 1);
        assert_eq!((a2, b2), (a, b));
    }
}

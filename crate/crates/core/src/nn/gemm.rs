//! Small dense kernels behind the convolutions. Loop order is fixed, so
//! results are bit-reproducible for a given build.

/// Read-only view of an `rows × cols` matrix stored row-major, optionally
/// read through its transpose.
#[derive(Clone, Copy)]
pub struct Mat<'a> {
    data: &'a [f32],
    rows: usize,
    cols: usize,
    stride_r: usize,
    stride_c: usize,
}

impl<'a> Mat<'a> {
    pub fn row_major(data: &'a [f32], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Mat {
            data,
            rows,
            cols,
            stride_r: cols,
            stride_c: 1,
        }
    }

    /// The transpose of a row-major `rows × cols` matrix (a `cols × rows` view).
    pub fn transposed(data: &'a [f32], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Mat {
            data,
            rows: cols,
            cols: rows,
            stride_r: 1,
            stride_c: cols,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.stride_r + c * self.stride_c]
    }
}

const COL_BLOCK: usize = 512;
const ROW_BLOCK: usize = 4;

/// `c += a · b` with `b` (`a.cols × n`) and `c` (`a.rows × n`) row-major.
pub fn matmul_acc(a: Mat<'_>, b: &[f32], c: &mut [f32], n: usize) {
    let (m, k) = (a.rows, a.cols);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let mut j0 = 0;
    while j0 < n {
        let nb = COL_BLOCK.min(n - j0);
        let mut i = 0;
        while i + ROW_BLOCK <= m {
            let (c0, rest) = c[i * n..].split_at_mut(n);
            let (c1, rest) = rest.split_at_mut(n);
            let (c2, rest) = rest.split_at_mut(n);
            let c3 = &mut rest[..n];
            let (c0, c1, c2, c3) = (
                &mut c0[j0..j0 + nb],
                &mut c1[j0..j0 + nb],
                &mut c2[j0..j0 + nb],
                &mut c3[j0..j0 + nb],
            );
            for kk in 0..k {
                let (w0, w1, w2, w3) = (a.at(i, kk), a.at(i + 1, kk), a.at(i + 2, kk), a.at(i + 3, kk));
                let br = &b[kk * n + j0..kk * n + j0 + nb];
                for ((((x, y0), y1), y2), y3) in br
                    .iter()
                    .zip(c0.iter_mut())
                    .zip(c1.iter_mut())
                    .zip(c2.iter_mut())
                    .zip(c3.iter_mut())
                {
                    *y0 += w0 * x;
                    *y1 += w1 * x;
                    *y2 += w2 * x;
                    *y3 += w3 * x;
                }
            }
            i += ROW_BLOCK;
        }
        for i in i..m {
            let cr = &mut c[i * n + j0..i * n + j0 + nb];
            for kk in 0..k {
                let w = a.at(i, kk);
                let br = &b[kk * n + j0..kk * n + j0 + nb];
                for (y, x) in cr.iter_mut().zip(br) {
                    *y += w * x;
                }
            }
        }
        j0 += nb;
    }
}

/// Dot product with eight independent partial sums.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Mat, b: &[f32], n: usize) -> Vec<f32> {
        let mut c = vec![0.0; a.rows * n];
        for i in 0..a.rows {
            for j in 0..n {
                for kk in 0..a.cols {
                    c[i * n + j] += a.at(i, kk) * b[kk * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matches_naive_product() {
        for (m, k, n) in [(1, 1, 1), (5, 3, 7), (8, 9, 1030), (3, 2, 4)] {
            let ad: Vec<f32> = (0..m * k).map(|i| (i % 5) as f32 - 2.0).collect();
            let b: Vec<f32> = (0..k * n).map(|i| (i % 7) as f32 * 0.5).collect();
            let a = Mat::row_major(&ad, m, k);
            let mut c = vec![0.0; m * n];
            matmul_acc(a, &b, &mut c, n);
            assert_eq!(c, naive(&a, &b, n));
            let at = Mat::transposed(&ad, m, k);
            let b2: Vec<f32> = (0..m * n).map(|i| (i % 3) as f32).collect();
            let mut c2 = vec![0.0; k * n];
            matmul_acc(at, &b2, &mut c2, n);
            assert_eq!(c2, naive(&at, &b2, n));
        }
    }

    #[test]
    fn dot_matches_sum() {
        let a: Vec<f32> = (0..21).map(|i| i as f32).collect();
        let expect: f32 = a.iter().map(|x| x * x).sum();
        assert_eq!(dot(&a, &a), expect);
    }
}

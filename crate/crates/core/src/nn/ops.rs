//! Batched layer primitives and their vector-Jacobian products.
//!
//! Activations are `[N, C, H, W]` buffers in row-major order.

use super::tensor::Real;

/// Geometry of one 2-D convolution over a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub out_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn in_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_c * self.out_h() * self.out_w()
    }

    fn col_rows(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn col_cols(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unfolds one sample into `[C*k*k, Ho*Wo]` patch columns (zero padded).
fn im2col<T: Real>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (h, w) = (g.in_h as isize, g.in_w as isize);
    let mut row = 0;
    for c in 0..g.in_c {
        let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let dst = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, out) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *out = if ix < 0 || ix >= w { T::zero() } else { src[ix as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-column gradients back (accumulating).
fn col2im<T: Real>(g: &ConvGeom, cols: &[T], dx: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (h, w) = (g.in_h as isize, g.in_w as isize);
    let mut row = 0;
    for c in 0..g.in_c {
        let plane = &mut dx[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < w {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// `y = conv(x, weight) + bias` for a batch of `n` samples.
pub fn conv2d_forward<T: Real>(g: &ConvGeom, n: usize, x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let (rows, ncols) = (g.col_rows(), g.col_cols());
    let mut cols = vec![T::zero(); rows * ncols];
    let mut y = vec![T::zero(); n * g.out_len()];
    for s in 0..n {
        im2col(g, &x[s * g.in_len()..(s + 1) * g.in_len()], &mut cols);
        let out = &mut y[s * g.out_len()..(s + 1) * g.out_len()];
        for (oc, chunk) in out.chunks_mut(ncols).enumerate() {
            chunk.fill(bias[oc]);
        }
        T::gemm(g.out_c, rows, ncols, T::one(), weight, false, &cols, false, T::one(), out);
    }
    y
}

/// Accumulates weight/bias gradients and returns the input gradient when
/// `need_dx` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Real>(
    g: &ConvGeom,
    n: usize,
    x: &[T],
    weight: &[T],
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    let (rows, ncols) = (g.col_rows(), g.col_cols());
    let mut cols = vec![T::zero(); rows * ncols];
    let mut dcols = vec![T::zero(); if need_dx { rows * ncols } else { 0 }];
    let mut dx = if need_dx { Some(vec![T::zero(); n * g.in_len()]) } else { None };
    for s in 0..n {
        let dys = &dy[s * g.out_len()..(s + 1) * g.out_len()];
        for (oc, chunk) in dys.chunks(ncols).enumerate() {
            dbias[oc] += chunk.iter().copied().sum::<T>();
        }
        im2col(g, &x[s * g.in_len()..(s + 1) * g.in_len()], &mut cols);
        // dW[oc, r] += sum_p dy[oc, p] * cols[r, p]
        T::gemm(g.out_c, ncols, rows, T::one(), dys, false, &cols, true, T::one(), dweight);
        if let Some(dx) = dx.as_mut() {
            // dcols[r, p] = sum_oc W[oc, r] * dy[oc, p]
            T::gemm(rows, g.out_c, ncols, T::one(), weight, true, dys, false, T::zero(), &mut dcols);
            col2im(g, &dcols, &mut dx[s * g.in_len()..(s + 1) * g.in_len()]);
        }
    }
    dx
}

pub fn relu_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` wherever the ReLU output `activated` is not positive.
pub fn relu_backward_inplace<T: Real>(activated: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Channel-wise spatial mean: `[N, C, H*W] -> [N, C]`.
pub fn global_avg_pool<T: Real>(x: &[T], n: usize, c: usize, hw: usize) -> Vec<T> {
    let inv = T::one() / T::from_usize(hw).unwrap();
    (0..n * c).map(|i| x[i * hw..(i + 1) * hw].iter().copied().sum::<T>() * inv).collect()
}

pub fn global_avg_pool_backward<T: Real>(dpooled: &[T], hw: usize) -> Vec<T> {
    let inv = T::one() / T::from_usize(hw).unwrap();
    dpooled.iter().flat_map(|&d| std::iter::repeat_n(d * inv, hw)).collect()
}

/// `y[N, out] = x[N, in] * W^T + b` with `W` stored `[out, in]`.
pub fn linear_forward<T: Real>(x: &[T], n: usize, inp: usize, out: usize, weight: &[T], bias: &[T]) -> Vec<T> {
    let mut y: Vec<T> = (0..n).flat_map(|_| bias.iter().copied()).collect();
    T::gemm(n, inp, out, T::one(), x, false, weight, true, T::one(), &mut y);
    y
}

/// Accumulates `dW`, `db`; returns `dx`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Real>(
    x: &[T],
    n: usize,
    inp: usize,
    out: usize,
    weight: &[T],
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    for row in dy.chunks(out) {
        for (db, &d) in dbias.iter_mut().zip(row) {
            *db += d;
        }
    }
    // dW[o, i] += sum_n dy[n, o] x[n, i]
    T::gemm(out, n, inp, T::one(), dy, true, x, false, T::one(), dweight);
    let mut dx = vec![T::zero(); n * inp];
    T::gemm(n, out, inp, T::one(), dy, false, weight, false, T::zero(), &mut dx);
    dx
}

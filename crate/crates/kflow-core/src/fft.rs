//! In-place complex FFT on interleaved `[re, im]` buffers.
//!
//! Power-of-two lengths use an iterative radix-2 transform with precomputed
//! twiddles; other lengths fall back to a direct DFT so the torus model
//! accepts any grid size in tests. The butterfly loop walks paired slice
//! chunks instead of raw indices, which keeps bounds checks out of the hot
//! path without unsafe code.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Transform plan for a fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    // Bit-reversal permutation (radix-2 path only).
    rev: Vec<u32>,
    // Twiddles e^{-2 pi i k / n} for k < n/2 (forward direction).
    tw_re: Vec<f64>,
    tw_im: Vec<f64>,
    pow2: bool,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let pow2 = n.is_power_of_two();
        let mut rev = Vec::new();
        if pow2 && n > 1 {
            let bits = n.trailing_zeros();
            rev = (0..n as u32).map(|i| i.reverse_bits() >> (32 - bits)).collect();
        }
        let half = if pow2 { n / 2 } else { n };
        let mut tw_re = Vec::with_capacity(half);
        let mut tw_im = Vec::with_capacity(half);
        for k in 0..half {
            let ang = -2.0 * core::f64::consts::PI * k as f64 / n as f64;
            tw_re.push(math::cos(ang));
            tw_im.push(math::sin(ang));
        }
        Self { n, rev, tw_re, tw_im, pow2 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform, `X_k = sum_j x_j e^{-2 pi i jk/n}`, in place on
    /// interleaved complex data of length `2n`.
    pub fn forward(&self, buf: &mut [f64]) {
        self.run(buf, false);
    }

    /// Unnormalized inverse transform, `x_j = sum_k X_k e^{+2 pi i jk/n}`.
    /// Callers divide by `n` where a true inverse is needed.
    pub fn inverse(&self, buf: &mut [f64]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [f64], inverse: bool) {
        assert_eq!(buf.len(), 2 * self.n);
        if self.n == 1 {
            return;
        }
        if !self.pow2 {
            self.naive(buf, inverse);
            return;
        }
        let n = self.n;
        for (i, &r) in self.rev.iter().enumerate() {
            let r = r as usize;
            if i < r {
                buf.swap(2 * i, 2 * r);
                buf.swap(2 * i + 1, 2 * r + 1);
            }
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for block in buf.chunks_exact_mut(2 * len) {
                let (lo, hi) = block.split_at_mut(len);
                let pairs = lo.chunks_exact_mut(2).zip(hi.chunks_exact_mut(2));
                for (k, (a, b)) in pairs.enumerate() {
                    let wr = self.tw_re[k * stride];
                    let wi = sign * self.tw_im[k * stride];
                    let tr = b[0] * wr - b[1] * wi;
                    let ti = b[0] * wi + b[1] * wr;
                    b[0] = a[0] - tr;
                    b[1] = a[1] - ti;
                    a[0] += tr;
                    a[1] += ti;
                }
            }
            len *= 2;
        }
    }

    fn naive(&self, buf: &mut [f64], inverse: bool) {
        let n = self.n;
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            let mut sr = 0.0;
            let mut si = 0.0;
            for j in 0..n {
                let idx = (j * k) % n;
                let wr = self.tw_re[idx];
                let wi = if inverse { -self.tw_im[idx] } else { self.tw_im[idx] };
                let (xr, xi) = (buf[2 * j], buf[2 * j + 1]);
                sr += xr * wr - xi * wi;
                si += xr * wi + xi * wr;
            }
            out[2 * k] = sr;
            out[2 * k + 1] = si;
        }
        buf.copy_from_slice(&out);
    }
}

//! Scalar math shims usable without `std`, a vectorizable natural log for
//! node arrays, and a small deterministic random stream.

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.ln()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::log(x)
    }
}

/// Exponential.
#[inline]
pub fn exp(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.exp()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::exp(x)
    }
}

/// Square root.
#[inline]
pub fn sqrt(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.sqrt()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::sqrt(x)
    }
}

/// Sine.
#[inline]
pub fn sin(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.sin()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::sin(x)
    }
}

/// Cosine.
#[inline]
pub fn cos(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.cos()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::cos(x)
    }
}

/// Absolute value through bit masking (works on any target).
#[inline]
pub fn abs(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

/// Natural log over a slice of strictly positive values.
///
/// Branch-free reduction to `m in [sqrt(1/2), sqrt(2))` followed by an
/// atanh-style odd polynomial; accurate to a few ulp, and much faster than
/// scalar `ln` calls inside the flow stepper where it is applied to every
/// quadrature node at every stage.
pub fn ln_slice(xs: &[f64], out: &mut [f64]) {
    debug_assert_eq!(xs.len(), out.len());
    const LN2: f64 = core::f64::consts::LN_2;
    // Coefficients of atanh(t)/t in powers of t^2 (taylor terms 1/(2k+1));
    // |t| <= 0.1716 so truncating the odd series after degree 21 leaves less
    // than 1e-18 absolute error.
    const C: [f64; 11] = [
        1.0,
        1.0 / 3.0,
        1.0 / 5.0,
        1.0 / 7.0,
        1.0 / 9.0,
        1.0 / 11.0,
        1.0 / 13.0,
        1.0 / 15.0,
        1.0 / 17.0,
        1.0 / 19.0,
        1.0 / 21.0,
    ];
    // sqrt(2) threshold on the mantissa field used to steer m into
    // [sqrt(1/2), sqrt(2)).
    const SQRT2_BITS: u64 = 0x3FF6A09E667F3BCDu64 & 0x000F_FFFF_FFFF_FFFF;
    for (o, &x) in out.iter_mut().zip(xs) {
        let bits = x.to_bits();
        let mantissa = bits & 0x000F_FFFF_FFFF_FFFF;
        let high = (mantissa >= SQRT2_BITS) as u64;
        let e = ((bits >> 52) as i64 - 1023 + high as i64) as f64;
        let m = f64::from_bits(mantissa | ((1023 - high) << 52));
        let t = (m - 1.0) / (m + 1.0);
        let t2 = t * t;
        let mut p = C[10];
        for k in (0..10).rev() {
            p = p * t2 + C[k];
        }
        *o = e * LN2 + 2.0 * t * p;
    }
}

/// SplitMix64: a tiny, well-mixed deterministic stream used to seed random
/// test data identically on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (-1, 1).
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

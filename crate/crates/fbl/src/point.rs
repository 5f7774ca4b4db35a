use num_complex::Complex64;

use crate::FblError;

/// The reduced scalar channel fed to the bound.
///
/// Symbols are `q ~ CN(0, rho)`, the effective noise (thermal noise plus
/// estimation error plus residual interference) is `z ~ CN(0, sigma2)` and the
/// decoder uses `ghat` in place of the true gain `g`. `log_m1` is `log(m - 1)`
/// in nats for a codebook of `m` codewords of length `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarChannelPoint {
    pub g: Complex64,
    pub ghat: Complex64,
    pub sigma2: f64,
    pub rho: f64,
    pub n: usize,
    pub log_m1: f64,
}

impl ScalarChannelPoint {
    pub fn new(
        g: Complex64,
        ghat: Complex64,
        sigma2: f64,
        rho: f64,
        n: usize,
        log_m1: f64,
    ) -> Result<Self, FblError> {
        let point = Self {
            g,
            ghat,
            sigma2,
            rho,
            n,
            log_m1,
        };
        point.validate()?;
        Ok(point)
    }

    /// Convenience constructor for a codebook of `2^bits` codewords.
    pub fn with_payload_bits(
        g: Complex64,
        ghat: Complex64,
        sigma2: f64,
        rho: f64,
        n: usize,
        bits: u32,
    ) -> Result<Self, FblError> {
        Self::new(g, ghat, sigma2, rho, n, log_m_minus_1(bits))
    }

    pub fn validate(&self) -> Result<(), FblError> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(FblError::InvalidPoint(format!(
                "effective noise variance must be positive, got {}",
                self.sigma2
            )));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(FblError::InvalidPoint(format!(
                "symbol power must be nonnegative, got {}",
                self.rho
            )));
        }
        if self.n == 0 {
            return Err(FblError::InvalidPoint("blocklength must be at least 1".into()));
        }
        if !(self.g.re.is_finite() && self.g.im.is_finite())
            || !(self.ghat.re.is_finite() && self.ghat.im.is_finite())
        {
            return Err(FblError::InvalidPoint("non-finite channel gain".into()));
        }
        if self.log_m1.is_nan() || self.log_m1 == f64::INFINITY {
            return Err(FblError::InvalidPoint(format!(
                "log(m-1) must be finite or -inf, got {}",
                self.log_m1
            )));
        }
        Ok(())
    }

    /// Rate `log(m-1)/n` in nats per channel use.
    pub fn rate(&self) -> f64 {
        self.log_m1 / self.n as f64
    }

    /// `E|v - ĝq|²`, the per-symbol metric of the transmitted codeword:
    /// thermal plus interference noise and the gain mismatch seen by the
    /// decoder. Equals `sigma2` for matched decoding.
    pub fn metric_noise(&self) -> f64 {
        self.sigma2 + self.rho * (self.g - self.ghat).norm_sqr()
    }

    /// Same point with gains scaled by `c`, noise by `|c|^2`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            g: self.g * c,
            ghat: self.ghat * c,
            sigma2: self.sigma2 * c.norm_sqr(),
            ..*self
        }
    }
}

/// `log(2^bits - 1)` in nats; `-inf` for a single-codeword book.
pub fn log_m_minus_1(bits: u32) -> f64 {
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let b = bits as f64;
    b * std::f64::consts::LN_2 + (-(2f64).powf(-b)).ln_1p()
}

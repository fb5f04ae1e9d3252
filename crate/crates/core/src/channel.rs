//! Uncoded BPSK over an AWGN channel.
//!
//! Bit 0 maps to `+1.0`, bit 1 to `-1.0`. For a noise standard deviation `σ`
//! the exact posterior log-odds of a received sample `y` under equiprobable
//! bits is `L = ln P(0|y)/P(1|y) = 2y/σ²`.
//!
//! Noise is drawn from a ChaCha stream selected by `(seed, stream)`. Trial `k`
//! of an experiment uses stream `k`, so results do not depend on the order in
//! which trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::text_codec::BitSeq;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Per-dimension Gaussian noise standard deviation.
    pub noise_std: f64,
    pub seed: u64,
    /// ChaCha stream index under `seed`.
    pub stream: u64,
}

impl ChannelParams {
    pub fn new(noise_std: f64, seed: u64) -> Self {
        Self::for_trial(noise_std, seed, 0)
    }

    pub fn for_trial(noise_std: f64, seed: u64, trial: u64) -> Self {
        assert!(
            noise_std.is_finite() && noise_std > 0.0,
            "noise_std must be finite and positive, got {noise_std}"
        );
        Self {
            noise_std,
            seed,
            stream: trial,
        }
    }

    /// Eb/N0 in dB for unit-energy symbols.
    pub fn eb_n0_db(&self) -> f64 {
        sigma_to_snr_db(self.noise_std)
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `Eb/N0 = 1/(2σ²)`, in dB.
pub fn sigma_to_snr_db(noise_std: f64) -> f64 {
    10.0 * (1.0 / (2.0 * noise_std * noise_std)).log10()
}

pub fn snr_db_to_sigma(snr_db: f64) -> f64 {
    (1.0 / (2.0 * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Hard-decision bit error rate at noise level `noise_std`.
pub fn bit_error_rate(noise_std: f64) -> f64 {
    q_function(1.0 / noise_std)
}

/// Per-bit log-likelihood ratios, `ln P(bit=0|y) / P(bit=1|y)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LlrSeq(pub Vec<f64>);

impl LlrSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for LlrSeq {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

pub fn modulate(bits: &BitSeq) -> Vec<f64> {
    bits.iter()
        .map(|b| if b == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Adds seeded Gaussian noise to every symbol.
pub fn transmit(symbols: &[f64], params: &ChannelParams) -> Vec<f64> {
    transmit_protected(symbols, params, |_| false)
}

/// Like [`transmit`], but symbols for which `protected(i)` holds arrive
/// noise-free. A noise sample is still drawn for them, so the noise seen by
/// unprotected symbols is the same as in [`transmit`].
pub fn transmit_protected(
    symbols: &[f64],
    params: &ChannelParams,
    protected: impl Fn(usize) -> bool,
) -> Vec<f64> {
    let mut rng = params.rng();
    symbols
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if protected(i) {
                x
            } else {
                x + params.noise_std * z
            }
        })
        .collect()
}

pub fn compute_llrs(received: &[f64], params: &ChannelParams) -> LlrSeq {
    let scale = 2.0 / (params.noise_std * params.noise_std);
    LlrSeq(received.iter().map(|&y| scale * y).collect())
}

/// `L >= 0` decides 0, `L < 0` decides 1.
pub fn hard_decide(llrs: &LlrSeq) -> BitSeq {
    BitSeq::from_bits(llrs.0.iter().map(|&l| (l < 0.0) as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_codec::bytes_to_bits;

    #[test]
    fn modulate_mapping() {
        assert_eq!(modulate(&BitSeq::from_bits([0, 1, 1])), vec![1.0, -1.0, -1.0]);
        assert!(modulate(&BitSeq::default()).is_empty());
        assert_eq!(modulate(&BitSeq::from_bits([0; 8])), vec![1.0; 8]);
    }

    #[test]
    fn llr_formula() {
        let unit = ChannelParams::new(1.0, 0);
        assert_eq!(compute_llrs(&[1.0], &unit).0, vec![2.0]);
        assert_eq!(compute_llrs(&[0.0], &ChannelParams::new(0.3, 0)).0, vec![0.0]);
        assert_eq!(compute_llrs(&[2.0], &ChannelParams::new(0.5, 0)).0, vec![16.0]);
    }

    #[test]
    fn hard_decisions() {
        let bits = hard_decide(&LlrSeq(vec![2.0, -0.1, 0.0]));
        assert_eq!(bits.as_slice(), &[0, 1, 0]);
        assert_eq!(hard_decide(&LlrSeq(vec![0.5; 5])).as_slice(), &[0; 5]);
    }

    #[test]
    fn noiseless_identity() {
        let bits = bytes_to_bits(b"the quick brown fox");
        let params = ChannelParams::new(1e-6, 3);
        let y = transmit(&modulate(&bits), &params);
        assert_eq!(hard_decide(&compute_llrs(&y, &params)), bits);
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let x = vec![1.0; 256];
        let a = transmit(&x, &ChannelParams::for_trial(0.8, 11, 4));
        let b = transmit(&x, &ChannelParams::for_trial(0.8, 11, 4));
        let c = transmit(&x, &ChannelParams::for_trial(0.8, 11, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn protection_keeps_other_noise() {
        let x = vec![-1.0; 64];
        let params = ChannelParams::new(0.9, 5);
        let plain = transmit(&x, &params);
        let prot = transmit_protected(&x, &params, |i| i % 8 == 2);
        for i in 0..64 {
            if i % 8 == 2 {
                assert_eq!(prot[i], -1.0);
            } else {
                assert_eq!(prot[i], plain[i]);
            }
        }
    }

    #[test]
    fn noise_moments() {
        let n = 1_000_000;
        let params = ChannelParams::new(1.0, 2024);
        let y = transmit(&vec![0.0; n], &params);
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn snr_conversions() {
        assert!((sigma_to_snr_db(snr_db_to_sigma(3.0)) - 3.0).abs() < 1e-12);
        // σ² = 1/2 is 0 dB.
        assert!((sigma_to_snr_db(0.5f64.sqrt())).abs() < 1e-12);
    }
}

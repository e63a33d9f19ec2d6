//! DDPM variance schedule and closed-form diffusion arithmetic.
//!
//! Steps are 1-based: `t ∈ 1..=T`, and `alpha_bar(t) = ∏_{s≤t} (1 − β_s)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// β linear from `beta_start` to `beta_end`.
    Linear { beta_start: f64, beta_end: f64 },
    /// Squared-cosine ᾱ with offset `s = 0.008`, β capped at 0.999.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    gamma: f64,
}

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.07;
pub const DEFAULT_GAMMA: f64 = 5.0;

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::new(
            DEFAULT_STEPS,
            ScheduleKind::Linear {
                beta_start: DEFAULT_BETA_START,
                beta_end: DEFAULT_BETA_END,
            },
            DEFAULT_GAMMA,
        )
        .expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    pub fn new(steps: usize, kind: ScheduleKind, gamma: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidData("schedule needs at least one step".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidData("Min-SNR gamma must be positive".into()));
        }
        let beta: Vec<f64> = match kind {
            ScheduleKind::Linear { beta_start, beta_end } => (0..steps)
                .map(|i| {
                    if steps == 1 {
                        beta_start
                    } else {
                        beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                    }
                })
                .collect(),
            ScheduleKind::Cosine => {
                let f = |t: f64| {
                    let s = 0.008;
                    ((t / steps as f64 + s) / (1.0 + s) * std::f64::consts::FRAC_PI_2)
                        .cos()
                        .powi(2)
                };
                (0..steps)
                    .map(|i| (1.0 - f((i + 1) as f64) / f(i as f64)).clamp(1e-8, 0.999))
                    .collect()
            }
        };
        if beta.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::InvalidData("every beta must lie in (0, 1)".into()));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let alpha_bar = alpha
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            kind,
            beta,
            alpha,
            alpha_bar,
            gamma,
        })
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            Err(Error::StepOutOfRange {
                step: t,
                max: self.steps(),
            })
        } else {
            Ok(())
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// ᾱ_t, with ᾱ_0 = 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    pub fn snr(&self, t: usize) -> f64 {
        let ab = self.alpha_bar(t);
        ab / (1.0 - ab)
    }

    /// `√ᾱ_t · x0 + √(1 − ᾱ_t) · eps`
    pub fn forward_noise(&self, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
        self.check_step(t)?;
        check_len(x0.len(), eps.len())?;
        let ab = self.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
    }

    /// One ancestral DDPM step from `x_t` to `x_{t-1}`.
    ///
    /// The fresh noise is ignored at `t = 1`, so the last step is the
    /// deterministic posterior mean.
    pub fn reverse_step(&self, x_t: &[f64], t: usize, eps_hat: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        self.check_step(t)?;
        check_len(x_t.len(), eps_hat.len())?;
        check_len(x_t.len(), eps.len())?;
        let beta = self.beta(t);
        let inv_sqrt_alpha = 1.0 / self.alpha(t).sqrt();
        let coef = beta / (1.0 - self.alpha_bar(t)).sqrt();
        let sigma = if t == 1 { 0.0 } else { beta.sqrt() };
        Ok(x_t
            .iter()
            .zip(eps_hat.iter().zip(eps))
            .map(|(x, (eh, e))| inv_sqrt_alpha * (x - coef * eh) + sigma * e)
            .collect())
    }

    /// Tweedie estimate `(x_t − √(1 − ᾱ_t) · eps_hat) / √ᾱ_t`.
    pub fn posterior_mean_x0(&self, x_t: &[f64], t: usize, eps_hat: &[f64]) -> Result<Vec<f64>> {
        self.check_step(t)?;
        check_len(x_t.len(), eps_hat.len())?;
        let ab = self.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x_t.iter().zip(eps_hat).map(|(x, e)| (x - b * e) / a).collect())
    }

    /// Min-SNR-γ loss weight `min(γ, SNR(t)) / SNR(t)`.
    pub fn minsnr_weight(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        let snr = self.snr(t);
        Ok(self.gamma.min(snr) / snr)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;

    /// Schedule whose ᾱ at step 1 is exactly `ab`.
    fn single(ab: f64, gamma: f64) -> NoiseSchedule {
        NoiseSchedule::new(
            1,
            ScheduleKind::Linear {
                beta_start: 1.0 - ab,
                beta_end: 1.0 - ab,
            },
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn default_schedule_invariants() {
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 100);
        for t in 2..=100 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        assert!(s.alpha_bar(100) < 0.05, "ᾱ_T = {}", s.alpha_bar(100));
        let c = NoiseSchedule::new(100, ScheduleKind::Cosine, 5.0).unwrap();
        assert!(c.alpha_bar(100) < 0.05);
    }

    #[test]
    fn forward_noise_hand_value() {
        // 0.5·1.0 + √0.75·0.5
        let s = single(0.25, 5.0);
        let x = s.forward_noise(&[1.0], 1, &[0.5]).unwrap()[0];
        assert!((x - 0.933_012_701_892_219_3).abs() < 1e-12);
        assert_eq!(s.forward_noise(&[2.0], 1, &[0.0]).unwrap()[0], 0.5 * 2.0);
        let tiny = single(1.0 - 1e-12, 5.0);
        assert!((tiny.forward_noise(&[3.0], 1, &[1.0]).unwrap()[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn reverse_step_hand_value() {
        // ᾱ_t = 0.5 with α_t = 0.99 needs a 2-step schedule: β_1 = 0.5/0.99 complement.
        let b1 = 1.0 - 0.5 / 0.99;
        let s = NoiseSchedule::new(2, ScheduleKind::Linear { beta_start: b1, beta_end: 0.01 }, 5.0).unwrap();
        assert!((s.alpha_bar(2) - 0.5).abs() < 1e-12);
        let x = s.reverse_step(&[1.0], 2, &[0.2], &[0.0]).unwrap()[0];
        let expect = (1.0 / 0.99f64.sqrt()) * (1.0 - (0.01 / 0.5f64.sqrt()) * 0.2);
        assert!((x - expect).abs() < 1e-12);
        assert!((x - 1.0021).abs() < 1e-4);
    }

    #[test]
    fn single_step_round_trip_recovers_x0() {
        let s = single(0.3, 5.0);
        let xt = s.forward_noise(&[0.7, -1.2], 1, &[0.4, 0.1]).unwrap();
        let back = s.reverse_step(&xt, 1, &[0.4, 0.1], &[9.0, 9.0]).unwrap();
        assert!((back[0] - 0.7).abs() < 1e-12 && (back[1] + 1.2).abs() < 1e-12);
    }

    #[test]
    fn tiny_beta_reverse_is_identity() {
        let s = NoiseSchedule::new(3, ScheduleKind::Linear { beta_start: 1e-12, beta_end: 1e-12 }, 5.0).unwrap();
        let x = s.reverse_step(&[2.0], 2, &[0.3], &[0.5]).unwrap()[0];
        assert!((x - 2.0).abs() < 1e-5);
    }

    #[test]
    fn tweedie_values() {
        let s = single(0.25, 5.0);
        let x0 = s.posterior_mean_x0(&[0.933_012_701_892_219_3], 1, &[0.5]).unwrap()[0];
        assert!((x0 - 1.0).abs() < 1e-12);
        assert_eq!(s.posterior_mean_x0(&[1.0], 1, &[0.0]).unwrap()[0], 2.0);
    }

    #[test]
    fn tweedie_inverts_forward_for_all_steps() {
        let s = NoiseSchedule::default();
        let mut r = RngStream::new(5, 0);
        for t in 1..=s.steps() {
            let x0 = r.gaussian_vec(4);
            let eps = r.gaussian_vec(4);
            let xt = s.forward_noise(&x0, t, &eps).unwrap();
            let back = s.posterior_mean_x0(&xt, t, &eps).unwrap();
            for (a, b) in back.iter().zip(&x0) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn minsnr_weights() {
        let s = single(0.99, 5.0);
        assert!((s.minsnr_weight(1).unwrap() - 5.0 / 99.0).abs() < 1e-12);
        let low = single(0.5, 5.0);
        assert_eq!(low.minsnr_weight(1).unwrap(), 1.0);
        let d = NoiseSchedule::default();
        let w: Vec<f64> = (1..=d.steps()).map(|t| d.minsnr_weight(t).unwrap()).collect();
        assert!(w.windows(2).all(|p| p[1] >= p[0]));
        assert!(w.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn step_bounds() {
        let s = NoiseSchedule::default();
        assert!(s.forward_noise(&[0.0], 0, &[0.0]).is_err());
        assert!(s.reverse_step(&[0.0], 101, &[0.0], &[0.0]).is_err());
        assert!(s.minsnr_weight(0).is_err());
    }
}

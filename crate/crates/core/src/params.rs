use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical rates and drive tones.
///
/// All rates are in units of the cavity decay; detunings are normalised to the
/// reference coupling `g_f`. The first tone sits at `omega + g_f`, which is the
/// frame every stored frequency is measured from, so `delta1_tilde` is always 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub g_f: f64,
    pub kappa: f64,
    pub gamma_i: f64,
    /// Photon order N (number of drive tones and coincidence order).
    pub order: usize,
    /// Drive amplitudes E_1..E_N.
    pub amps: Vec<f64>,
    /// Normalised detunings of tones 2..N.
    pub deltas_tilde: Vec<f64>,
    /// Highest couplet kept by the steady-state solver.
    pub n_couplets: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::trichromatic()
    }
}

impl SystemParams {
    /// Three-tone setup: gamma_I = kappa, g_f = 63 kappa, E_1 = 1/sqrt 2,
    /// E_2 = E_3 = sqrt 2, second tone on the |1)+ -> |2)+ step and the third
    /// tone parked on the |2)+ -> |3)+ resonance.
    pub fn trichromatic() -> Self {
        let s2 = std::f64::consts::SQRT_2;
        let s3 = 3f64.sqrt();
        Self {
            g_f: 63.0,
            kappa: 1.0,
            gamma_i: 1.0,
            order: 3,
            amps: vec![1.0 / s2, s2, s2],
            deltas_tilde: vec![s2 - 1.0, s3 - s2],
            n_couplets: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return fail(format!("kappa must be > 0 (got {})", self.kappa));
        }
        if !(self.g_f > 0.0 && self.g_f.is_finite()) {
            return fail(format!("g_f must be > 0 (got {})", self.g_f));
        }
        if !(self.gamma_i >= 0.0 && self.gamma_i.is_finite()) {
            return fail(format!("gamma_I must be >= 0 (got {})", self.gamma_i));
        }
        if self.order == 0 {
            return fail("order N must be a positive integer".into());
        }
        if self.amps.len() != self.order {
            return fail(format!(
                "expected {} drive amplitudes, got {}",
                self.order,
                self.amps.len()
            ));
        }
        if let Some(e) = self.amps.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return fail(format!("drive amplitudes must be real and >= 0 (got {e})"));
        }
        if self.deltas_tilde.len() + 1 != self.order {
            return fail(format!(
                "expected {} normalised detunings (tones 2..N), got {}",
                self.order - 1,
                self.deltas_tilde.len()
            ));
        }
        if self.deltas_tilde.iter().any(|d| !d.is_finite()) {
            return fail("detunings must be finite".into());
        }
        if self.n_couplets < self.order {
            return fail(format!(
                "n_couplets ({}) must be >= order N ({})",
                self.n_couplets, self.order
            ));
        }
        Ok(())
    }

    pub fn delta1_tilde(&self) -> f64 {
        1.0
    }

    /// In-frame offsets `delta_m - g_f` of tones 2..N.
    pub fn tone_offsets(&self) -> Vec<f64> {
        self.deltas_tilde.iter().map(|d| self.g_f * (d - 1.0)).collect()
    }

    /// Normalised detuning of the scanned (last) tone.
    pub fn scan_delta(&self) -> f64 {
        self.deltas_tilde.last().copied().unwrap_or(1.0)
    }

    pub fn with_scan_delta(&self, delta_tilde: f64) -> Self {
        let mut p = self.clone();
        if let Some(d) = p.deltas_tilde.last_mut() {
            *d = delta_tilde;
        }
        p
    }

    pub fn with_amps(&self, amps: &[f64]) -> Self {
        let mut p = self.clone();
        p.amps = amps.to_vec();
        p
    }

    /// Copy with amplitude `m` (zero-based) switched off.
    pub fn without_tone(&self, m: usize) -> Self {
        let mut p = self.clone();
        if let Some(e) = p.amps.get_mut(m) {
            *e = 0.0;
        }
        p
    }

    pub fn scaled_amps(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.amps.iter_mut().for_each(|e| *e *= factor);
        p
    }

    pub fn with_g_f(&self, g_f: f64) -> Self {
        let mut p = self.clone();
        p.g_f = g_f;
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = SystemParams::default();
        p.validate().unwrap();
        assert_eq!(p.delta1_tilde(), 1.0);
        assert!((p.amps[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tone_offsets_are_frame_relative() {
        let p = SystemParams::default();
        let off = p.tone_offsets();
        assert!((off[0] - 63.0 * (2f64.sqrt() - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let mut p = SystemParams::default();
        p.gamma_i = -1.0;
        assert!(p.validate().unwrap_err().to_string().contains("gamma_I"));
        let mut p = SystemParams::default();
        p.n_couplets = 2;
        assert!(p.validate().is_err());
        let mut p = SystemParams::default();
        p.amps[1] = -0.1;
        assert!(p.validate().is_err());
        let mut p = SystemParams::default();
        p.kappa = 0.0;
        assert!(p.validate().is_err());
    }
}

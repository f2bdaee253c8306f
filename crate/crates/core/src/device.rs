//! Microring device, DWDM grid, and the alignment between the two.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn thz_to_nm(f_thz: f64) -> f64 {
    SPEED_OF_LIGHT / (f_thz * 1e12) * 1e9
}

pub fn nm_to_thz(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (lambda_nm * 1e-9) * 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingDevice {
    /// Loaded quality factor.
    pub q_factor: f64,
    pub fsr_ghz: f64,
    pub pump_frequency_thz: f64,
    /// Resonance shift per kelvin (negative: red shift on heating).
    pub thermal_tuning_ghz_per_k: f64,
    pub reference_temperature_k: f64,
}

impl RingDevice {
    pub fn validate(&self) -> Result<()> {
        positive("device.q_factor", self.q_factor)?;
        positive("device.fsr_ghz", self.fsr_ghz)?;
        positive("device.pump_frequency_thz", self.pump_frequency_thz)?;
        if !self.thermal_tuning_ghz_per_k.is_finite() {
            return Err(Error::invalid("device.thermal_tuning_ghz_per_k", "must be finite"));
        }
        if !(self.reference_temperature_k.is_finite() && self.reference_temperature_k >= 0.0) {
            return Err(Error::invalid(
                "device.reference_temperature_k",
                "must be a non-negative temperature",
            ));
        }
        Ok(())
    }

    /// Full width at half maximum of the cold-cavity resonance, `f/Q`, in MHz.
    pub fn resonance_fwhm_mhz(&self) -> f64 {
        self.pump_frequency_thz * 1e6 / self.q_factor
    }

    /// Spectral width of the emitted photons, `f/(2Q)`, in MHz.
    ///
    /// This is the width whose inverse `2π` product gives [`Self::coherence_time_ps`].
    pub fn linewidth_mhz(&self) -> f64 {
        self.resonance_fwhm_mhz() / 2.0
    }

    /// Photon coherence time `1/(2π·linewidth) = Q/(π f)`, in picoseconds.
    pub fn coherence_time_ps(&self) -> f64 {
        1e6 / (2.0 * PI * self.linewidth_mhz())
    }

    pub fn pump_wavelength_nm(&self) -> f64 {
        thz_to_nm(self.pump_frequency_thz)
    }

    /// Frequency (THz) of comb line `k` at `temperature_k`.
    pub fn comb_line_frequency(&self, k: i32, temperature_k: f64) -> f64 {
        let dt = temperature_k - self.reference_temperature_k;
        self.pump_frequency_thz + (k as f64 * self.fsr_ghz + self.thermal_tuning_ghz_per_k * dt) * 1e-3
    }

    /// Temperature change (K) that shifts every resonance by `target_detuning_ghz`.
    pub fn required_temperature_shift(&self, target_detuning_ghz: f64) -> Result<f64> {
        if self.thermal_tuning_ghz_per_k == 0.0 {
            return Err(Error::invalid(
                "device.thermal_tuning_ghz_per_k",
                "zero tuning coefficient: resonances cannot be moved thermally",
            ));
        }
        Ok(target_detuning_ghz / self.thermal_tuning_ghz_per_k)
    }
}

/// Which grid indices carry a physical filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Occupancy {
    All,
    #[default]
    Odd,
    Even,
}

impl Occupancy {
    fn accepts(self, n: i64) -> bool {
        match self {
            Occupancy::All => true,
            Occupancy::Odd => n.rem_euclid(2) == 1,
            Occupancy::Even => n.rem_euclid(2) == 0,
        }
    }

    fn stride(self) -> i64 {
        match self {
            Occupancy::All => 1,
            _ => 2,
        }
    }
}

/// ITU-style frequency grid: channel `n` sits at `anchor + n·spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwdmGrid {
    pub anchor_frequency_thz: f64,
    pub channel_spacing_ghz: f64,
    pub passband_width_ghz: f64,
    #[serde(default)]
    pub occupancy: Occupancy,
}

impl Default for DwdmGrid {
    /// 100 GHz ITU numbering from 190 THz with 200 GHz filters on odd channels.
    fn default() -> Self {
        DwdmGrid {
            anchor_frequency_thz: 190.0,
            channel_spacing_ghz: 100.0,
            passband_width_ghz: 200.0,
            occupancy: Occupancy::Odd,
        }
    }
}

impl DwdmGrid {
    pub fn validate(&self) -> Result<()> {
        positive("grid.anchor_frequency_thz", self.anchor_frequency_thz)?;
        positive("grid.channel_spacing_ghz", self.channel_spacing_ghz)?;
        positive("grid.passband_width_ghz", self.passband_width_ghz)
    }

    pub fn center_thz(&self, channel: i64) -> f64 {
        self.anchor_frequency_thz + channel as f64 * self.channel_spacing_ghz * 1e-3
    }

    pub fn center_nm(&self, channel: i64) -> f64 {
        thz_to_nm(self.center_thz(channel))
    }

    /// Spacing between neighbouring filtered channels, GHz.
    pub fn filtered_spacing_ghz(&self) -> f64 {
        self.channel_spacing_ghz * self.occupancy.stride() as f64
    }

    /// Nearest filtered channel to `f_thz` and the signed detuning
    /// `f − center` in GHz.
    pub fn nearest(&self, f_thz: f64) -> (i64, f64) {
        let x = (f_thz - self.anchor_frequency_thz) * 1e3 / self.channel_spacing_ghz;
        let base = x.floor() as i64;
        let mut best = (base, f64::INFINITY);
        for n in (base - 2)..=(base + 3) {
            if !self.occupancy.accepts(n) {
                continue;
            }
            let d = (f_thz - self.center_thz(n)) * 1e3;
            // ties go to the lower channel
            if d.abs() < best.1.abs() - 1e-9 {
                best = (n, d);
            }
        }
        best
    }

    pub fn in_passband(&self, channel: i64, f_thz: f64) -> bool {
        ((f_thz - self.center_thz(channel)) * 1e3).abs() <= self.passband_width_ghz / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombAlignment {
    pub k: i32,
    pub channel: i64,
    pub comb_frequency_thz: f64,
    pub detuning_ghz: f64,
}

pub fn match_comb_to_grid(
    device: &RingDevice,
    grid: &DwdmGrid,
    k_range: std::ops::RangeInclusive<i32>,
    temperature_k: f64,
) -> Result<Vec<CombAlignment>> {
    if k_range.is_empty() {
        return Err(Error::invalid("k_range", "empty range"));
    }
    Ok(k_range
        .map(|k| {
            let f = device.comb_line_frequency(k, temperature_k);
            let (channel, detuning_ghz) = grid.nearest(f);
            CombAlignment {
                k,
                channel,
                comb_frequency_thz: f,
                detuning_ghz,
            }
        })
        .collect())
}

/// A signal/idler channel pair symmetric about the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub signal_channel: i64,
    pub idler_channel: i64,
    /// Comb order of the idler line; the signal sits at `-comb_order`.
    pub comb_order: i32,
    /// Linear (noise) coefficient, counts/s/mW, at the detector.
    pub a_signal: f64,
    pub a_idler: f64,
    /// Quadratic (pair) coefficient, counts/s/mW², at the detector.
    pub b_signal: f64,
    pub b_idler: f64,
    pub transmission_signal: f64,
    pub transmission_idler: f64,
}

impl ChannelPair {
    pub fn validate(&self, device: &RingDevice, grid: &DwdmGrid, temperature_k: f64) -> Result<()> {
        for (name, v) in [
            ("pair.a_signal", self.a_signal),
            ("pair.a_idler", self.a_idler),
            ("pair.b_signal", self.b_signal),
            ("pair.b_idler", self.b_idler),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        unit_interval("pair.transmission_signal", self.transmission_signal)?;
        unit_interval("pair.transmission_idler", self.transmission_idler)?;
        if self.comb_order == 0 {
            return Err(Error::invalid("pair.comb_order", "must be nonzero"));
        }
        let fs = device.comb_line_frequency(-self.comb_order, temperature_k);
        let fi = device.comb_line_frequency(self.comb_order, temperature_k);
        let lw_thz = device.linewidth_mhz() * 1e-6;
        let f_pump = device.comb_line_frequency(0, temperature_k);
        if (fs + fi - 2.0 * f_pump).abs() > lw_thz {
            return Err(Error::invalid(
                "pair",
                "signal and idler are not symmetric about the pump",
            ));
        }
        if !grid.in_passband(self.signal_channel, fs) {
            return Err(Error::invalid(
                "pair.signal_channel",
                format!(
                    "comb line {} at {fs:.5} THz is outside channel {}",
                    -self.comb_order, self.signal_channel
                ),
            ));
        }
        if !grid.in_passband(self.idler_channel, fi) {
            return Err(Error::invalid(
                "pair.idler_channel",
                format!(
                    "comb line {} at {fi:.5} THz is outside channel {}",
                    self.comb_order, self.idler_channel
                ),
            ));
        }
        Ok(())
    }

    /// Frequencies (THz) of the signal and idler comb lines.
    pub fn frequencies(&self, device: &RingDevice, temperature_k: f64) -> (f64, f64) {
        (
            device.comb_line_frequency(-self.comb_order, temperature_k),
            device.comb_line_frequency(self.comb_order, temperature_k),
        )
    }
}

pub(crate) fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

pub(crate) fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {v}")))
    }
}

pub(crate) fn unit_interval(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in (0, 1], got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn device() -> RingDevice {
        RingDevice {
            q_factor: 4.6e5,
            fsr_ghz: 192.37,
            pump_frequency_thz: 192.5,
            thermal_tuning_ghz_per_k: -2.75,
            reference_temperature_k: 300.0,
        }
    }

    #[test]
    fn comb_lines() {
        let d = device();
        assert_eq!(d.comb_line_frequency(0, 300.0), 192.5);
        assert_relative_eq!(d.comb_line_frequency(0, 301.0), 192.5 - 0.00275, epsilon = 1e-12);
        assert_relative_eq!(d.comb_line_frequency(1, 300.0), 192.5 + 0.19237, epsilon = 1e-12);
        assert_relative_eq!(d.comb_line_frequency(-3, 300.0), 192.5 - 3.0 * 0.19237, epsilon = 1e-12);
    }

    #[test]
    fn linewidth_and_coherence_time() {
        let d = device();
        assert_relative_eq!(d.linewidth_mhz(), 209.24, epsilon = 0.01);
        assert!((d.linewidth_mhz() / 210.0 - 1.0).abs() < 0.05);
        assert!((d.coherence_time_ps() / 760.0 - 1.0).abs() < 0.05);
        let tb = RingDevice { q_factor: 1.1e5, ..d };
        assert!((tb.coherence_time_ps() - 180.0).abs() < 5.0);
    }

    #[test]
    fn grid_wavelengths() {
        let g = DwdmGrid::default();
        assert!((g.center_nm(23) - 1558.98).abs() < 0.05);
        // ITU C25 (192.5 THz) is 1557.36 nm; the pump sits 0.07 nm from it.
        assert!((g.center_nm(25) - 1557.43).abs() < 0.1);
        assert_relative_eq!(nm_to_thz(thz_to_nm(192.3)), 192.3, epsilon = 1e-12);
    }

    #[test]
    fn channel_map_matches_hand_arithmetic() {
        let d = device();
        let g = DwdmGrid::default();
        let m = match_comb_to_grid(&d, &g, -2..=2, 300.0).unwrap();
        let got: Vec<(i32, i64)> = m.iter().map(|a| (a.k, a.channel)).collect();
        assert_eq!(got, vec![(-2, 21), (-1, 23), (0, 25), (1, 27), (2, 29)]);
        assert_relative_eq!(m[2].detuning_ghz, 0.0, epsilon = 1e-6);
        assert_relative_eq!(m[3].detuning_ghz, -7.63, epsilon = 1e-6);
        assert_relative_eq!(m[1].detuning_ghz, 7.63, epsilon = 1e-6);
        assert_relative_eq!(m[4].detuning_ghz, -15.26, epsilon = 1e-6);
        assert_relative_eq!(m[0].detuning_ghz, 15.26, epsilon = 1e-6);
        for a in &m {
            assert!(a.detuning_ghz.abs() <= g.filtered_spacing_ghz() / 2.0);
        }
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 1..=0;
        assert!(match_comb_to_grid(&d, &g, empty, 300.0).is_err());
    }

    #[test]
    fn temperature_shift() {
        let d = device();
        assert_eq!(d.required_temperature_shift(0.0).unwrap(), 0.0);
        assert_eq!(d.required_temperature_shift(-2.75).unwrap(), 1.0);
        assert_relative_eq!(d.required_temperature_shift(-7.63).unwrap(), 2.774545, epsilon = 1e-6);
        let flat = RingDevice {
            thermal_tuning_ghz_per_k: 0.0,
            ..d
        };
        assert!(flat.required_temperature_shift(1.0).is_err());
    }

    #[test]
    fn pair_validation() {
        let d = device();
        let g = DwdmGrid::default();
        let p = ChannelPair {
            signal_channel: 23,
            idler_channel: 27,
            comb_order: 1,
            a_signal: 1.0,
            a_idler: 1.0,
            b_signal: 1.0,
            b_idler: 1.0,
            transmission_signal: 0.5,
            transmission_idler: 0.5,
        };
        p.validate(&d, &g, 300.0).unwrap();
        let (fs, fi) = p.frequencies(&d, 300.0);
        assert_relative_eq!((fs + fi) / 2.0, 192.5, epsilon = 1e-12);
        let swapped = ChannelPair {
            signal_channel: 27,
            idler_channel: 23,
            ..p
        };
        assert!(swapped.validate(&d, &g, 300.0).is_err());
        let lossy = ChannelPair {
            transmission_idler: 0.0,
            ..p
        };
        assert!(lossy.validate(&d, &g, 300.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn detuning_is_antisymmetric_for_on_grid_pump(k in 1i32..20, fsr in 150.0f64..250.0) {
            let d = RingDevice { fsr_ghz: fsr, ..device() };
            let g = DwdmGrid { occupancy: Occupancy::All, ..DwdmGrid::default() };
            let m = match_comb_to_grid(&d, &g, -k..=k, 300.0).unwrap();
            let first = m.first().unwrap();
            let last = m.last().unwrap();
            // skip exact half-spacing ties, where the nearest channel is ambiguous
            let half = g.filtered_spacing_ghz() / 2.0;
            if (last.detuning_ghz.abs() - half).abs() > 1e-6 {
                proptest::prop_assert!((first.detuning_ghz + last.detuning_ghz).abs() < 1e-6);
            }
        }
    }
}

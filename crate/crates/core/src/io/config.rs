//! Experiment configuration: TOML (or JSON) on disk, validated on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::{non_negative, positive, unit_interval, ChannelPair, DwdmGrid, RingDevice};
use crate::emitter::{DetectorConfig, SimOptions, SourceConfig, TimeBinConfig};
use crate::engine::{SummaryOptions, DEFAULT_GUARD_PS, DEFAULT_WINDOW_PS};
use crate::error::{Error, Result};
use crate::fit::PeakShape;

const BASELINE: &str = include_str!("../../data/baseline.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    /// Idler comb order; the signal uses `-comb_order`.
    pub comb_order: i32,
    /// Chip-to-detector transmission of each arm.
    pub transmission_signal: f64,
    pub transmission_idler: f64,
    /// Grid channels; the nearest channel to each comb line when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_channel: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_channel: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detectors {
    pub signal: DetectorConfig,
    pub idler: DetectorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub window_ps: u64,
    pub guard_ps: u64,
    pub bin_width_ps: u64,
    /// Histograms span `[-range_ps, range_ps)`.
    pub range_ps: i64,
    pub g2_shape: PeakShape,
    /// Coincidence coefficient is fitted on points at or below this power.
    pub coincidence_fit_max_power_mw: f64,
    /// Include bunched accidentals in the CAR prediction.
    pub thermal_car_correction: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window_ps: DEFAULT_WINDOW_PS,
            guard_ps: DEFAULT_GUARD_PS,
            bin_width_ps: 81,
            range_ps: 405_000,
            g2_shape: PeakShape::DoubleExponential,
            coincidence_fit_max_power_mw: 5.0,
            thermal_car_correction: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_ps == 0 {
            return Err(Error::invalid("analysis.window_ps", "must be positive"));
        }
        if self.bin_width_ps == 0 {
            return Err(Error::invalid("analysis.bin_width_ps", "must be positive"));
        }
        if self.range_ps <= 0 || self.range_ps % self.bin_width_ps as i64 != 0 {
            return Err(Error::invalid(
                "analysis.range_ps",
                "must be a positive multiple of bin_width_ps",
            ));
        }
        non_negative(
            "analysis.coincidence_fit_max_power_mw",
            self.coincidence_fit_max_power_mw,
        )
    }

    pub fn summary_options(&self) -> SummaryOptions {
        SummaryOptions {
            window_ps: self.window_ps,
            guard_ps: self.guard_ps,
        }
    }
}

/// Settings of the full reproduction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportPlan {
    pub powers_mw: Vec<f64>,
    /// Acquisition per sweep point; a single entry applies to all.
    pub sweep_durations_s: Vec<f64>,
    /// Detected photons per second in the split arm of the purity run.
    pub purity_rate: f64,
    pub purity_duration_s: f64,
    /// Pairs per second for the cross-correlation decay run.
    pub decay_pair_rate: f64,
    pub decay_duration_s: f64,
    pub timebin_phase_points: usize,
    pub timebin_duration_s: f64,
}

impl Default for ReportPlan {
    fn default() -> Self {
        ReportPlan {
            powers_mw: vec![0.16, 0.5, 1.0, 2.0, 4.0, 6.0, 9.0, 13.5],
            sweep_durations_s: vec![20.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.3, 0.2],
            purity_rate: 1e8,
            purity_duration_s: 0.02,
            decay_pair_rate: 1e6,
            decay_duration_s: 0.1,
            timebin_phase_points: 16,
            timebin_duration_s: 60.0,
        }
    }
}

impl ReportPlan {
    pub fn validate(&self) -> Result<()> {
        if self.powers_mw.len() < 3 {
            return Err(Error::invalid("report.powers_mw", "need at least 3 powers"));
        }
        for w in self.powers_mw.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid("report.powers_mw", "must be strictly increasing"));
            }
        }
        for &p in &self.powers_mw {
            positive("report.powers_mw", p)?;
        }
        if self.sweep_durations_s.len() != 1 && self.sweep_durations_s.len() != self.powers_mw.len() {
            return Err(Error::invalid(
                "report.sweep_durations_s",
                "needs one entry or one per power",
            ));
        }
        for &d in &self.sweep_durations_s {
            positive("report.sweep_durations_s", d)?;
        }
        positive("report.purity_rate", self.purity_rate)?;
        positive("report.purity_duration_s", self.purity_duration_s)?;
        positive("report.decay_pair_rate", self.decay_pair_rate)?;
        positive("report.decay_duration_s", self.decay_duration_s)?;
        if self.timebin_phase_points < 5 {
            return Err(Error::invalid("report.timebin_phase_points", "need at least 5"));
        }
        positive("report.timebin_duration_s", self.timebin_duration_s)
    }

    pub fn sweep_duration(&self, i: usize) -> f64 {
        if self.sweep_durations_s.len() == 1 {
            self.sweep_durations_s[0]
        } else {
            self.sweep_durations_s[i]
        }
    }

    /// Shrinks every acquisition by `factor`.
    pub fn scaled(&self, factor: f64) -> ReportPlan {
        ReportPlan {
            sweep_durations_s: self.sweep_durations_s.iter().map(|d| d * factor).collect(),
            purity_duration_s: self.purity_duration_s * factor,
            decay_duration_s: self.decay_duration_s * factor,
            timebin_duration_s: self.timebin_duration_s * factor,
            ..self.clone()
        }
    }
}

/// The pulsed time-bin arrangement: its own ring and source, shared detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBinSection {
    pub q_factor: f64,
    pub source: SourceConfig,
    pub interferometer: TimeBinConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub device: RingDevice,
    #[serde(default)]
    pub grid: DwdmGrid,
    /// Chip temperature, K; the device reference when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub active_pair: usize,
    pub source: SourceConfig,
    pub detectors: Detectors,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timebin: Option<TimeBinSection>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub simulation: SimOptions,
    #[serde(default)]
    pub report: ReportPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The bundled configuration calibrated to the reference device.
    pub fn baseline() -> Self {
        Self::from_toml_str(BASELINE).expect("bundled baseline config is valid")
    }

    pub fn baseline_toml() -> &'static str {
        BASELINE
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn temperature(&self) -> f64 {
        self.temperature_k.unwrap_or(self.device.reference_temperature_k)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.grid.validate()?;
        positive("temperature_k", self.temperature())?;
        if self.pairs.is_empty() {
            return Err(Error::invalid("pairs", "at least one channel pair is required"));
        }
        if self.active_pair >= self.pairs.len() {
            return Err(Error::invalid(
                "active_pair",
                format!("only {} pairs defined", self.pairs.len()),
            ));
        }
        self.source.validate()?;
        self.detectors.signal.validate("detectors.signal")?;
        self.detectors.idler.validate("detectors.idler")?;
        for (i, p) in self.pairs.iter().enumerate() {
            unit_interval(&format!("pairs[{i}].transmission_signal"), p.transmission_signal)?;
            unit_interval(&format!("pairs[{i}].transmission_idler"), p.transmission_idler)?;
            self.channel_pair(i)?
                .validate(&self.device, &self.grid, self.temperature())
                .map_err(|e| match e {
                    Error::Invalid { field, reason } => Error::Invalid {
                        field: format!("pairs[{i}].{field}"),
                        reason,
                    },
                    e => e,
                })?;
        }
        if let Some(tb) = &self.timebin {
            positive("timebin.q_factor", tb.q_factor)?;
            tb.source.validate()?;
            tb.interferometer.validate()?;
            let tau = self.timebin_source()?.coherence_time()?;
            if tau >= tb.interferometer.delta_t_ps() / 3.0 {
                return Err(Error::invalid(
                    "timebin.q_factor",
                    format!("coherence time {tau:.0} ps is not short against the bin separation"),
                ));
            }
        }
        self.analysis.validate()?;
        self.simulation.validate()?;
        self.report.validate()
    }

    /// The CW source with its coherence time filled in from the device.
    pub fn source(&self) -> SourceConfig {
        SourceConfig {
            coherence_time_ps: self.source.coherence_time_ps.or(Some(self.device.coherence_time_ps())),
            ..self.source
        }
    }

    pub fn timebin_source(&self) -> Result<SourceConfig> {
        let tb = self
            .timebin
            .as_ref()
            .ok_or_else(|| Error::invalid("timebin", "section missing"))?;
        let ring = RingDevice {
            q_factor: tb.q_factor,
            ..self.device
        };
        Ok(SourceConfig {
            coherence_time_ps: tb.source.coherence_time_ps.or(Some(ring.coherence_time_ps())),
            ..tb.source
        })
    }

    pub fn channel_pair(&self, index: usize) -> Result<ChannelPair> {
        let p = self
            .pairs
            .get(index)
            .ok_or_else(|| Error::invalid("active_pair", format!("no pair {index}")))?;
        let t = self.temperature();
        let nearest = |k: i32| self.grid.nearest(self.device.comb_line_frequency(k, t)).0;
        let mu = self.source.pair_rate_coefficient;
        Ok(ChannelPair {
            signal_channel: p.signal_channel.unwrap_or_else(|| nearest(-p.comb_order)),
            idler_channel: p.idler_channel.unwrap_or_else(|| nearest(p.comb_order)),
            comb_order: p.comb_order,
            a_signal: self.source.linear_noise_signal,
            a_idler: self.source.linear_noise_idler,
            b_signal: mu * p.transmission_signal * self.detectors.signal.efficiency,
            b_idler: mu * p.transmission_idler * self.detectors.idler.efficiency,
            transmission_signal: p.transmission_signal,
            transmission_idler: p.transmission_idler,
        })
    }

    pub fn active_channel_pair(&self) -> ChannelPair {
        self.channel_pair(self.active_pair).expect("validated on load")
    }

    /// SHA-256 over the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Loads a config, choosing JSON for `.json` files and TOML otherwise.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        ExperimentConfig::from_json_str(&text)
    } else {
        ExperimentConfig::from_toml_str(&text)
    };
    parsed.map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        e => e,
    })
}

//! Run configuration: one JSON document, every section optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use omckit::fitting::{BathFitOptions, NpLaw, VoigtConstraint};
use omckit::phonon::ContinuumBath;
use omckit::physics::{BathModel, DeviceParams, GammaPLaw, ProbeState};
use omckit::spectra::{CalibrationChain, FrequencyGrid};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides `outputs.directory`.
pub const OUT_ENV: &str = "OMCKIT_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "n_c")]
    NC,
    #[serde(rename = "detuning")]
    Detuning,
    #[serde(rename = "t_f")]
    TF,
    #[serde(rename = "t_p")]
    TP,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Log,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub scale: Scale,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { variable: SweepVariable::NC, scale: Scale::Log, start: 0.01, stop: 100.0, points: 25 }
    }
}

/// Samples `points` values from `start` to `stop` inclusive.
fn spaced(scale: Scale, start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            match scale {
                Scale::Linear => start + t * (stop - start),
                Scale::Log => start * (stop / start).powf(t),
            }
        })
        .collect()
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        spaced(self.scale, self.start, self.stop, self.points)
    }

    fn validate(&self, field: &str, min_points: usize) -> CliResult<()> {
        if self.points < min_points {
            return Err(invalid(format!("{field}.points"), format!("must be >= {min_points}, got {}", self.points)));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(invalid(format!("{field}.start"), "range must be finite"));
        }
        if !(self.start < self.stop) && self.points > 1 {
            return Err(invalid(
                format!("{field}.stop"),
                format!("range must be increasing, got {} to {}", self.start, self.stop),
            ));
        }
        let positive = self.scale == Scale::Log || self.variable != SweepVariable::Detuning;
        if positive && !(self.start > 0.0) {
            return Err(invalid(format!("{field}.start"), format!("must be > 0 for this sweep, got {}", self.start)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Red,
    Blue,
    Resonant,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Red => 1,
            Side::Blue => -1,
            Side::Resonant => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Red => "red",
            Side::Blue => "blue",
            Side::Resonant => "resonant",
        }
    }

    pub fn probe(self, dev: &DeviceParams, n_c: f64) -> ProbeState {
        match self {
            Side::Red => ProbeState::red(dev, n_c),
            Side::Blue => ProbeState::blue(dev, n_c),
            Side::Resonant => ProbeState::resonant(n_c),
        }
    }
}

/// Probe settings for the quantities that are not swept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub sides: Vec<Side>,
    pub n_c: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec { sides: vec![Side::Red, Side::Blue], n_c: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Analyzer span around the beat frequency (Hz).
    pub span: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { span: 200e3, points: 401 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Spectrum averages; sets the noise on synthesized spectra.
    pub n_avg: u64,
    /// Relative 1σ scatter added to tabulated occupancies.
    pub occupancy: f64,
    /// Relative 1σ scatter added to tabulated linewidths.
    pub linewidth: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { seed: 0, n_avg: 1_000_000, occupancy: 0.0, linewidth: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Also write every synthesized spectrum with its sidecar.
    pub spectra: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { directory: PathBuf::from("omckit-out"), formats: vec![Format::Csv], spectra: false }
    }
}

/// Columns used by the power-law fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLawColumns {
    pub x: String,
    pub y: String,
    pub err: Option<String>,
    /// Keep only rows with this `detuning_sign`.
    pub detuning_sign: Option<i8>,
    /// Keep only rows with this `t_f` (relative match 1e-9).
    pub t_f: Option<f64>,
}

impl Default for PowerLawColumns {
    fn default() -> Self {
        PowerLawColumns {
            x: "n_c".into(),
            y: "occupancy_meas".into(),
            err: Some("occupancy_err".into()),
            detuning_sign: Some(0),
            t_f: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub voigt: VoigtConstraint,
    /// Cooperativity for the joint detuning fit; fitted from areas if absent.
    pub cooperativity: Option<f64>,
    pub power_law: PowerLawColumns,
    pub bath: BathFitOptions,
    /// n_p(n_c) law for the bath fit; defaults to the one in `bath`.
    pub np_law: Option<NpLaw>,
    pub overlay_points: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            voigt: VoigtConstraint::Free,
            cooperativity: None,
            power_law: PowerLawColumns::default(),
            bath: BathFitOptions::default(),
            np_law: None,
            overlay_points: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpGrid {
    pub scale: Scale,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for TpGrid {
    fn default() -> Self {
        TpGrid { scale: Scale::Log, start: 0.1, stop: 10.0, points: 41 }
    }
}

impl TpGrid {
    pub fn values(&self) -> Vec<f64> {
        spaced(self.scale, self.start, self.stop, self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhononSettings {
    pub bath: ContinuumBath,
    pub t_p: TpGrid,
}

impl Default for PhononSettings {
    fn default() -> Self {
        PhononSettings {
            bath: ContinuumBath::from_cutoff_temperature(3.0, 2.0, 1.0).expect("valid default bath"),
            t_p: TpGrid::default(),
        }
    }
}

/// Bath parameters of the reference device at a 10 mK fridge.
pub fn reference_bath() -> BathModel {
    BathModel {
        gamma_0: 306.0,
        t_f: 0.01,
        np_amplitude: 13.3,
        np_exponent: 0.25,
        gamma_p_law: GammaPLaw::Activated { amplitude: 789.0, t_c: 2.0 },
        jitter_law: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub bath: BathModel,
    /// Defaults to the reference receiver for `device`.
    pub calibration: Option<CalibrationChain>,
    pub sweep: Sweep,
    pub probe: ProbeSpec,
    /// Fridge temperatures (K); empty means `bath.t_f` alone.
    pub fridge_temperatures: Vec<f64>,
    pub grid: GridSpec,
    /// Absent: noiseless synthesis.
    pub noise: Option<NoiseConfig>,
    pub outputs: Outputs,
    pub fit: FitSettings,
    pub phonon: PhononSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            device: DeviceParams::reference_device(),
            bath: reference_bath(),
            calibration: None,
            sweep: Sweep::default(),
            probe: ProbeSpec::default(),
            fridge_temperatures: Vec::new(),
            grid: GridSpec::default(),
            noise: None,
            outputs: Outputs::default(),
            fit: FitSettings::default(),
            phonon: PhononSettings::default(),
        }
    }
}

fn invalid(field: impl AsRef<str>, msg: impl AsRef<str>) -> CliError {
    CliError::validation(format!("invalid config field `{}`: {}", field.as_ref(), msg.as_ref()))
}

fn core_field(e: omckit::Error, section: &str) -> CliError {
    match e {
        omckit::Error::Validation { field, msg } if field.starts_with(section) => invalid(field, msg),
        omckit::Error::Validation { field, msg } => invalid(format!("{section}.{field}"), msg),
        other => invalid(section, other.to_string()),
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub formats: Option<Vec<Format>>,
}

impl RunConfig {
    /// Loads `path` (or the defaults) and applies the overrides. The output
    /// directory is taken from `--out`, then `OMCKIT_OUT`, then the file.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> CliResult<Self> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                let text = crate::error::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::validation(format!("{}: invalid config: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(dir) = ov.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
            cfg.outputs.directory = dir;
        }
        if let Some(seed) = ov.seed {
            match cfg.noise.as_mut() {
                Some(n) => n.seed = seed,
                None => log::warn!("--seed {seed} has no effect: the config has no noise section"),
            }
        }
        if let Some(f) = &ov.formats {
            cfg.outputs.formats = f.clone();
        }
        Ok(cfg)
    }

    pub fn calibration(&self) -> CalibrationChain {
        self.calibration.clone().unwrap_or_else(|| CalibrationChain::reference(self.device.optical_frequency()))
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid::centered(self.calibration().beat_frequency, self.grid.span, self.grid.points)
    }

    pub fn fridge_temperatures(&self) -> Vec<f64> {
        if self.fridge_temperatures.is_empty() {
            vec![self.bath.t_f]
        } else {
            self.fridge_temperatures.clone()
        }
    }

    pub fn np_law(&self) -> NpLaw {
        self.fit.np_law.unwrap_or_else(|| NpLaw::from_bath(&self.bath))
    }

    /// Checks the sections every command uses.
    pub fn validate(&self) -> CliResult<()> {
        self.device.validate().map_err(|e| core_field(e, "device"))?;
        self.bath.validate().map_err(|e| core_field(e, "bath"))?;
        self.calibration().validate().map_err(|e| core_field(e, "calibration"))?;
        if !self.outputs.formats.contains(&Format::Csv) {
            return Err(invalid("outputs.formats", "must include csv"));
        }
        if self.fit.overlay_points < 2 {
            return Err(invalid("fit.overlay_points", "must be >= 2"));
        }
        Ok(())
    }

    /// Extra checks for `simulate`.
    pub fn validate_simulation(&self) -> CliResult<()> {
        self.validate()?;
        self.sweep.validate("sweep", 2)?;
        if self.sweep.variable != SweepVariable::Detuning && self.probe.sides.is_empty() {
            return Err(invalid("probe.sides", "at least one side is required"));
        }
        if !(self.probe.n_c > 0.0 && self.probe.n_c.is_finite()) {
            return Err(invalid("probe.n_c", format!("must be > 0, got {}", self.probe.n_c)));
        }
        for (i, t) in self.fridge_temperatures.iter().enumerate() {
            if !(*t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("fridge_temperatures[{i}]"), format!("must be > 0, got {t}")));
            }
        }
        if !(self.grid.span > 0.0 && self.grid.span.is_finite()) {
            return Err(invalid("grid.span", format!("must be > 0, got {}", self.grid.span)));
        }
        if self.grid.points < omckit::spectra::spectrum::MIN_POINTS {
            return Err(invalid(
                "grid.points",
                format!("must be >= {}, got {}", omckit::spectra::spectrum::MIN_POINTS, self.grid.points),
            ));
        }
        if let Some(n) = &self.noise {
            if n.n_avg == 0 {
                return Err(invalid("noise.n_avg", "must be >= 1"));
            }
            for (name, v) in [("noise.occupancy", n.occupancy), ("noise.linewidth", n.linewidth)] {
                if !(0.0..1.0).contains(&v) {
                    return Err(invalid(name, format!("must lie in [0, 1), got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Extra checks for `phonon`.
    pub fn validate_phonon(&self) -> CliResult<()> {
        self.validate()?;
        self.phonon.bath.validate().map_err(|e| core_field(e, "phonon"))?;
        let g = &self.phonon.t_p;
        if g.points == 0 {
            return Err(invalid("phonon.t_p.points", "grid is empty"));
        }
        if !(g.start > 0.0 && g.stop.is_finite()) || (g.points > 1 && !(g.start < g.stop)) {
            return Err(invalid("phonon.t_p", format!("need 0 < start < stop, got {} to {}", g.start, g.stop)));
        }
        Ok(())
    }

    /// Canonical serialization; the provenance hash is taken over these bytes.
    pub fn canonical_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("config serializes");
        v.push(b'\n');
        v
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.canonical_json())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

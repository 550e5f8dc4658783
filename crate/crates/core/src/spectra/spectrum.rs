use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::table::{format_f64, Table};
use crate::{Error, Result};

/// Minimum number of samples in a spectrum.
pub const MIN_POINTS: usize = 16;

/// Unit of the PSD samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumUnit {
    /// Quanta per Hz relative to the shot-noise level (shot noise = 1).
    #[default]
    #[serde(rename = "shot_noise")]
    ShotNoise,
    /// Detected electrical PSD.
    #[serde(rename = "W/Hz")]
    WattsPerHz,
    /// Displacement PSD.
    #[serde(rename = "m^2/Hz")]
    MetersSquaredPerHz,
}

impl SpectrumUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumUnit::ShotNoise => "shot_noise",
            SpectrumUnit::WattsPerHz => "W/Hz",
            SpectrumUnit::MetersSquaredPerHz => "m^2/Hz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "shot_noise" => Ok(SpectrumUnit::ShotNoise),
            "W/Hz" => Ok(SpectrumUnit::WattsPerHz),
            "m^2/Hz" => Ok(SpectrumUnit::MetersSquaredPerHz),
            other => Err(Error::validation("unit", format!("unknown spectrum unit `{other}`"))),
        }
    }
}

/// Probe conditions under which a spectrum was taken.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_f_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_id: Option<String>,
}

/// Uniformly sampled power spectral density. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    f_start: f64,
    f_step: f64,
    values: Vec<f64>,
    rbw: f64,
    unit: SpectrumUnit,
    metadata: ProbeMetadata,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    f_start_hz: f64,
    f_step_hz: f64,
    unit: SpectrumUnit,
    rbw_hz: f64,
    points: usize,
    #[serde(default)]
    metadata: ProbeMetadata,
}

impl Spectrum {
    pub fn new(f_start: f64, f_step: f64, values: Vec<f64>, rbw: f64, unit: SpectrumUnit) -> Result<Self> {
        if !f_start.is_finite() {
            return Err(Error::validation("f_start", "must be finite"));
        }
        if !(f_step > 0.0 && f_step.is_finite()) {
            return Err(Error::validation("f_step", format!("must be > 0, got {f_step}")));
        }
        if !(rbw > 0.0 && rbw.is_finite()) {
            return Err(Error::validation("rbw", format!("must be > 0, got {rbw}")));
        }
        if values.len() < MIN_POINTS {
            return Err(Error::validation(
                "values",
                format!("need at least {MIN_POINTS} points, got {}", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation("values", format!("non-finite sample at index {i}")));
        }
        Ok(Spectrum { f_start, f_step, values, rbw, unit, metadata: ProbeMetadata::default() })
    }

    pub fn with_metadata(mut self, metadata: ProbeMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    /// Same grid and metadata with new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Ok(Spectrum::new(self.f_start, self.f_step, values, self.rbw, self.unit)?.with_metadata(self.metadata.clone()))
    }

    /// Same samples relabelled with another unit after scaling by `factor`.
    pub fn rescaled(&self, factor: f64, unit: SpectrumUnit) -> Result<Self> {
        let mut s = self.with_values(self.values.iter().map(|v| v * factor).collect())?;
        s.unit = unit;
        Ok(s)
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }
    pub fn f_step(&self) -> f64 {
        self.f_step
    }
    pub fn rbw(&self) -> f64 {
        self.rbw
    }
    pub fn unit(&self) -> SpectrumUnit {
        self.unit
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn metadata(&self) -> &ProbeMetadata {
        &self.metadata
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.f_start + i as f64 * self.f_step
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.frequency(i)).collect()
    }

    /// Trapezoidal integral of (values − floor) over the whole span.
    pub fn area_above(&self, floor: f64) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values.iter().map(|v| v - floor).sum();
        let ends = 0.5 * ((self.values[0] - floor) + (self.values[n - 1] - floor));
        (inner - ends) * self.f_step
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["frequency_hz", "psd", "unit", "rbw_hz"]);
        let rbw = format_f64(self.rbw);
        for (i, v) in self.values.iter().enumerate() {
            t.push_row([format_f64(self.frequency(i)), format_f64(*v), self.unit.as_str().to_string(), rbw.clone()])
                .expect("four columns");
        }
        t
    }

    /// Parses the CSV form. The grid is inferred from the frequency column,
    /// which must be uniform to 1 ppm of the step.
    pub fn from_table(t: &Table) -> Result<Self> {
        let f = t.column_f64("frequency_hz")?;
        let v = t.column_f64("psd")?;
        let rbw = t.column_f64("rbw_hz")?;
        let units = t.column_str("unit")?;
        if f.len() < 2 {
            return Err(Error::validation("values", format!("need at least {MIN_POINTS} points, got {}", f.len())));
        }
        let unit = SpectrumUnit::parse(units[0])?;
        if units.iter().any(|u| u.trim() != units[0].trim()) {
            return Err(Error::validation("unit", "mixed units in one spectrum"));
        }
        let step = (f[f.len() - 1] - f[0]) / (f.len() - 1) as f64;
        for (i, fi) in f.iter().enumerate() {
            if (fi - (f[0] + i as f64 * step)).abs() > 1e-6 * step.abs() {
                return Err(Error::Parse { line: i + 2, msg: "frequency grid is not uniform".into() });
            }
        }
        Spectrum::new(f[0], step, v, rbw[0], unit)
    }

    /// Path of the JSON sidecar belonging to a CSV path.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes the CSV and its JSON sidecar.
    pub fn write(&self, csv: impl AsRef<Path>) -> Result<()> {
        let csv = csv.as_ref();
        self.to_table().write(csv)?;
        let side = Sidecar {
            f_start_hz: self.f_start,
            f_step_hz: self.f_step,
            unit: self.unit,
            rbw_hz: self.rbw,
            points: self.len(),
            metadata: self.metadata.clone(),
        };
        std::fs::write(Self::sidecar_path(csv), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    /// Reads a CSV spectrum. When a sidecar is present its exact grid and
    /// metadata take precedence over the values inferred from the CSV.
    pub fn read(csv: impl AsRef<Path>) -> Result<Self> {
        let csv = csv.as_ref();
        let mut s = Self::from_table(&Table::read(csv)?)?;
        let side_path = Self::sidecar_path(csv);
        if side_path.exists() {
            let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(side_path)?)?;
            if side.points != s.len() {
                return Err(Error::validation("points", format!("sidecar says {}, CSV has {}", side.points, s.len())));
            }
            if side.unit != s.unit {
                return Err(Error::validation("unit", "sidecar and CSV units disagree"));
            }
            s = Spectrum::new(side.f_start_hz, side.f_step_hz, s.values, side.rbw_hz, side.unit)?
                .with_metadata(side.metadata);
        }
        Ok(s)
    }
}

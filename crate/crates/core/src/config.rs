//! Flat `key = value` configuration with named defaults.
//!
//! Values are layered: built-in defaults, then a config file, then
//! `--set key=value` overrides, then dedicated command-line flags. The fully
//! resolved map is what manifests record.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::ForwardSpec;
use crate::hio::HioConfig;
use crate::likelihood::X_FLOOR;
use crate::measurement::NoiseParams;
use crate::prior::ComplexVariance;
use crate::protocol::Endpoint;
use crate::schedule::{
    make_schedule, ScheduleKind, SigmaSchedule, DEFAULT_EPS_RATIO, DEFAULT_LEVELS,
    DEFAULT_SIGMA1_FRACTION, DEFAULT_SIGMAT_FRACTION,
};

/// Every recognized key with its default value. An empty default means
/// "unset".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", ""),
    ("fwc", "10000"),
    ("sigma0", ""),
    ("quant_bits", "8"),
    ("model", "identity"),
    ("pad_factor", "2"),
    ("leds", "89"),
    ("led_spacing", "2"),
    ("pupil_radius", "6"),
    ("rho", "1"),
    ("schedule", "geometric"),
    ("levels", "1000"),
    ("sigma1_fraction", "0.9"),
    ("sigmat_fraction", "0.01"),
    ("eps_ratio", "0.02"),
    ("eps", ""),
    ("steps_per_level", "1"),
    ("clamp_floor", "0.0001"),
    ("init", "measurement"),
    ("init_path", ""),
    ("init_noise_scale", "1"),
    ("hio_beta", "0.9"),
    ("hio_iters", "600"),
    ("hio_restarts", "50"),
    ("hio_real_nonneg", "false"),
    ("prior", "zero"),
    ("prior_weights", ""),
    ("complex_variance", "quarter"),
    ("n_runs", "50"),
    ("jobs", "0"),
    ("peak", "1"),
    ("record_trajectory", "false"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl Default for ConfigMap {
    fn default() -> Self {
        Self(
            DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }
}

impl ConfigMap {
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let mut out = Self::default();
        for (k, v) in map {
            out.set(&k, &v)?;
        }
        Ok(out)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match self.0.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown config key `{key}`"))),
        }
    }

    /// Applies a `key=value` assignment.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k, v)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// The map in the same text format [`apply_text`](Self::apply_text) reads.
    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn raw(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| Error::Config(format!("invalid value `{raw}` for `{key}`")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.is_set(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Noise parameters from `fwc`, or from `sigma0` when that is set.
    pub fn noise(&self) -> Result<NoiseParams> {
        let bits = self.get("quant_bits")?;
        match self.get_opt::<f64>("sigma0")? {
            Some(s) => NoiseParams::from_sigma0(s, bits),
            None => NoiseParams::new(self.get("fwc")?, bits),
        }
    }

    pub fn forward_spec(&self) -> Result<ForwardSpec> {
        match self.raw("model") {
            "identity" => Ok(ForwardSpec::Identity),
            "fourier-magnitude" => Ok(ForwardSpec::FourierMagnitude {
                pad_factor: self.get("pad_factor")?,
            }),
            "ptychography" => Ok(ForwardSpec::Ptychography {
                leds: self.get("leds")?,
                spacing: self.get("led_spacing")?,
                radius: self.get("pupil_radius")?,
                rho: self.get("rho")?,
            }),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }

    /// Annealing schedule for measurement noise `sigma0`. `eps` wins over
    /// `eps_ratio`, which is relative to `σ_T²`.
    pub fn schedule(&self, sigma0: f64) -> Result<SigmaSchedule> {
        let kind: ScheduleKind = self.get("schedule")?;
        let sigma1 = self.get::<f64>("sigma1_fraction")? * sigma0;
        let sigma_t = self.get::<f64>("sigmat_fraction")? * sigma0;
        let eps = match self.get_opt::<f64>("eps")? {
            Some(e) => e,
            None => self.get::<f64>("eps_ratio")? * sigma_t * sigma_t,
        };
        make_schedule(sigma0, sigma1, sigma_t, self.get("levels")?, kind, eps)
    }

    pub fn hio(&self) -> Result<HioConfig> {
        Ok(HioConfig {
            beta: self.get("hio_beta")?,
            iters: self.get("hio_iters")?,
            restarts: self.get("hio_restarts")?,
            real_nonneg: self.get("hio_real_nonneg")?,
        })
    }

    pub fn complex_variance(&self) -> Result<ComplexVariance> {
        match self.raw("complex_variance") {
            "quarter" => Ok(ComplexVariance::Quarter),
            "full" => Ok(ComplexVariance::Full),
            other => Err(Error::Config(format!("unknown complex_variance `{other}`"))),
        }
    }

    pub fn prior(&self) -> Result<PriorSpec> {
        PriorSpec::parse(self.raw("prior"))
    }

    /// Optional comma-separated mixture weights.
    pub fn prior_weights(&self) -> Result<Option<Vec<f64>>> {
        if !self.is_set("prior_weights") {
            return Ok(None);
        }
        self.raw("prior_weights")
            .split(',')
            .map(|w| {
                w.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid prior weight `{w}`")))
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    }
}

/// Which prior a sampling command uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriorSpec {
    Zero,
    /// Atoms stored as frames of an array container.
    Discrete(String),
    External(Endpoint),
}

impl PriorSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            Ok(Self::Zero)
        } else if let Some(path) = s.strip_prefix("discrete:") {
            Ok(Self::Discrete(path.to_string()))
        } else if let Some(ep) = s.strip_prefix("external:") {
            Endpoint::parse(ep).map(Self::External)
        } else {
            Err(Error::Config(format!(
                "prior must be `zero`, `discrete:<path>` or `external:<endpoint>`, got `{s}`"
            )))
        }
    }
}

/// The defaults in [`DEFAULTS`] that mirror library constants.
pub fn library_defaults_agree() -> bool {
    let m = ConfigMap::default();
    m.get::<f64>("sigma1_fraction").ok() == Some(DEFAULT_SIGMA1_FRACTION)
        && m.get::<f64>("sigmat_fraction").ok() == Some(DEFAULT_SIGMAT_FRACTION)
        && m.get::<f64>("eps_ratio").ok() == Some(DEFAULT_EPS_RATIO)
        && m.get::<usize>("levels").ok() == Some(DEFAULT_LEVELS)
        && m.get::<f64>("clamp_floor").ok() == Some(X_FLOOR)
        && m.hio().ok() == Some(HioConfig::default())
}

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::seed;

pub type Point = [f64; 2];

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Reflection coefficient of one IRS element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub amplitude: f64,
    pub phase: f64,
}

/// One BS-to-IRS propagation path: gain, arrival angle at the IRS, departure angle at the BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub gain: f64,
    pub aoa: f64,
    pub aod: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsDescriptor {
    pub position: Point,
    #[serde(default = "defaults::n_elements")]
    pub n_elements: usize,
    #[serde(default = "defaults::n_sensors")]
    pub n_sensors: usize,
    /// Empty means "draw from the scene seed".
    #[serde(default)]
    pub phase_profile: Vec<Reflection>,
    /// Non-line-of-sight BS-to-IRS paths added to the geometric line of sight.
    #[serde(default)]
    pub scatter_paths: Vec<PathSpec>,
    /// Per-sensor noise power override in watts.
    #[serde(default)]
    pub noise_power: Option<f64>,
}

impl IrsDescriptor {
    pub fn new(position: Point, n_elements: usize, n_sensors: usize) -> Self {
        IrsDescriptor {
            position,
            n_elements,
            n_sensors,
            phase_profile: Vec::new(),
            scatter_paths: Vec::new(),
            noise_power: None,
        }
    }

    pub fn reflection(&self) -> Vec<num_complex::Complex64> {
        self.phase_profile
            .iter()
            .map(|r| num_complex::Complex64::from_polar(r.amplitude, r.phase))
            .collect()
    }
}

mod defaults {
    pub fn n_elements() -> usize {
        10
    }
    pub fn n_sensors() -> usize {
        10
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub bs_position: Point,
    pub irs: Vec<IrsDescriptor>,
    pub target_position: Point,
    pub wavelength: f64,
    pub rcs: f64,
    pub noise_power: f64,
    pub tx_power: f64,
    pub bandwidth: f64,
    pub frame_length: usize,
    pub n_tx: usize,
    pub element_spacing_ratio: f64,
    pub seed: u64,
    /// Allow fewer stream rows per IRS when K * n_tx exceeds the frame length.
    pub stream_reduction: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            bs_position: [0.0, 0.0],
            irs: vec![
                IrsDescriptor::new([10.0, 50.0], 10, 10),
                IrsDescriptor::new([10.0, -50.0], 10, 10),
                IrsDescriptor::new([50.0, 0.0], 10, 10),
            ],
            target_position: [5.0, 5.0],
            wavelength: 0.3,
            rcs: 10f64.powf(0.7),
            noise_power: dbm_to_watts(-100.0),
            tx_power: dbm_to_watts(50.0),
            bandwidth: 50e6,
            frame_length: 100,
            n_tx: 50,
            element_spacing_ratio: 0.5,
            seed: 0,
            stream_reduction: true,
        }
    }
}

impl SceneConfig {
    /// Simulation defaults with phase profiles drawn from seed 0.
    pub fn table1() -> Self {
        let mut s = SceneConfig::default();
        s.fill_missing_phases();
        s
    }

    pub fn k(&self) -> usize {
        self.irs.len()
    }

    pub fn noise_of(&self, l: usize) -> f64 {
        self.irs[l].noise_power.unwrap_or(self.noise_power)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut s: SceneConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.fill_missing_phases();
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    /// Draw unit-amplitude uniform phases for every IRS with an empty profile.
    pub fn fill_missing_phases(&mut self) {
        let mut rng = seed::rng(self.seed, &[seed::tag::PHASES]);
        for irs in &mut self.irs {
            let draw: Vec<Reflection> = (0..irs.n_elements)
                .map(|_| Reflection { amplitude: 1.0, phase: rng.random::<f64>() * 2.0 * PI })
                .collect();
            if irs.phase_profile.is_empty() {
                irs.phase_profile = draw;
            }
        }
    }

    /// Replace the seed and redraw every phase profile from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        for irs in &mut self.irs {
            irs.phase_profile.clear();
        }
        self.fill_missing_phases();
    }

    pub fn with_target(&self, p: Point) -> Self {
        let mut s = self.clone();
        s.target_position = p;
        s
    }

    /// Set N on every IRS (phases redrawn).
    pub fn with_elements(&self, n: usize) -> Self {
        let mut s = self.clone();
        for irs in &mut s.irs {
            irs.n_elements = n;
        }
        s.reseed(s.seed);
        s
    }

    pub fn with_sensors(&self, m: usize) -> Self {
        let mut s = self.clone();
        for irs in &mut s.irs {
            irs.n_sensors = m;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.irs.is_empty() {
            return bad("at least one IRS is required");
        }
        if self.frame_length == 0 || self.n_tx == 0 {
            return bad("frame_length and n_tx must be positive");
        }
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("rcs", self.rcs),
            ("noise_power", self.noise_power),
            ("tx_power", self.tx_power),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if !(self.element_spacing_ratio > 0.0 && self.element_spacing_ratio <= 0.5) {
            return bad("element_spacing_ratio must lie in (0, 0.5]");
        }
        let same = |a: Point, b: Point| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12;
        for (i, irs) in self.irs.iter().enumerate() {
            if irs.n_elements == 0 || irs.n_sensors == 0 {
                return Err(Error::Config(format!("IRS {i}: counts must be positive")));
            }
            if irs.phase_profile.len() != irs.n_elements {
                return Err(Error::Config(format!(
                    "IRS {i}: phase profile has {} entries, expected {}",
                    irs.phase_profile.len(),
                    irs.n_elements
                )));
            }
            if irs.phase_profile.iter().any(|r| !(r.amplitude > 0.0 && r.amplitude <= 1.0)) {
                return Err(Error::Config(format!("IRS {i}: amplitudes must lie in (0, 1]")));
            }
            if let Some(p) = irs.noise_power {
                if !(p > 0.0) {
                    return Err(Error::Config(format!("IRS {i}: noise power must be positive")));
                }
            }
            if same(irs.position, self.bs_position) {
                return Err(Error::Config(format!("IRS {i} coincides with the BS")));
            }
            if same(irs.position, self.target_position) {
                return Err(Error::DegenerateGeometry(format!("target coincides with IRS {i}")));
            }
            for (j, other) in self.irs.iter().enumerate().skip(i + 1) {
                if same(irs.position, other.position) {
                    return Err(Error::Config(format!("IRS {i} and IRS {j} coincide")));
                }
            }
        }
        Ok(())
    }
}

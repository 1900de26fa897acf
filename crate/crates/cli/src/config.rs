use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use czgate_core::control::FULL_BOUNDS;
use czgate_core::gradopt::OptimizerConfig;
use czgate_core::rl::SacConfig;
use czgate_core::{CircuitParams, ScheduleShape};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "grad")]
    Grad,
    #[serde(rename = "rl")]
    Rl,
    #[serde(rename = "rl+grad")]
    RlGrad,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Grad, Method::Rl, Method::RlGrad];

    pub fn name(self) -> &'static str {
        match self {
            Method::Grad => "grad",
            Method::Rl => "rl",
            Method::RlGrad => "rl+grad",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "grad" => Ok(Method::Grad),
            "rl" => Ok(Method::Rl),
            "rl+grad" => Ok(Method::RlGrad),
            other => bail!("unknown method {other:?} (expected grad, rl or rl+grad)"),
        }
    }
}

/// Idle frequency varied in a robustness sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vary {
    W1,
    W2,
    Wc,
}

impl Vary {
    pub fn name(self) -> &'static str {
        match self {
            Vary::W1 => "w1",
            Vary::W2 => "w2",
            Vary::Wc => "wc",
        }
    }

    pub fn get(self, p: &CircuitParams) -> f64 {
        match self {
            Vary::W1 => p.q1.freq,
            Vary::W2 => p.q2.freq,
            Vary::Wc => p.coupler.freq,
        }
    }

    pub fn set(self, p: &mut CircuitParams, value: f64) {
        match self {
            Vary::W1 => p.q1.freq = value,
            Vary::W2 => p.q2.freq = value,
            Vary::Wc => p.coupler.freq = value,
        }
    }
}

impl FromStr for Vary {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "w1" => Ok(Vary::W1),
            "w2" => Ok(Vary::W2),
            "wc" => Ok(Vary::Wc),
            other => bail!("unknown frequency {other:?} (expected w1, w2 or wc)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub gate_time_ns: f64,
    pub step_ns: f64,
    pub bounds_ghz: (f64, f64),
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { gate_time_ns: 10.0, step_ns: 1.0, bounds_ghz: FULL_BOUNDS }
    }
}

impl ScheduleConfig {
    pub fn shape(&self) -> anyhow::Result<ScheduleShape> {
        Ok(ScheduleShape::new(self.gate_time_ns, self.step_ns, self.bounds_ghz)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub wc_min_ghz: f64,
    pub wc_max_ghz: f64,
    pub points: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { wc_min_ghz: 5.5, wc_max_ghz: 7.0, points: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gate_times_ns: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { gate_times_ns: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0], methods: Method::ALL.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub pulse: Option<PathBuf>,
    pub vary: Vary,
    /// Grid limits; default to the nominal value -/+ `half_span_ghz`.
    pub min_ghz: Option<f64>,
    pub max_ghz: Option<f64>,
    pub half_span_ghz: f64,
    pub points: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { pulse: None, vary: Vary::Wc, min_ghz: None, max_ghz: None, half_span_ghz: 0.3, points: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub pulse: Option<PathBuf>,
    pub widths_ns: Vec<f64>,
    /// Starting sub-step; halved until the fidelity settles.
    pub sub_step_ns: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { pulse: None, widths_ns: vec![0.01, 0.02, 0.05, 0.1, 0.2], sub_step_ns: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepStudyConfig {
    pub steps_ns: Vec<f64>,
}

impl Default for StepStudyConfig {
    fn default() -> Self {
        Self { steps_ns: vec![0.5, 1.0, 2.0, 2.5, 5.0] }
    }
}

/// One run: circuit, pulse shape, method, optimizer settings, seed and output
/// location. Every section is optional in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub method: Method,
    pub out_dir: PathBuf,
    /// Worker threads for sweep cells.
    pub workers: usize,
    /// Replicates per sweep cell.
    pub seeds: usize,
    pub circuit: CircuitParams,
    pub schedule: ScheduleConfig,
    pub sac: SacConfig,
    pub optimizer: OptimizerConfig,
    pub diagnose: DiagnoseConfig,
    pub sweep: SweepConfig,
    pub robustness: RobustnessConfig,
    pub smoothing: SmoothingConfig,
    pub step_study: StepStudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            method: Method::RlGrad,
            out_dir: PathBuf::from("out"),
            workers: 1,
            seeds: 5,
            circuit: CircuitParams::default(),
            schedule: ScheduleConfig::default(),
            sac: SacConfig::default(),
            optimizer: OptimizerConfig::default(),
            diagnose: DiagnoseConfig::default(),
            sweep: SweepConfig::default(),
            robustness: RobustnessConfig::default(),
            smoothing: SmoothingConfig::default(),
            step_study: StepStudyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.circuit.validate()?;
        self.schedule.shape()?;
        if self.workers == 0 || self.seeds == 0 {
            bail!("workers and seeds must be positive");
        }
        if matches!(self.method, Method::Rl | Method::RlGrad) {
            self.sac.validate()?;
        }
        if matches!(self.method, Method::Grad | Method::RlGrad) {
            self.optimizer.validate()?;
        }
        Ok(())
    }
}

/// Command-line overrides; any field set here wins over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<Method>,
    pub levels: Option<usize>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out_dir {
            cfg.out_dir = o.clone();
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(l) = self.levels {
            cfg.circuit = cfg.circuit.with_levels(l);
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
    }
}

/// Independent, reproducible seed for a sweep cell: SplitMix64 folded over
/// the base seed and the cell coordinates.
pub fn cell_seed(base: u64, coords: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    coords.iter().fold(mix(base), |h, &c| mix(h ^ mix(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.method = Method::Grad;
        cfg.sac.hidden = vec![32];
        cfg.schedule.bounds_ghz = (5.2, 6.38);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_and_method_names() {
        let cfg = RunConfig::from_toml(
            "method = \"rl+grad\"\nseed = 9\n[circuit]\nlevels = 4\n[sac]\nepisodes = 3\n[schedule]\ngate_time_ns = 20.0\n",
        )
        .unwrap();
        assert_eq!(cfg.method, Method::RlGrad);
        assert_eq!(cfg.circuit.dims(), [4, 4, 4]);
        assert_eq!(cfg.sac.episodes, 3);
        assert_eq!(cfg.sac.batch_size, 256);
        assert_eq!(cfg.schedule.shape().unwrap().steps(), 20);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!("rl-grad".parse::<Method>().is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::default();
        Overrides { seed: Some(5), levels: Some(4), method: Some(Method::Rl), workers: Some(2), out_dir: None }
            .apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.method, cfg.workers), (5, Method::Rl, 2));
        assert_eq!(cfg.circuit.dims(), [4, 4, 4]);
    }

    #[test]
    fn cell_seeds_differ_and_repeat() {
        let a = cell_seed(1, &[10, 0]);
        assert_eq!(a, cell_seed(1, &[10, 0]));
        assert_ne!(a, cell_seed(1, &[10, 1]));
        assert_ne!(a, cell_seed(2, &[10, 0]));
        assert_ne!(cell_seed(1, &[0, 10]), a);
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};

pub const FULL_BOUNDS: (f64, f64) = (4.2, 6.38);
pub const RESTRICTED_BOUNDS: (f64, f64) = (5.2, 6.38);

/// Gate duration, step length and coupler bounds, without values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleShape {
    /// ns
    pub gate_time: f64,
    /// ns
    pub step_len: f64,
    /// GHz
    pub bounds: (f64, f64),
}

impl ScheduleShape {
    pub fn new(gate_time: f64, step_len: f64, bounds: (f64, f64)) -> Result<Self> {
        let shape = Self { gate_time, step_len, bounds };
        shape.validate()?;
        Ok(shape)
    }

    /// 1 ns steps over the full coupler range.
    pub fn with_gate_time(gate_time: f64) -> Result<Self> {
        Self::new(gate_time, 1.0, FULL_BOUNDS)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gate_time > 0.0 && self.step_len > 0.0) {
            return Err(precondition("gate time and step length must be positive"));
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(precondition(format!("invalid bounds ({lo}, {hi})")));
        }
        let n = (self.gate_time / self.step_len).round();
        if n < 1.0 || (n * self.step_len - self.gate_time).abs() > 1e-9 {
            return Err(precondition(format!(
                "step length {} does not divide gate time {}",
                self.step_len, self.gate_time
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.gate_time / self.step_len).round() as usize
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.bounds.0 && value <= self.bounds.1
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.bounds.0, self.bounds.1)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.bounds.0 + self.bounds.1)
    }

    /// Affine map from a normalized action in [-1, 1] onto the bounds.
    pub fn denormalize(&self, action: f64) -> f64 {
        let (lo, hi) = self.bounds;
        self.clamp(lo + 0.5 * (action + 1.0) * (hi - lo))
    }

    pub fn normalize(&self, value: f64) -> f64 {
        let (lo, hi) = self.bounds;
        2.0 * (value - lo) / (hi - lo) - 1.0
    }
}

/// Piecewise-constant coupler frequency, one value per step.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule {
    shape: ScheduleShape,
    values: Vec<f64>,
}

impl PulseSchedule {
    pub fn new(shape: ScheduleShape, values: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.steps() {
            return Err(precondition(format!("expected {} step values, got {}", shape.steps(), values.len())));
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !shape.contains(**v)) {
            return Err(precondition(format!(
                "step {k} value {v} GHz outside bounds ({}, {})",
                shape.bounds.0, shape.bounds.1
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn constant(shape: ScheduleShape, value: f64) -> Result<Self> {
        Self::new(shape, vec![value; shape.steps()])
    }

    pub fn shape(&self) -> ScheduleShape {
        self.shape
    }

    pub fn gate_time(&self) -> f64 {
        self.shape.gate_time
    }

    pub fn step_len(&self) -> f64 {
        self.shape.step_len
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.shape.bounds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy with new values, clamped into the bounds.
    pub fn with_values_clamped(&self, values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().map(|v| self.shape.clamp(v)).collect();
        assert_eq!(values.len(), self.values.len());
        Self { shape: self.shape, values }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PulseFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PulseFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk pulse format.
#[derive(Serialize, Deserialize)]
struct PulseFile {
    gate_time_ns: f64,
    step_ns: f64,
    bounds_ghz: [f64; 2],
    values_ghz: Vec<f64>,
}

impl From<&PulseSchedule> for PulseFile {
    fn from(s: &PulseSchedule) -> Self {
        Self {
            gate_time_ns: s.shape.gate_time,
            step_ns: s.shape.step_len,
            bounds_ghz: [s.shape.bounds.0, s.shape.bounds.1],
            values_ghz: s.values.clone(),
        }
    }
}

impl TryFrom<PulseFile> for PulseSchedule {
    type Error = crate::Error;

    fn try_from(f: PulseFile) -> Result<Self> {
        let shape = ScheduleShape::new(f.gate_time_ns, f.step_ns, (f.bounds_ghz[0], f.bounds_ghz[1]))?;
        PulseSchedule::new(shape, f.values_ghz)
    }
}

/// A step schedule whose transitions are smoothed by logistic edges of width
/// `width`, starting from and returning to the idle coupler frequency.
#[derive(Clone, Debug)]
pub struct SmoothedPulse {
    pub base: PulseSchedule,
    /// Logistic width, ns.
    pub width: f64,
    /// Initial propagation sub-step, ns.
    pub sub_step: f64,
    /// Resting coupler frequency before and after the gate, GHz.
    pub idle: f64,
}

impl SmoothedPulse {
    pub fn new(base: PulseSchedule, width: f64, sub_step: f64, idle: f64) -> Result<Self> {
        let sp = Self { base, width, sub_step, idle };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(precondition("logistic width must be positive"));
        }
        if !(self.sub_step > 0.0 && self.sub_step <= self.base.step_len() / 10.0 + 1e-15) {
            return Err(precondition("sub-step must be positive and at most a tenth of the step length"));
        }
        Ok(())
    }

    /// (boundary time, jump) pairs, including the rise from and fall back to idle.
    fn transitions(&self) -> Vec<(f64, f64)> {
        let v = self.base.values();
        let dt = self.base.step_len();
        let mut out = Vec::with_capacity(v.len() + 1);
        let mut prev = self.idle;
        for (k, &value) in v.iter().enumerate() {
            out.push((k as f64 * dt, value - prev));
            prev = value;
        }
        out.push((v.len() as f64 * dt, self.idle - prev));
        out
    }

    /// Waveform value at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let w = self.width;
        self.transitions()
            .iter()
            .map(|&(t0, jump)| {
                // Beyond TAIL widths the logistic is 0 or 1 to below f64 resolution.
                if t <= t0 - TAIL * w {
                    0.0
                } else if t >= t0 + TAIL * w {
                    jump
                } else {
                    jump * logistic((t - t0) / w)
                }
            })
            .sum::<f64>()
            + self.idle
    }

    /// Mean of the waveform over `[ta, tb]`, from the closed-form integral of
    /// the logistic.
    pub fn mean_over(&self, ta: f64, tb: f64) -> f64 {
        let w = self.width;
        let span = tb - ta;
        self.idle
            + self
                .transitions()
                .iter()
                .map(|&(t0, jump)| {
                    // Beyond TAIL widths the logistic is 0 or 1 to below f64 resolution.
                    if tb <= t0 - TAIL * w {
                        0.0
                    } else if ta >= t0 + TAIL * w {
                        jump
                    } else {
                        jump * w * (softplus((tb - t0) / w) - softplus((ta - t0) / w)) / span
                    }
                })
                .sum::<f64>()
    }

    pub fn sub_steps(&self, h: f64) -> usize {
        (self.base.gate_time() / h).round().max(1.0) as usize
    }
}

const TAIL: f64 = 40.0;

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Samples `(t, wc)` of the smoothed waveform at sub-step midpoints.
pub fn smooth_pulse(sp: &SmoothedPulse) -> Vec<(f64, f64)> {
    let n = sp.sub_steps(sp.sub_step);
    let h = sp.base.gate_time() / n as f64;
    (0..n)
        .map(|m| {
            let t = (m as f64 + 0.5) * h;
            (t, sp.value_at(t))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> PulseSchedule {
        PulseSchedule::new(ScheduleShape::new(2.0, 1.0, FULL_BOUNDS).unwrap(), vec![5.0, 6.0]).unwrap()
    }

    #[test]
    fn shape_validation() {
        assert_eq!(ScheduleShape::with_gate_time(10.0).unwrap().steps(), 10);
        assert_eq!(ScheduleShape::new(10.0, 2.5, FULL_BOUNDS).unwrap().steps(), 4);
        assert!(ScheduleShape::new(10.0, 3.0, FULL_BOUNDS).is_err());
        assert!(ScheduleShape::new(10.0, 1.0, (6.0, 5.0)).is_err());
    }

    #[test]
    fn schedule_rejects_out_of_bounds() {
        let shape = ScheduleShape::new(2.0, 1.0, RESTRICTED_BOUNDS).unwrap();
        assert!(PulseSchedule::new(shape, vec![5.0, 6.0]).is_err());
        assert!(PulseSchedule::new(shape, vec![5.5]).is_err());
        assert!(PulseSchedule::new(shape, vec![5.5, 6.0]).is_ok());
    }

    #[test]
    fn json_format() {
        let s = two_step();
        let text = s.to_json().unwrap();
        for key in ["gate_time_ns", "step_ns", "bounds_ghz", "values_ghz"] {
            assert!(text.contains(key));
        }
        assert_eq!(PulseSchedule::from_json(&text).unwrap(), s);
    }

    #[test]
    fn action_mapping_hits_bounds() {
        let shape = ScheduleShape::with_gate_time(10.0).unwrap();
        assert_eq!(shape.denormalize(1.0), 6.38);
        assert_eq!(shape.denormalize(-1.0), 4.2);
        assert!((shape.normalize(shape.denormalize(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn boundary_value_is_midpoint() {
        let sp = SmoothedPulse::new(two_step(), 0.01, 0.1, 6.38).unwrap();
        assert!((sp.value_at(1.0) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn narrow_edges_recover_steps() {
        let sp = SmoothedPulse::new(two_step(), 1e-4, 0.1, 6.38).unwrap();
        assert!((sp.value_at(0.5) - 5.0).abs() < 1e-6);
        assert!((sp.value_at(1.5) - 6.0).abs() < 1e-6);
        assert!((sp.mean_over(0.0, 1.0) - 5.0).abs() < 1e-3);
    }

    #[test]
    fn monotone_between_plateaus() {
        // Interior plateaus, so the rise from and return to idle (opposite
        // sign) are many widths away.
        let shape = ScheduleShape::new(4.0, 1.0, FULL_BOUNDS).unwrap();
        let base = PulseSchedule::new(shape, vec![5.0, 5.5, 6.0, 6.2]).unwrap();
        let sp = SmoothedPulse::new(base, 0.1, 0.1, 6.38).unwrap();
        let samples: Vec<f64> = (0..=1000).map(|i| sp.value_at(1.5 + i as f64 / 1000.0)).collect();
        assert!(samples.windows(2).all(|w| w[1] >= w[0]));
        assert!((samples[0] - 5.5).abs() < 1e-2 && (samples[1000] - 6.0).abs() < 1e-2);
    }

    #[test]
    fn mean_matches_quadrature() {
        let sp = SmoothedPulse::new(two_step(), 0.2, 0.1, 6.38).unwrap();
        let (ta, tb) = (0.8, 1.3);
        let m = 20_000;
        let quad: f64 =
            (0..m).map(|i| sp.value_at(ta + (i as f64 + 0.5) * (tb - ta) / m as f64)).sum::<f64>() / m as f64;
        assert!((sp.mean_over(ta, tb) - quad).abs() < 1e-9);
    }

    #[test]
    fn smoothed_validation() {
        assert!(SmoothedPulse::new(two_step(), 0.0, 0.1, 6.38).is_err());
        assert!(SmoothedPulse::new(two_step(), 0.1, 0.5, 6.38).is_err());
        assert_eq!(smooth_pulse(&SmoothedPulse::new(two_step(), 0.1, 0.05, 6.38).unwrap()).len(), 40);
    }
}

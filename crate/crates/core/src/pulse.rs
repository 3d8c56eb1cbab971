//! Complex drive envelope 𝓔(t), in GHz, in the frame rotating at ω_d.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Zero,
    Flat,
    GaussianFlattop,
    ChirpedGaussian,
}

/// Closed-form envelope on `[t0, t1]`, zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPulse {
    pub kind: PulseKind,
    pub t0: f64,
    pub t1: f64,
    /// Peak (plateau) amplitude, GHz.
    #[serde(with = "crate::linalg::complex_serde")]
    pub amplitude: c64,
    /// GaussianFlattop: ramp length (ns). The ramp is a Gaussian flank of
    /// width `rise / 3`, offset so it starts exactly at zero.
    pub rise: f64,
    /// ChirpedGaussian: standard deviation (ns) of the envelope.
    pub sigma: f64,
    /// ChirpedGaussian: linear frequency sweep rate (GHz/ns) about the centre.
    pub chirp: f64,
    /// Carrier offset Δ (GHz): the envelope is multiplied by `exp(i2πΔt)`,
    /// i.e. a drive at ω_d + Δ seen from the frame rotating at ω_d.
    pub detuning: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pulse {
    /// Piecewise-linear through `(times[k], values[k])`, zero outside.
    Sampled { times: Vec<f64>, values: Vec<c64> },
    Analytic(AnalyticPulse),
}

impl AnalyticPulse {
    fn envelope(&self, t: f64) -> c64 {
        let a = self.amplitude;
        match self.kind {
            PulseKind::Zero => ZERO,
            PulseKind::Flat => a,
            PulseKind::GaussianFlattop => {
                let ramp = |s: f64| {
                    // s = distance from the nearest edge, in [0, rise)
                    let sigma = self.rise / 3.0;
                    let g = |x: f64| (-(x - self.rise).powi(2) / (2.0 * sigma * sigma)).exp();
                    (g(s) - g(0.0)) / (1.0 - g(0.0))
                };
                let from_start = t - self.t0;
                let from_end = self.t1 - t;
                let s = from_start.min(from_end);
                if s >= self.rise {
                    a
                } else {
                    a * ramp(s.max(0.0))
                }
            }
            PulseKind::ChirpedGaussian => {
                let tc = 0.5 * (self.t0 + self.t1);
                let x = t - tc;
                let mag = (-x * x / (2.0 * self.sigma * self.sigma)).exp();
                let phase = PI * self.chirp * x * x;
                a * c64::from_polar(mag, phase)
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> c64 {
        if !(self.t0..=self.t1).contains(&t) {
            return ZERO;
        }
        let e = self.envelope(t);
        if self.detuning == 0.0 {
            e
        } else {
            e * c64::from_polar(1.0, 2.0 * PI * self.detuning * t)
        }
    }
}

impl Pulse {
    pub fn zero() -> Self {
        Pulse::Analytic(AnalyticPulse {
            kind: PulseKind::Zero,
            t0: 0.0,
            t1: f64::INFINITY,
            amplitude: ZERO,
            rise: 0.0,
            sigma: 0.0,
            chirp: 0.0,
            detuning: 0.0,
        })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<c64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "{} time stamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidParams("sampled pulse needs at least one sample".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NonMonotonicTime {
                    line: k + 2,
                    t: w[1],
                    previous: w[0],
                });
            }
        }
        if let Some(v) = values.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidParams(format!("non-finite sample {v}")));
        }
        Ok(Pulse::Sampled { times, values })
    }

    pub fn evaluate(&self, t: f64) -> c64 {
        match self {
            Pulse::Analytic(a) => a.evaluate(t),
            Pulse::Sampled { times, values } => {
                let n = times.len();
                if t < times[0] || t > times[n - 1] {
                    return ZERO;
                }
                let k = times.partition_point(|&x| x <= t);
                if k == n {
                    return values[n - 1];
                }
                let (ta, tb) = (times[k - 1], times[k]);
                if t == ta {
                    return values[k - 1];
                }
                let w = (t - ta) / (tb - ta);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    /// True if the pulse is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Pulse::Analytic(a) => a.kind == PulseKind::Zero || a.amplitude == ZERO,
            Pulse::Sampled { values, .. } => values.iter().all(|v| *v == ZERO),
        }
    }

    /// Same shape with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Pulse::Analytic(a) => Pulse::Analytic(AnalyticPulse {
                amplitude: a.amplitude * factor,
                ..a.clone()
            }),
            Pulse::Sampled { times, values } => Pulse::Sampled {
                times: times.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }

    /// `t ↦ 𝓔(t0 + t1 − t)` on `samples` equally spaced points of `[t0, t1]`.
    pub fn time_reversed(&self, t0: f64, t1: f64, samples: usize) -> Result<Self> {
        let samples = samples.max(2);
        let h = (t1 - t0) / (samples - 1) as f64;
        let times: Vec<f64> = (0..samples).map(|k| t0 + k as f64 * h).collect();
        let values = times.iter().map(|&t| self.evaluate(t0 + t1 - t)).collect();
        Pulse::sampled(times, values)
    }

    /// Writes `t_ns,re_E_ghz,im_E_ghz` with a header line. Values are written
    /// in shortest round-trip form, so loading reproduces them bit-for-bit.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let Pulse::Sampled { times, values } = self else {
            return Err(Error::InvalidParams("only sampled pulses can be saved".into()));
        };
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let write = |w: &mut std::io::BufWriter<_>| -> std::io::Result<()> {
            writeln!(w, "t_ns,re_E_ghz,im_E_ghz")?;
            for (t, v) in times.iter().zip(values) {
                writeln!(w, "{t},{},{}", v.re, v.im)?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_pulse_csv(&text)
    }
}

/// Parses the pulse CSV format: optional header, `#` comments, three columns.
pub fn parse_pulse_csv(text: &str) -> Result<Pulse> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut seen_record = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 columns, found {}", rec.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = match parsed {
            Ok(v) => v,
            Err(_) if !seen_record => {
                // header row
                seen_record = true;
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("not a number: {e}"),
                })
            }
        };
        seen_record = true;
        if nums.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        if let Some(&prev) = times.last() {
            if !(nums[0] > prev) {
                return Err(Error::NonMonotonicTime {
                    line,
                    t: nums[0],
                    previous: prev,
                });
            }
        }
        times.push(nums[0]);
        values.push(c64::new(nums[1], nums[2]));
    }
    if times.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no samples".into(),
        });
    }
    Pulse::sampled(times, values)
}

/// Parameters for [`synth_test_pulse`]. Unused fields are ignored by kinds
/// that do not need them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: PulseKind,
    pub duration_ns: f64,
    #[serde(default)]
    pub amplitude_ghz: f64,
    /// Phase of the amplitude (rad).
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_rise")]
    pub rise_ns: f64,
    /// Defaults to a sixth of the duration when absent.
    #[serde(default)]
    pub sigma_ns: Option<f64>,
    #[serde(default)]
    pub chirp_ghz_per_ns: f64,
    #[serde(default)]
    pub detuning_ghz: f64,
}

fn default_rise() -> f64 {
    5.0
}

impl SynthSpec {
    pub fn new(kind: PulseKind, duration_ns: f64, amplitude_ghz: f64) -> Self {
        Self {
            kind,
            duration_ns,
            amplitude_ghz,
            phase_rad: 0.0,
            rise_ns: default_rise(),
            sigma_ns: None,
            chirp_ghz_per_ns: 0.0,
            detuning_ghz: 0.0,
        }
    }
}

/// Analytic test pulse on `[0, T]`.
pub fn synth_test_pulse(spec: &SynthSpec) -> Result<Pulse> {
    let t1 = spec.duration_ns;
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(Error::InvalidParams(format!("duration must be positive, got {t1}")));
    }
    for (name, v) in [
        ("amplitude_ghz", spec.amplitude_ghz),
        ("phase_rad", spec.phase_rad),
        ("chirp_ghz_per_ns", spec.chirp_ghz_per_ns),
        ("detuning_ghz", spec.detuning_ghz),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
    }
    let sigma = spec.sigma_ns.unwrap_or(t1 / 6.0);
    match spec.kind {
        PulseKind::GaussianFlattop if !(spec.rise_ns > 0.0 && 2.0 * spec.rise_ns <= t1) => {
            return Err(Error::InvalidParams(format!(
                "rise time {} ns must be positive and at most half of {t1} ns",
                spec.rise_ns
            )))
        }
        PulseKind::ChirpedGaussian if !(sigma > 0.0 && sigma.is_finite()) => {
            return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")))
        }
        _ => {}
    }
    Ok(Pulse::Analytic(AnalyticPulse {
        kind: spec.kind,
        t0: 0.0,
        t1,
        amplitude: c64::from_polar(spec.amplitude_ghz, spec.phase_rad),
        rise: spec.rise_ns,
        sigma,
        chirp: spec.chirp_ghz_per_ns,
        detuning: spec.detuning_ghz,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flattop(t: f64, a: f64, rise: f64) -> Pulse {
        let mut s = SynthSpec::new(PulseKind::GaussianFlattop, t, a);
        s.rise_ns = rise;
        synth_test_pulse(&s).unwrap()
    }

    #[test]
    fn zero_and_flat() {
        assert_eq!(Pulse::zero().evaluate(3.7), ZERO);
        let p = synth_test_pulse(&SynthSpec::new(PulseKind::Flat, 50.0, 0.2)).unwrap();
        for t in [0.0, 12.5, 50.0] {
            assert_eq!(p.evaluate(t), c64::new(0.2, 0.0));
        }
        assert_eq!(p.evaluate(50.1), ZERO);
    }

    #[test]
    fn linear_interpolation() {
        let p = Pulse::sampled(vec![0.0, 1.0], vec![ZERO, c64::new(2.0, 0.0)]).unwrap();
        assert_eq!(p.evaluate(0.5), c64::new(1.0, 0.0));
        assert_eq!(p.evaluate(1.0), c64::new(2.0, 0.0));
        assert_eq!(p.evaluate(-0.1), ZERO);
        assert_eq!(p.evaluate(1.1), ZERO);
    }

    #[test]
    fn flattop_plateau_and_edges() {
        let p = flattop(50.0, 0.3, 5.0);
        assert!((p.evaluate(25.0).norm() - 0.3).abs() < 1e-15);
        assert_eq!(p.evaluate(0.0), ZERO);
        assert!(p.evaluate(50.0).norm() < 1e-15);
        // continuous at the plateau junction and monotone on the ramp
        assert!((p.evaluate(5.0 - 1e-9).norm() - 0.3).abs() < 1e-9);
        let mut prev = 0.0;
        for k in 1..=50 {
            let v = p.evaluate(k as f64 * 0.1).norm();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn chirped_gaussian_modulus_is_symmetric() {
        let mut s = SynthSpec::new(PulseKind::ChirpedGaussian, 40.0, 0.25);
        s.chirp_ghz_per_ns = 0.004;
        s.detuning_ghz = 0.05;
        let p = synth_test_pulse(&s).unwrap();
        for k in 0..=200 {
            let x = k as f64 * 0.1;
            let (a, b) = (p.evaluate(20.0 - x).norm(), p.evaluate(20.0 + x).norm());
            assert!((a - b).abs() < 1e-14, "{x}");
        }
        assert!((p.evaluate(20.0).norm() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn synth_rejects_bad_params() {
        assert!(synth_test_pulse(&SynthSpec::new(PulseKind::Flat, 0.0, 0.1)).is_err());
        let mut s = SynthSpec::new(PulseKind::GaussianFlattop, 8.0, 0.1);
        s.rise_ns = 5.0;
        assert!(matches!(synth_test_pulse(&s), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn parse_triangle() {
        let p = parse_pulse_csv("0,0,0\n1,1,0\n2,0,0\n").unwrap();
        assert_eq!(p.evaluate(1.0), c64::new(1.0, 0.0));
        assert_eq!(p.evaluate(1.5), c64::new(0.5, 0.0));
    }

    #[test]
    fn parse_header_and_comments() {
        let text = "# drive\nt_ns, re_E_ghz, im_E_ghz\n0, 0.1, -0.2\n# mid\n0.5, 0.3, 0.4\n";
        let p = parse_pulse_csv(text).unwrap();
        assert_eq!(p.evaluate(0.5), c64::new(0.3, 0.4));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(parse_pulse_csv(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_pulse_csv("# only a comment\n"), Err(Error::Parse { .. })));
        match parse_pulse_csv("0,0,0\n1,1,0\n1,0,0\n") {
            Err(Error::NonMonotonicTime { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_pulse_csv("0,0,0\n1,x,0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_pulse_csv("0,0,0\n1,1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("pulse-rt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.csv");
        let times: Vec<f64> = (0..97).map(|k| k as f64 * 0.013 + 1e-7).collect();
        let values: Vec<c64> = times
            .iter()
            .map(|t| c64::new((3.1 * t).sin() / 7.0, (t * t).cos() * 1e-3))
            .collect();
        let p = Pulse::sampled(times.clone(), values.clone()).unwrap();
        p.save(&path).unwrap();
        let q = Pulse::load(&path).unwrap();
        assert_eq!(p, q);
        for t in &times {
            assert_eq!(p.evaluate(*t).re.to_bits(), q.evaluate(*t).re.to_bits());
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn time_reversal_reflects() {
        let p = flattop(10.0, 0.2, 3.0);
        let mut s = SynthSpec::new(PulseKind::ChirpedGaussian, 10.0, 0.2);
        s.chirp_ghz_per_ns = 0.01;
        let c = synth_test_pulse(&s).unwrap();
        for src in [p, c] {
            let r = src.time_reversed(0.0, 10.0, 1001).unwrap();
            for k in 0..=100 {
                let t = k as f64 * 0.1;
                assert!((r.evaluate(t) - src.evaluate(10.0 - t)).norm() < 1e-12);
            }
        }
    }
}

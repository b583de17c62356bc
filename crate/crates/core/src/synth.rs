//! Parametric fault-current surrogate and the closed-form series
//! compensation quantities.
//!
//! Each phase carries a balanced load current plus a small positive-sequence
//! sub-synchronous ripple. While the fault is applied, faulted phases also
//! carry a fundamental-frequency fault current, a decaying DC offset and a
//! sub-synchronous component, all scaled by the amplitude law
//! `A(R) = c / (R + r0)`. The ground channel is the sum of the phases.

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::FaultType;
use crate::signal::SignalSet;

/// Positive-sequence line reactance of the benchmark line, ohms.
pub const LINE_REACTANCE_OHMS: f64 = 129.605;
pub const BASE_FREQUENCY_HZ: f64 = 60.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 12_000.0;
pub const DEFAULT_FAULT_ON_S: f64 = 4.5;
pub const DEFAULT_FAULT_OFF_S: f64 = 4.55;
pub const DEFAULT_DURATION_S: f64 = 4.7;

/// One simulated case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Compensation level K = Xc / XL as a fraction.
    pub compensation: f64,
    /// Fault resistance, ohms.
    pub fault_resistance: f64,
    /// Wind speed, m/s.
    pub wind_speed: f64,
    pub fault_type: FaultType,
    pub fault_on: f64,
    pub fault_off: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub line_reactance: f64,
    pub base_frequency: f64,
    pub rng_seed: u64,
    /// Relative amplitude/angle jitter applied to the fault component.
    /// Zero reproduces the deterministic grid.
    pub jitter: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            compensation: 0.20,
            fault_resistance: 0.01,
            wind_speed: 6.0,
            fault_type: FaultType::AG,
            fault_on: DEFAULT_FAULT_ON_S,
            fault_off: DEFAULT_FAULT_OFF_S,
            sample_rate: DEFAULT_SAMPLE_RATE_HZ,
            duration: DEFAULT_DURATION_S,
            line_reactance: LINE_REACTANCE_OHMS,
            base_frequency: BASE_FREQUENCY_HZ,
            rng_seed: 0,
            jitter: 0.0,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("compensation", self.compensation),
            ("fault_resistance", self.fault_resistance),
            ("wind_speed", self.wind_speed),
            ("fault_on", self.fault_on),
            ("fault_off", self.fault_off),
            ("sample_rate", self.sample_rate),
            ("duration", self.duration),
            ("line_reactance", self.line_reactance),
            ("base_frequency", self.base_frequency),
            ("jitter", self.jitter),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(self.compensation > 0.0 && self.compensation < 1.0) {
            return Err(Error::CompensationOutOfRange(self.compensation));
        }
        if self.fault_resistance <= 0.0 {
            return Err(invalid("fault_resistance", "must be positive"));
        }
        if self.wind_speed <= 0.0 {
            return Err(invalid("wind_speed", "must be positive"));
        }
        if self.fault_on < 0.0 {
            return Err(invalid("fault_on", "must be non-negative"));
        }
        if self.fault_on >= self.fault_off {
            return Err(invalid("fault_off", "must be later than fault_on"));
        }
        if self.fault_off > self.duration {
            return Err(invalid("duration", "must cover fault_off"));
        }
        if self.sample_rate < 2000.0 {
            return Err(invalid("sample_rate", "must be at least 2 kHz"));
        }
        if self.line_reactance <= 0.0 {
            return Err(invalid("line_reactance", "must be positive"));
        }
        if self.base_frequency <= 0.0 || self.base_frequency * 2.0 >= self.sample_rate {
            return Err(invalid(
                "base_frequency",
                "must be positive and below the Nyquist rate",
            ));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(invalid("jitter", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Sample range `[fault_on, fault_off)`.
    pub fn fault_range(&self) -> Range<usize> {
        let on = (self.fault_on * self.sample_rate).round() as usize;
        let off = (self.fault_off * self.sample_rate).round() as usize;
        on..off
    }

    /// Healthy window of the same length as the fault window, ending at
    /// fault onset.
    pub fn pre_fault_range(&self) -> Range<usize> {
        let f = self.fault_range();
        let len = f.end - f.start;
        f.start.saturating_sub(len)..f.start
    }

    /// Window used for dataset features: the fault window for faults, the
    /// pre-fault window for the healthy class.
    pub fn feature_range(&self) -> Range<usize> {
        if self.fault_type.is_fault() {
            self.fault_range()
        } else {
            self.pre_fault_range()
        }
    }

    pub fn series_reactance(&self) -> f64 {
        self.compensation * self.line_reactance
    }
}

/// Constants of the surrogate. The defaults are the frozen output of
/// [`crate::calibrate::calibrate_amplitude_law`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    /// Peak load current per phase, A.
    pub load_amplitude: f64,
    /// `c` in `A(R) = c / (R + r0)`, A·ohm.
    pub fault_scale: f64,
    /// `r0` in the amplitude law, ohms.
    pub fault_r0: f64,
    /// Extra gain on ungrounded (phase-phase and three-phase) faults.
    pub phase_fault_gain: f64,
    /// `a_ssr = ssr_gain * K * (reference_wind / Vw)`.
    pub ssr_gain: f64,
    pub reference_wind: f64,
    /// Ripple amplitude on every phase relative to `a_ssr * load_amplitude`.
    pub ripple_fraction: f64,
    /// DC offset time constant in fundamental cycles.
    pub dc_tau_cycles: f64,
    /// Fault inception angle relative to each phase's load angle, radians.
    pub fault_angle: f64,
}

impl Default for SurrogateModel {
    fn default() -> Self {
        SurrogateModel {
            load_amplitude: 280.0,
            fault_scale: 8.783149586728696,
            fault_r0: 0.0010717612809988152,
            phase_fault_gain: 1.1113416322378882,
            ssr_gain: 0.05,
            reference_wind: 6.0,
            ripple_fraction: 1e-5,
            dc_tau_cycles: 2.0,
            fault_angle: PI / 2.0,
        }
    }
}

impl SurrogateModel {
    /// Uncorrected amplitude law `c / (R + r0)`.
    pub fn amplitude(&self, fault_resistance: f64) -> f64 {
        self.fault_scale / (fault_resistance + self.fault_r0)
    }

    /// Fault-current amplitude for a given class.
    pub fn fault_amplitude(&self, fault_resistance: f64, fault_type: FaultType) -> f64 {
        let a = self.amplitude(fault_resistance);
        if fault_type.involves_ground() {
            a
        } else {
            a * self.phase_fault_gain
        }
    }

    /// Relative sub-synchronous amplitude; grows with K, shrinks with wind speed.
    pub fn ssr_amplitude(&self, compensation: f64, wind_speed: f64) -> f64 {
        self.ssr_gain * compensation * (self.reference_wind / wind_speed)
    }
}

/// Phase angles of A, B, C.
const PHASE_ANGLES: [f64; 3] = [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0];

/// How a fault class drives each phase.
#[derive(Debug, Clone, Copy)]
enum Drive {
    None,
    /// Own fault pattern with the given DC coefficient.
    Own {
        dc: f64,
    },
    /// Negated pattern of another phase (line-to-line return path).
    Return {
        of: usize,
    },
}

fn drives(f: FaultType) -> [Drive; 3] {
    use Drive::*;
    use FaultType::*;
    let own = Own { dc: 1.0 };
    match f {
        AG => [own, None, None],
        BG => [None, own, None],
        CG => [None, None, own],
        AB => [own, Return { of: 0 }, None],
        BC => [None, own, Return { of: 1 }],
        CA => [Return { of: 2 }, None, own],
        ABG => [own, own, None],
        BCG => [None, own, own],
        CAG => [own, None, own],
        // balanced DC offsets keep the three-phase fault free of ground current
        ABC => [
            Own {
                dc: PHASE_ANGLES[0].cos(),
            },
            Own {
                dc: PHASE_ANGLES[1].cos(),
            },
            Own {
                dc: PHASE_ANGLES[2].cos(),
            },
        ],
        ABCG => [own, own, own],
        NoFault => [None, None, None],
    }
}

/// Per-record quantities shared by every sample.
struct Waveform {
    rate: f64,
    omega: f64,
    omega_ssr: f64,
    load: f64,
    ripple: f64,
    ssr_rel: f64,
    ssr_phase: f64,
    amplitude: f64,
    inception: f64,
    tau: f64,
    fault: Range<usize>,
    drive: [Drive; 3],
}

impl Waveform {
    fn new(params: &ScenarioParams, model: &SurrogateModel) -> Result<Self> {
        params.validate()?;
        let f_ssr = subsync_frequency_from_k(params.compensation, params.base_frequency)?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        let ssr_phase = rng.random::<f64>() * 2.0 * PI;
        let (amp_j, ang_j): (f64, f64) =
            (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let ssr_rel = model.ssr_amplitude(params.compensation, params.wind_speed);
        let mut amplitude = model.fault_amplitude(params.fault_resistance, params.fault_type);
        let mut inception = model.fault_angle;
        if params.jitter > 0.0 {
            amplitude *= 1.0 + params.jitter * amp_j;
            inception += params.jitter * ang_j * PI;
        }
        Ok(Waveform {
            rate: params.sample_rate,
            omega: 2.0 * PI * params.base_frequency,
            omega_ssr: 2.0 * PI * f_ssr,
            load: model.load_amplitude,
            ripple: ssr_rel * model.ripple_fraction * model.load_amplitude,
            ssr_rel,
            ssr_phase,
            amplitude,
            inception,
            tau: model.dc_tau_cycles / params.base_frequency,
            fault: params.fault_range(),
            drive: drives(params.fault_type),
        })
    }

    fn fault_pattern(&self, phase: usize, dc: f64, t: f64, since_on: f64) -> f64 {
        let ph = PHASE_ANGLES[phase];
        self.amplitude
            * ((self.omega * t + ph + self.inception).sin()
                + dc * (-since_on / self.tau).exp()
                + self.ssr_rel * (self.omega_ssr * t + ph + self.ssr_phase).sin())
    }

    fn sample(&self, i: usize) -> [f64; 3] {
        let t = i as f64 / self.rate;
        let mut out = [0.0; 3];
        for (p, o) in out.iter_mut().enumerate() {
            let ph = PHASE_ANGLES[p];
            *o = self.load * (self.omega * t + ph).sin()
                + self.ripple * (self.omega_ssr * t + ph + self.ssr_phase).sin();
        }
        if self.fault.contains(&i) {
            let since_on = (i - self.fault.start) as f64 / self.rate;
            let mut own = [0.0; 3];
            for p in 0..3 {
                if let Drive::Own { dc } = self.drive[p] {
                    own[p] = self.fault_pattern(p, dc, t, since_on);
                }
            }
            for p in 0..3 {
                out[p] += match self.drive[p] {
                    Drive::None => 0.0,
                    Drive::Own { .. } => own[p],
                    Drive::Return { of } => -own[of],
                };
            }
        }
        out
    }
}

/// Synthesizes samples `range` of the record, returning (A, B, C, G).
pub fn synthesize_range(
    params: &ScenarioParams,
    model: &SurrogateModel,
    range: Range<usize>,
) -> Result<[Vec<f64>; 4]> {
    let wf = Waveform::new(params, model)?;
    synthesize_range_with(&wf, range)
}

fn synthesize_range_with(wf: &Waveform, range: Range<usize>) -> Result<[Vec<f64>; 4]> {
    let n = range.len();
    let mut ch: [Vec<f64>; 4] = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for i in range {
        let s = wf.sample(i);
        ch[0].push(s[0]);
        ch[1].push(s[1]);
        ch[2].push(s[2]);
        ch[3].push(s[0] + s[1] + s[2]);
    }
    Ok(ch)
}

/// Full record using the frozen surrogate constants.
pub fn synthesize(params: &ScenarioParams) -> Result<SignalSet> {
    synthesize_with(params, &SurrogateModel::default())
}

pub fn synthesize_with(params: &ScenarioParams, model: &SurrogateModel) -> Result<SignalSet> {
    let wf = Waveform::new(params, model)?;
    let channels = synthesize_range_with(&wf, 0..params.num_samples())?;
    Ok(SignalSet {
        sample_rate: params.sample_rate,
        start_time: 0.0,
        channels,
        fault_window: params.fault_type.is_fault().then(|| params.fault_range()),
    })
}

/// Steady-state stability limit `V1 V2 / (XL (1 - K))`, in megawatts for
/// voltages in volts.
pub fn sssl(v1: f64, v2: f64, line_reactance: f64, compensation: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&compensation) {
        return Err(Error::CompensationOutOfRange(compensation));
    }
    if line_reactance <= 0.0 || !line_reactance.is_finite() {
        return Err(invalid("line_reactance", "must be positive"));
    }
    Ok(v1 * v2 / (line_reactance * (1.0 - compensation)) / 1e6)
}

/// Natural frequency `1 / sqrt(L C)` in rad/s.
pub fn resonance_frequency(inductance: f64, capacitance: f64) -> Result<f64> {
    if !(inductance > 0.0 && capacitance > 0.0) {
        return Err(Error::NonpositiveReactance {
            l: inductance,
            c: capacitance,
        });
    }
    Ok(1.0 / (inductance * capacitance).sqrt())
}

/// Electrical sub-synchronous frequency `f0 sqrt(K)` of a series-compensated
/// line, in Hz.
pub fn subsync_frequency_from_k(compensation: f64, base_frequency: f64) -> Result<f64> {
    if !(compensation > 0.0 && compensation < 1.0) {
        return Err(Error::CompensationOutOfRange(compensation));
    }
    Ok(base_frequency * compensation.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Channel;
    use crate::wavelet::extract_features;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn sssl_values() {
        let base = sssl(161e3, 161e3, 129.605, 0.0).unwrap();
        assert_eq!(base, 161e3 * 161e3 / 129.605 / 1e6);
        // 161e3^2 / (129.605 * 0.8) = 2.5921e10 / 103.684
        let k20 = sssl(161e3, 161e3, 129.605, 0.20).unwrap();
        assert!(rel(k20, 250.0) < 1e-9, "{k20}");
        let k50 = sssl(161e3, 161e3, 129.605, 0.5).unwrap();
        assert!(rel(k50, 2.0 * base) < 1e-12);
        assert!(matches!(
            sssl(1.0, 1.0, 1.0, 1.0),
            Err(Error::CompensationOutOfRange(_))
        ));
    }

    #[test]
    fn resonance_values() {
        assert_eq!(resonance_frequency(1.0, 1.0).unwrap(), 1.0);
        let w = resonance_frequency(0.0123, 90.9629e-6).unwrap();
        assert!(rel(w, 945.3993414202729) < 1e-9, "{w}");
        let w4 = resonance_frequency(0.0123, 4.0 * 90.9629e-6).unwrap();
        assert!(rel(w4, w / 2.0) < 1e-12);
        assert!(resonance_frequency(0.0, 1.0).is_err());
        assert!(resonance_frequency(1.0, -1.0).is_err());
    }

    #[test]
    fn subsync_values() {
        assert_eq!(subsync_frequency_from_k(0.25, 60.0).unwrap(), 30.0);
        let f = subsync_frequency_from_k(0.55, 60.0).unwrap();
        assert!(rel(f, 44.49719092257398) < 1e-12);
        for k in [0.01, 0.3, 0.6, 0.99] {
            assert!(subsync_frequency_from_k(k, 60.0).unwrap() < 60.0);
        }
        assert!(subsync_frequency_from_k(1.0, 60.0).is_err());
        assert!(subsync_frequency_from_k(0.0, 60.0).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let mut p = ScenarioParams::default();
        p.fault_off = 4.4;
        match p.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "fault_off"),
            other => panic!("{other:?}"),
        }
        let mut p = ScenarioParams::default();
        p.sample_rate = 1000.0;
        assert!(p.validate().is_err());
        let mut p = ScenarioParams::default();
        p.compensation = 1.2;
        assert!(matches!(
            p.validate(),
            Err(Error::CompensationOutOfRange(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let p = ScenarioParams {
            fault_type: FaultType::BCG,
            rng_seed: 17,
            jitter: 0.1,
            ..Default::default()
        };
        let a = synthesize(&p).unwrap();
        let b = synthesize(&p).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&ScenarioParams { rng_seed: 18, ..p }).unwrap();
        assert_ne!(a.channels, c.channels);
    }

    #[test]
    fn range_synthesis_matches_full_record() {
        let p = ScenarioParams {
            fault_type: FaultType::CA,
            ..Default::default()
        };
        let full = synthesize(&p).unwrap();
        let r = p.fault_range();
        let part = synthesize_range(&p, &SurrogateModel::default(), r.clone()).unwrap();
        for ch in 0..4 {
            assert_eq!(&full.channels[ch][r.clone()], part[ch].as_slice());
        }
    }

    #[test]
    fn ground_is_residual_current() {
        for f in FaultType::ALL {
            let s = synthesize(&ScenarioParams {
                fault_type: f,
                ..Default::default()
            })
            .unwrap();
            for i in (0..s.len()).step_by(97) {
                let [a, b, c, g] = s.sample(i);
                let scale = a.abs() + b.abs() + c.abs();
                assert!((g - (a + b + c)).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn balanced_healthy_record_has_no_ground_current() {
        let model = SurrogateModel {
            ssr_gain: 0.0,
            ..Default::default()
        };
        let s = synthesize_with(
            &ScenarioParams {
                fault_type: FaultType::NoFault,
                ..Default::default()
            },
            &model,
        )
        .unwrap();
        for &g in s.channel(Channel::G) {
            assert!(g.abs() < 1e-9 * model.load_amplitude);
        }
    }

    #[test]
    fn no_fault_means_no_fault_component() {
        let p = ScenarioParams {
            fault_type: FaultType::NoFault,
            ..Default::default()
        };
        let s = synthesize(&p).unwrap();
        assert!(s.fault_window.is_none());
        let m = SurrogateModel::default();
        let lim = m.load_amplitude * (1.0 + m.ssr_amplitude(0.2, 6.0) * m.ripple_fraction) + 1e-9;
        for ch in [Channel::A, Channel::B, Channel::C] {
            assert!(s.channel(ch).iter().all(|v| v.abs() <= lim));
        }
    }

    #[test]
    fn amplitude_law_decade_ratio() {
        let m = SurrogateModel::default();
        let ratio = m.amplitude(0.01) / m.amplitude(0.1);
        assert!(rel(ratio, 9.13) < 0.15, "{ratio}");
    }

    #[test]
    fn phase_fault_ground_is_negligible() {
        let p = ScenarioParams {
            fault_type: FaultType::AB,
            ..Default::default()
        };
        let s = synthesize(&p).unwrap();
        let f = extract_features(&s, p.fault_range()).unwrap();
        assert!(f.q() / f.m() < 1e-4);
        assert!(((f.m() - f.n()) / f.m()).abs() < 1e-4);
    }

    #[test]
    fn a_ssr_trends() {
        let m = SurrogateModel::default();
        assert!(m.ssr_amplitude(0.5, 6.0) > m.ssr_amplitude(0.3, 6.0));
        assert!(m.ssr_amplitude(0.5, 10.0) < m.ssr_amplitude(0.5, 6.0));
    }
}

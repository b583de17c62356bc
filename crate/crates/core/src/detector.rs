//! Online detection over a four-channel sample stream.
//!
//! Every `hop` samples the trailing `window` samples are reduced to a
//! feature vector and classified. An event opens after `debounce`
//! consecutive identical non-zero labels and closes after `debounce`
//! consecutive windows that disagree with it: all-zero labels clear it, a
//! run of a different non-zero label closes it and opens a new event. Event
//! times are those of the first window of the deciding run; a window's time
//! is the timestamp of its newest sample.

use serde::{Deserialize, Serialize};

use crate::ann::Network;
use crate::error::{Error, Result};
use crate::fault::{label_name, FaultLabel, LabelName};
use crate::signal::SignalSet;
use crate::wavelet::features_from_slices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window_samples: usize,
    pub hop_samples: usize,
    pub debounce_windows: usize,
    pub threshold: f64,
}

impl DetectorConfig {
    /// One fundamental cycle per window, half-window hop.
    pub fn for_rate(sample_rate: f64, base_frequency: f64) -> Self {
        let window = (sample_rate / base_frequency).round().max(8.0) as usize;
        DetectorConfig {
            window_samples: window,
            hop_samples: (window / 2).max(1),
            debounce_windows: 2,
            threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidParameter {
                field,
                reason: reason.to_string(),
            })
        };
        if self.window_samples < 8 {
            return bad("window", "must be at least 8 samples");
        }
        if self.hop_samples == 0 || self.hop_samples > self.window_samples {
            return bad("hop", "must lie in 1..=window");
        }
        if self.debounce_windows == 0 {
            return bad("debounce", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold", "must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    /// Index of the window's first sample in the stream.
    pub start_sample: u64,
    /// Timestamp of the window's newest sample, seconds.
    pub time: f64,
    pub outputs: [f64; 4],
    pub label: FaultLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub onset_time: f64,
    /// `None` while the event is still open (or the stream ended inside it).
    pub clear_time: Option<f64>,
    pub label: FaultLabel,
    /// Windows from the opening run up to and including the closing run.
    pub windows: Vec<WindowRecord>,
}

impl DetectionEvent {
    pub fn name(&self) -> LabelName {
        label_name(self.label)
    }

    /// `onset_s,clear_s,code,name`; an open event leaves `clear_s` empty.
    pub fn record_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.onset_time,
            self.clear_time.map_or(String::new(), |t| t.to_string()),
            self.label.code_string(),
            self.name()
        )
    }
}

/// Samples left over after the last full hop when the stream ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamUnderrun {
    pub discarded_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub events: Vec<DetectionEvent>,
    pub windows_evaluated: u64,
    pub samples_seen: u64,
    pub underrun: Option<StreamUnderrun>,
}

struct Run {
    label: FaultLabel,
    windows: Vec<WindowRecord>,
}

impl Run {
    fn count(&self) -> usize {
        self.windows.len()
    }

    fn start_time(&self) -> f64 {
        self.windows[0].time
    }
}

/// Streaming detector. Memory is bounded by the window length plus the
/// audit trail of the currently open event.
pub struct Detector<'a> {
    net: &'a Network,
    cfg: DetectorConfig,
    sample_rate: f64,
    start_time: f64,
    ring: [Vec<f64>; 4],
    scratch: [Vec<f64>; 4],
    head: usize,
    seen: u64,
    windows_evaluated: u64,
    last_window_end: u64,
    /// Consecutive run that may open (or, while an event is open, close) an
    /// event.
    pending: Option<Run>,
    open: Option<DetectionEvent>,
    closed: Vec<DetectionEvent>,
}

impl<'a> Detector<'a> {
    pub fn new(
        net: &'a Network,
        cfg: DetectorConfig,
        sample_rate: f64,
        start_time: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "rate",
                reason: "must be positive".into(),
            });
        }
        if net.in_dim() != 4 || net.out_dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: net.in_dim(),
            });
        }
        let w = cfg.window_samples;
        Ok(Detector {
            net,
            cfg,
            sample_rate,
            start_time,
            ring: std::array::from_fn(|_| vec![0.0; w]),
            scratch: std::array::from_fn(|_| vec![0.0; w]),
            head: 0,
            seen: 0,
            windows_evaluated: 0,
            last_window_end: 0,
            pending: None,
            open: None,
            closed: Vec::new(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Feeds one sample; returns the window record if a window was
    /// evaluated.
    pub fn push(&mut self, sample: [f64; 4]) -> Result<Option<WindowRecord>> {
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let w = self.cfg.window_samples;
        for (ch, v) in self.ring.iter_mut().zip(sample) {
            ch[self.head] = v;
        }
        self.head = (self.head + 1) % w;
        self.seen += 1;
        if self.seen < w as u64 || (self.seen - w as u64) % self.cfg.hop_samples as u64 != 0 {
            return Ok(None);
        }
        for (dst, src) in self.scratch.iter_mut().zip(&self.ring) {
            let (newer, older) = src.split_at(self.head);
            dst[..older.len()].copy_from_slice(older);
            dst[older.len()..].copy_from_slice(newer);
        }
        let f = features_from_slices([
            &self.scratch[0],
            &self.scratch[1],
            &self.scratch[2],
            &self.scratch[3],
        ])?;
        let y = self.net.outputs(&f)?;
        let outputs = [y[0], y[1], y[2], y[3]];
        let rec = WindowRecord {
            start_sample: self.seen - w as u64,
            time: self.start_time + (self.seen - 1) as f64 / self.sample_rate,
            outputs,
            label: FaultLabel::from_outputs(&outputs, self.cfg.threshold),
        };
        self.windows_evaluated += 1;
        self.last_window_end = self.seen;
        self.step(rec);
        Ok(Some(rec))
    }

    fn extend_pending(&mut self, rec: WindowRecord) {
        match &mut self.pending {
            Some(run) if run.label == rec.label => run.windows.push(rec),
            _ => {
                self.pending = Some(Run {
                    label: rec.label,
                    windows: vec![rec],
                })
            }
        }
    }

    fn step(&mut self, rec: WindowRecord) {
        let debounce = self.cfg.debounce_windows;
        match &mut self.open {
            None => {
                if rec.label.is_none() {
                    self.pending = None;
                    return;
                }
                self.extend_pending(rec);
                self.try_open();
            }
            Some(ev) => {
                ev.windows.push(rec);
                if rec.label == ev.label {
                    self.pending = None;
                    return;
                }
                self.extend_pending(rec);
                let run = self.pending.as_ref().expect("pending run just extended");
                if run.count() >= debounce {
                    let mut ev = self.open.take().expect("open event");
                    ev.clear_time = Some(run.start_time());
                    self.closed.push(ev);
                    if run.label.is_none() {
                        self.pending = None;
                    } else {
                        self.try_open();
                    }
                }
            }
        }
    }

    fn try_open(&mut self) {
        if let Some(run) = &self.pending {
            if run.count() >= self.cfg.debounce_windows {
                let run = self.pending.take().expect("checked above");
                self.open = Some(DetectionEvent {
                    onset_time: run.start_time(),
                    clear_time: None,
                    label: run.label,
                    windows: run.windows,
                });
            }
        }
    }

    /// Events closed since the last call.
    pub fn drain_closed(&mut self) -> Vec<DetectionEvent> {
        std::mem::take(&mut self.closed)
    }

    pub fn open_event(&self) -> Option<&DetectionEvent> {
        self.open.as_ref()
    }

    /// Samples plus window records currently held in memory.
    pub fn retained_len(&self) -> usize {
        let ring: usize = self
            .ring
            .iter()
            .chain(&self.scratch)
            .map(Vec::capacity)
            .sum();
        let pending = self.pending.as_ref().map_or(0, |r| r.windows.capacity());
        let open = self.open.as_ref().map_or(0, |e| e.windows.capacity());
        ring + pending + open + self.closed.capacity()
    }

    /// Ends the stream. Samples after the last evaluated window are
    /// discarded and reported as an underrun.
    pub fn finish(mut self) -> DetectionReport {
        let mut events = self.drain_closed();
        events.extend(self.open.take());
        let tail = (self.seen - self.last_window_end) as usize;
        let underrun = (tail > 0).then(|| {
            log::warn!("stream ended mid-window: {tail} trailing samples discarded");
            StreamUnderrun {
                discarded_samples: tail,
            }
        });
        DetectionReport {
            events,
            windows_evaluated: self.windows_evaluated,
            samples_seen: self.seen,
            underrun,
        }
    }
}

/// Runs the detector over an iterator of samples.
pub fn stream_detect<I>(
    samples: I,
    net: &Network,
    cfg: DetectorConfig,
    sample_rate: f64,
    start_time: f64,
) -> Result<DetectionReport>
where
    I: IntoIterator<Item = Result<[f64; 4]>>,
{
    let mut det = Detector::new(net, cfg, sample_rate, start_time)?;
    for s in samples {
        det.push(s?)?;
    }
    Ok(det.finish())
}

pub fn detect_signal(
    signals: &SignalSet,
    net: &Network,
    cfg: DetectorConfig,
) -> Result<DetectionReport> {
    stream_detect(
        (0..signals.len()).map(|i| Ok(signals.sample(i))),
        net,
        cfg,
        signals.sample_rate,
        signals.start_time,
    )
}

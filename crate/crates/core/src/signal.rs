//! Four-channel current records and their CSV form.
//!
//! CSV layout: header `t,iA,iB,iC,iG`, one row per sample, time in seconds
//! and currents in amperes, written with shortest round-trip decimal text so
//! that export followed by import reproduces every value exactly.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

pub const SIGNAL_HEADER: [&str; 5] = ["t", "iA", "iB", "iC", "iG"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    A,
    B,
    C,
    G,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::A, Channel::B, Channel::C, Channel::G];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Time-aligned phase and ground currents.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    pub sample_rate: f64,
    /// Time of sample 0 in seconds.
    pub start_time: f64,
    pub channels: [Vec<f64>; 4],
    /// Sample range of the injected fault, when known.
    pub fault_window: Option<Range<usize>>,
}

impl SignalSet {
    /// Builds a record from phase currents, deriving ground as their sum.
    pub fn from_phases(sample_rate: f64, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Self {
        assert!(a.len() == b.len() && b.len() == c.len());
        let g = a
            .iter()
            .zip(&b)
            .zip(&c)
            .map(|((x, y), z)| x + y + z)
            .collect();
        SignalSet {
            sample_rate,
            start_time: 0.0,
            channels: [a, b, c, g],
            fault_window: None,
        }
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channels[ch.index()]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        (((t - self.start_time) * self.sample_rate).round().max(0.0) as usize).min(self.len())
    }

    pub fn sample(&self, i: usize) -> [f64; 4] {
        [
            self.channels[0][i],
            self.channels[1][i],
            self.channels[2][i],
            self.channels[3][i],
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(SIGNAL_HEADER)?;
        for i in 0..self.len() {
            let s = self.sample(i);
            wr.write_record([
                self.time(i).to_string(),
                s[0].to_string(),
                s[1].to_string(),
                s[2].to_string(),
                s[3].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| format_err(path, e.into()))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| format_err(path, e))
    }

    /// Reads a whole record. The sample rate is inferred from the time
    /// column and snapped to an integer number of hertz when it is one.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut ch: [Vec<f64>; 4] = Default::default();
        for row in SignalReader::new(r)? {
            let row = row?;
            times.push(row.t);
            for (c, v) in ch.iter_mut().zip(row.currents) {
                c.push(v);
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse("signal CSV needs at least two rows".into()));
        }
        let span = times[times.len() - 1] - times[0];
        if span <= 0.0 {
            return Err(Error::Parse("time column must increase".into()));
        }
        let sample_rate = snap_rate((times.len() - 1) as f64 / span);
        Ok(SignalSet {
            sample_rate,
            start_time: times[0],
            channels: ch,
            fault_window: None,
        })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| format_err(path, e.into()))?;
        Self::read_csv(std::io::BufReader::new(f)).map_err(|e| format_err(path, e))
    }
}

fn format_err(path: &Path, e: Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Rounds an inferred sample rate to the nearest integer when it is within
/// a part per million of one.
pub fn snap_rate(rate: f64) -> f64 {
    let r = rate.round();
    if r > 0.0 && ((rate - r) / r).abs() < 1e-6 {
        r
    } else {
        rate
    }
}

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalRow {
    pub t: f64,
    /// A, B, C, G
    pub currents: [f64; 4],
}

/// Incremental reader over signal CSV rows; holds one row at a time.
pub struct SignalReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    line: u64,
}

impl<R: Read> SignalReader<R> {
    pub fn new(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers()?.clone();
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names != SIGNAL_HEADER {
            return Err(Error::Parse(format!(
                "expected header {}, found {}",
                SIGNAL_HEADER.join(","),
                names.join(",")
            )));
        }
        Ok(SignalReader {
            records: rd.into_records(),
            line: 1,
        })
    }
}

impl<R: Read> Iterator for SignalReader<R> {
    type Item = Result<SignalRow>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        self.line += 1;
        let line = self.line;
        Some(rec.map_err(Error::from).and_then(|rec| {
            if rec.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {line}: expected 5 fields, found {}",
                    rec.len()
                )));
            }
            let mut vals = [0.0; 5];
            for (v, field) in vals.iter_mut().zip(rec.iter()) {
                *v = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {line}: bad number `{field}`")))?;
            }
            Ok(SignalRow {
                t: vals[0],
                currents: [vals[1], vals[2], vals[3], vals[4]],
            })
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ground_is_phase_sum() {
        let s = SignalSet::from_phases(10.0, vec![1.0, 2.0], vec![0.5, -1.0], vec![0.25, 4.0]);
        assert_eq!(s.channel(Channel::G), &[1.75, 5.0]);
    }

    #[test]
    fn rejects_wrong_header() {
        let data = "time,a,b,c,g\n0,1,2,3,6\n";
        assert!(SignalSet::read_csv(data.as_bytes()).is_err());
    }

    #[test]
    fn reports_bad_numbers_with_line() {
        let data = "t,iA,iB,iC,iG\n0,1,2,3,6\n0.001,x,2,3,6\n";
        let err = SignalSet::read_csv(data.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn infers_integer_rate() {
        let s = SignalSet::from_phases(12000.0, vec![0.0; 50], vec![1.0; 50], vec![2.0; 50]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SignalSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.sample_rate, 12000.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 3..40usize)) {
            let b: Vec<f64> = vals.iter().map(|v| v * 1e-7).collect();
            let c: Vec<f64> = vals.iter().rev().cloned().collect();
            let s = SignalSet::from_phases(10000.0, vals.clone(), b, c);
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            let back = SignalSet::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.channels, s.channels);
        }
    }
}

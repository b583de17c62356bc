//! Feature response along one scenario axis with the others held fixed.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{labeled_sample, GRID_K_PERCENT, GRID_R_CENTI, GRID_VW};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::synth::{ScenarioParams, SurrogateModel};
use crate::wavelet::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Compensation, percent.
    K,
    /// Fault resistance, ohms.
    R,
    /// Wind speed, m/s.
    Vw,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::R => "R",
            SweepAxis::Vw => "Vw",
        }
    }

    /// Grid points of the training sweep, in axis units.
    pub fn grid_values(self) -> Vec<f64> {
        match self {
            SweepAxis::K => GRID_K_PERCENT.iter().map(|&k| f64::from(k)).collect(),
            SweepAxis::R => GRID_R_CENTI.iter().map(|&r| f64::from(r) / 100.0).collect(),
            SweepAxis::Vw => GRID_VW.to_vec(),
        }
    }

    fn apply(self, base: &ScenarioParams, v: f64) -> ScenarioParams {
        let mut p = base.clone();
        match self {
            SweepAxis::K => p.compensation = v / 100.0,
            SweepAxis::R => p.fault_resistance = v,
            SweepAxis::Vw => p.wind_speed = v,
        }
        p
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(SweepAxis::K),
            "r" => Ok(SweepAxis::R),
            "vw" => Ok(SweepAxis::Vw),
            _ => Err(Error::Parse(format!(
                "invalid sweep axis `{s}` (expected K, R or Vw)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub features: FeatureVector,
}

/// Features at each `values` point (default: the axis grid), all other
/// parameters taken from `base`.
pub fn sweep(
    axis: SweepAxis,
    base: &ScenarioParams,
    values: Option<&[f64]>,
    model: &SurrogateModel,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    let values = values.map_or_else(|| axis.grid_values(), <[f64]>::to_vec);
    if values.is_empty() {
        return Err(Error::InvalidParameter {
            field: "values",
            reason: "sweep needs at least one point".into(),
        });
    }
    exec.map_indices(values.len(), |i| {
        let p = axis.apply(base, values[i]);
        labeled_sample(&p, model).map(|s| SweepRow {
            value: values[i],
            features: s.features,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_sweep_csv<W: Write>(axis: SweepAxis, rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([axis.name(), "m", "n", "p", "q"])?;
    for r in rows {
        let mut rec = vec![r.value.to_string()];
        rec.extend(r.features.0.iter().map(f64::to_string));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest relative deviation from the median.
pub fn relative_spread(values: &[f64]) -> f64 {
    let m = median(values);
    values
        .iter()
        .map(|v| ((v - m) / m).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::FaultType;

    #[test]
    fn axis_parsing() {
        assert_eq!("vw".parse::<SweepAxis>().unwrap(), SweepAxis::Vw);
        assert_eq!("K".parse::<SweepAxis>().unwrap(), SweepAxis::K);
        assert!("X".parse::<SweepAxis>().is_err());
        assert_eq!(SweepAxis::R.grid_values().len(), 10);
    }

    #[test]
    fn single_point_sweep_is_one_row() {
        let base = ScenarioParams::default();
        let rows = sweep(
            SweepAxis::R,
            &base,
            Some(&[0.05]),
            &SurrogateModel::default(),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let mut buf = Vec::new();
        write_sweep_csv(SweepAxis::R, &rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn resistance_sweep_decreases() {
        let base = ScenarioParams {
            fault_type: FaultType::AG,
            ..Default::default()
        };
        let rows = sweep(
            SweepAxis::R,
            &base,
            None,
            &SurrogateModel::default(),
            Exec::Sequential,
        )
        .unwrap();
        for w in rows.windows(2) {
            assert!(w[1].features.m() < w[0].features.m());
        }
    }

    #[test]
    fn spread_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((relative_spread(&[9.0, 10.0, 11.5]) - 0.15).abs() < 1e-12);
    }
}

//! Grid dataset over compensation, wind speed, fault resistance and fault
//! class; log-domain feature normalization; stratified splits; CSV storage.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ann::{self, LabeledSet, LayerSpec, Network, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fault::{FaultLabel, FaultType};
use crate::synth::{synthesize_range, ScenarioParams, SurrogateModel};
use crate::wavelet::{features_from_slices, FeatureVector};

/// Compensation levels, percent.
pub const GRID_K_PERCENT: [u32; 9] = [20, 25, 30, 35, 40, 45, 50, 55, 60];
/// Wind speeds, m/s.
pub const GRID_VW: [f64; 5] = [6.0, 7.0, 8.0, 9.0, 10.0];
/// Fault resistances, hundredths of an ohm.
pub const GRID_R_CENTI: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

pub const GRID_SIZE: usize = 9 * 5 * 10 * 12;

pub const DATASET_HEADER: [&str; 12] = [
    "K",
    "R",
    "Vw",
    "fault_type",
    "m",
    "n",
    "p",
    "q",
    "bitA",
    "bitB",
    "bitC",
    "bitG",
];

pub const NORMALIZER_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub params: ScenarioParams,
    pub features: FeatureVector,
    pub target: FaultLabel,
}

fn percent_to_fraction(p: f64) -> f64 {
    p / 100.0
}

fn centi_to_ohms(c: u32) -> f64 {
    f64::from(c) / 100.0
}

/// Seed of the series sharing (K, Vw, class); every R value of a series
/// gets the same seed so the SSR phase does not mask the resistance trend.
pub fn series_seed(seed: u64, k_index: usize, vw_index: usize, class_index: usize) -> u64 {
    let series = (k_index * GRID_VW.len() + vw_index) * 12 + class_index;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(series as u64)
}

/// Scenario parameters of the full grid in lexicographic (K, Vw, R, class)
/// order.
pub fn grid_params(seed: u64, jitter: f64) -> Vec<ScenarioParams> {
    let mut out = Vec::with_capacity(GRID_SIZE);
    for (ki, &k) in GRID_K_PERCENT.iter().enumerate() {
        for (vi, &vw) in GRID_VW.iter().enumerate() {
            for &r in &GRID_R_CENTI {
                for ft in FaultType::ALL {
                    out.push(ScenarioParams {
                        compensation: percent_to_fraction(f64::from(k)),
                        fault_resistance: centi_to_ohms(r),
                        wind_speed: vw,
                        fault_type: ft,
                        rng_seed: series_seed(seed, ki, vi, ft.index()),
                        jitter,
                        ..Default::default()
                    });
                }
            }
        }
    }
    out
}

/// Synthesizes one case and extracts its features over the dataset window.
pub fn labeled_sample(params: &ScenarioParams, model: &SurrogateModel) -> Result<LabeledSample> {
    let range = params.feature_range();
    let ch = synthesize_range(params, model, range)?;
    let features = features_from_slices([&ch[0], &ch[1], &ch[2], &ch[3]])?;
    Ok(LabeledSample {
        params: params.clone(),
        features,
        target: params.fault_type.label(),
    })
}

pub fn generate_samples(
    params: &[ScenarioParams],
    model: &SurrogateModel,
    exec: Exec,
) -> Result<Vec<LabeledSample>> {
    exec.map_indices(params.len(), |i| labeled_sample(&params[i], model))
        .into_iter()
        .collect()
}

/// The 5400-sample grid with the default surrogate.
pub fn generate_grid(seed: u64) -> Result<Vec<LabeledSample>> {
    generate_grid_with(seed, 0.0, &SurrogateModel::default(), Exec::default())
}

pub fn generate_grid_with(
    seed: u64,
    jitter: f64,
    model: &SurrogateModel,
    exec: Exec,
) -> Result<Vec<LabeledSample>> {
    generate_samples(&grid_params(seed, jitter), model, exec)
}

/// `y = (log10(x + eps) - mean) / std` per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub epsilon: f64,
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl Normalizer {
    /// Fits mean and population standard deviation of the log features.
    pub fn fit(features: &[FeatureVector]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for f in features {
            if !f.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            if f.0.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidParameter {
                    field: "features",
                    reason: "must be non-negative".into(),
                });
            }
        }
        let n = features.len() as f64;
        let logs: Vec<[f64; 4]> = features
            .iter()
            .map(|f| f.0.map(|v| (v + NORMALIZER_EPSILON).log10()))
            .collect();
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for i in 0..4 {
            mean[i] = logs.iter().map(|l| l[i]).sum::<f64>() / n;
            let var = logs.iter().map(|l| (l[i] - mean[i]).powi(2)).sum::<f64>() / n;
            std[i] = var.sqrt();
            // spread at round-off level of the mean counts as none
            if !(std[i] > 1e-12 * mean[i].abs().max(1.0)) {
                return Err(Error::DegenerateFeature { index: i });
            }
        }
        Ok(Normalizer {
            epsilon: NORMALIZER_EPSILON,
            mean,
            std,
        })
    }

    pub fn apply(&self, f: &FeatureVector) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = ((f.0[i] + self.epsilon).log10() - self.mean[i]) / self.std[i];
        }
        out
    }
}

/// Stratified split of indices by `keys`: within each key a seeded shuffle
/// moves `round(count * fraction)` items to the holdout. Both index lists
/// are returned sorted.
pub fn stratified_indices<K: Ord + Copy>(
    keys: &[K],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    let mut groups: std::collections::BTreeMap<K, Vec<usize>> = Default::default();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(*k).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut hold = Vec::new();
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        let h = (idx.len() as f64 * fraction).round() as usize;
        hold.extend_from_slice(&idx[..h]);
        train.extend_from_slice(&idx[h..]);
    }
    train.sort_unstable();
    hold.sort_unstable();
    Ok((train, hold))
}

/// Stratified by fault class. Returns (train, holdout).
pub fn split(
    samples: &[LabeledSample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let keys: Vec<FaultType> = samples.iter().map(|s| s.params.fault_type).collect();
    let (tr, ho) = stratified_indices(&keys, fraction, seed)?;
    Ok((
        tr.into_iter().map(|i| samples[i].clone()).collect(),
        ho.into_iter().map(|i| samples[i].clone()).collect(),
    ))
}

pub fn to_labeled_set(samples: &[LabeledSample], normalizer: &Normalizer) -> LabeledSet {
    let mut set = LabeledSet::new(4, 4);
    for s in samples {
        set.push(&normalizer.apply(&s.features), &s.target.targets());
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Init {
    #[default]
    Random,
    Zero,
}

/// Fits the normalizer on `train`, initializes a network of shape `specs`
/// with `cfg.rng_seed`, trains it, and embeds the normalizer.
pub fn train_classifier(
    train: &[LabeledSample],
    specs: Vec<LayerSpec>,
    init: Init,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let feats: Vec<FeatureVector> = train.iter().map(|s| s.features).collect();
    let normalizer = Normalizer::fit(&feats)?;
    let set = to_labeled_set(train, &normalizer);
    let net = match init {
        Init::Random => Network::init_random(specs, cfg.rng_seed)?,
        Init::Zero => Network::zeros(specs)?,
    };
    let (mut net, hist) = ann::train(&net, &set, cfg)?;
    net.normalizer = Some(normalizer);
    Ok((net, hist))
}

/// Lowest faulted-channel feature over the highest healthy-channel feature.
/// `None` for the healthy class.
pub fn separation_ratio(s: &LabeledSample) -> Option<f64> {
    if s.target.is_none() {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (v, b) in s.features.0.iter().zip(s.target.bits) {
        if b {
            lo = lo.min(*v);
        } else {
            hi = hi.max(*v);
        }
    }
    Some(if hi == 0.0 { f64::INFINITY } else { lo / hi })
}

fn format_percent(k: f64) -> String {
    let p = k * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round())
    } else {
        p.to_string()
    }
}

pub fn write_dataset_csv<W: Write>(samples: &[LabeledSample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(DATASET_HEADER)?;
    for s in samples {
        let p = &s.params;
        let mut rec = vec![
            format_percent(p.compensation),
            p.fault_resistance.to_string(),
            p.wind_speed.to_string(),
            p.fault_type.token().to_string(),
        ];
        rec.extend(s.features.0.iter().map(f64::to_string));
        rec.extend(s.target.bits.iter().map(|&b| u8::from(b).to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(r: R) -> Result<Vec<LabeledSample>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "dataset header must be `{}`",
            DATASET_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "line {line}: bad {} `{}`",
                    DATASET_HEADER[i], &rec[i]
                ))
            })
        };
        let fault_type: FaultType = rec[3]
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad fault_type `{}`", &rec[3])))?;
        let mut feats = [0.0; 4];
        for (i, f) in feats.iter_mut().enumerate() {
            *f = num(4 + i)?;
        }
        let mut bits = [false; 4];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = match rec[8 + i].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse(format!(
                        "line {line}: bit must be 0/1, got `{other}`"
                    )))
                }
            };
        }
        let target = FaultLabel::from_bits(bits);
        if target != fault_type.label() {
            return Err(Error::Parse(format!(
                "line {line}: bits {} do not match {fault_type}",
                target.code_string()
            )));
        }
        out.push(LabeledSample {
            params: ScenarioParams {
                compensation: percent_to_fraction(num(0)?),
                fault_resistance: num(1)?,
                wind_speed: num(2)?,
                fault_type,
                ..Default::default()
            },
            features: FeatureVector(feats),
            target,
        });
    }
    Ok(out)
}

pub fn save_dataset_csv(samples: &[LabeledSample], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_dataset_csv(samples, std::io::BufWriter::new(f)).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_dataset_csv(path: &Path) -> Result<Vec<LabeledSample>> {
    let wrap = |e: Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let f = std::fs::File::open(path).map_err(|e| wrap(e.into()))?;
    read_dataset_csv(std::io::BufReader::new(f)).map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rows of the two tabulated AG / AB coefficient tables.
    const TABLE_ROWS: [[f64; 4]; 20] = [
        [144.6, 1.421e-4, 1.431e-4, 144.6],
        [15.84, 1.555e-5, 1.563e-5, 15.84],
        [143.9, 1.414e-4, 1.416e-4, 144.0],
        [15.79, 1.551e-5, 1.557e-5, 15.79],
        [141.3, 1.382e-4, 1.379e-4, 141.3],
        [15.52, 1.525e-5, 1.52e-5, 15.53],
        [142.5, 1.404e-4, 1.412e-4, 142.5],
        [15.59, 1.534e-5, 1.539e-5, 15.59],
        [187.8, 2.763e-4, 1.027e-4, 187.8],
        [20.61, 1.126e-4, 6.467e-5, 20.62],
        [160.7, 160.7, 1.185e-3, 1.179e-7],
        [16.1, 16.1, 7.54e-5, 7.476e-8],
        [161.6, 161.6, 1.122e-4, 1.086e-7],
        [16.13, 16.13, 6.834e-5, 6.782e-8],
        [161.6, 161.6, 9.724e-4, 9.51e-9],
        [16.16, 16.16, 7.499e-5, 7.391e-9],
        [159.7, 159.7, 8.903e-5, 8.87e-9],
        [15.96, 15.96, 5.192e-5, 5.076e-9],
        [118.9, 118.9, 1.38e-4, 1.34e-8],
        [13.48, 13.48, 6.491e-4, 7.293e-8],
    ];

    #[test]
    fn grid_order_and_size() {
        let g = grid_params(0, 0.0);
        assert_eq!(g.len(), 5400);
        assert_eq!(g[0].compensation, 0.2);
        assert_eq!(g[0].fault_type, FaultType::AG);
        assert_eq!(g[11].fault_type, FaultType::NoFault);
        assert_eq!(g[12].fault_resistance, 0.02);
        assert_eq!(g[120].wind_speed, 7.0);
        assert_eq!(g[600].compensation, 0.25);
        assert_eq!(g[5399].compensation, 0.6);
        assert_eq!(g[5399].fault_resistance, 0.1);
    }

    #[test]
    fn normalizer_fits_the_tables() {
        let feats: Vec<FeatureVector> = TABLE_ROWS.iter().map(|r| FeatureVector(*r)).collect();
        let n = Normalizer::fit(&feats).unwrap();
        let expected_mean = [1.69244223, -1.26538574, -4.02553136, -2.93521826];
        let expected_std = [0.48948908, 2.99246936, 0.53367419, 4.66147194];
        for i in 0..4 {
            assert!((n.mean[i] - expected_mean[i]).abs() < 1e-7);
            assert!((n.std[i] - expected_std[i]).abs() < 1e-7);
        }
        let worst = feats
            .iter()
            .flat_map(|f| n.apply(f))
            .fold(0.0f64, |a, z| a.max(z.abs()));
        assert!((worst - 2.059776791708121).abs() < 1e-9, "{worst}");
        assert!(worst <= 4.0);
    }

    #[test]
    fn normalizer_maps_log_mean_to_zero() {
        let feats = vec![
            FeatureVector([1.0, 10.0, 0.1, 5.0]),
            FeatureVector([100.0, 1000.0, 10.0, 7.0]),
        ];
        let n = Normalizer::fit(&feats).unwrap();
        let at_mean = FeatureVector(n.mean.map(|m| 10f64.powf(m) - NORMALIZER_EPSILON));
        for z in n.apply(&at_mean) {
            assert!(z.abs() < 1e-9);
        }
    }

    #[test]
    fn normalizer_errors() {
        assert!(matches!(Normalizer::fit(&[]), Err(Error::EmptyDataset)));
        let same = vec![FeatureVector([1.0, 2.0, 3.0, 4.0]); 3];
        assert!(matches!(
            Normalizer::fit(&same),
            Err(Error::DegenerateFeature { index: 0 })
        ));
        let neg = vec![
            FeatureVector([-1.0, 2.0, 3.0, 4.0]),
            FeatureVector([1.0, 3.0, 4.0, 5.0]),
        ];
        assert!(Normalizer::fit(&neg).is_err());
    }

    #[test]
    fn stratified_split_arithmetic() {
        let keys: Vec<FaultType> = grid_params(0, 0.0).iter().map(|p| p.fault_type).collect();
        let (tr, ho) = stratified_indices(&keys, 0.2, 7).unwrap();
        assert_eq!(ho.len(), 1080);
        assert_eq!(tr.len(), 4320);
        for ft in FaultType::ALL {
            assert_eq!(ho.iter().filter(|&&i| keys[i] == ft).count(), 90);
        }
        let mut all: Vec<usize> = tr.iter().chain(&ho).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..5400).collect::<Vec<_>>());
        assert_eq!(stratified_indices(&keys, 0.2, 7).unwrap(), (tr, ho));
        assert!(matches!(
            stratified_indices(&keys, 1.0, 0),
            Err(Error::FractionOutOfRange(_))
        ));
        assert!(stratified_indices(&keys, 0.0, 0).is_err());
    }

    #[test]
    fn samples_are_labeled_by_class() {
        let g = grid_params(3, 0.0);
        let s = labeled_sample(&g[0], &SurrogateModel::default()).unwrap();
        assert_eq!(s.target.code_string(), "1001");
        let s = labeled_sample(&g[11], &SurrogateModel::default()).unwrap();
        assert!(s.target.is_none());
        assert!(separation_ratio(&s).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let g = grid_params(1, 0.0);
        let samples: Vec<_> = g[..24]
            .iter()
            .map(|p| labeled_sample(p, &SurrogateModel::default()).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_dataset_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("K,R,Vw,fault_type,m,n,p,q,bitA,bitB,bitC,bitG\n20,0.01,6,AG,"));
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in back.iter().zip(&samples) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.target, b.target);
            assert_eq!(a.params.compensation, b.params.compensation);
            assert_eq!(a.params.fault_resistance, b.params.fault_resistance);
            assert_eq!(a.params.wind_speed, b.params.wind_speed);
        }
    }

    #[test]
    fn csv_rejects_inconsistent_bits() {
        let text = "K,R,Vw,fault_type,m,n,p,q,bitA,bitB,bitC,bitG\n20,0.01,6,AG,1,1,1,1,1,1,0,1\n";
        let err = read_dataset_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde_json::json;

use faultnet::ann::{layer_chain, Network, TrainConfig, TrainHistory};
use faultnet::calibrate::calibrate_amplitude_law;
use faultnet::dataset::{
    generate_grid_with, load_dataset_csv, save_dataset_csv, split, train_classifier, Init,
    LabeledSample,
};
use faultnet::detector::{Detector, DetectorConfig, WindowRecord};
use faultnet::eval::{evaluate, Evaluation};
use faultnet::signal::{snap_rate, SignalReader};
use faultnet::sweep::{sweep, write_sweep_csv};
use faultnet::synth::{sssl, synthesize, BASE_FREQUENCY_HZ, DEFAULT_DURATION_S};
use faultnet::wavelet::extract_features;
use faultnet::{label_name, Error, Exec, FaultType, ScenarioParams, SignalSet, SurrogateModel};

use crate::manifest::{sibling, RunManifest};
use crate::{
    CalibrateArgs, Command, DatasetArgs, DetectArgs, EvalArgs, FeaturesArgs, InitArg, ReplayArgs,
    ScenarioArgs, SsslArgs, SweepArgs, SynthArgs, TrainArgs,
};

pub fn run(cmd: &Command, exec: Exec) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(cmd, a),
        Command::Features(a) => features(cmd, a),
        Command::Dataset(a) => dataset(cmd, a, exec),
        Command::Train(a) => train(cmd, a, exec),
        Command::Eval(a) => eval(cmd, a, exec),
        Command::Detect(a) => detect(cmd, a),
        Command::Sweep(a) => sweep_cmd(cmd, a, exec),
        Command::Sssl(a) => sssl_cmd(a),
        Command::Calibrate(a) => calibrate(cmd, a),
        Command::Replay(a) => replay(a, exec),
    }
}

/// Library field name to the flag that sets it.
fn flag_for(field: &str) -> &str {
    match field {
        "compensation" => "--k",
        "fault_resistance" => "--r",
        "wind_speed" => "--vw",
        "fault_on" => "--fault-on",
        "fault_off" => "--fault-off",
        "sample_rate" | "base_frequency" => "--rate",
        "duration" => "--duration",
        "jitter" => "--jitter",
        "window" => "--window",
        "hop" => "--hop",
        "debounce" => "--debounce",
        "threshold" => "--threshold",
        "values" => "--values",
        other => other,
    }
}

fn flag_error(e: Error) -> anyhow::Error {
    match &e {
        Error::InvalidParameter { field, reason } => {
            anyhow!("invalid {}: {reason}", flag_for(field))
        }
        Error::CompensationOutOfRange(_) => anyhow!("invalid --k: {e}"),
        _ => e.into(),
    }
}

fn percent_to_fraction(k: f64) -> Result<f64> {
    ensure!(
        k > 0.0 && k < 100.0,
        "invalid --k: {k} must lie strictly between 0 and 100 percent"
    );
    Ok(k / 100.0)
}

impl ScenarioArgs {
    pub fn params(&self) -> Result<ScenarioParams> {
        let duration = self
            .duration
            .unwrap_or_else(|| DEFAULT_DURATION_S.max(self.fault_off + 0.15));
        let p = ScenarioParams {
            compensation: percent_to_fraction(self.k)?,
            fault_resistance: self.r,
            wind_speed: self.vw,
            fault_type: self.fault,
            fault_on: self.fault_on,
            fault_off: self.fault_off,
            sample_rate: self.rate,
            duration,
            rng_seed: self.seed,
            jitter: self.jitter,
            ..Default::default()
        };
        p.validate().map_err(flag_error)?;
        Ok(p)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn synth(cmd: &Command, a: &SynthArgs) -> Result<()> {
    let params = a.scenario.params()?;
    let signals = synthesize(&params).map_err(flag_error)?;
    signals.save_csv(&a.out)?;
    RunManifest::new(cmd)
        .resolved(&params)?
        .seed("scenario", params.rng_seed)
        .output(&a.out)
        .write_beside(&a.out)?;
    eprintln!(
        "wrote {} ({} samples at {} Hz)",
        a.out.display(),
        signals.len(),
        signals.sample_rate
    );
    Ok(())
}

fn features(cmd: &Command, a: &FeaturesArgs) -> Result<()> {
    let signals = SignalSet::load_csv(&a.input)?;
    let window = signals.index_at(a.fault_on)..signals.index_at(a.fault_off);
    ensure!(
        window.start < window.end,
        "--fault-on {} / --fault-off {} select no samples of {} (t = {}..{})",
        a.fault_on,
        a.fault_off,
        a.input.display(),
        signals.start_time,
        signals.time(signals.len() - 1)
    );
    let f = extract_features(&signals, window.clone())?;
    let text = format!("m,n,p,q\n{},{},{},{}\n", f.m(), f.n(), f.p(), f.q());
    print!("{text}");
    if let Some(out) = &a.out {
        std::fs::write(out, &text).with_context(|| format!("cannot write {}", out.display()))?;
        RunManifest::new(cmd)
            .resolved(&json!({ "window_samples": [window.start, window.end], "sample_rate": signals.sample_rate }))?
            .input(&a.input)
            .output(out)
            .write_beside(out)?;
    }
    Ok(())
}

fn dataset(cmd: &Command, a: &DatasetArgs, exec: Exec) -> Result<()> {
    let model = SurrogateModel::default();
    let grid = generate_grid_with(a.seed, a.jitter, &model, exec).map_err(flag_error)?;
    save_dataset_csv(&grid, &a.out)?;
    RunManifest::new(cmd)
        .resolved(&json!({ "surrogate": model, "jitter": a.jitter, "rows": grid.len() }))?
        .seed("grid", a.seed)
        .output(&a.out)
        .write_beside(&a.out)?;
    eprintln!("wrote {} ({} rows)", a.out.display(), grid.len());
    Ok(())
}

/// Rows a (train, holdout) pair built the same way by `train` and `eval`.
fn split_rows(
    samples: Vec<LabeledSample>,
    holdout: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    ensure!(
        (0.0..1.0).contains(&holdout),
        "invalid --holdout: {holdout} must lie in [0, 1)"
    );
    if holdout == 0.0 {
        return Ok((samples, Vec::new()));
    }
    Ok(split(&samples, holdout, seed)?)
}

fn write_history(path: &Path, hist: &TrainHistory) -> Result<()> {
    let mut w = create(path)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    writeln!(w, "epoch,train_mse,validation_mse,lambda,rejections")?;
    writeln!(
        w,
        "0,{},{},,",
        hist.initial_mse,
        opt(hist.initial_validation_mse)
    )?;
    for e in &hist.epochs {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.epoch,
            e.train_mse,
            opt(e.validation_mse),
            e.lambda,
            e.rejections
        )?;
    }
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))
}

fn train(cmd: &Command, a: &TrainArgs, exec: Exec) -> Result<()> {
    ensure!(
        a.mse_goal > 0.0,
        "invalid --mse-goal: {} must be positive",
        a.mse_goal
    );
    ensure!(
        (0.0..1.0).contains(&a.validation),
        "invalid --validation: {} must lie in [0, 1)",
        a.validation
    );
    let samples = load_dataset_csv(&a.data)?;
    let (rows, held) = split_rows(samples, a.holdout, a.seed)?;
    let cfg = TrainConfig {
        mse_goal: a.mse_goal,
        max_epochs: a.max_epochs,
        validation_fraction: a.validation,
        rng_seed: a.seed,
        exec,
        ..Default::default()
    };
    let specs = layer_chain(4, &a.hidden.widths(), 4);
    let init = match a.init {
        InitArg::Random => Init::Random,
        InitArg::Zero => Init::Zero,
    };
    let (net, hist) = train_classifier(&rows, specs, init, &cfg)?;
    net.save(&a.out)?;
    let history = sibling(&a.out, "history.csv");
    write_history(&history, &hist)?;
    RunManifest::new(cmd)
        .resolved(&json!({
            "config": cfg,
            "hidden": a.hidden.widths(),
            "init": a.init,
            "holdout": a.holdout,
            "train_rows": rows.len(),
            "holdout_rows": held.len(),
        }))?
        .seed("init_and_split", a.seed)
        .input(&a.data)
        .output(&a.out)
        .output(&history)
        .write_beside(&a.out)?;
    println!("epochs {}", hist.epochs.len());
    println!("stop {:?}", hist.stop);
    println!("initial_mse {}", hist.initial_mse);
    println!("final_mse {}", hist.final_train_mse());
    println!("best_epoch {}", hist.best_epoch);
    eprintln!("wrote {} and {}", a.out.display(), history.display());
    Ok(())
}

fn print_evaluation(ev: &Evaluation) {
    let cols: Vec<String> = FaultType::ALL
        .iter()
        .map(|f| f.token().to_string())
        .chain(["?".to_string()])
        .collect();
    println!("confusion (rows: true class, columns: predicted; ? = unassigned code)");
    print!("{:>6}", "");
    for c in &cols {
        print!("{c:>6}");
    }
    println!();
    for ft in FaultType::ALL {
        print!("{:>6}", ft.token());
        for n in ev.confusion[ft.index()] {
            print!("{n:>6}");
        }
        println!();
    }
    println!();
    println!(
        "{:>10} {:>8} {:>10} {:>10}",
        "class", "support", "precision", "recall"
    );
    for c in &ev.classes {
        println!(
            "{:>10} {:>8} {:>10.4} {:>10.4}",
            c.class, c.support, c.precision, c.recall
        );
    }
    println!();
    if let Some((stratum, acc)) = ev.worst_stratum() {
        println!("worst stratum {stratum}: {:.4}", acc);
    }
    println!(
        "accuracy {}/{} = {:.4}",
        ev.overall.correct,
        ev.overall.total,
        ev.overall.accuracy()
    );
}

fn eval(cmd: &Command, a: &EvalArgs, exec: Exec) -> Result<()> {
    ensure!(
        a.threshold > 0.0 && a.threshold < 1.0,
        "invalid --threshold: {} must lie in (0, 1)",
        a.threshold
    );
    let net = Network::load(&a.model)?;
    let samples = load_dataset_csv(&a.data)?;
    let (rows, held) = split_rows(samples, a.holdout, a.seed)?;
    let subset = if a.holdout > 0.0 { held } else { rows };
    let ev = evaluate(&net, &subset, a.threshold, exec)?;
    print_evaluation(&ev);
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        serde_json::to_writer_pretty(&mut w, &ev)?;
        writeln!(w)?;
        w.flush()?;
        RunManifest::new(cmd)
            .resolved(
                &json!({ "threshold": a.threshold, "holdout": a.holdout, "rows": subset.len() }),
            )?
            .seed("split", a.seed)
            .input(&a.data)
            .input(&a.model)
            .output(out)
            .write_beside(out)?;
    }
    Ok(())
}

fn window_line(w: &WindowRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        w.start_sample,
        w.time,
        w.outputs[0],
        w.outputs[1],
        w.outputs[2],
        w.outputs[3],
        w.label.code_string(),
        label_name(w.label)
    )
}

fn detect(cmd: &Command, a: &DetectArgs) -> Result<()> {
    let net = Network::load(&a.model)?;
    let name = a.input.display().to_string();
    let reader: Box<dyn BufRead> = if a.input.as_os_str() == "-" {
        Box::new(io::stdin().lock())
    } else {
        let f = File::open(&a.input).with_context(|| format!("cannot open {name}"))?;
        Box::new(BufReader::new(f))
    };
    let mut rows = SignalReader::new(reader).with_context(|| format!("reading {name}"))?;
    let mut next_row = || {
        rows.next()
            .transpose()
            .with_context(|| format!("reading {name}"))
    };
    let first = next_row()?.ok_or_else(|| anyhow!("{name}: no samples"))?;
    let mut second = None;
    let rate = match a.rate {
        Some(r) => {
            ensure!(
                r > 0.0 && r.is_finite(),
                "invalid --rate: {r} must be positive"
            );
            r
        }
        None => {
            let s = next_row()?.ok_or_else(|| {
                anyhow!("{name}: need two samples to infer the rate; pass --rate")
            })?;
            let dt = s.t - first.t;
            ensure!(dt > 0.0, "{name}: time column must increase");
            second = Some(s);
            snap_rate(1.0 / dt)
        }
    };
    let base = DetectorConfig::for_rate(rate, BASE_FREQUENCY_HZ);
    let window = a.window.unwrap_or(base.window_samples);
    let cfg = DetectorConfig {
        window_samples: window,
        hop_samples: a.hop.unwrap_or((window / 2).max(1)),
        debounce_windows: a.debounce.unwrap_or(base.debounce_windows),
        threshold: a.threshold.unwrap_or(base.threshold),
    };
    let mut det = Detector::new(&net, cfg, rate, first.t).map_err(flag_error)?;

    let mut windows = match &a.emit_windows {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "start_sample,time,oA,oB,oC,oG,code,name")?;
            Some(w)
        }
        None => None,
    };
    let mut event_lines = Vec::new();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "onset_s,clear_s,code,name")?;
    let mut push =
        |det: &mut Detector, currents: [f64; 4], out: &mut io::StdoutLock| -> Result<()> {
            if let Some(rec) = det.push(currents)? {
                if let Some(w) = windows.as_mut() {
                    writeln!(w, "{}", window_line(&rec))?;
                }
            }
            for ev in det.drain_closed() {
                let line = ev.record_line();
                writeln!(out, "{line}")?;
                out.flush()?;
                event_lines.push(line);
            }
            Ok(())
        };
    push(&mut det, first.currents, &mut out)?;
    if let Some(s) = second {
        push(&mut det, s.currents, &mut out)?;
    }
    while let Some(row) = next_row()? {
        push(&mut det, row.currents, &mut out)?;
    }
    let report = det.finish();
    for ev in &report.events {
        let line = ev.record_line();
        writeln!(out, "{line}")?;
        event_lines.push(line);
    }
    out.flush()?;
    if let (Some(w), Some(p)) = (windows.as_mut(), &a.emit_windows) {
        w.flush()
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    eprintln!(
        "{} samples, {} windows, {} events",
        report.samples_seen,
        report.windows_evaluated,
        event_lines.len()
    );
    if let Some(p) = &a.out {
        let mut w = create(p)?;
        writeln!(w, "onset_s,clear_s,code,name")?;
        for l in &event_lines {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
        let mut m = RunManifest::new(cmd)
            .resolved(&json!({ "detector": cfg, "sample_rate": rate, "start_time": first.t, "underrun": report.underrun }))?
            .input(&a.input)
            .input(&a.model)
            .output(p);
        if let Some(wp) = &a.emit_windows {
            m = m.output(wp);
        }
        m.write_beside(p)?;
    }
    Ok(())
}

fn sweep_cmd(cmd: &Command, a: &SweepArgs, exec: Exec) -> Result<()> {
    let base = a.scenario.params()?;
    let rows = sweep(
        a.axis,
        &base,
        a.values.as_deref(),
        &SurrogateModel::default(),
        exec,
    )
    .map_err(|e| {
        match e {
            // the swept flag's own range check names the axis
            Error::InvalidParameter { .. } | Error::CompensationOutOfRange(_) => {
                anyhow!("--values for axis {}: {}", a.axis, flag_error(e))
            }
            other => other.into(),
        }
    })?;
    let w = create(&a.out)?;
    write_sweep_csv(a.axis, &rows, w)?;
    RunManifest::new(cmd)
        .resolved(&json!({ "axis": a.axis, "base": base, "values": rows.iter().map(|r| r.value).collect::<Vec<_>>() }))?
        .seed("scenario", base.rng_seed)
        .output(&a.out)
        .write_beside(&a.out)?;
    eprintln!("wrote {} ({} rows)", a.out.display(), rows.len());
    Ok(())
}

fn sssl_cmd(a: &SsslArgs) -> Result<()> {
    ensure!(
        a.k >= 0.0 && a.k < 100.0,
        "invalid --k: {} must lie in [0, 100) percent",
        a.k
    );
    let mw = sssl(a.v1, a.v2, a.xl, a.k / 100.0).map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => anyhow!("invalid --xl: {reason}"),
        other => other.into(),
    })?;
    println!("{mw} MW");
    Ok(())
}

fn calibrate(cmd: &Command, a: &CalibrateArgs) -> Result<()> {
    let report = calibrate_amplitude_law()?;
    let m = &report.model;
    println!("fault_scale {}", m.fault_scale);
    println!("fault_r0 {}", m.fault_r0);
    println!("phase_fault_gain {}", m.phase_fault_gain);
    for p in &report.points {
        println!(
            "{}: target {} achieved {} (relative residual {:e})",
            p.name, p.target, p.achieved, p.relative_residual
        );
    }
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
        RunManifest::new(cmd).output(out).write_beside(out)?;
    }
    Ok(())
}

fn replay(a: &ReplayArgs, exec: Exec) -> Result<()> {
    let manifest = RunManifest::load(&a.manifest)?;
    if manifest.version != crate::manifest::VERSION {
        log::warn!(
            "{} was written by version {}; running {}",
            a.manifest.display(),
            manifest.version,
            crate::manifest::VERSION
        );
    }
    let mut inv = manifest.invocation;
    if matches!(inv, Command::Replay(_)) {
        bail!(
            "{}: a replay manifest cannot be replayed",
            a.manifest.display()
        );
    }
    if let Some(out) = &a.out {
        if !inv.set_out(out.clone()) {
            bail!("--out: `{}` has no output to redirect", inv.name());
        }
    }
    run(&inv, exec)
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mvts_core::codec::{self, NumericSeries};
use mvts_core::forecaster::{
    evaluate_predictor, evaluate_vision, predict, quantization_floor, sweep, sweep_csv, train, Checkpoint,
    EvalReport, SweepMode,
};
use mvts_core::pipeline::{load_csv, make_windows, split_dataset, CsvSchema};
use mvts_core::sme::{
    check_convergence, monte_carlo_sme, reproduce_table1, solve_optimal_ms, sme_upper_bound, table1_csv,
    BoundQuery, MonteCarloReport,
};
use mvts_core::synthetic::{gaussian_noise, noisy_sine, series_csv};
use mvts_core::{CodecParams, Persistence, Predictor, ReferenceNet, WindowPair};

use crate::config::{MsSetting, PredictorKind, Resolved, RunConfig};
use crate::output::{self, args_digest, hex, target, write_bytes, write_csv};
use crate::{CliError, Command, ConfigArgs, OutputArgs, SpaceArg, SweepModeArg, SynthKind, Vary};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Encode {
            input,
            h,
            ms,
            timestamp,
            out,
        } => encode(&input, h, ms, timestamp, &out),
        Command::Decode { input, h, ms, out } => decode(&input, h, ms, &out),
        Command::Render { input, channel, out } => render(&input, channel, &out),
        Command::SolveMs { h, tol } => {
            println!("{:.6}", solve_optimal_ms(h, tol)?);
            Ok(())
        }
        Command::Bound { h, ms, channels, steps } => {
            let mut q = BoundQuery::new(h, ms.resolve(h)?)?;
            if let (Some(c), Some(t)) = (channels, steps) {
                q = q.whole_series(c, t);
            }
            println!("{:.6}", sme_upper_bound(&q));
            Ok(())
        }
        Command::Table1 { out } => {
            let csv = table1_csv(&reproduce_table1()?);
            emit_csv(&out, "table1.csv", args_digest("table1", &[]), &csv)
        }
        Command::VerifySme {
            h,
            ms,
            n,
            seed,
            channels,
            steps,
            out,
        } => verify_sme(h, ms, n, seed, channels, steps, &out),
        Command::CheckConvergence { ms, h, out } => {
            let report = check_convergence(ms, &h)?;
            let digest = args_digest("check-convergence", &[("ms", format!("{ms}")), ("h", format!("{h:?}"))]);
            emit_csv(&out, "convergence.csv", digest, &report.to_csv())?;
            println!("limit,{:.6e}", report.limit);
            println!("strictly_decreasing,{}", report.strictly_decreasing);
            Ok(())
        }
        Command::Train { cfg } => train_cmd(&cfg),
        Command::Predict {
            cfg,
            checkpoint,
            input,
            output,
        } => predict_cmd(&cfg, checkpoint.as_deref(), input.as_deref(), output.as_deref()),
        Command::Eval { cfg, checkpoint, space } => eval_cmd(&cfg, checkpoint.as_deref(), space),
        Command::Sweep {
            cfg,
            vary,
            values,
            mode,
            output,
        } => sweep_cmd(&cfg, vary, &values, mode, output.as_deref()),
        Command::Synth {
            kind,
            steps,
            channels,
            period,
            noise,
            seed,
            output,
        } => {
            let (series, args) = match kind {
                SynthKind::Sine => (
                    noisy_sine(steps, period, noise, seed),
                    vec![("period", format!("{period}")), ("noise", format!("{noise}"))],
                ),
                SynthKind::Gaussian => (gaussian_noise(channels, steps, seed), vec![("channels", channels.to_string())]),
            };
            let mut args = args;
            args.extend([("kind", format!("{kind:?}")), ("steps", steps.to_string()), ("seed", seed.to_string())]);
            write_csv(&output, &args_digest("synth", &args), &series_csv(&series))
        }
    }
}

fn out_dir(out: &OutputArgs) -> PathBuf {
    output::output_dir(out.output_dir.as_deref(), None)
}

/// Writes a CSV to its target and echoes it on stdout.
fn emit_csv(out: &OutputArgs, name: &str, digest: [u8; 32], csv: &str) -> Result<()> {
    let path = target(out.output.as_deref(), &out_dir(out), name);
    write_csv(&path, &digest, csv)?;
    print!("{csv}");
    Ok(())
}

fn codec_params(h: usize, ms: MsSetting) -> Result<CodecParams> {
    Ok(CodecParams::new(h, ms.resolve(h)?)?)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn encode(input: &Path, h: usize, ms: MsSetting, timestamp: Option<bool>, out: &OutputArgs) -> Result<()> {
    let params = codec_params(h, ms)?;
    let schema = CsvSchema {
        timestamp,
        value_columns: None,
    };
    let data = load_csv(input, &schema)?;
    let tensor = codec::encode(data.series(), &params);
    let path = target(out.output.as_deref(), &out_dir(out), "series.mvts");
    write_bytes(&path, &codec::serialize(&tensor))?;
    let (c, h, t) = tensor.shape();
    println!("{} c={c} h={h} t={t} ms={:.6}", path.display(), params.ms());
    Ok(())
}

fn decode(input: &Path, h: usize, ms: MsSetting, out: &OutputArgs) -> Result<()> {
    let params = codec_params(h, ms)?;
    let bytes = read(input)?;
    let tensor = codec::deserialize(&bytes)?;
    let series = codec::decode(&tensor, &params)?;
    let digest = args_digest(
        "decode",
        &[("input", hex(&output::digest_bytes(&bytes))), ("h", h.to_string()), ("ms", format!("{}", params.ms()))],
    );
    let path = target(out.output.as_deref(), &out_dir(out), "decoded.csv");
    write_csv(&path, &digest, &series_csv(&series))?;
    println!("{} c={} t={}", path.display(), series.channels(), series.steps());
    Ok(())
}

fn render(input: &Path, channel: usize, out: &OutputArgs) -> Result<()> {
    let bytes = read(input)?;
    let tensor = codec::deserialize(&bytes)?;
    let pbm = codec::render_bitmap(&tensor, channel)?;
    let digest = args_digest(
        "render",
        &[("input", hex(&output::digest_bytes(&bytes))), ("channel", channel.to_string())],
    );
    let path = target(out.output.as_deref(), &out_dir(out), "series.pbm");
    write_bytes(&path, output::stamp_pbm(&pbm, &digest).as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn verify_sme(h: usize, ms: MsSetting, n: usize, seed: u64, c: usize, t: usize, out: &OutputArgs) -> Result<()> {
    let params = codec_params(h, ms)?;
    let report = monte_carlo_sme(&params, c, t, n, seed)?;
    let csv = format!("{}\n{}\n", MonteCarloReport::CSV_HEADER, report.csv_row());
    let digest = args_digest(
        "verify-sme",
        &[
            ("h", h.to_string()),
            ("ms", format!("{}", params.ms())),
            ("n", n.to_string()),
            ("seed", seed.to_string()),
            ("c", c.to_string()),
            ("t", t.to_string()),
        ],
    );
    emit_csv(out, "verify_sme.csv", digest, &csv)?;
    if report.within_bound() {
        Ok(())
    } else {
        Err(CliError::numeric(format!(
            "empirical error {:.6} - 3 x {:.6} exceeds the bound {:.6}",
            report.mean, report.std_error, report.bound
        )))
    }
}

/// A validated config with its dataset split into windows.
struct Run {
    r: Resolved,
    dir: PathBuf,
    train: Vec<WindowPair>,
    test: Vec<WindowPair>,
}

fn resolve(args: &ConfigArgs) -> Result<Resolved> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply(&args.overrides);
    // a --data flag is relative to the working directory, not the config file
    if let Some(data) = &args.overrides.data {
        let cwd = std::env::current_dir().map_err(|e| CliError::io(Path::new("."), e))?;
        config.data.path = cwd.join(data);
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    config.resolve(base)
}

fn prepare(args: &ConfigArgs) -> Result<Run> {
    let r = resolve(args)?;
    let mut data = load_csv(&r.data_path, &r.schema())?;
    let ranges = split_dataset(data.steps(), r.ratios, &r.spec)?;
    if r.config.data.global_zscore {
        data = data.standardized(ranges.train.clone())?;
    }
    let ci = r.config.data.channel_independent;
    let train = make_windows(&data, &r.spec, ranges.train, ci)?.collect();
    let test = make_windows(&data, &r.spec, ranges.test, ci)?.collect();
    let dir = output::output_dir(None, r.config.output_dir.as_deref());
    Ok(Run { r, dir, train, test })
}

fn train_cmd(args: &ConfigArgs) -> Result<()> {
    let run = prepare(args)?;
    let r = &run.r;
    if r.config.predictor.kind != PredictorKind::Reference {
        return Err(CliError::validation("only the reference predictor is trainable"));
    }
    let outcome = train(&run.train, &r.net, &r.params)?;
    let ck = Checkpoint {
        digest: r.digest,
        net: outcome.net,
    };
    write_bytes(&run.dir.join("checkpoint.mvck"), &ck.to_bytes())?;
    let mut curve = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_curve.iter().enumerate() {
        writeln!(curve, "{e},{l:.6}").unwrap();
    }
    write_csv(&run.dir.join("loss_curve.csv"), &r.digest, &curve)?;
    let (first, last) = (outcome.loss_curve[0], *outcome.loss_curve.last().unwrap());
    println!("h={} ms={:.6} windows={}", r.params.h(), r.params.ms(), run.train.len());
    println!("loss first={first:.6} last={last:.6}");
    println!("config_digest={}", hex(&r.digest));
    Ok(())
}

fn load_checkpoint(r: &Resolved, path: &Path) -> Result<ReferenceNet> {
    let ck = Checkpoint::from_bytes(&read(path)?)?;
    let s = ck.net.shape();
    if (s.height, s.lookback, s.horizon) != (r.params.h(), r.spec.lookback(), r.spec.horizon()) {
        return Err(CliError::validation(format!(
            "checkpoint has h={}, lookback={}, horizon={}; config has h={}, lookback={}, horizon={}",
            s.height,
            s.lookback,
            s.horizon,
            r.params.h(),
            r.spec.lookback(),
            r.spec.horizon()
        )));
    }
    if ck.digest != r.digest {
        eprintln!("note: checkpoint was trained under config digest {}", hex(&ck.digest));
    }
    Ok(ck.net)
}

fn predictor(r: &Resolved, checkpoint: Option<&Path>) -> Result<Box<dyn Predictor>> {
    match (r.config.predictor.kind, checkpoint) {
        (PredictorKind::Persistence, _) => Ok(Box::new(Persistence::new(r.spec.horizon())?)),
        (PredictorKind::Reference, Some(path)) => Ok(Box::new(load_checkpoint(r, path)?)),
        (PredictorKind::Reference, None) => Err(CliError::validation(
            "the reference predictor needs --checkpoint",
        )),
    }
}

fn predict_cmd(args: &ConfigArgs, checkpoint: Option<&Path>, input: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let r = resolve(args)?;
    let model = predictor(&r, checkpoint)?;
    let schema = match input {
        Some(_) => CsvSchema::default(),
        None => r.schema(),
    };
    let data = load_csv(input.unwrap_or(&r.data_path), &schema)?;
    let lookback = r.spec.lookback();
    if data.steps() < lookback {
        return Err(CliError::validation(format!(
            "input has {} rows, the lookback is {lookback}",
            data.steps()
        )));
    }
    let s = data.series();
    let values = (0..s.channels())
        .flat_map(|i| s.channel(i)[s.steps() - lookback..].iter().copied())
        .collect();
    let mut window = NumericSeries::new(s.channels(), lookback, values)?;
    if let Some(names) = s.names() {
        window = window.with_names(names.to_vec())?;
    }
    let forecast = predict(model.as_ref(), &window, lookback, &r.params, r.decode())?;
    let mut values = forecast.values;
    if let Some(names) = s.names() {
        values = values.with_names(names.to_vec())?;
    }
    let dir = output::output_dir(None, r.config.output_dir.as_deref());
    let path = target(output, &dir, "forecast.csv");
    write_csv(&path, &r.digest, &series_csv(&values))?;
    println!("{}", path.display());
    Ok(())
}

fn vision_report(model: &dyn Predictor, pairs: &[WindowPair], params: &CodecParams) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for p in pairs {
        predictions.push(model.forward(&codec::encode(&p.x, params))?);
        targets.push(codec::encode(&p.y, params));
    }
    Ok(evaluate_vision(&predictions, &targets)?)
}

fn eval_cmd(args: &ConfigArgs, checkpoint: Option<&Path>, space: SpaceArg) -> Result<()> {
    let run = prepare(args)?;
    let r = &run.r;
    let model = predictor(r, checkpoint)?;
    let baseline = Persistence::new(r.spec.horizon())?;
    let reports = match space {
        SpaceArg::S => vec![
            ("eval.csv", "model", evaluate_predictor(model.as_ref(), &run.test, &r.params, r.decode())?),
            ("eval_persistence.csv", "persistence", evaluate_predictor(&baseline, &run.test, &r.params, r.decode())?),
            ("eval_floor.csv", "floor", quantization_floor(&run.test, &r.params)?),
        ],
        SpaceArg::V => vec![
            ("eval_v.csv", "model", vision_report(model.as_ref(), &run.test, &r.params)?),
            ("eval_v_persistence.csv", "persistence", vision_report(&baseline, &run.test, &r.params)?),
        ],
    };
    for (file, label, report) in &reports {
        write_csv(&run.dir.join(file), &r.digest, &report.to_csv())?;
        println!("{label} mse={:.6} mae={:.6} windows={}", report.mse, report.mae, report.windows);
    }
    Ok(())
}

fn sweep_cmd(args: &ConfigArgs, vary: Vary, values: &[f64], mode: SweepModeArg, output: Option<&Path>) -> Result<()> {
    let run = prepare(args)?;
    let r = &run.r;
    let grid = values
        .iter()
        .map(|&v| match vary {
            Vary::Ms => Ok(CodecParams::new(r.params.h(), v)?),
            Vary::H => {
                if v.fract() != 0.0 || v < 2.0 {
                    return Err(CliError::validation(format!("h must be an integer >= 2, got {v}")));
                }
                let h = v as usize;
                codec_params(h, r.config.codec.ms)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mode = match mode {
        SweepModeArg::Codec => SweepMode::CodecOnly,
        SweepModeArg::Persistence => SweepMode::Persistence,
        SweepModeArg::Reference => SweepMode::Reference(r.net.clone()),
    };
    let rows = sweep(&run.train, &run.test, &grid, &mode, r.decode())?;
    let path = target(output, &run.dir, "sweep.csv");
    write_csv(&path, &r.digest, &sweep_csv(&rows))?;
    print!("{}", sweep_csv(&rows));
    let best = rows.iter().min_by(|a, b| a.mae.total_cmp(&b.mae)).expect("non-empty grid");
    println!("argmin ms={:.6} h={} mae={:.6}", best.ms, best.h, best.mae);
    if let Vary::Ms = vary {
        println!("optimal_ms={:.6}", solve_optimal_ms(r.params.h(), mvts_core::sme::DEFAULT_MS_TOLERANCE)?);
    }
    Ok(())
}

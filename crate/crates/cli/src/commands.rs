use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use lidar_weather::classify::{
    model::{read_model, write_model},
    plan_split, ClassifierKind, ClassifierModel, KernelSpec, SvmParams, TrainOptions,
};
use lidar_weather::features::{extract_batch, EigenMode};
use lidar_weather::io::{
    read_feature_table, read_frames, write_feature_table, write_frames, write_points_csv, FeatureRow, FrameFile,
    FrameRecord,
};
use lidar_weather::metrics::{class_metrics, weather_confusion, FprConvention, ObjectDensitySeries};
use lidar_weather::sim::{generate_dataset, SimConfig};
use lidar_weather::{extract_features_with, FeatureConfig, FeatureVector, Frame, RoiBounds, SensorDescriptor, WeatherLabel};

use crate::config::Config;
use crate::{
    ClassifierArg, ClassifyArgs, Cli, Command, DensityArgs, EigenArg, EvaluateArgs, ExtractArgs, FeatureArgs, FprArg,
    GlobalArgs, SensorArg, SynthArgs, TrainArgs,
};

/// Config file values with global flags applied.
struct Settings {
    config: Config,
    seed: u64,
    roi: RoiBounds,
}

impl Settings {
    fn resolve(global: &GlobalArgs) -> Result<Self> {
        let config = match &global.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let roi = RoiBounds::new(
            global.roi_x_max.unwrap_or(config.roi.x_max()),
            global.roi_y_min.unwrap_or(config.roi.y_min()),
            global.roi_y_max.unwrap_or(config.roi.y_max()),
        )?;
        Ok(Self { seed: global.seed.unwrap_or(config.seed), roi, config })
    }

    fn features(&self, args: &FeatureArgs) -> FeatureConfig {
        FeatureConfig {
            roi: self.roi,
            apply_roi: self.config.features.apply_roi && !args.no_roi,
            eigen_mode: match args.eigen {
                Some(EigenArg::Joint) => EigenMode::JointCovariance,
                Some(EigenArg::PerAxis) => EigenMode::PerAxisVariance,
                None => self.config.features.eigen_mode,
            },
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::Synth(a) => synth(&settings, a),
        Command::Extract(a) => extract(&settings, a),
        Command::Train(a) => train(&settings, a),
        Command::Evaluate(a) => evaluate(&settings, a),
        Command::Classify(a) => classify(&settings, a),
        Command::Density(a) => density(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Buffered writer on `path`, or standard output.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_frames(path: &Path) -> Result<FrameFile> {
    read_frames(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_table(path: &Path) -> Result<Vec<FeatureRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_feature_table(file).with_context(|| format!("reading feature table {}", path.display()))
}

fn synth(settings: &Settings, args: SynthArgs) -> Result<()> {
    let scenes_path = args.scenes.as_ref().or(settings.config.synth.scenes.as_ref());
    let mut sim = match scenes_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(sensor) = args.sensor {
        sim.sensor = match sensor {
            SensorArg::ThreeEcho => SensorDescriptor::three_echo(),
            SensorArg::DualReturn => SensorDescriptor::dual_return(),
        };
    }
    if args.print_config {
        print!("{}", sim.to_toml());
        return Ok(());
    }
    let out = args.out.expect("clap requires --out without --print-config");
    let frames = args.frames.unwrap_or(settings.config.synth.frames_per_cell);
    let samples = generate_dataset(&sim.scenes, &sim.profiles, frames, settings.seed, sim.sensor, &sim.channel)?;
    log::info!("simulated {} frames", samples.len());
    let records: Vec<FrameRecord> = samples.into_iter().map(FrameRecord::from).collect();
    write_frames(&out, sim.sensor, &records).with_context(|| format!("writing {}", out.display()))?;
    if let Some(csv) = args.points_csv {
        let frames: Vec<Frame> = records.into_iter().map(|r| r.frame).collect();
        write_points_csv(create(&csv)?, &frames)?;
    }
    Ok(())
}

fn extract(settings: &Settings, args: ExtractArgs) -> Result<()> {
    let data = load_frames(&args.input)?;
    let config = settings.features(&args.features);
    let frames: Vec<Frame> = data.records.iter().map(|r| r.frame.clone()).collect();
    let features = extract_batch(&frames, &config);
    let rows = data
        .records
        .iter()
        .zip(features)
        .map(|(r, features)| {
            let truth = r.truth.with_context(|| format!("frame {} has no ground-truth label", r.frame.k))?;
            Ok(FeatureRow { scenario_id: r.scenario_id.clone(), label: truth.label(), features })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = output(args.out.as_deref())?;
    write_feature_table(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn train(settings: &Settings, args: TrainArgs) -> Result<()> {
    let t = &settings.config.train;
    let kind = match args.classifier {
        Some(ClassifierArg::Knn) => ClassifierKind::Knn,
        Some(ClassifierArg::Svm) => ClassifierKind::Svm,
        None => t.classifier.parse().map_err(anyhow::Error::msg)?,
    };
    let options = TrainOptions {
        kind,
        k: args.k.unwrap_or(t.k),
        svm: SvmParams {
            kernel: KernelSpec::Rbf { gamma: args.gamma.or(t.gamma) },
            c: args.c.unwrap_or(t.c),
            ..SvmParams::default()
        },
        append_mask: args.append_mask || t.append_mask,
    };
    let fraction = args.split_fraction.unwrap_or(t.split_fraction);
    ensure!(fraction > 0.0 && fraction <= 1.0, "split fraction must lie in (0, 1], got {fraction}");

    let rows = load_table(&args.table)?;
    ensure!(!rows.is_empty(), "feature table {} is empty", args.table.display());
    let (train_rows, test_rows): (Vec<FeatureRow>, Vec<FeatureRow>) = if fraction < 1.0 {
        let plan = plan_split(rows.iter().map(|r| (r.scenario_id.as_str(), r.label)), fraction)?;
        log::info!("train scenarios {:?}, test scenarios {:?}", plan.train, plan.test);
        rows.into_iter().partition(|r| plan.is_train(&r.scenario_id))
    } else {
        (rows, Vec::new())
    };
    if args.test_out.is_some() && test_rows.is_empty() {
        bail!("--test-out needs a split fraction below 1");
    }
    let features: Vec<&FeatureVector> = train_rows.iter().map(|r| &r.features).collect();
    let labels: Vec<WeatherLabel> = train_rows.iter().map(|r| r.label).collect();
    let model = ClassifierModel::fit(&features, &labels, &options)?;
    write_model(&args.out, &model).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = args.test_out {
        let mut out = create(&path)?;
        write_feature_table(&mut out, &test_rows)?;
        out.flush()?;
    }
    log::info!("trained {kind:?} on {} rows, held out {}", train_rows.len(), test_rows.len());
    Ok(())
}

fn load_model(path: &Path) -> Result<ClassifierModel> {
    read_model(path).with_context(|| format!("reading model {}", path.display()))
}

fn evaluate(settings: &Settings, args: EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let (features, truths): (Vec<FeatureVector>, Vec<WeatherLabel>) = if let Some(table) = &args.table {
        load_table(table)?.into_iter().map(|r| (r.features, r.label)).unzip()
    } else {
        let path = args.input.as_ref().expect("clap requires --table or --input");
        let data = load_frames(path)?;
        let frames: Vec<Frame> = data.records.iter().map(|r| r.frame.clone()).collect();
        let features = extract_batch(&frames, &settings.features(&args.features));
        let truths = data
            .records
            .iter()
            .map(|r| Ok(r.truth.with_context(|| format!("frame {} has no ground-truth label", r.frame.k))?.label()))
            .collect::<Result<Vec<_>>>()?;
        (features, truths)
    };
    ensure!(!truths.is_empty(), "test set is empty");
    let predictions = features.iter().map(|f| model.predict(f)).collect::<Result<Vec<_>, _>>()?;
    let report = class_metrics(&weather_confusion(&predictions, &truths)?);
    let convention = match args.fpr {
        FprArg::OneVsRest => FprConvention::OneVsRest,
        FprArg::MissRate => FprConvention::MissRate,
    };
    print!("{}", report.to_table(convention));
    if let Some(path) = args.report_csv {
        std::fs::write(&path, report.to_csv(convention)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn classify(settings: &Settings, args: ClassifyArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_frames(&args.input)?;
    let config = settings.features(&args.features);
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "frame_index,label,latency_us")?;
    for r in &data.records {
        let start = Instant::now();
        let label = model.predict(&extract_features_with(&r.frame, &config))?;
        let latency = start.elapsed().as_micros();
        writeln!(out, "{},{},{latency}", r.frame.k, label.name())?;
    }
    out.flush()?;
    Ok(())
}

fn condition_name(record: &FrameRecord, fog_bin: f64) -> Option<String> {
    let truth = record.truth?;
    Some(match truth.label() {
        WeatherLabel::Clear => "clear".into(),
        WeatherLabel::Rain => format!("rain_{}", truth.rainfall_rate().unwrap_or(0.0)),
        WeatherLabel::Fog => {
            let v = truth.visibility().unwrap_or(0.0);
            let lo = (v / fog_bin).floor() * fog_bin;
            format!("fog_{}-{}", lo, lo + fog_bin)
        }
    })
}

fn density(args: DensityArgs) -> Result<()> {
    ensure!(args.fog_bin > 0.0, "--fog-bin must be positive");
    let data = load_frames(&args.input)?;
    let scenario = match args.scenario {
        Some(s) => s,
        None => {
            let mut ids: Vec<&str> = data.records.iter().map(|r| r.scenario_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            match ids.as_slice() {
                [only] => only.to_string(),
                [] => bail!("dataset is empty"),
                _ => bail!("dataset holds scenarios {ids:?}; pick one with --scenario"),
            }
        }
    };
    let records: Vec<&FrameRecord> = data.records.iter().filter(|r| r.scenario_id == scenario).collect();
    ensure!(!records.is_empty(), "no frames for scenario '{scenario}'");
    let reference: Vec<&Frame> = records
        .iter()
        .filter(|r| r.truth.is_some_and(|t| t.label() == WeatherLabel::Clear))
        .map(|r| &r.frame)
        .collect();
    ensure!(!reference.is_empty(), "scenario '{scenario}' has no clear frames to normalise against");

    // clear first, then rain and fog groups in name order
    let mut groups: BTreeMap<(u8, String), Vec<&Frame>> = BTreeMap::new();
    for r in &records {
        if let Some(name) = condition_name(r, args.fog_bin) {
            let label = r.truth.map_or(0, |t| t.label().number());
            groups.entry((label, name)).or_default().push(&r.frame);
        }
    }
    let groups: Vec<(String, Vec<&Frame>)> = groups.into_iter().map(|((_, name), frames)| (name, frames)).collect();
    let series = ObjectDensitySeries::build(args.object, &reference, &groups)
        .with_context(|| format!("object {} in the clear frames of '{scenario}'", args.object))?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(series.boxplot_csv()?.as_bytes())?;
    out.flush()?;
    Ok(())
}

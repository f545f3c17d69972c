//! `selfcare`: validate a converted store, extract features, run the
//! benchmark and the fusion pipeline under leave-one-subject-out, train a
//! bundle and classify single segments.

mod segment_file;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use selfcare_core::config::{self, KvConfig};
use selfcare_core::dataset::synth::{chest_stress_scenario, wrist_stress_scenario, ProtocolPlan};
use selfcare_core::dataset::{generate_synthetic, write_store, DatasetStore, SyntheticScenario};
use selfcare_core::dsp::PreprocessPlan;
use selfcare_core::eval::{
    class_labels, run_benchmark, run_majority, run_selfcare, tables_from_store, SubjectTables,
};
use selfcare_core::features::{feature_names, FeatureConfig};
use selfcare_core::fusion::{BranchCatalog, FusionConfig, LateFusion, SegmentSource, SelfCareModel, SensorTable};
use selfcare_core::learners::Family;
use selfcare_core::{Device, Error, Task};

#[derive(Parser)]
#[command(name = "selfcare", version, about = "Context-aware selective sensor fusion for stress detection")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a converted store, check every file and print the channel inventory.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write per-subject feature CSVs for every sensor of a device.
    Extract {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Early-fusion benchmark of every branch and classifier family.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_parser = parse_task)]
        task: Task,
        /// Comma-separated branch ids (default: the whole catalog).
        #[arg(long, value_delimiter = ',')]
        branches: Vec<String>,
        /// Comma-separated families (default: all five).
        #[arg(long, value_delimiter = ',')]
        families: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-subject-out evaluation of the fusion pipeline.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Run the early-fusion benchmark instead.
        #[arg(long)]
        benchmark: bool,
        /// Also report the majority-class baseline.
        #[arg(long)]
        majority: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a bundle on every subject of a store.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Bundle file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one segment file with a trained bundle.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV with one `modality,rate_hz,samples...` row per channel.
        #[arg(long)]
        segment: PathBuf,
        #[arg(long, value_enum, default_value_t = FusionArg::Kalman)]
        fusion: FusionArg,
    },
    /// Generate a synthetic store.
    Synth {
        #[arg(long, value_enum, default_value_t = DeviceArg::Wrist)]
        device: DeviceArg,
        #[arg(long, default_value_t = 6)]
        subjects: usize,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Full)]
        protocol: ProtocolArg,
        /// JSON scenario to generate instead of the built-in protocol.
        #[arg(long, conflicts_with_all = ["subjects", "protocol"])]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    device: DeviceArg,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long, value_enum, default_value_t = FusionArg::Kalman)]
    fusion: FusionArg,
    /// Override the gate threshold, in [0, 1].
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fusion config file replacing the shipped one for this device and task.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeviceArg {
    Wrist,
    Chest,
}

impl From<DeviceArg> for Device {
    fn from(d: DeviceArg) -> Device {
        match d {
            DeviceArg::Wrist => Device::Wrist,
            DeviceArg::Chest => Device::Chest,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Hard,
    Soft,
    Kalman,
}

impl From<FusionArg> for LateFusion {
    fn from(f: FusionArg) -> LateFusion {
        match f {
            FusionArg::Hard => LateFusion::Hard,
            FusionArg::Soft => LateFusion::Soft,
            FusionArg::Kalman => LateFusion::Kalman,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Full,
    Short,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format(_) | Error::MissingModality(_) => 2,
        Error::Integrity { .. } => 3,
        Error::Config(_) => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs {n}: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { dataset } => validate(&dataset),
        Command::Extract { data, out } => extract(&data, &out),
        Command::Benchmark {
            data,
            task,
            branches,
            families,
            seed,
            out,
        } => {
            let families = if families.is_empty() {
                Family::ALL.to_vec()
            } else {
                families.iter().map(|f| f.parse()).collect::<Result<_, _>>()?
            };
            benchmark(&data, task, &branches, &families, seed, &out)
        }
        Command::Eval {
            run,
            benchmark: bench,
            majority,
            out,
        } => {
            if bench {
                benchmark(&run.data, run.task, &[], &Family::ALL, run.seed, &out)
            } else {
                eval(&run, majority, &out)
            }
        }
        Command::Train { run, out } => train(&run, &out),
        Command::Predict { model, segment, fusion } => predict(&model, &segment, fusion.into()),
        Command::Synth {
            device,
            subjects,
            protocol,
            scenario,
            seed,
            out,
        } => synth(device.into(), subjects, protocol, scenario.as_deref(), seed, &out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Data(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn validate(dataset: &Path) -> Result<(), Error> {
    let store = DatasetStore::load(dataset)?;
    for line in store.inventory() {
        println!("{line}");
    }
    let ids = store.subject_ids();
    // Reading every record checks payload lengths against the manifest.
    for id in &ids {
        for device in [Device::Wrist, Device::Chest] {
            if store.subjects_with(device).contains(id) {
                store.record(id, device)?.check_durations()?;
            }
        }
    }
    println!("{} subjects", ids.len());
    Ok(())
}

fn load_tables(data: &DataArgs) -> Result<SubjectTables, Error> {
    let store = DatasetStore::load(&data.dataset)?;
    tables_from_store(&store, data.device.into(), &PreprocessPlan::default(), &FeatureConfig::default())
}

fn learners() -> KvConfig {
    KvConfig::parse(config::LEARNERS).expect("shipped learner config")
}

fn extract(data: &DataArgs, out: &Path) -> Result<(), Error> {
    let tables = load_tables(data)?;
    create_dir(out)?;
    let device: Device = data.device.into();
    for (id, table) in &tables {
        let path = out.join(format!("{id}-{device}.csv"));
        write_table_csv(&path, table)?;
        println!("{}: {} windows", path.display(), table.len());
    }
    Ok(())
}

fn write_table_csv(path: &Path, table: &SensorTable) -> Result<(), Error> {
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let sensors = table.sensors();
    let mut header = vec!["subject_id".to_string(), "index".into(), "label".into()];
    for &s in &sensors {
        header.extend(feature_names(s).iter().map(|n| n.to_string()));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, seg) in table.segments.iter().enumerate() {
        let mut row = vec![seg.subject_id.clone(), seg.index.to_string(), seg.label.to_string()];
        for &s in &sensors {
            row.extend(table.block(s)?.row(i).iter().map(|v| v.to_string()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn benchmark(data: &DataArgs, task: Task, ids: &[String], families: &[Family], seed: u64, out: &Path) -> Result<(), Error> {
    let tables = load_tables(data)?;
    let catalog = BranchCatalog::for_device(data.device.into(), Family::Dt);
    let branches = if ids.is_empty() {
        catalog.branches.clone()
    } else {
        catalog.select(ids)?
    };
    let report = run_benchmark(&tables, &branches, families, task, &learners(), seed)?;
    create_dir(out)?;
    write(&out.join("benchmark.json"), &report.to_json()?)?;
    let table = report.table();
    write(&out.join("benchmark.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn fusion_config(run: &RunArgs) -> Result<FusionConfig, Error> {
    let device: Device = run.data.device.into();
    let mut cfg = match &run.config {
        Some(path) => FusionConfig::from_kv(&KvConfig::load(path)?)?,
        None => FusionConfig::default_for(device, run.task),
    };
    if cfg.device != device || cfg.task != run.task {
        return Err(Error::Config(format!(
            "fusion config is for {} {}-class, run asks for {device} {}-class",
            cfg.device, cfg.task, run.task
        )));
    }
    if let Some(d) = run.delta {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::Config(format!("--delta {d} outside [0, 1]")));
        }
        cfg.delta = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn eval(run: &RunArgs, majority: bool, out: &Path) -> Result<(), Error> {
    let cfg = fusion_config(run)?;
    let tables = load_tables(&run.data)?;
    let report = run_selfcare(&tables, &cfg, run.fusion.into(), &learners(), run.seed)?;
    create_dir(out)?;
    write(&out.join("report.json"), &report.to_json()?)?;
    report.write_predictions_csv(&out.join("predictions.csv"))?;
    let mut table = report.table();
    if majority {
        let base = run_majority(&tables, cfg.device, cfg.task)?;
        write(&out.join("majority.json"), &base.to_json()?)?;
        table.push_str(&base.table());
    }
    write(&out.join("table.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn train(run: &RunArgs, out: &Path) -> Result<(), Error> {
    let cfg = fusion_config(run)?;
    let tables = load_tables(&run.data)?;
    let all: Vec<&SensorTable> = tables.values().collect();
    let table = SensorTable::concat(&all)?;
    let y = class_labels(&table, cfg.task)?;
    let model = selfcare_core::fusion::train_selfcare(&cfg, &table, &y, &learners(), run.seed)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    model.save(out)?;
    let ids: Vec<&str> = model.branches.iter().map(|b| b.id.as_str()).collect();
    println!(
        "trained {} {}-class on {} subjects ({} windows), branches {}",
        cfg.device,
        cfg.task,
        tables.len(),
        table.len(),
        ids.join(",")
    );
    Ok(())
}

fn predict(model: &Path, segment: &Path, backend: LateFusion) -> Result<(), Error> {
    let model = SelfCareModel::load(model)?;
    let record = segment_file::read(segment, model.config.device)?;
    let filtered = selfcare_core::dsp::preprocess(&record, &PreprocessPlan::default())?;
    let window = segment_file::whole_window(&filtered);
    let features = FeatureConfig::default();
    let mut source = SegmentSource::new(&window, &features);
    let mut fuser = model.fuser(backend)?;
    let p = model.classify(&mut source, &mut fuser)?;
    let names = model.config.task.class_names();
    println!("class {}", names[p.class]);
    let scores: Vec<String> = names.iter().zip(&p.scores).map(|(n, s)| format!("{n}={s:.4}")).collect();
    println!("scores {}", scores.join(" "));
    println!("branches {}", p.branches.join(","));
    let gate: Vec<String> = model
        .branches
        .iter()
        .zip(&p.decision.probabilities)
        .map(|(b, q)| format!("{}={q:.4}", b.id))
        .collect();
    println!("gate {} delta {} [{}]", p.decision.context, p.decision.delta, gate.join(" "));
    Ok(())
}

fn synth(
    device: Device,
    subjects: usize,
    protocol: ProtocolArg,
    scenario: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<(), Error> {
    let scenarios: Vec<SyntheticScenario> = match scenario {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            vec![serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?]
        }
        None => (0..subjects)
            .map(|i| {
                let base = match protocol {
                    ProtocolArg::Full => ProtocolPlan::default(),
                    ProtocolArg::Short => ProtocolPlan::short(),
                };
                let plan = ProtocolPlan {
                    stress_first: i % 2 == 1,
                    ..base
                };
                let id = format!("S{}", i + 1);
                let s = seed + i as u64;
                match device {
                    Device::Wrist => wrist_stress_scenario(&id, plan, s),
                    Device::Chest => chest_stress_scenario(&id, plan, s),
                }
            })
            .collect(),
    };
    let records = scenarios
        .iter()
        .enumerate()
        .map(|(i, sc)| generate_synthetic(sc, seed.wrapping_mul(31) + i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    write_store(out, &records)?;
    println!("wrote {} synthetic subjects to {}", records.len(), out.display());
    Ok(())
}

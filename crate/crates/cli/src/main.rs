use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use discforest::gauss::{accuracy, retrain, run_ablation, train_baseline, AblationKind};
use discforest::persist::{load_forest, save_forest};
use discforest::{Forest, RetrainLog};
use discforest_cli::config::{ExperimentConfig, Resolved, Scale, Task};
use discforest_cli::dataset::{read_sets, write_sets};
use discforest_cli::error::{CliError, Result, Stage, EXIT_OK, EXIT_USAGE};
use discforest_cli::experiment::{gauss_bench, run_experiment, LogStats};
use discforest_cli::table::{emit_figure_data, Provenance, ResultTable};
use discforest_mouse::pipeline::{
    evaluate_labels, evaluate_pose, ik_round_trip, noisy_test_set, query_seed, render_sets, retrain_label_forest,
    retrain_pose_forest, train_label_forest, train_pose_forest, ImageSets,
};
use discforest_mouse::poses::{default_library, sample_poses};
use discforest_mouse::{Camera, SkeletonModel};

/// Discriminatively retrained decision forests: Gaussian benchmark, mouse
/// pose regression and part labeling.
#[derive(Parser)]
#[command(name = "discforest", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "DISCFOREST_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a whole experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a default config for a task.
    Init {
        #[arg(value_parser = parse_task)]
        task: Task,
        #[arg(long, value_parser = parse_scale, default_value = "desk")]
        scale: Scale,
        #[arg(long, default_value = "results")]
        output: PathBuf,
    },
    /// Two-class Gaussian mixture benchmark.
    #[command(subcommand)]
    Gauss(GaussCmd),
    /// Mouse joint regression from depth images.
    #[command(subcommand)]
    Pose(PoseCmd),
    /// Per-pixel body part labeling.
    #[command(subcommand)]
    Label(LabelCmd),
    /// Limb completion checks.
    #[command(subcommand)]
    Ik(IkCmd),
    /// Save, load and inspect forest files.
    #[command(subcommand)]
    Model(ModelCmd),
}

#[derive(Args, Clone)]
struct Common {
    /// Config file; its task must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_scale)]
    scale: Option<Scale>,
}

#[derive(Subcommand)]
enum GaussCmd {
    /// Write the mixture spec and the three datasets as CSV.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a baseline forest.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Retrain a forest on the retraining set.
    Disc {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Held-out accuracy of a forest.
    Eval {
        #[arg(long)]
        forest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one parameter and write its figure CSV.
    Ablate {
        /// forest-size, m, leaf-size, start-level or iterations.
        #[arg(long)]
        kind: String,
        /// Comma separated grid; defaults to the standard sweep.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct ImageArgs {
    #[command(flatten)]
    common: Common,
    /// Rendered dataset directory (from `pose render`); rendered on the fly
    /// when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PoseCmd {
    /// Render the train, retraining and test image sets to disk.
    Render {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a baseline forest on the training images.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        images: ImageArgs,
    },
    /// Retrain a forest on the retraining images.
    Disc {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        images: ImageArgs,
    },
    /// Mean joint error on the test images; prints a JSON summary.
    Eval {
        #[arg(long)]
        forest: PathBuf,
        /// Depth noise standard deviation (mm) added to the test images.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Also write the per-joint errors as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        images: ImageArgs,
    },
}

#[derive(Subcommand)]
enum LabelCmd {
    /// Render the labeled image sets (with the configured noise) to disk.
    Render {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a baseline forest on the training images.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        images: ImageArgs,
    },
    /// Retrain a forest on the retraining images.
    Disc {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        images: ImageArgs,
    },
    /// Per-pixel accuracy and confusion matrix on the test images.
    Eval {
        #[arg(long)]
        forest: PathBuf,
        #[command(flatten)]
        images: ImageArgs,
    },
}

#[derive(Subcommand)]
enum IkCmd {
    /// Re-solve the limbs of sampled poses from their paws and report the
    /// worst bone-length and ankle-angle deviations.
    Demo {
        #[arg(long, default_value_t = 1000)]
        poses: usize,
        #[arg(long, default_value_t = discforest::gauss::CANONICAL_SEED)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Load a forest and write it back in the current format.
    Save {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that a forest file loads.
    Load {
        #[arg(long)]
        forest: PathBuf,
    },
    /// Print the shape of a forest.
    Inspect {
        #[arg(long)]
        forest: PathBuf,
    },
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    match s {
        "gauss" => Ok(Task::Gauss),
        "pose" => Ok(Task::Pose),
        "label" => Ok(Task::Label),
        _ => Err(format!("unknown task {s:?} (gauss, pose or label)")),
    }
}

fn parse_scale(s: &str) -> std::result::Result<Scale, String> {
    match s {
        "desk" => Ok(Scale::Desk),
        "full" => Ok(Scale::Full),
        _ => Err(format!("unknown scale {s:?} (desk or full)")),
    }
}

fn config_for(task: Task, common: &Common) -> Result<ExperimentConfig> {
    let mut c = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(task, "results"),
    };
    if c.task != task {
        return Err(CliError::usage(format!("config is for task {:?}, not {task:?}", c.task)));
    }
    if let Some(seed) = common.seed {
        c.seed = seed;
    }
    if let Some(scale) = common.scale {
        c.scale = scale;
    }
    Ok(c)
}

fn image_config(task: Task, args: &ImageArgs) -> Result<ExperimentConfig> {
    let mut c = config_for(task, &args.common)?;
    if args.dataset.is_some() {
        match task {
            Task::Pose => c.pose.dataset = args.dataset.clone(),
            Task::Label => c.label.dataset = args.dataset.clone(),
            Task::Gauss => {}
        }
    }
    Ok(c)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_forest(forest: &Forest<f64>, log: Option<(&RetrainLog, Option<&Path>)>, out: &Path) -> Result<()> {
    save_forest(forest, out).stage("write")?;
    if let Some((log, Some(path))) = log {
        fs::write(path, log.to_json_lines()).stage("write")?;
    }
    Ok(())
}

fn gauss(cmd: GaussCmd) -> Result<()> {
    let resolve = |common: &Common| -> Result<_> {
        match config_for(Task::Gauss, common)?.resolve().stage("config")? {
            Resolved::Gauss(g) => Ok(g),
            _ => unreachable!("task checked"),
        }
    };
    match cmd {
        GaussCmd::Gen { out, common } => {
            let g = resolve(&common)?;
            let bench = gauss_bench(&g).stage("data")?;
            fs::create_dir_all(&out).stage("write")?;
            fs::write(out.join("spec.json"), serde_json::to_string_pretty(&bench.spec)? + "\n").stage("write")?;
            for (name, set) in [("train", &bench.train), ("disc", &bench.disc), ("eval", &bench.eval)] {
                let mut w = csv::Writer::from_path(out.join(format!("{name}.csv"))).stage("write")?;
                w.write_record(["x", "y", "class"]).stage("write")?;
                for p in &set.points {
                    w.write_record([p.x.to_string(), p.y.to_string(), p.class.to_string()]).stage("write")?;
                }
                w.flush().stage("write")?;
            }
            Ok(())
        }
        GaussCmd::Train { out, common } => {
            let g = resolve(&common)?;
            let bench = gauss_bench(&g).stage("data")?;
            let forest = train_baseline(&bench.train, &g.train).stage("train")?;
            write_forest(&forest, None, &out)
        }
        GaussCmd::Disc {
            forest,
            out,
            log,
            common,
        } => {
            let g = resolve(&common)?;
            let bench = gauss_bench(&g).stage("data")?;
            let base: Forest<f64> = load_forest(&forest).stage("load")?;
            let (disc, retrain_log) = retrain(&base, &bench.disc, &g.disc).stage("disc")?;
            write_forest(&disc, Some((&retrain_log, log.as_deref())), &out)?;
            print_json(&LogStats::of(&retrain_log))
        }
        GaussCmd::Eval { forest, common } => {
            let g = resolve(&common)?;
            let bench = gauss_bench(&g).stage("data")?;
            let f: Forest<f64> = load_forest(&forest).stage("load")?;
            let acc = accuracy(&f, &bench.eval).stage("eval")?;
            print_json(&serde_json::json!({ "accuracy": acc, "points": bench.eval.points.len() }))
        }
        GaussCmd::Ablate {
            kind,
            grid,
            out,
            common,
        } => {
            let kind = AblationKind::parse(&kind).ok_or_else(|| CliError::usage(format!("unknown ablation {kind:?}")))?;
            let config = config_for(Task::Gauss, &common)?;
            let g = resolve(&common)?;
            let grid = if grid.is_empty() { kind.default_grid() } else { grid };
            let bench = gauss_bench(&g).stage("data")?;
            let rows = run_ablation(&bench, kind, &grid, &g.train, &g.disc).stage("ablation")?;
            let figure = match kind {
                AblationKind::ForestSize => "fig3",
                AblationKind::Candidates => "fig4",
                AblationKind::LeafSize => "fig5",
                AblationKind::Iterations => "fig6",
                AblationKind::StartLevel => "fig7",
            };
            let cols = discforest_cli::table::figure_schema(figure).expect("known figure");
            let provenance = Provenance {
                config_hash: config.hash(),
                data_hash: discforest_cli::experiment::hash_bench(&bench),
                timestamp: 0,
            };
            let mut table = ResultTable::new(&cols, provenance);
            for r in &rows {
                table.push(vec![r.value as f64, r.baseline_acc, r.disc_acc])?;
            }
            emit_figure_data(&table, figure, &out).stage("write")
        }
    }
}

struct ImageRun<T> {
    config: T,
    sets: ImageSets,
    camera: Camera,
}

fn pose_run(args: &ImageArgs) -> Result<ImageRun<discforest_mouse::pipeline::PoseExperimentConfig>> {
    let Resolved::Pose(p) = image_config(Task::Pose, args)?.resolve().stage("config")? else {
        unreachable!("task checked")
    };
    let mut config = p.config;
    let sets = match &p.dataset {
        Some(root) => {
            let (sets, camera) = read_sets(root).stage("data")?;
            config.camera = camera;
            sets
        }
        None => render_sets(
            &SkeletonModel::mouse(),
            &config.camera,
            &config.ranges,
            &config.images,
            0.0,
            config.seed,
        )
        .stage("render")?,
    };
    Ok(ImageRun {
        camera: config.camera,
        config,
        sets,
    })
}

fn label_run(args: &ImageArgs) -> Result<ImageRun<discforest_mouse::pipeline::LabelExperimentConfig>> {
    let Resolved::Label(l) = image_config(Task::Label, args)?.resolve().stage("config")? else {
        unreachable!("task checked")
    };
    let mut config = l.config;
    let sets = match &l.dataset {
        Some(root) => {
            let (sets, camera) = read_sets(root).stage("data")?;
            config.camera = camera;
            sets
        }
        None => render_sets(
            &SkeletonModel::mouse(),
            &config.camera,
            &config.ranges,
            &config.images,
            config.noise_sigma,
            config.seed,
        )
        .stage("render")?,
    };
    Ok(ImageRun {
        camera: config.camera,
        config,
        sets,
    })
}

fn pose(cmd: PoseCmd) -> Result<()> {
    match cmd {
        PoseCmd::Render { out, common } => {
            let run = pose_run(&ImageArgs { common, dataset: None })?;
            write_sets(&run.sets, &run.camera, 0.0, &out).stage("write")
        }
        PoseCmd::Train { out, images } => {
            let run = pose_run(&images)?;
            let forest = train_pose_forest(&run.config, &run.sets.train).stage("train")?;
            write_forest(&forest, None, &out)
        }
        PoseCmd::Disc {
            forest,
            out,
            log,
            images,
        } => {
            let run = pose_run(&images)?;
            let base: Forest<f64> = load_forest(&forest).stage("load")?;
            let (disc, retrain_log) = retrain_pose_forest(&run.config, &base, &run.sets.disc).stage("disc")?;
            write_forest(&disc, Some((&retrain_log, log.as_deref())), &out)?;
            print_json(&LogStats::of(&retrain_log))
        }
        PoseCmd::Eval {
            forest,
            noise,
            csv,
            images,
        } => {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(CliError::usage("--noise must be a finite non-negative number"));
            }
            let run = pose_run(&images)?;
            let f: Forest<f64> = load_forest(&forest).stage("load")?;
            let model = SkeletonModel::mouse();
            let noisy;
            let test = if noise == 0.0 {
                &run.sets.test
            } else {
                // Same noise as the experiment's sweep when sigma is one of its levels.
                let levels = &run.config.noise_levels;
                let k = levels.iter().position(|&s| s == noise).unwrap_or(levels.len());
                noisy = noisy_test_set(&model, &run.config, &run.sets.test, k, noise).stage("noise")?;
                &noisy
            };
            let summary = evaluate_pose(&f, test, &run.camera, run.config.query_pixels, query_seed(&run.config))
                .stage("eval")?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(&path).stage("write")?;
                let mut header = vec!["sigma".to_string(), "error".to_string()];
                header.extend((1..=summary.per_joint.len()).map(|j| format!("joint{j}")));
                w.write_record(&header).stage("write")?;
                let mut row = vec![noise.to_string(), summary.mean.to_string()];
                row.extend(summary.per_joint.iter().map(f64::to_string));
                w.write_record(&row).stage("write")?;
                w.flush().stage("write")?;
            }
            print_json(&serde_json::json!({ "sigma": noise, "summary": summary }))
        }
    }
}

fn label(cmd: LabelCmd) -> Result<()> {
    match cmd {
        LabelCmd::Render { out, common } => {
            let run = label_run(&ImageArgs { common, dataset: None })?;
            write_sets(&run.sets, &run.camera, run.config.noise_sigma, &out).stage("write")
        }
        LabelCmd::Train { out, images } => {
            let run = label_run(&images)?;
            let forest = train_label_forest(&run.config, &run.sets.train).stage("train")?;
            write_forest(&forest, None, &out)
        }
        LabelCmd::Disc {
            forest,
            out,
            log,
            images,
        } => {
            let run = label_run(&images)?;
            let base: Forest<f64> = load_forest(&forest).stage("load")?;
            let (disc, retrain_log) = retrain_label_forest(&run.config, &base, &run.sets.disc).stage("disc")?;
            write_forest(&disc, Some((&retrain_log, log.as_deref())), &out)?;
            print_json(&LogStats::of(&retrain_log))
        }
        LabelCmd::Eval { forest, images } => {
            let run = label_run(&images)?;
            let f: Forest<f64> = load_forest(&forest).stage("load")?;
            let m = evaluate_labels(&f, &run.sets.test, &run.camera).stage("eval")?;
            print_json(&serde_json::json!({
                "accuracy": m.accuracy(),
                "diagonal": m.diagonal(),
                "normalized": m.normalized(),
                "confusion": m,
            }))
        }
    }
}

fn ik(cmd: IkCmd) -> Result<()> {
    let IkCmd::Demo { poses, seed } = cmd;
    let model = SkeletonModel::mouse();
    let library = default_library(&model);
    let sampled = sample_poses(&model, &library, &Default::default(), poses, seed).stage("poses")?;
    let report = ik_round_trip(&model, &sampled).stage("ik")?;
    print_json(&report)
}

fn model(cmd: ModelCmd) -> Result<()> {
    match cmd {
        ModelCmd::Save { forest, out } => {
            let f: Forest<f64> = load_forest(&forest).stage("load")?;
            write_forest(&f, None, &out)
        }
        ModelCmd::Load { forest } => {
            let f: Forest<f64> = load_forest(&forest).stage("load")?;
            println!("ok: {} {} trees", f.mode.name(), f.len());
            Ok(())
        }
        ModelCmd::Inspect { forest } => {
            let f: Forest<f64> = load_forest(&forest).stage("load")?;
            let trees: Vec<_> = f
                .trees
                .iter()
                .map(|t| serde_json::json!({ "nodes": t.num_nodes(), "leaves": t.num_leaves(), "depth": t.depth() }))
                .collect();
            print_json(&serde_json::json!({
                "mode": f.mode.name(),
                "trees": trees,
                "params": {
                    "candidates": f.params.candidates,
                    "leafCapacity": f.params.leaf_capacity,
                    "maxLevels": f.params.max_levels,
                    "seed": f.params.seed,
                },
            }))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, output, seed } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(o) = output {
                c.output = o;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            let out = run_experiment(&c)?;
            print_json(&out.summary)
        }
        Command::Init { task, scale, output } => {
            let mut c = ExperimentConfig::new(task, output);
            c.scale = scale;
            print!("{}", c.to_toml());
            Ok(())
        }
        Command::Gauss(cmd) => gauss(cmd),
        Command::Pose(cmd) => pose(cmd),
        Command::Label(cmd) => label(cmd),
        Command::Ik(cmd) => ik(cmd),
        Command::Model(cmd) => model(cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK } as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

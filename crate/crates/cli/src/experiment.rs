//! Running a configured experiment end to end and writing its artifacts:
//! figure CSVs, a JSON summary, provenance, the retraining log and the
//! trained forests.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use discforest::gauss::{
    accuracy, gen_mixture_spec, retrain, run_ablation, run_controls, train_baseline, AblationKind, ControlResult,
    GaussBench, GaussianMixtureSpec,
};
use discforest::persist::save_forest;
use discforest::{Forest, RetrainAction, RetrainLog};
use discforest_mouse::estimate::ConfusionMatrix;
use discforest_mouse::pipeline::{
    render_sets, run_label_experiment_on, run_pose_experiment_on, ImageSets, JointErrorSummary, NoiseRow,
};
use discforest_mouse::render::PartLabel;
use discforest_mouse::SkeletonModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, GaussRun, LabelRun, PoseRun, Resolved};
use crate::dataset::{hash_sets, read_sets};
use crate::error::{CliError, Result, Stage};
use crate::table::{emit_figure_data, Provenance, ResultTable};

pub const SUMMARY_FILE: &str = "summary.json";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "retrain-log.jsonl";

/// Counts of retraining actions plus the number of nodes where the
/// installed test scored below the incumbent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogStats {
    pub nodes: usize,
    pub rescored: usize,
    pub shrunk: usize,
    pub grown: usize,
    pub leaf_rebuilt: usize,
    pub monotonicity_violations: usize,
}

impl LogStats {
    pub fn of(log: &RetrainLog) -> Self {
        LogStats {
            nodes: log.entries.len(),
            rescored: log.count(RetrainAction::Rescored),
            shrunk: log.count(RetrainAction::Shrunk),
            grown: log.count(RetrainAction::Grown),
            leaf_rebuilt: log.count(RetrainAction::LeafRebuilt),
            monotonicity_violations: log.monotonicity_violations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationSummary {
    pub kind: AblationKind,
    pub figure: String,
    pub rows: Vec<discforest::gauss::AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussSummary {
    pub n: usize,
    pub baseline_acc: f64,
    pub disc_acc: f64,
    pub log: LogStats,
    pub controls: Option<ControlResult>,
    pub ablations: Vec<AblationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoseSummary {
    pub images: [usize; 3],
    pub baseline: JointErrorSummary,
    pub disc: JointErrorSummary,
    pub noise: Vec<NoiseRow>,
    pub forest_size: Vec<(usize, f64, f64)>,
    pub limb_errors: Vec<f64>,
    pub limb_images: usize,
    pub m_sweep: Vec<(usize, f64, f64)>,
    pub log: LogStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelSummary {
    pub images: [usize; 3],
    pub noise_sigma: f64,
    pub baseline_accuracy: f64,
    pub disc_accuracy: f64,
    pub baseline_confusion: ConfusionMatrix,
    pub disc_confusion: ConfusionMatrix,
    /// Row-normalised diagonal of the retrained forest's confusion.
    pub disc_diagonal: Vec<f64>,
    pub empty_rows: Vec<usize>,
    pub log: LogStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum Summary {
    Gauss(GaussSummary),
    Pose(PoseSummary),
    Label(LabelSummary),
}

// The derived internally tagged impl buffers the document, and with
// serde_json's arbitrary_precision numbers do not survive the buffer.
impl<'de> Deserialize<'de> for Summary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let mut v = serde_json::Value::deserialize(d)?;
        let task = v
            .as_object_mut()
            .and_then(|o| o.remove("task"))
            .ok_or_else(|| D::Error::missing_field("task"))?;
        let r = match task.as_str() {
            Some("gauss") => serde_json::from_value(v).map(Summary::Gauss),
            Some("pose") => serde_json::from_value(v).map(Summary::Pose),
            Some("label") => serde_json::from_value(v).map(Summary::Label),
            _ => return Err(D::Error::custom(format!("unknown task {task}"))),
        };
        r.map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub tables: Vec<(String, ResultTable)>,
    pub provenance: Provenance,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn figure_of(kind: AblationKind) -> &'static str {
    match kind {
        AblationKind::ForestSize => "fig3",
        AblationKind::Candidates => "fig4",
        AblationKind::LeafSize => "fig5",
        AblationKind::Iterations => "fig6",
        AblationKind::StartLevel => "fig7",
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    provenance: Provenance,
    tables: Vec<(String, ResultTable)>,
}

impl Artifacts<'_> {
    fn table(&self, figure: &str) -> ResultTable {
        let cols = crate::table::figure_schema(figure).expect("known figure");
        ResultTable::new(&cols, self.provenance.clone())
    }

    fn emit(&mut self, figure: &str, table: ResultTable) -> Result<()> {
        emit_figure_data(&table, figure, &self.dir.join(format!("{figure}.csv"))).stage("write")?;
        self.tables.push((figure.to_string(), table));
        Ok(())
    }

    fn forests(&self, baseline: &Forest<f64>, disc: &Forest<f64>, log: &RetrainLog) -> Result<()> {
        save_forest(baseline, &self.dir.join("baseline.forest.json")).stage("write")?;
        save_forest(disc, &self.dir.join("disc.forest.json")).stage("write")?;
        fs::write(self.dir.join(LOG_FILE), log.to_json_lines()).stage("write")?;
        Ok(())
    }
}

/// Execute the experiment described by `config`, writing every artifact to
/// `config.output`. Reruns of the same config produce identical files,
/// except for the timestamp in the provenance file.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let resolved = config.resolve().stage("config")?;
    let dir = config.output.as_path();
    fs::create_dir_all(dir).stage("output")?;
    fs::write(dir.join(CONFIG_FILE), config.to_recorded_toml()).stage("output")?;
    let config_hash = config.hash();

    let (summary, tables, provenance) = match resolved {
        Resolved::Gauss(g) => run_gauss(&g, dir, config_hash)?,
        Resolved::Pose(p) => run_pose(&p, dir, config_hash)?,
        Resolved::Label(l) => run_label(&l, dir, config_hash)?,
    };
    let mut text = serde_json::to_string_pretty(&summary).stage("write")?;
    text.push('\n');
    fs::write(dir.join(SUMMARY_FILE), text).stage("write")?;
    let mut text = serde_json::to_string_pretty(&provenance).stage("write")?;
    text.push('\n');
    fs::write(dir.join(PROVENANCE_FILE), text).stage("write")?;
    Ok(RunOutput {
        summary,
        tables,
        provenance,
    })
}

/// Re-run the experiment recorded in an output directory.
pub fn rerun(recorded: &Path, output: &Path) -> Result<RunOutput> {
    let mut config = ExperimentConfig::load(&recorded.join(CONFIG_FILE))?;
    config.output = output.to_path_buf();
    run_experiment(&config)
}

pub fn load_summary(dir: &Path) -> Result<Summary> {
    let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

type Outcome = (Summary, Vec<(String, ResultTable)>, Provenance);

pub fn load_spec(path: &Path) -> Result<GaussianMixtureSpec> {
    let spec: GaussianMixtureSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
    spec.validate().map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

pub fn gauss_bench(g: &GaussRun) -> Result<GaussBench<f64>> {
    let spec = match &g.spec {
        Some(p) => load_spec(p)?,
        None => gen_mixture_spec(g.seed),
    };
    Ok(GaussBench::from_spec(spec, g.seed, g.n))
}

pub fn hash_bench(bench: &GaussBench<f64>) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&bench.spec).expect("spec serialises"));
    for set in [&bench.train, &bench.disc, &bench.eval] {
        for p in &set.points {
            h.update(p.x.to_le_bytes());
            h.update(p.y.to_le_bytes());
            h.update((p.class as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn run_gauss(g: &GaussRun, dir: &Path, config_hash: String) -> Result<Outcome> {
    let bench = gauss_bench(g).stage("data")?;
    let mut art = Artifacts {
        dir,
        provenance: Provenance {
            config_hash,
            data_hash: hash_bench(&bench),
            timestamp: now(),
        },
        tables: Vec::new(),
    };
    let baseline = train_baseline(&bench.train, &g.train).stage("train")?;
    let (disc, log) = retrain(&baseline, &bench.disc, &g.disc).stage("disc")?;
    art.forests(&baseline, &disc, &log)?;
    let baseline_acc = accuracy(&baseline, &bench.eval).stage("eval")?;
    let disc_acc = accuracy(&disc, &bench.eval).stage("eval")?;
    let controls = if g.controls {
        Some(run_controls(&bench, &g.train, &g.disc).stage("controls")?)
    } else {
        None
    };
    let mut ablations = Vec::new();
    for (kind, grid) in &g.ablations {
        let rows = run_ablation(&bench, *kind, grid, &g.train, &g.disc).stage("ablation")?;
        let figure = figure_of(*kind);
        let mut t = art.table(figure);
        for r in &rows {
            t.push(vec![r.value as f64, r.baseline_acc, r.disc_acc])?;
        }
        art.emit(figure, t)?;
        ablations.push(AblationSummary {
            kind: *kind,
            figure: figure.to_string(),
            rows,
        });
    }
    let summary = Summary::Gauss(GaussSummary {
        n: g.n,
        baseline_acc,
        disc_acc,
        log: LogStats::of(&log),
        controls,
        ablations,
    });
    Ok((summary, art.tables, art.provenance))
}

fn image_sets(
    model: &SkeletonModel,
    dataset: Option<&Path>,
    camera: &mut discforest_mouse::Camera,
    render: impl FnOnce(&discforest_mouse::Camera) -> discforest_mouse::Result<ImageSets>,
) -> Result<ImageSets> {
    let _ = model;
    match dataset {
        Some(root) => {
            let (sets, cam) = read_sets(root)?;
            *camera = cam;
            Ok(sets)
        }
        None => Ok(render(camera)?),
    }
}

fn run_pose(p: &PoseRun, dir: &Path, config_hash: String) -> Result<Outcome> {
    let model = SkeletonModel::mouse();
    let mut cfg = p.config.clone();
    let sets = image_sets(&model, p.dataset.as_deref(), &mut cfg.camera, |cam| {
        render_sets(&model, cam, &cfg.ranges, &cfg.images, 0.0, cfg.seed)
    })
    .stage("data")?;
    let mut art = Artifacts {
        dir,
        provenance: Provenance {
            config_hash,
            data_hash: hash_sets(&sets),
            timestamp: now(),
        },
        tables: Vec::new(),
    };
    let res = run_pose_experiment_on(&model, &cfg, &sets).stage("pose")?;
    art.forests(&res.baseline, &res.disc, &res.log)?;
    let clean = res
        .clean()
        .cloned()
        .ok_or_else(|| CliError::usage("pose noise_levels must include 0").with_stage("config"))?;

    let mut t = art.table("fig11");
    for &(k, b, d) in &res.forest_size {
        t.push(vec![k as f64, b, d])?;
    }
    art.emit("fig11", t)?;

    let mut m_sweep = Vec::new();
    if !p.m_grid.is_empty() {
        let mut t = art.table("fig12");
        for &m in &p.m_grid {
            let mut c = cfg.clone();
            c.train.candidates = m;
            c.disc.candidates = m;
            c.noise_levels = vec![0.0];
            let r = run_pose_experiment_on(&model, &c, &sets).stage("pose")?;
            let row = r.clean().expect("sigma 0 requested");
            t.push(vec![m as f64, row.baseline.mean, row.disc.mean])?;
            m_sweep.push((m, row.baseline.mean, row.disc.mean));
        }
        art.emit("fig12", t)?;
    }

    let mut t = art.table("fig13");
    for (j, (b, d)) in clean.baseline.per_joint.iter().zip(&clean.disc.per_joint).enumerate() {
        t.push(vec![(j + 1) as f64, *b, *d])?;
    }
    art.emit("fig13", t)?;

    let (limb_errors, limb_images) = res.limbs.clone();
    let mut t = art.table("fig14");
    for (k, e) in limb_errors.iter().enumerate() {
        t.push(vec![(k + 13) as f64, *e])?;
    }
    art.emit("fig14", t)?;

    let mut t = art.table("fig15");
    for row in &res.noise {
        let mut r = vec![row.sigma, row.baseline.mean, row.disc.mean];
        r.extend_from_slice(&row.disc.per_joint);
        t.push(r)?;
    }
    art.emit("fig15", t)?;

    let summary = Summary::Pose(PoseSummary {
        images: [sets.train.len(), sets.disc.len(), sets.test.len()],
        baseline: clean.baseline,
        disc: clean.disc,
        noise: res.noise.clone(),
        forest_size: res.forest_size.clone(),
        limb_errors,
        limb_images,
        m_sweep,
        log: LogStats::of(&res.log),
    });
    Ok((summary, art.tables, art.provenance))
}

fn run_label(l: &LabelRun, dir: &Path, config_hash: String) -> Result<Outcome> {
    let model = SkeletonModel::mouse();
    let mut cfg = l.config.clone();
    let sets = image_sets(&model, l.dataset.as_deref(), &mut cfg.camera, |cam| {
        render_sets(&model, cam, &cfg.ranges, &cfg.images, cfg.noise_sigma, cfg.seed)
    })
    .stage("data")?;
    let mut art = Artifacts {
        dir,
        provenance: Provenance {
            config_hash,
            data_hash: hash_sets(&sets),
            timestamp: now(),
        },
        tables: Vec::new(),
    };
    let res = run_label_experiment_on(&cfg, &sets).stage("label")?;
    art.forests(&res.baseline, &res.disc, &res.log)?;
    let norm = res.disc_confusion.normalized();
    let mut t = art.table("fig26");
    for c in PartLabel::ALL.iter().filter(|c| **c != PartLabel::Background) {
        let mut row = vec![f64::from(c.id())];
        row.extend_from_slice(&norm[c.id() as usize]);
        t.push(row)?;
    }
    art.emit("fig26", t)?;
    let summary = Summary::Label(LabelSummary {
        images: [sets.train.len(), sets.disc.len(), sets.test.len()],
        noise_sigma: cfg.noise_sigma,
        baseline_accuracy: res.baseline_confusion.accuracy(),
        disc_accuracy: res.disc_confusion.accuracy(),
        disc_diagonal: res.disc_confusion.diagonal(),
        empty_rows: res.disc_confusion.empty_rows(),
        baseline_confusion: res.baseline_confusion,
        disc_confusion: res.disc_confusion,
        log: LogStats::of(&res.log),
    });
    Ok((summary, art.tables, art.provenance))
}

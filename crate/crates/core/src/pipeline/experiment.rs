use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::folds::stratified_folds;
use super::records::{load_pointsets, SlideRecord};
use super::stages::{build_graphs, detect_slide, featurize_all};
use super::synth::{render_slide, synth_dataset};
use crate::detection::GrayImage;
use crate::gcn::{evaluate, train, TrainConfig};
use crate::image_graph::ImageGraph;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_slides: usize,
    pub test_slides: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]` on the held-out fold.
    pub confusion: Vec<Vec<usize>>,
    pub final_train_loss: f64,
    pub test_slide_ids: Vec<String>,
    pub predictions: Vec<usize>,
}

/// Everything an experiment produces except wall-clock timings, so two runs
/// with the same configuration serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub class_names: Vec<String>,
    pub slides: usize,
    pub patches: usize,
    pub graph_nodes: usize,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over folds.
    pub sd_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_seconds: f64,
    pub featurize_seconds: f64,
    pub graph_seconds: f64,
    pub fold_train_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub timings: Timings,
}

/// Reads `slide_id,label,path` rows; labels may be indices or class names.
pub fn read_image_manifest(path: &Path, class_names: &[String]) -> Result<Vec<(String, usize, PathBuf)>> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(f));
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let fail = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message,
        };
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.len() != 3 {
            return Err(fail(format!("expected slide_id,label,path, got {} fields", row.len())));
        }
        let label = row[1]
            .trim()
            .parse::<usize>()
            .ok()
            .or_else(|| class_names.iter().position(|c| c == row[1].trim()))
            .filter(|&l| l < class_names.len())
            .ok_or_else(|| fail(format!("unknown label {:?}", &row[1])))?;
        let p = PathBuf::from(&row[2]);
        out.push((row[0].to_string(), label, if p.is_absolute() { p } else { base.join(p) }));
    }
    Ok(out)
}

/// Slides named by the configuration's data section.
pub fn load_slides(config: &ExperimentConfig) -> Result<Vec<SlideRecord>> {
    let classes = config.class_names.len();
    let records = if let Some(path) = &config.data.pointsets {
        load_pointsets(path)?
    } else if let Some(path) = &config.data.image_manifest {
        let entries = read_image_manifest(path, &config.class_names)?;
        for (_, _, p) in &entries {
            if !p.is_file() {
                return Err(Error::invalid(format!("image {} does not exist", p.display())));
            }
        }
        let bank = config.detection.bank()?;
        let params = config.detection.params();
        entries
            .iter()
            .map(|(id, label, p)| {
                let img = GrayImage::load(p)?;
                detect_slide(
                    &img,
                    id,
                    *label,
                    &p.display().to_string(),
                    config.tiling.patch_size,
                    config.tiling.stride,
                    &bank,
                    &params,
                )
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let synthetic = synth_dataset(config.data.slides_per_class, &config.data.synthetic, config.seed)?;
        if config.data.render {
            let bank = config.detection.bank()?;
            let params = config.detection.params();
            let size = config.data.synthetic.patch_size;
            synthetic
                .par_iter()
                .map(|r| {
                    let img = render_slide(r, config.data.blob_sigma, config.data.blob_depth)?;
                    detect_slide(&img, &r.slide_id, r.label, &r.provenance.source, size, size, &bank, &params)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            synthetic
        }
    };
    for r in &records {
        r.validate(classes)?;
    }
    Ok(records)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Stratified k-fold cross-validation over image graphs: each fold is held
/// out once while the model trains on the others.
pub fn cross_validate(
    graphs: &[ImageGraph],
    class_names: &[String],
    folds: usize,
    seed: u64,
    train_config: &TrainConfig,
) -> Result<(Vec<FoldReport>, Vec<f64>)> {
    let labels: Vec<usize> = graphs.iter().map(|g| g.label).collect();
    let assignment = stratified_folds(&labels, folds, seed)?;
    let mut reports = Vec::with_capacity(folds);
    let mut seconds = Vec::with_capacity(folds);
    for fold in 0..folds {
        let start = Instant::now();
        let (mut test, mut training) = (Vec::new(), Vec::new());
        for (g, &f) in graphs.iter().zip(&assignment) {
            if f == fold { &mut test } else { &mut training }.push(g.clone());
        }
        let cfg = TrainConfig {
            seed: train_config.seed.wrapping_add(fold as u64),
            classes: Some(class_names.len()),
            ..train_config.clone()
        };
        let outcome = train(&training, &cfg)?;
        let eval = evaluate(&outcome.classifier, &test)?;
        log::info!("fold {fold}: accuracy {:.4}", eval.accuracy);
        reports.push(FoldReport {
            fold,
            train_slides: training.len(),
            test_slides: test.len(),
            accuracy: eval.accuracy,
            confusion: eval.confusion,
            final_train_loss: outcome.history.last().map_or(0.0, |h| h.loss),
            test_slide_ids: test.iter().map(|g| g.slide_id.clone()).collect(),
            predictions: eval.predictions,
        });
        seconds.push(start.elapsed().as_secs_f64());
    }
    Ok((reports, seconds))
}

/// Load, featurize, build graphs, then cross-validate. All configuration
/// and input problems surface before training starts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let t0 = Instant::now();
    let records = load_slides(config)?;
    if records.len() < config.folds {
        return Err(Error::invalid(format!(
            "{} slides cannot fill {} folds",
            records.len(),
            config.folds
        )));
    }
    let load_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let features = featurize_all(&records, config.graph.cell_graph_radius)?;
    let featurize_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let graphs = build_graphs(&features, config.graph.similarity_threshold, config.graph.min_nuclei)?;
    let graph_seconds = t2.elapsed().as_secs_f64();

    let (folds, fold_train_seconds) =
        cross_validate(&graphs, &config.class_names, config.folds, config.seed, &config.train)?;
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let (mean_accuracy, sd_accuracy) = mean_sd(&accs);
    let report = ExperimentReport {
        seed: config.seed,
        class_names: config.class_names.clone(),
        slides: records.len(),
        patches: records.iter().map(|r| r.patches.len()).sum(),
        graph_nodes: graphs.iter().map(ImageGraph::node_count).sum(),
        folds,
        mean_accuracy,
        sd_accuracy,
    };
    Ok(ExperimentOutcome {
        report,
        timings: Timings {
            load_seconds,
            featurize_seconds,
            graph_seconds,
            fold_train_seconds,
            total_seconds: t0.elapsed().as_secs_f64(),
        },
    })
}

impl ExperimentReport {
    /// Human-readable table of per-fold results.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:>6} {:>6} {:>10} {:>12}", "fold", "train", "test", "accuracy", "train_loss");
        for f in &self.folds {
            let _ = writeln!(
                s,
                "{:<6} {:>6} {:>6} {:>10.4} {:>12.6}",
                f.fold, f.train_slides, f.test_slides, f.accuracy, f.final_train_loss
            );
        }
        let _ = writeln!(
            s,
            "accuracy (%): {:.2} +/- {:.2}",
            100.0 * self.mean_accuracy,
            100.0 * self.sd_accuracy
        );
        let _ = writeln!(s, "slides {}  patches {}  graph nodes {}", self.slides, self.patches, self.graph_nodes);
        for f in &self.folds {
            let _ = writeln!(s, "fold {} confusion (rows true, columns predicted):", f.fold);
            let width = self.class_names.iter().map(String::len).max().unwrap_or(4).max(4);
            let _ = write!(s, "{:<width$}", "");
            for c in &self.class_names {
                let _ = write!(s, " {c:>width$}");
            }
            s.push('\n');
            for (c, row) in self.class_names.iter().zip(&f.confusion) {
                let _ = write!(s, "{c:<width$}");
                for v in row {
                    let _ = write!(s, " {v:>width$}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["fold", "train_slides", "test_slides", "accuracy", "final_train_loss"])?;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.train_slides.to_string(),
                f.test_slides.to_string(),
                f.accuracy.to_string(),
                f.final_train_loss.to_string(),
            ])?;
        }
        w.write_record(["mean", "", "", &self.mean_accuracy.to_string(), ""])?;
        w.write_record(["sd", "", "", &self.sd_accuracy.to_string(), ""])?;
        let bytes = w.into_inner().map_err(|e| Error::io("<summary>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Writes `report.json`, `summary.csv`, `summary.txt` and `timings.json`.
pub fn write_outputs(dir: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write("report.json", serde_json::to_string_pretty(&outcome.report)?)?;
    write("summary.csv", outcome.report.summary_csv()?)?;
    write("summary.txt", outcome.report.summary_text())?;
    write("timings.json", serde_json::to_string_pretty(&outcome.timings)?)?;
    Ok(())
}
